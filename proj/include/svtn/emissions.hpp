#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace svtn::emissions {

using Mat = Eigen::MatrixXd;

// China VI transient NOx limit, g/kWh; strict > labels high-emission.
inline constexpr double kEfThreshold = 0.460;

inline int label_for_ef(double ef_mean) { return ef_mean > kEfThreshold ? 1 : 0; }

struct ObdRecord {
    double timestamp = 0.0;  // seconds
    std::string vehicle_id;
    double c_nox = 0.0;  // ppm
    double q_exh = 0.0;  // kg/h
    double ent = 0.0;    // Nm
    double ens = 0.0;    // rpm
};

// Record usable for a specific-emission value: positive engine power.
inline bool valid_for_ef(const ObdRecord& r) {
    return r.ens > 0.0 && r.ent * r.ens > 0.0 && r.c_nox >= 0.0 && r.q_exh >= 0.0;
}

// EF_NOx = 0.001587 * c_NOx * Q_exh / (pi * EnT * EnS / 1.08e6)  [g/kWh]
double ef_nox(const ObdRecord& record);

struct MicroTrip {
    Mat sequence;  // W x channels (OBD order: c_nox, q_exh, ent, ens)
    int label = 0;
    double ef_mean = 0.0;
    std::string vehicle_id;
    double start_time = 0.0;
    int window = 0;
    int stride = 0;
    bool synthetic = false;
    std::uint64_t gen_seed = 0;
};

// Fixed-length windows over each vehicle's time-sorted records. Windows that
// would contain a record invalid for EF are dropped (maximal valid runs are
// windowed independently). Output order: (vehicle_id, start time).
std::vector<MicroTrip> window(const std::vector<ObdRecord>& records, int w, int stride);

struct SplitSpec {
    double train_fraction = 0.8;
    bool stratified = true;
    std::uint64_t seed = 0;
};

// Deterministic split; when stratified, each class is split so per-class
// proportions stay within one sample of the global fraction.
std::pair<std::vector<MicroTrip>, std::vector<MicroTrip>> stratified_split(
    const std::vector<MicroTrip>& trips, const SplitSpec& spec);

struct SynthSpec {
    int n_samples = 10000;
    double positive_rate = 0.0228;
    int w = 16;
    int channels = 4;
    double delta = 1.1;        // class separation of channel means
    double noise_sigma = 1.0;  // per-channel process scale
    double autocorr = 0.8;     // AR(1) coefficient
    std::uint64_t seed = 1;
    bool require_separable = false;  // reject delta == 0
};

// Long-tailed synthetic micro-trips: class-conditional stationary AR(1)
// channel sequences whose means differ by delta. Exactly round(n * rate)
// positives; trip order is a seeded shuffle.
std::vector<MicroTrip> synth_generate(const SynthSpec& spec);

struct CsvLoadResult {
    std::vector<ObdRecord> records;
    std::vector<long> bad_lines;  // 1-based line numbers of skipped rows
};

// CSV schema (exact header): timestamp,vehicle_id,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm
CsvLoadResult load_csv(const std::string& path);
void save_csv(const std::string& path, const std::vector<ObdRecord>& records);

// JSON-lines dataset, one trip per line with raw sequence and provenance.
void save_jsonl(const std::string& path, const std::vector<MicroTrip>& trips);
std::vector<MicroTrip> load_jsonl(const std::string& path);

}  // namespace svtn::emissions
