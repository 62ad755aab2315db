#include "svtn/emissions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "svtn/errors.hpp"
#include "svtn/rng.hpp"

namespace svtn::emissions {

using nlohmann::json;

double ef_nox(const ObdRecord& record) {
    if (!(record.ent * record.ens > 0.0))
        throw DataError("ef_nox: non-positive engine power (EnT*EnS <= 0)");
    return 0.001587 * record.c_nox * record.q_exh /
           (M_PI * record.ent * record.ens / 1.08e6);
}

std::vector<MicroTrip> window(const std::vector<ObdRecord>& records, int w, int stride) {
    if (w < 1) throw ConfigError("window: W must be >= 1");
    if (stride < 1) throw ConfigError("window: stride must be >= 1");

    // group per vehicle, preserving the (time-sorted) input order
    std::map<std::string, std::vector<const ObdRecord*>> per_vehicle;
    for (const ObdRecord& r : records) per_vehicle[r.vehicle_id].push_back(&r);

    std::vector<MicroTrip> trips;
    for (auto& [vehicle, recs] : per_vehicle) {
        std::stable_sort(recs.begin(), recs.end(),
                         [](const ObdRecord* a, const ObdRecord* b) {
                             return a->timestamp < b->timestamp;
                         });
        // windows over each maximal run of EF-valid records
        std::size_t run_start = 0;
        while (run_start < recs.size()) {
            while (run_start < recs.size() && !valid_for_ef(*recs[run_start])) ++run_start;
            std::size_t run_end = run_start;
            while (run_end < recs.size() && valid_for_ef(*recs[run_end])) ++run_end;
            const std::size_t run_len = run_end - run_start;
            if (run_len >= static_cast<std::size_t>(w)) {
                for (std::size_t s = run_start; s + static_cast<std::size_t>(w) <= run_end;
                     s += static_cast<std::size_t>(stride)) {
                    MicroTrip trip;
                    trip.vehicle_id = vehicle;
                    trip.start_time = recs[s]->timestamp;
                    trip.window = w;
                    trip.stride = stride;
                    trip.sequence.resize(w, 4);
                    double ef_sum = 0.0;
                    for (int j = 0; j < w; ++j) {
                        const ObdRecord& r = *recs[s + static_cast<std::size_t>(j)];
                        trip.sequence(j, 0) = r.c_nox;
                        trip.sequence(j, 1) = r.q_exh;
                        trip.sequence(j, 2) = r.ent;
                        trip.sequence(j, 3) = r.ens;
                        ef_sum += ef_nox(r);
                    }
                    trip.ef_mean = ef_sum / w;
                    trip.label = label_for_ef(trip.ef_mean);
                    trips.push_back(std::move(trip));
                }
            }
            run_start = run_end;
        }
    }
    return trips;
}

std::pair<std::vector<MicroTrip>, std::vector<MicroTrip>> stratified_split(
    const std::vector<MicroTrip>& trips, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("stratified_split: train fraction must be in (0,1)");

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < trips.size(); ++i)
        (trips[i].label == 1 ? pos : neg).push_back(i);
    if (spec.stratified) {
        if (pos.size() < 2 || neg.size() < 2)
            throw DataError("stratified_split: each class needs at least 2 samples");
    } else if (trips.size() < 2) {
        throw DataError("stratified_split: need at least 2 samples");
    }

    Rng rng(derive_seed(spec.seed, 0x5354524154ULL));
    std::vector<MicroTrip> train, test;
    auto split_group = [&](std::vector<std::size_t>& idx) {
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(
            std::llround(spec.train_fraction * static_cast<double>(idx.size())));
        for (std::size_t j = 0; j < idx.size(); ++j)
            (j < n_train ? train : test).push_back(trips[idx[j]]);
    };
    if (spec.stratified) {
        split_group(pos);
        split_group(neg);
    } else {
        std::vector<std::size_t> all(trips.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        split_group(all);
    }
    return {std::move(train), std::move(test)};
}

std::vector<MicroTrip> synth_generate(const SynthSpec& spec) {
    if (!(spec.positive_rate > 0.0 && spec.positive_rate < 1.0))
        throw ConfigError("synth_generate: positive_rate must be in (0,1)");
    if (spec.n_samples < 1 || spec.w < 1 || spec.channels < 1)
        throw ConfigError("synth_generate: bad sample/window/channel counts");
    if (!(spec.autocorr >= 0.0 && spec.autocorr < 1.0))
        throw ConfigError("synth_generate: autocorr must be in [0,1)");
    if (spec.require_separable && spec.delta == 0.0)
        throw ConfigError("synth_generate: delta = 0 gives inseparable classes");

    const auto n_pos = static_cast<std::size_t>(
        std::llround(spec.positive_rate * static_cast<double>(spec.n_samples)));

    std::vector<int> labels(static_cast<std::size_t>(spec.n_samples), 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
    Rng order_rng(derive_seed(spec.seed, 0x53594e54ULL));
    order_rng.shuffle(labels);

    const double innovation =
        spec.noise_sigma * std::sqrt(1.0 - spec.autocorr * spec.autocorr);

    std::vector<MicroTrip> trips;
    trips.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Rng rng(derive_seed(spec.seed, 1000 + i));
        MicroTrip trip;
        trip.synthetic = true;
        trip.gen_seed = spec.seed;
        trip.window = spec.w;
        trip.stride = spec.w;
        trip.vehicle_id = "synthetic";
        trip.start_time = static_cast<double>(i) * spec.w;
        trip.label = labels[i];
        const double mean = trip.label == 1 ? spec.delta : 0.0;
        trip.sequence.resize(spec.w, spec.channels);
        for (int c = 0; c < spec.channels; ++c) {
            double x = mean + spec.noise_sigma * rng.normal();  // stationary start
            trip.sequence(0, c) = x;
            for (int t = 1; t < spec.w; ++t) {
                x = mean + spec.autocorr * (x - mean) + innovation * rng.normal();
                trip.sequence(t, c) = x;
            }
        }
        // synthetic specific emission consistent with the label
        const double u = rng.uniform();
        trip.ef_mean = trip.label == 1 ? kEfThreshold * (1.2 + u) : kEfThreshold * 0.8 * u;
        trips.push_back(std::move(trip));
    }
    return trips;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

constexpr const char* kCsvHeader = "timestamp,vehicle_id,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm";

}  // namespace

CsvLoadResult load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("load_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) {
        const auto expected = split_line(kCsvHeader);
        const auto got = split_line(line);
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i >= got.size() || got[i] != expected[i])
                throw DataError("load_csv: header mismatch, expected column '" + expected[i] +
                                "' at position " + std::to_string(i + 1));
        }
        throw DataError("load_csv: header mismatch in " + path);
    }

    CsvLoadResult result;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != 6) {
            result.bad_lines.push_back(line_no);
            continue;
        }
        try {
            ObdRecord r;
            std::size_t used = 0;
            r.timestamp = std::stod(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("timestamp");
            r.vehicle_id = fields[1];
            r.c_nox = std::stod(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("c_nox");
            r.q_exh = std::stod(fields[3], &used);
            if (used != fields[3].size()) throw std::invalid_argument("q_exh");
            r.ent = std::stod(fields[4], &used);
            if (used != fields[4].size()) throw std::invalid_argument("ent");
            r.ens = std::stod(fields[5], &used);
            if (used != fields[5].size()) throw std::invalid_argument("ens");
            if (r.vehicle_id.empty() || !std::isfinite(r.timestamp) ||
                !std::isfinite(r.c_nox) || !std::isfinite(r.q_exh) ||
                !std::isfinite(r.ent) || !std::isfinite(r.ens))
                throw std::invalid_argument("field");
            result.records.push_back(std::move(r));
        } catch (const std::exception&) {
            result.bad_lines.push_back(line_no);
        }
    }
    return result;
}

namespace {

std::string full_precision(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_csv(const std::string& path, const std::vector<ObdRecord>& records) {
    std::ofstream out(path);
    if (!out) throw DataError("save_csv: cannot open " + path);
    out << kCsvHeader << "\n";
    for (const ObdRecord& r : records) {
        out << full_precision(r.timestamp) << ',' << r.vehicle_id << ','
            << full_precision(r.c_nox) << ',' << full_precision(r.q_exh) << ','
            << full_precision(r.ent) << ',' << full_precision(r.ens) << "\n";
    }
    if (!out) throw DataError("save_csv: write failed for " + path);
}

void save_jsonl(const std::string& path, const std::vector<MicroTrip>& trips) {
    std::ofstream out(path);
    if (!out) throw DataError("save_jsonl: cannot open " + path);
    for (const MicroTrip& t : trips) {
        json row;
        row["label"] = t.label;
        row["ef_mean"] = t.ef_mean;
        row["vehicle_id"] = t.vehicle_id;
        row["start_time"] = t.start_time;
        row["w"] = t.window;
        row["stride"] = t.stride;
        row["synthetic"] = t.synthetic;
        if (t.synthetic) row["seed"] = t.gen_seed;
        json seq = json::array();
        for (Eigen::Index r = 0; r < t.sequence.rows(); ++r) {
            json step = json::array();
            for (Eigen::Index c = 0; c < t.sequence.cols(); ++c) step.push_back(t.sequence(r, c));
            seq.push_back(std::move(step));
        }
        row["sequence"] = std::move(seq);
        out << row.dump() << "\n";
    }
    if (!out) throw DataError("save_jsonl: write failed for " + path);
}

std::vector<MicroTrip> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_jsonl: cannot open " + path);
    std::vector<MicroTrip> trips;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json row;
        try {
            row = json::parse(line);
            MicroTrip t;
            t.label = row.at("label").get<int>();
            t.ef_mean = row.at("ef_mean").get<double>();
            t.vehicle_id = row.at("vehicle_id").get<std::string>();
            t.start_time = row.at("start_time").get<double>();
            t.window = row.at("w").get<int>();
            t.stride = row.at("stride").get<int>();
            t.synthetic = row.value("synthetic", false);
            t.gen_seed = row.value("seed", std::uint64_t{0});
            const json& seq = row.at("sequence");
            if (seq.empty()) throw DataError("empty sequence");
            const auto rows = static_cast<Eigen::Index>(seq.size());
            const auto cols = static_cast<Eigen::Index>(seq.at(0).size());
            t.sequence.resize(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const json& step = seq.at(static_cast<std::size_t>(r));
                if (static_cast<Eigen::Index>(step.size()) != cols)
                    throw DataError("ragged sequence");
                for (Eigen::Index c = 0; c < cols; ++c)
                    t.sequence(r, c) = step.at(static_cast<std::size_t>(c)).get<double>();
            }
            if (t.label != 0 && t.label != 1) throw DataError("label not in {0,1}");
            trips.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw DataError("load_jsonl: " + path + " line " + std::to_string(line_no) + ": " +
                            e.what());
        }
    }
    return trips;
}

}  // namespace svtn::emissions
