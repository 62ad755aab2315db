#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "svtn/emissions.hpp"
#include "svtn/errors.hpp"
#include "svtn/rng.hpp"

using namespace svtn;
using namespace svtn::emissions;
namespace fs = std::filesystem;

namespace {

ObdRecord record(double ts, const std::string& vid, double cnox, double qexh, double ent,
                 double ens) {
    ObdRecord r;
    r.timestamp = ts;
    r.vehicle_id = vid;
    r.c_nox = cnox;
    r.q_exh = qexh;
    r.ent = ent;
    r.ens = ens;
    return r;
}

// direct substitution, coded independently of the library
double ef_oracle(double cnox, double qexh, double ent, double ens) {
    return 0.001587 * cnox * qexh / (M_PI * ent * ens / 1.08e6);
}

}  // namespace

TEST_CASE("specific emission formula") {
    SUBCASE("zero concentration gives zero") {
        CHECK(ef_nox(record(0, "v", 0.0, 80.0, 400.0, 1200.0)) == 0.0);
    }
    SUBCASE("frozen hand value") {
        const double ef = ef_nox(record(0, "v", 500.0, 100.0, 500.0, 1500.0));
        CHECK(ef == doctest::Approx(36.371360834904657).epsilon(1e-12));
        CHECK(ef == doctest::Approx(ef_oracle(500, 100, 500, 1500)).epsilon(1e-12));
    }
    SUBCASE("linear in concentration") {
        const double base = ef_nox(record(0, "v", 250.0, 80.0, 400.0, 1200.0));
        const double twice = ef_nox(record(0, "v", 500.0, 80.0, 400.0, 1200.0));
        CHECK(twice == doctest::Approx(2.0 * base).epsilon(1e-12));
    }
    SUBCASE("homogeneity degrees") {
        Rng rng(1);
        for (int t = 0; t < 50; ++t) {
            const double cnox = rng.uniform(1.0, 1500.0);
            const double qexh = rng.uniform(1.0, 400.0);
            const double ent = rng.uniform(50.0, 2000.0);
            const double ens = rng.uniform(600.0, 3000.0);
            const double c = rng.uniform(1.1, 4.0);
            const double base = ef_nox(record(0, "v", cnox, qexh, ent, ens));
            CHECK(ef_nox(record(0, "v", c * cnox, qexh, ent, ens)) ==
                  doctest::Approx(c * base).epsilon(1e-10));
            CHECK(ef_nox(record(0, "v", cnox, c * qexh, ent, ens)) ==
                  doctest::Approx(c * base).epsilon(1e-10));
            CHECK(ef_nox(record(0, "v", cnox, qexh, c * ent, ens)) ==
                  doctest::Approx(base / c).epsilon(1e-10));
            CHECK(ef_nox(record(0, "v", cnox, qexh, ent, c * ens)) ==
                  doctest::Approx(base / c).epsilon(1e-10));
        }
    }
    SUBCASE("non-positive power rejected") {
        CHECK_THROWS_AS(ef_nox(record(0, "v", 100.0, 50.0, -30.0, 1200.0)), DataError);
        CHECK_THROWS_AS(ef_nox(record(0, "v", 100.0, 50.0, 0.0, 1200.0)), DataError);
        CHECK(!valid_for_ef(record(0, "v", 100.0, 50.0, 200.0, 0.0)));
    }
}

TEST_CASE("label threshold is strict at 0.460") {
    CHECK(label_for_ef(0.460) == 0);
    CHECK(label_for_ef(std::nextafter(0.460, 1.0)) == 1);
    CHECK(label_for_ef(0.459999) == 0);
    CHECK(label_for_ef(36.37) == 1);
}

TEST_CASE("windowing") {
    // records with EF around 36 g/kWh (high emission)
    auto hot = [](double ts) { return record(ts, "veh1", 500.0, 100.0, 500.0, 1500.0); };

    SUBCASE("ten records, W=5, stride=5 -> two windows, all labeled 1") {
        std::vector<ObdRecord> recs;
        for (int i = 0; i < 10; ++i) recs.push_back(hot(i));
        const auto trips = window(recs, 5, 5);
        REQUIRE(trips.size() == 2);
        for (const auto& t : trips) {
            CHECK(t.label == 1);
            CHECK(t.ef_mean == doctest::Approx(36.3713608349).epsilon(1e-9));
            CHECK(t.sequence.rows() == 5);
            CHECK(t.sequence.cols() == 4);
        }
        CHECK(trips[0].start_time == 0.0);
        CHECK(trips[1].start_time == 5.0);
    }
    SUBCASE("window crossing an invalid record is dropped") {
        std::vector<ObdRecord> recs;
        for (int i = 0; i < 10; ++i) recs.push_back(hot(i));
        recs[4].ent = -10.0;  // engine braking splits the run at index 4
        const auto trips = window(recs, 5, 5);
        // valid runs: [0..3] (too short) and [5..9] (one window)
        REQUIRE(trips.size() == 1);
        CHECK(trips[0].start_time == 5.0);
    }
    SUBCASE("window count per maximal run") {
        std::vector<ObdRecord> recs;
        for (int i = 0; i < 13; ++i) recs.push_back(hot(i));
        CHECK(window(recs, 5, 2).size() == 5);  // floor((13-5)/2)+1
        CHECK(window(recs, 5, 5).size() == 2);
        CHECK(window(recs, 20, 5).empty());  // run shorter than W is not an error
    }
    SUBCASE("vehicles are windowed independently and ordered") {
        std::vector<ObdRecord> recs;
        for (int i = 0; i < 5; ++i) recs.push_back(record(i, "b", 500, 100, 500, 1500));
        for (int i = 0; i < 5; ++i) recs.push_back(record(i, "a", 500, 100, 500, 1500));
        const auto trips = window(recs, 5, 5);
        REQUIRE(trips.size() == 2);
        CHECK(trips[0].vehicle_id == "a");
        CHECK(trips[1].vehicle_id == "b");
    }
    SUBCASE("bad parameters") {
        CHECK_THROWS_AS(window({}, 0, 1), ConfigError);
        CHECK_THROWS_AS(window({}, 5, 0), ConfigError);
    }
}

TEST_CASE("stratified split") {
    auto make_trips = [](int n, int n_pos) {
        std::vector<MicroTrip> trips(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            trips[static_cast<std::size_t>(i)].label = i < n_pos ? 1 : 0;
            trips[static_cast<std::size_t>(i)].ef_mean = i < n_pos ? 1.0 : 0.1;
            trips[static_cast<std::size_t>(i)].start_time = i;
            trips[static_cast<std::size_t>(i)].sequence = Eigen::MatrixXd::Zero(2, 2);
        }
        return trips;
    };

    SUBCASE("100 trips, 10 positive, 0.8 split") {
        const auto trips = make_trips(100, 10);
        SplitSpec spec;
        spec.seed = 3;
        const auto [train, test] = stratified_split(trips, spec);
        CHECK(train.size() == 80);
        CHECK(test.size() == 20);
        long train_pos = 0;
        for (const auto& t : train) train_pos += t.label;
        CHECK(train_pos == 8);
    }
    SUBCASE("paper-scale counts") {
        const auto trips = make_trips(10000, 228);
        SplitSpec spec;
        spec.seed = 4;
        const auto [train, test] = stratified_split(trips, spec);
        CHECK(train.size() == 8000);
        long train_pos = 0;
        for (const auto& t : train) train_pos += t.label;
        CHECK((train_pos == 182 || train_pos == 183));
    }
    SUBCASE("union, disjointness, determinism") {
        const auto trips = make_trips(57, 13);
        SplitSpec spec;
        spec.seed = 5;
        const auto [train, test] = stratified_split(trips, spec);
        CHECK(train.size() + test.size() == trips.size());
        std::set<double> seen;  // start_time doubles as identity
        for (const auto& t : train) seen.insert(t.start_time);
        for (const auto& t : test) {
            CHECK(seen.find(t.start_time) == seen.end());
            seen.insert(t.start_time);
        }
        CHECK(seen.size() == trips.size());

        const auto [train2, test2] = stratified_split(trips, spec);
        REQUIRE(train2.size() == train.size());
        for (std::size_t i = 0; i < train.size(); ++i)
            CHECK(train2[i].start_time == train[i].start_time);
    }
    SUBCASE("class with fewer than two samples") {
        const auto trips = make_trips(50, 1);
        SplitSpec spec;
        CHECK_THROWS_AS(stratified_split(trips, spec), DataError);
    }
    SUBCASE("bad fraction") {
        const auto trips = make_trips(50, 10);
        SplitSpec spec;
        spec.train_fraction = 1.0;
        CHECK_THROWS_AS(stratified_split(trips, spec), ConfigError);
    }
}

TEST_CASE("synthetic generator") {
    SUBCASE("exact positive count at the paper rate") {
        SynthSpec spec;
        spec.n_samples = 10000;
        spec.positive_rate = 0.0228;
        spec.w = 4;
        spec.channels = 2;
        spec.seed = 9;
        const auto trips = synth_generate(spec);
        CHECK(trips.size() == 10000);
        long pos = 0;
        for (const auto& t : trips) pos += t.label;
        CHECK(pos == 228);
        for (const auto& t : trips) {
            CHECK(t.label == label_for_ef(t.ef_mean));  // labels consistent with ef_mean
            CHECK(t.synthetic);
            CHECK(t.sequence.rows() == 4);
            CHECK(t.sequence.cols() == 2);
        }
    }
    SUBCASE("half rate gives half positives") {
        SynthSpec spec;
        spec.n_samples = 1000;
        spec.positive_rate = 0.5;
        spec.w = 2;
        spec.channels = 1;
        const auto trips = synth_generate(spec);
        long pos = 0;
        for (const auto& t : trips) pos += t.label;
        CHECK(pos == 500);
    }
    SUBCASE("deterministic under the seed") {
        SynthSpec spec;
        spec.n_samples = 50;
        spec.w = 3;
        spec.seed = 77;
        const auto a = synth_generate(spec);
        const auto b = synth_generate(spec);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].label == b[i].label);
            CHECK(a[i].sequence == b[i].sequence);
        }
    }
    SUBCASE("classes separated by delta in channel means") {
        SynthSpec spec;
        spec.n_samples = 2000;
        spec.positive_rate = 0.5;
        spec.w = 8;
        spec.channels = 2;
        spec.delta = 2.0;
        spec.noise_sigma = 0.5;
        spec.seed = 13;
        const auto trips = synth_generate(spec);
        double mean_pos = 0.0;
        double mean_neg = 0.0;
        for (const auto& t : trips)
            (t.label == 1 ? mean_pos : mean_neg) += t.sequence.mean() / 1000.0;
        CHECK(mean_pos - mean_neg == doctest::Approx(2.0).epsilon(0.05));
    }
    SUBCASE("rejects degenerate requests") {
        SynthSpec spec;
        spec.positive_rate = 0.0;
        CHECK_THROWS_AS(synth_generate(spec), ConfigError);
        spec.positive_rate = 0.1;
        spec.delta = 0.0;
        spec.require_separable = true;
        CHECK_THROWS_AS(synth_generate(spec), ConfigError);
    }
}

TEST_CASE("csv io") {
    const auto dir = fs::temp_directory_path() / "svtn_emissions_test";
    fs::create_directories(dir);

    SUBCASE("round trip preserves fields bit-exactly") {
        std::vector<ObdRecord> recs = {
            record(0.125, "veh-1", 512.0625, 99.75, 501.5, 1500.25),
            record(1.0 / 3.0, "veh-2", 0.1 + 0.2, 1e-7, 123.456789012345, 2999.0),
        };
        const std::string path = (dir / "roundtrip.csv").string();
        save_csv(path, recs);
        const auto loaded = load_csv(path);
        CHECK(loaded.bad_lines.empty());
        REQUIRE(loaded.records.size() == recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            CHECK(loaded.records[i].timestamp == recs[i].timestamp);
            CHECK(loaded.records[i].vehicle_id == recs[i].vehicle_id);
            CHECK(loaded.records[i].c_nox == recs[i].c_nox);
            CHECK(loaded.records[i].q_exh == recs[i].q_exh);
            CHECK(loaded.records[i].ent == recs[i].ent);
            CHECK(loaded.records[i].ens == recs[i].ens);
        }
    }
    SUBCASE("empty file with header") {
        const std::string path = (dir / "empty.csv").string();
        std::ofstream(path) << "timestamp,vehicle_id,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm\n";
        const auto loaded = load_csv(path);
        CHECK(loaded.records.empty());
        CHECK(loaded.bad_lines.empty());
    }
    SUBCASE("zero speed rows parse but are EF-invalid") {
        const std::string path = (dir / "zeros.csv").string();
        std::ofstream(path) << "timestamp,vehicle_id,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm\n"
                            << "1,v,100,50,200,0\n";
        const auto loaded = load_csv(path);
        REQUIRE(loaded.records.size() == 1);
        CHECK(!valid_for_ef(loaded.records[0]));
    }
    SUBCASE("malformed rows are skipped with line numbers") {
        const std::string path = (dir / "bad.csv").string();
        std::ofstream(path) << "timestamp,vehicle_id,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm\n"
                            << "1,v,100,50,200,1000\n"
                            << "2,v,not_a_number,50,200,1000\n"
                            << "3,v,100,50\n"
                            << "4,v,100,50,200,1000\n";
        const auto loaded = load_csv(path);
        CHECK(loaded.records.size() == 2);
        REQUIRE(loaded.bad_lines.size() == 2);
        CHECK(loaded.bad_lines[0] == 3);
        CHECK(loaded.bad_lines[1] == 4);
    }
    SUBCASE("wrong header names the offending column") {
        const std::string path = (dir / "schema.csv").string();
        std::ofstream(path) << "timestamp,vehicle_id,nox,q_exh_kgph,ent_nm,ens_rpm\n";
        CHECK_THROWS_WITH_AS(load_csv(path),
                             doctest::Contains("c_nox_ppm"), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_csv((dir / "nope.csv").string()), DataError);
    }
    fs::remove_all(dir);
}

TEST_CASE("jsonl dataset round trip") {
    const auto dir = fs::temp_directory_path() / "svtn_jsonl_test";
    fs::create_directories(dir);
    SynthSpec spec;
    spec.n_samples = 20;
    spec.w = 3;
    spec.channels = 2;
    spec.seed = 31;
    const auto trips = synth_generate(spec);
    const std::string path = (dir / "trips.jsonl").string();
    save_jsonl(path, trips);
    const auto loaded = load_jsonl(path);
    REQUIRE(loaded.size() == trips.size());
    for (std::size_t i = 0; i < trips.size(); ++i) {
        CHECK(loaded[i].label == trips[i].label);
        CHECK(loaded[i].ef_mean == trips[i].ef_mean);
        CHECK(loaded[i].window == trips[i].window);
        CHECK(loaded[i].sequence == trips[i].sequence);
    }
    SUBCASE("corrupt line is a data error") {
        std::ofstream(path, std::ios::app) << "{not json}\n";
        CHECK_THROWS_AS(load_jsonl(path), DataError);
    }
    fs::remove_all(dir);
}
