#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "svtn/emissions.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
    const char* env = std::getenv("SVTN_CLI");
    REQUIRE_MESSAGE(env != nullptr, "SVTN_CLI must point at the built binary");
    return env;
}

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file ", path.string());
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

void write_config(const std::string& path, const json& doc) {
    std::ofstream(path) << doc.dump(2);
}

// small, fast, near-separable run description
json toy_config() {
    return {
        {"seed", 5},
        {"generator",
         {{"n_samples", 300},
          {"positive_rate", 0.3},
          {"w", 6},
          {"channels", 2},
          {"delta", 2.0},
          {"noise_sigma", 0.5},
          {"autocorr", 0.5}}},
        {"encoder",
         {{"input_channels", 2},
          {"seq_len", 6},
          {"d_model", 8},
          {"n_heads", 2},
          {"n_layers", 1},
          {"d_ff", 16},
          {"feature_dim", 4}}},
        {"train", {{"epochs", 20}, {"lr", 0.1}, {"batch_size", 32}}},
        {"pipeline", {{"variant", "svtn"}, {"k", 1}}},
    };
}

}  // namespace

TEST_CASE("generate: paper-scale defaults, byte-identical reruns") {
    Scratch scratch("svtn_cli_generate");
    const std::string cfg = scratch / "cfg.json";
    write_config(cfg, {{"generator", {{"seed", 1}, {"w", 4}, {"channels", 2}}}});

    REQUIRE(run("--quiet --config " + cfg + " --out " + (scratch / "a") + " generate") == 0);
    const auto trips = svtn::emissions::load_jsonl(scratch / "a/dataset.jsonl");
    CHECK(trips.size() == 10000);
    long pos = 0;
    for (const auto& t : trips) pos += t.label;
    CHECK(pos == 228);

    REQUIRE(run("--quiet --config " + cfg + " --out " + (scratch / "b") + " generate") == 0);
    CHECK(slurp(scratch / "a/dataset.jsonl") == slurp(scratch / "b/dataset.jsonl"));

    const json manifest = json::parse(slurp(scratch / "a/generate_manifest.json"));
    CHECK(manifest.at("n_positive") == 228);
    CHECK(manifest.contains("config_hash"));

    SUBCASE("half positive rate") {
        const std::string cfg2 = scratch / "cfg2.json";
        write_config(cfg2,
                     {{"generator",
                       {{"seed", 1}, {"w", 4}, {"channels", 2}, {"positive_rate", 0.5}}}});
        REQUIRE(run("--quiet --config " + cfg2 + " --out " + (scratch / "c") + " generate") == 0);
        const json m2 = json::parse(slurp(scratch / "c/generate_manifest.json"));
        CHECK(m2.at("n_positive") == 5000);
    }
}

TEST_CASE("ingest: window counts, drop statistics, idempotence") {
    Scratch scratch("svtn_cli_ingest");
    const std::string csv = scratch / "obd.csv";
    {
        std::ofstream out(csv);
        out << "timestamp,vehicle_id,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm\n";
        // 25 valid rows -> W=10, stride=10 -> 2 windows
        for (int i = 0; i < 25; ++i)
            out << i << ",veh1,500,100,500,1500\n";
    }
    REQUIRE(run("--quiet --out " + (scratch / "a") + " ingest " + csv +
                " --window 10 --stride 10") == 0);
    const auto trips = svtn::emissions::load_jsonl(scratch / "a/dataset.jsonl");
    CHECK(trips.size() == 2);
    for (const auto& t : trips) CHECK(t.label == 1);  // EF ~ 36 g/kWh

    SUBCASE("re-ingesting is idempotent") {
        REQUIRE(run("--quiet --out " + (scratch / "b") + " ingest " + csv +
                    " --window 10 --stride 10") == 0);
        CHECK(slurp(scratch / "a/dataset.jsonl") == slurp(scratch / "b/dataset.jsonl"));
    }
    SUBCASE("only invalid-power rows: empty dataset, nonzero drop count") {
        const std::string bad_csv = scratch / "braking.csv";
        std::ofstream out(bad_csv);
        out << "timestamp,vehicle_id,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm\n";
        for (int i = 0; i < 12; ++i) out << i << ",veh1,500,100,-50,1500\n";
        out.close();
        REQUIRE(run("--quiet --out " + (scratch / "c") + " ingest " + bad_csv +
                    " --window 4") == 0);
        CHECK(svtn::emissions::load_jsonl(scratch / "c/dataset.jsonl").empty());
        const json manifest = json::parse(slurp(scratch / "c/ingest_manifest.json"));
        CHECK(manifest.at("invalid_records").get<long>() == 12);
        CHECK(manifest.at("trips") == 0);
    }
    SUBCASE("schema mismatch names the column and exits with the data code") {
        const std::string bad = scratch / "schema.csv";
        std::ofstream(bad) << "timestamp,vehicle,c_nox_ppm,q_exh_kgph,ent_nm,ens_rpm\n";
        CHECK(run("--quiet --out " + (scratch / "d") + " ingest " + bad) == 3);
    }
    SUBCASE("missing file is a data error") {
        CHECK(run("--quiet --out " + (scratch / "e") + " ingest " + (scratch / "nope.csv")) == 3);
    }
}

TEST_CASE("fit and eval: train recall at least test recall on the toy spec") {
    Scratch scratch("svtn_cli_fit");
    const std::string cfg = scratch / "cfg.json";
    write_config(cfg, toy_config());
    const std::string out = scratch / "run";
    REQUIRE(run("--quiet --config " + cfg + " --out " + out + " fit") == 0);
    CHECK(fs::exists(fs::path(out) / "pipeline/encoder.svtn"));
    CHECK(fs::exists(fs::path(out) / "pipeline/glm.json"));
    CHECK(fs::exists(fs::path(out) / "report.json"));

    const std::string eval_train = scratch / "eval_train";
    const std::string eval_test = scratch / "eval_test";
    REQUIRE(run("--quiet --out " + eval_train + " eval " + out + "/pipeline " + out +
                "/train.jsonl") == 0);
    REQUIRE(run("--quiet --out " + eval_test + " eval " + out + "/pipeline " + out +
                "/test.jsonl") == 0);
    const json train_metrics = json::parse(slurp(fs::path(eval_train) / "metrics.json"));
    const json test_metrics = json::parse(slurp(fs::path(eval_test) / "metrics.json"));
    CHECK(train_metrics.at("recall").get<double>() >= test_metrics.at("recall").get<double>());

    SUBCASE("mismatched feature dimension exits with the data code") {
        const std::string cfg3 = scratch / "cfg3.json";
        json threechan = toy_config();
        threechan["generator"]["channels"] = 3;
        threechan["encoder"]["input_channels"] = 3;
        write_config(cfg3, threechan);
        REQUIRE(run("--quiet --config " + cfg3 + " --out " + (scratch / "gen3") +
                    " generate") == 0);
        CHECK(run("--quiet --out " + (scratch / "bad") + " eval " + out + "/pipeline " +
                  (scratch / "gen3") + "/dataset.jsonl") == 3);
    }
    SUBCASE("diagnose emits the convergence diagnostics") {
        const std::string diag = scratch / "diag";
        REQUIRE(run("--quiet --config " + cfg + " --out " + diag + " diagnose " + out +
                    "/pipeline --reps 5") == 0);
        const json doc = json::parse(slurp(fs::path(diag) / "diagnostics.json"));
        CHECK(doc.at("iterations").get<int>() > 0);
        CHECK(doc.contains("bound_trace"));
        CHECK(doc.contains("error_to_final"));
        CHECK(doc.contains("consistency"));
    }
}

TEST_CASE("determinism: fit plus eval twice is byte-identical") {
    Scratch scratch("svtn_cli_determinism");
    const std::string cfg = scratch / "cfg.json";
    write_config(cfg, toy_config());
    const std::string out = scratch / "run";

    // identical invocation twice, first run's bytes stashed in between
    auto run_once = [&] {
        fs::remove_all(out);
        REQUIRE(run("--quiet --config " + cfg + " --out " + out + " fit") == 0);
        REQUIRE(run("--quiet --out " + out + "/m eval " + out + "/pipeline " + out +
                    "/test.jsonl") == 0);
    };
    run_once();
    const std::string report = slurp(fs::path(out) / "report.json");
    const std::string metrics_doc = slurp(fs::path(out) / "m/metrics.json");
    const std::string glm_doc = slurp(fs::path(out) / "pipeline/glm.json");
    const std::string enc = slurp(fs::path(out) / "pipeline/encoder.svtn");
    run_once();
    CHECK(slurp(fs::path(out) / "report.json") == report);
    CHECK(slurp(fs::path(out) / "m/metrics.json") == metrics_doc);
    CHECK(slurp(fs::path(out) / "pipeline/glm.json") == glm_doc);
    CHECK(slurp(fs::path(out) / "pipeline/encoder.svtn") == enc);
}

TEST_CASE("sweep: csv has ratios x variants x 2 metric rows") {
    Scratch scratch("svtn_cli_sweep");
    const std::string cfg = scratch / "cfg.json";
    json doc = toy_config();
    doc["pipeline"] = {{"variant", "sv_raw"}, {"k", 1}};
    doc["sweep"] = {{"ratios", {4.0, 6.0}}, {"variants", {"sv_raw:1", "sv_raw:2"}}, {"trials", 2}};
    write_config(cfg, doc);
    const std::string out = scratch / "sweep";
    REQUIRE(run("--quiet --config " + cfg + " --out " + out + " sweep") == 0);
    const std::string csv = slurp(fs::path(out) / "sweep.csv");
    CHECK(csv.rfind("ratio,variant,metric,mean,std,n_trials\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 2);
    const json rows = json::parse(slurp(fs::path(out) / "sweep.json"));
    CHECK(rows.at("rows").size() == 8);
}

TEST_CASE("config errors exit with code 2") {
    Scratch scratch("svtn_cli_config");
    SUBCASE("unknown root key") {
        const std::string cfg = scratch / "bad.json";
        write_config(cfg, {{"generoator", {{"n_samples", 10}}}});
        CHECK(run("--quiet --config " + cfg + " --out " + (scratch / "o") + " generate") == 2);
    }
    SUBCASE("unknown nested key") {
        const std::string cfg = scratch / "bad2.json";
        write_config(cfg, {{"generator", {{"n_sample", 10}}}});
        CHECK(run("--quiet --config " + cfg + " --out " + (scratch / "o") + " generate") == 2);
    }
    SUBCASE("malformed json") {
        const std::string cfg = scratch / "bad3.json";
        std::ofstream(cfg) << "{not json";
        CHECK(run("--quiet --config " + cfg + " --out " + (scratch / "o") + " generate") == 2);
    }
    SUBCASE("missing config file") {
        CHECK(run("--quiet --config " + (scratch / "nope.json") + " generate") == 2);
    }
    SUBCASE("unknown subcommand") {
        CHECK(run("frobnicate") == 2);
    }
}
