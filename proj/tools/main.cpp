// svtn: reproducible experiment runner for the set-valued transformer toolkit.
//
// Subcommands: generate, ingest, fit, eval, sweep, diagnose.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "svtn/emissions.hpp"
#include "svtn/errors.hpp"
#include "svtn/glm.hpp"
#include "svtn/pipeline.hpp"
#include "svtn/rng.hpp"
#include "svtn/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svtn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// FNV-1a over the canonical (sorted-key) dump; stable across runs.
std::string config_hash(const json& doc) {
    const std::string dump = doc.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (allowed.find(key) == allowed.end())
            throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

struct RunConfig {
    json doc = json::object();  // effective config (defaults + file + flag overrides)
    std::string out = "svtn_out";
    bool quiet = false;

    std::string hash() const { return config_hash(doc); }
};

template <typename T>
T field(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + key + "'");
    }
}

emissions::SynthSpec generator_spec(const json& doc) {
    emissions::SynthSpec spec;
    const json gen = doc.value("generator", json::object());
    check_keys(gen,
               {"n_samples", "positive_rate", "w", "channels", "delta", "noise_sigma",
                "autocorr", "seed", "require_separable"},
               "generator");
    spec.n_samples = field(gen, "n_samples", spec.n_samples);
    spec.positive_rate = field(gen, "positive_rate", spec.positive_rate);
    spec.w = field(gen, "w", spec.w);
    spec.channels = field(gen, "channels", spec.channels);
    spec.delta = field(gen, "delta", spec.delta);
    spec.noise_sigma = field(gen, "noise_sigma", spec.noise_sigma);
    spec.autocorr = field(gen, "autocorr", spec.autocorr);
    spec.seed = field(gen, "seed", spec.seed);
    spec.require_separable = field(gen, "require_separable", spec.require_separable);
    return spec;
}

emissions::SplitSpec split_spec(const json& doc) {
    emissions::SplitSpec spec;
    const json split = doc.value("split", json::object());
    check_keys(split, {"train_fraction", "stratified", "seed"}, "split");
    spec.train_fraction = field(split, "train_fraction", spec.train_fraction);
    spec.stratified = field(split, "stratified", spec.stratified);
    spec.seed = field(split, "seed", spec.seed);
    return spec;
}

pipeline::PipelineConfig pipeline_config(const json& doc) {
    pipeline::PipelineConfig cfg;

    const json enc = doc.value("encoder", json::object());
    check_keys(enc,
               {"input_channels", "seq_len", "d_model", "n_heads", "n_layers", "d_ff",
                "feature_dim", "seed"},
               "encoder");
    cfg.encoder.input_channels = field(enc, "input_channels", cfg.encoder.input_channels);
    cfg.encoder.seq_len = field(enc, "seq_len", cfg.encoder.seq_len);
    cfg.encoder.d_model = field(enc, "d_model", cfg.encoder.d_model);
    cfg.encoder.n_heads = field(enc, "n_heads", cfg.encoder.n_heads);
    cfg.encoder.n_layers = field(enc, "n_layers", cfg.encoder.n_layers);
    cfg.encoder.d_ff = field(enc, "d_ff", cfg.encoder.d_ff);
    cfg.encoder.feature_dim = field(enc, "feature_dim", cfg.encoder.feature_dim);
    cfg.encoder.seed = field(enc, "seed", cfg.encoder.seed);

    const json train = doc.value("train", json::object());
    check_keys(train, {"epochs", "lr", "batch_size", "seed", "class_weight"}, "train");
    cfg.train.epochs = field(train, "epochs", cfg.train.epochs);
    cfg.train.lr = field(train, "lr", cfg.train.lr);
    cfg.train.batch_size = field(train, "batch_size", cfg.train.batch_size);
    cfg.train.seed = field(train, "seed", cfg.train.seed);
    cfg.train.class_weight = field(train, "class_weight", cfg.train.class_weight);

    const json em = doc.value("em", json::object());
    check_keys(em, {"max_iter", "tol", "clamp_eps", "ridge", "sigma"}, "em");
    cfg.em.max_iter = field(em, "max_iter", cfg.em.max_iter);
    cfg.em.tol = field(em, "tol", cfg.em.tol);
    cfg.em.clamp_eps = field(em, "clamp_eps", cfg.em.clamp_eps);
    cfg.em.ridge = field(em, "ridge", cfg.em.ridge);
    cfg.em.sigma = field(em, "sigma", cfg.em.sigma);

    const json pipe = doc.value("pipeline", json::object());
    check_keys(pipe, {"variant", "k", "p_star", "standardize"}, "pipeline");
    cfg.variant = pipeline::variant_from_string(field<std::string>(pipe, "variant", "svtn"));
    cfg.k = field(pipe, "k", cfg.k);
    cfg.p_star = field(pipe, "p_star", cfg.p_star);
    cfg.standardize = field(pipe, "standardize", cfg.standardize);
    return cfg;
}

void validate_config(const json& doc) {
    check_keys(doc,
               {"seed", "out", "generator", "dataset", "encoder", "train", "em", "pipeline",
                "split", "sweep", "ingest"},
               "config root");
    // touch every section so unknown keys are rejected up front
    generator_spec(doc);
    split_spec(doc);
    pipeline_config(doc);
    check_keys(doc.value("sweep", json::object()), {"ratios", "variants", "trials"}, "sweep");
    check_keys(doc.value("ingest", json::object()), {"window", "stride"}, "ingest");
}

// A top-level seed (config "seed" or --seed) pins every stage seed derivedly.
void apply_root_seed(json& doc) {
    if (!doc.contains("seed")) return;
    const auto root = doc.at("seed").get<std::uint64_t>();
    auto put = [&](const char* section, const char* key, std::uint64_t value) {
        if (!doc.contains(section)) doc[section] = json::object();
        if (!doc[section].contains(key)) doc[section][key] = value;
    };
    put("generator", "seed", derive_seed(root, 1));
    put("split", "seed", derive_seed(root, 2));
    put("encoder", "seed", derive_seed(root, 3));
    put("train", "seed", derive_seed(root, 4));
}

RunConfig load_run_config(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                          const std::string& out_flag, bool quiet) {
    RunConfig rc;
    rc.quiet = quiet;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file " + config_path);
        try {
            rc.doc = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    }
    if (seed_flag) rc.doc["seed"] = *seed_flag;  // flags win
    validate_config(rc.doc);
    apply_root_seed(rc.doc);
    rc.out = field<std::string>(rc.doc, "out", rc.out);
    if (!out_flag.empty()) rc.out = out_flag;
    return rc;
}

void write_text(const fs::path& path, const std::string& text) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

json manifest_for(const char* command, const RunConfig& rc) {
    json m;
    m["command"] = command;
    m["config_hash"] = rc.hash();
    m["config"] = rc.doc;
    m["format_version"] = 1;
    return m;
}

long count_positives(const std::vector<emissions::MicroTrip>& trips) {
    long pos = 0;
    for (const auto& t : trips) pos += t.label;
    return pos;
}

int cmd_generate(const RunConfig& rc) {
    const auto spec = generator_spec(rc.doc);
    const auto trips = emissions::synth_generate(spec);
    fs::create_directories(rc.out);
    emissions::save_jsonl((fs::path(rc.out) / "dataset.jsonl").string(), trips);

    json manifest = manifest_for("generate", rc);
    manifest["n_samples"] = trips.size();
    manifest["n_positive"] = count_positives(trips);
    manifest["seed"] = spec.seed;
    write_json(fs::path(rc.out) / "generate_manifest.json", manifest);
    if (!rc.quiet)
        std::cout << "generated " << trips.size() << " micro-trips (" << count_positives(trips)
                  << " positive) -> " << rc.out << "/dataset.jsonl\n";
    return 0;
}

int cmd_ingest(const RunConfig& rc, const std::string& csv_path, int window_override,
               int stride_override) {
    const json ing = rc.doc.value("ingest", json::object());
    const int w = window_override > 0 ? window_override : field(ing, "window", 60);
    const int stride = stride_override > 0 ? stride_override : field(ing, "stride", w);

    const auto loaded = emissions::load_csv(csv_path);
    long invalid_records = 0;
    for (const auto& r : loaded.records) invalid_records += !emissions::valid_for_ef(r);
    const auto trips = emissions::window(loaded.records, w, stride);
    fs::create_directories(rc.out);
    emissions::save_jsonl((fs::path(rc.out) / "dataset.jsonl").string(), trips);

    json manifest = manifest_for("ingest", rc);
    manifest["source"] = csv_path;
    manifest["window"] = w;
    manifest["stride"] = stride;
    manifest["records"] = loaded.records.size();
    manifest["invalid_records"] = invalid_records;
    manifest["skipped_lines"] = loaded.bad_lines;
    manifest["trips"] = trips.size();
    manifest["n_positive"] = count_positives(trips);
    write_json(fs::path(rc.out) / "ingest_manifest.json", manifest);
    if (!rc.quiet) {
        std::cout << "ingested " << loaded.records.size() << " records ("
                  << loaded.bad_lines.size() << " malformed rows skipped";
        if (!loaded.bad_lines.empty()) {
            std::cout << ", lines";
            for (long ln : loaded.bad_lines) std::cout << ' ' << ln;
        }
        std::cout << "; " << invalid_records << " EF-invalid) -> " << trips.size()
                  << " micro-trips\n";
    }
    return 0;
}

std::vector<emissions::MicroTrip> load_or_generate(const RunConfig& rc) {
    if (rc.doc.contains("dataset")) {
        const auto path = rc.doc.at("dataset").get<std::string>();
        return emissions::load_jsonl(path);
    }
    return emissions::synth_generate(generator_spec(rc.doc));
}

int cmd_fit(const RunConfig& rc) {
    const auto trips = load_or_generate(rc);
    const auto split = split_spec(rc.doc);
    auto [train, test] = emissions::stratified_split(trips, split);

    const auto cfg = pipeline_config(rc.doc);
    const pipeline::FittedPipeline fitted = pipeline::fit_pipeline(train, cfg);

    fs::create_directories(rc.out);
    const auto seed = field<std::uint64_t>(rc.doc, "seed", 0);
    fitted.save((fs::path(rc.out) / "pipeline").string(), rc.hash(), seed);
    emissions::save_jsonl((fs::path(rc.out) / "train.jsonl").string(), train);
    emissions::save_jsonl((fs::path(rc.out) / "test.jsonl").string(), test);
    write_json(fs::path(rc.out) / "report.json", pipeline::fit_report_to_json(fitted.report));

    json manifest = manifest_for("fit", rc);
    manifest["train_size"] = train.size();
    manifest["test_size"] = test.size();
    manifest["train_positive"] = count_positives(train);
    manifest["ridge_jitter"] = fitted.ridge_jitter;
    manifest["lambda_min"] = fitted.lambda_min;
    manifest["clamp_events"] = fitted.clamp_events;
    write_json(fs::path(rc.out) / "fit_manifest.json", manifest);

    if (!rc.quiet) {
        std::cout << "fitted " << pipeline::to_string(cfg.variant) << " on " << train.size()
                  << " trips";
        if (fitted.report.iterations > 0)
            std::cout << "; EM iterations " << fitted.report.iterations
                      << (fitted.report.converged ? " (converged)" : " (max_iter reached)")
                      << ", final loglik " << fitted.report.loglik_trace.back();
        if (fitted.ridge_jitter > 0.0)
            std::cout << "; ridge jitter " << fitted.ridge_jitter << " applied";
        std::cout << " -> " << rc.out << "/pipeline\n";
    }
    return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& fitted_dir, const std::string& data_path) {
    const pipeline::FittedPipeline fitted = pipeline::FittedPipeline::load(fitted_dir);
    const auto trips = emissions::load_jsonl(data_path);
    if (trips.empty()) throw DataError("eval: dataset is empty");
    if (fitted.config.variant != pipeline::Variant::sv_raw &&
        trips[0].sequence.cols() != fitted.config.encoder.input_channels)
        throw DataError("eval: dataset channel count " + std::to_string(trips[0].sequence.cols()) +
                        " differs from the fitted encoder input " +
                        std::to_string(fitted.config.encoder.input_channels));

    const pipeline::Predictions pred = pipeline::predict_pipeline(fitted, trips);
    std::vector<int> truth;
    truth.reserve(trips.size());
    for (const auto& t : trips) truth.push_back(t.label);
    const metrics::ConfusionMatrix cm = metrics::confusion(truth, pred.labels);

    json doc;
    doc["config_hash"] = rc.hash();
    doc["fitted"] = fitted_dir;
    doc["dataset"] = data_path;
    doc["n"] = cm.total();
    doc["confusion"] = {{"n_tp", cm.n_tp}, {"n_fp", cm.n_fp}, {"n_fn", cm.n_fn}, {"n_tn", cm.n_tn}};
    auto put_metric = [&doc](const char* name, std::optional<double> v) {
        if (v)
            doc[name] = *v;
        else
            doc[name] = "undefined";
    };
    put_metric("recall", metrics::recall(cm));
    put_metric("precision", metrics::precision(cm));
    put_metric("f1", metrics::f1(cm));

    fs::create_directories(rc.out);
    write_json(fs::path(rc.out) / "metrics.json", doc);
    if (!rc.quiet) std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const RunConfig& rc) {
    metrics::SweepSpec spec;
    spec.generator = generator_spec(rc.doc);
    spec.split = split_spec(rc.doc);
    spec.base = pipeline_config(rc.doc);
    spec.seed = field<std::uint64_t>(rc.doc, "seed", 0);

    const json sw = rc.doc.value("sweep", json::object());
    spec.ratios = field<std::vector<double>>(sw, "ratios", {10.0, 20.0, 43.0});
    spec.trials = field(sw, "trials", 20);
    const auto names =
        field<std::vector<std::string>>(sw, "variants", {"svtn:1", "transformer_only"});
    for (const auto& name : names) spec.variants.push_back(metrics::parse_variant(name));

    const auto rows = metrics::ratio_sweep(spec);

    fs::create_directories(rc.out);
    write_text(fs::path(rc.out) / "sweep.csv", metrics::sweep_csv(rows));
    json doc;
    doc["config_hash"] = rc.hash();
    doc["rows"] = json::array();
    for (const auto& row : rows)
        doc["rows"].push_back({{"ratio", row.ratio},
                               {"variant", row.variant},
                               {"metric", row.metric},
                               {"mean", row.mean},
                               {"std", row.stddev},
                               {"n_trials", row.n_trials}});
    write_json(fs::path(rc.out) / "sweep.json", doc);
    if (!rc.quiet)
        std::cout << "sweep complete: " << rows.size() << " rows -> " << rc.out << "/sweep.csv\n";
    return 0;
}

int cmd_diagnose(const RunConfig& rc, const std::string& fitted_dir, int reps) {
    const pipeline::FittedPipeline fitted = pipeline::FittedPipeline::load(fitted_dir);
    if (fitted.theta_trace.empty())
        throw DataError("diagnose: no EM trace in " + fitted_dir + " (transformer_only?)");

    json doc;
    doc["config_hash"] = rc.hash();
    doc["fitted"] = fitted_dir;
    doc["iterations"] = fitted.report.iterations;
    doc["converged"] = fitted.report.converged;
    doc["contraction_estimate"] = fitted.report.contraction_estimate;
    doc["lambda_min"] = fitted.lambda_min;
    doc["bound_trace"] = fitted.report.bound_trace;

    const Eigen::VectorXd& final_theta = fitted.theta_trace.back();
    std::vector<double> errors;
    errors.reserve(fitted.theta_trace.size());
    for (const auto& t : fitted.theta_trace) errors.push_back((t - final_theta).norm());
    doc["error_to_final"] = errors;

    bool dominated = !fitted.report.bound_trace.empty();
    for (std::size_t t = 1; t < errors.size() && dominated; ++t) {
        if (t - 1 < fitted.report.bound_trace.size() &&
            errors[t] > fitted.report.bound_trace[t - 1] + 1e-12)
            dominated = false;
    }
    doc["bound_dominates_trace"] = dominated;
    doc["bound_usable"] = !fitted.report.bound_trace.empty();

    // small parametric consistency check around the fitted estimate
    if (fitted.model.theta.size() > 1 && reps > 1) {
        glm::ConsistencySpec cons;
        cons.theta_star = fitted.model.theta.head(fitted.model.theta.size() - 1);
        cons.c_star = -fitted.model.theta[fitted.model.theta.size() - 1];
        cons.sigma = fitted.model.sigma;
        cons.n_list = {200, 800};
        cons.reps = reps;
        cons.seed = field<std::uint64_t>(rc.doc, "seed", 0);
        json table = json::array();
        for (const auto& row : glm::consistency_experiment(cons)) {
            table.push_back({{"n", row.n},
                             {"mean_error", row.mean_error},
                             {"cov_rel_error", row.cov_rel_error},
                             {"failed_reps", row.failed_reps}});
        }
        doc["consistency"] = std::move(table);
    }

    fs::create_directories(rc.out);
    write_json(fs::path(rc.out) / "diagnostics.json", doc);
    if (!rc.quiet) std::cout << doc.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"set-valued transformer emission screening toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    std::optional<std::uint64_t> seed_flag;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON run configuration")->expected(1);
    app.add_option("--seed", seed_flag, "root seed overriding the config");
    app.add_option("--out", out_flag, "output directory");
    app.add_flag("--quiet", quiet, "suppress progress output");

    auto* gen = app.add_subcommand("generate", "write a synthetic micro-trip dataset");
    auto* ingest = app.add_subcommand("ingest", "window an OBD CSV into micro-trips");
    std::string csv_path;
    int window_override = 0;
    int stride_override = 0;
    ingest->add_option("csv", csv_path, "input CSV path")->required();
    ingest->add_option("--window", window_override, "records per micro-trip");
    ingest->add_option("--stride", stride_override, "window stride");
    auto* fit = app.add_subcommand("fit", "train a pipeline variant");
    auto* eval = app.add_subcommand("eval", "evaluate a fitted pipeline on a dataset");
    std::string fitted_dir;
    std::string data_path;
    eval->add_option("fitted", fitted_dir, "fitted pipeline directory")->required();
    eval->add_option("dataset", data_path, "JSON-lines dataset")->required();
    auto* sweep = app.add_subcommand("sweep", "emission-ratio robustness sweep");
    auto* diagnose = app.add_subcommand("diagnose", "convergence and consistency diagnostics");
    std::string diag_dir;
    int diag_reps = 20;
    diagnose->add_option("fitted", diag_dir, "fitted pipeline directory")->required();
    diagnose->add_option("--reps", diag_reps, "consistency replications");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        const RunConfig rc = load_run_config(config_path, seed_flag, out_flag, quiet);
        if (gen->parsed()) return cmd_generate(rc);
        if (ingest->parsed()) return cmd_ingest(rc, csv_path, window_override, stride_override);
        if (fit->parsed()) return cmd_fit(rc);
        if (eval->parsed()) return cmd_eval(rc, fitted_dir, data_path);
        if (sweep->parsed()) return cmd_sweep(rc);
        if (diagnose->parsed()) return cmd_diagnose(rc, diag_dir, diag_reps);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
