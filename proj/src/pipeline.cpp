#include "svtn/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "svtn/errors.hpp"

namespace svtn::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using emissions::MicroTrip;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::svtn: return "svtn";
        case Variant::transformer_only: return "transformer_only";
        case Variant::sv_raw: return "sv_raw";
    }
    throw ConfigError("unknown variant");
}

Variant variant_from_string(const std::string& name) {
    if (name == "svtn") return Variant::svtn;
    if (name == "transformer_only") return Variant::transformer_only;
    if (name == "sv_raw") return Variant::sv_raw;
    throw ConfigError("unknown variant '" + name + "'");
}

Vec power_expand(const Eigen::Ref<const Vec>& phi, int k) {
    if (k < 1) throw ConfigError("power_expand: k must be >= 1");
    if (!phi.allFinite()) throw DataError("power_expand: non-finite input");
    Vec out(phi.size() * k);
    for (Eigen::Index j = 0; j < phi.size(); ++j) {
        double p = 1.0;
        for (int e = 0; e < k; ++e) {
            p *= phi[j];
            out[j * k + e] = p;
        }
    }
    return out;
}

Mat power_expand_rows(const Mat& phi, int k) {
    Mat out(phi.rows(), phi.cols() * k);
    for (Eigen::Index i = 0; i < phi.rows(); ++i)
        out.row(i) = power_expand(phi.row(i).transpose(), k).transpose();
    return out;
}

Mat Standardizer::apply(const Mat& x) const {
    if (x.cols() != mean.size()) throw DataError("standardizer: dimension mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Standardizer fit_standardizer(const Mat& x) {
    if (x.rows() == 0) throw DataError("fit_standardizer: empty matrix");
    Standardizer s;
    s.mean = x.colwise().mean();
    Mat centered = x.rowwise() - s.mean.transpose();
    s.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows()))
                  .sqrt()
                  .transpose();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
        if (s.scale[j] < 1e-12) s.scale[j] = 1.0;  // constant column: leave as-is
    return s;
}

Standardizer fit_channel_scaling(const std::vector<MicroTrip>& trips) {
    if (trips.empty()) throw DataError("fit_channel_scaling: no trips");
    const Eigen::Index channels = trips[0].sequence.cols();
    Eigen::Index rows = 0;
    for (const MicroTrip& t : trips) rows += t.sequence.rows();
    Mat stacked(rows, channels);
    Eigen::Index at = 0;
    for (const MicroTrip& t : trips) {
        if (t.sequence.cols() != channels)
            throw DataError("fit_channel_scaling: inconsistent channel count");
        stacked.middleRows(at, t.sequence.rows()) = t.sequence;
        at += t.sequence.rows();
    }
    return fit_standardizer(stacked);
}

std::vector<Mat> apply_channel_scaling(const Standardizer& s,
                                       const std::vector<MicroTrip>& trips) {
    std::vector<Mat> out;
    out.reserve(trips.size());
    for (const MicroTrip& t : trips) out.push_back(s.apply(t.sequence));
    return out;
}

Vec raw_summary(const MicroTrip& trip) {
    const Eigen::Index channels = trip.sequence.cols();
    const auto w = static_cast<double>(trip.sequence.rows());
    Vec out(2 * channels);
    for (Eigen::Index c = 0; c < channels; ++c) {
        const double mean = trip.sequence.col(c).mean();
        const double var = (trip.sequence.col(c).array() - mean).square().sum() / w;
        out[c] = mean;
        out[channels + c] = std::sqrt(var);
    }
    return out;
}

namespace {

Eigen::VectorXi labels_of(const std::vector<MicroTrip>& trips) {
    Eigen::VectorXi labels(static_cast<Eigen::Index>(trips.size()));
    for (std::size_t i = 0; i < trips.size(); ++i)
        labels[static_cast<Eigen::Index>(i)] = trips[i].label;
    return labels;
}

Mat augment_ones(const Mat& x) {
    Mat out(x.rows(), x.cols() + 1);
    out.leftCols(x.cols()) = x;
    out.col(x.cols()).setOnes();
    return out;
}

// Raw (pre-standardization) GLM features per variant.
Mat base_features(const FittedPipeline& fitted, const std::vector<MicroTrip>& trips) {
    const PipelineConfig& cfg = fitted.config;
    if (cfg.variant == Variant::sv_raw) {
        if (trips.empty()) return Mat(0, 0);
        Mat feats(static_cast<Eigen::Index>(trips.size()), 2 * trips[0].sequence.cols());
        for (std::size_t i = 0; i < trips.size(); ++i)
            feats.row(static_cast<Eigen::Index>(i)) = raw_summary(trips[i]).transpose();
        return feats;
    }
    const auto inputs = apply_channel_scaling(fitted.channel_scaling, trips);
    return encoder::extract_features(*fitted.enc, inputs);
}

}  // namespace

Mat design_matrix(const FittedPipeline& fitted, const std::vector<MicroTrip>& trips) {
    Mat feats = base_features(fitted, trips);
    Mat expanded = power_expand_rows(feats, fitted.config.k);
    if (fitted.config.standardize) expanded = fitted.feature_scaling.apply(expanded);
    return augment_ones(expanded);
}

FittedPipeline fit_pipeline(const std::vector<MicroTrip>& train, const PipelineConfig& config) {
    if (train.empty()) throw DataError("fit_pipeline: empty training set");
    if (config.k < 1) throw ConfigError("fit_pipeline: k must be >= 1");
    const Eigen::VectorXi labels = labels_of(train);
    const auto n_pos = (labels.array() == 1).count();
    if (n_pos == 0 || n_pos == labels.size())
        throw DataError("fit_pipeline: training set must contain both classes");

    FittedPipeline fitted;
    fitted.config = config;

    if (config.variant != Variant::sv_raw) {
        fitted.channel_scaling = fit_channel_scaling(train);
        const auto inputs = apply_channel_scaling(fitted.channel_scaling, train);
        encoder::TrainResult tr =
            encoder::train(encoder::init_encoder(config.encoder), inputs, labels, config.train);
        fitted.enc = std::move(tr.model);
        fitted.encoder_loss_history = std::move(tr.loss_history);
        if (tr.diverged) throw NumericalError("fit_pipeline: encoder training diverged");
    }

    if (config.variant == Variant::transformer_only) return fitted;

    Mat feats = base_features(fitted, train);
    Mat expanded = power_expand_rows(feats, config.k);
    if (config.standardize) {
        fitted.feature_scaling = fit_standardizer(expanded);
        expanded = fitted.feature_scaling.apply(expanded);
    }
    Mat design = augment_ones(expanded);

    glm::EmConfig em = config.em;
    glm::ExcitationReport exc = glm::check_excitation(design, em.excitation_tol);
    fitted.lambda_min = exc.lambda_min;
    if (!exc.ok) {
        // near-singular A after expansion: disclosed ridge jitter
        fitted.ridge_jitter =
            1e-8 * exc.A.trace() / static_cast<double>(design.cols());
        em.ridge = fitted.ridge_jitter;
        if (!(exc.lambda_min + fitted.ridge_jitter > 0.0))
            throw NumericalError("fit_pipeline: excitation failure (lambda_min = " +
                                 std::to_string(exc.lambda_min) + ")");
    }

    glm::FitResult fit = glm::fit_em(design, labels, Vec::Zero(design.cols()), em);
    fitted.model = glm::SetValuedModel{fit.report.theta_hat, 0.0, em.sigma};
    fitted.report = std::move(fit.report);
    fitted.theta_trace = std::move(fit.theta_trace);
    fitted.clamp_events = fit.clamp_events;
    return fitted;
}

Predictions predict_pipeline(const FittedPipeline& fitted, const std::vector<MicroTrip>& trips) {
    Predictions out;
    if (trips.empty()) return out;
    out.labels.reserve(trips.size());
    out.probabilities.reserve(trips.size());

    if (fitted.config.variant == Variant::transformer_only) {
        const auto inputs = apply_channel_scaling(fitted.channel_scaling, trips);
        const encoder::ForwardResult fwd = encoder::forward(*fitted.enc, inputs);
        for (Eigen::Index i = 0; i < fwd.logits.size(); ++i) {
            const double p = sigmoid(fwd.logits[i]);
            out.probabilities.push_back(p);
            out.labels.push_back(p >= fitted.config.p_star ? 1 : 0);
        }
        return out;
    }

    const Mat design = design_matrix(fitted, trips);
    if (design.cols() != fitted.model.theta.size())
        throw DataError("predict_pipeline: feature dimension differs from training");
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const double p = glm::prob_s1(fitted.model, design.row(i).transpose());
        out.probabilities.push_back(p);
        out.labels.push_back(p >= fitted.config.p_star ? 1 : 0);
    }
    return out;
}

namespace {

json vec_to_json(const Vec& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Vec vec_from_json(const json& arr) {
    Vec v(static_cast<Eigen::Index>(arr.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = arr.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
    return rows;
}

Mat mat_from_json(const json& rows) {
    if (rows.empty()) return Mat(0, 0);
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(rows.at(0).size());
    Mat m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r)
        m.row(r) = vec_from_json(rows.at(static_cast<std::size_t>(r))).transpose();
    return m;
}

}  // namespace

json fit_report_to_json(const glm::FitReport& report) {
    json j;
    j["theta_hat"] = vec_to_json(report.theta_hat);
    j["loglik_trace"] = report.loglik_trace;
    j["iterations"] = report.iterations;
    j["converged"] = report.converged;
    j["contraction_estimate"] = report.contraction_estimate;
    j["bound_trace"] = report.bound_trace;
    j["fisher_info"] = mat_to_json(report.fisher_info);
    return j;
}

glm::FitReport fit_report_from_json(const json& j) {
    glm::FitReport r;
    r.theta_hat = vec_from_json(j.at("theta_hat"));
    r.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.contraction_estimate = j.at("contraction_estimate").get<double>();
    r.bound_trace = j.at("bound_trace").get<std::vector<double>>();
    r.fisher_info = mat_from_json(j.at("fisher_info"));
    return r;
}

void FittedPipeline::save(const std::string& dir, const std::string& config_hash,
                          std::uint64_t seed) const {
    fs::create_directories(dir);

    if (enc) encoder::save_encoder((fs::path(dir) / "encoder.svtn").string(), *enc);

    json glm_doc;
    glm_doc["variant"] = to_string(config.variant);
    glm_doc["k"] = config.k;
    glm_doc["p_star"] = config.p_star;
    glm_doc["standardize"] = config.standardize;
    glm_doc["theta"] = vec_to_json(model.theta);
    glm_doc["threshold"] = model.threshold;
    glm_doc["sigma"] = model.sigma;
    glm_doc["channel_mean"] = vec_to_json(channel_scaling.mean);
    glm_doc["channel_scale"] = vec_to_json(channel_scaling.scale);
    glm_doc["feature_mean"] = vec_to_json(feature_scaling.mean);
    glm_doc["feature_scale"] = vec_to_json(feature_scaling.scale);
    glm_doc["ridge_jitter"] = ridge_jitter;
    glm_doc["lambda_min"] = lambda_min;
    glm_doc["clamp_events"] = clamp_events;
    std::ofstream(fs::path(dir) / "glm.json") << glm_doc.dump(2) << "\n";

    json manifest;
    manifest["format_version"] = 1;
    manifest["config_hash"] = config_hash;
    manifest["seed"] = seed;
    manifest["variant"] = to_string(config.variant);
    manifest["k"] = config.k;
    manifest["encoder"] = {{"input_channels", config.encoder.input_channels},
                           {"seq_len", config.encoder.seq_len},
                           {"d_model", config.encoder.d_model},
                           {"n_heads", config.encoder.n_heads},
                           {"n_layers", config.encoder.n_layers},
                           {"d_ff", config.encoder.d_ff},
                           {"feature_dim", config.encoder.feature_dim},
                           {"seed", config.encoder.seed}};
    manifest["train"] = {{"epochs", config.train.epochs},
                         {"lr", config.train.lr},
                         {"batch_size", config.train.batch_size},
                         {"seed", config.train.seed},
                         {"class_weight", config.train.class_weight}};
    manifest["em"] = {{"max_iter", config.em.max_iter},
                      {"tol", config.em.tol},
                      {"clamp_eps", config.em.clamp_eps},
                      {"ridge", config.em.ridge},
                      {"sigma", config.em.sigma}};
    manifest["encoder_loss_history"] = encoder_loss_history;
    std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << "\n";

    std::ofstream(fs::path(dir) / "report.json") << fit_report_to_json(report).dump(2) << "\n";

    json trace;
    trace["theta_trace"] = json::array();
    for (const Vec& t : theta_trace) trace["theta_trace"].push_back(vec_to_json(t));
    json errors = json::array();
    if (!theta_trace.empty()) {
        const Vec& last = theta_trace.back();
        for (const Vec& t : theta_trace) errors.push_back((t - last).norm());
    }
    trace["error_to_final"] = std::move(errors);
    std::ofstream(fs::path(dir) / "trace.json") << trace.dump(2) << "\n";
}

FittedPipeline FittedPipeline::load(const std::string& dir) {
    const fs::path base(dir);
    std::ifstream glm_in(base / "glm.json");
    if (!glm_in) throw DataError("pipeline load: missing glm.json in " + dir);
    json glm_doc = json::parse(glm_in);
    std::ifstream man_in(base / "manifest.json");
    if (!man_in) throw DataError("pipeline load: missing manifest.json in " + dir);
    json manifest = json::parse(man_in);

    FittedPipeline fitted;
    fitted.config.variant = variant_from_string(glm_doc.at("variant").get<std::string>());
    fitted.config.k = glm_doc.at("k").get<int>();
    fitted.config.p_star = glm_doc.at("p_star").get<double>();
    fitted.config.standardize = glm_doc.at("standardize").get<bool>();
    const json& enc_cfg = manifest.at("encoder");
    fitted.config.encoder.input_channels = enc_cfg.at("input_channels").get<int>();
    fitted.config.encoder.seq_len = enc_cfg.at("seq_len").get<int>();
    fitted.config.encoder.d_model = enc_cfg.at("d_model").get<int>();
    fitted.config.encoder.n_heads = enc_cfg.at("n_heads").get<int>();
    fitted.config.encoder.n_layers = enc_cfg.at("n_layers").get<int>();
    fitted.config.encoder.d_ff = enc_cfg.at("d_ff").get<int>();
    fitted.config.encoder.feature_dim = enc_cfg.at("feature_dim").get<int>();
    fitted.config.encoder.seed = enc_cfg.at("seed").get<std::uint64_t>();
    const json& train_cfg = manifest.at("train");
    fitted.config.train.epochs = train_cfg.at("epochs").get<int>();
    fitted.config.train.lr = train_cfg.at("lr").get<double>();
    fitted.config.train.batch_size = train_cfg.at("batch_size").get<int>();
    fitted.config.train.seed = train_cfg.at("seed").get<std::uint64_t>();
    fitted.config.train.class_weight = train_cfg.at("class_weight").get<bool>();
    const json& em_cfg = manifest.at("em");
    fitted.config.em.max_iter = em_cfg.at("max_iter").get<int>();
    fitted.config.em.tol = em_cfg.at("tol").get<double>();
    fitted.config.em.clamp_eps = em_cfg.at("clamp_eps").get<double>();
    fitted.config.em.ridge = em_cfg.at("ridge").get<double>();
    fitted.config.em.sigma = em_cfg.at("sigma").get<double>();

    fitted.model.theta = vec_from_json(glm_doc.at("theta"));
    fitted.model.threshold = glm_doc.at("threshold").get<double>();
    fitted.model.sigma = glm_doc.at("sigma").get<double>();
    fitted.channel_scaling.mean = vec_from_json(glm_doc.at("channel_mean"));
    fitted.channel_scaling.scale = vec_from_json(glm_doc.at("channel_scale"));
    fitted.feature_scaling.mean = vec_from_json(glm_doc.at("feature_mean"));
    fitted.feature_scaling.scale = vec_from_json(glm_doc.at("feature_scale"));
    fitted.ridge_jitter = glm_doc.at("ridge_jitter").get<double>();
    fitted.lambda_min = glm_doc.at("lambda_min").get<double>();
    fitted.clamp_events = glm_doc.at("clamp_events").get<long>();

    if (fs::exists(base / "encoder.svtn"))
        fitted.enc = encoder::load_encoder((base / "encoder.svtn").string());
    if (fitted.config.variant != Variant::sv_raw && !fitted.enc)
        throw DataError("pipeline load: variant requires encoder.svtn in " + dir);

    std::ifstream rep_in(base / "report.json");
    if (rep_in) fitted.report = fit_report_from_json(json::parse(rep_in));
    std::ifstream trace_in(base / "trace.json");
    if (trace_in) {
        json trace = json::parse(trace_in);
        for (const json& t : trace.at("theta_trace")) fitted.theta_trace.push_back(vec_from_json(t));
    }
    return fitted;
}

}  // namespace svtn::pipeline
