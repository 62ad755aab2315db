#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "svtn/emissions.hpp"
#include "svtn/encoder.hpp"
#include "svtn/glm.hpp"

// Model variants over micro-trips:
//   svtn             encoder features, power-expanded, set-valued GLM
//   transformer_only encoder logit thresholded through the sigmoid
//   sv_raw           per-window channel mean/std summaries, power-expanded GLM
namespace svtn::pipeline {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Variant { svtn, transformer_only, sv_raw };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

// [phi_1, phi_1^2, .., phi_1^k, phi_2, .., phi_n^k]
Vec power_expand(const Eigen::Ref<const Vec>& phi, int k);
Mat power_expand_rows(const Mat& phi, int k);

struct PipelineConfig {
    Variant variant = Variant::svtn;
    int k = 1;
    double p_star = 0.5;
    bool standardize = true;  // z-score expanded features with train statistics
    encoder::EncoderConfig encoder;
    encoder::TrainConfig train;
    glm::EmConfig em;
};

struct Standardizer {
    Vec mean;
    Vec scale;  // standard deviation, floored at 1 where degenerate

    Mat apply(const Mat& x) const;
};

Standardizer fit_standardizer(const Mat& x);

// Per-channel statistics over all window positions of the training trips.
Standardizer fit_channel_scaling(const std::vector<emissions::MicroTrip>& trips);
std::vector<Mat> apply_channel_scaling(const Standardizer& s,
                                       const std::vector<emissions::MicroTrip>& trips);

// Window summary features for sv_raw: all channel means then all channel stds.
Vec raw_summary(const emissions::MicroTrip& trip);

struct FittedPipeline {
    PipelineConfig config;
    std::optional<encoder::EncoderModel> enc;
    std::vector<double> encoder_loss_history;
    Standardizer channel_scaling;  // encoder-variant input scaling
    Standardizer feature_scaling;  // GLM feature scaling (identity if disabled)
    glm::SetValuedModel model;     // augmented theta; empty for transformer_only
    glm::FitReport report;
    std::vector<Vec> theta_trace;
    double ridge_jitter = 0.0;  // nonzero only when the excitation gate tripped
    long clamp_events = 0;
    double lambda_min = 0.0;

    void save(const std::string& dir, const std::string& config_hash = "",
              std::uint64_t seed = 0) const;
    static FittedPipeline load(const std::string& dir);
};

// Stage 1 trains the encoder (unless sv_raw); stage 2 expands, standardizes,
// augments with a constant-1 column and fits the GLM by EM.
FittedPipeline fit_pipeline(const std::vector<emissions::MicroTrip>& train,
                            const PipelineConfig& config);

struct Predictions {
    std::vector<int> labels;
    std::vector<double> probabilities;
};

// Applies the training-time transform chain (same statistics) and the
// decision rule prob >= p_star.
Predictions predict_pipeline(const FittedPipeline& fitted,
                             const std::vector<emissions::MicroTrip>& trips);

// The GLM design matrix the pipeline feeds to fit_em (expanded, standardized,
// augmented). Exposed for diagnostics and feature export.
Mat design_matrix(const FittedPipeline& fitted, const std::vector<emissions::MicroTrip>& trips);

// FitReport JSON uses the field names of the type verbatim.
nlohmann::json fit_report_to_json(const glm::FitReport& report);
glm::FitReport fit_report_from_json(const nlohmann::json& j);

}  // namespace svtn::pipeline
