#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Toy transformer encoder mapping a micro-trip's channel sequence to a short
// feature vector and a pre-training logit. Pre-layer-norm blocks, learned
// positional embeddings, mean pooling, GELU feed-forward. Gradients are
// hand-derived for this fixed architecture; training is plain seeded SGD.
namespace svtn::encoder {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Labels = Eigen::VectorXi;

struct EncoderConfig {
    int input_channels = 4;
    int seq_len = 16;
    int d_model = 16;
    int n_heads = 2;
    int n_layers = 2;
    int d_ff = 32;
    int feature_dim = 8;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// All parameters are MatrixXd (biases are 1 x k rows) so that one enumeration
// drives SGD, serialization, and finite-difference checks.
struct EncoderLayer {
    Mat ln1_gain, ln1_bias;
    Mat wq, bq, wk, bk, wv, bv, wo, bo;
    Mat ln2_gain, ln2_bias;
    Mat w1, b1, w2, b2;
};

struct EncoderModel {
    EncoderConfig config;
    Mat input_proj;  // input_channels x d_model
    Mat input_bias;  // 1 x d_model
    Mat pos_embed;   // seq_len x d_model
    std::vector<EncoderLayer> layers;
    Mat feature_w;  // d_model x feature_dim
    Mat feature_b;  // 1 x feature_dim
    Mat logit_w;    // feature_dim x 1
    Mat logit_b;    // 1 x 1
};

// Seeded random init (weights ~ N(0, 1/sqrt(fan_in)), biases zero, layer-norm
// gains one).
EncoderModel init_encoder(const EncoderConfig& config);

// Same shapes as `model`, all entries zero. Used as the gradient holder.
EncoderModel zeros_like(const EncoderModel& model);

// Parameter enumeration in the fixed order that also defines the serialized
// weight-block order:
//   input_proj, input_bias, pos_embed,
//   per layer: ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo,
//              ln2_gain, ln2_bias, w1, b1, w2, b2,
//   feature_w, feature_b, logit_w, logit_b
std::vector<std::pair<std::string, Mat*>> parameters(EncoderModel& model);
std::vector<std::pair<std::string, const Mat*>> parameters(const EncoderModel& model);

// Row-wise softmax; every output row sums to 1.
Mat softmax_rows(const Mat& scores);

// softmax(Q K' / sqrt(d_head)) V for one head.
Mat attention_single_head(const Mat& q, const Mat& k, const Mat& v);

struct ForwardResult {
    Mat features;  // N x feature_dim (pooled pre-logit representation)
    Vec logits;    // N
};

// Deterministic forward pass over a batch of seq_len x input_channels inputs.
ForwardResult forward(const EncoderModel& model, const std::vector<Mat>& inputs);

// -(1/N) sum [ w z log sig(x) + (1-z) log(1-sig(x)) ] in softplus form;
// pos_weight w scales the positive-class term (1 = plain loss).
double bce_with_logits(const Vec& logits, const Labels& labels, double pos_weight = 1.0);

struct BackwardResult {
    double loss = 0.0;
    EncoderModel grads;
};

// Exact gradients of bce_with_logits(forward(...)) w.r.t. every parameter.
BackwardResult backward(const EncoderModel& model, const std::vector<Mat>& inputs,
                        const Labels& labels, double pos_weight = 1.0);

struct TrainConfig {
    int epochs = 10;
    double lr = 0.05;
    int batch_size = 64;
    std::uint64_t seed = 0;
    bool class_weight = false;  // weight positives by N_neg/N_pos
};

struct TrainResult {
    EncoderModel model;
    std::vector<double> loss_history;  // mean loss per epoch
    bool diverged = false;
};

// Seeded-shuffle SGD. A non-finite epoch loss aborts training and returns the
// weights from the start of that epoch.
TrainResult train(EncoderModel model, const std::vector<Mat>& inputs, const Labels& labels,
                  const TrainConfig& config);

// Feature rows only; the logit head is not evaluated.
Mat extract_features(const EncoderModel& model, const std::vector<Mat>& inputs);

// Versioned binary format, little-endian: magic "SVTN", u32 version, config as
// seven i32 plus u64 seed, then every parameter block (row-major f32) in
// `parameters` order.
void save_encoder(const std::string& path, const EncoderModel& model);
EncoderModel load_encoder(const std::string& path);

}  // namespace svtn::encoder
