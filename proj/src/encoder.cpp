#include "svtn/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "svtn/errors.hpp"
#include "svtn/link.hpp"
#include "svtn/rng.hpp"

namespace svtn::encoder {

namespace {

constexpr double kLnEps = 1e-5;
constexpr char kMagic[4] = {'S', 'V', 'T', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

double gelu(double x) { return x * normal_cdf(x); }
double gelu_grad(double x) { return normal_cdf(x) + x * normal_pdf(x); }

// Stacked batch layout: sample i occupies rows [i*seq, (i+1)*seq).
struct LayerCache {
    Mat xhat1, u, q, k, v, attn_out;  // S x d_model
    Vec inv_std1;                     // S
    std::vector<Mat> softmax;         // n_heads per sample, row-major (i * heads + h)
    Mat xhat2, u2;                    // S x d_model
    Vec inv_std2;
    Mat z1, g;  // S x d_ff
};

struct ForwardCache {
    Mat x;  // S x channels
    Mat h0;
    std::vector<LayerCache> layers;
    Mat h_final;   // S x d_model
    Mat pooled;    // N x d_model
    Mat features;  // N x feature_dim
    Vec logits;
};

void layer_norm(const Mat& x, const Mat& gain, const Mat& bias, Mat& xhat, Vec& inv_std,
                Mat& out) {
    const auto d = x.cols();
    xhat.resize(x.rows(), d);
    inv_std.resize(x.rows());
    out.resize(x.rows(), d);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std[r] = is;
        xhat.row(r) = (x.row(r).array() - mu) * is;
        out.row(r) = xhat.row(r).cwiseProduct(gain.row(0)) + bias.row(0);
    }
}

// dx for y = gain .* xhat + bias; accumulates parameter gradients.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& inv_std, const Mat& gain,
                        Mat& dgain, Mat& dbias) {
    const double d = static_cast<double>(dy.cols());
    dgain.row(0) += dy.cwiseProduct(xhat).colwise().sum();
    dbias.row(0) += dy.colwise().sum();
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const auto dxhat = dy.row(r).cwiseProduct(gain.row(0));
        const double m1 = dxhat.sum() / d;
        const double m2 = dxhat.cwiseProduct(xhat.row(r)).sum() / d;
        dx.row(r) = inv_std[r] * (dxhat.array() - m1 - xhat.row(r).array() * m2);
    }
    return dx;
}

Mat stack_inputs(const EncoderConfig& cfg, const std::vector<Mat>& inputs) {
    if (inputs.empty()) throw DataError("encoder: empty batch");
    Mat x(static_cast<Eigen::Index>(inputs.size()) * cfg.seq_len, cfg.input_channels);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].rows() != cfg.seq_len || inputs[i].cols() != cfg.input_channels)
            throw DataError("encoder: input " + std::to_string(i) + " has shape " +
                            std::to_string(inputs[i].rows()) + "x" +
                            std::to_string(inputs[i].cols()) + ", expected " +
                            std::to_string(cfg.seq_len) + "x" +
                            std::to_string(cfg.input_channels));
        x.middleRows(static_cast<Eigen::Index>(i) * cfg.seq_len, cfg.seq_len) = inputs[i];
    }
    if (!x.allFinite()) throw DataError("encoder: non-finite input");
    return x;
}

void run_forward(const EncoderModel& model, const std::vector<Mat>& inputs,
                 ForwardCache& cache, bool keep_intermediates) {
    const EncoderConfig& cfg = model.config;
    cfg.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
    const Eigen::Index seq = cfg.seq_len;
    const int dh = cfg.d_model / cfg.n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    cache.x = stack_inputs(cfg, inputs);
    Mat h = cache.x * model.input_proj;
    h.rowwise() += model.input_bias.row(0);
    for (Eigen::Index i = 0; i < n; ++i) h.middleRows(i * seq, seq) += model.pos_embed;
    if (keep_intermediates) cache.h0 = h;

    cache.layers.assign(keep_intermediates ? model.layers.size() : 0, LayerCache{});
    LayerCache scratch;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const EncoderLayer& lw = model.layers[l];
        LayerCache& lc = keep_intermediates ? cache.layers[l] : scratch;

        layer_norm(h, lw.ln1_gain, lw.ln1_bias, lc.xhat1, lc.inv_std1, lc.u);
        lc.q = lc.u * lw.wq;
        lc.q.rowwise() += lw.bq.row(0);
        lc.k = lc.u * lw.wk;
        lc.k.rowwise() += lw.bk.row(0);
        lc.v = lc.u * lw.wv;
        lc.v.rowwise() += lw.bv.row(0);

        lc.attn_out.resize(h.rows(), cfg.d_model);
        lc.softmax.assign(static_cast<std::size_t>(n) * cfg.n_heads, Mat());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int hd = 0; hd < cfg.n_heads; ++hd) {
                const auto qb = lc.q.block(i * seq, hd * dh, seq, dh);
                const auto kb = lc.k.block(i * seq, hd * dh, seq, dh);
                const auto vb = lc.v.block(i * seq, hd * dh, seq, dh);
                Mat a = softmax_rows(qb * kb.transpose() * scale);
                lc.attn_out.block(i * seq, hd * dh, seq, dh).noalias() = a * vb;
                lc.softmax[static_cast<std::size_t>(i) * cfg.n_heads + hd] = std::move(a);
            }
        }
        Mat m = lc.attn_out * lw.wo;
        m.rowwise() += lw.bo.row(0);
        h += m;

        layer_norm(h, lw.ln2_gain, lw.ln2_bias, lc.xhat2, lc.inv_std2, lc.u2);
        lc.z1 = lc.u2 * lw.w1;
        lc.z1.rowwise() += lw.b1.row(0);
        lc.g = lc.z1.unaryExpr([](double v) { return gelu(v); });
        Mat f2 = lc.g * lw.w2;
        f2.rowwise() += lw.b2.row(0);
        h += f2;

        if (!h.allFinite())
            throw NumericalError("encoder forward: non-finite values after layer " +
                                 std::to_string(l));
    }
    cache.h_final = std::move(h);

    cache.pooled.resize(n, cfg.d_model);
    for (Eigen::Index i = 0; i < n; ++i)
        cache.pooled.row(i) = cache.h_final.middleRows(i * seq, seq).colwise().mean();
    cache.features = cache.pooled * model.feature_w;
    cache.features.rowwise() += model.feature_b.row(0);
    cache.logits = (cache.features * model.logit_w).col(0) +
                   Vec::Constant(n, model.logit_b(0, 0));
}

void check_labels(const Vec& logits, const Labels& labels) {
    if (logits.size() != labels.size())
        throw DataError("bce_with_logits: logits/labels length mismatch");
    if (logits.size() == 0) throw DataError("bce_with_logits: empty batch");
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw DataError("bce_with_logits: labels must be 0 or 1");
    }
}

}  // namespace

void EncoderConfig::validate() const {
    if (input_channels < 1 || seq_len < 1 || d_model < 1 || n_heads < 1 || n_layers < 1 ||
        d_ff < 1 || feature_dim < 1)
        throw ConfigError("encoder config: all dimensions must be >= 1");
    if (d_model % n_heads != 0)
        throw ConfigError("encoder config: d_model must be divisible by n_heads");
    if (feature_dim > d_model)
        throw ConfigError("encoder config: feature_dim must not exceed d_model");
}

EncoderModel init_encoder(const EncoderConfig& config) {
    config.validate();
    EncoderModel m;
    m.config = config;
    m.input_proj.resize(config.input_channels, config.d_model);
    m.input_bias = Mat::Zero(1, config.d_model);
    m.pos_embed.resize(config.seq_len, config.d_model);
    m.layers.resize(static_cast<std::size_t>(config.n_layers));
    for (EncoderLayer& l : m.layers) {
        l.ln1_gain = Mat::Ones(1, config.d_model);
        l.ln1_bias = Mat::Zero(1, config.d_model);
        l.wq.resize(config.d_model, config.d_model);
        l.wk.resize(config.d_model, config.d_model);
        l.wv.resize(config.d_model, config.d_model);
        l.wo.resize(config.d_model, config.d_model);
        l.bq = Mat::Zero(1, config.d_model);
        l.bk = Mat::Zero(1, config.d_model);
        l.bv = Mat::Zero(1, config.d_model);
        l.bo = Mat::Zero(1, config.d_model);
        l.ln2_gain = Mat::Ones(1, config.d_model);
        l.ln2_bias = Mat::Zero(1, config.d_model);
        l.w1.resize(config.d_model, config.d_ff);
        l.b1 = Mat::Zero(1, config.d_ff);
        l.w2.resize(config.d_ff, config.d_model);
        l.b2 = Mat::Zero(1, config.d_model);
    }
    m.feature_w.resize(config.d_model, config.feature_dim);
    m.feature_b = Mat::Zero(1, config.feature_dim);
    m.logit_w.resize(config.feature_dim, 1);
    m.logit_b = Mat::Zero(1, 1);

    // fill weight matrices in parameter order; fan-in scaled normal draws
    Rng rng(derive_seed(config.seed, 0x454e43ULL));
    for (auto& [name, mat] : parameters(m)) {
        const bool is_bias = name.find("bias") != std::string::npos ||
                             name.find(".b") != std::string::npos || name == "logit_b" ||
                             name == "feature_b";
        const bool is_gain = name.find("gain") != std::string::npos;
        if (is_bias || is_gain) continue;  // zeros / ones from construction
        const double std_dev = name == "pos_embed"
                                   ? 0.02
                                   : 1.0 / std::sqrt(static_cast<double>(mat->rows()));
        for (Eigen::Index r = 0; r < mat->rows(); ++r)
            for (Eigen::Index c = 0; c < mat->cols(); ++c) (*mat)(r, c) = rng.normal(0.0, std_dev);
    }
    return m;
}

EncoderModel zeros_like(const EncoderModel& model) {
    EncoderModel z = model;
    for (auto& [name, mat] : parameters(z)) mat->setZero();
    return z;
}

namespace {

template <typename ModelT, typename MatT>
std::vector<std::pair<std::string, MatT*>> enumerate(ModelT& m) {
    std::vector<std::pair<std::string, MatT*>> out;
    out.emplace_back("input_proj", &m.input_proj);
    out.emplace_back("input_bias", &m.input_bias);
    out.emplace_back("pos_embed", &m.pos_embed);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        auto& lw = m.layers[l];
        out.emplace_back(p + "ln1_gain", &lw.ln1_gain);
        out.emplace_back(p + "ln1_bias", &lw.ln1_bias);
        out.emplace_back(p + "wq", &lw.wq);
        out.emplace_back(p + "bq", &lw.bq);
        out.emplace_back(p + "wk", &lw.wk);
        out.emplace_back(p + "bk", &lw.bk);
        out.emplace_back(p + "wv", &lw.wv);
        out.emplace_back(p + "bv", &lw.bv);
        out.emplace_back(p + "wo", &lw.wo);
        out.emplace_back(p + "bo", &lw.bo);
        out.emplace_back(p + "ln2_gain", &lw.ln2_gain);
        out.emplace_back(p + "ln2_bias", &lw.ln2_bias);
        out.emplace_back(p + "w1", &lw.w1);
        out.emplace_back(p + "b1", &lw.b1);
        out.emplace_back(p + "w2", &lw.w2);
        out.emplace_back(p + "b2", &lw.b2);
    }
    out.emplace_back("feature_w", &m.feature_w);
    out.emplace_back("feature_b", &m.feature_b);
    out.emplace_back("logit_w", &m.logit_w);
    out.emplace_back("logit_b", &m.logit_b);
    return out;
}

}  // namespace

std::vector<std::pair<std::string, Mat*>> parameters(EncoderModel& model) {
    return enumerate<EncoderModel, Mat>(model);
}

std::vector<std::pair<std::string, const Mat*>> parameters(const EncoderModel& model) {
    return enumerate<const EncoderModel, const Mat>(model);
}

Mat softmax_rows(const Mat& scores) {
    Mat out(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double mx = scores.row(r).maxCoeff();
        out.row(r) = (scores.row(r).array() - mx).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

Mat attention_single_head(const Mat& q, const Mat& k, const Mat& v) {
    if (q.cols() != k.cols() || k.rows() != v.rows())
        throw DataError("attention: incompatible shapes");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    return softmax_rows(q * k.transpose() * scale) * v;
}

ForwardResult forward(const EncoderModel& model, const std::vector<Mat>& inputs) {
    ForwardCache cache;
    run_forward(model, inputs, cache, false);
    return ForwardResult{std::move(cache.features), std::move(cache.logits)};
}

double bce_with_logits(const Vec& logits, const Labels& labels, double pos_weight) {
    check_labels(logits, labels);
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        total += labels[i] == 1 ? pos_weight * softplus(-x) : softplus(x);
    }
    return total / static_cast<double>(logits.size());
}

BackwardResult backward(const EncoderModel& model, const std::vector<Mat>& inputs,
                        const Labels& labels, double pos_weight) {
    const EncoderConfig& cfg = model.config;
    ForwardCache cache;
    run_forward(model, inputs, cache, true);
    check_labels(cache.logits, labels);

    BackwardResult result;
    result.loss = bce_with_logits(cache.logits, labels, pos_weight);
    result.grads = zeros_like(model);
    EncoderModel& g = result.grads;

    const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
    const Eigen::Index seq = cfg.seq_len;
    const int dh = cfg.d_model / cfg.n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double inv_n = 1.0 / static_cast<double>(n);

    Vec dlogits(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = cache.logits[i];
        dlogits[i] = inv_n * (labels[i] == 1 ? -pos_weight * sigmoid(-x) : sigmoid(x));
    }

    g.logit_w += cache.features.transpose() * dlogits;
    g.logit_b(0, 0) += dlogits.sum();
    Mat dfeat = dlogits * model.logit_w.transpose();  // n x feature_dim

    g.feature_w += cache.pooled.transpose() * dfeat;
    g.feature_b.row(0) += dfeat.colwise().sum();
    Mat dpool = dfeat * model.feature_w.transpose();  // n x d_model

    Mat dh_stack(n * seq, cfg.d_model);
    const double inv_seq = 1.0 / static_cast<double>(seq);
    for (Eigen::Index i = 0; i < n; ++i)
        dh_stack.middleRows(i * seq, seq) = inv_seq * dpool.row(i).replicate(seq, 1);

    for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
        const EncoderLayer& lw = model.layers[static_cast<std::size_t>(l)];
        EncoderLayer& lg = g.layers[static_cast<std::size_t>(l)];
        const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];

        // feed-forward block
        const Mat& df2 = dh_stack;
        Mat dg_act = df2 * lw.w2.transpose();
        lg.w2 += lc.g.transpose() * df2;
        lg.b2.row(0) += df2.colwise().sum();
        Mat dz1 = dg_act.cwiseProduct(lc.z1.unaryExpr([](double v) { return gelu_grad(v); }));
        Mat du2 = dz1 * lw.w1.transpose();
        lg.w1 += lc.u2.transpose() * dz1;
        lg.b1.row(0) += dz1.colwise().sum();
        Mat dh_mid = dh_stack + layer_norm_backward(du2, lc.xhat2, lc.inv_std2, lw.ln2_gain,
                                                    lg.ln2_gain, lg.ln2_bias);

        // attention block
        Mat dattn_out = dh_mid * lw.wo.transpose();
        lg.wo += lc.attn_out.transpose() * dh_mid;
        lg.bo.row(0) += dh_mid.colwise().sum();

        Mat dq = Mat::Zero(n * seq, cfg.d_model);
        Mat dk = Mat::Zero(n * seq, cfg.d_model);
        Mat dv = Mat::Zero(n * seq, cfg.d_model);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int hd = 0; hd < cfg.n_heads; ++hd) {
                const Mat& a = lc.softmax[static_cast<std::size_t>(i) * cfg.n_heads + hd];
                const auto dob = dattn_out.block(i * seq, hd * dh, seq, dh);
                const auto qb = lc.q.block(i * seq, hd * dh, seq, dh);
                const auto kb = lc.k.block(i * seq, hd * dh, seq, dh);
                const auto vb = lc.v.block(i * seq, hd * dh, seq, dh);
                dv.block(i * seq, hd * dh, seq, dh).noalias() = a.transpose() * dob;
                Mat da = dob * vb.transpose();
                // softmax rows backward: ds = a .* (da - rowsum(da .* a))
                Mat ds(a.rows(), a.cols());
                for (Eigen::Index r = 0; r < a.rows(); ++r) {
                    const double dot = da.row(r).dot(a.row(r));
                    ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
                }
                dq.block(i * seq, hd * dh, seq, dh).noalias() = ds * kb * scale;
                dk.block(i * seq, hd * dh, seq, dh).noalias() = ds.transpose() * qb * scale;
            }
        }
        lg.wq += lc.u.transpose() * dq;
        lg.bq.row(0) += dq.colwise().sum();
        lg.wk += lc.u.transpose() * dk;
        lg.bk.row(0) += dk.colwise().sum();
        lg.wv += lc.u.transpose() * dv;
        lg.bv.row(0) += dv.colwise().sum();
        Mat du = dq * lw.wq.transpose() + dk * lw.wk.transpose() + dv * lw.wv.transpose();
        dh_stack = dh_mid + layer_norm_backward(du, lc.xhat1, lc.inv_std1, lw.ln1_gain,
                                                lg.ln1_gain, lg.ln1_bias);
    }

    g.input_proj += cache.x.transpose() * dh_stack;
    g.input_bias.row(0) += dh_stack.colwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) g.pos_embed += dh_stack.middleRows(i * seq, seq);
    return result;
}

TrainResult train(EncoderModel model, const std::vector<Mat>& inputs, const Labels& labels,
                  const TrainConfig& config) {
    if (inputs.empty()) throw DataError("train: empty dataset");
    if (static_cast<Eigen::Index>(inputs.size()) != labels.size())
        throw DataError("train: inputs/labels length mismatch");
    if (config.epochs < 0 || config.batch_size < 1)
        throw ConfigError("train: bad epochs/batch_size");

    double pos_weight = 1.0;
    if (config.class_weight) {
        const auto n_pos = (labels.array() == 1).count();
        const auto n_neg = labels.size() - n_pos;
        if (n_pos > 0 && n_neg > 0)
            pos_weight = static_cast<double>(n_neg) / static_cast<double>(n_pos);
    }

    TrainResult result;
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EncoderModel snapshot = model;
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<Mat> batch;
            batch.reserve(stop - start);
            Labels batch_labels(static_cast<Eigen::Index>(stop - start));
            for (std::size_t j = start; j < stop; ++j) {
                batch.push_back(inputs[order[j]]);
                batch_labels[static_cast<Eigen::Index>(j - start)] = labels[order[j]];
            }
            BackwardResult bw = backward(model, batch, batch_labels, pos_weight);
            epoch_loss += bw.loss * static_cast<double>(batch.size());
            if (config.lr != 0.0) {
                auto params = parameters(model);
                auto grads = parameters(bw.grads);
                for (std::size_t p = 0; p < params.size(); ++p)
                    *params[p].second -= config.lr * *grads[p].second;
            }
        }
        epoch_loss /= static_cast<double>(inputs.size());
        if (!std::isfinite(epoch_loss)) {
            model = std::move(snapshot);
            result.diverged = true;
            break;
        }
        result.loss_history.push_back(epoch_loss);
    }
    result.model = std::move(model);
    return result;
}

Mat extract_features(const EncoderModel& model, const std::vector<Mat>& inputs) {
    ForwardCache cache;
    run_forward(model, inputs, cache, false);
    return std::move(cache.features);
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

}  // namespace

void save_encoder(const std::string& path, const EncoderModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_encoder: cannot open " + path);
    out.write(kMagic, 4);
    write_raw(out, kFormatVersion);
    const EncoderConfig& c = model.config;
    for (int v : {c.input_channels, c.seq_len, c.d_model, c.n_heads, c.n_layers, c.d_ff,
                  c.feature_dim})
        write_raw(out, static_cast<std::int32_t>(v));
    write_raw(out, static_cast<std::uint64_t>(c.seed));
    for (const auto& [name, mat] : parameters(model)) {
        for (Eigen::Index r = 0; r < mat->rows(); ++r)
            for (Eigen::Index col = 0; col < mat->cols(); ++col)
                write_raw(out, static_cast<float>((*mat)(r, col)));
    }
    if (!out) throw DataError("save_encoder: write failed for " + path);
}

EncoderModel load_encoder(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_encoder: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("load_encoder: bad magic in " + path);
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kFormatVersion)
        throw DataError("load_encoder: unsupported format version " + std::to_string(version));
    EncoderConfig c;
    c.input_channels = read_raw<std::int32_t>(in);
    c.seq_len = read_raw<std::int32_t>(in);
    c.d_model = read_raw<std::int32_t>(in);
    c.n_heads = read_raw<std::int32_t>(in);
    c.n_layers = read_raw<std::int32_t>(in);
    c.d_ff = read_raw<std::int32_t>(in);
    c.feature_dim = read_raw<std::int32_t>(in);
    c.seed = read_raw<std::uint64_t>(in);
    c.validate();
    EncoderModel model = init_encoder(c);
    for (auto& [name, mat] : parameters(model)) {
        for (Eigen::Index r = 0; r < mat->rows(); ++r)
            for (Eigen::Index col = 0; col < mat->cols(); ++col)
                (*mat)(r, col) = static_cast<double>(read_raw<float>(in));
    }
    if (!in) throw DataError("load_encoder: truncated file " + path);
    return model;
}

}  // namespace svtn::encoder
