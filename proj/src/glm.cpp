#include "svtn/glm.hpp"

#include <algorithm>
#include <cmath>

#include "svtn/errors.hpp"
#include "svtn/rng.hpp"

namespace svtn::glm {

namespace {

void require_binary(const Labels& s) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] != 0 && s[i] != 1) throw DataError("labels must be 0 or 1");
    }
}

void require_aligned(const Mat& features, const Labels& s) {
    if (features.rows() == 0) throw DataError("empty dataset");
    if (features.rows() != s.size()) throw DataError("feature/label count mismatch");
    require_binary(s);
    if (!features.allFinite()) throw DataError("non-finite feature entries");
}

double clamp_prob(double p, double eps, long* events) {
    if (p < eps) {
        if (events) ++*events;
        return eps;
    }
    if (p > 1.0 - eps) {
        if (events) ++*events;
        return 1.0 - eps;
    }
    return p;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

}  // namespace

}  // namespace svtn::glm

namespace svtn {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must be in (0,1)");
    // Acklam coefficients
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // one Halley refinement
    double e = normal_cdf(x) - p;
    double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace svtn

namespace svtn::glm {

ExcitationReport check_excitation(const Mat& features, double tol) {
    if (features.rows() == 0) throw DataError("check_excitation: empty feature list");
    if (!features.allFinite()) throw DataError("check_excitation: non-finite features");
    ExcitationReport rep;
    rep.A = features.transpose() * features;
    rep.A = 0.5 * (rep.A + rep.A.transpose()).eval();  // exact symmetry
    Eigen::SelfAdjointEigenSolver<Mat> es(rep.A, Eigen::EigenvaluesOnly);
    rep.lambda_min = es.eigenvalues().minCoeff();
    rep.ok = rep.lambda_min > tol;
    return rep;
}

double prob_s1(const SetValuedModel& model, const Eigen::Ref<const Vec>& phi) {
    if (phi.size() != model.theta.size())
        throw DataError("prob_s1: feature/theta dimension mismatch");
    if (!phi.allFinite() || !model.theta.allFinite())
        throw DataError("prob_s1: non-finite input");
    const double u = model.threshold - phi.dot(model.theta);
    return normal_cdf(u / model.sigma);
}

double prob_s0(const SetValuedModel& model, const Eigen::Ref<const Vec>& phi) {
    return 1.0 - prob_s1(model, phi);
}

double log_likelihood(const SetValuedModel& model, const Mat& features, const Labels& s,
                      double clamp_eps, long* clamp_events) {
    require_aligned(features, s);
    if (features.cols() != model.theta.size())
        throw DataError("log_likelihood: feature/theta dimension mismatch");
    const Vec u = (Vec::Constant(features.rows(), model.threshold) - features * model.theta) /
                  model.sigma;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double p1 = clamp_prob(normal_cdf(u[i]), clamp_eps, clamp_events);
        ll += s[i] == 1 ? std::log(p1) : std::log1p(-p1);
    }
    return ll;
}

namespace {

// Score term of the EM update: sum_i phi_i sigma^2 f(u_i) [1{s=1}/F - 1{s=0}/(1-F)]
Vec em_score(const SetValuedModel& model, const Mat& features, const Labels& s,
             double clamp_eps, long* clamp_events) {
    const double sigma = model.sigma;
    Vec score = Vec::Zero(features.cols());
    const Vec lin = features * model.theta;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double u = (model.threshold - lin[i]) / sigma;
        const double f = normal_pdf(u) / sigma;
        const double p1 = clamp_prob(normal_cdf(u), clamp_eps, clamp_events);
        const double w = s[i] == 1 ? f / p1 : -f / (1.0 - p1);
        score += features.row(i).transpose() * (sigma * sigma * w);
    }
    return score;
}

}  // namespace

Vec em_step(const SetValuedModel& model, const Mat& features, const Labels& s,
            double clamp_eps, double ridge, long* clamp_events) {
    require_aligned(features, s);
    if (features.cols() != model.theta.size())
        throw DataError("em_step: feature/theta dimension mismatch");
    Mat A = features.transpose() * features;
    if (ridge > 0.0) A.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-12)
        throw NumericalError("em_step: A is singular (Assumption 1 violated)");
    Eigen::LDLT<Mat> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("em_step: A factorization failed");
    const Vec score = em_score(model, features, s, clamp_eps, clamp_events);
    return model.theta - ldlt.solve(score);
}

Mat fisher_information(const SetValuedModel& model, const Mat& features, double clamp_eps) {
    if (features.cols() != model.theta.size())
        throw DataError("fisher_information: dimension mismatch");
    const double sigma = model.sigma;
    Mat info = Mat::Zero(features.cols(), features.cols());
    const Vec lin = features * model.theta;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double u = (model.threshold - lin[i]) / sigma;
        const double f = normal_pdf(u) / sigma;
        const double p1 = clamp_prob(normal_cdf(u), clamp_eps, nullptr);
        const double w = f * f / (p1 * (1.0 - p1));
        info.selfadjointView<Eigen::Lower>().rankUpdate(features.row(i).transpose(), w);
    }
    return Mat(info.selfadjointView<Eigen::Lower>());
}

std::vector<double> convergence_bound(const Mat& A, const Vec& theta1, const Vec& theta2,
                                      double rho, int n_iters) {
    if (n_iters < 1) throw ConfigError("convergence_bound: need at least one iterate");
    const Vec diff = theta2 - theta1;
    std::vector<double> bound(static_cast<std::size_t>(n_iters));
    if (diff.norm() == 0.0) {
        std::fill(bound.begin(), bound.end(), 0.0);
        return bound;
    }
    if (!(rho > 0.0 && rho < 1.0))
        throw NumericalError("convergence_bound: contraction factor outside (0,1), bound unusable");
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    const double lambda_min = es.eigenvalues().minCoeff();
    if (lambda_min <= 0.0)
        throw NumericalError("convergence_bound: A not positive definite");
    const double q1 = diff.dot(A * diff) / rho;
    const double scale = std::sqrt(q1 / lambda_min) / (1.0 - std::sqrt(rho));
    for (int t = 1; t <= n_iters; ++t) {
        bound[static_cast<std::size_t>(t - 1)] = scale * std::sqrt(std::pow(rho, t));
    }
    return bound;
}

FitResult fit_em(const Mat& features, const Labels& s, const Vec& init,
                 const EmConfig& config) {
    require_aligned(features, s);
    if (init.size() != features.cols())
        throw DataError("fit_em: init/feature dimension mismatch");

    ExcitationReport exc = check_excitation(features, config.excitation_tol);
    Mat A = exc.A;
    if (config.ridge > 0.0) A.diagonal().array() += config.ridge;
    if (!exc.ok && config.ridge <= 0.0)
        throw NumericalError("fit_em: excitation check failed (lambda_min = " +
                             std::to_string(exc.lambda_min) + ")");
    Eigen::LDLT<Mat> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("fit_em: A factorization failed");

    FitResult result;
    result.lambda_min = exc.lambda_min;
    SetValuedModel model{init, 0.0, config.sigma};

    result.theta_trace.push_back(init);
    result.report.loglik_trace.push_back(
        log_likelihood(model, features, s, config.clamp_eps, &result.clamp_events));

    for (int t = 0; t < config.max_iter; ++t) {
        const Vec score =
            em_score(model, features, s, config.clamp_eps, &result.clamp_events);
        const Vec next = model.theta - ldlt.solve(score);
        const double step = (next - model.theta).norm();
        model.theta = next;
        result.theta_trace.push_back(next);
        result.report.loglik_trace.push_back(
            log_likelihood(model, features, s, config.clamp_eps, &result.clamp_events));
        ++result.report.iterations;
        if (step < config.tol) {
            result.report.converged = true;
            break;
        }
    }

    result.report.theta_hat = model.theta;
    result.report.fisher_info = fisher_information(model, features, config.clamp_eps);

    // successive-difference ratios; floor guards against pure roundoff tails
    std::vector<double> ratios;
    const auto& trace = result.theta_trace;
    for (std::size_t t = 0; t + 2 < trace.size(); ++t) {
        const double d0 = (trace[t + 1] - trace[t]).norm();
        const double d1 = (trace[t + 2] - trace[t + 1]).norm();
        if (d0 > 1e-14 && d1 > 1e-14) ratios.push_back(d1 / d0);
    }
    result.report.contraction_estimate = median(ratios);

    if (trace.size() >= 3) {
        const double rho = result.report.contraction_estimate;
        const Vec& t1 = trace[1];
        const Vec& t2 = trace[2];
        if ((t2 - t1).norm() == 0.0 || (rho > 0.0 && rho < 1.0)) {
            result.report.bound_trace =
                convergence_bound(A, t1, t2, rho, result.report.iterations);
        }
    }
    return result;
}

int predict(const SetValuedModel& model, const Eigen::Ref<const Vec>& phi, double p_star) {
    return prob_s1(model, phi) >= p_star ? 1 : 0;
}

std::vector<ConsistencyRow> consistency_experiment(const ConsistencySpec& spec) {
    if (spec.n_list.empty()) throw ConfigError("consistency_experiment: empty N list");
    for (std::size_t i = 1; i < spec.n_list.size(); ++i) {
        if (spec.n_list[i] <= spec.n_list[i - 1])
            throw ConfigError("consistency_experiment: N list must be increasing");
    }
    if (spec.reps < 2) throw ConfigError("consistency_experiment: reps must be >= 2");

    const int n_raw = static_cast<int>(spec.theta_star.size());
    const int dim = n_raw + 1;  // trailing constant-1 feature absorbs -C
    Vec truth(dim);
    truth.head(n_raw) = spec.theta_star;
    truth[n_raw] = -spec.c_star;

    std::vector<ConsistencyRow> rows;
    for (std::size_t ni = 0; ni < spec.n_list.size(); ++ni) {
        const int n = spec.n_list[ni];
        ConsistencyRow row;
        row.n = n;
        Mat estimates(spec.reps, dim);
        Mat info_sum = Mat::Zero(dim, dim);
        long info_count = 0;
        int done = 0;
        for (int rep = 0; rep < spec.reps; ++rep) {
            Rng rng(derive_seed(spec.seed, (ni << 20) + static_cast<std::uint64_t>(rep)));
            Mat phi(n, dim);
            Labels s(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n_raw; ++j) phi(i, j) = rng.normal();
                phi(i, n_raw) = 1.0;
                const double y = phi.row(i).head(n_raw).dot(spec.theta_star) - spec.c_star +
                                 rng.normal(0.0, spec.sigma);
                s[i] = y <= 0.0 ? 1 : 0;
            }
            SetValuedModel at_truth{truth, 0.0, spec.sigma};
            info_sum += fisher_information(at_truth, phi);
            info_count += n;
            try {
                EmConfig cfg;
                cfg.sigma = spec.sigma;
                FitResult fit = fit_em(phi, s, Vec::Zero(dim), cfg);
                estimates.row(done++) = fit.report.theta_hat;
            } catch (const NumericalError&) {
                ++row.failed_reps;
            }
        }
        if (done < 2) throw NumericalError("consistency_experiment: too many failed reps");
        estimates.conservativeResize(done, dim);

        Mat err = estimates.rowwise() - truth.transpose();
        row.mean_error = err.rowwise().norm().mean();

        // empirical covariance of sqrt(N)(theta_hat - theta*)
        Mat scaled = std::sqrt(static_cast<double>(n)) * err;
        Vec mean = scaled.colwise().mean();
        Mat centered = scaled.rowwise() - mean.transpose();
        row.scaled_cov = centered.transpose() * centered / static_cast<double>(done - 1);

        Mat info_avg = info_sum / static_cast<double>(info_count);
        row.info_inverse = info_avg.ldlt().solve(Mat::Identity(dim, dim));
        row.cov_rel_error =
            (row.scaled_cov - row.info_inverse).norm() / row.info_inverse.norm();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace svtn::glm
