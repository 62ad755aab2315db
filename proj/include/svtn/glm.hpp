#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "svtn/link.hpp"

// Set-valued binary-observation identification: a latent output
//   y_i = phi_i' theta - C + d_i,   d_i ~ N(0, sigma^2)
// is observed only through s_i = 1{y_i <= 0}, so
//   P{s_i = 1 | phi_i} = F(C - phi_i' theta)
// with F the noise CDF. The MLE of theta (and, via a trailing constant-1
// feature, of C) is computed by an EM iteration whose M-step is closed-form.
namespace svtn::glm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Labels = Eigen::VectorXi;  // entries in {0, 1}

inline constexpr double kDefaultClampEps = 1e-12;

struct SetValuedModel {
    Vec theta;
    double threshold = 0.0;  // C; keep 0 when -C is absorbed as the last theta entry
    double sigma = 1.0;      // noise scale, never jointly estimated

    LinkFunction link() const { return normal_link(sigma); }
};

struct ExcitationReport {
    Mat A;  // sum of feature outer products
    double lambda_min = 0.0;
    bool ok = false;
};

// A = sum_i phi_i phi_i' over the rows of `features`; ok iff lambda_min > tol.
ExcitationReport check_excitation(const Mat& features, double tol = 1e-9);

// P{s=1 | phi} = F(C - phi' theta)
double prob_s1(const SetValuedModel& model, const Eigen::Ref<const Vec>& phi);

// exact complement of prob_s1 (computed as 1 - prob_s1, not re-evaluated)
double prob_s0(const SetValuedModel& model, const Eigen::Ref<const Vec>& phi);

// sum_i [ s_i log F(u_i) + (1-s_i) log(1-F(u_i)) ], u_i = C - phi_i' theta,
// with F clamped to [clamp_eps, 1-clamp_eps]. clamp_events, when given,
// accumulates the number of clamped terms.
double log_likelihood(const SetValuedModel& model, const Mat& features, const Labels& s,
                      double clamp_eps = kDefaultClampEps, long* clamp_events = nullptr);

// One EM update from model.theta:
//   theta' = theta - (A + ridge I)^-1 sum_i phi_i sigma^2 f(u_i)
//            [ 1{s_i=1}/F(u_i) - 1{s_i=0}/(1-F(u_i)) ]
// (the sigma^2 factor is 1 at the default scale). Probabilities are clamped
// away from {0,1} before dividing.
Vec em_step(const SetValuedModel& model, const Mat& features, const Labels& s,
            double clamp_eps = kDefaultClampEps, double ridge = 0.0,
            long* clamp_events = nullptr);

struct EmConfig {
    int max_iter = 500;
    double tol = 1e-8;  // stop when ||theta_{t+1} - theta_t|| < tol
    double clamp_eps = kDefaultClampEps;
    double ridge = 0.0;       // added to A's diagonal (0 = exact Assumption 1 gate)
    double sigma = 1.0;
    double excitation_tol = 1e-9;
};

struct FitReport {
    Vec theta_hat;
    std::vector<double> loglik_trace;  // l(theta_t), t = 0..iterations
    int iterations = 0;
    bool converged = false;
    double contraction_estimate = 0.0;  // median ||dtheta_{t+1}||/||dtheta_t||
    std::vector<double> bound_trace;    // exponential bound per iterate, empty if unusable
    Mat fisher_info;
};

struct FitResult {
    FitReport report;
    std::vector<Vec> theta_trace;  // theta_0 (init) .. theta_T
    long clamp_events = 0;
    double lambda_min = 0.0;
};

// EM iteration until ||dtheta|| < tol or max_iter. A is formed and factorized
// once. Throws NumericalError when the excitation check fails and no ridge is
// configured.
FitResult fit_em(const Mat& features, const Labels& s, const Vec& init,
                 const EmConfig& config = {});

// Closed-form probit information at model.theta:
//   I = sum_i phi_i phi_i' f(u_i)^2 / (F(u_i)(1-F(u_i)))
Mat fisher_information(const SetValuedModel& model, const Mat& features,
                       double clamp_eps = kDefaultClampEps);

// Theorem-2 style bound sequence for iterates t = 1..n_iters:
//   bound(t) = sqrt(Q1 / lambda_min(A)) * sqrt(rho^t) / (1 - sqrt(rho)),
//   Q1 = rho^-1 (theta2 - theta1)' A (theta2 - theta1)
// rho plays (1 - eps); it must lie in (0, 1) unless theta2 == theta1 (then the
// bound is identically zero).
std::vector<double> convergence_bound(const Mat& A, const Vec& theta1, const Vec& theta2,
                                      double rho, int n_iters);

// 1 iff prob_s1 >= p_star (ties to the positive class).
int predict(const SetValuedModel& model, const Eigen::Ref<const Vec>& phi,
            double p_star = 0.5);

struct ConsistencySpec {
    Vec theta_star;
    double c_star = 0.0;
    double sigma = 1.0;
    std::vector<int> n_list;
    int reps = 30;
    std::uint64_t seed = 0;
};

struct ConsistencyRow {
    int n = 0;
    double mean_error = 0.0;       // mean ||theta_hat - theta*|| (augmented coords)
    Mat scaled_cov;                // empirical cov of sqrt(N)(theta_hat - theta*)
    Mat info_inverse;              // closed-form I^-1(theta*) over the sampled phi
    double cov_rel_error = 0.0;    // ||scaled_cov - info_inverse||_F / ||info_inverse||_F
    int failed_reps = 0;
};

// Monte-Carlo check of strong consistency and asymptotic normality: draws
// phi ~ N(0, I), simulates labels from (theta*, C*, sigma), fits the augmented
// model per rep with a per-rep derived seed, and compares the scaled estimator
// covariance against the closed-form information inverse.
std::vector<ConsistencyRow> consistency_experiment(const ConsistencySpec& spec);

}  // namespace svtn::glm
