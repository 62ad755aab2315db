#pragma once

#include <cmath>
#include <functional>

#include "svtn/errors.hpp"

namespace svtn {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// Acklam-style rational approximation refined by one Halley step; good to
// ~1e-15 over (0, 1).
double normal_quantile(double p);

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + e^x) without overflow
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// CDF/PDF pair of the latent-noise distribution. pdf is the derivative of cdf.
struct LinkFunction {
    std::function<double(double)> cdf;
    std::function<double(double)> pdf;
};

// Zero-mean normal noise with scale sigma.
inline LinkFunction normal_link(double sigma = 1.0) {
    if (!(sigma > 0.0)) throw ConfigError("normal_link: sigma must be > 0");
    return LinkFunction{
        [sigma](double x) { return normal_cdf(x / sigma); },
        [sigma](double x) { return normal_pdf(x / sigma) / sigma; },
    };
}

}  // namespace svtn
