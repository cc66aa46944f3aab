#include "ivv/core.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <cstdio>

namespace ivv {

namespace {
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kInvSqrt2 = 0.70710678118654752440;
}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -INFINITY;
        if (p == 1.0) return INFINITY;
        throw std::domain_error("norm_quantile: p outside [0,1]");
    }
    static const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
    return boost::math::quantile(std_normal, p);
}

double log_norm_cdf(double x) {
    if (x > -30.0) return std::log(norm_cdf(x));
    // asymptotic expansion of the Mills ratio
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * M_PI) + std::log(series);
}

double mills_ratio(double x) {
    if (x > -30.0) return norm_pdf(x) / norm_cdf(x);
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -x / series;
}

double weighted_mean(const Vec& v, const Vec& w) { return v.dot(w) / w.sum(); }

double weighted_sd(const Vec& v, const Vec& w) {
    const double m = weighted_mean(v, w);
    const double var = (v.array() - m).square().matrix().dot(w) / w.sum();
    return std::sqrt(std::max(var, 0.0));
}

double weighted_median(const Vec& v, const Vec& w) {
    std::vector<Eigen::Index> idx(v.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    const double half = 0.5 * w.sum();
    double acc = 0.0;
    for (auto i : idx) {
        acc += w[i];
        if (acc >= half * (1.0 - 1e-14)) return v[i];
    }
    return v[idx.back()];
}

double effective_size(const Vec& w) {
    const double s = w.sum();
    return s * s / w.squaredNorm();
}

double ceil_tol(double x) { return std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))); }

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace ivv
