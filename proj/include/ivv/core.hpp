#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ivv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Bad or inconsistent input data (maps to CLI exit code 2).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: singular systems, non-convergence that cannot be recovered (exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double norm_pdf(double x);
double norm_cdf(double x);
double norm_quantile(double p);

/// log Phi(x), accurate in the far left tail.
double log_norm_cdf(double x);

/// phi(x) / Phi(x), accurate in the far left tail.
double mills_ratio(double x);

/// Weighted mean and (population) standard deviation.
double weighted_mean(const Vec& v, const Vec& w);
double weighted_sd(const Vec& v, const Vec& w);

/// Smallest value whose cumulative weight reaches half the total.
double weighted_median(const Vec& v, const Vec& w);

/// Kish effective sample size (sum w)^2 / sum w^2; equals n for unit weights.
double effective_size(const Vec& w);

/// ceil() that ignores floating noise just above an integer.
double ceil_tol(double x);

/// Format a double with enough digits to round-trip.
std::string fmt_double(double x);

}  // namespace ivv
