#pragma once

#include "ivv/dataset.hpp"
#include "ivv/kernelreg.hpp"
#include "ivv/propensity.hpp"

#include <string>
#include <vector>

namespace ivv {

struct PhiMode {
    enum Kind { nonparametric, polynomial } kind = nonparametric;
    int degree = 3;
};

/// "nonparametric" or "poly:<k>".
PhiMode parse_phi(const std::string& s);
std::string to_string(const PhiMode& m);

struct PlmOptions {
    PhiMode phi;
    bool common_slopes = false;  // theta0 == theta1 (y = x'theta + phi(p) + e)
    BandwidthGrid bw_y, bw_x;
    double pinv_tol = 1e-10;     // singular values below pinv_tol * max are dropped
    double collinear_warn = 1e-3; // singular values below this ratio are reported
    double relevance_level = 0.05; // Wald p-value of the instrument terms above which the fit is flagged
};

struct PartialLinearFit {
    Vec theta0, theta1;
    PhiMode phi;
    Vec poly_coeffs;                 // 1, p, ..., p^degree (polynomial mode)
    double residual_variance = 0.0;  // weighted mean squared regression residual
    int rank = 0;
    std::vector<double> singular_ratios;   // s_j / s_max of the final design
    std::vector<std::string> log;          // dropped / near-collinear directions
    Vec mu_y;                              // E[y|p] fitted (nonparametric mode)
    Mat mu_x;                              // E[x|p] fitted (nonparametric mode)
    std::vector<double> bandwidths;        // y first, then x columns
};

PartialLinearFit fit_plm(const Dataset& ds, const Vec& pscore, const PlmOptions& opts = {});
/// Also logs when the instrument terms of the propensity model are jointly insignificant:
/// X - E[X|p] is then collinear in the population even though no sample direction is dropped.
PartialLinearFit fit_plm(const Dataset& ds, const PropensityFit& pfit, const PlmOptions& opts = {});

/// Wald test that all instrument dummies and interactions of the propensity model are zero.
struct RelevanceTest {
    int df = 0;
    double stat = 0.0;
    double p_value = 1.0;
};
RelevanceTest instrument_relevance(const PropensityFit& pfit);

struct ResidualSet {
    Vec u;
    Vec pscore;
    std::vector<int> d, z;
    Vec w;
};

/// u_i = y_i - x_i' theta_{d_i}.
ResidualSet residuals(const Dataset& ds, const Vec& pscore, const PartialLinearFit& fit);

/// Weighted least squares by truncated SVD; `log` receives dropped and near-collinear directions.
Vec pinv_wls(const Mat& A, const Vec& y, const Vec& w, double tol, double warn, int* rank,
             std::vector<double>* ratios, std::vector<std::string>* log);

}  // namespace ivv
