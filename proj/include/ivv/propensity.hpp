#pragma once

#include "ivv/dataset.hpp"

#include <string>
#include <vector>

namespace ivv {

enum class Link { probit };

Link parse_link(const std::string& s);

/// Columns of the propensity design. An intercept is always present.
struct PropensityDesign {
    bool instrument_dummies = true;
    bool covariates = true;
    bool interactions = true;
};

struct ProbitOptions {
    int max_iter = 100;
    double ridge = 1e-4;      // L2 penalty used by the separation fallback
    double index_cap = 8.0;   // |x'b| above this at the optimum counts as quasi-separation
    Link link = Link::probit;
};

struct PropensityFit {
    PropensityDesign design;
    Link link = Link::probit;
    int levels = 0;
    Eigen::Index k = 0;
    std::vector<int> kept;             // columns of the full design that survived pruning
    std::vector<std::string> columns;  // names of the kept columns
    Vec coef;
    Vec fitted;
    Mat covariance;                    // inverse observed information at the optimum
    bool converged = false;
    int iterations = 0;
    double ridge_used = 0.0;
    double loglik = 0.0;
    std::vector<std::string> warnings;
};

constexpr double kScoreClamp = 1e-6;

/// Full design before pruning: intercept, level dummies (levels 1..K-1), covariates,
/// dummy x covariate interactions.
Mat build_design(const Dataset& ds, const PropensityDesign& design, std::vector<std::string>* names = nullptr);

PropensityFit fit_probit(const Dataset& ds, const PropensityDesign& design = {}, const ProbitOptions& opts = {});

Vec predict_scores(const PropensityFit& fit, const Dataset& ds);

/// Weighted probit log-likelihood minus ridge/2 * |b_{1:}|^2, and its gradient.
double probit_loglik(const Mat& X, const std::vector<int>& d, const Vec& w, const Vec& beta, double ridge = 0.0);
Vec probit_gradient(const Mat& X, const std::vector<int>& d, const Vec& w, const Vec& beta, double ridge = 0.0);

}  // namespace ivv
