#pragma once

#include "ivv/core.hpp"

#include <vector>

namespace ivv {

enum class KernelMethod { local_constant, local_linear };

/// Log-spaced search grid around the rule-of-thumb bandwidth; `fixed` > 0 skips the search.
struct BandwidthGrid {
    int points = 25;
    double lo_factor = 0.1;
    double hi_factor = 10.0;
    double fixed = 0.0;
};

/// Gaussian-kernel regression of v on p. Training data are stored sorted by (p, w, v)
/// so that results do not depend on the input order.
struct KernelFit {
    KernelMethod method = KernelMethod::local_linear;
    double h = 0.0;
    double cv_score = 0.0;  // weighted leave-one-out squared error at h
    Vec p, v, w;
    std::vector<double> grid, grid_scores;
};

/// 1.06 * sd(p) * n^(-1/5), with weighted sd.
double rule_of_thumb(const Vec& p, const Vec& w);

std::vector<double> bandwidth_grid(const Vec& p, const Vec& w, const BandwidthGrid& grid);

KernelFit fit_llr(const Vec& p, const Vec& v, const Vec& w, const BandwidthGrid& grid = {});
KernelFit fit_lcr(const Vec& p, const Vec& v, const Vec& w, const BandwidthGrid& grid = {});

/// Several responses against the same p; each response gets its own CV bandwidth
/// (grids[r], or grids[0] if only one is given). Kernel weights are shared.
std::vector<KernelFit> fit_multi(KernelMethod method, const Vec& p, const Mat& V, const Vec& w,
                                 const std::vector<BandwidthGrid>& grids);

/// Fit at a given bandwidth without search (no minimum sample size).
KernelFit make_kernel_fit(KernelMethod method, const Vec& p, const Vec& v, const Vec& w, double h);

Vec predict(const KernelFit& fit, const Vec& at);

/// Weighted leave-one-out squared error of `method` at bandwidth h.
double cv_score(KernelMethod method, const Vec& p, const Vec& v, const Vec& w, double h);

}  // namespace ivv
