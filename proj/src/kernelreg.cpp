#include "ivv/kernelreg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ivv {

namespace {

// Kernel weights below exp(-kCut) relative to the nearest point are dropped.
constexpr double kCut = 40.0;
constexpr double kSingular = 1e-10;

// Sorted training data with r responses stored row-major.
struct Smoother {
    std::vector<double> p, w, v;  // v[i * r + c]
    std::size_t r = 0;

    Smoother(const Vec& p_in, const Mat& V, const Vec& w_in) : r(static_cast<std::size_t>(V.cols())) {
        const auto n = static_cast<std::size_t>(p_in.size());
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
            if (p_in[ia] != p_in[ib]) return p_in[ia] < p_in[ib];
            if (w_in[ia] != w_in[ib]) return w_in[ia] < w_in[ib];
            for (Eigen::Index c = 0; c < V.cols(); ++c)
                if (V(ia, c) != V(ib, c)) return V(ia, c) < V(ib, c);
            return false;
        });
        p.resize(n);
        w.resize(n);
        v.resize(n * r);
        for (std::size_t s = 0; s < n; ++s) {
            const auto i = static_cast<Eigen::Index>(idx[s]);
            p[s] = p_in[i];
            w[s] = w_in[i];
            for (std::size_t c = 0; c < r; ++c) v[s * r + c] = V(i, static_cast<Eigen::Index>(c));
        }
    }

    std::size_t size() const { return p.size(); }

    // Estimates at x for all responses, excluding sorted position `ex` (or none if ex == size()).
    void evaluate(double x, std::size_t ex, double h, KernelMethod method, double* out) const {
        const std::size_t n = p.size();
        const auto pos = static_cast<std::size_t>(std::lower_bound(p.begin(), p.end(), x) - p.begin());
        double dmin = INFINITY;
        for (std::size_t j = pos >= 2 ? pos - 2 : 0; j < std::min(n, pos + 2); ++j)
            if (j != ex) dmin = std::min(dmin, std::abs(p[j] - x));
        if (!std::isfinite(dmin)) {
            for (std::size_t c = 0; c < r; ++c) out[c] = NAN;
            return;
        }
        const double inv2h2 = 0.5 / (h * h);
        const double radius = std::sqrt(dmin * dmin + kCut / inv2h2);
        const auto lo = static_cast<std::size_t>(std::lower_bound(p.begin(), p.end(), x - radius) - p.begin());
        const auto hi = static_cast<std::size_t>(std::upper_bound(p.begin(), p.end(), x + radius) - p.begin());
        // Two passes: kernel-weighted means, then centered co-moments. Centering at the
        // weighted mean keeps the slope accurate when one point carries almost all the weight.
        thread_local std::vector<double> kw;
        kw.assign(hi - lo, 0.0);
        double s0 = 0, s1 = 0;
        double a0[16], a1[16];
        std::vector<double> big0, big1;
        double* MV = a0;
        double* CV = a1;
        if (r > 16) {
            big0.assign(r, 0.0);
            big1.assign(r, 0.0);
            MV = big0.data();
            CV = big1.data();
        } else {
            std::fill(a0, a0 + r, 0.0);
            std::fill(a1, a1 + r, 0.0);
        }
        const double d2min = dmin * dmin;
        for (std::size_t j = lo; j < hi; ++j) {
            if (j == ex) continue;
            const double t = p[j] - x;
            const double k = w[j] * std::exp(-(t * t - d2min) * inv2h2);
            kw[j - lo] = k;
            s0 += k;
            s1 += k * t;
            const double* vj = &v[j * r];
            for (std::size_t c = 0; c < r; ++c) MV[c] += k * vj[c];
        }
        const double mt = s1 / s0;
        for (std::size_t c = 0; c < r; ++c) MV[c] /= s0;
        if (method == KernelMethod::local_constant) {
            for (std::size_t c = 0; c < r; ++c) out[c] = MV[c];
            return;
        }
        double m2 = 0;
        for (std::size_t j = lo; j < hi; ++j) {
            const double k = kw[j - lo];
            if (k == 0.0) continue;
            const double dt = p[j] - x - mt;
            m2 += k * dt * dt;
            const double* vj = &v[j * r];
            for (std::size_t c = 0; c < r; ++c) CV[c] += k * dt * (vj[c] - MV[c]);
        }
        // det(s0, s1; s1, s2) = s0 * m2 and s2 = m2 + s0 * mt^2.
        const bool linear = m2 > kSingular * (m2 + s0 * mt * mt);
        for (std::size_t c = 0; c < r; ++c) out[c] = linear ? MV[c] - CV[c] / m2 * mt : MV[c];
    }

    // Weighted LOO squared error per response.
    std::vector<double> loo_scores(double h, KernelMethod method) const {
        const std::size_t n = p.size();
        std::vector<double> err(r, 0.0), est(r);
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            evaluate(p[i], i, h, method, est.data());
            for (std::size_t c = 0; c < r; ++c) {
                const double e = v[i * r + c] - est[c];
                err[c] += w[i] * e * e;
            }
            wsum += w[i];
        }
        for (auto& e : err) e /= wsum;
        return err;
    }
};

void check_inputs(const Vec& p, const Eigen::Index rows, const Vec& w) {
    if (p.size() != rows || p.size() != w.size()) throw DataError("kernel regression: length mismatch");
}

KernelFit to_fit(const Smoother& sm, std::size_t c, KernelMethod method) {
    KernelFit f;
    f.method = method;
    const auto n = static_cast<Eigen::Index>(sm.size());
    f.p = Eigen::Map<const Vec>(sm.p.data(), n);
    f.w = Eigen::Map<const Vec>(sm.w.data(), n);
    f.v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) f.v[i] = sm.v[static_cast<std::size_t>(i) * sm.r + c];
    return f;
}

}  // namespace

double rule_of_thumb(const Vec& p, const Vec& w) {
    return 1.06 * weighted_sd(p, w) * std::pow(static_cast<double>(p.size()), -0.2);
}

std::vector<double> bandwidth_grid(const Vec& p, const Vec& w, const BandwidthGrid& grid) {
    if (grid.fixed > 0.0) return {grid.fixed};
    const double h0 = rule_of_thumb(p, w);
    if (!(h0 > 0.0)) throw DataError("kernel regression: all p values are equal");
    std::vector<double> g(static_cast<std::size_t>(grid.points));
    const double a = std::log(grid.lo_factor * h0), b = std::log(grid.hi_factor * h0);
    for (int i = 0; i < grid.points; ++i)
        g[static_cast<std::size_t>(i)] =
            grid.points == 1 ? h0 : std::exp(a + (b - a) * static_cast<double>(i) / (grid.points - 1));
    return g;
}

std::vector<KernelFit> fit_multi(KernelMethod method, const Vec& p, const Mat& V, const Vec& w,
                                 const std::vector<BandwidthGrid>& grids) {
    check_inputs(p, V.rows(), w);
    if (p.size() < 5) throw DataError("kernel regression needs at least 5 observations");
    if (p.maxCoeff() == p.minCoeff()) throw DataError("kernel regression: all p values are equal");
    if (grids.empty()) throw std::invalid_argument("fit_multi: no bandwidth grid");
    const Smoother sm(p, V, w);
    const auto r = static_cast<std::size_t>(V.cols());

    std::vector<KernelFit> fits;
    // Responses sharing an identical grid share the kernel sums.
    std::vector<std::vector<double>> hs(r);
    for (std::size_t c = 0; c < r; ++c) hs[c] = bandwidth_grid(p, w, grids.size() == 1 ? grids[0] : grids.at(c));
    std::vector<std::vector<double>> scores(r);
    std::vector<bool> done(r, false);
    for (std::size_t c = 0; c < r; ++c) {
        if (done[c]) continue;
        std::vector<std::size_t> same;
        for (std::size_t c2 = c; c2 < r; ++c2)
            if (!done[c2] && hs[c2] == hs[c]) same.push_back(c2);
        for (double h : hs[c]) {
            const auto err = sm.loo_scores(h, method);
            for (auto c2 : same) scores[c2].push_back(err[c2]);
        }
        for (auto c2 : same) done[c2] = true;
    }
    for (std::size_t c = 0; c < r; ++c) {
        KernelFit f = to_fit(sm, c, method);
        const auto best = static_cast<std::size_t>(std::min_element(scores[c].begin(), scores[c].end()) - scores[c].begin());
        f.h = hs[c][best];
        f.cv_score = scores[c][best];
        f.grid = hs[c];
        f.grid_scores = scores[c];
        fits.push_back(std::move(f));
    }
    return fits;
}

KernelFit fit_llr(const Vec& p, const Vec& v, const Vec& w, const BandwidthGrid& grid) {
    return fit_multi(KernelMethod::local_linear, p, v, w, {grid}).front();
}

KernelFit fit_lcr(const Vec& p, const Vec& v, const Vec& w, const BandwidthGrid& grid) {
    return fit_multi(KernelMethod::local_constant, p, v, w, {grid}).front();
}

KernelFit make_kernel_fit(KernelMethod method, const Vec& p, const Vec& v, const Vec& w, double h) {
    check_inputs(p, v.size(), w);
    if (p.size() < 1) throw DataError("kernel regression: no observations");
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    const Smoother sm(p, v, w);
    KernelFit f = to_fit(sm, 0, method);
    f.h = h;
    f.cv_score = p.size() >= 2 ? sm.loo_scores(h, method)[0] : 0.0;
    f.grid = {h};
    f.grid_scores = {f.cv_score};
    return f;
}

double cv_score(KernelMethod method, const Vec& p, const Vec& v, const Vec& w, double h) {
    check_inputs(p, v.size(), w);
    return Smoother(p, v, w).loo_scores(h, method)[0];
}

Vec predict(const KernelFit& fit, const Vec& at) {
    // The stored data are already sorted; rebuilding keeps one evaluation path.
    const Smoother sm(fit.p, fit.v, fit.w);
    Vec out(at.size());
    for (Eigen::Index i = 0; i < at.size(); ++i) sm.evaluate(at[i], sm.size(), fit.h, fit.method, &out[i]);
    return out;
}

}  // namespace ivv
