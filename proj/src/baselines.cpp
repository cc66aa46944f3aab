#include "ivv/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ivv {

std::string to_string(BaselineKind k) { return k == BaselineKind::no_covariates ? "no-covariates" : "binarized"; }

namespace {

// Adjacent-level nesting inputs with every observation retained.
std::vector<MomentInput> nesting_inputs(const Vec& u, const std::vector<int>& d, const std::vector<int>& level,
                                        const Vec& w, int levels) {
    std::vector<MomentInput> inputs;
    for (int lo = 0; lo + 1 < levels; ++lo) {
        MomentInput in;
        in.index = false;
        for (std::size_t i = 0; i < level.size(); ++i) {
            if (level[i] != lo && level[i] != lo + 1) continue;
            const auto ii = static_cast<Eigen::Index>(i);
            in.u.push_back(u[ii]);
            in.w.push_back(w[ii]);
            in.d.push_back(d[i]);
            in.group.push_back(level[i] - lo);
            in.s1.push_back(1);
            in.s2.push_back(0);
            in.pz.push_back(1.0);
            in.obs.push_back(i);
        }
        const bool both = std::find(in.group.begin(), in.group.end(), 0) != in.group.end() &&
                          std::find(in.group.begin(), in.group.end(), 1) != in.group.end();
        if (both) inputs.push_back(std::move(in));
    }
    return inputs;
}

BaselineReport finish(BaselineKind kind, const std::vector<MomentInput>& inputs, std::size_t n, const TestConfig& cfg) {
    if (inputs.empty()) throw DataError("no pair of adjacent levels has observations on both sides");
    Inference inf = infer(inputs, n, cfg);
    BaselineReport rep;
    rep.which = kind;
    rep.T = inf.T;
    rep.p_value = inf.p_overall;
    rep.n_boot = cfg.n_boot;
    rep.boot = std::move(inf.boot_T);
    rep.pairs = std::move(inf.pairs);
    for (const auto& ws : inf.pair_warnings) rep.warnings.insert(rep.warnings.end(), ws.begin(), ws.end());
    return rep;
}

}  // namespace

BaselineReport test_no_covariates(const Dataset& ds, const TestConfig& cfg) {
    if (ds.levels() < 2) throw DataError("the instrument has fewer than two levels");
    return finish(BaselineKind::no_covariates, nesting_inputs(ds.y, ds.d, ds.z, ds.w, ds.levels()), ds.n(), cfg);
}

std::vector<int> coarsen_pscore(const Vec& p, const Vec& w, int bins) {
    if (bins < 2) throw std::invalid_argument("need at least two bins");
    const auto n = static_cast<std::size_t>(p.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p[static_cast<Eigen::Index>(a)] < p[static_cast<Eigen::Index>(b)];
    });
    const double total = w.sum();
    std::vector<double> cuts;
    double acc = 0.0;
    int next = 1;
    for (auto i : order) {
        acc += w[static_cast<Eigen::Index>(i)];
        while (next < bins && acc >= total * next / bins * (1.0 - 1e-12)) {
            cuts.push_back(p[static_cast<Eigen::Index>(i)]);
            ++next;
        }
    }
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = p[static_cast<Eigen::Index>(i)];
        out[i] = static_cast<int>(std::count_if(cuts.begin(), cuts.end(), [&](double c) { return c < v; }));
    }
    return out;
}

BaselineReport test_binarized_from(const FirstStage& first, const TestConfig& cfg, int bins) {
    const ResidualSet& res = first.res;
    std::vector<int> level = coarsen_pscore(res.pscore, res.w, bins);
    std::vector<int> used(level);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    if (used.size() < 2) throw DataError("single coarsened level: the propensity score does not vary");
    for (auto& l : level) l = static_cast<int>(std::lower_bound(used.begin(), used.end(), l) - used.begin());
    BaselineReport rep = finish(BaselineKind::binarized_pscore,
                                nesting_inputs(res.u, res.d, level, res.w, static_cast<int>(used.size())),
                                static_cast<std::size_t>(res.u.size()), cfg);
    rep.bins = bins;
    return rep;
}

BaselineReport test_binarized_pscore(const Dataset& ds, const TestConfig& cfg, const EstimationOptions& opts,
                                     int bins) {
    return test_binarized_from(estimate_first_stage(ds, opts), cfg, bins);
}

}  // namespace ivv
