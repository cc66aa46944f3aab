#include "ivv/ivtest.hpp"

#include "ivv/kernelreg.hpp"
#include "ivv/parallel.hpp"
#include "ivv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ivv {

void validate(const TestConfig& cfg) {
    if (!(cfg.xi > 0.0)) throw std::invalid_argument("xi must be positive");
    if (!(cfg.s2_lo > 0.0 && cfg.s2_lo < cfg.s2_hi && cfg.s2_hi < 1.0))
        throw std::invalid_argument("S2 band must satisfy 0 < lo < hi < 1");
    if (cfg.n_boot < 1) throw std::invalid_argument("bootstrap count must be at least 1");
}

PzMethod parse_pz(const std::string& s) {
    if (s == "local-constant" || s == "lcr" || s == "kernel") return PzMethod::local_constant;
    if (s == "probit") return PzMethod::probit;
    throw std::invalid_argument("unknown Pr(Z|p) method '" + s + "' (local-constant | probit)");
}

std::string to_string(PzMethod m) { return m == PzMethod::probit ? "probit" : "local-constant"; }

FirstStage estimate_first_stage(const Dataset& ds, const EstimationOptions& opts) {
    FirstStage fs;
    fs.pfit = fit_probit(ds, opts.design, opts.probit);
    fs.plm = fit_plm(ds, fs.pfit, opts.plm);
    fs.res = residuals(ds, fs.pfit.fitted, fs.plm);
    if (!fs.res.u.allFinite()) throw NumericalError("partial residuals are not finite");
    return fs;
}

PzEstimate estimate_pz(const Vec& pscore, const std::vector<int>& z, const Vec& w, int levels, PzMethod method,
                       double bw) {
    const auto n = pscore.size();
    PzEstimate est;
    est.method = method;
    est.prob = Mat::Zero(n, levels);
    if (levels < 2) {
        est.prob.setOnes();
        return est;
    }
    // With two levels only Pr(Z=1|p) is fitted.
    const int first = levels == 2 ? 1 : 0;
    Mat V(n, levels - first);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int k = first; k < levels; ++k) V(i, k - first) = z[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0;

    if (method == PzMethod::local_constant) {
        BandwidthGrid grid;
        grid.fixed = bw;
        std::vector<KernelFit> fits;
        if (bw > 0.0) {
            for (Eigen::Index c = 0; c < V.cols(); ++c)
                fits.push_back(make_kernel_fit(KernelMethod::local_constant, pscore, V.col(c), w, bw));
        } else {
            fits = fit_multi(KernelMethod::local_constant, pscore, V, w, {grid});
        }
        for (Eigen::Index c = 0; c < V.cols(); ++c) {
            const auto& f = fits[static_cast<std::size_t>(c)];
            est.prob.col(c + first) = predict(f, pscore);
            est.bandwidths.push_back(f.h);
        }
    } else {
        Mat x(n, 1);
        x.col(0) = pscore;
        std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);
        PropensityDesign design;
        design.instrument_dummies = false;
        design.interactions = false;
        for (Eigen::Index c = 0; c < V.cols(); ++c) {
            std::vector<int> dk(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) dk[static_cast<std::size_t>(i)] = V(i, c) > 0.5;
            std::vector<std::string> sink;
            const Dataset aux = make_dataset(Vec::Zero(n), dk, x, zeros, w, &sink);
            const PropensityFit f = fit_probit(aux, design);
            est.prob.col(c + first) = f.fitted;
        }
    }
    if (levels == 2) est.prob.col(0) = (1.0 - est.prob.col(1).array()).matrix();
    return est;
}

std::vector<std::uint8_t> build_s2(const PzEstimate& pz, int lo, double s2_lo, double s2_hi) {
    const auto n = pz.prob.rows();
    std::vector<std::uint8_t> s2(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double up = pz.prob(i, lo + 1), down = pz.prob(i, lo);
        s2[static_cast<std::size_t>(i)] = (up >= s2_lo && down >= 1.0 - s2_hi) ? 1 : 0;
    }
    return s2;
}

double boot_pvalue(const std::vector<double>& draws, double t) {
    std::size_t count = 0;
    for (double v : draws)
        if (v >= t) ++count;
    return static_cast<double>(1 + count) / static_cast<double>(1 + draws.size());
}

Inference infer(const std::vector<MomentInput>& inputs, std::size_t n_total, const TestConfig& cfg) {
    validate(cfg);
    Inference inf;
    inf.tables.resize(inputs.size());
    inf.pairs.resize(inputs.size());
    inf.pair_warnings.resize(inputs.size());
    parallel_for(inputs.size(), cfg.threads, [&](std::size_t k) {
        inf.tables[k] = build_tables(inputs[k], cfg.xi, cfg.interval_cap, cfg.s2_share);
        inf.pairs[k] = statistic(inf.tables[k]);
        inf.pair_warnings[k] = inf.tables[k].warnings;
    });
    for (const auto& ps : inf.pairs) {
        if (ps.nesting_available) {
            inf.nesting_available = true;
            inf.T_nesting = std::max(inf.T_nesting, ps.nesting.value);
        }
        if (ps.index_available) {
            inf.index_available = true;
            inf.T_index = std::max(inf.T_index, ps.index.value);
        }
    }
    if (!inf.nesting_available && !inf.index_available)
        throw DataError("no testable component: distillation infeasible and no observations inside the S2 band");
    inf.T = std::max(inf.T_nesting, inf.T_index);

    const auto B = static_cast<std::size_t>(cfg.n_boot);
    inf.boot_T.assign(B, -INFINITY);
    inf.boot_nesting.assign(B, -INFINITY);
    inf.boot_index.assign(B, -INFINITY);
    parallel_for(B, cfg.threads, [&](std::size_t r) {
        Rng rng = substream(cfg.seed, {kTagBootstrap, r});
        const std::vector<double> mult = draw_multipliers(cfg.multiplier, n_total, rng);
        double nest = -INFINITY, idx = -INFINITY;
        for (const auto& t : inf.tables) {
            const PairBootstrap b = bootstrap_draw(t, mult, cfg.recenter);
            nest = std::max(nest, b.nesting);
            idx = std::max(idx, b.index);
        }
        inf.boot_nesting[r] = nest;
        inf.boot_index[r] = idx;
        inf.boot_T[r] = std::max(nest, idx);
    });
    inf.p_overall = boot_pvalue(inf.boot_T, inf.T);
    if (inf.nesting_available) inf.p_nesting = boot_pvalue(inf.boot_nesting, inf.T_nesting);
    if (inf.index_available) inf.p_index = boot_pvalue(inf.boot_index, inf.T_index);
    return inf;
}

namespace {

Vec gather(const Vec& v, const std::vector<std::size_t>& idx) {
    Vec out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out[static_cast<Eigen::Index>(j)] = v[static_cast<Eigen::Index>(idx[j])];
    return out;
}

}  // namespace

TestReport run_test_from(const Dataset& ds, const FirstStage& first, const TestConfig& cfg,
                         const EstimationOptions& opts) {
    validate(cfg);
    TestReport rep;
    rep.n = ds.n();
    rep.levels = ds.levels();
    rep.cfg = cfg;
    rep.opts = opts;
    rep.first = first;
    rep.n_boot = cfg.n_boot;
    if (ds.levels() < 2) throw DataError("the instrument has fewer than two levels");
    const ResidualSet& res = first.res;
    rep.pz = estimate_pz(res.pscore, res.z, res.w, ds.levels(), opts.pz, opts.bw_pz);

    const auto views = split_by_instrument(ds);
    std::vector<MomentInput> inputs;
    std::vector<std::size_t> input_pair;
    for (int lo = 0; lo + 1 < ds.levels(); ++lo) {
        PairReport pr;
        pr.lo = lo;
        pr.code_lo = ds.z_codes[static_cast<std::size_t>(lo)];
        pr.code_hi = ds.z_codes[static_cast<std::size_t>(lo + 1)];
        const PairView pv = make_pair_view(ds, lo);
        pr.n0 = pv.n0;
        pr.n1 = pv.n1;
        for (int g : pv.group) (g ? pr.count1 : pr.count0)++;
        if (pr.count0 == 0 || pr.count1 == 0) {
            pr.skipped = true;
            pr.warnings.push_back("pair skipped: one instrument level has no observations");
            rep.pairs.push_back(std::move(pr));
            continue;
        }
        const Vec p = gather(res.pscore, pv.indices);
        const Vec w = gather(res.w, pv.indices);
        pr.distill = distill(p, pv.group, w, opts.distill, opts.pminus, opts.pplus);
        for (const auto& msg : pr.distill.warnings) pr.warnings.push_back(msg);

        const auto s2_all = build_s2(rep.pz, lo, cfg.s2_lo, cfg.s2_hi);
        MomentInput in;
        in.nesting = pr.distill.feasible;
        in.index = true;
        const auto& lam0 = views[static_cast<std::size_t>(lo)].lambda;
        const auto& lam1 = views[static_cast<std::size_t>(lo + 1)].lambda;
        in.lambda0 = lam0;
        in.lambda1 = lam1;
        for (std::size_t j = 0; j < pv.indices.size(); ++j) {
            const std::size_t i = pv.indices[j];
            const auto ii = static_cast<Eigen::Index>(i);
            in.u.push_back(res.u[ii]);
            in.w.push_back(res.w[ii]);
            in.d.push_back(res.d[i]);
            in.group.push_back(pv.group[j]);
            in.s1.push_back(pr.distill.s1[j]);
            in.s2.push_back(s2_all[i]);
            in.pz.push_back(rep.pz.prob(ii, lo + pv.group[j]));
            in.obs.push_back(i);
            if (s2_all[i]) ++pr.s2_count;
        }
        input_pair.push_back(rep.pairs.size());
        inputs.push_back(std::move(in));
        rep.pairs.push_back(std::move(pr));
    }
    if (inputs.empty()) throw DataError("no instrument pair has observations on both sides");

    Inference inf = infer(inputs, ds.n(), cfg);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        PairReport& pr = rep.pairs[input_pair[k]];
        pr.stat = inf.pairs[k];
        const MomentTables& t = inf.tables[k];
        pr.share_s1_0 = t.share_s1_0;
        pr.share_s1_1 = t.share_s1_1;
        pr.share_s2_0 = t.share_s2_0;
        pr.share_s2_1 = t.share_s2_1;
        pr.share_s2 = t.share_s2;
        for (const auto& msg : inf.pair_warnings[k]) pr.warnings.push_back(msg);
    }
    for (const auto& pr : rep.pairs)
        for (const auto& msg : pr.warnings)
            rep.warnings.push_back("pair (" + std::to_string(pr.code_lo) + "," + std::to_string(pr.code_hi) + "): " + msg);
    rep.T = inf.T;
    rep.T_nesting = inf.nesting_available ? inf.T_nesting : NAN;
    rep.T_index = inf.index_available ? inf.T_index : NAN;
    rep.nesting_available = inf.nesting_available;
    rep.index_available = inf.index_available;
    rep.p_overall = inf.p_overall;
    rep.p_nesting = inf.p_nesting;
    rep.p_index = inf.p_index;
    rep.boot_T = std::move(inf.boot_T);
    rep.boot_nesting = std::move(inf.boot_nesting);
    rep.boot_index = std::move(inf.boot_index);
    return rep;
}

TestReport run_test_multivalued(const Dataset& ds, const TestConfig& cfg, const EstimationOptions& opts) {
    validate(cfg);
    if (ds.levels() < 2) throw DataError("the instrument has fewer than two levels");
    const FirstStage first = estimate_first_stage(ds, opts);
    TestReport rep = run_test_from(ds, first, cfg, opts);
    for (const auto& msg : first.pfit.warnings) rep.warnings.push_back("propensity: " + msg);
    for (const auto& msg : first.plm.log) rep.warnings.push_back("partially linear fit: " + msg);
    return rep;
}

TestReport run_test_binary(const Dataset& ds, const TestConfig& cfg, const EstimationOptions& opts) {
    if (ds.levels() != 2)
        throw DataError("binary test needs exactly two instrument levels (found " + std::to_string(ds.levels()) + ")");
    return run_test_multivalued(ds, cfg, opts);
}

DensityTable subdensities(const TestReport& report, const Dataset& ds, std::size_t points) {
    const ResidualSet& res = report.first.res;
    DensityTable tab;
    const auto n = static_cast<std::size_t>(res.u.size());
    if (n == 0 || points < 2) return tab;
    const double h = rule_of_thumb(res.u, res.w);
    const double bw = h > 0.0 ? h : 1.0;
    const double lo = res.u.minCoeff() - 3.0 * bw, hi = res.u.maxCoeff() + 3.0 * bw;
    for (std::size_t k = 0; k < points; ++k)
        tab.grid.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1));

    auto add = [&](const std::string& name, const std::vector<std::size_t>& rows) {
        double total = 0.0;
        for (auto i : rows) total += res.w[static_cast<Eigen::Index>(i)];
        for (int d = 1; d >= 0; --d) {
            std::vector<double> col(points, 0.0);
            if (total > 0.0)
                for (auto i : rows) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    if (res.d[i] != d) continue;
                    for (std::size_t k = 0; k < points; ++k)
                        col[k] += res.w[ii] * norm_pdf((tab.grid[k] - res.u[ii]) / bw) / (bw * total);
                }
            tab.columns.push_back(name + "_d" + std::to_string(d));
            tab.values.push_back(std::move(col));
        }
    };
    for (int level = 0; level < ds.levels(); ++level) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (res.z[i] == level) rows.push_back(i);
        add("z" + std::to_string(ds.z_codes[static_cast<std::size_t>(level)]), rows);
    }
    for (const auto& pr : report.pairs) {
        if (pr.skipped || pr.distill.s1.empty()) continue;
        const PairView pv = make_pair_view(ds, pr.lo);
        for (int g = 0; g < 2; ++g) {
            std::vector<std::size_t> rows;
            for (std::size_t j = 0; j < pv.indices.size(); ++j)
                if (pv.group[j] == g && pr.distill.s1[j]) rows.push_back(pv.indices[j]);
            add("distilled_z" + std::to_string(g ? pr.code_hi : pr.code_lo) + "_pair" + std::to_string(pr.lo), rows);
        }
    }
    return tab;
}

}  // namespace ivv
