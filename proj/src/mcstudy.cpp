#include "ivv/mcstudy.hpp"

#include "ivv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ivv {

DgpKind parse_dgp(const std::string& s) {
    if (s == "size") return DgpKind::size;
    if (s == "power1" || s == "dgp1") return DgpKind::power1;
    if (s == "power2" || s == "dgp2") return DgpKind::power2;
    if (s == "power3" || s == "dgp3") return DgpKind::power3;
    if (s == "power4" || s == "dgp4") return DgpKind::power4;
    throw std::invalid_argument("unknown DGP '" + s + "' (size | power1..power4)");
}

std::string to_string(DgpKind k) {
    switch (k) {
        case DgpKind::size: return "size";
        case DgpKind::power1: return "power1";
        case DgpKind::power2: return "power2";
        case DgpKind::power3: return "power3";
        case DgpKind::power4: return "power4";
    }
    return "size";
}

GammaMode parse_gamma(const std::string& s) {
    if (s == "zero") return GammaMode::zero;
    if (s == "uniform") return GammaMode::uniform;
    throw std::invalid_argument("unknown gamma mode '" + s + "' (zero | uniform)");
}

std::string to_string(GammaMode g) { return g == GammaMode::zero ? "zero" : "uniform"; }

DeltaMode parse_delta(const std::string& s) {
    if (s == "wide" || s == "1") return DeltaMode::wide;
    if (s == "narrow" || s == "0.1") return DeltaMode::narrow;
    throw std::invalid_argument("unknown delta mode '" + s + "' (wide | narrow)");
}

std::string to_string(DeltaMode d) { return d == DeltaMode::wide ? "wide" : "narrow"; }

Method parse_method(const std::string& s) {
    if (s == "proposed") return Method::proposed;
    if (s == "no-covariates") return Method::no_covariates;
    if (s == "binarized") return Method::binarized;
    throw std::invalid_argument("unknown method '" + s + "' (proposed | no-covariates | binarized)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::proposed: return "proposed";
        case Method::no_covariates: return "no-covariates";
        case Method::binarized: return "binarized";
    }
    return "proposed";
}

DgpParams draw_params(const DgpSpec& spec, Rng& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    DgpParams p;
    p.theta.resize(3);
    p.gamma = Vec::Zero(3);
    p.delta.resize(3);
    for (int j = 0; j < 3; ++j) p.theta[j] = unit(rng);
    for (int j = 0; j < 3; ++j) {
        const double g = unit(rng);
        if (spec.gamma == GammaMode::uniform) p.gamma[j] = g;
    }
    const double scale = spec.delta == DeltaMode::wide ? 1.0 : 0.1;
    for (int j = 0; j < 3; ++j) p.delta[j] = scale * unit(rng);
    if (spec.kind != DgpKind::size) {
        p.alpha0 = norm_quantile(0.45);
        p.alpha1 = norm_quantile(0.55);
    }
    return p;
}

Dataset draw_sample(const DgpSpec& spec, const DgpParams& params, Rng& rng, std::vector<int>* mu_index) {
    static const double mu_values[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
    static const double mu_cdf[5] = {0.15, 0.35, 0.65, 0.85, 1.0};
    const auto n = static_cast<Eigen::Index>(spec.n);
    const double rho = spec.sigma_offdiag;
    const double rc = std::sqrt(1.0 - rho * rho);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Vec y(n);
    std::vector<int> d(spec.n);
    Mat x(n, 3);
    std::vector<double> z(spec.n);
    if (mu_index) mu_index->assign(spec.n, -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = nd(rng);
        const double uz = nd(rng);
        const double e1 = nd(rng), e2 = nd(rng);
        const double mix = ud(rng);
        const double u0 = e1;
        const double ud_ = rho * e1 + rc * e2;
        const auto ii = static_cast<std::size_t>(i);
        const int zi = x.row(i).dot(params.gamma) + uz >= 0.0 ? 1 : 0;
        const double index = params.alpha0 * (1 - zi) + params.alpha1 * zi + x.row(i).dot(params.delta) + ud_;
        const int di = index >= 0.0 ? 1 : 0;
        double u1 = u0;
        switch (spec.kind) {
            case DgpKind::size: u1 = 1.0 + u0; break;
            case DgpKind::power1: u1 = zi ? u0 : -0.7 + u0; break;
            case DgpKind::power2: u1 = zi ? u0 : 1.675 * u0; break;
            case DgpKind::power3: u1 = zi ? u0 : 0.515 * u0; break;
            case DgpKind::power4: {
                int l = 0;
                while (l < 4 && mix >= mu_cdf[l]) ++l;
                if (mu_index) (*mu_index)[ii] = l;
                u1 = zi ? u0 : mu_values[l] + 0.125 * u0;
                break;
            }
        }
        const double xb = x.row(i).dot(params.theta);
        y[i] = xb + (di ? u1 : u0);
        d[ii] = di;
        z[ii] = zi;
    }
    std::vector<std::string> sink;
    Dataset ds = make_dataset(std::move(y), std::move(d), std::move(x), z, Vec(), &sink);
    ds.x_names = {"x1", "x2", "x3"};
    return ds;
}

EstimationOptions mc_estimation_options() {
    EstimationOptions o;
    o.design.instrument_dummies = true;
    o.design.covariates = true;
    o.design.interactions = false;
    o.plm.common_slopes = true;
    return o;
}

namespace {

struct Outcome {
    bool ok = false;
    double p_overall = NAN, p_nesting = NAN, p_index = NAN;
    std::string error;
};

std::uint64_t spec_id(const DgpSpec& s) {
    return static_cast<std::uint64_t>(s.kind) * 16 + static_cast<std::uint64_t>(s.gamma) * 4 +
           static_cast<std::uint64_t>(s.delta);
}

// Outcomes indexed [method][xi].
std::vector<std::vector<Outcome>> run_replication(const DgpSpec& spec, const std::vector<Method>& methods,
                                                  const StudyConfig& cfg, int rep) {
    const std::uint64_t seed = cfg.test.seed;
    const auto r = static_cast<std::uint64_t>(rep);
    Rng prng = cfg.fix_params ? substream(seed, {kTagParams, spec_id(spec)})
                              : substream(seed, {kTagParams, spec_id(spec), spec.n, r});
    const DgpParams params = draw_params(spec, prng);
    Rng srng = substream(seed, {kTagSample, spec_id(spec), spec.n, r});
    const Dataset ds = draw_sample(spec, params, srng);

    std::vector<std::vector<Outcome>> out(methods.size(), std::vector<Outcome>(cfg.xis.size()));
    TestConfig tc = cfg.test;
    tc.threads = 1;
    tc.seed = substream_key(seed, {kTagBootstrap, spec_id(spec), spec.n, r});

    bool first_ok = false;
    std::string first_error;
    FirstStage first;
    const bool need_first = std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::no_covariates; });
    if (need_first) {
        try {
            first = estimate_first_stage(ds, cfg.estimation);
            first_ok = true;
        } catch (const std::exception& e) {
            first_error = e.what();
        }
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (std::size_t xi = 0; xi < cfg.xis.size(); ++xi) {
            Outcome& o = out[mi][xi];
            tc.xi = cfg.xis[xi];
            try {
                if (methods[mi] != Method::no_covariates && !first_ok) throw std::runtime_error(first_error);
                switch (methods[mi]) {
                    case Method::proposed: {
                        const TestReport rep_ = run_test_from(ds, first, tc, cfg.estimation);
                        o.p_overall = rep_.p_overall;
                        o.p_nesting = rep_.p_nesting;
                        o.p_index = rep_.p_index;
                        break;
                    }
                    case Method::no_covariates: o.p_overall = test_no_covariates(ds, tc).p_value; break;
                    case Method::binarized: o.p_overall = test_binarized_from(first, tc).p_value; break;
                }
                o.ok = true;
            } catch (const std::exception& e) {
                o.error = e.what();
            }
        }
    }
    return out;
}

struct Tally {
    int ok = 0, failed = 0;
    std::vector<int> rejections;
};

RejectionTable study(const std::vector<DgpSpec>& specs, const std::vector<Method>& methods, const StudyConfig& cfg) {
    if (cfg.reps < 1) throw std::invalid_argument("replication count must be at least 1");
    if (cfg.xis.empty()) throw std::invalid_argument("no xi values");
    validate(cfg.test);
    RejectionTable table;
    const auto reps = static_cast<std::size_t>(cfg.reps);
    for (const auto& spec : specs) {
        std::vector<std::vector<std::vector<Outcome>>> results(reps);
        parallel_for(reps, cfg.threads, [&](std::size_t r) {
            results[r] = run_replication(spec, methods, cfg, static_cast<int>(r));
        });
        const std::vector<std::string> comps =
            cfg.components ? std::vector<std::string>{"nesting", "index", "overall"} : std::vector<std::string>{"overall"};
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            for (std::size_t xi = 0; xi < cfg.xis.size(); ++xi) {
                for (std::size_t r = 0; r < reps; ++r) {
                    const Outcome& o = results[r][mi][xi];
                    ReplicationRecord rec;
                    rec.dgp = to_string(spec.kind);
                    rec.n = spec.n;
                    rec.rep = static_cast<int>(r);
                    rec.method = to_string(methods[mi]);
                    rec.xi = cfg.xis[xi];
                    rec.ok = o.ok;
                    rec.p_overall = o.p_overall;
                    rec.p_nesting = o.p_nesting;
                    rec.p_index = o.p_index;
                    rec.error = o.error;
                    table.log.push_back(rec);
                }
                const bool comp_rows = cfg.components && methods[mi] == Method::proposed;
                for (const auto& comp : comp_rows ? comps : std::vector<std::string>{"overall"}) {
                    for (double level : cfg.levels) {
                        RejectionRow row;
                        row.dgp = to_string(spec.kind);
                        row.gamma = to_string(spec.gamma);
                        row.delta = to_string(spec.delta);
                        row.method = to_string(methods[mi]);
                        row.component = comp;
                        row.n = spec.n;
                        row.xi = cfg.xis[xi];
                        row.level = level;
                        int rej = 0;
                        for (std::size_t r = 0; r < reps; ++r) {
                            const Outcome& o = results[r][mi][xi];
                            const double p = comp == "nesting" ? o.p_nesting : comp == "index" ? o.p_index : o.p_overall;
                            // A component that could not be computed counts as a failure for that row.
                            if (!o.ok || std::isnan(p)) {
                                ++row.failed;
                                continue;
                            }
                            ++row.reps;
                            if (p <= level) ++rej;
                        }
                        if (row.reps > 0) {
                            row.rate = static_cast<double>(rej) / row.reps;
                            row.se = std::sqrt(row.rate * (1.0 - row.rate) / row.reps);
                        } else {
                            row.rate = row.se = NAN;
                        }
                        table.rows.push_back(row);
                    }
                }
            }
        }
    }
    return table;
}

}  // namespace

RejectionTable rejection_study(const std::vector<DgpSpec>& specs, const std::vector<Method>& methods,
                               const StudyConfig& cfg) {
    return study(specs, methods, cfg);
}

RejectionTable component_study(const std::vector<DgpSpec>& specs, const StudyConfig& cfg) {
    StudyConfig c = cfg;
    c.components = true;
    return study(specs, {Method::proposed}, c);
}

std::string RejectionTable::to_csv() const {
    std::ostringstream os;
    os << "dgp,gamma,delta,n,method,component,xi,level,rate,se,reps,failed\n";
    for (const auto& r : rows)
        os << r.dgp << ',' << r.gamma << ',' << r.delta << ',' << r.n << ',' << r.method << ',' << r.component << ','
           << fmt_double(r.xi) << ',' << fmt_double(r.level) << ',' << fmt_double(r.rate) << ',' << fmt_double(r.se)
           << ',' << r.reps << ',' << r.failed << '\n';
    return os.str();
}

std::string RejectionTable::to_text() const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-7s %-8s %-7s %6s %-14s %-9s %6s %6s %7s %7s %5s %6s\n", "dgp", "gamma", "delta", "n",
                  "method", "component", "xi", "level", "rate", "se", "reps", "failed");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-7s %-8s %-7s %6zu %-14s %-9s %6.3f %6.2f %7.3f %7.3f %5d %6d\n", r.dgp.c_str(),
                      r.gamma.c_str(), r.delta.c_str(), r.n, r.method.c_str(), r.component.c_str(), r.xi, r.level,
                      r.rate, r.se, r.reps, r.failed);
        os << buf;
    }
    return os.str();
}

const RejectionRow* RejectionTable::find(const std::string& dgp, std::size_t n, const std::string& method,
                                         const std::string& component, double level, double xi) const {
    for (const auto& r : rows)
        if (r.dgp == dgp && r.n == n && r.method == method && r.component == component &&
            std::abs(r.level - level) < 1e-12 && (xi < 0.0 || std::abs(r.xi - xi) < 1e-12))
            return &r;
    return nullptr;
}

}  // namespace ivv
