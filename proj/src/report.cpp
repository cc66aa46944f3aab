#include "ivv/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ivv {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json vec_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

Json vec_json(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

Json bandwidth_json(const BandwidthGrid& g) {
    return Json{{"points", g.points}, {"lo_factor", g.lo_factor}, {"hi_factor", g.hi_factor},
                {"fixed", g.fixed}};
}

Json pair_components(const PairStatistic& st) {
    Json c = Json::object();
    c["nesting"] = st.nesting_available ? to_json(st.nesting) : Json(nullptr);
    c["index"] = st.index_available ? to_json(st.index) : Json(nullptr);
    return c;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return hex64(h);
}

std::string fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes);
}

Json num(double x) {
    if (!std::isfinite(x)) return Json(nullptr);
    return Json(x == 0.0 ? 0.0 : x);  // no negative zero
}

Json to_json(const Interval& iv) {
    return Json{{"lo", num(iv.lo)}, {"hi", num(iv.hi)}, {"lo_open", iv.lo_open}};
}

Json to_json(const Argmax& a) {
    return Json{{"value", num(a.value)}, {"lo", num(a.lo)}, {"hi", num(a.hi)}, {"d", a.d}, {"sign", a.sign}};
}

Json to_json(const TestConfig& c) {
    return Json{{"xi", c.xi},
                {"s2_lo", c.s2_lo},
                {"s2_hi", c.s2_hi},
                {"n_boot", c.n_boot},
                {"multiplier", to_string(c.multiplier)},
                {"interval_cap", c.interval_cap},
                {"seed", c.seed},
                {"boot_recenter", c.recenter},
                {"s2_share", to_string(c.s2_share)}};
}

Json to_json(const EstimationOptions& o) {
    Json j;
    j["propensity"] = Json{{"link", "probit"},
                           {"instrument_dummies", o.design.instrument_dummies},
                           {"covariates", o.design.covariates},
                           {"interactions", o.design.interactions},
                           {"max_iter", o.probit.max_iter},
                           {"ridge", o.probit.ridge},
                           {"index_cap", o.probit.index_cap}};
    j["plm"] = Json{{"phi", to_string(o.plm.phi)},
                    {"common_slopes", o.plm.common_slopes},
                    {"bw_y", bandwidth_json(o.plm.bw_y)},
                    {"bw_x", bandwidth_json(o.plm.bw_x)},
                    {"pinv_tol", o.plm.pinv_tol}};
    j["pz"] = to_string(o.pz);
    j["bw_pz"] = o.bw_pz;
    j["distill"] = to_string(o.distill);
    j["pminus"] = o.pminus ? to_json(*o.pminus) : Json(nullptr);
    j["pplus"] = o.pplus ? to_json(*o.pplus) : Json(nullptr);
    return j;
}

Json to_json(const DistilledSample& d) {
    std::size_t kept = 0;
    for (auto v : d.s1) kept += v;
    return Json{{"algorithm", to_string(d.algorithm)},
                {"d0", num(d.d0)},
                {"d1", num(d.d1)},
                {"trimmed0", num(d.trimmed0)},
                {"trimmed1", num(d.trimmed1)},
                {"pretrim0", d.pretrim0},
                {"pretrim1", d.pretrim1},
                {"outside", d.outside},
                {"retained", kept},
                {"j_minus", d.j_minus},
                {"j_plus", d.j_plus},
                {"max_delta", num(d.max_delta)},
                {"pminus", to_json(d.pminus)},
                {"pplus", to_json(d.pplus)},
                {"feasible", d.feasible},
                {"repaired", d.repaired},
                {"warnings", d.warnings}};
}

Json to_json(const TestReport& r) {
    Json j;
    j["method"] = r.method;
    j["n"] = r.n;
    j["levels"] = r.levels;
    j["T"] = num(r.T);
    j["p_overall"] = num(r.p_overall);
    j["T_nesting"] = num(r.T_nesting);
    j["p_nesting"] = num(r.p_nesting);
    j["T_index"] = num(r.T_index);
    j["p_index"] = num(r.p_index);
    j["available"] = Json{{"nesting", r.nesting_available}, {"index", r.index_available}};
    j["n_boot"] = r.n_boot;

    Json comps = Json::array(), trims = Json::array(), shares = Json::array();
    for (const auto& p : r.pairs) {
        Json tag = Json::array({p.code_lo, p.code_hi});
        Json c = pair_components(p.stat);
        c["pair"] = tag;
        c["skipped"] = p.skipped;
        comps.push_back(c);
        Json t = to_json(p.distill);
        t["pair"] = tag;
        trims.push_back(t);
        shares.push_back(Json{{"pair", tag},
                              {"count0", p.count0},
                              {"count1", p.count1},
                              {"n0", p.n0},
                              {"n1", p.n1},
                              {"s1_0", num(p.share_s1_0)},
                              {"s1_1", num(p.share_s1_1)},
                              {"s2_0", num(p.share_s2_0)},
                              {"s2_1", num(p.share_s2_1)},
                              {"s2", num(p.share_s2)},
                              {"s2_count", p.s2_count}});
    }
    j["components"] = comps;
    j["trimming"] = trims;
    j["shares"] = shares;

    const auto& pf = r.first.pfit;
    Json fs;
    fs["propensity"] = Json{{"columns", pf.columns},
                            {"coef", vec_json(pf.coef)},
                            {"converged", pf.converged},
                            {"iterations", pf.iterations},
                            {"ridge_used", pf.ridge_used},
                            {"loglik", num(pf.loglik)}};
    const auto& pl = r.first.plm;
    fs["plm"] = Json{{"theta0", vec_json(pl.theta0)},
                     {"theta1", vec_json(pl.theta1)},
                     {"phi", to_string(pl.phi)},
                     {"rank", pl.rank},
                     {"bandwidths", vec_json(pl.bandwidths)},
                     {"residual_variance", num(pl.residual_variance)}};
    fs["pz"] = Json{{"method", to_string(r.pz.method)}, {"bandwidths", vec_json(r.pz.bandwidths)}};
    j["first_stage"] = fs;
    j["config"] = to_json(r.cfg);
    j["estimation"] = to_json(r.opts);
    j["warnings"] = r.warnings;
    return j;
}

Json to_json(const BaselineReport& r) {
    Json j;
    j["method"] = to_string(r.which);
    j["T"] = num(r.T);
    j["p_value"] = num(r.p_value);
    j["n_boot"] = r.n_boot;
    if (r.which == BaselineKind::binarized_pscore) j["bins"] = r.bins;
    Json comps = Json::array();
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
        Json c = pair_components(r.pairs[i]);
        c["pair"] = Json::array({static_cast<int>(i), static_cast<int>(i) + 1});
        comps.push_back(c);
    }
    j["components"] = comps;
    j["warnings"] = r.warnings;
    return j;
}

Json to_json(const ExampleParams& p) {
    return Json{{"nu", p.nu},         {"alpha", p.alpha},   {"dd", p.dd},         {"rho_delta", p.rho_delta},
                {"mu1", p.mu1},       {"mu0", p.mu0},       {"sigma1", p.sigma1}, {"sigma0", p.sigma0},
                {"rho_D1", p.rho_D1}, {"rho_D0", p.rho_D0}, {"rho_10", p.rho_10}};
}

Json to_json(const BiasScalars& s) {
    Json j;
    j["t1d1"] = s.t1d1;
    j["t1d0"] = s.t1d0;
    j["t0d0"] = s.t0d0;
    j["t0d1"] = s.t0d1;
    j["H1"] = s.H1;
    j["H0"] = s.H0;
    j["th1th1"] = s.th1th1;
    j["th0th0"] = s.th0th0;
    j["w1"] = s.w1;
    j["w0"] = s.w0;
    j["a"] = Json(std::vector<double>(s.a.begin(), s.a.end()));
    j["b"] = Json(std::vector<double>(s.b.begin(), s.b.end()));
    j["c"] = Json::array({s.c0, s.c1});
    j["d"] = Json::array({s.d0, s.d1});
    j["e"] = Json::array({s.e0, s.e1});
    j["cond_E"] = num(s.cond_E);
    j["cond_G"] = num(s.cond_G);
    Json eq = Json::array();
    for (const auto& e : s.equalities)
        eq.push_back(Json{{"left", e.left}, {"right", e.right}, {"formula", e.formula}});
    j["equalities"] = eq;
    j["direct"] = Json{{"t1d1", s.direct_t1d1}, {"t1d0", s.direct_t1d0}, {"t0d0", s.direct_t0d0},
                       {"t0d1", s.direct_t0d1}, {"th1th1", s.direct_th1th1}, {"th0th0", s.direct_th0th0}};
    return j;
}

std::string density_csv(const DensityTable& t) {
    std::ostringstream os;
    os << "u";
    for (const auto& c : t.columns) os << ',' << c;
    os << '\n';
    for (std::size_t i = 0; i < t.grid.size(); ++i) {
        os << fmt_double(t.grid[i]);
        for (const auto& col : t.values) os << ',' << fmt_double(col[i]);
        os << '\n';
    }
    return os.str();
}

std::string replication_csv(const std::vector<ReplicationRecord>& log) {
    std::ostringstream os;
    os << "dgp,n,rep,method,xi,ok,p_overall,p_nesting,p_index,error\n";
    for (const auto& r : log) {
        std::string err = r.error;
        for (auto& c : err)
            if (c == ',' || c == '\n') c = ';';
        os << r.dgp << ',' << r.n << ',' << r.rep << ',' << r.method << ',' << fmt_double(r.xi) << ','
           << (r.ok ? 1 : 0) << ',' << fmt_double(r.p_overall) << ',' << fmt_double(r.p_nesting) << ','
           << fmt_double(r.p_index) << ',' << err << '\n';
    }
    return os.str();
}

void RunManifest::add_input(const std::string& path) {
    InputDigest d;
    d.path = path;
    d.fnv1a = fnv1a_file(path);
    d.bytes = std::filesystem::file_size(path);
    inputs.push_back(d);
}

Json RunManifest::embedded() const {
    Json j;
    j["subcommand"] = subcommand;
    j["version"] = version;
    j["seed"] = seed;
    j["config"] = config;
    Json in = Json::array();
    for (const auto& d : inputs) in.push_back(Json{{"path", d.path}, {"fnv1a", d.fnv1a}, {"bytes", d.bytes}});
    j["inputs"] = in;
    return j;
}

std::string RunManifest::digest() const {
    Json j = embedded();
    // Paths do not change what was computed; contents do.
    for (auto& in : j["inputs"]) in.erase("path");
    return fnv1a_hex(j.dump());
}

Json RunManifest::full() const {
    Json j = embedded();
    j["digest"] = digest();
    j["outputs"] = outputs;
    j["wall_seconds"] = wall_seconds;
    return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace ivv
