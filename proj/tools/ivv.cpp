// ivv: command-line front end for the instrument validity test, distillation,
// Monte Carlo studies and the example-process oracle.

#include "ivv/baselines.hpp"
#include "ivv/biasoracle.hpp"
#include "ivv/ivtest.hpp"
#include "ivv/mcstudy.hpp"
#include "ivv/parallel.hpp"
#include "ivv/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace ivv;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Logger {
    bool json = false;
    void emit(const std::string& level, const std::string& msg) const {
        if (json)
            std::cerr << Json{{"level", level}, {"msg", msg}}.dump() << '\n';
        else
            std::cerr << level << ": " << msg << '\n';
    }
    void info(const std::string& msg) const { emit("info", msg); }
    void warn(const std::string& msg) const { emit("warning", msg); }
};

struct Common {
    std::string output_dir;
    std::string log = "text";
    int threads = 1;
};

/// Writes `name` inside the output directory; names never contain path separators.
class OutputDir {
public:
    explicit OutputDir(const std::string& dir) : root_(dir) {
        if (dir.empty()) throw UsageError("--output-dir is required");
        fs::create_directories(root_);
    }
    void write(const std::string& name, const std::string& content, RunManifest& m) {
        fs::path target = root_ / name;
        std::ofstream out(target, std::ios::binary);
        if (!out) throw DataError("cannot write " + target.string());
        out << content;
        m.outputs.push_back(name);
    }
    void finish(RunManifest& m, double seconds) {
        m.wall_seconds = seconds;
        std::ofstream out(root_ / "manifest.json", std::ios::binary);
        out << dump(m.full());
    }

private:
    fs::path root_;
};

Interval parse_interval(const std::string& s, bool lo_open) {
    auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("interval '" + s + "' must be lo,hi");
    auto val = [&](const std::string& t) -> double {
        if (t == "-inf") return -INFINITY;
        if (t == "inf") return INFINITY;
        try {
            std::size_t pos = 0;
            double v = std::stod(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw UsageError("cannot parse interval bound '" + t + "'");
        }
    };
    Interval iv{val(s.substr(0, comma)), val(s.substr(comma + 1)), lo_open};
    if (!(iv.lo <= iv.hi)) throw UsageError("interval '" + s + "' has lo > hi");
    return iv;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--output-dir", c.output_dir, "Directory receiving every output file")->required();
    sub->add_option("--log", c.log, "Diagnostic format on stderr")->check(CLI::IsMember({"json", "text"}));
    sub->add_option("--threads", c.threads, "Worker threads (results do not depend on this)")
        ->check(CLI::NonNegativeNumber);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- shared data/estimation flags --------------------------------------------

struct DataFlags {
    std::string data;
    CsvSchema schema;
    std::vector<std::string> x;
};

void add_data_flags(CLI::App* sub, DataFlags& f, bool required) {
    auto* o = sub->add_option("--data", f.data, "Input CSV with a header row");
    if (required) o->required();
    sub->add_option("--y", f.schema.y, "Outcome column");
    sub->add_option("--d", f.schema.d, "Treatment column (0/1)");
    sub->add_option("--z", f.schema.z, "Instrument column (integer codes)");
    sub->add_option("--x", f.x, "Covariate columns, comma separated")->delimiter(',');
    sub->add_option("--weight", f.schema.weight, "Optional weight column");
}

Dataset load_data(DataFlags& f, const Logger& log) {
    f.schema.x = f.x;
    LoadReport rep;
    Dataset ds = load_csv(f.data, f.schema, &rep);
    for (const auto& w : rep.warnings) log.warn(w);
    return ds;
}

struct EstFlags {
    std::string phi = "nonparametric";
    std::string pz = "local-constant";
    std::string distill = "modified";
    std::string pminus, pplus;
    double bw_y = 0, bw_x = 0, bw_pz = 0;
    int max_iter = 100;
    double ridge = 1e-4;
    std::string link = "probit";
    bool no_interactions = false;
    bool common_slopes = false;
};

void add_estimation_flags(CLI::App* sub, EstFlags& f) {
    sub->add_option("--phi", f.phi, "Control function: nonparametric | poly:<k>");
    sub->add_option("--pz", f.pz, "Pr(Z|p) estimator: local-constant | probit");
    sub->add_option("--distill", f.distill, "Distillation algorithm")->check(CLI::IsMember({"simple", "modified"}));
    sub->add_option("--pminus", f.pminus, "Lower propensity region lo,hi (closed)");
    sub->add_option("--pplus", f.pplus, "Upper propensity region lo,hi (open at lo)");
    sub->add_option("--bw-y", f.bw_y, "Fixed bandwidth for E[y|p] (0 = cross-validated)");
    sub->add_option("--bw-x", f.bw_x, "Fixed bandwidth for E[x|p] (0 = cross-validated)");
    sub->add_option("--bw-pz", f.bw_pz, "Fixed bandwidth for Pr(Z|p) (0 = cross-validated)");
    sub->add_option("--pscore-max-iter", f.max_iter, "Newton iterations for the propensity probit");
    sub->add_option("--pscore-ridge", f.ridge, "Ridge penalty used when the probit separates");
    sub->add_option("--pscore-link", f.link, "Propensity link")->check(CLI::IsMember({"probit"}));
    sub->add_flag("--no-interactions", f.no_interactions, "Drop instrument x covariate interactions");
    sub->add_flag("--common-slopes", f.common_slopes, "Restrict theta0 = theta1");
}

EstimationOptions make_estimation(const EstFlags& f) {
    EstimationOptions o;
    o.design.interactions = !f.no_interactions;
    o.probit.max_iter = f.max_iter;
    o.probit.ridge = f.ridge;
    o.probit.link = parse_link(f.link);
    o.plm.phi = parse_phi(f.phi);
    o.plm.common_slopes = f.common_slopes;
    o.plm.bw_y.fixed = f.bw_y;
    o.plm.bw_x.fixed = f.bw_x;
    o.pz = parse_pz(f.pz);
    o.bw_pz = f.bw_pz;
    o.distill = parse_distill(f.distill);
    if (!f.pminus.empty()) o.pminus = parse_interval(f.pminus, false);
    if (!f.pplus.empty()) o.pplus = parse_interval(f.pplus, true);
    if (o.pminus.has_value() != o.pplus.has_value())
        throw UsageError("--pminus and --pplus must be given together");
    return o;
}

struct InferFlags {
    double xi = std::sqrt(0.05 * 0.95);
    double s2_lo = 0.05, s2_hi = 0.95;
    int boot = 500;
    std::string multiplier = "gaussian";
    std::uint64_t seed = 0;
    bool recenter = false;
    std::string s2_share = "pooled";
    std::size_t interval_cap = 2000;
};

void add_infer_flags(CLI::App* sub, InferFlags& f) {
    sub->add_option("--xi", f.xi, "Variance floor of the weighting function");
    sub->add_option("--s2-lo", f.s2_lo, "Lower Pr(Z|p) bound of the index sample");
    sub->add_option("--s2-hi", f.s2_hi, "Upper Pr(Z|p) bound of the index sample");
    sub->add_option("--boot", f.boot, "Bootstrap draws");
    sub->add_option("--multiplier", f.multiplier, "gaussian | rademacher | mammen");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_flag("--boot-recenter", f.recenter, "Recenter bootstrap draws by the multiplier means");
    sub->add_option("--s2-share", f.s2_share, "pooled | by-instrument");
    sub->add_option("--interval-cap", f.interval_cap, "Maximum interval endpoints per statistic");
}

TestConfig make_config(const InferFlags& f, int threads) {
    TestConfig c;
    c.xi = f.xi;
    c.s2_lo = f.s2_lo;
    c.s2_hi = f.s2_hi;
    c.n_boot = f.boot;
    c.multiplier = parse_multiplier(f.multiplier);
    c.seed = f.seed;
    c.recenter = f.recenter;
    c.s2_share = parse_s2_share(f.s2_share);
    c.interval_cap = f.interval_cap;
    c.threads = threads;
    validate(c);
    return c;
}

// ---- test --------------------------------------------------------------------

struct TestFlags {
    Common common;
    DataFlags data;
    EstFlags est;
    InferFlags inf;
    std::string method = "proposed";
    int bins = 2;
    bool emit_densities = false;
    bool emit_boot = false;
};

std::string boot_csv(const std::vector<std::vector<double>>& cols, const std::vector<std::string>& names) {
    std::ostringstream os;
    os << "draw";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    std::size_t rows = 0;
    for (const auto& c : cols) rows = std::max(rows, c.size());
    for (std::size_t r = 0; r < rows; ++r) {
        os << r + 1;
        for (const auto& c : cols) os << ',' << (r < c.size() ? fmt_double(c[r]) : "");
        os << '\n';
    }
    return os.str();
}

int run_test(TestFlags& f, const Logger& log) {
    auto t0 = std::chrono::steady_clock::now();
    Method method = parse_method(f.method);
    EstimationOptions opts = make_estimation(f.est);
    TestConfig cfg = make_config(f.inf, f.common.threads);
    Dataset ds = load_data(f.data, log);

    RunManifest m;
    m.subcommand = "test";
    m.seed = cfg.seed;
    m.add_input(f.data.data);
    m.config = Json{{"method", f.method},
                    {"columns", Json{{"y", f.data.schema.y}, {"d", f.data.schema.d}, {"z", f.data.schema.z},
                                     {"x", f.data.x}, {"weight", f.data.schema.weight}}},
                    {"test", to_json(cfg)},
                    {"estimation", to_json(opts)}};
    if (method == Method::binarized) m.config["bins"] = f.bins;

    OutputDir out(f.common.output_dir);
    Json j;
    if (method == Method::proposed) {
        TestReport r = run_test_multivalued(ds, cfg, opts);
        for (const auto& w : r.warnings) log.warn(w);
        j = to_json(r);
        if (f.emit_densities) out.write("densities.csv", density_csv(subdensities(r, ds)), m);
        if (f.emit_boot)
            out.write("boot.csv", boot_csv({r.boot_T, r.boot_nesting, r.boot_index}, {"T", "nesting", "index"}), m);
    } else {
        BaselineReport r = method == Method::no_covariates ? test_no_covariates(ds, cfg)
                                                           : test_binarized_pscore(ds, cfg, opts, f.bins);
        for (const auto& w : r.warnings) log.warn(w);
        j = to_json(r);
        if (f.emit_densities) log.warn("--emit-densities applies to the proposed method only");
        if (f.emit_boot) out.write("boot.csv", boot_csv({r.boot}, {"T"}), m);
    }
    j["run"] = m.embedded();
    out.write("report.json", dump(j), m);
    out.finish(m, seconds_since(t0));
    log.info("wrote report.json to " + f.common.output_dir);
    return 0;
}

// ---- distill -------------------------------------------------------------------

struct DistillFlags {
    Common common;
    DataFlags data;
    EstFlags est;
    std::string pscore_col;
};

int run_distill(DistillFlags& f, const Logger& log) {
    auto t0 = std::chrono::steady_clock::now();
    EstimationOptions opts = make_estimation(f.est);
    RunManifest m;
    m.subcommand = "distill";
    m.add_input(f.data.data);
    m.config = Json{{"estimation", to_json(opts)}};

    Vec p, w;
    std::vector<int> z;
    std::vector<long long> codes;
    if (!f.pscore_col.empty()) {
        std::vector<std::string> cols{f.pscore_col, f.data.schema.z};
        if (!f.data.schema.weight.empty()) cols.push_back(f.data.schema.weight);
        LoadReport rep;
        Mat t = load_columns(f.data.data, cols, &rep);
        for (const auto& s : rep.warnings) log.warn(s);
        p = t.col(0);
        w = cols.size() == 3 ? Vec(t.col(2)) : Vec::Ones(t.rows());
        std::map<long long, int> level;
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            double zv = t(i, 1);
            if (zv != std::round(zv)) throw DataError("instrument values must be integer codes");
            level.emplace(static_cast<long long>(zv), 0);
        }
        if (level.size() != 2) throw DataError("distill needs exactly two instrument levels");
        int k = 0;
        for (auto& [code, lv] : level) {
            lv = k++;
            codes.push_back(code);
        }
        for (Eigen::Index i = 0; i < t.rows(); ++i) z.push_back(level[static_cast<long long>(t(i, 1))]);
        for (Eigen::Index i = 0; i < p.size(); ++i)
            if (!(p(i) >= 0 && p(i) <= 1)) throw DataError("propensity score outside [0, 1] in row " + std::to_string(i + 1));
        for (Eigen::Index i = 0; i < w.size(); ++i)
            if (!(w(i) > 0)) throw DataError("weight must be positive in row " + std::to_string(i + 1));
        m.config["pscore_col"] = f.pscore_col;
        m.config["z"] = f.data.schema.z;
        m.config["weight"] = f.data.schema.weight;
    } else {
        Dataset ds = load_data(f.data, log);
        if (ds.levels() != 2) throw DataError("distill needs exactly two instrument levels");
        PropensityFit pf = fit_probit(ds, opts.design, opts.probit);
        for (const auto& s : pf.warnings) log.warn(s);
        p = pf.fitted;
        w = ds.w;
        z = ds.z;
        codes = ds.z_codes;
        m.config["columns"] = Json{{"y", f.data.schema.y}, {"d", f.data.schema.d}, {"z", f.data.schema.z},
                                   {"x", f.data.x}, {"weight", f.data.schema.weight}};
    }

    DistilledSample d = distill(p, z, w, opts.distill, opts.pminus, opts.pplus);
    for (const auto& s : d.warnings) log.warn(s);
    FosdCheck chk{};
    {
        SortedPair sp = sort_pair(p, z, w);
        std::vector<std::uint8_t> s1(sp.size());
        for (std::size_t i = 0; i < sp.size(); ++i) s1[i] = d.s1[sp.idx[i]];
        chk = verify_fosd(sp, s1);
    }

    OutputDir out(f.common.output_dir);
    std::ostringstream csv;
    csv << "row,p,z,s1\n";
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        auto ii = static_cast<std::size_t>(i);
        csv << i + 1 << ',' << fmt_double(p(i)) << ',' << codes[static_cast<std::size_t>(z[ii])] << ','
            << static_cast<int>(d.s1[ii]) << '\n';
    }
    Json j = to_json(d);
    j["z_codes"] = codes;
    j["n"] = p.size();
    j["fosd_holds"] = chk.ok;
    j["run"] = m.embedded();
    out.write("distill.json", dump(j), m);
    out.write("s1.csv", csv.str(), m);
    out.finish(m, seconds_since(t0));
    log.info("wrote distill.json and s1.csv to " + f.common.output_dir);
    return 0;
}

// ---- simulate ------------------------------------------------------------------

struct SimFlags {
    Common common;
    std::vector<std::string> dgps{"size"};
    std::vector<std::size_t> ns{500};
    std::string gamma = "zero";
    std::string delta = "wide";
    std::vector<std::string> methods{"proposed", "no-covariates", "binarized"};
    std::vector<double> xis{std::sqrt(0.05 * 0.95)};
    std::vector<double> levels{0.10, 0.05, 0.01};
    int reps = 200;
    int boot = 200;
    std::string multiplier = "gaussian";
    std::uint64_t seed = 0;
    bool fix_params = false;
    bool components = false;
};

int run_simulate(SimFlags& f, const Logger& log) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<DgpSpec> specs;
    for (const auto& g : f.dgps)
        for (auto n : f.ns) {
            DgpSpec s;
            s.kind = parse_dgp(g);
            s.n = n;
            s.gamma = parse_gamma(f.gamma);
            s.delta = parse_delta(f.delta);
            specs.push_back(s);
        }
    std::vector<Method> methods;
    for (const auto& s : f.methods) methods.push_back(parse_method(s));
    if (f.reps < 1) throw UsageError("--reps must be positive");

    StudyConfig cfg;
    cfg.test.n_boot = f.boot;
    cfg.test.multiplier = parse_multiplier(f.multiplier);
    cfg.test.seed = f.seed;
    cfg.xis = f.xis;
    cfg.levels = f.levels;
    cfg.reps = f.reps;
    cfg.fix_params = f.fix_params;
    cfg.threads = f.common.threads;
    cfg.test.threads = 1;
    validate(cfg.test);

    RunManifest m;
    m.subcommand = "simulate";
    m.seed = f.seed;
    m.config = Json{{"dgp", f.dgps},       {"n", f.ns},          {"gamma", f.gamma},
                    {"delta", f.delta},    {"methods", f.methods}, {"xi", f.xis},
                    {"levels", f.levels},  {"reps", f.reps},     {"boot", f.boot},
                    {"multiplier", f.multiplier}, {"fix_params", f.fix_params},
                    {"components", f.components},
                    {"estimation", to_json(cfg.estimation)}};

    RejectionTable table = f.components ? component_study(specs, cfg) : rejection_study(specs, methods, cfg);
    std::size_t failed = 0;
    for (const auto& r : table.log) failed += r.ok ? 0 : 1;
    if (failed) log.warn(std::to_string(failed) + " replication(s) failed; see replications.csv");

    OutputDir out(f.common.output_dir);
    out.write("rejection.csv", table.to_csv(), m);
    out.write("rejection.txt", table.to_text(), m);
    out.write("replications.csv", replication_csv(table.log), m);
    out.write("run.json", dump(m.embedded()), m);
    out.finish(m, seconds_since(t0));
    log.info("wrote rejection.csv to " + f.common.output_dir);
    return 0;
}

// ---- oracle --------------------------------------------------------------------

struct OracleFlags {
    Common common;
    std::string grid = "default";
    ExampleParams base;
    int u_points = 400;
    std::string point;
};

int run_oracle(OracleFlags& f, const Logger& log) {
    auto t0 = std::chrono::steady_clock::now();
    f.base.validate();
    OracleGrid grid = f.grid == "coarse" ? coarse_grid() : default_grid();
    ViolationOptions vo;
    vo.u_points = f.u_points;
    if (vo.u_points < 2) throw UsageError("--u-points must be at least 2");

    RunManifest m;
    m.subcommand = "oracle";
    m.config = Json{{"grid", f.grid}, {"params", to_json(f.base)}, {"u_points", f.u_points},
                    {"u_span_sd", vo.u_span_sd}, {"t_panels", vo.t_panels}, {"tol", vo.oracle.tol}};

    auto rows = violation_map(f.base, grid, vo, f.common.threads);
    std::map<std::string, int> counts;
    for (const auto& r : rows) counts[to_string(r.region)]++;

    Json summary;
    summary["points"] = rows.size();
    summary["regions"] = counts;
    if (!f.point.empty()) {
        Interval pt = parse_interval(f.point, false);  // rho,dd
        ExampleParams p = f.base;
        p.rho_delta = pt.lo;
        p.dd = pt.hi;
        summary["point"] = Json{{"params", to_json(p)}, {"scalars", to_json(bias_scalars(p))}};
        m.config["point"] = f.point;
    }
    summary["run"] = m.embedded();

    OutputDir out(f.common.output_dir);
    out.write("oracle.csv", violation_csv(rows), m);
    out.write("oracle.json", dump(summary), m);
    out.finish(m, seconds_since(t0));
    log.info("wrote oracle.csv to " + f.common.output_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instrument validity testing with covariates"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    TestFlags tf;
    auto* test = app.add_subcommand("test", "Run the instrument validity test on a CSV");
    add_common(test, tf.common);
    add_data_flags(test, tf.data, true);
    add_estimation_flags(test, tf.est);
    add_infer_flags(test, tf.inf);
    test->add_option("--method", tf.method, "proposed | no-covariates | binarized");
    test->add_option("--bins", tf.bins, "Propensity bins for the binarized method");
    test->add_flag("--emit-densities", tf.emit_densities, "Write kernel-smoothed subdensities");
    test->add_flag("--emit-boot", tf.emit_boot, "Write the bootstrap draws");

    DistillFlags df;
    auto* dist = app.add_subcommand("distill", "Distill a two-level sample");
    add_common(dist, df.common);
    add_data_flags(dist, df.data, true);
    add_estimation_flags(dist, df.est);
    dist->add_option("--pscore", df.pscore_col, "Column holding propensity scores (skips estimation)");

    SimFlags sf;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection rates");
    add_common(sim, sf.common);
    sim->add_option("--dgp", sf.dgps, "size | power1..power4, comma separated")->delimiter(',');
    sim->add_option("--n", sf.ns, "Sample sizes, comma separated")->delimiter(',');
    sim->add_option("--gamma", sf.gamma, "zero | uniform");
    sim->add_option("--delta", sf.delta, "wide | narrow");
    sim->add_option("--methods", sf.methods, "proposed,no-covariates,binarized")->delimiter(',');
    sim->add_option("--xi", sf.xis, "Variance floors, comma separated")->delimiter(',');
    sim->add_option("--levels", sf.levels, "Nominal levels, comma separated")->delimiter(',');
    sim->add_option("--reps", sf.reps, "Replications");
    sim->add_option("--boot", sf.boot, "Bootstrap draws per test");
    sim->add_option("--multiplier", sf.multiplier, "gaussian | rademacher | mammen");
    sim->add_option("--seed", sf.seed, "Study seed");
    sim->add_flag("--fix-params", sf.fix_params, "Draw coefficients once per design");
    sim->add_flag("--components", sf.components, "Report nesting and index rates (proposed only)");

    OracleFlags of;
    auto* orc = app.add_subcommand("oracle", "Violation map of the example process");
    add_common(orc, of.common);
    orc->add_option("--grid", of.grid, "default | coarse")->check(CLI::IsMember({"default", "coarse"}));
    orc->add_option("--nu", of.base.nu, "Direct instrument effect");
    orc->add_option("--alpha", of.base.alpha, "Instrument shift in the selection index");
    orc->add_option("--mu1", of.base.mu1, "Mean of the treated outcome error");
    orc->add_option("--mu0", of.base.mu0, "Mean of the untreated outcome error");
    orc->add_option("--u-points", of.u_points, "Residual grid points");
    orc->add_option("--point", of.point, "Also report bias scalars at rho,dd");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    Logger log;
    auto pick_log = [&](const Common& c) { log.json = c.log == "json"; };
    try {
        if (test->parsed()) {
            pick_log(tf.common);
            return run_test(tf, log);
        }
        if (dist->parsed()) {
            pick_log(df.common);
            return run_distill(df, log);
        }
        if (sim->parsed()) {
            pick_log(sf.common);
            return run_simulate(sf, log);
        }
        if (orc->parsed()) {
            pick_log(of.common);
            return run_oracle(of, log);
        }
    } catch (const UsageError& e) {
        log.emit("error", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        log.emit("error", e.what());
        return 1;
    } catch (const DataError& e) {
        log.emit("error", e.what());
        return 2;
    } catch (const NumericalError& e) {
        log.emit("error", e.what());
        return 3;
    } catch (const std::exception& e) {
        log.emit("error", e.what());
        return 3;
    }
    return 1;
}
