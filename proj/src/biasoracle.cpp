#include "ivv/biasoracle.hpp"

#include "ivv/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace ivv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2Pi = 2.5066282746310002;

double normal_pdf(double x, double mean, double var) {
    double z = x - mean;
    return std::exp(-0.5 * z * z / var) / (kSqrt2Pi * std::sqrt(var));
}

double cond_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    double lo = s(s.size() - 1);
    return lo > 0 ? s(0) / lo : kInf;
}

/// Integrates g over (-inf, inf) and checks the error estimate.
double integrate_line(const std::function<double(double)>& g, double tol) {
    double err = 0, l1 = 0;
    double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -kInf, kInf, 15, tol,
                                                                             &err, &l1);
    if (!std::isfinite(v) || err > std::max(1e-9 * l1, 1e-15))
        throw NumericalError("quadrature did not converge (error estimate " + fmt_double(err) + ")");
    return v;
}

/// Expectation of g(t) under the marginal law of t = Phi^{-1}(p): an equal mixture of
/// N(alpha, dd) and N(-alpha, dd). Each component is integrated in its own standard scale.
struct TExpectation {
    double alpha, dd, tol;

    double operator()(const std::function<double(double)>& g) const {
        double s = std::sqrt(dd);
        double total = 0;
        for (double c : {alpha, -alpha}) {
            total += integrate_line([&](double x) { return g(c + s * x) * norm_pdf(x); }, tol);
        }
        return 0.5 * total;
    }
};

struct TFuncs {
    double alpha, dd;
    double p(double t) const { return norm_cdf(t); }
    double q(double t) const { return norm_cdf(-t); }
    double P1(double t) const { return 0.5 + 0.5 * std::tanh(alpha * t / dd); }
    double P0(double t) const { return 0.5 - 0.5 * std::tanh(alpha * t / dd); }
};

/// Everything that goes into the covariate moment matrices for one weight g(p).
struct BlockIntegrals {
    double A, B1, B0, C11, C10, C00;
};

BlockIntegrals block_integrals(const TExpectation& ex, const TFuncs& f,
                               const std::function<double(double)>& weight) {
    double a = f.alpha;
    BlockIntegrals r{};
    r.A = ex([&](double t) { return weight(t); });
    r.B1 = ex([&](double t) { return weight(t) * f.P1(t); });
    r.B0 = ex([&](double t) { return weight(t) * f.P0(t); });
    r.C11 = ex([&](double t) { return weight(t) * f.P1(t) * f.P0(t) * (t - a) * (t - a); });
    r.C10 = ex([&](double t) { return weight(t) * f.P1(t) * f.P0(t) * (t - a) * (t + a); });
    r.C00 = ex([&](double t) { return weight(t) * f.P1(t) * f.P0(t) * (t + a) * (t + a); });
    return r;
}

Eigen::Matrix3d block_matrix(const BlockIntegrals& r, const Eigen::Vector3d& d1,
                             const Eigen::Vector3d& d0, double dd) {
    Eigen::Matrix3d m = r.A * Eigen::Matrix3d::Identity();
    m -= (r.B1 / dd) * d1 * d1.transpose();
    m -= (r.B0 / dd) * d0 * d0.transpose();
    double dd2 = dd * dd;
    m += (r.C11 / dd2) * d1 * d1.transpose();
    m -= (r.C10 / dd2) * (d1 * d0.transpose() + d0 * d1.transpose());
    m += (r.C00 / dd2) * d0 * d0.transpose();
    return m;
}

/// v' G^{-1} v with G the Gram matrix of (delta1, delta0).
double span_norm2(double v1, double v0, double dd, double rho) {
    double det = 1 - rho * rho;
    if (det < 1e-12) return v1 * v1 / dd;
    return (v1 * v1 - 2 * rho * v1 * v0 + v0 * v0) / (dd * det);
}

}  // namespace

void ExampleParams::validate() const {
    auto bad = [&](const std::string& what) { throw DataError(what + " at " + describe()); };
    if (!std::isfinite(nu)) bad("nu must be finite");
    if (!(alpha > 0)) bad("alpha must be positive");
    if (!(dd > 0)) bad("delta'delta must be positive");
    if (!(std::abs(rho_delta) <= 1)) bad("rho_delta must lie in [-1, 1]");
    if (!(sigma1 > 0) || !(sigma0 > 0)) bad("sigma1 and sigma0 must be positive");
    if (!std::isfinite(mu1) || !std::isfinite(mu0)) bad("means must be finite");
    Eigen::Matrix3d s;
    s << 1, sigma1 * rho_D1, sigma0 * rho_D0, sigma1 * rho_D1, sigma1 * sigma1,
        sigma1 * sigma0 * rho_10, sigma0 * rho_D0, sigma1 * sigma0 * rho_10, sigma0 * sigma0;
    Eigen::LLT<Eigen::Matrix3d> llt(s);
    if (llt.info() != Eigen::Success) bad("Sigma is not positive definite");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s);
    if (es.eigenvalues()(0) <= 1e-12) bad("Sigma is not positive definite");
}

std::string ExampleParams::describe() const {
    std::ostringstream os;
    os << "(nu=" << nu << ", alpha=" << alpha << ", rho_delta=" << rho_delta << ", dd=" << dd << ")";
    return os.str();
}

// ---- propensity laws ------------------------------------------------------

double PscoreLaws::joint_t(double t, int z) const {
    return 0.5 * normal_pdf(t, z == 1 ? alpha : -alpha, dd);
}

double PscoreLaws::density_t(double t) const { return joint_t(t, 0) + joint_t(t, 1); }

double PscoreLaws::prob_z1_t(double t) const { return 0.5 + 0.5 * std::tanh(alpha * t / dd); }

double PscoreLaws::joint(double p, int z) const {
    if (!(p > 0 && p < 1)) return 0;
    double t = norm_quantile(p);
    return joint_t(t, z) / norm_pdf(t);
}

double PscoreLaws::density(double p) const {
    if (!(p > 0 && p < 1)) return 0;
    double t = norm_quantile(p);
    return density_t(t) / norm_pdf(t);
}

double PscoreLaws::prob_z1(double p) const { return prob_z1_t(norm_quantile(p)); }

PscoreLaws pscore_laws(const ExampleParams& params) {
    params.validate();
    return PscoreLaws{params.alpha, params.dd};
}

// ---- bias scalars ---------------------------------------------------------

double BiasScalars::Equality::max_gap() const {
    return std::max({std::abs(left - right), std::abs(left - formula), std::abs(right - formula)});
}

BiasScalars bias_scalars(const ExampleParams& params, const OracleOptions& opt) {
    params.validate();
    const double alpha = params.alpha, dd = params.dd, rho = params.rho_delta, nu = params.nu;
    const double dd2 = dd * dd;
    TExpectation ex{alpha, dd, opt.tol};
    TFuncs f{alpha, dd};
    BiasScalars s;

    auto p2 = [&](double t) { return f.p(t) * f.p(t); };
    auto pq = [&](double t) { return f.p(t) * f.q(t); };
    auto q2 = [&](double t) { return f.q(t) * f.q(t); };
    auto pp = [&](double t) { return f.p(t); };
    auto qq = [&](double t) { return f.q(t); };
    auto p1p0 = [&](double t) { return f.P1(t) * f.P0(t); };

    // Constants of the reduced system.
    BlockIntegrals I1 = block_integrals(ex, f, p2);
    BlockIntegrals I2 = block_integrals(ex, f, pq);
    s.a[0] = I1.A;
    s.a[1] = -I1.B1 / dd + I1.C11 / dd2;
    s.a[2] = -I1.B0 / dd + I1.C00 / dd2;
    s.a[3] = -I1.C10 / dd2;
    s.b[0] = I2.A;
    // t^2 + alpha^2 = ((t - a)^2 + (t + a)^2) / 2
    s.b[1] = -I2.B1 / dd + 0.5 * (I2.C11 + I2.C00) / dd2;
    s.b[2] = -I2.C10 / dd2;
    s.w1 = ex([&](double t) { return pp(t) * p1p0(t) * (t - alpha); }) / dd;
    s.w0 = -ex([&](double t) { return pp(t) * p1p0(t) * (t + alpha); }) / dd;

    const auto& a = s.a;
    const auto& b = s.b;
    double rdd = rho * dd;
    s.c0 = a[2] * rdd + a[3] * dd;
    s.c1 = a[0] + a[1] * dd + rdd * a[3];
    s.d0 = a[1] * rdd + a[3] * dd;
    s.d1 = a[0] + a[2] * dd + rdd * a[3];
    s.e0 = b[1] * rdd + b[2] * dd;
    s.e1 = b[0] + b[1] * dd + b[2] * rdd;

    Eigen::Matrix2d P;
    P << 0, 1, 1, 0;
    Eigen::Matrix2d E1, E2;
    E1 << s.c1, s.c0, s.e1, s.e0;
    E2 << s.e1, s.e0, s.d1, s.d0;
    s.E.topLeftCorner<2, 2>() = E1;
    s.E.topRightCorner<2, 2>() = E2;
    s.E.bottomLeftCorner<2, 2>() = P * E2 * P;
    s.E.bottomRightCorner<2, 2>() = P * E1 * P;
    s.cond_E = cond_number(s.E);
    if (!(s.cond_E <= opt.max_cond))
        throw NumericalError("moment system is ill-conditioned (cond " + fmt_double(s.cond_E) +
                             ") at " + params.describe());
    s.F = s.E.fullPivLu().inverse();

    double g1 = rho * s.c1 + s.c0, g2 = rho * s.e1 + s.e0, g3 = rho * s.c0 + s.c1;
    double g4 = rho * s.d0 + s.d1, g5 = rho * s.e0 + s.e1;
    Eigen::Matrix2d G1, G2;
    G1 << g1, g2, g2, g1;
    G2 << g4, g5, g5, g3;
    s.G.topLeftCorner<2, 2>() = G1;
    s.G.topRightCorner<2, 2>() = G2;
    s.G.bottomLeftCorner<2, 2>() = G2 * P;
    s.G.bottomRightCorner<2, 2>() = G1 * P;
    s.cond_G = cond_number(s.G);

    Eigen::Matrix4d R;
    R << dd, 0, rdd, 0, 0, dd, 0, rdd, rdd, 0, dd, 0, 0, rdd, 0, dd;
    s.M = s.F * R;

    auto fjk = [&](int j, int k) { return s.F(j - 1, k - 1); };
    double eq[8] = {
        fjk(1, 1) * dd + fjk(1, 3) * rdd,  fjk(2, 1) * rdd + fjk(2, 3) * dd,
        fjk(2, 1) * dd + fjk(2, 3) * rdd,  fjk(1, 1) * rdd + fjk(1, 3) * dd,
        fjk(1, 2) * dd + fjk(1, 4) * rdd,  fjk(2, 2) * rdd + fjk(2, 4) * dd,
        fjk(1, 2) * rdd + fjk(1, 4) * dd,  fjk(2, 2) * dd + fjk(2, 4) * rdd,
    };
    s.f_relation_gap1 = fjk(2, 1) + rho * fjk(2, 3) - (rho * fjk(1, 1) + fjk(1, 3));
    s.f_relation_gap2 = fjk(1, 2) + rho * fjk(1, 4) - (rho * fjk(2, 2) + fjk(2, 4));

    auto bias_row = [&](int r) {
        return -2 * (s.w1 * s.M(r, 0) + s.w0 * s.M(r, 2) + s.w1 * s.M(r, 3) + s.w0 * s.M(r, 1));
    };
    s.H1 = bias_row(0);
    s.H0 = bias_row(1);
    double h_0d1 = bias_row(2), h_0d0 = bias_row(3);
    s.t1d1 = s.H1 * nu;
    s.t1d0 = s.H0 * nu;
    s.t0d1 = h_0d1 * nu;
    s.t0d0 = h_0d0 * nu;
    s.th1th1 = span_norm2(s.t1d1, s.t1d0, dd, rho);
    s.th0th0 = span_norm2(s.t0d1, s.t0d0, dd, rho);

    // Direct route: explicit delta vectors and a numerically inverted 6x6 moment matrix.
    double sd = std::sqrt(dd);
    Eigen::Vector3d d1(sd, 0, 0);
    Eigen::Vector3d d0(sd * rho, sd * std::sqrt(std::max(0.0, 1 - rho * rho)), 0);
    BlockIntegrals I3 = block_integrals(ex, f, q2);
    Eigen::Matrix<double, 6, 6> Psi;
    Psi.topLeftCorner<3, 3>() = block_matrix(I1, d1, d0, dd);
    Psi.topRightCorner<3, 3>() = block_matrix(I2, d1, d0, dd);
    Psi.bottomLeftCorner<3, 3>() = Psi.topRightCorner<3, 3>().transpose();
    Psi.bottomRightCorner<3, 3>() = block_matrix(I3, d1, d0, dd);
    Eigen::Matrix<double, 6, 6> Om = Psi.fullPivLu().inverse();

    double up_m = ex([&](double t) { return pp(t) * p1p0(t) * (t - alpha); });
    double up_p = ex([&](double t) { return pp(t) * p1p0(t) * (t + alpha); });
    double lo_m = ex([&](double t) { return qq(t) * p1p0(t) * (t - alpha); });
    double lo_p = ex([&](double t) { return qq(t) * p1p0(t) * (t + alpha); });
    Eigen::Matrix<double, 6, 1> exz;
    exz.head<3>() = (up_m * d1 - up_p * d0) / dd;
    exz.tail<3>() = (lo_m * d1 - lo_p * d0) / dd;
    Eigen::Matrix<double, 6, 1> th = -(Om * exz) * (2 * nu);
    Eigen::Vector3d th1 = th.head<3>(), th0 = th.tail<3>();
    s.direct_t1d1 = th1.dot(d1);
    s.direct_t1d0 = th1.dot(d0);
    s.direct_t0d1 = th0.dot(d1);
    s.direct_t0d0 = th0.dot(d0);
    s.direct_th1th1 = th1.squaredNorm();
    s.direct_th0th0 = th0.squaredNorm();

    Eigen::Matrix3d O1 = Om.topLeftCorner<3, 3>(), O2 = Om.topRightCorner<3, 3>(),
                    O3 = Om.bottomRightCorner<3, 3>();
    auto q = [](const Eigen::Vector3d& x, const Eigen::Matrix3d& m, const Eigen::Vector3d& y) {
        return x.dot(m * y);
    };
    Eigen::Matrix3d O2t = O2.transpose();
    double left[8] = {q(d1, O1, d1), q(d0, O1, d0), q(d0, O1, d1), q(d1, O1, d0),
                      q(d1, O2, d1), q(d1, O2t, d1), q(d0, O2t, d1), q(d0, O2, d1)};
    double right[8] = {q(d0, O3, d0), q(d1, O3, d1), q(d1, O3, d0), q(d0, O3, d1),
                       q(d0, O2t, d0), q(d0, O2, d0), q(d1, O2, d0), q(d1, O2t, d0)};
    for (int i = 0; i < 8; ++i) s.equalities[i] = {left[i], right[i], eq[i]};
    return s;
}

// ---- subdensities ---------------------------------------------------------

namespace {

/// Residual given (t, z, d): u = m0 + b v + e with v = U_D ~ N(0,1) restricted to
/// v >= -t (d = 1) or v < -t (d = 0), and e ~ N(0, s2) independent of v.
struct ResidualLaw {
    double m0, b, s2;
};

ResidualLaw residual_law(const ExampleParams& pr, const BiasScalars& sc, double t, int z, int d) {
    double x = z == 1 ? t - pr.alpha : t + pr.alpha;
    double h = d == 1 ? (z == 1 ? sc.t1d1 : sc.t1d0) : (z == 1 ? sc.t0d1 : sc.t0d0);
    double thth = d == 1 ? sc.th1th1 : sc.th0th0;
    double mu = d == 1 ? pr.mu1 : pr.mu0;
    double sig = d == 1 ? pr.sigma1 : pr.sigma0;
    double rho = d == 1 ? pr.rho_D1 : pr.rho_D0;
    ResidualLaw r;
    r.m0 = (z == 1 ? pr.nu : -pr.nu) + mu + (h / pr.dd) * x;
    r.b = sig * rho;
    r.s2 = sig * sig * (1 - rho * rho) + std::max(0.0, thth - h * h / pr.dd);
    if (!(r.s2 > 0)) throw NumericalError("degenerate residual variance at " + pr.describe());
    return r;
}

double closed_form(const ResidualLaw& r, double u, double t, int d) {
    double V = r.b * r.b + r.s2;
    double cm = r.b * (u - r.m0) / V;
    double cs = std::sqrt(r.s2 / V);
    double tail = d == 1 ? norm_cdf((cm + t) / cs) : norm_cdf((-t - cm) / cs);
    return normal_pdf(u, r.m0, V) * tail;
}

/// Gauss-Legendre nodes on [lo, hi] split into equal panels.
void legendre_nodes(double lo, double hi, int panels, std::vector<double>& x, std::vector<double>& w) {
    using Rule = boost::math::quadrature::gauss<double, 20>;
    const auto& ab = Rule::abscissa();
    const auto& wt = Rule::weights();
    double h = (hi - lo) / panels;
    for (int k = 0; k < panels; ++k) {
        double c = lo + (k + 0.5) * h, r = 0.5 * h;
        for (std::size_t i = 0; i < ab.size(); ++i) {
            x.push_back(c - r * ab[i]);
            w.push_back(r * wt[i]);
            x.push_back(c + r * ab[i]);
            w.push_back(r * wt[i]);
        }
    }
}

double t_reach(const ExampleParams& pr) { return pr.alpha + 12 * std::sqrt(pr.dd); }

/// Pr(t in region, Z = z) in closed form.
double region_mass(const ExampleParams& pr, PRegion region, int z) {
    if (region == PRegion::all) return 0.5;
    double c = z == 1 ? pr.alpha : -pr.alpha;
    double below = norm_cdf(-c / std::sqrt(pr.dd));
    return 0.5 * (region == PRegion::below ? below : 1 - below);
}

}  // namespace

double residual_subdensity_t(const ExampleParams& params, const BiasScalars& sc, double u, double t,
                             int z, int d) {
    return closed_form(residual_law(params, sc, t, z, d), u, t, d);
}

double residual_subdensity(const ExampleParams& params, const BiasScalars& sc, double u, double p,
                           int z, int d) {
    if (!(p > 0 && p < 1)) throw DataError("propensity score must lie in (0, 1)");
    return residual_subdensity_t(params, sc, u, norm_quantile(p), z, d);
}

double residual_subdensity_quad(const ExampleParams& params, const BiasScalars& sc, double u,
                                double p, int z, int d) {
    double t = norm_quantile(p);
    ResidualLaw r = residual_law(params, sc, t, z, d);
    auto g = [&](double v) { return norm_pdf(v) * normal_pdf(u, r.m0 + r.b * v, r.s2); };
    double err = 0;
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double v = d == 1 ? GK::integrate(g, -t, kInf, 15, 1e-12, &err)
                      : GK::integrate(g, -kInf, -t, 15, 1e-12, &err);
    return v;
}

double region_subdensity(const ExampleParams& params, const BiasScalars& sc, double u,
                         PRegion region, int z, int d) {
    PscoreLaws laws{params.alpha, params.dd};
    double L = t_reach(params);
    double lo = region == PRegion::above ? 0.0 : -L;
    double hi = region == PRegion::below ? 0.0 : L;
    std::vector<double> x, w;
    legendre_nodes(lo, hi, region == PRegion::all ? 64 : 32, x, w);
    double num = 0, den = 0;
    for (int zz = 0; zz < 2; ++zz) {
        if (z >= 0 && zz != z) continue;
        for (std::size_t i = 0; i < x.size(); ++i)
            num += w[i] * laws.joint_t(x[i], zz) * residual_subdensity_t(params, sc, u, x[i], zz, d);
        den += region_mass(params, region, zz);
    }
    return num / den;
}

// ---- violation map --------------------------------------------------------

std::string to_string(RegionClass c) {
    switch (c) {
        case RegionClass::distilled_above_nesting: return "distilled>nesting>=0";
        case RegionClass::distilled_only: return "distilled>0>nesting";
        case RegionClass::other: return "other";
    }
    return "other";
}

RegionClass classify(double nesting, double distilled) {
    if (distilled > nesting && nesting >= 0) return RegionClass::distilled_above_nesting;
    if (distilled > 0 && nesting < 0) return RegionClass::distilled_only;
    return RegionClass::other;
}

namespace {

struct Subarray {
    double value;
    std::size_t lo, hi;
};

/// Largest sum over nonempty runs of consecutive cells.
Subarray max_subarray(const std::vector<double>& v) {
    Subarray best{v[0], 0, 0};
    double run = v[0];
    std::size_t start = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (run < 0) {
            run = v[i];
            start = i;
        } else {
            run += v[i];
        }
        if (run > best.value) best = {run, start, i};
    }
    return best;
}

}  // namespace

ViolationPair violation_at(const ExampleParams& params, const ViolationOptions& opt) {
    if (opt.u_points < 2 || opt.t_panels < 1 || !(opt.u_span_sd > 0))
        throw std::invalid_argument("violation grid settings must be positive");
    BiasScalars sc = bias_scalars(params, opt.oracle);
    PscoreLaws laws{params.alpha, params.dd};

    double sd = std::sqrt(params.sigma1 * params.sigma1 + sc.th1th1 + params.nu * params.nu);
    double ulo = params.mu1 - opt.u_span_sd * sd, uhi = params.mu1 + opt.u_span_sd * sd;
    const std::size_t nu_pts = static_cast<std::size_t>(opt.u_points);
    double du = (uhi - ulo) / static_cast<double>(nu_pts - 1);
    std::vector<double> u(nu_pts);
    for (std::size_t k = 0; k < nu_pts; ++k) u[k] = ulo + du * static_cast<double>(k);

    double L = t_reach(params);
    std::vector<double> xb, wb, xa, wa;
    legendre_nodes(-L, 0.0, opt.t_panels, xb, wb);
    legendre_nodes(0.0, L, opt.t_panels, xa, wa);

    std::vector<double> below(nu_pts, 0.0), above(nu_pts, 0.0), z0(nu_pts, 0.0), z1(nu_pts, 0.0);
    auto accumulate = [&](const std::vector<double>& x, const std::vector<double>& w,
                          std::vector<double>& side) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double t = x[i];
            double j1 = w[i] * laws.joint_t(t, 1), j0 = w[i] * laws.joint_t(t, 0);
            ResidualLaw r1 = residual_law(params, sc, t, 1, 1);
            ResidualLaw r0 = residual_law(params, sc, t, 0, 1);
            for (std::size_t k = 0; k < nu_pts; ++k) {
                double f1 = j1 * closed_form(r1, u[k], t, 1);
                double f0 = j0 * closed_form(r0, u[k], t, 1);
                side[k] += f1 + f0;
                z1[k] += f1;
                z0[k] += f0;
            }
        }
    };
    accumulate(xb, wb, below);
    accumulate(xa, wa, above);

    double mb = region_mass(params, PRegion::below, 0) + region_mass(params, PRegion::below, 1);
    double ma = region_mass(params, PRegion::above, 0) + region_mass(params, PRegion::above, 1);
    std::vector<double> nest(nu_pts), dist(nu_pts);
    for (std::size_t k = 0; k < nu_pts; ++k) {
        nest[k] = (below[k] / mb - above[k] / ma) * du;
        dist[k] = (z0[k] - z1[k]) / 0.5 * du;
    }
    Subarray n = max_subarray(nest), d = max_subarray(dist);

    ViolationPair out;
    out.rho_delta = params.rho_delta;
    out.dd = params.dd;
    out.H1 = sc.H1;
    out.H0 = sc.H0;
    out.nesting = n.value;
    out.distilled = d.value;
    out.nesting_lo = u[n.lo] - 0.5 * du;
    out.nesting_hi = u[n.hi] + 0.5 * du;
    out.distilled_lo = u[d.lo] - 0.5 * du;
    out.distilled_hi = u[d.hi] + 0.5 * du;
    out.region = classify(out.nesting, out.distilled);
    return out;
}

namespace {

std::vector<double> steps(int lo_k, int hi_k, double unit) {
    std::vector<double> v;
    for (int k = lo_k; k <= hi_k; ++k) v.push_back(k * unit);
    return v;
}

}  // namespace

OracleGrid default_grid() { return {steps(-19, 19, 0.05), steps(1, 40, 0.1)}; }

OracleGrid coarse_grid() { return {steps(-3, 3, 0.3), {0.5, 1.0, 2.0, 3.0, 4.0}}; }

std::vector<ViolationPair> violation_map(const ExampleParams& base, const OracleGrid& grid,
                                         const ViolationOptions& opt, int threads) {
    std::size_t nd = grid.dd.size();
    std::vector<ViolationPair> out(grid.rho.size() * nd);
    parallel_for(out.size(), threads, [&](std::size_t i) {
        ExampleParams p = base;
        p.rho_delta = grid.rho[i / nd];
        p.dd = grid.dd[i % nd];
        out[i] = violation_at(p, opt);
    });
    return out;
}

std::string violation_csv(const std::vector<ViolationPair>& rows) {
    std::ostringstream os;
    os << "rho_delta,dd,H1,H0,nesting,distilled,distilled_minus_nesting,nesting_lo,nesting_hi,"
          "distilled_lo,distilled_hi,region\n";
    for (const auto& r : rows) {
        os << fmt_double(r.rho_delta) << ',' << fmt_double(r.dd) << ',' << fmt_double(r.H1) << ','
           << fmt_double(r.H0) << ',' << fmt_double(r.nesting) << ',' << fmt_double(r.distilled)
           << ',' << fmt_double(r.distilled - r.nesting) << ',' << fmt_double(r.nesting_lo) << ','
           << fmt_double(r.nesting_hi) << ',' << fmt_double(r.distilled_lo) << ','
           << fmt_double(r.distilled_hi) << ',' << to_string(r.region) << '\n';
    }
    return os.str();
}

}  // namespace ivv
