#pragma once

#include "ivv/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace ivv {

/// Example process with a direct instrument effect nu:
///   Y = nu(2Z-1) + D(X'theta1 + U1) + (1-D)(X'theta0 + U0),
///   D = 1{Z(X'delta1 + alpha) + (1-Z)(X'delta0 - alpha) + U_D >= 0},
///   Pr(Z=1) = 1/2, X ~ N(0, I), (U_D, U1, U0) ~ N((0, mu1, mu0), Sigma).
struct ExampleParams {
    double nu = 0.2;
    double alpha = 0.3;
    double dd = 1.0;         // delta1'delta1 = delta0'delta0
    double rho_delta = 0.0;  // delta0'delta1 / dd
    double mu1 = 0.3;
    double mu0 = 0.0;
    double sigma1 = 1.0;
    double sigma0 = 1.0;
    double rho_D1 = 0.3;
    double rho_D0 = 0.2;
    double rho_10 = 0.1;

    /// Throws DataError on out-of-range values or a non positive definite Sigma.
    void validate() const;
    std::string describe() const;
};

/// Propensity-score laws of the example process, parameterized through t = Phi^{-1}(p).
/// Given Z=1, t ~ N(alpha, dd); given Z=0, t ~ N(-alpha, dd).
struct PscoreLaws {
    double alpha = 0.3;
    double dd = 1.0;

    /// Density of p jointly with Z=z (integrates to 1/2 for each z).
    double joint(double p, int z) const;
    /// Marginal density of p.
    double density(double p) const;
    /// Pr(Z=1 | p).
    double prob_z1(double p) const;

    // Same quantities in t.
    double joint_t(double t, int z) const;
    double density_t(double t) const;
    double prob_z1_t(double t) const;
};

PscoreLaws pscore_laws(const ExampleParams& params);

/// Scalar products of the asymptotic coefficient bias with delta0/delta1.
/// Sign: theta~ = theta - plim theta_hat, so that the residual carries +X'theta~.
struct BiasScalars {
    double t1d1 = 0, t1d0 = 0, t0d0 = 0, t0d1 = 0;
    double H1 = 0, H0 = 0;  // t1d1 / nu, t1d0 / nu (0 when nu = 0)
    double th1th1 = 0, th0th0 = 0;  // theta~'theta~ per arm

    double w1 = 0, w0 = 0;
    std::array<double, 4> a{};
    std::array<double, 3> b{};
    double c0 = 0, c1 = 0, d0 = 0, d1 = 0, e0 = 0, e1 = 0;

    Eigen::Matrix4d E = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d F = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d G = Eigen::Matrix4d::Zero();
    double cond_E = 0, cond_G = 0;

    /// delta_i' Omega_k delta_j products laid out as in the E system:
    /// rows (d1 O1 | d0 O1 | d1 O2' | d0 O2'), cols (.d1 | O2 .d1 | .d0 | O2 .d0).
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();

    /// Scalars computed directly from an explicit covariate representation
    /// (6x6 second-moment matrix, inverted numerically).
    double direct_t1d1 = 0, direct_t1d0 = 0, direct_t0d0 = 0, direct_t0d1 = 0;
    double direct_th1th1 = 0, direct_th0th0 = 0;

    struct Equality {
        double left = 0;     // first quadratic form, explicit inverse
        double right = 0;    // second quadratic form, explicit inverse
        double formula = 0;  // from F and (rho, dd)
        double max_gap() const;
    };
    std::array<Equality, 8> equalities{};

    /// f21 + rho f23 - (rho f11 + f13) and f12 + rho f14 - (rho f22 + f24).
    double f_relation_gap1 = 0, f_relation_gap2 = 0;
};

struct OracleOptions {
    double tol = 1e-12;      // relative tolerance of the adaptive quadrature
    double max_cond = 1e12;  // reject ill-conditioned E above this
};

/// Throws NumericalError when E is ill-conditioned at this parameter point.
BiasScalars bias_scalars(const ExampleParams& params, const OracleOptions& opt = {});

/// Subdensity of (U = u, D = d) given (p, Z = z), in closed form.
double residual_subdensity(const ExampleParams& params, const BiasScalars& sc, double u,
                           double p, int z, int d);
/// Same as residual_subdensity but parameterized by t = Phi^{-1}(p).
double residual_subdensity_t(const ExampleParams& params, const BiasScalars& sc, double u,
                             double t, int z, int d);
/// Reference version integrating over U_D numerically.
double residual_subdensity_quad(const ExampleParams& params, const BiasScalars& sc, double u,
                                double p, int z, int d);

/// Conditioning sets for region subdensities. Below/above split at the
/// median propensity score (p = 1/2 for this process).
enum class PRegion { below, above, all };

/// Subdensity of (U = u, D = d) given p in the region and Z = z (z = -1 pools both).
double region_subdensity(const ExampleParams& params, const BiasScalars& sc, double u,
                         PRegion region, int z, int d);

enum class RegionClass { distilled_above_nesting, distilled_only, other };
std::string to_string(RegionClass c);

struct ViolationPair {
    double rho_delta = 0, dd = 0;
    double H1 = 0, H0 = 0;
    double nesting = 0;    // max over intervals of the below-minus-above median comparison
    double distilled = 0;  // max over intervals of the Z=0 minus Z=1 comparison
    double nesting_lo = 0, nesting_hi = 0;
    double distilled_lo = 0, distilled_hi = 0;
    RegionClass region = RegionClass::other;
};

RegionClass classify(double nesting, double distilled);

struct ViolationOptions {
    int u_points = 400;
    double u_span_sd = 6.0;
    int t_panels = 16;  // Gauss-Legendre panels per half line in t
    OracleOptions oracle;
};

/// Nesting and distilled violations at one parameter point.
ViolationPair violation_at(const ExampleParams& params, const ViolationOptions& opt = {});

struct OracleGrid {
    std::vector<double> rho;
    std::vector<double> dd;
};

/// rho in [-0.95, 0.95] step 0.05, dd in [0.1, 4] step 0.1.
OracleGrid default_grid();
/// rho in [-0.9, 0.9] step 0.3, dd in {0.5, 1, 2, 3, 4}.
OracleGrid coarse_grid();

/// Evaluates every (rho, dd) point with the other parameters taken from `base`.
/// Output is ordered rho-major regardless of thread count.
std::vector<ViolationPair> violation_map(const ExampleParams& base, const OracleGrid& grid,
                                         const ViolationOptions& opt = {}, int threads = 1);

std::string violation_csv(const std::vector<ViolationPair>& rows);

}  // namespace ivv
