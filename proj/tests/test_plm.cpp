#include "fixtures.hpp"
#include "ivv/mcstudy.hpp"
#include "ivv/plm.hpp"
#include "ivv/propensity.hpp"

#include <doctest.h>

#include <cmath>

using namespace ivv;

namespace {

PropensityDesign main_effects() {
    PropensityDesign d;
    d.interactions = false;
    return d;
}

// Simulation design with a relevant instrument: alpha0 = 0, alpha1 = 1.
Dataset valid_instrument_sample(std::size_t n, std::uint64_t seed, DgpParams* out = nullptr) {
    DgpSpec spec;
    spec.kind = DgpKind::size;
    spec.n = n;
    Rng rng(seed);
    auto params = draw_params(spec, rng);
    params.alpha0 = 0.0;
    params.alpha1 = 1.0;
    if (out) *out = params;
    return draw_sample(spec, params, rng);
}

double sup_diff(const Vec& a, const Vec& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("noise-free outcome is recovered exactly") {
    Rng rng(1);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.05, 0.95);
    const int n = 200;
    Mat x(n, 2);
    Vec p(n), y(n);
    Vec theta(2);
    theta << 1.5, -0.75;
    std::vector<int> d(n, 1);
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) {
        p(i) = ud(rng);
        x(i, 0) = nd(rng) + p(i);
        x(i, 1) = nd(rng);
        y(i) = x.row(i).dot(theta);
        z[i] = i % 2;
    }
    std::vector<std::string> sink;
    auto ds = make_dataset(y, d, x, z, Vec(), &sink);
    ds.x_names = {"x1", "x2"};

    SUBCASE("nonparametric, shared bandwidth") {
        PlmOptions opt;
        opt.bw_y.fixed = opt.bw_x.fixed = 0.1;
        auto fit = fit_plm(ds, p, opt);
        CHECK(sup_diff(fit.theta1, theta) < 1e-8);
        auto res = residuals(ds, p, fit);
        CHECK(res.u.cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("cubic phi") {
        PlmOptions opt;
        opt.phi = parse_phi("poly:3");
        auto fit = fit_plm(ds, p, opt);
        CHECK(sup_diff(fit.theta1, theta) < 1e-8);
    }
    SUBCASE("common slopes") {
        PlmOptions opt;
        opt.common_slopes = true;
        opt.bw_y.fixed = opt.bw_x.fixed = 0.2;
        auto fit = fit_plm(ds, p, opt);
        CHECK(sup_diff(fit.theta1, theta) < 1e-8);
        CHECK(fit.theta0 == fit.theta1);
    }
}

TEST_CASE("valid instrument simulation recovers both slope vectors") {
    DgpParams params;
    auto ds = valid_instrument_sample(5000, 17, &params);
    auto pfit = fit_probit(ds, main_effects());
    auto fit = fit_plm(ds, pfit);
    INFO("theta = ", params.theta.transpose(), "  theta1 = ", fit.theta1.transpose(), "  theta0 = ",
         fit.theta0.transpose());
    // The process has one slope vector; arm-specific slopes are estimated with more noise.
    CHECK(sup_diff(fit.theta1, params.theta) < 0.2);
    CHECK(sup_diff(fit.theta0, params.theta) < 0.2);
    CHECK(instrument_relevance(pfit).p_value < 1e-6);

    PlmOptions common;
    common.common_slopes = true;
    auto pooled = fit_plm(ds, pfit, common);
    CHECK(sup_diff(pooled.theta1, params.theta) < 0.1);

    SUBCASE("nonparametric and cubic phi agree") {
        PlmOptions opt = common;
        opt.phi = parse_phi("poly:3");
        auto poly = fit_plm(ds, pfit, opt);
        CHECK(sup_diff(poly.theta1, pooled.theta1) < 0.05);
    }
}

TEST_CASE("irrelevant instrument logs the collinear direction") {
    DgpSpec spec;
    spec.kind = DgpKind::size;
    spec.n = 1000;
    Rng rng(23);
    auto params = draw_params(spec, rng);
    auto ds = draw_sample(spec, params, rng);
    auto pfit = fit_probit(ds, main_effects());
    auto rel = instrument_relevance(pfit);
    CHECK(rel.df == 1);
    auto fit = fit_plm(ds, pfit);
    if (rel.p_value > 0.05) CHECK_FALSE(fit.log.empty());
    CHECK(rel.p_value > 0.05);
    auto res = residuals(ds, pfit.fitted, fit);
    CHECK(res.u.allFinite());
}

TEST_CASE("residual arithmetic") {
    Vec y(2);
    y << 3.0, 5.0;
    Mat x(2, 2);
    x << 1.0, 2.0, 0.0, 0.0;
    auto ds = make_dataset(y, {1, 0}, x, {0, 1});
    PartialLinearFit fit;
    fit.theta1 = Vec(2);
    fit.theta1 << 1.0, 0.5;
    fit.theta0 = Vec::Constant(2, 7.0);
    auto res = residuals(ds, Vec::Constant(2, 0.5), fit);
    CHECK(res.u(0) == 1.0);
    CHECK(res.u(1) == 5.0);  // x = 0 row keeps y

    fit.theta1.setZero();
    fit.theta0.setZero();
    res = residuals(ds, Vec::Constant(2, 0.5), fit);
    CHECK(res.u == y);
}

TEST_CASE("residuals do not move when the outcome is shifted") {
    auto ds = valid_instrument_sample(800, 5);
    auto pfit = fit_probit(ds, main_effects());
    auto base = residuals(ds, pfit.fitted, fit_plm(ds, pfit));
    auto shifted = ds;
    shifted.y.array() += 12.5;
    auto other = residuals(shifted, pfit.fitted, fit_plm(shifted, pfit));
    CHECK(sup_diff(other.u.array() - 12.5, base.u) < 1e-8);
}

TEST_CASE("regression residuals are orthogonal to the design") {
    auto ds = valid_instrument_sample(1000, 9);
    ds.w = Vec::LinSpaced(1000, 0.5, 2.0);
    auto pfit = fit_probit(ds, main_effects());
    const Vec& p = pfit.fitted;
    PlmOptions opt;
    opt.phi = parse_phi("poly:3");
    auto fit = fit_plm(ds, p, opt);
    const Eigen::Index k = ds.k();
    Mat A(1000, 4 + 2 * k);
    for (int r = 0; r <= 3; ++r) A.col(r) = p.array().pow(r).matrix();
    A.middleCols(4, k) = p.asDiagonal() * ds.x;
    A.rightCols(k) = (1.0 - p.array()).matrix().asDiagonal() * ds.x;
    Vec coef(4 + 2 * k);
    coef << fit.poly_coeffs, fit.theta1, fit.theta0;
    const Vec e = ds.y - A * coef;
    const Vec score = A.transpose() * ds.w.asDiagonal() * e;
    CHECK(score.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.residual_variance == doctest::Approx(e.array().square().matrix().dot(ds.w) / ds.w.sum()));
}

TEST_CASE("pseudo-inverse drops an exactly repeated column") {
    Rng rng(2);
    std::normal_distribution<double> nd;
    Mat A(50, 3);
    Vec y(50);
    for (int i = 0; i < 50; ++i) {
        A(i, 0) = nd(rng);
        A(i, 1) = nd(rng);
        A(i, 2) = A(i, 0);
        y(i) = 2.0 * A(i, 0) - A(i, 1);
    }
    int rank = 0;
    std::vector<double> ratios;
    std::vector<std::string> log;
    Vec b = pinv_wls(A, y, Vec::Ones(50), 1e-10, 1e-3, &rank, &ratios, &log);
    CHECK(rank == 2);
    CHECK(log.size() == 1);
    // Minimum-norm solution splits the repeated coefficient evenly.
    CHECK(b(0) == doctest::Approx(1.0));
    CHECK(b(2) == doctest::Approx(1.0));
    CHECK(b(1) == doctest::Approx(-1.0));
}

TEST_CASE("phi mode parsing") {
    CHECK(parse_phi("nonparametric").kind == PhiMode::nonparametric);
    CHECK(parse_phi("poly:2").degree == 2);
    CHECK(to_string(parse_phi("poly:3")) == "poly:3");
    CHECK_THROWS_AS(parse_phi("poly:x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_phi("spline"), std::invalid_argument);
}
