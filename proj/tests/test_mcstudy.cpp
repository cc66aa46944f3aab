#include "ivv/mcstudy.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace ivv;

namespace {

Dataset sample(DgpKind kind, std::size_t n, GammaMode gamma, std::uint64_t seed, DgpParams* out = nullptr,
               std::vector<int>* mu = nullptr) {
    DgpSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.gamma = gamma;
    Rng rng = substream(seed, {0});
    const DgpParams par = draw_params(spec, rng);
    if (out) *out = par;
    return draw_sample(spec, par, rng, mu);
}

double corr(const Vec& a, const Vec& b) {
    const Vec ca = a.array() - a.mean(), cb = b.array() - b.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

Vec zvec(const Dataset& ds) {
    Vec z(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) z[static_cast<Eigen::Index>(i)] = ds.z[i];
    return z;
}

double treated_share(const Dataset& ds, int level) {
    double t = 0, c = 0;
    for (std::size_t i = 0; i < ds.n(); ++i)
        if (ds.z[i] == level) {
            c += 1;
            t += ds.d[i];
        }
    return t / c;
}

StudyConfig small_study(int reps) {
    StudyConfig cfg;
    cfg.reps = reps;
    cfg.test.n_boot = 30;
    cfg.test.seed = 99;
    return cfg;
}

}  // namespace

TEST_CASE("size process: exogenous instrument without a first stage") {
    DgpParams par;
    const Dataset ds = sample(DgpKind::size, 10000, GammaMode::zero, 1, &par);
    CHECK(par.alpha0 == 0.0);
    CHECK(par.alpha1 == 0.0);
    CHECK(par.gamma.isZero());
    for (int j = 0; j < 3; ++j) CHECK(std::abs(corr(zvec(ds), ds.x.col(j))) < 0.05);
    CHECK(std::abs(treated_share(ds, 1) - treated_share(ds, 0)) < 0.04);
    CHECK(ds.x_names == std::vector<std::string>{"x1", "x2", "x3"});
}

TEST_CASE("uniform gamma links the instrument to covariates") {
    DgpParams par;
    const Dataset ds = sample(DgpKind::size, 10000, GammaMode::uniform, 2, &par);
    int j = 0;
    par.gamma.cwiseAbs().maxCoeff(&j);
    CHECK(std::abs(corr(zvec(ds), ds.x.col(j))) > 0.1);
}

TEST_CASE("power processes have a first stage") {
    for (DgpKind k : {DgpKind::power1, DgpKind::power2, DgpKind::power3, DgpKind::power4}) {
        DgpParams par;
        const Dataset ds = sample(k, 50000, GammaMode::zero, 3, &par);
        CHECK(par.alpha1 > par.alpha0);
        CHECK(treated_share(ds, 1) - treated_share(ds, 0) > 0.02);
    }
}

TEST_CASE("mixture locations of the fourth process have the stated frequencies") {
    std::vector<int> mu;
    const std::size_t n = 40000;
    sample(DgpKind::power4, n, GammaMode::zero, 4, nullptr, &mu);
    const double prob[5] = {0.15, 0.20, 0.30, 0.20, 0.15};
    for (int l = 0; l < 5; ++l) {
        const double f = static_cast<double>(std::count(mu.begin(), mu.end(), l)) / n;
        CHECK(std::abs(f - prob[l]) < 3.0 * std::sqrt(prob[l] * (1 - prob[l]) / n));
    }
}

TEST_CASE("one replication gives a degenerate rate with zero standard error") {
    DgpSpec spec;
    spec.n = 200;
    const RejectionTable t = rejection_study({spec}, {Method::proposed, Method::no_covariates, Method::binarized},
                                            small_study(1));
    CHECK(t.rows.size() == 9);
    CHECK(t.log.size() == 3);
    for (const auto& r : t.rows) {
        CHECK(r.reps + r.failed == 1);
        if (r.reps == 1) {
            CHECK((r.rate == 0.0 || r.rate == 1.0));
            CHECK(r.se == 0.0);
        }
    }
    const RejectionRow* row = t.find("size", 200, "binarized", "overall", 0.05);
    REQUIRE(row != nullptr);
    CHECK(row->method == "binarized");
    CHECK(t.find("size", 200, "binarized", "nesting", 0.05) == nullptr);
    CHECK(t.to_csv().rfind("dgp,gamma,delta,n,method,component,xi,level,rate,se,reps,failed\n", 0) == 0);
}

TEST_CASE("component study reports nesting, index and overall rows") {
    DgpSpec spec;
    spec.kind = DgpKind::power2;
    spec.n = 300;
    StudyConfig cfg = small_study(2);
    cfg.levels = {0.05};
    const RejectionTable t = component_study({spec}, cfg);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].component == "nesting");
    CHECK(t.rows[1].component == "index");
    CHECK(t.rows[2].component == "overall");
}

TEST_CASE("studies are identical across thread counts") {
    DgpSpec spec;
    spec.kind = DgpKind::power1;
    spec.n = 250;
    StudyConfig one = small_study(4), three = small_study(4);
    three.threads = 3;
    const std::vector<Method> methods{Method::proposed, Method::no_covariates};
    const RejectionTable a = rejection_study({spec}, methods, one);
    const RejectionTable b = rejection_study({spec}, methods, three);
    CHECK(a.to_csv() == b.to_csv());
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].p_overall == b.log[i].p_overall);
}

TEST_CASE("invalid study settings are rejected") {
    DgpSpec spec;
    StudyConfig cfg = small_study(0);
    CHECK_THROWS_AS(rejection_study({spec}, {Method::proposed}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(parse_dgp("power9"), std::invalid_argument);
    CHECK(parse_dgp("dgp3") == DgpKind::power3);
    CHECK(parse_delta("0.1") == DeltaMode::narrow);
}
