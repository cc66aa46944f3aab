#include "ivv/moments.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace ivv;
using oracles::Oracle;

namespace {

MomentInput random_input(Rng& rng, std::size_t n, bool ties, bool weighted) {
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    MomentInput in;
    for (std::size_t i = 0; i < n; ++i) {
        double u = nd(rng);
        if (ties) u = std::round(u * 4.0) / 4.0;
        in.u.push_back(u);
        in.w.push_back(weighted ? 0.2 + 2.0 * ud(rng) : 1.0);
        in.d.push_back(ud(rng) < 0.5);
        in.group.push_back(i < 2 ? static_cast<int>(i) : ud(rng) < 0.5);
        in.s1.push_back(ud(rng) < 0.8);
        in.s2.push_back(ud(rng) < 0.7);
        in.pz.push_back(0.2 + 0.6 * ud(rng));
        in.obs.push_back(i);
    }
    in.lambda0 = 0.3 + 0.4 * ud(rng);
    in.lambda1 = 1.0 - in.lambda0;
    return in;
}

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("prefix-sum sup matches brute force over every interval") {
    int checked = 0;
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
        Rng rng = substream(101, {rep});
        const std::size_t n = 4 + rep % 37;
        const MomentInput in = random_input(rng, n, rep % 3 == 0, rep % 2 == 0);
        const S2Share share = rep % 4 == 1 ? S2Share::by_instrument : S2Share::pooled;
        const double xi = rep % 5 == 0 ? 0.01 : 0.2179;
        const Oracle orc{in, share, xi};
        const PairStatistic st = statistic(build_tables(in, xi, 2000, share));
        REQUIRE(st.nesting_available == orc.active(0));
        REQUIRE(st.index_available == orc.active(2));
        if (st.nesting_available) {
            CHECK(close(st.nesting.value, orc.sup(true)));
            const int s = st.nesting.d == 1 ? 0 : 1;
            CHECK(close(orc.value(s, st.nesting.lo, st.nesting.hi), st.nesting.value));
            ++checked;
        }
        if (st.index_available) {
            CHECK(close(st.index.value, orc.sup(false)));
            const int s = st.index.d == 1 ? 2 : 3;
            CHECK(close(st.index.sign * orc.value(s, st.index.lo, st.index.hi), st.index.value));
            ++checked;
        }
    }
    CHECK(checked > 300);
}

TEST_CASE("bootstrap draws match brute force with and without recentring") {
    for (std::uint64_t rep = 0; rep < 40; ++rep) {
        Rng rng = substream(202, {rep});
        const MomentInput in = random_input(rng, 5 + rep % 25, rep % 2 == 0, rep % 3 == 0);
        const Oracle orc{in, S2Share::pooled, 0.2179};
        const MomentTables t = build_tables(in, 0.2179, 2000, S2Share::pooled);
        const std::vector<double> mult = draw_multipliers(Multiplier::gaussian, in.u.size(), rng);
        for (bool recenter : {false, true}) {
            const PairBootstrap b = bootstrap_draw(t, mult, recenter);
            if (orc.active(0)) CHECK(close(b.nesting, orc.sup(true, mult, recenter)));
            if (orc.active(2)) CHECK(close(b.index, orc.sup(false, mult, recenter)));
        }
    }
}

TEST_CASE("exchangeable groups give a zero statistic") {
    Rng rng = substream(303, {0});
    MomentInput half = random_input(rng, 30, false, true);
    MomentInput in;
    for (std::size_t i = 0; i < half.u.size(); ++i)
        for (int g = 0; g < 2; ++g) {
            in.u.push_back(half.u[i]);
            in.w.push_back(half.w[i]);
            in.d.push_back(half.d[i]);
            in.group.push_back(g);
            in.s1.push_back(half.s1[i]);
            in.s2.push_back(half.s2[i]);
            in.pz.push_back(half.pz[i]);
            in.obs.push_back(in.obs.size());
        }
    const PairStatistic st = statistic(build_tables(in, 0.2179, 2000, S2Share::pooled));
    REQUIRE(st.nesting_available);
    REQUIRE(st.index_available);
    CHECK(std::abs(st.nesting.value) < 1e-14);
    CHECK(std::abs(st.index.value) < 1e-14);
}

TEST_CASE("a mass excess in the upper tail of Z=0 is located there") {
    Rng rng = substream(404, {0});
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    MomentInput in;
    for (std::size_t i = 0; i < 300; ++i) {
        const int g = i % 2;
        double u = ud(rng);
        if (g == 0 && i % 4 == 0) u += 2.0;
        in.u.push_back(u);
        in.w.push_back(1.0);
        in.d.push_back(1);
        in.group.push_back(g);
        in.s1.push_back(1);
        in.s2.push_back(1);
        in.pz.push_back(0.5);
        in.obs.push_back(i);
    }
    const PairStatistic st = statistic(build_tables(in, 0.2179, 2000, S2Share::pooled));
    REQUIRE(st.nesting_available);
    CHECK(st.nesting.d == 1);
    CHECK(st.nesting.lo > 0.95);
    CHECK(st.nesting.hi > 2.9);
    CHECK(st.nesting.value > 3.0);
}

TEST_CASE("multipliers have mean 0 and variance 1") {
    for (Multiplier m : {Multiplier::gaussian, Multiplier::rademacher, Multiplier::mammen}) {
        Rng rng = substream(505, {static_cast<std::uint64_t>(m)});
        const auto v = draw_multipliers(m, 200000, rng);
        double s = 0, q = 0;
        for (double x : v) {
            s += x;
            q += x * x;
        }
        const double mean = s / v.size();
        CHECK(std::abs(mean) < 0.01);
        CHECK(std::abs(q / v.size() - mean * mean - 1.0) < 0.015);
    }
    Rng rng = substream(505, {9});
    for (double x : draw_multipliers(Multiplier::zero, 50, rng)) CHECK(x == 0.0);
    CHECK(parse_multiplier("mammen") == Multiplier::mammen);
    CHECK_THROWS_AS(parse_multiplier("poisson"), std::invalid_argument);
}

TEST_CASE("zero multipliers give zero bootstrap draws") {
    Rng rng = substream(606, {0});
    const MomentInput in = random_input(rng, 40, false, true);
    const MomentTables t = build_tables(in, 0.2179, 2000, S2Share::pooled);
    const std::vector<double> zero(in.u.size(), 0.0);
    for (bool recenter : {false, true}) {
        const PairBootstrap b = bootstrap_draw(t, zero, recenter);
        CHECK(b.nesting == 0.0);
        CHECK(b.index == 0.0);
    }
}

TEST_CASE("rescaling all weights leaves the statistic unchanged") {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        Rng rng = substream(707, {rep});
        MomentInput in = random_input(rng, 40, false, true);
        const PairStatistic a = statistic(build_tables(in, 0.2179, 2000, S2Share::pooled));
        for (auto& w : in.w) w *= 3.7;
        const PairStatistic b = statistic(build_tables(in, 0.2179, 2000, S2Share::pooled));
        CHECK(close(a.nesting.value, b.nesting.value, 1e-10));
        CHECK(close(a.index.value, b.index.value, 1e-10));
    }
}

TEST_CASE("a positive statistic does not increase with the variance floor") {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        Rng rng = substream(808, {rep});
        const MomentInput in = random_input(rng, 40, false, false);
        double prev = INFINITY;
        for (double xi : {0.01, 0.05, 0.1, 0.2179, 0.5, 1.0}) {
            const double v = statistic(build_tables(in, xi, 2000, S2Share::pooled)).index.value;
            REQUIRE(v >= 0.0);
            CHECK(v <= prev * (1 + 1e-12));
            prev = v;
        }
    }
    Rng rng = substream(808, {99});
    CHECK_THROWS_AS(build_tables(random_input(rng, 10, false, false), 0.0, 2000, S2Share::pooled),
                    std::invalid_argument);
}

TEST_CASE("endpoint thinning keeps the extremes and respects the cap") {
    Rng rng = substream(909, {0});
    const MomentInput in = random_input(rng, 100, false, false);
    const MomentTables t = build_tables(in, 0.2179, 10, S2Share::pooled);
    CHECK(t.m <= 10);
    CHECK(t.endpoints.front() == *std::min_element(in.u.begin(), in.u.end()));
    CHECK(t.endpoints.back() == *std::max_element(in.u.begin(), in.u.end()));
    const PairStatistic full = statistic(build_tables(in, 0.2179, 2000, S2Share::pooled));
    const PairStatistic exact = statistic(build_tables(in, 0.2179, 100, S2Share::pooled));
    CHECK(full.value() == exact.value());
    CHECK(statistic(t).value() <= full.value() + 1e-12);
}

TEST_CASE("an empty side is rejected") {
    Rng rng = substream(1001, {0});
    MomentInput in = random_input(rng, 10, false, false);
    for (auto& g : in.group) g = 0;
    CHECK_THROWS_AS(build_tables(in, 0.2179, 2000, S2Share::pooled), DataError);
}
