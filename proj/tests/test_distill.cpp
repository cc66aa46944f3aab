#include "fixtures.hpp"
#include "oracles.hpp"
#include "ivv/distill.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace ivv;
using namespace oracles;

namespace {

struct Sample {
    Vec p, w;
    std::vector<int> z;
};

// p on a coarse grid so that ties across groups are common.
Sample random_sample(Rng& rng, int n, bool weighted, int grid = 10) {
    std::uniform_int_distribution<int> cell(1, grid);
    std::uniform_int_distribution<int> iw(1, 4);
    std::uniform_real_distribution<double> rw(0.3, 3.0);
    std::bernoulli_distribution coin(0.5), which(0.5);
    Sample s;
    s.p.resize(n);
    s.w.resize(n);
    s.z.resize(n);
    for (int i = 0; i < n; ++i) {
        s.z[i] = coin(rng) ? 1 : 0;
        s.p(i) = static_cast<double>(cell(rng)) / (grid + 1);
        s.w(i) = weighted ? (which(rng) ? iw(rng) : rw(rng)) : 1.0;
    }
    s.z[0] = 0;
    s.z[1] = 1;
    return s;
}

SortedPair prepared(const Sample& s) {
    const auto split = median_split(s.p, s.w);
    return pretrim(assign_regions(sort_pair(s.p, s.z, s.w), split.first, split.second)).pair;
}

// Keeps all but the lowest k1 Z=1 in P- and the highest k0 Z=0 in P+.
std::vector<std::uint8_t> greedy_trim(const SortedPair& sp, int k0, int k1) {
    auto s1 = keep_all(sp);
    for (std::size_t j = 0; j < sp.size() && k1 > 0; ++j)
        if (sp.z[j] == 1 && sp.region[j] < 0) {
            s1[sp.idx[j]] = 0;
            --k1;
        }
    for (std::size_t j = sp.size(); j-- > 0 && k0 > 0;)
        if (sp.z[j] == 0 && sp.region[j] > 0) {
            s1[sp.idx[j]] = 0;
            --k0;
        }
    return s1;
}

bool holds_in(const SortedPair& sp, const std::vector<std::uint8_t>& s1, int region) {
    double t0 = 0, t1 = 0, a0 = 0, a1 = 0;
    for (std::size_t i = 0; i < sp.size(); ++i)
        if (s1[sp.idx[i]]) (sp.z[i] ? t1 : t0) += sp.w[i];
    for (std::size_t j = 0; j < sp.size(); ++j) {
        if (s1[sp.idx[j]]) (sp.z[j] ? a1 : a0) += sp.w[j];
        if (sp.region[j] == region && a1 / t1 > a0 / t0 + 1e-12) return false;
    }
    return true;
}

int count_trimmable(const SortedPair& sp, int z) {
    int c = 0;
    for (std::size_t j = 0; j < sp.size(); ++j)
        if (trimmable(sp, j) && sp.z[j] == z) ++c;
    return c;
}

void check_retention(const SortedPair& sp, const DistilledSample& ds) {
    for (std::size_t j = 0; j < sp.size(); ++j)
        if (!trimmable(sp, j)) CHECK(ds.s1[sp.idx[j]] == 1);
}

}  // namespace

TEST_CASE("sorting puts Z=0 first on ties and prefix sums match tallies") {
    Vec p(6), w(6);
    p << 0.5, 0.2, 0.5, 0.9, 0.2, 0.5;
    w << 1, 2, 3, 1, 1, 2;
    std::vector<int> z{1, 1, 0, 0, 0, 1};
    auto sp = sort_pair(p, z, w);
    CHECK(sp.idx == std::vector<std::size_t>{4, 1, 2, 0, 5, 3});
    CHECK(sp.z == std::vector<int>{0, 1, 0, 1, 1, 0});
    for (std::size_t j = 0; j < sp.size(); ++j) {
        double a0 = 0, a1 = 0;
        for (std::size_t i = 0; i <= j; ++i) (sp.z[i] ? a1 : a0) += sp.w[i];
        CHECK(sp.c0[j] == a0);
        CHECK(sp.c1[j] == a1);
    }
    CHECK(sp.n0 == 5.0);
    CHECK(sp.n1 == 5.0);
}

TEST_CASE("delta examples") {
    Vec p = Vec::LinSpaced(6, 0.1, 0.6);
    auto sp = sort_pair(p, {0, 1, 0, 1, 0, 1}, Vec::Ones(6));
    CHECK(delta(sp, 2) == doctest::Approx(1.0 / 3 - 1.0 / 3));
    CHECK(delta(sp, 1) == doctest::Approx(-1.0 / 3));
    CHECK(delta(sp, 6) == doctest::Approx(0.0));

    auto worst = sort_pair(p, {1, 1, 1, 0, 0, 0}, Vec::Ones(6));
    CHECK(delta(worst, 3) == 1.0);
    CHECK(delta(worst, 6) == doctest::Approx(0.0));
    CHECK_THROWS(delta(worst, 0));
    CHECK_THROWS(delta(worst, 7));
}

TEST_CASE("pre-trim rules") {
    SUBCASE("dominant sample keeps everything") {
        Vec p = Vec::LinSpaced(6, 0.1, 0.6);
        auto res = pretrim(sort_pair(p, {0, 0, 1, 0, 1, 1}, Vec::Ones(6)));
        CHECK(res.dropped.empty());
    }
    SUBCASE("Z=1 at the global minimum is dropped") {
        Vec p = Vec::LinSpaced(5, 0.1, 0.5);
        auto res = pretrim(sort_pair(p, {1, 0, 1, 0, 1}, Vec::Ones(5)));
        CHECK(res.dropped == std::vector<std::size_t>{0});
        CHECK(res.dropped1 == 1);
    }
    SUBCASE("interleaved eight observations") {
        // Rule 1 removes the two Z=1 below the first Z=0; rule 2 the Z=0 above the last Z=1.
        Vec p = Vec::LinSpaced(8, 0.1, 0.8);
        auto res = pretrim(sort_pair(p, {1, 1, 0, 1, 0, 0, 1, 0}, Vec::Ones(8)));
        auto dropped = res.dropped;
        std::sort(dropped.begin(), dropped.end());
        CHECK(dropped == std::vector<std::size_t>{0, 1, 7});
        CHECK(res.dropped0 == 1);
        CHECK(res.dropped1 == 2);
        CHECK(res.pair.size() == 5);
    }
    SUBCASE("random samples match a direct application of the rules") {
        Rng rng(8);
        for (int rep = 0; rep < 300; ++rep) {
            auto s = random_sample(rng, 8, false, 6);
            auto res = pretrim(sort_pair(s.p, s.z, s.w));
            std::vector<int> alive(8, 1);
            for (bool changed = true; changed;) {
                changed = false;
                double min0 = INFINITY, max1 = -INFINITY;
                for (int i = 0; i < 8; ++i)
                    if (alive[i]) (s.z[i] ? max1 = std::max(max1, s.p(i)) : min0 = std::min(min0, s.p(i)));
                for (int i = 0; i < 8; ++i)
                    if (alive[i] && ((s.z[i] == 1 && s.p(i) < min0) || (s.z[i] == 0 && s.p(i) > max1))) {
                        alive[i] = 0;
                        changed = true;
                    }
            }
            std::vector<std::size_t> expect;
            for (std::size_t i = 0; i < 8; ++i)
                if (!alive[i]) expect.push_back(i);
            auto got = res.dropped;
            std::sort(got.begin(), got.end());
            CHECK(got == expect);
        }
    }
}

TEST_CASE("dominant input needs no trimming") {
    Vec p = Vec::LinSpaced(8, 0.1, 0.8);
    std::vector<int> z{0, 0, 1, 0, 0, 1, 1, 1};
    for (auto alg : {DistillAlgorithm::simple, DistillAlgorithm::modified}) {
        auto ds = distill(p, z, Vec::Ones(8), alg);
        CHECK(ds.d0 == 0.0);
        CHECK(ds.d1 == 0.0);
        CHECK(std::all_of(ds.s1.begin(), ds.s1.end(), [](auto v) { return v == 1; }));
    }
    auto sp = prepared({p, Vec::Ones(8), z});
    CHECK(reaction_d1(sp, 0.0) == 0.0);
    CHECK(reaction_d0(sp, 0.0) == 0.0);
}

TEST_CASE("uniform propensity scores, one hundred observations") {
    Rng rng(2015);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec p(100);
    std::vector<int> z(100);
    for (int i = 0; i < 100; ++i) {
        p(i) = u(rng);
        z[i] = u(rng) < 0.5 ? 1 : 0;
    }
    auto simple = distill(p, z, Vec::Ones(100), DistillAlgorithm::simple);
    auto modified = distill(p, z, Vec::Ones(100), DistillAlgorithm::modified);
    const auto split = median_split(p, Vec::Ones(100));
    auto all = sort_pair(p, z, Vec::Ones(100));
    auto sp = pretrim(assign_regions(all, split.first, split.second)).pair;
    for (const auto* ds : {&simple, &modified}) {
        CHECK(ds->feasible);
        CHECK(verify_fosd(all, ds->s1).ok);
        check_retention(sp, *ds);
    }
    CHECK(modified.trimmed0 + modified.trimmed1 <= simple.trimmed0 + simple.trimmed1);
}

TEST_CASE("reaction functions match brute-force minimal trims") {
    Rng rng(20);
    int compared = 0;
    for (int rep = 0; rep < 200; ++rep) {
        auto s = random_sample(rng, 20, false);
        auto sp = prepared(s);
        if (sp.n0 <= 0 || sp.n1 <= 0) continue;
        const int m0 = count_trimmable(sp, 0), m1 = count_trimmable(sp, 1);
        for (int d0 = 0; d0 <= m0; ++d0) {
            int need = -1;
            for (int d1 = 0; d1 <= m1 && need < 0; ++d1)
                if (holds_in(sp, greedy_trim(sp, d0, d1), -1)) need = d1;
            if (need < 0) continue;
            CHECK(reaction_d1(sp, d0) == need);
            ++compared;
        }
        for (int d1 = 0; d1 <= m1; ++d1) {
            int need = -1;
            for (int d0 = 0; d0 <= m0 && need < 0; ++d0)
                if (holds_in(sp, greedy_trim(sp, d0, d1), 1)) need = d0;
            if (need < 0) continue;
            CHECK(reaction_d0(sp, d1) == need);
            ++compared;
        }
    }
    CHECK(compared > 1000);
}

TEST_CASE("simple algorithm reaction at zero is the step-three trim") {
    // Per-position requirements are integers here, so ceiling the max equals the max of ceilings.
    Vec p = Vec::LinSpaced(8, 0.1, 0.8);
    std::vector<int> z{0, 1, 1, 0, 1, 0, 0, 1};
    auto sp = prepared({p, Vec::Ones(8), z});
    auto simple = distill_simple(sp);
    CHECK(simple.d1 == reaction_d1(sp, 0.0));
    CHECK(simple.d0 == reaction_d0(sp, simple.d1));
}

TEST_CASE("modified algorithm attains the exhaustive minimum on small samples") {
    Rng rng(12);
    int nontrivial = 0;
    for (int rep = 0; rep < 3000; ++rep) {
        std::uniform_int_distribution<int> size(4, 12);
        auto s = random_sample(rng, size(rng), false);
        auto sp = prepared(s);
        if (sp.n0 <= 0 || sp.n1 <= 0) continue;
        auto best = exhaustive_min(sp);
        REQUIRE(best.found);
        auto mod = distill_modified(sp);
        INFO("rep ", rep);
        CHECK(mod.d0 == best.d0);
        CHECK(mod.d1 == best.d1);
        CHECK(mod.trimmed0 == best.d0);
        CHECK(mod.trimmed1 == best.d1);
        CHECK(verify_fosd(sp, mod.s1).ok);
        auto simple = distill_simple(sp);
        CHECK(simple.trimmed0 + simple.trimmed1 >= best.d0 + best.d1);
        // Simple: fewest Z=1 trims fixing P-, then fewest Z=0 trims given those.
        const int m0 = count_trimmable(sp, 0), m1 = count_trimmable(sp, 1);
        int s1need = -1;
        for (int d1 = 0; d1 <= m1 && s1need < 0; ++d1)
            if (holds_in(sp, greedy_trim(sp, 0, d1), -1)) s1need = d1;
        int s0need = -1;
        for (int d0 = 0; d0 <= m0 && s0need < 0 && s1need >= 0; ++d0)
            if (scan_fosd(sp, greedy_trim(sp, d0, s1need)).ok) s0need = d0;
        if (s1need >= 0 && s0need >= 0) CHECK(simple.trimmed0 + simple.trimmed1 == s0need + s1need);
        if (best.d0 + best.d1 > 0) ++nontrivial;
    }
    CHECK(nontrivial > 500);
}

TEST_CASE("random weighted samples: dominance, retention, idempotence") {
    Rng rng(1000);
    std::uniform_int_distribution<int> size(20, 500);
    std::bernoulli_distribution weighted(0.5);
    int repaired = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        auto s = random_sample(rng, size(rng), weighted(rng), 40);
        const auto split = median_split(s.p, s.w);
        auto all = sort_pair(s.p, s.z, s.w);
        auto sp = pretrim(assign_regions(all, split.first, split.second)).pair;
        auto simple = distill(s.p, s.z, s.w, DistillAlgorithm::simple);
        auto mod = distill(s.p, s.z, s.w, DistillAlgorithm::modified);
        INFO("rep ", rep);
        for (const auto* ds : {&simple, &mod}) {
            if (!ds->feasible) continue;
            CHECK(verify_fosd(all, ds->s1).ok);
            check_retention(sp, *ds);
            repaired += ds->repaired;

            // Distilling the retained sample again with the same regions trims nothing.
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < ds->s1.size(); ++i)
                if (ds->s1[i]) rows.push_back(i);
            Vec p2(rows.size()), w2(rows.size());
            std::vector<int> z2(rows.size());
            for (std::size_t k = 0; k < rows.size(); ++k) {
                p2(k) = s.p(rows[k]);
                w2(k) = s.w(rows[k]);
                z2[k] = s.z[rows[k]];
            }
            auto again = distill(p2, z2, w2, ds->algorithm, split.first, split.second);
            CHECK(again.pretrim0 + again.pretrim1 == 0);
            CHECK(again.trimmed0 + again.trimmed1 == 0.0);
        }
        if (simple.feasible && mod.feasible)
            CHECK(mod.trimmed0 + mod.trimmed1 <= simple.trimmed0 + simple.trimmed1 + 1e-9);
    }
    MESSAGE("weighted repairs: ", repaired);
}

TEST_CASE("dominance check matches a direct scan on corrupted retention vectors") {
    Rng rng(77);
    std::bernoulli_distribution keep(0.7);
    for (int rep = 0; rep < 500; ++rep) {
        auto s = random_sample(rng, 30, rep % 2 == 1);
        auto sp = sort_pair(s.p, s.z, s.w);
        std::vector<std::uint8_t> s1(30);
        for (auto& v : s1) v = keep(rng);
        auto a = verify_fosd(sp, s1);
        auto b = scan_fosd(sp, s1);
        CHECK(a.ok == b.ok);
        CHECK(a.first_violation == b.first_violation);
    }
}

TEST_CASE("identical input gives identical output") {
    Rng rng(4);
    auto s = random_sample(rng, 200, true, 15);
    auto a = distill(s.p, s.z, s.w, DistillAlgorithm::modified);
    auto b = distill(s.p, s.z, s.w, DistillAlgorithm::modified);
    CHECK(a.s1 == b.s1);
}

TEST_CASE("overlapping regions are rejected") {
    auto sp = sort_pair(Vec::LinSpaced(4, 0.1, 0.4), {0, 1, 0, 1}, Vec::Ones(4));
    CHECK_THROWS_AS(assign_regions(sp, Interval{0.0, 0.3}, Interval{0.3, 1.0}), std::invalid_argument);
    CHECK_NOTHROW(assign_regions(sp, Interval{0.0, 0.3}, Interval{0.3, 1.0, true}));
}
