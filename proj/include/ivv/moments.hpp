#pragma once

#include "ivv/core.hpp"
#include "ivv/rng.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ivv {

enum class Multiplier { gaussian, rademacher, mammen, zero };

Multiplier parse_multiplier(const std::string& s);
std::string to_string(Multiplier m);

/// Draws n iid multipliers with mean 0 and variance 1 (zero: all 0, test hook).
std::vector<double> draw_multipliers(Multiplier kind, std::size_t n, Rng& rng);

/// Which share normalises the index-sufficiency weights: one share of S2 for the
/// whole pair (default) or the share within each instrument level.
enum class S2Share { pooled, by_instrument };

S2Share parse_s2_share(const std::string& s);
std::string to_string(S2Share s);

/// Observations of one instrument pair. group 0 is the lower level.
struct MomentInput {
    std::vector<double> u, w;
    std::vector<int> d, group;
    std::vector<std::uint8_t> s1, s2;
    std::vector<double> pz;          // Pr(Z = own level | p)
    std::vector<std::size_t> obs;    // position in the shared multiplier vector
    double lambda0 = 0.5, lambda1 = 0.5;  // Pr(Z = level) entering the index weights
    bool nesting = true;             // include the nesting component
    bool index = true;               // include the index-sufficiency component
};

/// Statistics indexed 0: nesting d=1, 1: nesting d=0, 2: index d=1, 3: index d=0.
constexpr int kStats = 4;

struct StatTable {
    bool active = false;
    std::vector<double> coef;     // signed per-observation contribution to the scaled numerator
    std::vector<double> mean0, mean1;  // per-observation a_i / W_g for the interval means
    std::vector<double> inv_sigma;     // 1 / max(sigma, xi), packed upper triangle (a <= b)
};

struct MomentTables {
    std::size_t m = 0;                 // endpoint count
    std::vector<double> endpoints;     // ascending
    // u lies in [e_a, e_b] iff r_bin <= b and l_bin > a.
    std::vector<std::size_t> r_bin;    // first endpoint >= u (m if none)
    std::vector<std::size_t> l_bin;    // first endpoint > u (m if none)
    std::vector<std::size_t> obs;
    std::vector<int> group;
    std::vector<double> w;
    double c = 0.0;                    // sqrt(n0 n1 / (n0 + n1)) with effective sizes
    double lambda_pair = 0.5;          // weight share of the upper level within the pair
    double w0 = 0.0, w1 = 0.0;         // weight totals per group
    double share_s1_0 = 0.0, share_s1_1 = 0.0;
    double share_s2_0 = 0.0, share_s2_1 = 0.0, share_s2 = 0.0;
    std::array<StatTable, kStats> stats;
    std::vector<std::string> warnings;

    std::size_t tri(std::size_t a, std::size_t b) const { return a * m - a * (a + 1) / 2 + b; }
};

MomentTables build_tables(const MomentInput& in, double xi, std::size_t interval_cap, S2Share share);

struct Argmax {
    double value = -INFINITY;
    double lo = NAN, hi = NAN;  // interval endpoints in residual units
    int d = -1;
    int sign = 1;               // -1 for the -T2 branch
};

struct PairStatistic {
    bool nesting_available = false, index_available = false;
    Argmax nesting, index;
    double value() const;       // max over available components
};

PairStatistic statistic(const MomentTables& t);

/// Bootstrap counterpart given one multiplier per observation of the full sample.
struct PairBootstrap {
    double nesting = -INFINITY, index = -INFINITY;
};

PairBootstrap bootstrap_draw(const MomentTables& t, const std::vector<double>& multipliers, bool recenter);

/// Direct evaluation of the scaled numerator and sigma of statistic s over [lo, hi]; test oracle.
struct DirectValue {
    double numerator = 0.0, sigma = 0.0, ratio = 0.0;
};
DirectValue direct_value(const MomentInput& in, int s, double lo, double hi, double xi, S2Share share);

}  // namespace ivv
