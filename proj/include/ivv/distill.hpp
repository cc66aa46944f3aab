#pragma once

#include "ivv/core.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ivv {

/// Propensity-score interval; closed unless lo_open.
struct Interval {
    double lo = -INFINITY;
    double hi = INFINITY;
    bool lo_open = false;
    bool contains(double p) const { return (lo_open ? p > lo : p >= lo) && p <= hi; }
};

/// Two-level sample sorted ascending by p, with z=0 before z=1 on ties.
/// Positions are 0-based internally; the paper's j is position + 1.
struct SortedPair {
    std::size_t n_input = 0;        // size of the caller's index space
    std::vector<std::size_t> idx;   // caller index of each position
    std::vector<double> p, w;
    std::vector<int> z;
    std::vector<int> region;        // -1: P-, +1: P+, 0: unassigned
    std::vector<double> c0, c1;     // inclusive prefix weight sums of (1-z) and z
    double n0 = 0.0, n1 = 0.0;
    bool integral = true;           // all weights are integers: trims are counted in whole units

    std::size_t size() const { return p.size(); }
};

SortedPair sort_pair(const Vec& p, const std::vector<int>& z, const Vec& w);

/// Keeps the listed positions (ascending) and rebuilds the prefix sums.
SortedPair restrict_pair(const SortedPair& sp, const std::vector<std::size_t>& positions);

/// Marks positions with their P-/P+ membership and drops those in neither.
SortedPair assign_regions(const SortedPair& sp, const Interval& pminus, const Interval& pplus);

struct PretrimResult {
    SortedPair pair;
    std::vector<std::size_t> dropped;  // caller indices
    std::size_t dropped0 = 0, dropped1 = 0;
    bool empty_side = false;
};

/// Repeatedly drops z=1 with p below every z=0 and z=0 with p above every z=1.
PretrimResult pretrim(const SortedPair& sp);

/// Delta_j = sum_{i<=j} z_i / n1 - sum_{i<=j} (1 - z_i) / n0 for 1-based j.
double delta(const SortedPair& sp, std::size_t j);

/// Reaction functions of the modified algorithm (ceiling of the max, floored at 0).
double reaction_d1(const SortedPair& sp, double d0);
double reaction_d0(const SortedPair& sp, double d1);

enum class DistillAlgorithm { simple, modified };

DistillAlgorithm parse_distill(const std::string& s);
std::string to_string(DistillAlgorithm a);

struct DistilledSample {
    std::vector<std::uint8_t> s1;  // caller index space
    DistillAlgorithm algorithm = DistillAlgorithm::modified;
    double d0 = 0.0, d1 = 0.0;     // required trims (weight units; counts for unit weights)
    double trimmed0 = 0.0, trimmed1 = 0.0;  // realized trimmed weight
    std::size_t j_minus = 0, j_plus = 0;    // 1-based positions in the pretrimmed pair; 0 if unused
    Interval pminus, pplus;
    std::size_t pretrim0 = 0, pretrim1 = 0;  // observations removed by the pre-trim rules
    std::size_t outside = 0;                 // observations in neither P- nor P+
    double max_delta = 0.0;
    bool feasible = true;
    bool repaired = false;                   // a post-pass had to restore dominance (weighted data)
    std::vector<std::string> warnings;
};

/// Both algorithms expect a pretrimmed pair with regions assigned.
DistilledSample distill_simple(const SortedPair& pair);
DistilledSample distill_modified(const SortedPair& pair);

struct FosdCheck {
    bool ok = true;
    std::size_t first_violation = 0;  // 1-based position in pair order
};

/// Weighted CDF of retained z=1 <= that of retained z=0 at every position.
FosdCheck verify_fosd(const SortedPair& pair, const std::vector<std::uint8_t>& s1);

/// Weighted-median split: P- = (-inf, m], P+ = (m, inf).
std::pair<Interval, Interval> median_split(const Vec& p, const Vec& w);

/// Full distillation of a two-level sample: regions, pre-trim, algorithm.
DistilledSample distill(const Vec& p, const std::vector<int>& z, const Vec& w, DistillAlgorithm algorithm,
                        std::optional<Interval> pminus = std::nullopt, std::optional<Interval> pplus = std::nullopt);

}  // namespace ivv
