#include "ivv/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ivv {

namespace {

constexpr double kTol = 1e-12;

void rebuild_prefix(SortedPair& sp) {
    const std::size_t n = sp.size();
    sp.c0.assign(n, 0.0);
    sp.c1.assign(n, 0.0);
    double a0 = 0.0, a1 = 0.0;
    sp.integral = true;
    for (std::size_t j = 0; j < n; ++j) {
        (sp.z[j] ? a1 : a0) += sp.w[j];
        sp.c0[j] = a0;
        sp.c1[j] = a1;
        if (sp.w[j] != std::round(sp.w[j])) sp.integral = false;
    }
    sp.n0 = a0;
    sp.n1 = a1;
}


bool same_amount(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

double delta_at(const SortedPair& sp, std::size_t j) { return sp.c1[j] / sp.n1 - sp.c0[j] / sp.n0; }

// Minimal Z=1 trim in P- making the CDFs cross-free at j, given d0 Z=0 trims in P+.
double term1(const SortedPair& sp, std::size_t j, double d0) {
    const double n0 = sp.n0, n1 = sp.n1;
    const double denom = n0 - d0 - sp.c0[j];
    if (denom <= kTol * n0 || n0 - d0 <= 0.0) return -INFINITY;
    return n1 * (n0 - d0) / denom * (delta_at(sp, j) - d0 / (n0 - d0) * sp.c0[j] / n0);
}

// Minimal Z=0 trim in P+ making the CDFs cross-free at j, given d1 Z=1 trims in P-.
double term0(const SortedPair& sp, std::size_t j, double d1) {
    const double n0 = sp.n0, n1 = sp.n1;
    const double denom = sp.c1[j] - d1;
    if (denom <= kTol * n1 || n1 - d1 <= 0.0) return -INFINITY;
    return n0 * (n1 - d1) / denom * (delta_at(sp, j) - d1 / (n1 - d1) * (n1 - sp.c1[j]) / n1);
}

// Positions of the whole-observation trim amounts realizable by trimming the lowest Z=1 in P-
// (group 1) or the highest Z=0 in P+ (group 0), as cumulative weights.
std::vector<double> trim_ladder(const SortedPair& sp, int group) {
    std::vector<double> out{0.0};
    double acc = 0.0;
    if (group == 1) {
        for (std::size_t j = 0; j < sp.size(); ++j)
            if (sp.z[j] == 1 && sp.region[j] < 0) out.push_back(acc += sp.w[j]);
    } else {
        for (std::size_t j = sp.size(); j-- > 0;)
            if (sp.z[j] == 0 && sp.region[j] > 0) out.push_back(acc += sp.w[j]);
    }
    return out;
}

// Smallest realizable trim amount >= x; x itself when it exceeds everything trimmable.
double round_to(const std::vector<double>& ladder, double x) {
    if (x <= 0.0) return 0.0;
    const double slack = 1e-9 * std::max(1.0, x);
    auto it = std::lower_bound(ladder.begin(), ladder.end(), x - slack);
    return it == ladder.end() ? x : *it;
}

struct Trimmer {
    const SortedPair& sp;
    std::vector<std::uint8_t> keep;  // pair positions
    double trimmed0 = 0.0, trimmed1 = 0.0;

    explicit Trimmer(const SortedPair& pair) : sp(pair), keep(pair.size(), 1) {}

    void drop(std::size_t j) {
        keep[j] = 0;
        (sp.z[j] ? trimmed1 : trimmed0) += sp.w[j];
    }

    // Forward loop over positions 0..last trimming Z=1 in P- while their CDF exceeds Z=0's.
    void lower_loop(std::size_t last, double d0, double d1) {
        double kept1 = 0.0;
        for (std::size_t j = 0; j <= last && j < sp.size(); ++j) {
            if (sp.z[j] != 1) continue;
            kept1 += sp.w[j];
            if (sp.region[j] >= 0) continue;
            const double dl = kept1 / (sp.n1 - d1) - sp.c0[j] / (sp.n0 - d0);
            if (dl > kTol) {
                drop(j);
                kept1 -= sp.w[j];
            }
        }
    }

    // Backward loop over positions N-1..first trimming Z=0 in P+ while their upper tail exceeds Z=1's.
    void upper_loop(std::size_t first, double d0, double d1) {
        double tail0 = 0.0, tail1 = 0.0;
        for (std::size_t j = sp.size(); j-- > first;) {
            if (sp.z[j] == 1) {
                if (keep[j]) tail1 += sp.w[j];
                continue;
            }
            tail0 += sp.w[j];
            if (sp.region[j] <= 0) continue;
            const double dl = tail0 / (sp.n0 - d0) - tail1 / (sp.n1 - d1);
            if (dl > kTol) {
                drop(j);
                tail0 -= sp.w[j];
            }
        }
    }

    void top_up(double d0, double d1) {
        for (std::size_t j = 0; j < sp.size() && trimmed1 < d1 - 1e-9 * std::max(1.0, d1); ++j)
            if (keep[j] && sp.z[j] == 1 && sp.region[j] < 0) drop(j);
        for (std::size_t j = sp.size(); j-- > 0 && trimmed0 < d0 - 1e-9 * std::max(1.0, d0);)
            if (keep[j] && sp.z[j] == 0 && sp.region[j] > 0) drop(j);
    }

    FosdCheck check() const {
        std::vector<std::uint8_t> s1(sp.n_input, 0);
        for (std::size_t j = 0; j < sp.size(); ++j) s1[sp.idx[j]] = keep[j];
        return verify_fosd(sp, s1);
    }

    // Trims the lowest kept Z=1 in P- (or else the highest kept Z=0 in P+) until dominance holds.
    // Neither move can raise the Z=1 CDF or lower the Z=0 CDF anywhere.
    bool repair() {
        bool changed = false;
        while (!check().ok) {
            std::size_t pick = sp.size();
            for (std::size_t j = 0; j < sp.size(); ++j)
                if (keep[j] && sp.z[j] == 1 && sp.region[j] < 0) {
                    pick = j;
                    break;
                }
            if (pick == sp.size())
                for (std::size_t j = sp.size(); j-- > 0;)
                    if (keep[j] && sp.z[j] == 0 && sp.region[j] > 0) {
                        pick = j;
                        break;
                    }
            if (pick == sp.size()) break;
            drop(pick);
            changed = true;
        }
        return changed;
    }
};

DistilledSample finish(const SortedPair& sp, Trimmer& tr, DistilledSample out) {
    if (tr.repair()) {
        out.repaired = true;
        out.warnings.push_back("distillation: weighted trims overshot; extra whole observations trimmed to restore dominance");
    }
    out.s1.assign(sp.n_input, 0);
    double kept0 = 0.0, kept1 = 0.0;
    for (std::size_t j = 0; j < sp.size(); ++j) {
        out.s1[sp.idx[j]] = tr.keep[j];
        if (tr.keep[j]) (sp.z[j] ? kept1 : kept0) += sp.w[j];
    }
    out.trimmed0 = tr.trimmed0;
    out.trimmed1 = tr.trimmed1;
    if (kept0 <= 0.0 || kept1 <= 0.0 || !tr.check().ok) {
        out.feasible = false;
        out.warnings.push_back("distillation infeasible: one instrument group is exhausted");
    }
    return out;
}

std::size_t first_in(const SortedPair& sp, int region) {
    for (std::size_t j = 0; j < sp.size(); ++j)
        if (sp.region[j] == region) return j;
    return sp.size();
}

std::size_t last_in(const SortedPair& sp, int region) {
    for (std::size_t j = sp.size(); j-- > 0;)
        if (sp.region[j] == region) return j;
    return sp.size();
}

DistilledSample start(const SortedPair& sp, DistillAlgorithm alg) {
    DistilledSample out;
    out.algorithm = alg;
    if (sp.n0 <= 0.0 || sp.n1 <= 0.0) {
        out.feasible = false;
        out.s1.assign(sp.n_input, 0);
        out.warnings.push_back("distillation infeasible: an instrument group is empty");
        return out;
    }
    out.max_delta = -INFINITY;
    for (std::size_t j = 0; j < sp.size(); ++j) out.max_delta = std::max(out.max_delta, delta_at(sp, j));
    return out;
}

}  // namespace

SortedPair sort_pair(const Vec& p, const std::vector<int>& z, const Vec& w) {
    const auto n = static_cast<std::size_t>(p.size());
    if (z.size() != n || static_cast<std::size_t>(w.size()) != n) throw DataError("sort_pair: length mismatch");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        if (p[ia] != p[ib]) return p[ia] < p[ib];
        if (z[a] != z[b]) return z[a] < z[b];
        return a < b;
    });
    SortedPair sp;
    sp.n_input = n;
    for (auto i : order) {
        if (z[i] != 0 && z[i] != 1) throw DataError("sort_pair: z must be 0 or 1");
        sp.idx.push_back(i);
        sp.p.push_back(p[static_cast<Eigen::Index>(i)]);
        sp.w.push_back(w[static_cast<Eigen::Index>(i)]);
        sp.z.push_back(z[i]);
        sp.region.push_back(0);
    }
    rebuild_prefix(sp);
    return sp;
}

SortedPair restrict_pair(const SortedPair& sp, const std::vector<std::size_t>& positions) {
    SortedPair out;
    out.n_input = sp.n_input;
    for (auto j : positions) {
        out.idx.push_back(sp.idx[j]);
        out.p.push_back(sp.p[j]);
        out.w.push_back(sp.w[j]);
        out.z.push_back(sp.z[j]);
        out.region.push_back(sp.region[j]);
    }
    rebuild_prefix(out);
    return out;
}

SortedPair assign_regions(const SortedPair& sp, const Interval& pminus, const Interval& pplus) {
    if (pminus.hi > pplus.lo || (pminus.hi == pplus.lo && !pplus.lo_open))
        throw std::invalid_argument("P- must lie strictly below P+");
    std::vector<std::size_t> keep;
    SortedPair tmp = sp;
    for (std::size_t j = 0; j < sp.size(); ++j) {
        if (pminus.contains(sp.p[j])) {
            tmp.region[j] = -1;
            keep.push_back(j);
        } else if (pplus.contains(sp.p[j])) {
            tmp.region[j] = 1;
            keep.push_back(j);
        }
    }
    return restrict_pair(tmp, keep);
}

PretrimResult pretrim(const SortedPair& sp) {
    PretrimResult res;
    SortedPair cur = sp;
    for (;;) {
        double min0 = INFINITY, max1 = -INFINITY;
        for (std::size_t j = 0; j < cur.size(); ++j) {
            if (cur.z[j] == 0) min0 = std::min(min0, cur.p[j]);
            else max1 = std::max(max1, cur.p[j]);
        }
        std::vector<std::size_t> keep;
        for (std::size_t j = 0; j < cur.size(); ++j) {
            const bool drop = (cur.z[j] == 1 && cur.p[j] < min0) || (cur.z[j] == 0 && cur.p[j] > max1);
            if (drop) {
                res.dropped.push_back(cur.idx[j]);
                (cur.z[j] ? res.dropped1 : res.dropped0)++;
            } else {
                keep.push_back(j);
            }
        }
        if (keep.size() == cur.size()) break;
        cur = restrict_pair(cur, keep);
    }
    res.empty_side = cur.n0 <= 0.0 || cur.n1 <= 0.0;
    res.pair = std::move(cur);
    return res;
}

double delta(const SortedPair& sp, std::size_t j) {
    if (j < 1 || j > sp.size()) throw std::out_of_range("delta: j outside 1..N");
    return delta_at(sp, j - 1);
}

namespace {

double reaction1(const SortedPair& sp, const std::vector<double>& ladder1, double d0) {
    double best = -INFINITY;
    for (std::size_t j = 0; j < sp.size(); ++j)
        if (sp.region[j] < 0) best = std::max(best, term1(sp, j, d0));
    return std::isfinite(best) ? round_to(ladder1, best) : 0.0;
}

double reaction0(const SortedPair& sp, const std::vector<double>& ladder0, double d1) {
    double best = -INFINITY;
    for (std::size_t j = 0; j < sp.size(); ++j)
        if (sp.region[j] > 0) best = std::max(best, term0(sp, j, d1));
    return std::isfinite(best) ? round_to(ladder0, best) : 0.0;
}

}  // namespace

double reaction_d1(const SortedPair& sp, double d0) { return reaction1(sp, trim_ladder(sp, 1), d0); }

double reaction_d0(const SortedPair& sp, double d1) { return reaction0(sp, trim_ladder(sp, 0), d1); }

DistillAlgorithm parse_distill(const std::string& s) {
    if (s == "simple") return DistillAlgorithm::simple;
    if (s == "modified") return DistillAlgorithm::modified;
    throw std::invalid_argument("unknown distillation algorithm '" + s + "' (simple | modified)");
}

std::string to_string(DistillAlgorithm a) { return a == DistillAlgorithm::simple ? "simple" : "modified"; }

namespace {

// Steps 3b/4b (simple) and 4/5 (modified): the paper's trimming loops for the chosen (d0, d1).
// If they do not realize exactly those amounts with dominance restored (possible with unequal
// weights), the lowest Z=1 in P- and the highest Z=0 in P+ are trimmed instead; that set is
// dominance-ordered whenever (d0, d1) satisfies both reaction constraints.
void realize(const SortedPair& sp, Trimmer& tr, DistilledSample& out, double d0_lower, const std::vector<double>& l0,
             const std::vector<double>& l1) {
    if (out.d1 > 0.0) {
        std::size_t jm = last_in(sp, -1);
        for (std::size_t j = 0; j < sp.size(); ++j)
            if (sp.region[j] < 0 && same_amount(round_to(l1, term1(sp, j, d0_lower)), out.d1)) {
                jm = j;
                break;
            }
        out.j_minus = jm + 1;
        tr.lower_loop(jm, d0_lower, out.d1);
    }
    if (out.d0 > 0.0) {
        std::size_t jp = first_in(sp, 1);
        jp = jp == 0 ? 0 : jp - 1;
        for (std::size_t j = sp.size(); j-- > 0;)
            if (sp.region[j] > 0 && same_amount(round_to(l0, term0(sp, j, out.d1)), out.d0)) {
                jp = j;
                break;
            }
        out.j_plus = jp + 1;
        tr.upper_loop(jp + 1, out.d0, out.d1);
    }
    tr.top_up(out.d0, out.d1);
    if (same_amount(tr.trimmed0, out.d0) && same_amount(tr.trimmed1, out.d1) && tr.check().ok) return;
    tr.keep.assign(sp.size(), 1);
    tr.trimmed0 = tr.trimmed1 = 0.0;
    tr.top_up(out.d0, out.d1);
    out.warnings.push_back("distillation: trimming loops did not realize the required amounts; "
                           "lowest Z=1 in P- and highest Z=0 in P+ trimmed instead");
}

}  // namespace

DistilledSample distill_simple(const SortedPair& sp) {
    DistilledSample out = start(sp, DistillAlgorithm::simple);
    if (!out.feasible) return out;
    Trimmer tr(sp);
    if (out.max_delta > kTol) {
        const auto l0 = trim_ladder(sp, 0), l1 = trim_ladder(sp, 1);
        // Step 3: Z=1 trims in P- with Z=0 untouched; step 4: Z=0 trims in P+ given d1.
        out.d1 = reaction1(sp, l1, 0.0);
        out.d0 = reaction0(sp, l0, out.d1);
        realize(sp, tr, out, 0.0, l0, l1);
    }
    return finish(sp, tr, std::move(out));
}

DistilledSample distill_modified(const SortedPair& sp) {
    DistilledSample out = start(sp, DistillAlgorithm::modified);
    if (!out.feasible) return out;
    Trimmer tr(sp);
    if (out.max_delta > kTol) {
        const auto l0 = trim_ladder(sp, 0), l1 = trim_ladder(sp, 1);
        const double slack = 1e-9;

        // Every realizable d1, each with the least d0 satisfying both reaction constraints.
        // This contains the reaction-curve fixed points and the two corners; trimming more
        // Z=1 than R_d1(0) can pay off by lowering the Z=0 requirement in P+.
        // R_d1 is nonincreasing in d0, so the least d0 with R_d1(d0) <= d1 is found by bisection.
        double best0 = INFINITY, best1 = INFINITY;
        for (double d1 : l1) {
            std::size_t lo = 0, hi = l0.size();
            while (lo < hi) {
                const std::size_t mid = (lo + hi) / 2;
                if (reaction1(sp, l1, l0[mid]) <= d1 + slack * std::max(1.0, d1)) hi = mid;
                else lo = mid + 1;
            }
            if (lo == l0.size()) continue;
            const double d0 = std::max(l0[lo], reaction0(sp, l0, d1));
            if (!std::isfinite(best0) || d0 + d1 < best0 + best1 - slack * std::max(1.0, best0 + best1)) {
                best0 = d0;
                best1 = d1;
            }
        }
        if (!std::isfinite(best0)) {
            best1 = reaction1(sp, l1, 0.0);
            best0 = reaction0(sp, l0, best1);
        }
        out.d0 = best0;
        out.d1 = best1;
        realize(sp, tr, out, out.d0, l0, l1);
    }
    return finish(sp, tr, std::move(out));
}

FosdCheck verify_fosd(const SortedPair& sp, const std::vector<std::uint8_t>& s1) {
    double tot0 = 0.0, tot1 = 0.0;
    for (std::size_t j = 0; j < sp.size(); ++j)
        if (s1[sp.idx[j]]) (sp.z[j] ? tot1 : tot0) += sp.w[j];
    FosdCheck res;
    if (tot0 <= 0.0 || tot1 <= 0.0) return res;
    double k0 = 0.0, k1 = 0.0;
    for (std::size_t j = 0; j < sp.size(); ++j) {
        if (s1[sp.idx[j]]) (sp.z[j] ? k1 : k0) += sp.w[j];
        if (k1 / tot1 > k0 / tot0 + kTol) {
            res.ok = false;
            res.first_violation = j + 1;
            return res;
        }
    }
    return res;
}

std::pair<Interval, Interval> median_split(const Vec& p, const Vec& w) {
    const double m = weighted_median(p, w);
    Interval lo{-INFINITY, m, false};
    Interval hi{m, INFINITY, true};
    return {lo, hi};
}

DistilledSample distill(const Vec& p, const std::vector<int>& z, const Vec& w, DistillAlgorithm algorithm,
                        std::optional<Interval> pminus, std::optional<Interval> pplus) {
    const SortedPair all = sort_pair(p, z, w);
    const auto split = median_split(p, w);
    const Interval pm = pminus.value_or(split.first);
    const Interval pp = pplus.value_or(split.second);
    const SortedPair regioned = assign_regions(all, pm, pp);
    const PretrimResult pre = pretrim(regioned);

    DistilledSample out = algorithm == DistillAlgorithm::simple ? distill_simple(pre.pair) : distill_modified(pre.pair);
    out.pminus = pm;
    out.pplus = pp;
    out.outside = all.size() - regioned.size();
    out.pretrim0 = pre.dropped0;
    out.pretrim1 = pre.dropped1;
    if (pre.empty_side) {
        out.feasible = false;
        out.warnings.push_back("pre-trim emptied an instrument group");
    }
    return out;
}

}  // namespace ivv
