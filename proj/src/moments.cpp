#include "ivv/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ivv {

Multiplier parse_multiplier(const std::string& s) {
    if (s == "gaussian") return Multiplier::gaussian;
    if (s == "rademacher") return Multiplier::rademacher;
    if (s == "mammen") return Multiplier::mammen;
    if (s == "zero") return Multiplier::zero;
    throw std::invalid_argument("unknown multiplier '" + s + "' (gaussian | rademacher | mammen)");
}

std::string to_string(Multiplier m) {
    switch (m) {
        case Multiplier::gaussian: return "gaussian";
        case Multiplier::rademacher: return "rademacher";
        case Multiplier::mammen: return "mammen";
        case Multiplier::zero: return "zero";
    }
    return "gaussian";
}

std::vector<double> draw_multipliers(Multiplier kind, std::size_t n, Rng& rng) {
    std::vector<double> out(n, 0.0);
    switch (kind) {
        case Multiplier::gaussian: {
            std::normal_distribution<double> nd(0.0, 1.0);
            for (auto& v : out) v = nd(rng);
            break;
        }
        case Multiplier::rademacher:
            for (auto& v : out) v = (rng() >> 63) ? 1.0 : -1.0;
            break;
        case Multiplier::mammen: {
            const double s5 = std::sqrt(5.0);
            const double p = (s5 + 1.0) / (2.0 * s5);
            std::uniform_real_distribution<double> ud(0.0, 1.0);
            for (auto& v : out) v = ud(rng) < p ? -(s5 - 1.0) / 2.0 : (s5 + 1.0) / 2.0;
            break;
        }
        case Multiplier::zero:
            break;
    }
    return out;
}

S2Share parse_s2_share(const std::string& s) {
    if (s == "pooled") return S2Share::pooled;
    if (s == "by-instrument" || s == "by_instrument") return S2Share::by_instrument;
    throw std::invalid_argument("unknown S2 share '" + s + "' (pooled | by-instrument)");
}

std::string to_string(S2Share s) { return s == S2Share::pooled ? "pooled" : "by-instrument"; }

double PairStatistic::value() const {
    double v = -INFINITY;
    if (nesting_available) v = std::max(v, nesting.value);
    if (index_available) v = std::max(v, index.value);
    return v;
}

namespace {

struct Shares {
    double w0 = 0, w1 = 0, e0 = 0, e1 = 0;
    double s1_0 = 0, s1_1 = 0, s2_0 = 0, s2_1 = 0, s2 = 0;
};

Shares shares_of(const MomentInput& in) {
    Shares sh;
    double sq0 = 0, sq1 = 0, a0 = 0, a1 = 0, b0 = 0, b1 = 0;
    for (std::size_t i = 0; i < in.u.size(); ++i) {
        const double w = in.w[i];
        if (in.group[i] == 0) {
            sh.w0 += w;
            sq0 += w * w;
            if (in.s1[i]) a0 += w;
            if (in.s2[i]) b0 += w;
        } else {
            sh.w1 += w;
            sq1 += w * w;
            if (in.s1[i]) a1 += w;
            if (in.s2[i]) b1 += w;
        }
    }
    sh.e0 = sq0 > 0 ? sh.w0 * sh.w0 / sq0 : 0.0;
    sh.e1 = sq1 > 0 ? sh.w1 * sh.w1 / sq1 : 0.0;
    sh.s1_0 = sh.w0 > 0 ? a0 / sh.w0 : 0.0;
    sh.s1_1 = sh.w1 > 0 ? a1 / sh.w1 : 0.0;
    sh.s2_0 = sh.w0 > 0 ? b0 / sh.w0 : 0.0;
    sh.s2_1 = sh.w1 > 0 ? b1 / sh.w1 : 0.0;
    sh.s2 = sh.w0 + sh.w1 > 0 ? (b0 + b1) / (sh.w0 + sh.w1) : 0.0;
    return sh;
}

// Value of the moment function for statistic s at observation i (interval indicator excluded).
double moment_value(const MomentInput& in, const Shares& sh, S2Share share, int s, std::size_t i) {
    const int g = in.group[i];
    const int d = (s == 0 || s == 2) ? 1 : 0;
    if (in.d[i] != d) return 0.0;
    if (s < 2) {
        if (!in.s1[i]) return 0.0;
        return 1.0 / (g == 0 ? sh.s1_0 : sh.s1_1);
    }
    if (!in.s2[i]) return 0.0;
    const double lam = g == 0 ? in.lambda0 : in.lambda1;
    const double pi2 = share == S2Share::pooled ? sh.s2 : (g == 0 ? sh.s2_0 : sh.s2_1);
    return lam / (in.pz[i] * pi2);
}

double stat_sign(int s) { return s == 1 ? -1.0 : 1.0; }

// R[b] = sum over u <= e_b, L[a] = sum over u < e_a.
void prefix(const MomentTables& t, const std::vector<double>& v, std::vector<double>& R, std::vector<double>& L) {
    R.assign(t.m, 0.0);
    L.assign(t.m, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == 0.0) continue;
        if (t.r_bin[i] < t.m) R[t.r_bin[i]] += v[i];
        if (t.l_bin[i] < t.m) L[t.l_bin[i]] += v[i];
    }
    for (std::size_t k = 1; k < t.m; ++k) {
        R[k] += R[k - 1];
        L[k] += L[k - 1];
    }
}

}  // namespace

MomentTables build_tables(const MomentInput& in, double xi, std::size_t interval_cap, S2Share share) {
    if (!(xi > 0.0)) throw std::invalid_argument("xi must be positive");
    const std::size_t n = in.u.size();
    MomentTables t;
    t.obs = in.obs;
    t.group = in.group;
    t.w = in.w;
    const Shares sh = shares_of(in);
    t.w0 = sh.w0;
    t.w1 = sh.w1;
    t.share_s1_0 = sh.s1_0;
    t.share_s1_1 = sh.s1_1;
    t.share_s2_0 = sh.s2_0;
    t.share_s2_1 = sh.s2_1;
    t.share_s2 = sh.s2;
    if (sh.w0 <= 0.0 || sh.w1 <= 0.0) throw DataError("instrument pair has an empty side");
    t.c = std::sqrt(sh.e0 * sh.e1 / (sh.e0 + sh.e1));
    t.lambda_pair = sh.e1 / (sh.e0 + sh.e1);

    std::vector<double> distinct(in.u);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (interval_cap < 2) interval_cap = 2;
    if (distinct.size() > interval_cap) {
        const double step = static_cast<double>(distinct.size() - 1) / static_cast<double>(interval_cap - 1);
        std::vector<double> thin;
        for (std::size_t k = 0; k < interval_cap; ++k)
            thin.push_back(distinct[static_cast<std::size_t>(std::llround(static_cast<double>(k) * step))]);
        thin.erase(std::unique(thin.begin(), thin.end()), thin.end());
        distinct.swap(thin);
    }
    t.endpoints = distinct;
    t.m = distinct.size();
    t.r_bin.resize(n);
    t.l_bin.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.r_bin[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), in.u[i]) - distinct.begin());
        t.l_bin[i] = static_cast<std::size_t>(std::upper_bound(distinct.begin(), distinct.end(), in.u[i]) - distinct.begin());
    }

    bool nest_ok = in.nesting && sh.s1_0 > 0.0 && sh.s1_1 > 0.0;
    if (in.nesting && !nest_ok) t.warnings.push_back("nesting component skipped: no distilled observations on one side");
    bool index_ok = in.index && sh.s2_0 > 0.0 && sh.s2_1 > 0.0;
    if (in.index && !index_ok)
        t.warnings.push_back("index-sufficiency component skipped: no observations inside the S2 band on one side");

    const double lam = t.lambda_pair;
    std::vector<double> a0(n), a1(n), q0(n), q1(n);
    std::vector<double> R0, L0, R1, L1, RQ0, LQ0, RQ1, LQ1;
    for (int s = 0; s < kStats; ++s) {
        StatTable& st = t.stats[static_cast<std::size_t>(s)];
        st.active = s < 2 ? nest_ok : index_ok;
        if (!st.active) continue;
        st.coef.assign(n, 0.0);
        st.mean0.assign(n, 0.0);
        st.mean1.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = moment_value(in, sh, share, s, i);
            const double w = in.w[i];
            a0[i] = a1[i] = q0[i] = q1[i] = 0.0;
            if (in.group[i] == 0) {
                st.mean0[i] = w * a / sh.w0;
                q0[i] = w * a * a / sh.w0;
                st.coef[i] = t.c * stat_sign(s) * st.mean0[i];
            } else {
                st.mean1[i] = w * a / sh.w1;
                q1[i] = w * a * a / sh.w1;
                st.coef[i] = -t.c * stat_sign(s) * st.mean1[i];
            }
        }
        prefix(t, st.mean0, R0, L0);
        prefix(t, st.mean1, R1, L1);
        prefix(t, q0, RQ0, LQ0);
        prefix(t, q1, RQ1, LQ1);
        st.inv_sigma.resize(t.m * (t.m + 1) / 2);
        std::size_t k = 0;
        for (std::size_t a = 0; a < t.m; ++a) {
            for (std::size_t b = a; b < t.m; ++b, ++k) {
                const double m0 = R0[b] - L0[a], m1 = R1[b] - L1[a];
                const double v0 = (RQ0[b] - LQ0[a]) - m0 * m0;
                const double v1 = (RQ1[b] - LQ1[a]) - m1 * m1;
                const double var = lam * v0 + (1.0 - lam) * v1;
                const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
                st.inv_sigma[k] = 1.0 / std::max(sd, xi);
            }
        }
    }
    return t;
}

PairStatistic statistic(const MomentTables& t) {
    PairStatistic out;
    out.nesting_available = t.stats[0].active;
    out.index_available = t.stats[2].active;
    std::vector<double> R, L;
    for (int s = 0; s < kStats; ++s) {
        const StatTable& st = t.stats[static_cast<std::size_t>(s)];
        if (!st.active) continue;
        Argmax& best = s < 2 ? out.nesting : out.index;
        prefix(t, st.coef, R, L);
        std::size_t k = 0;
        for (std::size_t a = 0; a < t.m; ++a) {
            for (std::size_t b = a; b < t.m; ++b, ++k) {
                const double v = (R[b] - L[a]) * st.inv_sigma[k];
                if (v > best.value) best = {v, t.endpoints[a], t.endpoints[b], s == 0 || s == 2 ? 1 : 0, 1};
                if (s >= 2 && -v > best.value) best = {-v, t.endpoints[a], t.endpoints[b], s == 2 ? 1 : 0, -1};
            }
        }
    }
    return out;
}

namespace {

// max and min of (R[b] - La) * inv[k] over b in [a, m).
inline void scan_row(const double* R, double La, const double* inv, std::size_t len, double& mx, double& mn) {
    double x0 = mx, x1 = mx, n0 = mn, n1 = mn;
    std::size_t b = 0;
    for (; b + 1 < len; b += 2) {
        const double v0 = (R[b] - La) * inv[b];
        const double v1 = (R[b + 1] - La) * inv[b + 1];
        x0 = v0 > x0 ? v0 : x0;
        x1 = v1 > x1 ? v1 : x1;
        n0 = v0 < n0 ? v0 : n0;
        n1 = v1 < n1 ? v1 : n1;
    }
    if (b < len) {
        const double v = (R[b] - La) * inv[b];
        x0 = v > x0 ? v : x0;
        n0 = v < n0 ? v : n0;
    }
    mx = std::max(x0, x1);
    mn = std::min(n0, n1);
}

}  // namespace

PairBootstrap bootstrap_draw(const MomentTables& t, const std::vector<double>& multipliers, bool recenter) {
    PairBootstrap out;
    const std::size_t n = t.obs.size();
    std::vector<double> v(n), R, L, RM0, LM0, RM1, LM1;
    double mbar0 = 0.0, mbar1 = 0.0;
    for (int s = 0; s < kStats; ++s) {
        const StatTable& st = t.stats[static_cast<std::size_t>(s)];
        if (!st.active) continue;
        for (std::size_t i = 0; i < n; ++i) v[i] = st.coef[i] * multipliers[t.obs[i]];
        prefix(t, v, R, L);
        double mx = -INFINITY, mn = INFINITY;
        if (!recenter) {
            std::size_t k = 0;
            for (std::size_t a = 0; a < t.m; ++a) {
                const std::size_t len = t.m - a;
                scan_row(R.data() + a, L[a], st.inv_sigma.data() + k, len, mx, mn);
                k += len;
            }
        } else {
            // Subtract the group means of the multipliers times the interval means.
            mbar0 = mbar1 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                (t.group[i] == 0 ? mbar0 : mbar1) += t.w[i] * multipliers[t.obs[i]];
            mbar0 /= t.w0;
            mbar1 /= t.w1;
            prefix(t, st.mean0, RM0, LM0);
            prefix(t, st.mean1, RM1, LM1);
            const double sg = stat_sign(s) * t.c;
            std::size_t k = 0;
            for (std::size_t a = 0; a < t.m; ++a) {
                for (std::size_t b = a; b < t.m; ++b, ++k) {
                    const double m0 = RM0[b] - LM0[a], m1 = RM1[b] - LM1[a];
                    const double val = ((R[b] - L[a]) - sg * (m0 * mbar0 - m1 * mbar1)) * st.inv_sigma[k];
                    mx = std::max(mx, val);
                    mn = std::min(mn, val);
                }
            }
        }
        if (s < 2) out.nesting = std::max(out.nesting, mx);
        else out.index = std::max({out.index, mx, -mn});
    }
    return out;
}

DirectValue direct_value(const MomentInput& in, int s, double lo, double hi, double xi, S2Share share) {
    const Shares sh = shares_of(in);
    double m0 = 0, m1 = 0, q0 = 0, q1 = 0;
    for (std::size_t i = 0; i < in.u.size(); ++i) {
        if (in.u[i] < lo || in.u[i] > hi) continue;
        const double a = moment_value(in, sh, share, s, i);
        if (in.group[i] == 0) {
            m0 += in.w[i] * a;
            q0 += in.w[i] * a * a;
        } else {
            m1 += in.w[i] * a;
            q1 += in.w[i] * a * a;
        }
    }
    m0 /= sh.w0;
    q0 /= sh.w0;
    m1 /= sh.w1;
    q1 /= sh.w1;
    const double c = std::sqrt(sh.e0 * sh.e1 / (sh.e0 + sh.e1));
    const double lam = sh.e1 / (sh.e0 + sh.e1);
    DirectValue out;
    out.numerator = c * stat_sign(s) * (m0 - m1);
    const double var = lam * (q0 - m0 * m0) + (1.0 - lam) * (q1 - m1 * m1);
    out.sigma = var > 0.0 ? std::sqrt(var) : 0.0;
    out.ratio = out.numerator / std::max(out.sigma, xi);
    return out;
}

}  // namespace ivv
