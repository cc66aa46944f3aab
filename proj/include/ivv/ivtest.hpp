#pragma once

#include "ivv/dataset.hpp"
#include "ivv/distill.hpp"
#include "ivv/moments.hpp"
#include "ivv/plm.hpp"
#include "ivv/propensity.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ivv {

struct TestConfig {
    double xi = std::sqrt(0.05 * 0.95);
    double s2_lo = 0.05, s2_hi = 0.95;
    int n_boot = 500;
    Multiplier multiplier = Multiplier::gaussian;
    std::size_t interval_cap = 2000;
    std::uint64_t seed = 0;
    bool recenter = false;
    S2Share s2_share = S2Share::pooled;
    int threads = 1;
};

/// Throws std::invalid_argument if the configuration violates its invariants.
void validate(const TestConfig& cfg);

enum class PzMethod { local_constant, probit };

PzMethod parse_pz(const std::string& s);
std::string to_string(PzMethod m);

struct EstimationOptions {
    PropensityDesign design;
    ProbitOptions probit;
    PlmOptions plm;
    PzMethod pz = PzMethod::local_constant;
    double bw_pz = 0.0;  // fixed bandwidth for Pr(Z|p); 0 = cross-validated
    DistillAlgorithm distill = DistillAlgorithm::modified;
    std::optional<Interval> pminus, pplus;
};

/// Propensity scores, partially linear fit and partial residuals.
struct FirstStage {
    PropensityFit pfit;
    PartialLinearFit plm;
    ResidualSet res;
};

FirstStage estimate_first_stage(const Dataset& ds, const EstimationOptions& opts);

/// Pr(Z = level | p) for every observation and level (n x K).
struct PzEstimate {
    Mat prob;
    PzMethod method = PzMethod::local_constant;
    std::vector<double> bandwidths;
};

PzEstimate estimate_pz(const Vec& pscore, const std::vector<int>& z, const Vec& w, int levels, PzMethod method,
                       double bw = 0.0);

/// S2 flags for the pair (lo, lo+1): Pr(Z=lo+1|p) >= s2_lo and Pr(Z=lo|p) >= 1 - s2_hi.
/// With two levels this is Pr(Z=1|p) in [s2_lo, s2_hi].
std::vector<std::uint8_t> build_s2(const PzEstimate& pz, int lo, double s2_lo, double s2_hi);

struct PairReport {
    int lo = 0;
    long long code_lo = 0, code_hi = 0;
    std::size_t count0 = 0, count1 = 0;
    double n0 = 0.0, n1 = 0.0;  // weighted
    DistilledSample distill;    // s1 is in pair order
    std::size_t s2_count = 0;
    double share_s1_0 = 0.0, share_s1_1 = 0.0, share_s2_0 = 0.0, share_s2_1 = 0.0, share_s2 = 0.0;
    PairStatistic stat;
    bool skipped = false;
    std::vector<std::string> warnings;
};

/// Statistic and multiplier bootstrap over one or more pairs that share multipliers.
struct Inference {
    double T = -INFINITY, T_nesting = -INFINITY, T_index = -INFINITY;
    bool nesting_available = false, index_available = false;
    double p_overall = NAN, p_nesting = NAN, p_index = NAN;
    std::vector<double> boot_T, boot_nesting, boot_index;
    std::vector<PairStatistic> pairs;
    std::vector<std::vector<std::string>> pair_warnings;
    std::vector<MomentTables> tables;
};

/// n_total is the size of the multiplier vector; MomentInput::obs index into it.
Inference infer(const std::vector<MomentInput>& inputs, std::size_t n_total, const TestConfig& cfg);

/// (1 + #{draws >= t}) / (1 + B).
double boot_pvalue(const std::vector<double>& draws, double t);

struct TestReport {
    std::string method = "proposed";
    std::size_t n = 0;
    int levels = 0;
    double T = NAN, T_nesting = NAN, T_index = NAN;
    bool nesting_available = false, index_available = false;
    double p_overall = NAN, p_nesting = NAN, p_index = NAN;
    int n_boot = 0;
    std::vector<double> boot_T, boot_nesting, boot_index;
    std::vector<PairReport> pairs;
    FirstStage first;
    PzEstimate pz;
    TestConfig cfg;
    EstimationOptions opts;
    std::vector<std::string> warnings;
};

TestReport run_test_binary(const Dataset& ds, const TestConfig& cfg, const EstimationOptions& opts = {});
TestReport run_test_multivalued(const Dataset& ds, const TestConfig& cfg, const EstimationOptions& opts = {});

/// Same as run_test_multivalued on an already estimated first stage.
TestReport run_test_from(const Dataset& ds, const FirstStage& first, const TestConfig& cfg,
                         const EstimationOptions& opts);

/// Kernel-smoothed subdensities of (u, D=d) by instrument level, all observations and
/// distilled (s1) observations of the first pair. Gaussian kernel, rule-of-thumb bandwidth.
struct DensityTable {
    std::vector<double> grid;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;  // one per column
};

DensityTable subdensities(const TestReport& report, const Dataset& ds, std::size_t points = 200);

}  // namespace ivv
