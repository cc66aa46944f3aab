#pragma once

#include "ivv/ivtest.hpp"

#include <string>
#include <vector>

namespace ivv {

enum class BaselineKind { no_covariates, binarized_pscore };

std::string to_string(BaselineKind k);

struct BaselineReport {
    BaselineKind which = BaselineKind::no_covariates;
    double T = NAN;
    double p_value = NAN;
    int n_boot = 0;
    std::vector<double> boot;
    std::vector<PairStatistic> pairs;
    int bins = 2;
    std::vector<std::string> warnings;
};

/// Nesting statistic on raw (y, d) by instrument level, no trimming.
BaselineReport test_no_covariates(const Dataset& ds, const TestConfig& cfg);

/// Nesting statistic on partial residuals by propensity-score bin (weighted-quantile cuts;
/// two bins = median split). No distillation.
BaselineReport test_binarized_pscore(const Dataset& ds, const TestConfig& cfg, const EstimationOptions& opts = {},
                                     int bins = 2);
BaselineReport test_binarized_from(const FirstStage& first, const TestConfig& cfg, int bins = 2);

/// Bin index of each score: number of weighted-quantile cut points strictly below it.
std::vector<int> coarsen_pscore(const Vec& p, const Vec& w, int bins);

}  // namespace ivv
