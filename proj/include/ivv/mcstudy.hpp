#pragma once

#include "ivv/baselines.hpp"
#include "ivv/dataset.hpp"
#include "ivv/ivtest.hpp"
#include "ivv/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ivv {

enum class DgpKind { size, power1, power2, power3, power4 };
enum class GammaMode { zero, uniform };
enum class DeltaMode { wide, narrow };  // U(-1,1) or U(-0.1,0.1)

DgpKind parse_dgp(const std::string& s);
std::string to_string(DgpKind k);
GammaMode parse_gamma(const std::string& s);
std::string to_string(GammaMode g);
DeltaMode parse_delta(const std::string& s);
std::string to_string(DeltaMode d);

struct DgpSpec {
    DgpKind kind = DgpKind::size;
    std::size_t n = 500;
    GammaMode gamma = GammaMode::zero;
    DeltaMode delta = DeltaMode::wide;
    double sigma_offdiag = 0.3;
};

struct DgpParams {
    Vec theta, gamma, delta;  // length 3
    double alpha0 = 0.0, alpha1 = 0.0;
};

DgpParams draw_params(const DgpSpec& spec, Rng& rng);

/// One sample of the Monte Carlo process. mu_index (DGP4 only) receives the index of the
/// mixture location drawn for each observation.
Dataset draw_sample(const DgpSpec& spec, const DgpParams& params, Rng& rng, std::vector<int>* mu_index = nullptr);

/// Estimation settings used for simulated data: probit on (1, Z, X), common slopes.
EstimationOptions mc_estimation_options();

enum class Method { proposed, no_covariates, binarized };

Method parse_method(const std::string& s);
std::string to_string(Method m);

struct StudyConfig {
    TestConfig test;                  // seed is the study seed; xi is replaced by each entry of xis
    std::vector<double> xis{std::sqrt(0.05 * 0.95)};
    std::vector<double> levels{0.10, 0.05, 0.01};
    int reps = 200;
    bool fix_params = false;
    bool components = false;          // report nesting and index rows for the proposed method
    int threads = 1;
    EstimationOptions estimation = mc_estimation_options();
};

struct RejectionRow {
    std::string dgp, gamma, delta, method, component;
    std::size_t n = 0;
    double xi = 0.0, level = 0.0;
    double rate = 0.0, se = 0.0;
    int reps = 0, failed = 0;
};

struct ReplicationRecord {
    std::string dgp;
    std::size_t n = 0;
    int rep = 0;
    std::string method;
    double xi = 0.0;
    bool ok = false;
    double p_overall = NAN, p_nesting = NAN, p_index = NAN;
    std::string error;
};

struct RejectionTable {
    std::vector<RejectionRow> rows;
    std::vector<ReplicationRecord> log;

    std::string to_csv() const;
    std::string to_text() const;
    const RejectionRow* find(const std::string& dgp, std::size_t n, const std::string& method,
                             const std::string& component, double level, double xi = -1.0) const;
};

RejectionTable rejection_study(const std::vector<DgpSpec>& specs, const std::vector<Method>& methods,
                               const StudyConfig& cfg);

/// Proposed method only, with nesting, index and overall rows.
RejectionTable component_study(const std::vector<DgpSpec>& specs, const StudyConfig& cfg);

}  // namespace ivv
