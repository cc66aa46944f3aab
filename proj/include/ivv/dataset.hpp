#pragma once

#include "ivv/core.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace ivv {

/// Observations (y, d, x, z, weight). Immutable once built by make_dataset or load_csv.
struct Dataset {
    Vec y;
    std::vector<int> d;
    Mat x;                          // n x k, exactly the supplied columns (no intercept added)
    std::vector<int> z;             // recoded levels 0..K-1
    Vec w;                          // positive weights, 1 by default
    std::vector<long long> z_codes; // original code of each recoded level, ascending
    std::vector<std::string> x_names;
    bool weighted = false;

    std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    Eigen::Index k() const { return x.cols(); }
    int levels() const { return static_cast<int>(z_codes.size()); }
};

/// Validates and recodes. Throws DataError on invariant violations; soft problems
/// (a level without treated or untreated observations, K < 2) go to `warnings`.
Dataset make_dataset(Vec y, std::vector<int> d, Mat x, const std::vector<double>& z_raw, Vec w = Vec(),
                     std::vector<std::string>* warnings = nullptr);

struct CsvSchema {
    std::string y = "y";
    std::string d = "d";
    std::string z = "z";
    std::vector<std::string> x;
    std::string weight;  // empty: unit weights
};

struct LoadReport {
    std::vector<std::size_t> dropped_lines;  // 1-based file line numbers removed for missing values
    std::vector<std::string> warnings;
};

/// Reads a headered CSV. Rows with a missing mapped value are deleted listwise and
/// reported; malformed rows and invalid values raise DataError naming the line.
Dataset load_csv(const std::string& path, const CsvSchema& schema, LoadReport* report = nullptr);

/// Reads the named numeric columns of a headered CSV, deleting rows with a missing value.
Mat load_columns(const std::string& path, const std::vector<std::string>& names, LoadReport* report = nullptr);

/// Observations sharing one instrument level.
struct SubsampleView {
    const Dataset* parent = nullptr;
    int level = 0;
    std::vector<std::size_t> indices;  // ascending
    double count = 0.0;                // weighted tally of indices
    double lambda = 0.0;               // weighted share Pr(Z = level)
};

std::vector<SubsampleView> split_by_instrument(const Dataset& ds);

/// Observations with Z in {lo, lo+1}; group 0 = level lo, group 1 = level lo+1.
struct PairView {
    int lo = 0;
    std::vector<std::size_t> indices;  // ascending
    std::vector<int> group;
    double n0 = 0.0, n1 = 0.0;         // weighted tallies
    double lambda = 0.0;               // n1 / (n0 + n1)
};

PairView make_pair_view(const Dataset& ds, int lo);

/// Subset of rows, keeping the level coding of the parent.
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows);

}  // namespace ivv
