#pragma once

#include "ivv/dataset.hpp"
#include "ivv/rng.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

/// Writes `text` to a fresh file under the system temp directory.
inline std::string write_temp(const std::string& name, const std::string& text) {
    auto dir = std::filesystem::temp_directory_path() / "ivv_tests";
    std::filesystem::create_directories(dir);
    auto path = (dir / name).string();
    std::ofstream(path) << text;
    return path;
}

inline ivv::Dataset dataset(const std::vector<double>& y, const std::vector<int>& d, const std::vector<int>& z,
                            const std::vector<double>& w = {}) {
    ivv::Vec yy = Eigen::Map<const ivv::Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
    ivv::Mat x = ivv::Mat::Zero(static_cast<Eigen::Index>(y.size()), 0);
    std::vector<double> zr(z.begin(), z.end());
    ivv::Vec ww;
    if (!w.empty()) ww = Eigen::Map<const ivv::Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
    return ivv::make_dataset(yy, d, x, zr, ww);
}

inline ivv::Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const ivv::Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace fixtures
