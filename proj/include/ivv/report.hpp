#pragma once

#include "ivv/baselines.hpp"
#include "ivv/biasoracle.hpp"
#include "ivv/ivtest.hpp"
#include "ivv/mcstudy.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ivv {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.3.0";

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string fnv1a_file(const std::string& path);

/// Non-finite values become null.
Json num(double x);

Json to_json(const Interval& iv);
Json to_json(const Argmax& a);
Json to_json(const TestConfig& cfg);
Json to_json(const EstimationOptions& opts);
Json to_json(const DistilledSample& ds);
Json to_json(const TestReport& r);
Json to_json(const BaselineReport& r);
Json to_json(const ExampleParams& p);
Json to_json(const BiasScalars& s);

std::string density_csv(const DensityTable& t);
std::string replication_csv(const std::vector<ReplicationRecord>& log);

struct InputDigest {
    std::string path;
    std::string fnv1a;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string subcommand;
    Json config = Json::object();
    std::vector<InputDigest> inputs;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::vector<std::string> outputs;
    double wall_seconds = 0.0;

    void add_input(const std::string& path);
    /// Digest of everything that determines the outputs (not wall time or output names).
    std::string digest() const;
    /// Embedded form for primary outputs: no wall time, so reruns are byte-identical.
    Json embedded() const;
    /// Standalone manifest file, including wall time.
    Json full() const;
};

/// Pretty-printed JSON followed by a newline.
std::string dump(const Json& j);

}  // namespace ivv
