#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oscillattr/coupling.hpp"
#include "oscillattr/dynamics.hpp"
#include "oscillattr/energy.hpp"

namespace oscillattr {

struct ModelConfig {
    int N = 0;
    int d = 1;
    double h = 1.0;
    Boundary bc = Boundary::neumann;
    std::optional<std::filesystem::path> matrix_file;
};

struct NumericsConfig {
    double dt = 1e-3;
    std::optional<double> T;  // subcommand default when absent
    int n_seeds = 8;
    std::uint64_t seed0 = 0;
    int n_cloud = 256;
    int n_bins = 64;
    std::optional<double> delta;
    unsigned workers = 1;
    RdeScheme scheme = RdeScheme::exponential_midpoint;
    std::int64_t record_every = 1;
    int substeps = 1;
};

struct OutputConfig {
    std::filesystem::path directory = "oscillattr_out";
    std::vector<std::string> formats{"csv", "json"};

    bool wants(std::string_view format) const;
};

struct RunConfig {
    ModelConfig model;
    CouplingMatrix A;
    OscillatorParams params;
    NumericsConfig numerics;
    OutputConfig outputs;
    std::string sha256;  // digest of the raw config text
};

/// Parses JSON config text. Unknown keys, wrong types and out-of-range
/// values raise ValidationError naming the offending field. Relative
/// matrix_file paths resolve against base_dir.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// seed0 + fnv1a64(tag) + index (mod 2^64).
std::uint64_t derive_seed(std::uint64_t seed0, std::string_view tag, std::uint64_t index);

}  // namespace oscillattr
