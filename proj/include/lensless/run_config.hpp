#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lensless/diffuser.hpp"
#include "lensless/geometry.hpp"
#include "lensless/solver.hpp"

namespace lensless {

struct DiffuserParams {
    int ny = 424;
    int nx = 424;
    double pitch_um = 10.0;
    double feature_size_um = 140.0;
    double rms_slope_deg = 0.7;
    double refractive_index_contrast = 0.5;
};

struct GridParams {
    int nx = 256;
    int ny = 256;
    double z_min_mm = 10.0;
    double z_max_mm = 40.0;
    int num_planes = 16;
};

/// Everything a pipeline run needs, loadable from a `key = value` text file.
/// Defaults describe a desk-scale system that runs in minutes on one core;
/// the full-scale bench values are all reachable through the same keys.
struct RunConfig {
    SystemGeometry geometry;  // reduced to a 256x256 sensor by default
    DiffuserParams diffuser;
    GridParams grid;
    SolverConfig solver;
    long long render_rays = 10'000'000;
    uint64_t seed = 1;
    int threads = 1;

    RunConfig();  // applies the desk-scale geometry defaults
};

/// Parses and validates; rejects unknown or duplicate keys by name. The
/// grid range keys (z_min_mm, z_max_mm, num_planes) must be given together
/// or not at all.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// One line per recognized key with its default, for --help and docs.
std::string run_config_keys_help();

/// The reciprocal-spaced depth schedule and lattice described by the config.
VolumeGrid grid_from_config(const RunConfig& cfg);
DiffuserLattice lattice_from_config(const RunConfig& cfg);

}  // namespace lensless
