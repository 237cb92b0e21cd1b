#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lensless/geometry.hpp"
#include "lensless/psf_stack.hpp"
#include "lensless/solver.hpp"
#include "lensless/tensor.hpp"

namespace lensless {

enum class Axis { X, Y, Z };

/// Outcome of a distinguishability experiment: sources are simulated, the
/// scene is reconstructed without regularization, and adjacent sources count
/// as resolved when the profile between them dips by at least the threshold
/// relative to the dimmer peak.
struct ResolvabilityResult {
    std::string layout;                 // "2-point-x", "4x4-xz", ...
    double separation_lateral_um = 0.0;
    double separation_axial_mm = 0.0;
    int n_sources = 0;
    bool peaks_detected = false;
    bool resolved = false;
    double dip_fraction = 0.0;          // worst adjacent-pair dip, in [0, 1]
    std::string diagnostic;
    Tensor3<float> reconstruction;      // windowed volume, for inspection
};

/// Two unit sources straddling the optical axis along one axis. Lateral
/// separations are in micrometers, axial separations in millimeters. The
/// solver runs with lambda forced to zero so the result reflects the
/// measurement operator, not the prior.
ResolvabilityResult two_point_test(const PsfStack& stack, const VolumeGrid& grid,
                                   const SystemGeometry& geom, double z_mm, Axis axis,
                                   double separation, const SolverConfig& solver_cfg,
                                   double dip_threshold = 0.2);

/// side x side constellation in the x-z plane centered on (0, z_mm), with
/// lateral spacing spacing_x_um and axial spacing spacing_z_mm. Resolved
/// requires every adjacent pair, along both x and z, to pass the dip test.
ResolvabilityResult multi_point_test(const PsfStack& stack, const VolumeGrid& grid,
                                     const SystemGeometry& geom, double z_mm, int side,
                                     double spacing_x_um, double spacing_z_mm,
                                     const SolverConfig& solver_cfg,
                                     double dip_threshold = 0.2);

struct VoxelIndex {
    int k = 0;  // depth plane
    int y = 0;
    int x = 0;
};

struct LocalCondition {
    double value = 1.0;         // sigma_max / sigma_min
    bool rank_deficient = false;  // value is +inf when set
};

/// Conditioning of the measurement sub-matrix spanned by the given voxels:
/// each column is the forward image of a unit voxel, and the value is the
/// singular-value ratio of that column block. Columns are materialized in
/// 64-bit precision regardless of how the solver would run.
LocalCondition local_condition_number(const PsfStack& stack, const VolumeGrid& grid,
                                      const std::vector<VoxelIndex>& constellation);

enum class ConstellationPlane { XZ, XY };

struct ConditioningCurve {
    int n_sources = 0;
    double depth_mm = 0.0;
    ConstellationPlane plane = ConstellationPlane::XY;
    std::vector<int> separations;          // voxels
    std::vector<double> condition_numbers;  // +inf where rank_deficient
    std::vector<uint8_t> rank_deficient;
};

/// Square constellations of each requested source count swept over integer
/// voxel separations; one curve per count. Counts must be perfect squares.
std::vector<ConditioningCurve> conditioning_sweep(
    const PsfStack& stack, const VolumeGrid& grid, double z_mm,
    const std::vector<int>& n_sources, const std::vector<int>& separations,
    ConstellationPlane plane = ConstellationPlane::XY);

struct PsfSimilarity {
    double inner_product = 0.0;  // cosine similarity at the best alignment
    double spot_ratio = 1.0;     // correlation-peak width vs the autocorrelation
};

/// How close an off-axis caustic is to a rigid shift of the on-axis one.
/// Both patterns are normalized to unit energy and registered by locating
/// the cross-correlation peak; the spot ratio compares the half-max support
/// of that peak against the on-axis autocorrelation peak.
PsfSimilarity psf_similarity(const Image<float>& on_axis, const Image<float>& off_axis);

std::string curves_csv(const std::vector<ConditioningCurve>& curves);
std::string resolvability_csv(const ResolvabilityResult& result);

}  // namespace lensless
