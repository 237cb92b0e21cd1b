#pragma once

#include <string>
#include <vector>

namespace lensless {

/// Physical layout of the sensor / aperture / diffuser assembly.
/// Lengths in the units noted per field; angles in degrees.
struct SystemGeometry {
    int sensor_width_px = 2560;
    int sensor_height_px = 2160;
    double pixel_pitch_um = 6.5;
    double diffuser_to_sensor_mm = 8.9;  // d
    double aperture_width_mm = 7.5;      // x extent of the aperture
    double aperture_height_mm = 5.5;     // y extent
    double max_deflection_deg = 0.5;     // diffuser deflection bound (beta)
    double pixel_cutoff_x_deg = 41.5;    // pixel angular response cutoff (alpha_c)
    double pixel_cutoff_y_deg = 30.0;
    double min_object_distance_mm = 7.3;
    double hyperfocal_distance_mm = 2300.0;

    double sensor_width_mm() const { return sensor_width_px * pixel_pitch_um * 1e-3; }
    double sensor_height_mm() const { return sensor_height_px * pixel_pitch_um * 1e-3; }
};

/// Throws ValidationError naming the first offending field.
/// Angle domains: beta in [0, 90), pixel cutoffs in (0, 90] (90 = no pixel
/// limit), everything else strictly positive.
void validate_geometry(const SystemGeometry& geom);

enum class FovLimit { Geometric, PixelResponse };

struct FovReport {
    double half_fov_x_deg = 0.0;
    double half_fov_y_deg = 0.0;
    FovLimit limit_x = FovLimit::Geometric;
    FovLimit limit_y = FovLimit::Geometric;
    double z_min_mm = 0.0;
    double z_max_mm = 0.0;
};

/// Angular half field of view per axis: beta + min(alpha_c, atan((l+w)/2d)),
/// with the binding term recorded. Axial range is (min object distance,
/// hyperfocal distance).
FovReport compute_fov(const SystemGeometry& geom);

/// Paraxial magnification of the caustic shift, pinhole model m(z) = d/z.
/// This is the single place the magnification law lives; swap here to model
/// a different projection.
double magnification(double z_mm, const SystemGeometry& geom);

/// Depth schedule with constant reciprocal spacing: 1/z_k - 1/z_{k+1} = c.
/// Returns the maximal sequence starting at z_min and truncated at z_max.
/// z_min == z_max yields the single plane [z_min] for any c.
std::vector<double> depth_plane_spacing(double z_min_mm, double z_max_mm, double c_per_mm);

/// The c that places exactly `count` planes between the endpoints inclusive.
double reciprocal_spacing_for_count(double z_min_mm, double z_max_mm, int count);

/// Non-uniform reconstruction lattice: shared lateral counts, per-plane
/// lateral pitch pixel_pitch / m(z).
struct VolumeGrid {
    std::vector<double> depth_planes_mm;  // strictly increasing
    int nx = 0;
    int ny = 0;
    std::vector<double> magnifications;   // m(z) per plane, strictly decreasing
    std::vector<double> pitch_um;         // lateral voxel pitch per plane

    int nz() const { return int(depth_planes_mm.size()); }
    size_t voxel_count() const { return size_t(nz()) * ny * nx; }
    /// Half extent of the lateral lattice at plane k, in mm.
    double half_width_mm(int k) const { return 0.5 * nx * pitch_um[k] * 1e-3; }
    double half_height_mm(int k) const { return 0.5 * ny * pitch_um[k] * 1e-3; }
    /// Plane index with z nearest to the query.
    int nearest_plane(double z_mm) const;
};

/// Assemble the grid; every plane must lie inside the axial field of view.
VolumeGrid build_grid(const SystemGeometry& geom, const std::vector<double>& z_planes_mm,
                      int nx, int ny);

std::string to_string(FovLimit l);

}  // namespace lensless
