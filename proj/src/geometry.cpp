#include "lensless/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lensless/errors.hpp"

namespace lensless {

namespace {
constexpr double kPi = 3.14159265358979323846;
double deg(double rad) { return rad * 180.0 / kPi; }

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(std::string(name) + " must be positive and finite, got " +
                              std::to_string(v));
    }
}
}  // namespace

void validate_geometry(const SystemGeometry& g) {
    if (g.sensor_width_px <= 0 || g.sensor_height_px <= 0) {
        throw ValidationError("sensor dimensions must be positive");
    }
    require_positive(g.pixel_pitch_um, "pixel_pitch_um");
    require_positive(g.diffuser_to_sensor_mm, "diffuser_to_sensor_mm");
    require_positive(g.aperture_width_mm, "aperture_width_mm");
    require_positive(g.aperture_height_mm, "aperture_height_mm");
    if (!(g.max_deflection_deg >= 0.0 && g.max_deflection_deg < 90.0)) {
        throw ValidationError("max_deflection_deg must lie in [0, 90), got " +
                              std::to_string(g.max_deflection_deg));
    }
    for (double a : {g.pixel_cutoff_x_deg, g.pixel_cutoff_y_deg}) {
        if (!(a > 0.0 && a <= 90.0)) {
            throw ValidationError("pixel cutoff angles must lie in (0, 90], got " +
                                  std::to_string(a));
        }
    }
    require_positive(g.min_object_distance_mm, "min_object_distance_mm");
    require_positive(g.hyperfocal_distance_mm, "hyperfocal_distance_mm");
    if (g.hyperfocal_distance_mm <= g.min_object_distance_mm) {
        throw ValidationError("hyperfocal_distance_mm must exceed min_object_distance_mm");
    }
}

FovReport compute_fov(const SystemGeometry& g) {
    validate_geometry(g);
    FovReport r;
    // A sensor point sees diffuser light over atan((l+w)/2d) where l is the
    // aperture extent and w the sensor extent; the diffuser can bend rays by
    // at most beta beyond that cone, and the pixel response clips at alpha_c.
    auto axis = [&](double aperture_mm, double sensor_mm, double cutoff_deg, FovLimit& lim) {
        double geometric = deg(std::atan((aperture_mm + sensor_mm) / (2.0 * g.diffuser_to_sensor_mm)));
        lim = cutoff_deg < geometric ? FovLimit::PixelResponse : FovLimit::Geometric;
        return std::min(90.0, g.max_deflection_deg + std::min(cutoff_deg, geometric));
    };
    r.half_fov_x_deg = axis(g.aperture_width_mm, g.sensor_width_mm(), g.pixel_cutoff_x_deg, r.limit_x);
    r.half_fov_y_deg = axis(g.aperture_height_mm, g.sensor_height_mm(), g.pixel_cutoff_y_deg, r.limit_y);
    r.z_min_mm = g.min_object_distance_mm;
    r.z_max_mm = g.hyperfocal_distance_mm;
    return r;
}

double magnification(double z_mm, const SystemGeometry& g) {
    if (!(z_mm > 0.0) || !std::isfinite(z_mm)) {
        throw ValidationError("magnification requires z > 0, got " + std::to_string(z_mm));
    }
    return g.diffuser_to_sensor_mm / z_mm;
}

std::vector<double> depth_plane_spacing(double z_min_mm, double z_max_mm, double c_per_mm) {
    require_positive(z_min_mm, "z_min_mm");
    require_positive(z_max_mm, "z_max_mm");
    if (z_max_mm < z_min_mm) {
        throw ValidationError("z_max_mm must be >= z_min_mm");
    }
    if (z_min_mm == z_max_mm) return {z_min_mm};
    require_positive(c_per_mm, "reciprocal spacing c");
    if (c_per_mm >= 1.0 / z_min_mm) {
        throw ValidationError("reciprocal spacing c too coarse: 1/z_min - c is not positive");
    }
    std::vector<double> planes;
    const double u0 = 1.0 / z_min_mm;
    // Evaluate u_k = u0 - k*c directly rather than accumulating, so the
    // spacing in reciprocal depth stays constant to rounding.
    const double z_limit = z_max_mm * (1.0 + 1e-12);
    for (int k = 0;; ++k) {
        double u = u0 - k * c_per_mm;
        if (!(u > 0.0)) break;
        double z = 1.0 / u;
        if (z > z_limit) break;
        planes.push_back(z);
    }
    return planes;
}

double reciprocal_spacing_for_count(double z_min_mm, double z_max_mm, int count) {
    require_positive(z_min_mm, "z_min_mm");
    require_positive(z_max_mm, "z_max_mm");
    if (count < 2 || z_max_mm <= z_min_mm) {
        throw ValidationError("reciprocal_spacing_for_count needs count >= 2 and z_max > z_min");
    }
    return (1.0 / z_min_mm - 1.0 / z_max_mm) / (count - 1);
}

int VolumeGrid::nearest_plane(double z_mm) const {
    if (depth_planes_mm.empty()) throw ValidationError("empty depth schedule");
    auto it = std::lower_bound(depth_planes_mm.begin(), depth_planes_mm.end(), z_mm);
    if (it == depth_planes_mm.end()) return nz() - 1;
    if (it == depth_planes_mm.begin()) return 0;
    auto prev = it - 1;
    return (z_mm - *prev <= *it - z_mm) ? int(prev - depth_planes_mm.begin())
                                        : int(it - depth_planes_mm.begin());
}

VolumeGrid build_grid(const SystemGeometry& g, const std::vector<double>& z_planes_mm,
                      int nx, int ny) {
    validate_geometry(g);
    if (nx <= 0 || ny <= 0) throw ValidationError("grid nx/ny must be positive");
    if (z_planes_mm.empty()) throw ValidationError("grid needs at least one depth plane");
    for (size_t i = 1; i < z_planes_mm.size(); ++i) {
        if (!(z_planes_mm[i] > z_planes_mm[i - 1])) {
            throw ValidationError("depth planes must be strictly increasing");
        }
    }
    std::ostringstream bad;
    for (double z : z_planes_mm) {
        if (z < g.min_object_distance_mm || z > g.hyperfocal_distance_mm) {
            bad << (bad.tellp() > 0 ? ", " : "") << z;
        }
    }
    if (bad.tellp() > 0) {
        throw ValidationError("depth planes outside axial field of view [" +
                              std::to_string(g.min_object_distance_mm) + ", " +
                              std::to_string(g.hyperfocal_distance_mm) + "] mm: " + bad.str());
    }
    VolumeGrid v;
    v.depth_planes_mm = z_planes_mm;
    v.nx = nx;
    v.ny = ny;
    v.magnifications.reserve(z_planes_mm.size());
    v.pitch_um.reserve(z_planes_mm.size());
    for (double z : z_planes_mm) {
        double m = magnification(z, g);
        v.magnifications.push_back(m);
        // A one-pixel caustic shift corresponds to pitch/m of source motion,
        // so the natural voxel pitch grows linearly with depth.
        v.pitch_um.push_back(g.pixel_pitch_um / m);
    }
    return v;
}

std::string to_string(FovLimit l) {
    return l == FovLimit::Geometric ? "geometric" : "pixel-response";
}

}  // namespace lensless
