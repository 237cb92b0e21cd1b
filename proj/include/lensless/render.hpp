#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lensless/diffuser.hpp"
#include "lensless/geometry.hpp"
#include "lensless/psf_stack.hpp"
#include "lensless/tensor.hpp"

namespace lensless {

struct RenderOptions {
    long long rays = 10'000'000;   // per PSF
    int threads = 1;
    uint64_t seed_salt = 0;        // combined with the surface seed
    double source_x_um = 0.0;      // lateral source offset in object space
    double source_y_um = 0.0;
};

/// Ray-traced caustic of a point source at depth z through the diffuser.
/// Rays sample the aperture uniformly, pick up the thin-phase-screen
/// deflection (n-1)·∇h, travel d to the sensor and are binned into pixels.
/// Binning uses integer per-ray counts, so the result is bit-identical for
/// any thread count. Normalized to unit sum over the rays that land.
Image<float> render_psf(const DiffuserSurface& surface, double z_mm,
                        const SystemGeometry& geom, const RenderOptions& opts = {});

/// One on-axis render per grid depth plane.
PsfStack calibrate(const DiffuserSurface& surface, const VolumeGrid& grid,
                   const SystemGeometry& geom, const RenderOptions& opts = {});

struct PointSource {
    double x_um = 0.0;   // object-space lateral position
    double y_um = 0.0;
    double z_mm = 0.0;
    double intensity = 1.0;
};

/// Either a sparse point list or a dense volume on the reconstruction grid.
struct Scene {
    std::vector<PointSource> points;
    std::optional<Tensor3<float>> volume;
};

struct NoiseModel {
    enum class Kind { None, Gaussian, Poisson };
    Kind kind = Kind::None;
    double gaussian_sigma = 0.0;   // additive, in measurement units
    double poisson_scale = 1.0;    // expected photons per unit of signal
    uint64_t seed = 0;
};

/// Linear measurement of the scene through the calibrated stack: every point
/// contributes its depth plane's PSF, laterally shifted by -m·(x, y) (the
/// caustics move opposite to the source) and scaled by its intensity; a dense
/// volume goes through the convolution operator. Optional noise, then a
/// clamp to >= 0. T picks the accumulation/output precision.
template <typename T = float>
Image<T> simulate_measurement(const Scene& scene, const PsfStack& stack,
                              const VolumeGrid& grid, const SystemGeometry& geom,
                              const NoiseModel& noise = {});

extern template Image<float> simulate_measurement<float>(
    const Scene&, const PsfStack&, const VolumeGrid&, const SystemGeometry&, const NoiseModel&);
extern template Image<double> simulate_measurement<double>(
    const Scene&, const PsfStack&, const VolumeGrid&, const SystemGeometry&, const NoiseModel&);

/// 2x2 block sum; both sensor dimensions must be even.
Image<float> bin2x2(const Image<float>& img);

/// Area (pixel count) of the bounding box of the brightest pixels holding
/// the given energy fraction. Tracks how the caustic footprint spreads.
long long energy_support_bbox_area(const Image<float>& psf, double fraction = 0.99);

}  // namespace lensless
