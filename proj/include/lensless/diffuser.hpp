#pragma once

#include <cstdint>

#include "lensless/tensor.hpp"

namespace lensless {

/// Sampling lattice for the diffuser surface, centered on the optical axis.
struct DiffuserLattice {
    int ny = 0;
    int nx = 0;
    double pitch_um = 20.0;
    double width_um() const { return nx * pitch_um; }
    double height_um() const { return ny * pitch_um; }
};

/// Smooth pseudorandom refractive surface. Heights in µm on the lattice;
/// gradients are cached because the renderer evaluates them per ray.
struct DiffuserSurface {
    Image<double> heightmap;       // µm
    Image<double> grad_x;          // dh/dx, dimensionless
    Image<double> grad_y;          // dh/dy
    DiffuserLattice lattice;
    double feature_size_um = 140.0;
    double rms_slope_deg = 0.7;    // target mean deflection magnitude
    double refractive_index_contrast = 0.5;  // n - 1
    uint64_t rng_seed = 0;
};

/// Gaussian-lowpass-filtered white noise, rescaled so the mean deflection
/// (n-1)·|∇h| matches rms_slope_deg. Deterministic in (seed, params).
DiffuserSurface generate_diffuser(uint64_t seed, double feature_size_um,
                                  double rms_slope_deg, const DiffuserLattice& lattice,
                                  double refractive_index_contrast = 0.5);

/// Rebuild a surface (with gradient caches) from a stored heightmap. The
/// heights are used as-is; no slope rescaling is applied.
DiffuserSurface surface_from_heightmap(Image<double> heightmap, const DiffuserLattice& lattice,
                                       double feature_size_um, double rms_slope_deg,
                                       double refractive_index_contrast, uint64_t seed);

/// Measured mean deflection angle (n-1)·mean|∇h| in degrees.
double mean_slope_deg(const DiffuserSurface& s);

/// Full width at half maximum of the height autocorrelation, in µm,
/// measured along x and averaged over rows.
double autocorrelation_fwhm_um(const DiffuserSurface& s);

}  // namespace lensless
