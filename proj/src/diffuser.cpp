#include "lensless/diffuser.hpp"

#include <cmath>
#include <vector>

#include "lensless/errors.hpp"
#include "lensless/rng.hpp"

namespace lensless {

namespace {
constexpr double kPi = 3.14159265358979323846;

int wrap(int i, int n) { return ((i % n) + n) % n; }

// Circular separable convolution along one axis (stride picks the axis).
void convolve_axis(std::vector<double>& data, int ny, int nx, bool along_x,
                   const std::vector<double>& kernel) {
    const int r = int(kernel.size() / 2);
    std::vector<double> line;
    if (along_x) {
        line.resize(nx);
        for (int y = 0; y < ny; ++y) {
            double* row = data.data() + size_t(y) * nx;
            for (int x = 0; x < nx; ++x) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k) acc += kernel[k + r] * row[wrap(x + k, nx)];
                line[x] = acc;
            }
            std::copy(line.begin(), line.end(), row);
        }
    } else {
        line.resize(ny);
        for (int x = 0; x < nx; ++x) {
            for (int y = 0; y < ny; ++y) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k)
                    acc += kernel[k + r] * data[size_t(wrap(y + k, ny)) * nx + x];
                line[y] = acc;
            }
            for (int y = 0; y < ny; ++y) data[size_t(y) * nx + x] = line[y];
        }
    }
}

void compute_gradients(DiffuserSurface& s) {
    const int ny = s.lattice.ny, nx = s.lattice.nx;
    const double inv2p = 1.0 / (2.0 * s.lattice.pitch_um);
    s.grad_x = Image<double>(ny, nx);
    s.grad_y = Image<double>(ny, nx);
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            s.grad_x.at(y, x) =
                (s.heightmap.at(y, wrap(x + 1, nx)) - s.heightmap.at(y, wrap(x - 1, nx))) * inv2p;
            s.grad_y.at(y, x) =
                (s.heightmap.at(wrap(y + 1, ny), x) - s.heightmap.at(wrap(y - 1, ny), x)) * inv2p;
        }
    }
}
}  // namespace

DiffuserSurface generate_diffuser(uint64_t seed, double feature_size_um, double rms_slope_deg,
                                  const DiffuserLattice& lattice,
                                  double refractive_index_contrast) {
    if (lattice.nx < 4 || lattice.ny < 4 || !(lattice.pitch_um > 0.0)) {
        throw ValidationError("diffuser lattice must be at least 4x4 with positive pitch");
    }
    if (!(feature_size_um > 2.0 * lattice.pitch_um)) {
        throw ValidationError("feature_size_um must exceed two lattice pitches (" +
                              std::to_string(2.0 * lattice.pitch_um) + " um)");
    }
    if (!(rms_slope_deg >= 0.0) || !(refractive_index_contrast > 0.0)) {
        throw ValidationError("slope target must be >= 0 and index contrast positive");
    }

    const int ny = lattice.ny, nx = lattice.nx;
    std::vector<double> h(size_t(ny) * nx);
    for (size_t i = 0; i < h.size(); i += 2) {
        // Key each site pair on (seed, index) so generation order is immaterial.
        SplitMix64 rs(mix_key(seed, i));
        double g0, g1;
        gaussian_pair(rs, g0, g1);
        h[i] = g0;
        if (i + 1 < h.size()) h[i + 1] = g1;
    }

    // Filtered white noise has a Gaussian autocorrelation of std sigma*sqrt(2);
    // match its FWHM to the requested feature size.
    const double sigma_um = feature_size_um / (4.0 * std::sqrt(std::log(2.0)));
    const double sigma_l = sigma_um / lattice.pitch_um;
    const int radius = int(std::ceil(4.0 * sigma_l));
    if (2 * radius + 1 > std::min(nx, ny)) {
        throw ValidationError("feature_size_um too large for the diffuser lattice extent");
    }
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * (k / sigma_l) * (k / sigma_l));
        ksum += kernel[k + radius];
    }
    for (double& v : kernel) v /= ksum;
    convolve_axis(h, ny, nx, true, kernel);
    convolve_axis(h, ny, nx, false, kernel);

    DiffuserSurface s;
    s.heightmap = Image<double>(ny, nx);
    s.heightmap.v = std::move(h);
    s.lattice = lattice;
    s.feature_size_um = feature_size_um;
    s.rms_slope_deg = rms_slope_deg;
    s.refractive_index_contrast = refractive_index_contrast;
    s.rng_seed = seed;
    compute_gradients(s);

    double mean_grad = 0.0;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            mean_grad += std::hypot(s.grad_x.at(y, x), s.grad_y.at(y, x));
    mean_grad /= double(ny) * nx;

    const double target_rad = rms_slope_deg * kPi / 180.0;
    double factor = 0.0;
    if (mean_grad > 0.0 && target_rad > 0.0) {
        factor = target_rad / (refractive_index_contrast * mean_grad);
    }
    for (auto& v : s.heightmap.v) v *= factor;
    for (auto& v : s.grad_x.v) v *= factor;
    for (auto& v : s.grad_y.v) v *= factor;
    return s;
}

DiffuserSurface surface_from_heightmap(Image<double> heightmap, const DiffuserLattice& lattice,
                                       double feature_size_um, double rms_slope_deg,
                                       double refractive_index_contrast, uint64_t seed) {
    if (heightmap.ny != lattice.ny || heightmap.nx != lattice.nx) {
        throw ValidationError("heightmap shape does not match the diffuser lattice");
    }
    if (lattice.nx < 4 || lattice.ny < 4 || !(lattice.pitch_um > 0.0)) {
        throw ValidationError("diffuser lattice must be at least 4x4 with positive pitch");
    }
    if (!(refractive_index_contrast > 0.0)) {
        throw ValidationError("index contrast must be positive");
    }
    DiffuserSurface s;
    s.heightmap = std::move(heightmap);
    s.lattice = lattice;
    s.feature_size_um = feature_size_um;
    s.rms_slope_deg = rms_slope_deg;
    s.refractive_index_contrast = refractive_index_contrast;
    s.rng_seed = seed;
    compute_gradients(s);
    return s;
}

double mean_slope_deg(const DiffuserSurface& s) {
    double acc = 0.0;
    for (size_t i = 0; i < s.grad_x.v.size(); ++i)
        acc += std::hypot(s.grad_x.v[i], s.grad_y.v[i]);
    acc /= double(s.grad_x.v.size());
    return s.refractive_index_contrast * acc * 180.0 / kPi;
}

double autocorrelation_fwhm_um(const DiffuserSurface& s) {
    const int ny = s.lattice.ny, nx = s.lattice.nx;
    double mean = 0.0;
    for (double v : s.heightmap.v) mean += v;
    mean /= double(s.heightmap.v.size());

    // Row-wise circular autocorrelation, averaged, normalized at lag 0.
    std::vector<double> acf(nx / 2, 0.0);
    for (int y = 0; y < ny; ++y) {
        for (int lag = 0; lag < nx / 2; ++lag) {
            double acc = 0.0;
            for (int x = 0; x < nx; ++x) {
                acc += (s.heightmap.at(y, x) - mean) *
                       (s.heightmap.at(y, wrap(x + lag, nx)) - mean);
            }
            acf[lag] += acc;
        }
    }
    if (!(acf[0] > 0.0)) throw NumericalError("flat surface has no autocorrelation width");
    for (int lag = int(acf.size()) - 1; lag >= 0; --lag) acf[lag] /= acf[0];
    for (int lag = 1; lag < int(acf.size()); ++lag) {
        if (acf[lag] <= 0.5) {
            // linear interpolation of the half-maximum crossing
            double t = (0.5 - acf[lag - 1]) / (acf[lag] - acf[lag - 1]);
            return 2.0 * (lag - 1 + t) * s.lattice.pitch_um;
        }
    }
    throw NumericalError("autocorrelation does not decay to half maximum within the lattice");
}

}  // namespace lensless
