#include "lensless/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "lensless/conv_operator.hpp"
#include "lensless/errors.hpp"
#include "lensless/rng.hpp"

namespace lensless {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Bilinear sample of the cached gradient fields at a lateral position (µm,
// origin on the optical axis).
inline void sample_gradient(const DiffuserSurface& s, double ux, double uy,
                            double& gx, double& gy) {
    const int nx = s.lattice.nx, ny = s.lattice.ny;
    double fx = ux / s.lattice.pitch_um + 0.5 * (nx - 1);
    double fy = uy / s.lattice.pitch_um + 0.5 * (ny - 1);
    fx = std::clamp(fx, 0.0, double(nx - 1));
    fy = std::clamp(fy, 0.0, double(ny - 1));
    int i0 = std::min(int(fx), nx - 2);
    int j0 = std::min(int(fy), ny - 2);
    double wx = fx - i0, wy = fy - j0;
    auto lerp2 = [&](const Image<double>& f) {
        double a = f.at(j0, i0) * (1 - wx) + f.at(j0, i0 + 1) * wx;
        double b = f.at(j0 + 1, i0) * (1 - wx) + f.at(j0 + 1, i0 + 1) * wx;
        return a * (1 - wy) + b * wy;
    };
    gx = lerp2(s.grad_x);
    gy = lerp2(s.grad_y);
}
}  // namespace

void validate_stack(const PsfStack& stack, double sum_tol) {
    if (stack.slices.empty()) throw ValidationError("empty caustic stack");
    if (stack.slices.size() != stack.depth_planes_mm.size()) {
        throw ValidationError("caustic stack slice/depth count mismatch");
    }
    const int ny = stack.ny(), nx = stack.nx();
    for (int k = 0; k < stack.nz(); ++k) {
        const auto& s = stack.slices[k];
        if (s.ny != ny || s.nx != nx) {
            throw ValidationError("caustic stack slices differ in shape");
        }
        double sum = 0.0;
        for (float v : s.v) {
            if (!(v >= 0.0f)) throw ValidationError("caustic stack has negative values");
            sum += v;
        }
        if (std::abs(sum - 1.0) > sum_tol) {
            throw ValidationError("caustic slice " + std::to_string(k) +
                                  " is not unit-normalized (sum=" + std::to_string(sum) + ")");
        }
        if (k > 0 && !(stack.depth_planes_mm[k] > stack.depth_planes_mm[k - 1])) {
            throw ValidationError("caustic stack depths must be strictly increasing");
        }
    }
}

Image<float> render_psf(const DiffuserSurface& surface, double z_mm,
                        const SystemGeometry& geom, const RenderOptions& opts) {
    validate_geometry(geom);
    if (!(z_mm >= geom.min_object_distance_mm)) {
        throw ValidationError("render depth closer than min_object_distance_mm");
    }
    if (opts.rays <= 0) throw ValidationError("ray count must be positive");
    const double aw_um = geom.aperture_width_mm * 1e3;
    const double ah_um = geom.aperture_height_mm * 1e3;
    if (aw_um > surface.lattice.width_um() - 2 * surface.lattice.pitch_um ||
        ah_um > surface.lattice.height_um() - 2 * surface.lattice.pitch_um) {
        throw ValidationError("diffuser surface does not cover the aperture");
    }

    const int nx = geom.sensor_width_px, ny = geom.sensor_height_px;
    const double pitch = geom.pixel_pitch_um;
    const double z_um = z_mm * 1e3, d_um = geom.diffuser_to_sensor_mm * 1e3;
    const double nc = surface.refractive_index_contrast;
    const double sx = opts.source_x_um, sy = opts.source_y_um;
    const uint64_t seed = mix_key(surface.rng_seed, opts.seed_salt);
    const size_t npix = size_t(ny) * nx;

    // Every ray is keyed by its index, and bins hold integer counts, so the
    // merged histogram is independent of how rays are split across threads.
    const int nthreads = std::max(1, opts.threads);
    std::vector<std::vector<uint32_t>> partial(nthreads);
    auto worker = [&](int t) {
        auto& counts = partial[t];
        counts.assign(npix, 0);
        const long long lo = opts.rays * t / nthreads;
        const long long hi = opts.rays * (t + 1) / nthreads;
        for (long long i = lo; i < hi; ++i) {
            SplitMix64 rs(mix_key(seed, uint64_t(i)));
            double ux = (uniform01(rs.next()) - 0.5) * aw_um;
            double uy = (uniform01(rs.next()) - 0.5) * ah_um;
            double gx, gy;
            sample_gradient(surface, ux, uy, gx, gy);
            // paraxial slopes; the screen adds (n-1)·∇h to the ray direction
            double tx = (ux - sx) / z_um + nc * gx;
            double ty = (uy - sy) / z_um + nc * gy;
            double px = ux + d_um * tx;
            double py = uy + d_um * ty;
            int ix = int(std::floor(px / pitch + 0.5 * nx));
            int iy = int(std::floor(py / pitch + 0.5 * ny));
            if (ix >= 0 && ix < nx && iy >= 0 && iy < ny) {
                ++counts[size_t(iy) * nx + ix];
            }
        }
    };
    if (nthreads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    std::vector<uint64_t> counts(npix, 0);
    for (auto& p : partial)
        for (size_t i = 0; i < npix; ++i) counts[i] += p[i];
    uint64_t total = std::accumulate(counts.begin(), counts.end(), uint64_t(0));
    if (total == 0) throw NumericalError("no rays reached the sensor");

    Image<float> psf(ny, nx);
    const double inv = 1.0 / double(total);
    for (size_t i = 0; i < npix; ++i) psf.v[i] = float(counts[i] * inv);
    return psf;
}

PsfStack calibrate(const DiffuserSurface& surface, const VolumeGrid& grid,
                   const SystemGeometry& geom, const RenderOptions& opts) {
    if (grid.nz() == 0) throw ValidationError("grid has no depth planes");
    RenderOptions on_axis = opts;
    on_axis.source_x_um = 0.0;
    on_axis.source_y_um = 0.0;
    PsfStack stack;
    stack.depth_planes_mm = grid.depth_planes_mm;
    stack.slices.reserve(grid.nz());
    for (int k = 0; k < grid.nz(); ++k) {
        stack.slices.push_back(render_psf(surface, grid.depth_planes_mm[k], geom, on_axis));
    }
    validate_stack(stack);
    return stack;
}

template <typename T>
Image<T> simulate_measurement(const Scene& scene, const PsfStack& stack,
                              const VolumeGrid& grid, const SystemGeometry& geom,
                              const NoiseModel& noise) {
    validate_stack(stack);
    if (stack.nz() != grid.nz()) {
        throw ValidationError("caustic stack depth count does not match the grid");
    }
    for (int k = 0; k < grid.nz(); ++k) {
        if (std::abs(stack.depth_planes_mm[k] - grid.depth_planes_mm[k]) >
            1e-9 * grid.depth_planes_mm[k]) {
            throw ValidationError("caustic stack depths do not match the grid");
        }
    }
    const int ny = stack.ny(), nx = stack.nx();

    // reject sources outside the angular or axial field of view
    const FovReport fov = compute_fov(geom);
    std::ostringstream bad;
    for (const auto& p : scene.points) {
        std::string why;
        if (!(p.intensity >= 0.0) || !std::isfinite(p.intensity)) {
            why = "negative intensity";
        } else if (p.z_mm < fov.z_min_mm || p.z_mm > fov.z_max_mm) {
            why = "z outside axial range";
        } else {
            double ax = std::atan(std::abs(p.x_um) * 1e-3 / p.z_mm) * 180.0 / kPi;
            double ay = std::atan(std::abs(p.y_um) * 1e-3 / p.z_mm) * 180.0 / kPi;
            if (ax > fov.half_fov_x_deg + 1e-9 || ay > fov.half_fov_y_deg + 1e-9) {
                why = "outside angular field of view";
            }
        }
        if (!why.empty()) {
            bad << (bad.tellp() > 0 ? "; " : "") << "(" << p.x_um << " um, " << p.y_um
                << " um, " << p.z_mm << " mm): " << why;
        }
    }
    if (bad.tellp() > 0) throw ValidationError("scene sources outside field of view: " + bad.str());

    std::vector<double> acc(size_t(ny) * nx, 0.0);
    for (const auto& p : scene.points) {
        const int k = grid.nearest_plane(p.z_mm);
        const double m = grid.magnifications[k];
        // caustics shift opposite to the source, magnified by m
        const long long dx = llround(-m * p.x_um / geom.pixel_pitch_um);
        const long long dy = llround(-m * p.y_um / geom.pixel_pitch_um);
        const auto& h = stack.slices[k];
        const long long qy0 = std::max(0LL, -dy), qy1 = std::min<long long>(ny, ny - dy);
        const long long qx0 = std::max(0LL, -dx), qx1 = std::min<long long>(nx, nx - dx);
        for (long long qy = qy0; qy < qy1; ++qy) {
            const float* src = &h.at(int(qy), 0);
            double* dst = acc.data() + size_t(qy + dy) * nx + dx;
            for (long long qx = qx0; qx < qx1; ++qx) {
                dst[qx] += p.intensity * double(src[qx]);
            }
        }
    }

    if (scene.volume) {
        const auto& vol = *scene.volume;
        require_shape(vol, grid.nz(), grid.ny, grid.nx, "scene volume");
        for (float v : vol.v) {
            if (!(v >= 0.0f)) throw ValidationError("scene volume has negative intensities");
        }
        Tensor3<T> volT(vol.nz, vol.ny, vol.nx);
        for (size_t i = 0; i < vol.v.size(); ++i) volT.v[i] = T(vol.v[i]);
        ConvOperator<T> op(stack);
        Image<T> bi = op.apply(volT);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += double(bi.v[i]);
    }

    Image<T> b(ny, nx);
    for (size_t i = 0; i < acc.size(); ++i) b.v[i] = T(acc[i]);

    switch (noise.kind) {
        case NoiseModel::Kind::None:
            break;
        case NoiseModel::Kind::Gaussian: {
            if (!(noise.gaussian_sigma >= 0.0)) throw ValidationError("gaussian sigma must be >= 0");
            for (size_t i = 0; i < b.v.size(); ++i) {
                SplitMix64 rs(mix_key(noise.seed, i));
                double g0, g1;
                gaussian_pair(rs, g0, g1);
                b.v[i] = std::max(T(0), T(double(b.v[i]) + noise.gaussian_sigma * g0));
            }
            break;
        }
        case NoiseModel::Kind::Poisson: {
            if (!(noise.poisson_scale > 0.0)) throw ValidationError("poisson scale must be > 0");
            for (size_t i = 0; i < b.v.size(); ++i) {
                double mean = std::max(0.0, double(b.v[i])) * noise.poisson_scale;
                std::mt19937_64 eng(mix_key(noise.seed, i));
                std::poisson_distribution<long long> dist(mean);
                b.v[i] = T(double(mean > 0.0 ? dist(eng) : 0) / noise.poisson_scale);
            }
            break;
        }
    }
    return b;
}

template Image<float> simulate_measurement<float>(
    const Scene&, const PsfStack&, const VolumeGrid&, const SystemGeometry&, const NoiseModel&);
template Image<double> simulate_measurement<double>(
    const Scene&, const PsfStack&, const VolumeGrid&, const SystemGeometry&, const NoiseModel&);

Image<float> bin2x2(const Image<float>& img) {
    if (img.ny % 2 != 0 || img.nx % 2 != 0) {
        throw ValidationError("2x2 binning needs even sensor dimensions");
    }
    Image<float> out(img.ny / 2, img.nx / 2);
    for (int y = 0; y < out.ny; ++y) {
        for (int x = 0; x < out.nx; ++x) {
            out.at(y, x) = img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) +
                           img.at(2 * y + 1, 2 * x) + img.at(2 * y + 1, 2 * x + 1);
        }
    }
    return out;
}

long long energy_support_bbox_area(const Image<float>& psf, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("fraction must be in (0, 1]");
    std::vector<std::pair<float, int>> px;
    px.reserve(psf.v.size());
    double total = 0.0;
    for (int i = 0; i < int(psf.v.size()); ++i) {
        if (psf.v[i] > 0.0f) px.emplace_back(psf.v[i], i);
        total += psf.v[i];
    }
    if (total <= 0.0) return 0;
    std::sort(px.begin(), px.end(), [](auto& a, auto& b) { return a.first > b.first; });
    double acc = 0.0;
    int y0 = psf.ny, y1 = -1, x0 = psf.nx, x1 = -1;
    for (auto& [v, idx] : px) {
        acc += v;
        int y = idx / psf.nx, x = idx % psf.nx;
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        if (acc >= fraction * total) break;
    }
    return (long long)(y1 - y0 + 1) * (x1 - x0 + 1);
}

}  // namespace lensless
