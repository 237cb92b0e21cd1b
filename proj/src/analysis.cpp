#include "lensless/analysis.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "lensless/conv_operator.hpp"
#include "lensless/errors.hpp"
#include "lensless/fft.hpp"
#include "lensless/render.hpp"

namespace lensless {

namespace {

void check_grid_stack(const PsfStack& stack, const VolumeGrid& grid) {
    if (stack.nz() != grid.nz() || stack.ny() != grid.ny || stack.nx() != grid.nx) {
        throw ValidationError("calibration stack dimensions do not match the grid");
    }
}

/// Lateral voxel column of an object-space x offset at plane k.
int lateral_voxel(const VolumeGrid& grid, int k, double offset_um, int dim) {
    return dim / 2 + int(std::llround(offset_um / grid.pitch_um[k]));
}

struct PairDip {
    bool detected = false;
    double dip = 0.0;
    std::string why;
};

double volume_max(const Tensor3<float>& vol) {
    double m = 0.0;
    for (float v : vol.v) m = std::max(m, double(v));
    return m;
}

/// Dip between two lateral positions in one depth plane, along y or x.
PairDip lateral_pair_dip(const Tensor3<float>& vol, double floor_level, int k, int cy_or_y,
                         int i1, int i2, bool along_x) {
    if (i1 == i2) return {false, 0.0, "sources land on the same grid voxel"};
    if (i1 > i2) std::swap(i1, i2);
    auto sample = [&](int i) {
        return along_x ? double(vol.at(k, cy_or_y, i)) : double(vol.at(k, i, cy_or_y));
    };
    const double p1 = sample(i1), p2 = sample(i2);
    if (p1 <= floor_level || p2 <= floor_level) {
        return {false, 0.0, "no peak at a true source location"};
    }
    double valley = std::min(p1, p2);
    for (int i = i1 + 1; i < i2; ++i) valley = std::min(valley, sample(i));
    const double ref = std::min(p1, p2);
    return {true, std::clamp(1.0 - valley / ref, 0.0, 1.0), ""};
}

/// Dip between the same object-space lateral offset seen at two depth planes.
/// The lateral column is re-derived per plane because the voxel pitch grows
/// with depth, so a source traces a magnification-dependent path through the
/// lattice.
PairDip axial_pair_dip(const Tensor3<float>& vol, const VolumeGrid& grid, double floor_level,
                       double offset_um, int k1, int k2) {
    if (k1 == k2) return {false, 0.0, "sources land on the same depth plane"};
    if (k1 > k2) std::swap(k1, k2);
    const int cy = grid.ny / 2;
    auto sample = [&](int k) {
        int x = lateral_voxel(grid, k, offset_um, grid.nx);
        return double(vol.at(k, cy, x));
    };
    const double p1 = sample(k1), p2 = sample(k2);
    if (p1 <= floor_level || p2 <= floor_level) {
        return {false, 0.0, "no peak at a true source location"};
    }
    double valley = std::min(p1, p2);
    for (int k = k1 + 1; k < k2; ++k) valley = std::min(valley, sample(k));
    const double ref = std::min(p1, p2);
    return {true, std::clamp(1.0 - valley / ref, 0.0, 1.0), ""};
}

Tensor3<float> reconstruct_unregularized(const Image<float>& b, const PsfStack& stack,
                                         const SolverConfig& cfg) {
    ConvOperator<float> op(stack);
    SolverConfig c = cfg;
    c.lambda = 0.0;  // probe the operator, not the prior
    auto [vol, trace] = solve(b, op, c);
    return vol;
}

void fold_pair(ResolvabilityResult& r, const PairDip& pd) {
    if (!pd.detected) {
        r.peaks_detected = false;
        if (r.diagnostic.empty()) r.diagnostic = pd.why;
        return;
    }
    r.dip_fraction = std::min(r.dip_fraction, pd.dip);
}

/// Conditioning is scale-free, so a stack whose slices are all scaled by the
/// same factor is accepted here and normalized back to unit sums before the
/// operator (which insists on calibrated slices) sees it.
PsfStack uniform_scale_normalized(const PsfStack& stack) {
    if (stack.slices.empty()) throw ValidationError("empty caustic stack");
    std::vector<double> sums(stack.slices.size(), 0.0);
    double mean = 0.0;
    for (size_t k = 0; k < stack.slices.size(); ++k) {
        for (float v : stack.slices[k].v) sums[k] += v;
        mean += sums[k];
    }
    mean /= double(sums.size());
    if (!(mean > 0.0)) throw ValidationError("caustic stack has no energy");
    PsfStack out = stack;
    for (auto& s : out.slices)
        for (auto& v : s.v) v = float(v / mean);
    return out;
}

LocalCondition condition_of_columns(const ConvOperator<double>& op,
                                    const std::vector<VoxelIndex>& constellation) {
    if (constellation.empty()) throw ValidationError("constellation is empty");
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& v : constellation) {
        if (v.k < 0 || v.k >= op.nz() || v.y < 0 || v.y >= op.ny() || v.x < 0 ||
            v.x >= op.nx()) {
            throw ValidationError("constellation voxel outside the grid");
        }
        if (!seen.insert({v.k, v.y, v.x}).second) {
            throw ValidationError("constellation voxels must be distinct");
        }
    }
    const int m = op.ny() * op.nx();
    const int n = int(constellation.size());
    Eigen::MatrixXd A(m, n);
    Tensor3<double> e(op.nz(), op.ny(), op.nx());
    for (int j = 0; j < n; ++j) {
        std::fill(e.v.begin(), e.v.end(), 0.0);
        e.at(constellation[j].k, constellation[j].y, constellation[j].x) = 1.0;
        Image<double> col = op.apply(e);
        for (int i = 0; i < m; ++i) A(i, j) = col.v[i];
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    const double smax = sv(0), smin = sv(n - 1);
    const double tol = std::max(m, n) * std::numeric_limits<double>::epsilon() * smax;
    if (!(smin > tol)) {
        return {std::numeric_limits<double>::infinity(), true};
    }
    return {smax / smin, false};
}

}  // namespace

ResolvabilityResult two_point_test(const PsfStack& stack, const VolumeGrid& grid,
                                   const SystemGeometry& geom, double z_mm, Axis axis,
                                   double separation, const SolverConfig& solver_cfg,
                                   double dip_threshold) {
    check_grid_stack(stack, grid);
    if (!(separation >= 0.0) || !std::isfinite(separation)) {
        throw ValidationError("separation must be finite and >= 0");
    }
    const double half = separation / 2.0;
    PointSource a, b;
    a.z_mm = b.z_mm = z_mm;
    std::string layout;
    switch (axis) {
        case Axis::X:
            a.x_um = -half;
            b.x_um = half;
            layout = "2-point-x";
            break;
        case Axis::Y:
            a.y_um = -half;
            b.y_um = half;
            layout = "2-point-y";
            break;
        case Axis::Z:
            a.z_mm = z_mm - half;  // mm along the axis of sight
            b.z_mm = z_mm + half;
            layout = "2-point-z";
            break;
    }
    Scene scene;
    scene.points = {a, b};
    Image<float> meas = simulate_measurement<float>(scene, stack, grid, geom);

    ResolvabilityResult r;
    r.layout = layout;
    r.n_sources = 2;
    r.separation_lateral_um = axis == Axis::Z ? 0.0 : separation;
    r.separation_axial_mm = axis == Axis::Z ? separation : 0.0;
    r.peaks_detected = true;
    r.dip_fraction = 1.0;
    r.reconstruction = reconstruct_unregularized(meas, stack, solver_cfg);

    const double floor_level = 1e-9 * volume_max(r.reconstruction);
    if (axis == Axis::Z) {
        const int k1 = grid.nearest_plane(a.z_mm);
        const int k2 = grid.nearest_plane(b.z_mm);
        fold_pair(r, axial_pair_dip(r.reconstruction, grid, floor_level, 0.0, k1, k2));
    } else {
        const int k = grid.nearest_plane(z_mm);
        const bool along_x = axis == Axis::X;
        const int dim = along_x ? grid.nx : grid.ny;
        const int i1 = lateral_voxel(grid, k, -half, dim);
        const int i2 = lateral_voxel(grid, k, half, dim);
        if (i1 < 0 || i2 < 0 || i1 >= dim || i2 >= dim) {
            throw ValidationError("separation places a source outside the reconstruction grid");
        }
        const int center = along_x ? grid.ny / 2 : grid.nx / 2;
        fold_pair(r, lateral_pair_dip(r.reconstruction, floor_level, k, center, i1, i2,
                                      along_x));
    }
    if (!r.peaks_detected) r.dip_fraction = 0.0;
    r.resolved = r.peaks_detected && r.dip_fraction >= dip_threshold;
    return r;
}

ResolvabilityResult multi_point_test(const PsfStack& stack, const VolumeGrid& grid,
                                     const SystemGeometry& geom, double z_mm, int side,
                                     double spacing_x_um, double spacing_z_mm,
                                     const SolverConfig& solver_cfg, double dip_threshold) {
    check_grid_stack(stack, grid);
    if (side < 1) throw ValidationError("constellation side must be >= 1");
    if (!(spacing_x_um >= 0.0) || !(spacing_z_mm >= 0.0)) {
        throw ValidationError("spacings must be >= 0");
    }
    auto offset = [&](int i, double step) { return (i - (side - 1) / 2.0) * step; };
    Scene scene;
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            PointSource p;
            p.x_um = offset(i, spacing_x_um);
            p.z_mm = z_mm + offset(j, spacing_z_mm);
            scene.points.push_back(p);
        }
    }
    Image<float> meas = simulate_measurement<float>(scene, stack, grid, geom);

    ResolvabilityResult r;
    std::ostringstream name;
    name << side << "x" << side << "-xz";
    r.layout = name.str();
    r.n_sources = side * side;
    r.separation_lateral_um = spacing_x_um;
    r.separation_axial_mm = spacing_z_mm;
    r.peaks_detected = true;
    r.dip_fraction = 1.0;
    r.reconstruction = reconstruct_unregularized(meas, stack, solver_cfg);
    const double floor_level = 1e-9 * volume_max(r.reconstruction);

    if (side == 1) {
        r.resolved = true;  // nothing to separate
        r.peaks_detected =
            r.reconstruction.at(grid.nearest_plane(z_mm), grid.ny / 2, grid.nx / 2) >
            floor_level;
        return r;
    }

    std::vector<int> planes(side);
    for (int j = 0; j < side; ++j) planes[j] = grid.nearest_plane(z_mm + offset(j, spacing_z_mm));
    const int cy = grid.ny / 2;
    std::vector<std::vector<int>> cols(side, std::vector<int>(side));
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            cols[j][i] = lateral_voxel(grid, planes[j], offset(i, spacing_x_um), grid.nx);
            if (cols[j][i] < 0 || cols[j][i] >= grid.nx) {
                throw ValidationError("spacing places a source outside the reconstruction grid");
            }
        }
    }
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            if (i + 1 < side) {
                fold_pair(r, lateral_pair_dip(r.reconstruction, floor_level, planes[j], cy,
                                              cols[j][i], cols[j][i + 1], true));
            }
            if (j + 1 < side) {
                fold_pair(r, axial_pair_dip(r.reconstruction, grid, floor_level,
                                            offset(i, spacing_x_um), planes[j], planes[j + 1]));
            }
        }
    }
    if (!r.peaks_detected) r.dip_fraction = 0.0;
    r.resolved = r.peaks_detected && r.dip_fraction >= dip_threshold;
    return r;
}

LocalCondition local_condition_number(const PsfStack& stack, const VolumeGrid& grid,
                                      const std::vector<VoxelIndex>& constellation) {
    check_grid_stack(stack, grid);
    ConvOperator<double> op(uniform_scale_normalized(stack));
    return condition_of_columns(op, constellation);
}

std::vector<ConditioningCurve> conditioning_sweep(const PsfStack& stack,
                                                  const VolumeGrid& grid, double z_mm,
                                                  const std::vector<int>& n_sources,
                                                  const std::vector<int>& separations,
                                                  ConstellationPlane plane) {
    check_grid_stack(stack, grid);
    if (n_sources.empty() || separations.empty()) {
        throw ValidationError("sweep needs at least one source count and one separation");
    }
    for (int c : n_sources) {
        int side = int(std::lround(std::sqrt(double(c))));
        if (c < 1 || side * side != c) {
            throw ValidationError("source counts must be perfect squares");
        }
    }
    for (int d : separations) {
        if (d < 1) throw ValidationError("separations must be >= 1 voxel");
    }
    const int k0 = grid.nearest_plane(z_mm);
    const int cy = grid.ny / 2, cx = grid.nx / 2;
    ConvOperator<double> op(uniform_scale_normalized(stack));

    std::vector<ConditioningCurve> curves;
    for (int count : n_sources) {
        const int side = int(std::lround(std::sqrt(double(count))));
        ConditioningCurve curve;
        curve.n_sources = count;
        curve.depth_mm = grid.depth_planes_mm[k0];
        curve.plane = plane;
        for (int d : separations) {
            const int span = (side - 1) * d;
            std::vector<VoxelIndex> cs;
            for (int j = 0; j < side; ++j) {
                for (int i = 0; i < side; ++i) {
                    VoxelIndex v;
                    v.x = cx - span / 2 + i * d;
                    if (plane == ConstellationPlane::XZ) {
                        v.k = k0 - span / 2 + j * d;
                        v.y = cy;
                    } else {
                        v.k = k0;
                        v.y = cy - span / 2 + j * d;
                    }
                    if (v.k < 0 || v.k >= grid.nz() || v.y < 0 || v.y >= grid.ny || v.x < 0 ||
                        v.x >= grid.nx) {
                        std::ostringstream os;
                        os << "constellation of " << count << " sources at separation " << d
                           << " does not fit within the grid";
                        throw ValidationError(os.str());
                    }
                    cs.push_back(v);
                }
            }
            LocalCondition lc = condition_of_columns(op, cs);
            curve.separations.push_back(d);
            curve.condition_numbers.push_back(lc.value);
            curve.rank_deficient.push_back(lc.rank_deficient ? 1 : 0);
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

PsfSimilarity psf_similarity(const Image<float>& on_axis, const Image<float>& off_axis) {
    if (on_axis.ny != off_axis.ny || on_axis.nx != off_axis.nx) {
        throw ValidationError("patterns must have identical dimensions");
    }
    const int ny = on_axis.ny, nx = on_axis.nx;
    const size_t n = size_t(ny) * nx;
    auto unit = [&](const Image<float>& img, const char* which) {
        std::vector<double> out(n);
        double e = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (!std::isfinite(double(img.v[i]))) {
                throw ValidationError(std::string(which) + " pattern has non-finite values");
            }
            out[i] = double(img.v[i]);
            e += out[i] * out[i];
        }
        if (e <= 0.0) throw ValidationError(std::string(which) + " pattern has zero energy");
        const double inv = 1.0 / std::sqrt(e);
        for (double& v : out) v *= inv;
        return out;
    };
    std::vector<double> a = unit(on_axis, "on-axis");
    std::vector<double> b = unit(off_axis, "off-axis");

    Fft3<double> fft(1, ny, nx);
    std::vector<std::complex<double>> A(fft.spec_count()), B(fft.spec_count());
    fft.forward(a.data(), A.data());
    fft.forward(b.data(), B.data());

    // corr[s] = sum_p a[p] b[p+s]; half-max support area approximates the
    // registered spot size
    auto corr_stats = [&](std::vector<std::complex<double>> spec) {
        std::vector<double> c(n);
        fft.inverse(spec.data(), c.data());
        double peak = c[0];
        for (double v : c) peak = std::max(peak, v);
        long long area = 0;
        for (double v : c)
            if (v >= 0.5 * peak) ++area;
        return std::pair<double, long long>(peak, area);
    };
    std::vector<std::complex<double>> cross(fft.spec_count()), autoc(fft.spec_count());
    for (size_t i = 0; i < cross.size(); ++i) {
        cross[i] = std::conj(A[i]) * B[i];
        autoc[i] = std::conj(A[i]) * A[i];
    }
    auto [cross_peak, cross_area] = corr_stats(std::move(cross));
    auto [auto_peak, auto_area] = corr_stats(std::move(autoc));
    (void)auto_peak;

    PsfSimilarity s;
    s.inner_product = std::clamp(cross_peak, 0.0, 1.0);
    s.spot_ratio = std::max(1.0, std::sqrt(double(cross_area) / double(auto_area)));
    return s;
}

std::string curves_csv(const std::vector<ConditioningCurve>& curves) {
    std::ostringstream os;
    os << "n_sources,depth_mm,plane,separation_voxels,condition_number,rank_deficient\n";
    for (const auto& c : curves) {
        for (size_t i = 0; i < c.separations.size(); ++i) {
            os << c.n_sources << ',' << c.depth_mm << ','
               << (c.plane == ConstellationPlane::XZ ? "xz" : "xy") << ','
               << c.separations[i] << ',' << c.condition_numbers[i] << ','
               << int(c.rank_deficient[i]) << '\n';
        }
    }
    return os.str();
}

std::string resolvability_csv(const ResolvabilityResult& r) {
    std::ostringstream os;
    os << "layout,n_sources,separation_lateral_um,separation_axial_mm,peaks_detected,"
          "resolved,dip_fraction,diagnostic\n";
    os << r.layout << ',' << r.n_sources << ',' << r.separation_lateral_um << ','
       << r.separation_axial_mm << ',' << int(r.peaks_detected) << ',' << int(r.resolved)
       << ',' << r.dip_fraction << ',' << r.diagnostic << '\n';
    return os.str();
}

}  // namespace lensless
