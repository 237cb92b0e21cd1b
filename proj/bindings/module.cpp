// Python bindings for the main pipeline operations. Arrays cross the
// boundary as C-contiguous float32 (forcecast), copied into the library's
// own containers; heavy calls release the GIL.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "lensless/analysis.hpp"
#include "lensless/conv_operator.hpp"
#include "lensless/diffuser.hpp"
#include "lensless/errors.hpp"
#include "lensless/geometry.hpp"
#include "lensless/render.hpp"
#include "lensless/solver.hpp"

namespace py = pybind11;
using namespace lensless;

namespace {

using ArrF = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image<float> image_from_array(const ArrF& a) {
    if (a.ndim() != 2) throw ValidationError("expected a 2-d array");
    Image<float> img(int(a.shape(0)), int(a.shape(1)));
    std::memcpy(img.v.data(), a.data(), img.v.size() * sizeof(float));
    return img;
}

Tensor3<float> tensor_from_array(const ArrF& a) {
    if (a.ndim() != 3) throw ValidationError("expected a 3-d array");
    Tensor3<float> t(int(a.shape(0)), int(a.shape(1)), int(a.shape(2)));
    std::memcpy(t.v.data(), a.data(), t.v.size() * sizeof(float));
    return t;
}

py::array_t<float> array_from_image(const Image<float>& img) {
    py::array_t<float> a({img.ny, img.nx});
    std::memcpy(a.mutable_data(), img.v.data(), img.v.size() * sizeof(float));
    return a;
}

py::array_t<float> array_from_tensor(const Tensor3<float>& t) {
    py::array_t<float> a({t.nz, t.ny, t.nx});
    std::memcpy(a.mutable_data(), t.v.data(), t.v.size() * sizeof(float));
    return a;
}

py::array_t<double> array_from_image_d(const Image<double>& img) {
    py::array_t<double> a({img.ny, img.nx});
    std::memcpy(a.mutable_data(), img.v.data(), img.v.size() * sizeof(double));
    return a;
}

PsfStack stack_from_arrays(const ArrF& stack, const std::vector<double>& planes) {
    if (stack.ndim() != 3) throw ValidationError("stack must be a 3-d array");
    PsfStack s;
    s.depth_planes_mm = planes;
    const int nz = int(stack.shape(0)), ny = int(stack.shape(1)), nx = int(stack.shape(2));
    const float* p = stack.data();
    for (int k = 0; k < nz; ++k) {
        Image<float> slice(ny, nx);
        std::memcpy(slice.v.data(), p + size_t(k) * ny * nx,
                    size_t(ny) * nx * sizeof(float));
        s.slices.push_back(std::move(slice));
    }
    return s;
}

SolverConfig config_from_kwargs(double lambda_, const std::string& regularizer,
                                bool anisotropic, int max_iters, double eps_abs,
                                double eps_rel, double mu1, double mu2, double mu3,
                                bool adaptive_penalties, bool nonneg) {
    SolverConfig cfg;
    cfg.lambda = lambda_;
    if (regularizer == "tv3d") {
        cfg.psi = PsiMode::Tv3d;
    } else if (regularizer == "identity") {
        cfg.psi = PsiMode::Identity;
    } else {
        throw ValidationError("regularizer must be 'tv3d' or 'identity'");
    }
    cfg.anisotropic_tv = anisotropic;
    cfg.max_iters = max_iters;
    cfg.eps_abs = eps_abs;
    cfg.eps_rel = eps_rel;
    cfg.mu1 = mu1;
    cfg.mu2 = mu2;
    cfg.mu3 = mu3;
    cfg.adaptive_penalties = adaptive_penalties;
    cfg.nonneg = nonneg;
    return cfg;
}

// ConvOperator plus the stack it came from, so solve() can reuse it.
struct PyOperator {
    PsfStack stack;
    ConvOperator<float> op;
    explicit PyOperator(PsfStack s) : stack(std::move(s)), op(stack) {}
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Lensless 3D imaging: caustic simulation, cropped-convolution forward "
              "model, ADMM reconstruction and system analysis.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<SystemGeometry>(m, "SystemGeometry",
                               "Physical camera description: sensor, diffuser spacing, "
                               "aperture and angular-response limits.")
        .def(py::init<>())
        .def_readwrite("sensor_width_px", &SystemGeometry::sensor_width_px)
        .def_readwrite("sensor_height_px", &SystemGeometry::sensor_height_px)
        .def_readwrite("pixel_pitch_um", &SystemGeometry::pixel_pitch_um)
        .def_readwrite("diffuser_to_sensor_mm", &SystemGeometry::diffuser_to_sensor_mm)
        .def_readwrite("aperture_width_mm", &SystemGeometry::aperture_width_mm)
        .def_readwrite("aperture_height_mm", &SystemGeometry::aperture_height_mm)
        .def_readwrite("max_deflection_deg", &SystemGeometry::max_deflection_deg)
        .def_readwrite("pixel_cutoff_x_deg", &SystemGeometry::pixel_cutoff_x_deg)
        .def_readwrite("pixel_cutoff_y_deg", &SystemGeometry::pixel_cutoff_y_deg)
        .def_readwrite("min_object_distance_mm", &SystemGeometry::min_object_distance_mm)
        .def_readwrite("hyperfocal_distance_mm", &SystemGeometry::hyperfocal_distance_mm);

    py::class_<FovReport>(m, "FovReport")
        .def_readonly("half_fov_x_deg", &FovReport::half_fov_x_deg)
        .def_readonly("half_fov_y_deg", &FovReport::half_fov_y_deg)
        .def_readonly("z_min_mm", &FovReport::z_min_mm)
        .def_readonly("z_max_mm", &FovReport::z_max_mm);

    m.def("compute_fov", &compute_fov, py::arg("geometry"),
          "Angular half field of view per axis and the usable axial range.");
    m.def("magnification", &magnification, py::arg("z_mm"), py::arg("geometry"),
          "Caustic-shift magnification d/z at the given depth.");
    m.def(
        "reciprocal_depth_planes",
        [](double z_min_mm, double z_max_mm, int count) {
            if (count == 1) return std::vector<double>{z_min_mm};
            const double c = reciprocal_spacing_for_count(z_min_mm, z_max_mm, count);
            return depth_plane_spacing(z_min_mm, z_max_mm, c);
        },
        py::arg("z_min_mm"), py::arg("z_max_mm"), py::arg("count"),
        "Depth schedule with constant reciprocal spacing between the endpoints.");

    py::class_<VolumeGrid>(m, "VolumeGrid",
                           "Reconstruction lattice: per-depth lateral pitch follows the "
                           "magnification.")
        .def_readonly("depth_planes_mm", &VolumeGrid::depth_planes_mm)
        .def_readonly("nx", &VolumeGrid::nx)
        .def_readonly("ny", &VolumeGrid::ny)
        .def_readonly("magnifications", &VolumeGrid::magnifications)
        .def_readonly("pitch_um", &VolumeGrid::pitch_um)
        .def_property_readonly("nz", &VolumeGrid::nz)
        .def("voxel_count", &VolumeGrid::voxel_count);

    m.def("build_grid", &build_grid, py::arg("geometry"), py::arg("depth_planes_mm"),
          py::arg("nx"), py::arg("ny"));

    py::class_<DiffuserSurface>(m, "DiffuserSurface")
        .def_property_readonly(
            "heightmap", [](const DiffuserSurface& s) { return array_from_image_d(s.heightmap); },
            "Surface heights in micrometers.")
        .def_readonly("feature_size_um", &DiffuserSurface::feature_size_um)
        .def_readonly("rms_slope_deg", &DiffuserSurface::rms_slope_deg)
        .def_property_readonly("pitch_um",
                               [](const DiffuserSurface& s) { return s.lattice.pitch_um; })
        .def("mean_slope_deg", [](const DiffuserSurface& s) { return mean_slope_deg(s); })
        .def("autocorrelation_fwhm_um",
             [](const DiffuserSurface& s) { return autocorrelation_fwhm_um(s); });

    m.def(
        "generate_diffuser",
        [](uint64_t seed, double feature_size_um, double rms_slope_deg, int ny, int nx,
           double pitch_um, double contrast) {
            return generate_diffuser(seed, feature_size_um, rms_slope_deg,
                                     DiffuserLattice{ny, nx, pitch_um}, contrast);
        },
        py::arg("seed"), py::arg("feature_size_um") = 140.0, py::arg("rms_slope_deg") = 0.7,
        py::arg("ny") = 424, py::arg("nx") = 424, py::arg("pitch_um") = 10.0,
        py::arg("refractive_index_contrast") = 0.5,
        "Pseudorandom smooth refractive surface; deterministic in (seed, parameters).");

    m.def(
        "render_psf",
        [](const DiffuserSurface& surface, double z_mm, const SystemGeometry& geom,
           long long rays, int threads, uint64_t seed_salt, double source_x_um,
           double source_y_um) {
            RenderOptions o;
            o.rays = rays;
            o.threads = threads;
            o.seed_salt = seed_salt;
            o.source_x_um = source_x_um;
            o.source_y_um = source_y_um;
            Image<float> psf;
            {
                py::gil_scoped_release release;
                psf = render_psf(surface, z_mm, geom, o);
            }
            return array_from_image(psf);
        },
        py::arg("surface"), py::arg("z_mm"), py::arg("geometry"),
        py::arg("rays") = 1'000'000, py::arg("threads") = 1, py::arg("seed_salt") = 0,
        py::arg("source_x_um") = 0.0, py::arg("source_y_um") = 0.0,
        "Ray-traced caustic of a point source, normalized to unit sum.");

    m.def(
        "calibrate",
        [](const DiffuserSurface& surface, const VolumeGrid& grid,
           const SystemGeometry& geom, long long rays, int threads, uint64_t seed_salt) {
            RenderOptions o;
            o.rays = rays;
            o.threads = threads;
            o.seed_salt = seed_salt;
            PsfStack stack;
            {
                py::gil_scoped_release release;
                stack = calibrate(surface, grid, geom, o);
            }
            Tensor3<float> t(stack.nz(), stack.ny(), stack.nx());
            for (int k = 0; k < stack.nz(); ++k)
                std::memcpy(t.slice(k), stack.slices[k].v.data(),
                            stack.slices[k].v.size() * sizeof(float));
            return array_from_tensor(t);
        },
        py::arg("surface"), py::arg("grid"), py::arg("geometry"),
        py::arg("rays") = 1'000'000, py::arg("threads") = 1, py::arg("seed_salt") = 0,
        "One on-axis caustic per grid depth plane, as an (nz, ny, nx) stack.");

    py::class_<PyOperator>(m, "Operator",
                           "Cropped-convolution measurement operator built from a "
                           "calibrated stack (nz, ny, nx) and its depth planes in mm.")
        .def(py::init([](const ArrF& stack, const std::vector<double>& planes) {
                 return PyOperator(stack_from_arrays(stack, planes));
             }),
             py::arg("stack"), py::arg("depth_planes_mm"))
        .def_property_readonly("nz", [](const PyOperator& o) { return o.op.nz(); })
        .def_property_readonly("ny", [](const PyOperator& o) { return o.op.ny(); })
        .def_property_readonly("nx", [](const PyOperator& o) { return o.op.nx(); })
        .def(
            "apply",
            [](const PyOperator& o, const ArrF& x) {
                Tensor3<float> t = tensor_from_array(x);
                Image<float> b;
                {
                    py::gil_scoped_release release;
                    b = o.op.apply(t);
                }
                return array_from_image(b);
            },
            py::arg("volume"), "Forward model: volume -> sensor image.")
        .def(
            "adjoint",
            [](const PyOperator& o, const ArrF& b) {
                Image<float> img = image_from_array(b);
                Tensor3<float> t;
                {
                    py::gil_scoped_release release;
                    t = o.op.adjoint(img);
                }
                return array_from_tensor(t);
            },
            py::arg("image"), "Exact adjoint: sensor image -> volume.");

    m.def(
        "solve",
        [](const ArrF& measurement, const ArrF& stack, const std::vector<double>& planes,
           double lambda_, const std::string& regularizer, bool anisotropic, int max_iters,
           double eps_abs, double eps_rel, double mu1, double mu2, double mu3,
           bool adaptive_penalties, bool nonneg) {
            Image<float> b = image_from_array(measurement);
            PsfStack s = stack_from_arrays(stack, planes);
            SolverConfig cfg =
                config_from_kwargs(lambda_, regularizer, anisotropic, max_iters, eps_abs,
                                   eps_rel, mu1, mu2, mu3, adaptive_penalties, nonneg);
            std::pair<Tensor3<float>, ConvergenceTrace> result;
            {
                py::gil_scoped_release release;
                ConvOperator<float> op(s);
                result = solve(b, op, cfg);
            }
            const ConvergenceTrace& tr = result.second;
            py::dict info;
            info["converged"] = tr.converged;
            info["stop_reason"] = tr.stop_reason;
            info["iterations"] = tr.rows.empty() ? 0 : tr.rows.back().iteration;
            info["lambda"] = tr.lambda_used;
            info["objective"] = tr.rows.empty() ? 0.0 : tr.rows.back().objective;
            return py::make_tuple(array_from_tensor(result.first), info);
        },
        py::arg("measurement"), py::arg("stack"), py::arg("depth_planes_mm"),
        py::arg("lam") = -1.0, py::arg("regularizer") = "tv3d",
        py::arg("anisotropic") = false, py::arg("max_iters") = 200,
        py::arg("eps_abs") = 1e-5, py::arg("eps_rel") = 1e-4, py::arg("mu1") = 1.0,
        py::arg("mu2") = 1.0, py::arg("mu3") = 1.0, py::arg("adaptive_penalties") = true,
        py::arg("nonneg") = true,
        "ADMM reconstruction; returns (volume, info dict). lam < 0 picks the "
        "data-scaled default.");

    m.def(
        "simulate_points",
        [](const std::vector<std::tuple<double, double, double, double>>& points,
           const ArrF& stack, const std::vector<double>& planes, const VolumeGrid& grid,
           const SystemGeometry& geom, const std::string& noise, double noise_value,
           uint64_t seed) {
            Scene scene;
            for (const auto& [x, y, z, inten] : points) {
                scene.points.push_back({x, y, z, inten});
            }
            NoiseModel nm;
            nm.seed = seed;
            if (noise == "gaussian") {
                nm.kind = NoiseModel::Kind::Gaussian;
                nm.gaussian_sigma = noise_value;
            } else if (noise == "poisson") {
                nm.kind = NoiseModel::Kind::Poisson;
                nm.poisson_scale = noise_value;
            } else if (noise != "none") {
                throw ValidationError("noise must be 'none', 'gaussian' or 'poisson'");
            }
            PsfStack s = stack_from_arrays(stack, planes);
            Image<float> b;
            {
                py::gil_scoped_release release;
                b = simulate_measurement<float>(scene, s, grid, geom, nm);
            }
            return array_from_image(b);
        },
        py::arg("points"), py::arg("stack"), py::arg("depth_planes_mm"), py::arg("grid"),
        py::arg("geometry"), py::arg("noise") = "none", py::arg("noise_value") = 0.0,
        py::arg("seed") = 0,
        "Measurement of point sources given as (x_um, y_um, z_mm, intensity) tuples.");

    py::class_<PsfSimilarity>(m, "PsfSimilarity")
        .def_readonly("inner_product", &PsfSimilarity::inner_product)
        .def_readonly("spot_ratio", &PsfSimilarity::spot_ratio);

    m.def(
        "psf_similarity",
        [](const ArrF& on_axis, const ArrF& off_axis) {
            Image<float> a = image_from_array(on_axis);
            Image<float> b = image_from_array(off_axis);
            py::gil_scoped_release release;
            return psf_similarity(a, b);
        },
        py::arg("on_axis"), py::arg("off_axis"),
        "Registered cosine similarity and correlation-spot broadening of two caustics.");
}
