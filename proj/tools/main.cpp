// Command-line front end for the lensless 3D imaging pipeline:
//   gen-diffuser -> calibrate -> simulate -> reconstruct, plus analysis
// reports. Arrays travel between commands as JSON-manifest + raw-f32
// container pairs; exit codes are 0 success, 1 iteration limit without
// convergence (reconstruct), 2 validation, 3 numerical failure, 4 I/O.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lensless/analysis.hpp"
#include "lensless/container.hpp"
#include "lensless/conv_operator.hpp"
#include "lensless/diffuser.hpp"
#include "lensless/errors.hpp"
#include "lensless/geometry.hpp"
#include "lensless/png_io.hpp"
#include "lensless/render.hpp"
#include "lensless/run_config.hpp"
#include "lensless/solver.hpp"

namespace fs = std::filesystem;
using namespace lensless;

namespace {

struct GlobalFlags {
    std::string config_path;
    uint64_t seed = 0;
    int threads = 0;
    bool seed_given = false;
    bool threads_given = false;
};

RunConfig effective_config(const GlobalFlags& g) {
    RunConfig cfg;
    if (!g.config_path.empty()) {
        cfg = load_run_config(g.config_path);
    } else {
        // without a config file, renders use every core; results are
        // bit-identical for any thread count
        cfg.threads = std::max(1u, std::thread::hardware_concurrency());
    }
    if (g.seed_given) cfg.seed = g.seed;
    if (g.threads_given) cfg.threads = g.threads;
    return cfg;
}

double parse_number(const std::string& flag, const std::string& text) {
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size()) {
        throw ValidationError(flag + ": '" + text + "' is not a number");
    }
    return v;
}

// "1,2,5..8" -> {1, 2, 5, 6, 7, 8}
std::vector<int> parse_int_list(const std::string& flag, const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const size_t dots = item.find("..");
        if (dots != std::string::npos) {
            const int a = int(parse_number(flag, item.substr(0, dots)));
            const int b = int(parse_number(flag, item.substr(dots + 2)));
            if (b < a) throw ValidationError(flag + ": range '" + item + "' is descending");
            for (int v = a; v <= b; ++v) out.push_back(v);
        } else {
            out.push_back(int(parse_number(flag, item)));
        }
    }
    if (out.empty()) throw ValidationError(flag + " needs at least one value");
    return out;
}

std::vector<double> parse_double_list(const std::string& flag, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_number(flag, item));
    }
    if (out.empty()) throw ValidationError(flag + " needs at least one value");
    return out;
}

NoiseModel parse_noise(const std::string& text, uint64_t seed) {
    NoiseModel n;
    n.seed = seed;
    if (text.empty() || text == "none") return n;
    const size_t colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    if (colon == std::string::npos) {
        throw ValidationError("--noise must be none, gaussian:SIGMA or poisson:SCALE");
    }
    const double value = parse_number("--noise", text.substr(colon + 1));
    if (kind == "gaussian") {
        n.kind = NoiseModel::Kind::Gaussian;
        n.gaussian_sigma = value;
    } else if (kind == "poisson") {
        n.kind = NoiseModel::Kind::Poisson;
        n.poisson_scale = value;
    } else {
        throw ValidationError("--noise must be none, gaussian:SIGMA or poisson:SCALE");
    }
    return n;
}

void emit_report(const std::string& csv, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << csv;
        return;
    }
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + out_path + "' for writing");
    f << csv;
    if (!f) throw IoError("short write to '" + out_path + "'");
}

// A calibrated stack plus the system it was rendered for. The manifest is
// self-describing: geometry and grid dimensions travel with the stack, so
// downstream commands do not depend on seeing the original config again.
struct LoadedStack {
    PsfStack stack;
    SystemGeometry geom;
    VolumeGrid grid;
};

LoadedStack load_stack(const std::string& path, const RunConfig& cfg) {
    ArrayContainer c = read_container(path);
    LoadedStack ls;
    ls.stack = stack_from_container(c);
    ls.geom = c.geometry ? *c.geometry : cfg.geometry;
    int gnx = cfg.grid.nx, gny = cfg.grid.ny;
    if (c.params.is_object()) {
        gnx = c.params.value("grid_nx", gnx);
        gny = c.params.value("grid_ny", gny);
    }
    ls.grid = build_grid(ls.geom, ls.stack.depth_planes_mm, gnx, gny);
    return ls;
}

Scene load_scene(const std::string& path, const VolumeGrid& grid) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scene '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("scene '" + path + "' is not valid JSON: " + e.what());
    }

    Scene scene;
    if (j.is_object() && j.contains("dtype")) {
        // a container manifest: dense volume on the reconstruction grid
        ArrayContainer c = read_container(path);
        if (c.semantic != Semantic::Volume) {
            throw ValidationError("scene container must have semantic 'volume', got '" +
                                  to_string(c.semantic) + "'");
        }
        scene.volume = volume_from_container(c);
        require_shape(*scene.volume, grid.nz(), grid.ny, grid.nx, "scene volume");
        return scene;
    }

    const nlohmann::json* points = nullptr;
    if (j.is_array()) {
        points = &j;
    } else if (j.is_object() && j.contains("points") && j["points"].is_array()) {
        points = &j["points"];
    } else {
        throw ValidationError("scene '" + path +
                              "' must be a JSON list of points, {\"points\": [...]}, or a "
                              "volume container manifest");
    }
    for (const auto& p : *points) {
        PointSource s;
        try {
            s.x_um = p.at("x_um").get<double>();
            s.y_um = p.at("y_um").get<double>();
            s.z_mm = p.at("z_mm").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("scene point needs x_um, y_um and z_mm: " +
                                  std::string(e.what()));
        }
        s.intensity = p.value("intensity", 1.0);
        scene.points.push_back(s);
    }
    return scene;
}

Image<float> maxproj_z(const Tensor3<float>& v) {
    Image<float> mp(v.ny, v.nx);
    for (int z = 0; z < v.nz; ++z)
        for (int y = 0; y < v.ny; ++y)
            for (int x = 0; x < v.nx; ++x)
                mp.at(y, x) = std::max(mp.at(y, x), v.at(z, y, x));
    return mp;
}

std::string fov_limit_name(FovLimit l) {
    return l == FovLimit::Geometric ? "aperture-geometry" : "pixel-response";
}

// --- command bodies -------------------------------------------------------

int cmd_gen_diffuser(const RunConfig& cfg, const std::string& out) {
    DiffuserSurface surface =
        generate_diffuser(cfg.seed, cfg.diffuser.feature_size_um, cfg.diffuser.rms_slope_deg,
                          lattice_from_config(cfg), cfg.diffuser.refractive_index_contrast);

    ArrayContainer c;
    c.semantic = Semantic::Heightmap;
    c.shape = {surface.lattice.ny, surface.lattice.nx};
    c.units = "um";
    c.data.resize(size_t(c.element_count()));
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] = float(surface.heightmap.v[i]);
    c.params = {{"pitch_um", surface.lattice.pitch_um},
                {"feature_size_um", surface.feature_size_um},
                {"rms_slope_deg", surface.rms_slope_deg},
                {"refractive_index_contrast", surface.refractive_index_contrast},
                {"seed", cfg.seed}};
    write_container(c, out);
    std::cout << "wrote heightmap " << surface.lattice.ny << "x" << surface.lattice.nx
              << " to " << out << "\n";
    return 0;
}

DiffuserSurface surface_from_container(const ArrayContainer& c, const RunConfig& cfg) {
    if (c.semantic != Semantic::Heightmap) {
        throw ValidationError("expected a heightmap container, got '" +
                              to_string(c.semantic) + "'");
    }
    DiffuserLattice lat;
    lat.ny = int(c.shape[0]);
    lat.nx = int(c.shape[1]);
    lat.pitch_um = cfg.diffuser.pitch_um;
    double feature = cfg.diffuser.feature_size_um;
    double slope = cfg.diffuser.rms_slope_deg;
    double contrast = cfg.diffuser.refractive_index_contrast;
    uint64_t seed = cfg.seed;
    if (c.params.is_object()) {
        lat.pitch_um = c.params.value("pitch_um", lat.pitch_um);
        feature = c.params.value("feature_size_um", feature);
        slope = c.params.value("rms_slope_deg", slope);
        contrast = c.params.value("refractive_index_contrast", contrast);
        seed = c.params.value("seed", seed);
    }
    Image<double> h(lat.ny, lat.nx);
    for (size_t i = 0; i < h.v.size(); ++i) h.v[i] = double(c.data[i]);
    return surface_from_heightmap(std::move(h), lat, feature, slope, contrast, seed);
}

int cmd_calibrate(const RunConfig& cfg, const std::string& diffuser_path,
                  const std::string& out, long long rays_flag) {
    DiffuserSurface surface = surface_from_container(read_container(diffuser_path), cfg);
    VolumeGrid grid = grid_from_config(cfg);

    RenderOptions opts;
    opts.rays = rays_flag > 0 ? rays_flag : cfg.render_rays;
    opts.threads = cfg.threads;
    opts.seed_salt = cfg.seed;
    PsfStack stack = calibrate(surface, grid, cfg.geometry, opts);

    ArrayContainer c = container_from_stack(stack);
    c.geometry = cfg.geometry;
    c.params = {{"rays", opts.rays},
                {"seed", cfg.seed},
                {"grid_nx", grid.nx},
                {"grid_ny", grid.ny}};
    write_container(c, out);
    std::cout << "wrote caustic stack " << stack.nz() << "x" << stack.ny() << "x"
              << stack.nx() << " to " << out << "\n";
    return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& scene_path,
                 const std::string& stack_path, const std::string& noise_flag,
                 const std::string& out) {
    LoadedStack ls = load_stack(stack_path, cfg);
    Scene scene = load_scene(scene_path, ls.grid);
    NoiseModel noise = parse_noise(noise_flag, cfg.seed);

    Image<float> b = simulate_measurement<float>(scene, ls.stack, ls.grid, ls.geom, noise);

    ArrayContainer c = container_from_image(b, Semantic::SensorImage, "relative-intensity");
    c.geometry = ls.geom;
    c.params = {{"noise", noise_flag.empty() ? "none" : noise_flag},
                {"seed", cfg.seed},
                {"n_points", scene.points.size()},
                {"dense_volume", scene.volume.has_value()}};
    write_container(c, out);
    std::cout << "wrote measurement " << b.ny << "x" << b.nx << " to " << out << "\n";
    return 0;
}

int cmd_reconstruct(const RunConfig& cfg, const std::string& measurement_path,
                    const std::string& stack_path, const std::string& out,
                    std::optional<double> lambda_flag, std::optional<int> iters_flag,
                    const std::string& regularizer_flag, bool no_nonneg) {
    LoadedStack ls = load_stack(stack_path, cfg);
    ArrayContainer mc = read_container(measurement_path);
    if (mc.semantic != Semantic::SensorImage) {
        throw ValidationError("expected a sensor_image container, got '" +
                              to_string(mc.semantic) + "'");
    }
    Image<float> b = image_from_container(mc);

    SolverConfig scfg = cfg.solver;
    if (lambda_flag) scfg.lambda = *lambda_flag;
    if (iters_flag) scfg.max_iters = *iters_flag;
    if (!regularizer_flag.empty()) {
        if (regularizer_flag == "tv3d") {
            scfg.psi = PsiMode::Tv3d;
        } else if (regularizer_flag == "identity") {
            scfg.psi = PsiMode::Identity;
        } else {
            throw ValidationError("--regularizer must be tv3d or identity");
        }
    }
    if (no_nonneg) scfg.nonneg = false;

    ConvOperator<float> op(ls.stack);
    auto [volume, trace] = solve(b, op, scfg);

    ArrayContainer c = container_from_volume(volume);
    c.depth_planes_mm = ls.stack.depth_planes_mm;
    c.geometry = ls.geom;
    c.params = {{"lambda", trace.lambda_used},
                {"iterations", trace.rows.empty() ? 0 : trace.rows.back().iteration},
                {"converged", trace.converged},
                {"stop_reason", trace.stop_reason}};
    write_container(c, out);

    fs::path stem = fs::path(out);
    stem.replace_extension();
    const fs::path trace_path = stem.string() + "_trace.csv";
    const fs::path png_path = stem.string() + "_maxproj.png";
    emit_report(trace_csv(trace), trace_path.string());
    write_png_gray8(png_path, maxproj_z(volume));

    std::cout << "wrote volume " << volume.nz << "x" << volume.ny << "x" << volume.nx
              << " to " << out << " (" << trace.stop_reason << ", lambda "
              << trace.lambda_used << ")\n";
    return trace.converged ? 0 : 1;
}

int cmd_analyze_fov(const RunConfig& cfg, const std::string& out) {
    FovReport r = compute_fov(cfg.geometry);
    std::ostringstream os;
    os.precision(10);
    os << "axis,half_fov_deg,limited_by,z_min_mm,z_max_mm\n";
    os << "x," << r.half_fov_x_deg << "," << fov_limit_name(r.limit_x) << "," << r.z_min_mm
       << "," << r.z_max_mm << "\n";
    os << "y," << r.half_fov_y_deg << "," << fov_limit_name(r.limit_y) << "," << r.z_min_mm
       << "," << r.z_max_mm << "\n";
    emit_report(os.str(), out);
    return 0;
}

int cmd_analyze_two_point(const RunConfig& cfg, const std::string& stack_path, double z_mm,
                          const std::string& axis_name, const std::string& separations,
                          double dip_threshold, const std::string& out) {
    LoadedStack ls = load_stack(stack_path, cfg);
    if (z_mm <= 0.0) z_mm = ls.grid.depth_planes_mm[ls.grid.nz() / 2];
    Axis axis;
    if (axis_name == "x") {
        axis = Axis::X;
    } else if (axis_name == "y") {
        axis = Axis::Y;
    } else if (axis_name == "z") {
        axis = Axis::Z;
    } else {
        throw ValidationError("--axis must be x, y or z");
    }
    const std::vector<double> seps = parse_double_list("--separations", separations);

    std::string csv;
    for (double s : seps) {
        ResolvabilityResult r =
            two_point_test(ls.stack, ls.grid, ls.geom, z_mm, axis, s, cfg.solver,
                           dip_threshold);
        const std::string one = resolvability_csv(r);
        csv += csv.empty() ? one : one.substr(one.find('\n') + 1);
    }
    emit_report(csv, out);
    return 0;
}

int cmd_analyze_multi_point(const RunConfig& cfg, const std::string& stack_path, double z_mm,
                            int side, const std::string& spacings_x, double spacing_z_mm,
                            double dip_threshold, const std::string& out) {
    LoadedStack ls = load_stack(stack_path, cfg);
    if (z_mm <= 0.0) z_mm = ls.grid.depth_planes_mm[ls.grid.nz() / 2];
    const std::vector<double> spacings = parse_double_list("--spacing-x", spacings_x);

    std::string csv;
    for (double sx : spacings) {
        ResolvabilityResult r = multi_point_test(ls.stack, ls.grid, ls.geom, z_mm, side, sx,
                                                 spacing_z_mm, cfg.solver, dip_threshold);
        const std::string one = resolvability_csv(r);
        csv += csv.empty() ? one : one.substr(one.find('\n') + 1);
    }
    emit_report(csv, out);
    return 0;
}

int cmd_analyze_conditioning(const RunConfig& cfg, const std::string& stack_path,
                             double z_mm, const std::string& counts,
                             const std::string& separations, const std::string& plane_name,
                             const std::string& out) {
    LoadedStack ls = load_stack(stack_path, cfg);
    if (z_mm <= 0.0) z_mm = ls.grid.depth_planes_mm[ls.grid.nz() / 2];
    ConstellationPlane plane;
    if (plane_name == "xz") {
        plane = ConstellationPlane::XZ;
    } else if (plane_name == "xy") {
        plane = ConstellationPlane::XY;
    } else {
        throw ValidationError("--plane must be xz or xy");
    }
    auto curves = conditioning_sweep(ls.stack, ls.grid, z_mm,
                                     parse_int_list("--n", counts),
                                     parse_int_list("--separations", separations), plane);
    emit_report(curves_csv(curves), out);
    return 0;
}

int cmd_analyze_psf_similarity(const RunConfig& cfg, const std::string& diffuser_path,
                               double z_mm, const std::string& offsets,
                               const std::string& out) {
    DiffuserSurface surface = surface_from_container(read_container(diffuser_path), cfg);
    const std::vector<double> offs = parse_double_list("--offsets-um", offsets);

    RenderOptions opts;
    opts.rays = cfg.render_rays;
    opts.threads = cfg.threads;
    opts.seed_salt = cfg.seed;
    Image<float> on_axis = render_psf(surface, z_mm, cfg.geometry, opts);

    std::ostringstream os;
    os.precision(10);
    os << "offset_um,inner_product,spot_ratio\n";
    for (double off : offs) {
        RenderOptions o = opts;
        o.source_x_um = off;
        Image<float> shifted = render_psf(surface, z_mm, cfg.geometry, o);
        PsfSimilarity sim = psf_similarity(on_axis, shifted);
        os << off << "," << sim.inner_product << "," << sim.spot_ratio << "\n";
    }
    emit_report(os.str(), out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lensless 3D imaging pipeline: caustic simulation, calibration,\n"
                 "measurement synthesis, ADMM reconstruction and system analysis.\n"
                 "Arrays are stored as a JSON manifest plus a raw-f32 payload.\n\n"
                 "Configuration keys (via --config FILE, 'key = value' lines):\n" +
                 run_config_keys_help()};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--config", g.config_path, "configuration file (key = value lines)");
    auto* seed_opt = app.add_option("--seed", g.seed, "override the configured random seed");
    auto* threads_opt =
        app.add_option("--threads", g.threads,
                       "worker threads for rendering (default: all cores, or the config)");

    int exit_code = 0;

    // callbacks fire inside app.parse(), so resolve the overrides lazily
    auto make_config = [&]() {
        g.seed_given = seed_opt->count() > 0;
        g.threads_given = threads_opt->count() > 0;
        return effective_config(g);
    };

    // gen-diffuser
    auto* gen = app.add_subcommand("gen-diffuser",
                                   "generate a pseudorandom diffuser heightmap container");
    std::string gen_out;
    gen->add_option("--out", gen_out, "output manifest path (.json)")->required();
    gen->callback([&] { exit_code = cmd_gen_diffuser(make_config(), gen_out); });

    // calibrate
    auto* cal = app.add_subcommand(
        "calibrate", "render the per-depth caustic stack for a diffuser");
    std::string cal_diffuser, cal_out;
    long long cal_rays = 0;
    cal->add_option("--diffuser", cal_diffuser, "heightmap container manifest")->required();
    cal->add_option("--out", cal_out, "output manifest path (.json)")->required();
    cal->add_option("--rays", cal_rays, "rays per depth plane (default: config render_rays)");
    cal->callback([&] {
        exit_code = cmd_calibrate(make_config(), cal_diffuser, cal_out, cal_rays);
    });

    // simulate
    auto* sim = app.add_subcommand("simulate",
                                   "synthesize a sensor measurement of a scene");
    std::string sim_scene, sim_stack, sim_noise, sim_out;
    sim->add_option("--scene", sim_scene,
                    "JSON point list, {\"points\": [...]}, or volume container")
        ->required();
    sim->add_option("--stack", sim_stack, "calibrated stack manifest")->required();
    sim->add_option("--noise", sim_noise, "none | gaussian:SIGMA | poisson:SCALE");
    sim->add_option("--out", sim_out, "output manifest path (.json)")->required();
    sim->callback([&] {
        exit_code =
            cmd_simulate(make_config(), sim_scene, sim_stack, sim_noise, sim_out);
    });

    // reconstruct
    auto* rec = app.add_subcommand(
        "reconstruct", "solve for the 3D volume behind a measurement (exit 1 if the\n"
                       "iteration limit is hit before the residual tolerances)");
    std::string rec_meas, rec_stack, rec_out, rec_reg;
    double rec_lambda = 0.0;
    int rec_iters = 0;
    bool rec_no_nonneg = false;
    rec->add_option("--measurement", rec_meas, "sensor_image container manifest")
        ->required();
    rec->add_option("--stack", rec_stack, "calibrated stack manifest")->required();
    rec->add_option("--out", rec_out, "output volume manifest; also writes\n"
                                      "<stem>_trace.csv and <stem>_maxproj.png")
        ->required();
    auto* lam_opt = rec->add_option("--lambda", rec_lambda,
                                    "sparsity weight (default: data-scaled)");
    auto* it_opt = rec->add_option("--iters", rec_iters, "iteration budget (default 200)");
    rec->add_option("--regularizer", rec_reg, "tv3d | identity (default tv3d)");
    rec->add_flag("--no-nonneg", rec_no_nonneg, "drop the nonnegativity constraint");
    rec->callback([&] {
        exit_code = cmd_reconstruct(
            make_config(), rec_meas, rec_stack, rec_out,
            lam_opt->count() ? std::optional<double>(rec_lambda) : std::nullopt,
            it_opt->count() ? std::optional<int>(rec_iters) : std::nullopt, rec_reg,
            rec_no_nonneg);
    });

    // analyze
    auto* ana = app.add_subcommand("analyze", "system characterization reports (CSV)");
    ana->require_subcommand(1);

    auto* fov = ana->add_subcommand("fov", "angular field of view and axial range");
    std::string fov_out;
    fov->add_option("--out", fov_out, "CSV path (default: stdout)");
    fov->callback([&] { exit_code = cmd_analyze_fov(make_config(), fov_out); });

    auto* twop = ana->add_subcommand(
        "two-point", "two-source resolvability sweep; lateral separations in um,\n"
                     "axial in mm; one CSV row per separation");
    std::string tp_stack, tp_axis = "x", tp_seps, tp_out;
    double tp_z = 0.0, tp_dip = 0.2;
    twop->add_option("--stack", tp_stack, "calibrated stack manifest")->required();
    twop->add_option("--z", tp_z, "test depth in mm (default: mid-volume plane)");
    twop->add_option("--axis", tp_axis, "x | y | z (default x)");
    twop->add_option("--separations", tp_seps, "comma list, e.g. 50,100,200")->required();
    twop->add_option("--dip-threshold", tp_dip, "required relative dip (default 0.2)");
    twop->add_option("--out", tp_out, "CSV path (default: stdout)");
    twop->callback([&] {
        exit_code = cmd_analyze_two_point(make_config(), tp_stack, tp_z, tp_axis,
                                          tp_seps, tp_dip, tp_out);
    });

    auto* multi = ana->add_subcommand(
        "multi-point", "side x side constellation in the x-z plane; one CSV row per\n"
                       "lateral spacing");
    std::string mp_stack, mp_spacings, mp_out;
    double mp_z = 0.0, mp_spacing_z = 0.0, mp_dip = 0.2;
    int mp_side = 4;
    multi->add_option("--stack", mp_stack, "calibrated stack manifest")->required();
    multi->add_option("--z", mp_z, "center depth in mm (default: mid-volume plane)");
    multi->add_option("--side", mp_side, "sources per constellation side (default 4)");
    multi->add_option("--spacing-x", mp_spacings, "comma list of lateral spacings in um")
        ->required();
    multi->add_option("--spacing-z", mp_spacing_z, "axial spacing in mm")->required();
    multi->add_option("--dip-threshold", mp_dip, "required relative dip (default 0.2)");
    multi->add_option("--out", mp_out, "CSV path (default: stdout)");
    multi->callback([&] {
        exit_code = cmd_analyze_multi_point(make_config(), mp_stack, mp_z, mp_side,
                                            mp_spacings, mp_spacing_z, mp_dip, mp_out);
    });

    auto* cond = ana->add_subcommand(
        "conditioning", "condition numbers of source-constellation sub-matrices; one\n"
                        "curve per source count over the separation sweep");
    std::string cd_stack, cd_counts = "4,9,16", cd_seps = "1..10", cd_plane = "xy", cd_out;
    double cd_z = 0.0;
    cond->add_option("--stack", cd_stack, "calibrated stack manifest")->required();
    cond->add_option("--z", cd_z, "constellation depth in mm (default: mid-volume plane)");
    cond->add_option("--n", cd_counts, "perfect-square source counts (default 4,9,16)");
    cond->add_option("--separations", cd_seps,
                     "voxel separations, ranges allowed (default 1..10)");
    cond->add_option("--plane", cd_plane, "xy | xz (default xy)");
    cond->add_option("--out", cd_out, "CSV path (default: stdout)");
    cond->callback([&] {
        exit_code = cmd_analyze_conditioning(make_config(), cd_stack, cd_z, cd_counts,
                                             cd_seps, cd_plane, cd_out);
    });

    auto* psim = ana->add_subcommand(
        "psf-similarity", "how far off-axis caustics drift from a pure shift of the\n"
                          "on-axis pattern");
    std::string ps_diffuser, ps_offsets = "0,100,200,400,800", ps_out;
    double ps_z = 0.0;
    psim->add_option("--diffuser", ps_diffuser, "heightmap container manifest")->required();
    psim->add_option("--z", ps_z, "source depth in mm")->required();
    psim->add_option("--offsets-um", ps_offsets,
                     "lateral source offsets in um (default 0,100,200,400,800)");
    psim->add_option("--out", ps_out, "CSV path (default: stdout)");
    psim->callback([&] {
        exit_code = cmd_analyze_psf_similarity(make_config(), ps_diffuser, ps_z,
                                               ps_offsets, ps_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return exit_code;
}
