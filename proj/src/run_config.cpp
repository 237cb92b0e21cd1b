#include "lensless/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "lensless/errors.hpp"

namespace lensless {

RunConfig::RunConfig() {
    geometry.sensor_width_px = 256;
    geometry.sensor_height_px = 256;
    geometry.pixel_pitch_um = 26.0;
    geometry.aperture_width_mm = 4.0;
    geometry.aperture_height_mm = 4.0;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& v) {
    size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) {
        throw ValidationError("key '" + key + "' needs a number, got '" + v + "'");
    }
    return x;
}

long long parse_int(const std::string& key, const std::string& v) {
    size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) {
        throw ValidationError("key '" + key + "' needs an integer, got '" + v + "'");
    }
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("key '" + key + "' needs true/false, got '" + v + "'");
}

struct KeyDef {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::string describe;
};

const std::map<std::string, KeyDef>& key_table() {
    auto D = [](auto member, const char* doc) {
        return KeyDef{[member](RunConfig& c, const std::string& k, const std::string& v) {
                          c.*member = parse_double(k, v);
                      },
                      doc};
    };
    static const std::map<std::string, KeyDef> table = {
        // sensor / optics geometry
        {"sensor_width_px",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.sensor_width_px = int(parse_int(k, v));
          },
          "sensor pixel count along x (default 256)"}},
        {"sensor_height_px",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.sensor_height_px = int(parse_int(k, v));
          },
          "sensor pixel count along y (default 256)"}},
        {"pixel_pitch_um",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.pixel_pitch_um = parse_double(k, v);
          },
          "sensor pixel pitch in micrometers (default 26)"}},
        {"diffuser_to_sensor_mm",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.diffuser_to_sensor_mm = parse_double(k, v);
          },
          "diffuser-to-sensor spacing d in millimeters (default 8.9)"}},
        {"aperture_width_mm",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.aperture_width_mm = parse_double(k, v);
          },
          "aperture x extent in millimeters (default 4)"}},
        {"aperture_height_mm",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.aperture_height_mm = parse_double(k, v);
          },
          "aperture y extent in millimeters (default 4)"}},
        {"max_deflection_deg",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.max_deflection_deg = parse_double(k, v);
          },
          "diffuser deflection bound in degrees (default 0.5)"}},
        {"pixel_cutoff_x_deg",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.pixel_cutoff_x_deg = parse_double(k, v);
          },
          "pixel angular response cutoff along x in degrees (default 41.5)"}},
        {"pixel_cutoff_y_deg",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.pixel_cutoff_y_deg = parse_double(k, v);
          },
          "pixel angular response cutoff along y in degrees (default 30)"}},
        {"min_object_distance_mm",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.min_object_distance_mm = parse_double(k, v);
          },
          "closest usable object distance in millimeters (default 7.3)"}},
        {"hyperfocal_distance_mm",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.geometry.hyperfocal_distance_mm = parse_double(k, v);
          },
          "depth beyond which axial resolution vanishes (default 2300)"}},
        // diffuser surface
        {"diffuser_ny",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.diffuser.ny = int(parse_int(k, v));
          },
          "diffuser lattice rows (default 424)"}},
        {"diffuser_nx",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.diffuser.nx = int(parse_int(k, v));
          },
          "diffuser lattice columns (default 424)"}},
        {"diffuser_pitch_um",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.diffuser.pitch_um = parse_double(k, v);
          },
          "diffuser lattice pitch in micrometers (default 10)"}},
        {"feature_size_um",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.diffuser.feature_size_um = parse_double(k, v);
          },
          "surface autocorrelation width in micrometers (default 140)"}},
        {"rms_slope_deg",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.diffuser.rms_slope_deg = parse_double(k, v);
          },
          "mean ray deflection in degrees (default 0.7)"}},
        {"refractive_index_contrast",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.diffuser.refractive_index_contrast = parse_double(k, v);
          },
          "n - 1 of the diffuser material (default 0.5)"}},
        // reconstruction grid
        {"grid_nx",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.grid.nx = int(parse_int(k, v));
          },
          "lateral voxels along x (default 256)"}},
        {"grid_ny",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.grid.ny = int(parse_int(k, v));
          },
          "lateral voxels along y (default 256)"}},
        {"z_min_mm",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.grid.z_min_mm = parse_double(k, v);
          },
          "nearest depth plane in millimeters (default 10)"}},
        {"z_max_mm",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.grid.z_max_mm = parse_double(k, v);
          },
          "farthest depth plane in millimeters (default 40)"}},
        {"num_planes",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.grid.num_planes = int(parse_int(k, v));
          },
          "depth plane count, reciprocally spaced (default 16)"}},
        // solver
        {"lambda",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.lambda = parse_double(k, v);
          },
          "sparsity weight; negative selects the data-scaled default"}},
        {"regularizer",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "tv3d") {
                  c.solver.psi = PsiMode::Tv3d;
              } else if (v == "identity") {
                  c.solver.psi = PsiMode::Identity;
              } else {
                  throw ValidationError("key '" + k + "' must be tv3d or identity");
              }
          },
          "tv3d or identity (default tv3d)"}},
        {"anisotropic_tv",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.anisotropic_tv = parse_bool(k, v);
          },
          "per-axis instead of vectorial shrinkage (default false)"}},
        {"max_iters",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.max_iters = int(parse_int(k, v));
          },
          "iteration budget (default 200)"}},
        {"eps_abs",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.eps_abs = parse_double(k, v);
          },
          "absolute residual tolerance (default 1e-5)"}},
        {"eps_rel",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.eps_rel = parse_double(k, v);
          },
          "relative residual tolerance (default 1e-4)"}},
        {"mu1",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.mu1 = parse_double(k, v);
          },
          "measurement-split penalty (default 1)"}},
        {"mu2",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.mu2 = parse_double(k, v);
          },
          "sparsity-split penalty (default 1)"}},
        {"mu3",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.mu3 = parse_double(k, v);
          },
          "nonnegativity-split penalty (default 1)"}},
        {"adaptive_penalties",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.adaptive_penalties = parse_bool(k, v);
          },
          "residual-balancing penalty tuning (default true)"}},
        {"tune_factor",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.tune_factor = parse_double(k, v);
          },
          "penalty rescale factor (default 2)"}},
        {"tune_ratio",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.tune_ratio = parse_double(k, v);
          },
          "primal/dual imbalance that triggers tuning (default 10)"}},
        {"nonneg",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.nonneg = parse_bool(k, v);
          },
          "nonnegativity constraint (default true)"}},
        {"divergence_factor",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.divergence_factor = parse_double(k, v);
          },
          "objective blow-up ratio treated as divergence (default 1e6)"}},
        {"divergence_iters",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.solver.divergence_iters = int(parse_int(k, v));
          },
          "consecutive blow-up iterations before aborting (default 10)"}},
        // simulation / misc
        {"render_rays",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.render_rays = parse_int(k, v);
          },
          "rays per rendered caustic (default 10000000)"}},
        {"seed",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.seed = uint64_t(parse_int(k, v));
          },
          "master random seed (default 1)"}},
        {"threads",
         {[](RunConfig& c, const std::string& k, const std::string& v) {
              c.threads = int(parse_int(k, v));
          },
          "worker threads for rendering (default 1)"}},
    };
    (void)D;
    return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = key_table().find(key);
        if (it == key_table().end()) {
            throw ValidationError("unknown configuration key '" + key + "'");
        }
        if (!seen.insert(key).second) {
            throw ValidationError("duplicate configuration key '" + key + "'");
        }
        it->second.set(cfg, key, value);
    }

    // the depth range only makes sense as a unit
    const char* group[] = {"z_min_mm", "z_max_mm", "num_planes"};
    int given = 0;
    for (const char* k : group)
        if (seen.count(k)) ++given;
    if (given != 0 && given != 3) {
        for (const char* k : group) {
            if (!seen.count(k)) {
                throw ValidationError(std::string("missing required key '") + k +
                                      "' (z_min_mm, z_max_mm and num_planes go together)");
            }
        }
    }

    validate_geometry(cfg.geometry);
    if (cfg.grid.nx < 2 || cfg.grid.ny < 2) {
        throw ValidationError("grid_nx and grid_ny must be >= 2");
    }
    if (cfg.grid.num_planes < 1) throw ValidationError("num_planes must be >= 1");
    if (!(cfg.grid.z_min_mm > 0.0) || cfg.grid.z_max_mm < cfg.grid.z_min_mm) {
        throw ValidationError("depth range needs 0 < z_min_mm <= z_max_mm");
    }
    if (cfg.render_rays < 1) throw ValidationError("render_rays must be >= 1");
    if (cfg.threads < 1) throw ValidationError("threads must be >= 1");
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_run_config(buf.str());
}

std::string run_config_keys_help() {
    std::ostringstream os;
    for (const auto& [key, def] : key_table()) {
        os << "  " << key << ": " << def.describe << '\n';
    }
    return os.str();
}

VolumeGrid grid_from_config(const RunConfig& cfg) {
    std::vector<double> planes;
    if (cfg.grid.num_planes == 1 || cfg.grid.z_min_mm == cfg.grid.z_max_mm) {
        planes = {cfg.grid.z_min_mm};
    } else {
        const double c = reciprocal_spacing_for_count(cfg.grid.z_min_mm, cfg.grid.z_max_mm,
                                                      cfg.grid.num_planes);
        planes = depth_plane_spacing(cfg.grid.z_min_mm, cfg.grid.z_max_mm, c);
    }
    return build_grid(cfg.geometry, planes, cfg.grid.nx, cfg.grid.ny);
}

DiffuserLattice lattice_from_config(const RunConfig& cfg) {
    DiffuserLattice lat;
    lat.ny = cfg.diffuser.ny;
    lat.nx = cfg.diffuser.nx;
    lat.pitch_um = cfg.diffuser.pitch_um;
    return lat;
}

}  // namespace lensless
