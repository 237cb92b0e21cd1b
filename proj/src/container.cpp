#include "lensless/container.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

#include "lensless/errors.hpp"

namespace lensless {

namespace {

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian; big-endian hosts are unsupported");

int expected_rank(Semantic s) {
    switch (s) {
        case Semantic::PsfStack:
        case Semantic::Volume:
            return 3;
        case Semantic::SensorImage:
        case Semantic::Heightmap:
            return 2;
    }
    return 0;
}

std::filesystem::path payload_path_for(const std::filesystem::path& manifest_path) {
    std::filesystem::path p = manifest_path;
    p.replace_extension(".f32");
    return p;
}

}  // namespace

std::string to_string(Semantic s) {
    switch (s) {
        case Semantic::PsfStack: return "psf_stack";
        case Semantic::SensorImage: return "sensor_image";
        case Semantic::Volume: return "volume";
        case Semantic::Heightmap: return "heightmap";
    }
    return "?";
}

Semantic semantic_from_string(const std::string& s) {
    if (s == "psf_stack") return Semantic::PsfStack;
    if (s == "sensor_image") return Semantic::SensorImage;
    if (s == "volume") return Semantic::Volume;
    if (s == "heightmap") return Semantic::Heightmap;
    throw ValidationError("unknown container semantic '" + s + "'");
}

long long ArrayContainer::element_count() const {
    long long n = 1;
    for (long long d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

void ArrayContainer::validate() const {
    if (shape.empty()) throw ValidationError("container shape is empty");
    for (long long d : shape) {
        if (d < 1) throw ValidationError("container shape entries must be >= 1");
    }
    const int rank = int(shape.size());
    if (rank != expected_rank(semantic)) {
        throw ValidationError("semantic '" + to_string(semantic) + "' requires a " +
                              std::to_string(expected_rank(semantic)) + "-d shape, got " +
                              std::to_string(rank) + "-d");
    }
    if (static_cast<long long>(data.size()) != element_count()) {
        throw ValidationError("container payload has " + std::to_string(data.size()) +
                              " values but the shape needs " +
                              std::to_string(element_count()));
    }
    if (semantic == Semantic::PsfStack &&
        static_cast<long long>(depth_planes_mm.size()) != shape[0]) {
        throw ValidationError("psf_stack needs one depth plane per slice");
    }
}

nlohmann::json geometry_to_json(const SystemGeometry& g) {
    return {{"sensor_width_px", g.sensor_width_px},
            {"sensor_height_px", g.sensor_height_px},
            {"pixel_pitch_um", g.pixel_pitch_um},
            {"diffuser_to_sensor_mm", g.diffuser_to_sensor_mm},
            {"aperture_width_mm", g.aperture_width_mm},
            {"aperture_height_mm", g.aperture_height_mm},
            {"max_deflection_deg", g.max_deflection_deg},
            {"pixel_cutoff_x_deg", g.pixel_cutoff_x_deg},
            {"pixel_cutoff_y_deg", g.pixel_cutoff_y_deg},
            {"min_object_distance_mm", g.min_object_distance_mm},
            {"hyperfocal_distance_mm", g.hyperfocal_distance_mm}};
}

SystemGeometry geometry_from_json(const nlohmann::json& j) {
    SystemGeometry g;
    try {
        g.sensor_width_px = j.at("sensor_width_px").get<int>();
        g.sensor_height_px = j.at("sensor_height_px").get<int>();
        g.pixel_pitch_um = j.at("pixel_pitch_um").get<double>();
        g.diffuser_to_sensor_mm = j.at("diffuser_to_sensor_mm").get<double>();
        g.aperture_width_mm = j.at("aperture_width_mm").get<double>();
        g.aperture_height_mm = j.at("aperture_height_mm").get<double>();
        g.max_deflection_deg = j.at("max_deflection_deg").get<double>();
        g.pixel_cutoff_x_deg = j.at("pixel_cutoff_x_deg").get<double>();
        g.pixel_cutoff_y_deg = j.at("pixel_cutoff_y_deg").get<double>();
        g.min_object_distance_mm = j.at("min_object_distance_mm").get<double>();
        g.hyperfocal_distance_mm = j.at("hyperfocal_distance_mm").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad geometry block: ") + e.what());
    }
    return g;
}

void write_container(const ArrayContainer& c, const std::filesystem::path& manifest_path) {
    c.validate();
    const std::filesystem::path payload = payload_path_for(manifest_path);

    nlohmann::json j;
    j["dtype"] = "f32";
    j["shape"] = c.shape;
    j["order"] = "row-major";
    j["endianness"] = "little";
    j["semantic"] = to_string(c.semantic);
    j["units"] = c.units;
    j["payload"] = payload.filename().string();
    if (!c.depth_planes_mm.empty()) j["depth_planes"] = c.depth_planes_mm;
    if (c.geometry) j["geometry"] = geometry_to_json(*c.geometry);
    if (!c.params.is_null()) j["params"] = c.params;

    {
        std::ofstream f(payload, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + payload.string() + "' for writing");
        f.write(reinterpret_cast<const char*>(c.data.data()),
                std::streamsize(c.data.size() * sizeof(float)));
        if (!f) throw IoError("short write to '" + payload.string() + "'");
    }
    std::ofstream f(manifest_path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + manifest_path.string() + "' for writing");
    f << j.dump(2) << '\n';
    if (!f) throw IoError("short write to '" + manifest_path.string() + "'");
}

ArrayContainer read_container(const std::filesystem::path& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open '" + manifest_path.string() + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse '" + manifest_path.string() + "': " + e.what());
    }

    ArrayContainer c;
    try {
        if (j.at("dtype").get<std::string>() != "f32") {
            throw ValidationError("unsupported dtype '" + j["dtype"].get<std::string>() +
                                  "' (only f32)");
        }
        if (j.at("order").get<std::string>() != "row-major") {
            throw ValidationError("unsupported order (only row-major)");
        }
        if (j.at("endianness").get<std::string>() != "little") {
            throw ValidationError("unsupported endianness (only little)");
        }
        c.semantic = semantic_from_string(j.at("semantic").get<std::string>());
        c.shape = j.at("shape").get<std::vector<long long>>();
        c.units = j.value("units", std::string());
        if (j.contains("depth_planes")) {
            c.depth_planes_mm = j["depth_planes"].get<std::vector<double>>();
        }
        if (j.contains("geometry")) c.geometry = geometry_from_json(j["geometry"]);
        if (j.contains("params")) c.params = j["params"];

        const std::string payload_name = j.at("payload").get<std::string>();
        const std::filesystem::path payload = manifest_path.parent_path() / payload_name;
        std::error_code ec;
        const auto bytes = std::filesystem::file_size(payload, ec);
        if (ec) throw IoError("cannot stat payload '" + payload.string() + "'");
        const long long want = c.element_count() * 4;
        if (static_cast<long long>(bytes) != want) {
            throw ValidationError("payload '" + payload.string() + "' holds " +
                                  std::to_string(bytes) + " bytes but the shape needs " +
                                  std::to_string(want));
        }
        std::ifstream pf(payload, std::ios::binary);
        if (!pf) throw IoError("cannot open payload '" + payload.string() + "'");
        c.data.resize(size_t(c.element_count()));
        pf.read(reinterpret_cast<char*>(c.data.data()), std::streamsize(want));
        if (pf.gcount() != std::streamsize(want)) {
            throw IoError("short read from '" + payload.string() + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bad manifest '" + manifest_path.string() + "': " + e.what());
    }
    c.validate();
    return c;
}

ArrayContainer container_from_stack(const PsfStack& stack) {
    if (stack.slices.empty()) throw ValidationError("empty caustic stack");
    ArrayContainer c;
    c.semantic = Semantic::PsfStack;
    c.shape = {stack.nz(), stack.ny(), stack.nx()};
    c.units = "relative-intensity";
    c.depth_planes_mm = stack.depth_planes_mm;
    c.data.reserve(size_t(c.element_count()));
    for (const auto& s : stack.slices) c.data.insert(c.data.end(), s.v.begin(), s.v.end());
    return c;
}

PsfStack stack_from_container(const ArrayContainer& c) {
    c.validate();
    if (c.semantic != Semantic::PsfStack) {
        throw ValidationError("expected a psf_stack container, got '" +
                              to_string(c.semantic) + "'");
    }
    PsfStack stack;
    stack.depth_planes_mm = c.depth_planes_mm;
    const int nz = int(c.shape[0]), ny = int(c.shape[1]), nx = int(c.shape[2]);
    for (int k = 0; k < nz; ++k) {
        Image<float> s(ny, nx);
        std::copy_n(c.data.begin() + size_t(k) * ny * nx, size_t(ny) * nx, s.v.begin());
        stack.slices.push_back(std::move(s));
    }
    return stack;
}

ArrayContainer container_from_image(const Image<float>& img, Semantic semantic,
                                    std::string units) {
    ArrayContainer c;
    c.semantic = semantic;
    c.shape = {img.ny, img.nx};
    c.units = std::move(units);
    c.data = img.v;
    return c;
}

Image<float> image_from_container(const ArrayContainer& c) {
    c.validate();
    if (c.shape.size() != 2) throw ValidationError("expected a 2-d container");
    Image<float> img(int(c.shape[0]), int(c.shape[1]));
    img.v = c.data;
    return img;
}

ArrayContainer container_from_volume(const Tensor3<float>& vol) {
    ArrayContainer c;
    c.semantic = Semantic::Volume;
    c.shape = {vol.nz, vol.ny, vol.nx};
    c.units = "relative-intensity";
    c.data = vol.v;
    return c;
}

Tensor3<float> volume_from_container(const ArrayContainer& c) {
    c.validate();
    if (c.shape.size() != 3) throw ValidationError("expected a 3-d container");
    Tensor3<float> vol(int(c.shape[0]), int(c.shape[1]), int(c.shape[2]));
    vol.v = c.data;
    return vol;
}

}  // namespace lensless
