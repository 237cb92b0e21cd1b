#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lensless/geometry.hpp"
#include "lensless/psf_stack.hpp"
#include "lensless/tensor.hpp"

namespace lensless {

/// On-disk array format: a small JSON manifest next to a raw little-endian
/// float32 payload. Trivially parseable from any language, bit-exact.
enum class Semantic { PsfStack, SensorImage, Volume, Heightmap };

std::string to_string(Semantic s);
Semantic semantic_from_string(const std::string& s);

struct ArrayContainer {
    Semantic semantic = Semantic::SensorImage;
    std::vector<long long> shape;          // row-major, outermost first
    std::string units;                     // physical units of the samples
    std::vector<float> data;               // row-major payload
    std::vector<double> depth_planes_mm;   // present for psf_stack (and volumes)
    std::optional<SystemGeometry> geometry;
    nlohmann::json params;                 // free-form echoed parameters

    long long element_count() const;
    void validate() const;  // shape/semantic/payload consistency
};

/// Writes `<path>` (manifest JSON) and the sibling payload `<stem>.f32`.
/// The manifest stores the payload's file name, so the pair can be moved
/// together between directories.
void write_container(const ArrayContainer& c, const std::filesystem::path& manifest_path);

ArrayContainer read_container(const std::filesystem::path& manifest_path);

nlohmann::json geometry_to_json(const SystemGeometry& g);
SystemGeometry geometry_from_json(const nlohmann::json& j);

// Bridges between containers and the in-memory types.
ArrayContainer container_from_stack(const PsfStack& stack);
PsfStack stack_from_container(const ArrayContainer& c);
ArrayContainer container_from_image(const Image<float>& img, Semantic semantic,
                                    std::string units);
Image<float> image_from_container(const ArrayContainer& c);
ArrayContainer container_from_volume(const Tensor3<float>& vol);
Tensor3<float> volume_from_container(const ArrayContainer& c);

}  // namespace lensless
