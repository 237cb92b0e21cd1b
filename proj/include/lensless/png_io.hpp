#pragma once

#include <filesystem>

#include "lensless/tensor.hpp"

namespace lensless {

/// Writes `img` as an 8-bit grayscale PNG, min-max stretched to [0, 255].
/// A constant image maps to all black. Throws IoError on write failure.
void write_png_gray8(const std::filesystem::path& path, const Image<float>& img);

}  // namespace lensless
