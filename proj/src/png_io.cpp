#include "lensless/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "lensless/errors.hpp"

namespace lensless {

void write_png_gray8(const std::filesystem::path& path, const Image<float>& img) {
    if (img.ny < 1 || img.nx < 1) throw ValidationError("cannot write an empty image");

    float lo = img.v[0], hi = img.v[0];
    for (float val : img.v) {
        if (!std::isfinite(val)) throw ValidationError("image has non-finite values");
        lo = std::min(lo, val);
        hi = std::max(hi, val);
    }
    const float span = hi - lo;

    std::vector<png_byte> pixels(size_t(img.ny) * img.nx);
    for (size_t i = 0; i < pixels.size(); ++i) {
        const float t = span > 0.0f ? (img.v[i] - lo) / span : 0.0f;
        pixels[i] = png_byte(std::lround(t * 255.0f));
    }

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("libpng failed writing '" + path.string() + "'");
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(img.nx), png_uint_32(img.ny), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.ny; ++y) {
        png_write_row(png, pixels.data() + size_t(y) * img.nx);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace lensless
