#include "ccdc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace ccdc {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

TensorF read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    const bool gray = color_type == PNG_COLOR_TYPE_GRAY;

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = gray ? 1 : 3;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> rowdata(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = rowdata.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    TensorF out({channels, static_cast<int>(h), static_cast<int>(w)});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (png_uint_32 y = 0; y < h; ++y) {
        const png_byte* row = rows[y];
        for (png_uint_32 x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                out.data[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y) * w + x] =
                    static_cast<float>(row[x * channels + c]) / 255.0f;
            }
        }
    }
    return out;
}

void write_png(const std::string& path, const TensorF& img) {
    if (img.rank() != 3 || (img.channels() != 1 && img.channels() != 3)) {
        throw ShapeError("write_png: expected 1xHxW or 3xHxW, got " + img.shape_str());
    }
    const int c = img.channels(), h = img.height(), w = img.width();

    const std::string tmp = path + ".tmp";
    {
        FilePtr fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw IoError("cannot open " + tmp + " for writing");

        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw IoError("png_create_write_struct failed");
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw IoError("png_create_info_struct failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw IoError("failed to encode " + path);
        }

        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                     c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);

        const std::size_t plane = static_cast<std::size_t>(h) * w;
        std::vector<png_byte> row(static_cast<std::size_t>(w) * c);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int ch = 0; ch < c; ++ch) {
                    float v = img.data[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * w + x];
                    v = std::min(std::max(v, 0.0f), 1.0f);
                    row[static_cast<std::size_t>(x) * c + ch] =
                        static_cast<png_byte>(std::lround(v * 255.0f));
                }
            }
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

}  // namespace ccdc
