#pragma once

// PNG and TIFF reading/writing for 8-bit RGB and gray rasters.
// Requires linking libpng and libtiff.

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/image.hpp"

namespace mitotype::io {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return f;
}

inline std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

inline bool is_tiff(const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    return ext == ".tif" || ext == ".tiff";
}

[[noreturn]] inline void png_fail(png_structp, png_const_charp msg) { throw Error(ErrorCode::io_error, msg); }
inline void png_warn(png_structp, png_const_charp) {}

// channels: 1 (gray) or 3 (RGB)
inline void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height, int channels,
                      const std::uint8_t* data) {
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw Error(ErrorCode::io_error, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};
    if (!info) throw Error(ErrorCode::io_error, "png_create_info_struct failed");

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = width * static_cast<std::size_t>(channels);
    for (std::size_t y = 0; y < height; ++y) png_write_row(png, const_cast<png_bytep>(data + y * stride));
    png_write_end(png, nullptr);
}

// Reads any PNG and converts it to 8-bit RGB or gray.
inline std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int channels, std::size_t& width,
                                          std::size_t& height) {
    auto file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw Error(ErrorCode::io_error, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};
    if (!info) throw Error(ErrorCode::io_error, "png_create_info_struct failed");

    png_init_io(png, file.get());
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    const bool source_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
    if (channels == 3 && source_gray) png_set_gray_to_rgb(png);
    if (channels == 1 && !source_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    const std::size_t stride = png_get_rowbytes(png, info);
    if (stride != width * static_cast<std::size_t>(channels))
        throw Error(ErrorCode::io_error, "unsupported PNG layout in " + path.string());
    std::vector<std::uint8_t> data(stride * height);
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) rows[y] = data.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    return data;
}

struct TiffCloser {
    void operator()(TIFF* t) const noexcept {
        if (t) TIFFClose(t);
    }
};

inline void write_tiff(const std::filesystem::path& path, std::size_t width, std::size_t height, int channels,
                       const std::uint8_t* data) {
    std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.string().c_str(), "w"));
    if (!tif) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(width));
    TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(height));
    TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, channels);
    TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 8);
    TIFFSetField(tif.get(), TIFFTAG_ORIENTATION, ORIENTATION_TOPLEFT);
    TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, channels == 3 ? PHOTOMETRIC_RGB : PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
    TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(height));
    const std::size_t stride = width * static_cast<std::size_t>(channels);
    for (std::size_t y = 0; y < height; ++y) {
        if (TIFFWriteScanline(tif.get(), const_cast<std::uint8_t*>(data + y * stride), static_cast<std::uint32_t>(y), 0) < 0)
            throw Error(ErrorCode::io_error, "TIFF write failed for " + path.string());
    }
}

inline std::vector<std::uint8_t> read_tiff(const std::filesystem::path& path, int channels, std::size_t& width,
                                           std::size_t& height) {
    std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.string().c_str(), "r"));
    if (!tif) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    std::uint32_t w = 0, h = 0;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    width = w;
    height = h;
    std::vector<std::uint32_t> raster(static_cast<std::size_t>(w) * h);
    if (!TIFFReadRGBAImageOriented(tif.get(), w, h, raster.data(), ORIENTATION_TOPLEFT, 0))
        throw Error(ErrorCode::io_error, "cannot decode " + path.string());
    std::vector<std::uint8_t> data(raster.size() * static_cast<std::size_t>(channels));
    for (std::size_t i = 0; i < raster.size(); ++i) {
        const std::uint32_t p = raster[i];
        const std::uint8_t r = TIFFGetR(p), g = TIFFGetG(p), b = TIFFGetB(p);
        if (channels == 3) {
            data[3 * i] = r;
            data[3 * i + 1] = g;
            data[3 * i + 2] = b;
        } else {
            data[i] = static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
        }
    }
    return data;
}

} // namespace detail

inline RasterImage read_rgb(const std::filesystem::path& path) {
    std::size_t w = 0, h = 0;
    auto data = detail::is_tiff(path) ? detail::read_tiff(path, 3, w, h) : detail::read_png(path, 3, w, h);
    return RasterImage(w, h, std::move(data));
}

inline GrayImage read_gray(const std::filesystem::path& path) {
    std::size_t w = 0, h = 0;
    auto data = detail::is_tiff(path) ? detail::read_tiff(path, 1, w, h) : detail::read_png(path, 1, w, h);
    return GrayImage(w, h, std::move(data));
}

/// Format is chosen from the extension (.tif/.tiff, otherwise PNG).
inline void write(const std::filesystem::path& path, const RasterImage& img) {
    if (detail::is_tiff(path))
        detail::write_tiff(path, img.width(), img.height(), 3, img.samples().data());
    else
        detail::write_png(path, img.width(), img.height(), 3, img.samples().data());
}

inline void write(const std::filesystem::path& path, const GrayImage& img) {
    if (detail::is_tiff(path))
        detail::write_tiff(path, img.width(), img.height(), 1, img.values().data());
    else
        detail::write_png(path, img.width(), img.height(), 1, img.values().data());
}

} // namespace mitotype::io
