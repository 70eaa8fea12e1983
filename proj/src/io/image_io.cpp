#include "io/image_io.h"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "core/error.h"

namespace pa {

namespace {

uint8_t to_u8(float v) {
    float x = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return (uint8_t)std::lround(x * 255.0f);
}

struct FileCloser {
    FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

constexpr char kVideoMagic[8] = {'R', 'G', 'B', 'V', '1', '\n', '\0', '\0'};

}  // namespace

void write_png(const std::string& path, const Tensor& frame) {
    PA_CHECK(frame.ndim() == 3 && frame.dim(0) == 3,
             "write_png expects (3,H,W), got " + frame.shape_str());
    const int64_t H = frame.dim(1), W = frame.dim(2);
    FILE* f = std::fopen(path.c_str(), "wb");
    PA_CHECK(f != nullptr, "cannot open for writing: " + path);
    FileCloser closer{f};

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    PA_CHECK(png != nullptr, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng write error: " + path);
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, (png_uint_32)W, (png_uint_32)H, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row((size_t)(W * 3));
    const float* d = frame.data();
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < 3; ++c)
                row[(size_t)(x * 3 + c)] = to_u8(d[(c * H + y) * W + x]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    PA_CHECK(f != nullptr, "cannot open: " + path);
    FileCloser closer{f};

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    PA_CHECK(png != nullptr, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng read error: " + path);
    }
    png_init_io(png, f);
    png_read_info(png, info);

    png_uint_32 W = png_get_image_width(png, info);
    png_uint_32 H = png_get_image_height(png, info);
    // Normalize any 8/16-bit gray/palette/alpha source to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    PA_CHECK(png_get_channels(png, info) == 3, "png did not normalize to RGB: " + path);

    Tensor out({3, (int64_t)H, (int64_t)W});
    std::vector<uint8_t> row((size_t)W * 3);
    float* d = out.data();
    for (png_uint_32 y = 0; y < H; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < W; ++x)
            for (int64_t c = 0; c < 3; ++c)
                d[(c * H + y) * W + x] = (float)row[(size_t)(x * 3 + c)] / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_video_raw(const std::string& path, const Tensor& frames) {
    PA_CHECK(frames.ndim() == 4 && frames.dim(1) == 3,
             "write_video_raw expects (F,3,H,W), got " + frames.shape_str());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    PA_CHECK(f.is_open(), "cannot open for writing: " + path);
    f.write(kVideoMagic, sizeof(kVideoMagic));
    uint32_t dims[3] = {(uint32_t)frames.dim(0), (uint32_t)frames.dim(2), (uint32_t)frames.dim(3)};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    std::vector<uint8_t> buf((size_t)frames.numel());
    const float* d = frames.data();
    for (int64_t i = 0; i < frames.numel(); ++i) buf[(size_t)i] = to_u8(d[i]);
    f.write(reinterpret_cast<const char*>(buf.data()), (std::streamsize)buf.size());
    PA_CHECK(f.good(), "write failed: " + path);
}

Tensor read_video_raw(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    PA_CHECK(f.is_open(), "cannot open: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    PA_CHECK(f.good() && std::memcmp(magic, kVideoMagic, sizeof(kVideoMagic)) == 0,
             "not a raw video container: " + path);
    uint32_t dims[3];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    PA_CHECK(f.good(), "truncated header: " + path);
    Tensor out({(int64_t)dims[0], 3, (int64_t)dims[1], (int64_t)dims[2]});
    std::vector<uint8_t> buf((size_t)out.numel());
    f.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)buf.size());
    PA_CHECK(f.good(), "truncated frame data: " + path);
    float* d = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) d[i] = (float)buf[(size_t)i] / 255.0f;
    return out;
}

Tensor quantize_frames(const Tensor& frames) {
    Tensor out = frames.clone();
    float* d = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) d[i] = (float)to_u8(d[i]) / 255.0f;
    return out;
}

}  // namespace pa
