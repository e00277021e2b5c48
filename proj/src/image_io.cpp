#include "sortcell/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <png.h>

namespace sortcell {

namespace {

void png_write_to_string(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void png_flush_noop(png_structp) {}

}  // namespace

std::string encode_png_rgb(int width, int height, const std::vector<uint8_t>& rgb) {
  if (rgb.size() != static_cast<size_t>(width) * height * 3)
    throw std::invalid_argument("rgb buffer size mismatch");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png encode failed");
  }
  png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (int v = 0; v < height; ++v)
    rows[v] = const_cast<png_bytep>(rgb.data() + static_cast<size_t>(v) * width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   const std::vector<uint8_t>& rgb) {
  const std::string bytes = encode_png_rgb(width, height, rgb);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_pgm16_depth(const std::filesystem::path& path, int width, int height,
                       const std::vector<float>& depth_mm) {
  if (depth_mm.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("depth buffer size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  f << "P5\n" << width << " " << height << "\n65535\n";
  for (const float d : depth_mm) {
    const int v = std::clamp(static_cast<int>(std::lround(d)), 0, 65535);
    const uint8_t hi = static_cast<uint8_t>(v >> 8), lo = static_cast<uint8_t>(v & 0xff);
    f.put(static_cast<char>(hi));
    f.put(static_cast<char>(lo));
  }
}

void export_frame(const RgbdFrame& frame, const std::filesystem::path& png_path,
                  const std::filesystem::path& pgm_path) {
  write_png_rgb(png_path, frame.width, frame.height, frame.rgb);
  write_pgm16_depth(pgm_path, frame.width, frame.height, frame.depth_mm);
}

namespace {

struct PngReadCtx {
  const std::string* bytes;
  size_t offset = 0;
};

void png_read_from_string(png_structp png, png_bytep data, png_size_t length) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (ctx->offset + length > ctx->bytes->size())
    png_error(png, "short read");
  std::memcpy(data, ctx->bytes->data() + ctx->offset, length);
  ctx->offset += length;
}

}  // namespace

RgbdFrame import_frame(CameraId id, const std::filesystem::path& png_path,
                       const std::filesystem::path& pgm_path) {
  std::ifstream pf(png_path, std::ios::binary);
  if (!pf) throw std::runtime_error("cannot open: " + png_path.string());
  std::string png_bytes((std::istreambuf_iterator<char>(pf)),
                        std::istreambuf_iterator<char>());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png decode failed");
  }
  PngReadCtx ctx{&png_bytes};
  png_set_read_fn(png, &ctx, png_read_from_string);
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB ||
      png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("expected 8-bit RGB png");
  }

  RgbdFrame frame;
  frame.camera_id = id;
  frame.width = width;
  frame.height = height;
  frame.rgb.resize(static_cast<size_t>(width) * height * 3);
  std::vector<png_bytep> rows(height);
  for (int v = 0; v < height; ++v)
    rows[v] = frame.rgb.data() + static_cast<size_t>(v) * width * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  std::ifstream gf(pgm_path, std::ios::binary);
  if (!gf) throw std::runtime_error("cannot open: " + pgm_path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  gf >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 65535 || w != width || h != height)
    throw std::runtime_error("pgm header mismatch");
  gf.get();  // single whitespace after maxval
  frame.depth_mm.resize(static_cast<size_t>(w) * h);
  for (float& d : frame.depth_mm) {
    const int hi = gf.get(), lo = gf.get();
    if (hi < 0 || lo < 0) throw std::runtime_error("pgm truncated");
    d = static_cast<float>((hi << 8) | lo);
  }
  return frame;
}

}  // namespace sortcell
