#pragma once

#include <filesystem>
#include <string>

#include "sortcell/frame.hpp"

namespace sortcell {

// Fixture format for frames: 8-bit RGB PNG plus 16-bit binary PGM with depth
// rounded to whole millimeters.
void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   const std::vector<uint8_t>& rgb);
std::string encode_png_rgb(int width, int height, const std::vector<uint8_t>& rgb);

void write_pgm16_depth(const std::filesystem::path& path, int width, int height,
                       const std::vector<float>& depth_mm);

void export_frame(const RgbdFrame& frame, const std::filesystem::path& png_path,
                  const std::filesystem::path& pgm_path);

// Reads the pair back (test fixtures, baseline persistence).
RgbdFrame import_frame(CameraId id, const std::filesystem::path& png_path,
                       const std::filesystem::path& pgm_path);

}  // namespace sortcell
