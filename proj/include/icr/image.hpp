#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace icr {

/// Row-major gray image, intensities nominally in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f);

  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

  /// Edge-clamped read; any (row, col) is valid on a non-empty image.
  float clamped(int row, int col) const;
  bool empty() const { return pixels.empty(); }
};

/// Loads PNG/JPEG; color is converted as 0.299 R + 0.587 G + 0.114 B.
GrayImage read_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG (intensities clamped to [0, 1]).
void write_png(const GrayImage& img, const std::filesystem::path& path);

/// Bilinear resampling of the window starting at (top, left) with the given
/// scale: out(r, c) = in(top + r / scale, left + c / scale).
GrayImage resample(const GrayImage& img, double top, double left, double scale, int out_height, int out_width);

}  // namespace icr
