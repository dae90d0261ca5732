#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppl/tensor.hpp"

namespace ppl {

// 8-bit RGB image, row-major HWC.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;

  ImageU8() = default;
  ImageU8(int h, int w) : height(h), width(w), rgb(static_cast<size_t>(h) * w * 3, 0) {}
  uint8_t* px(int row, int col) { return rgb.data() + (static_cast<size_t>(row) * width + col) * 3; }
  const uint8_t* px(int row, int col) const {
    return rgb.data() + (static_cast<size_t>(row) * width + col) * 3;
  }
};

// Frames are (3, H, W) tensors in [-1, 1]; u8 <-> float conversion is exact
// on the u8 lattice, so PNG round-trips are lossless.
Tensor image_to_frame(const ImageU8& img);
ImageU8 frame_to_image(const Tensor& frame);
// Batch variant: copies frame b of a (B,3,H,W) tensor.
ImageU8 frame_to_image(const Tensor& frames, int batch_index);

void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

// Grayscale helper for heatmap exports; values clamped to [0, 1].
void write_png_gray(const std::string& path, const std::vector<double>& values,
                    int height, int width);

}  // namespace ppl
