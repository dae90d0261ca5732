#include "ppl/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace ppl {

Tensor image_to_frame(const ImageU8& img) {
  Tensor t({3, img.height, img.width});
  const int64_t hw = static_cast<int64_t>(img.height) * img.width;
  for (int64_t p = 0; p < hw; ++p) {
    for (int c = 0; c < 3; ++c)
      t.v[c * hw + p] = static_cast<Real>(img.rgb[p * 3 + c]) / Real(255) * Real(2) - Real(1);
  }
  return t;
}

static uint8_t to_u8(Real v) {
  const double x = (static_cast<double>(v) + 1.0) * 0.5 * 255.0;
  return static_cast<uint8_t>(std::clamp(std::lround(x), 0L, 255L));
}

ImageU8 frame_to_image(const Tensor& frame) {
  if (frame.ndim() != 3 || frame.dim(0) != 3)
    throw std::invalid_argument("frame_to_image: expects (3,H,W)");
  ImageU8 img(frame.dim(1), frame.dim(2));
  const int64_t hw = static_cast<int64_t>(img.height) * img.width;
  for (int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) img.rgb[p * 3 + c] = to_u8(frame.v[c * hw + p]);
  return img;
}

ImageU8 frame_to_image(const Tensor& frames, int batch_index) {
  if (frames.ndim() != 4 || frames.dim(1) != 3)
    throw std::invalid_argument("frame_to_image: expects (B,3,H,W)");
  ImageU8 img(frames.dim(2), frames.dim(3));
  const int64_t hw = static_cast<int64_t>(img.height) * img.width;
  const Real* base = frames.data() + static_cast<int64_t>(batch_index) * 3 * hw;
  for (int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) img.rgb[p * 3 + c] = to_u8(base[c * hw + p]);
  return img;
}

void write_png(const std::string& path, const ImageU8& img) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const uint8_t* p = img.px(r, c);
      mat.at<cv::Vec3b>(r, c) = cv::Vec3b(p[2], p[1], p[0]);  // BGR on disk side
    }
  if (!cv::imwrite(path, mat))
    throw std::runtime_error("write_png: failed to write " + path);
}

ImageU8 read_png(const std::string& path) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
  if (mat.empty()) throw std::runtime_error("read_png: failed to read " + path);
  ImageU8 img(mat.rows, mat.cols);
  for (int r = 0; r < mat.rows; ++r)
    for (int c = 0; c < mat.cols; ++c) {
      const cv::Vec3b v = mat.at<cv::Vec3b>(r, c);
      uint8_t* p = img.px(r, c);
      p[0] = v[2];
      p[1] = v[1];
      p[2] = v[0];
    }
  return img;
}

void write_png_gray(const std::string& path, const std::vector<double>& values,
                    int height, int width) {
  if (values.size() != static_cast<size_t>(height) * width)
    throw std::invalid_argument("write_png_gray: size mismatch");
  cv::Mat mat(height, width, CV_8UC1);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double v = std::clamp(values[static_cast<size_t>(r) * width + c], 0.0, 1.0);
      mat.at<uint8_t>(r, c) = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  if (!cv::imwrite(path, mat))
    throw std::runtime_error("write_png_gray: failed to write " + path);
}

}  // namespace ppl
