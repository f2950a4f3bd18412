#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "adgan/core/tensor.hpp"
#include "adgan/errors.hpp"

namespace adgan {

/// Decodes a PNG/JPEG, center-crops it to a square, resizes bilinearly to
/// target_size and maps each 8-bit value p to 2p/255 - 1. Returns [3,H,W] RGB.
inline Tensor<float> load_image(const std::string& path, std::size_t target_size) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path);
  const int side = std::min(bgr.cols, bgr.rows);
  cv::Mat square = bgr(cv::Rect((bgr.cols - side) / 2, (bgr.rows - side) / 2, side, side));
  cv::Mat resized;
  const int target = static_cast<int>(target_size);
  if (side != target) {
    cv::resize(square, resized, cv::Size(target, target), 0, 0, cv::INTER_LINEAR);
  } else {
    resized = square.clone();
  }
  std::vector<float> data(3 * target_size * target_size);
  const std::size_t plane = target_size * target_size;
  for (int r = 0; r < target; ++r) {
    const auto* px = resized.ptr<cv::Vec3b>(r);
    for (int c = 0; c < target; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        // OpenCV stores BGR
        const float p = px[c][2 - ch];
        data[ch * plane + r * target_size + c] = 2.0f * p / 255.0f - 1.0f;
      }
    }
  }
  return Tensor<float>({3, target_size, target_size}, std::move(data));
}

/// Inverse pixel mapping: [-1,1] -> [0,255], clamped and rounded.
inline std::uint8_t to_byte(float v) {
  const float p = std::round((v + 1.0f) * 0.5f * 255.0f);
  return static_cast<std::uint8_t>(std::clamp(p, 0.0f, 255.0f));
}

/// Copies a [3,H,W] image (values in [-1,1]) into an 8-bit BGR matrix at (x, y).
inline void blit(cv::Mat& canvas, std::span<const float> chw, std::size_t h, std::size_t w, int x, int y) {
  const std::size_t plane = h * w;
  for (std::size_t r = 0; r < h; ++r) {
    auto* px = canvas.ptr<cv::Vec3b>(y + static_cast<int>(r));
    for (std::size_t c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) px[x + static_cast<int>(c)][2 - ch] = to_byte(chw[ch * plane + r * w + c]);
    }
  }
}

inline void write_png(const std::string& path, const cv::Mat& bgr) {
  bool ok = false;
  try {
    ok = cv::imwrite(path, bgr, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image " + path);
}

/// Saves a [3,H,W] image tensor as PNG.
inline void save_image(const std::string& path, const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("save_image: expected [3,H,W], got " + shape_str(image.shape()));
  }
  cv::Mat canvas(static_cast<int>(image.dim(1)), static_cast<int>(image.dim(2)), CV_8UC3);
  blit(canvas, image.data(), image.dim(1), image.dim(2), 0, 0);
  write_png(path, canvas);
}

}  // namespace adgan
