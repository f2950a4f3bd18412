#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "adgan/data/dataset.hpp"

namespace adgan {

/// Procedural stand-in for a face dataset. Each image has an "identity"
/// (a colored disc in the lower-right area, drawn from the example id) and
/// up to eight binary attributes, each owning a fixed region so a linear
/// probe on the pixels can read it off:
///   0 bright background (dark otherwise)
///   1 filled square, upper-left quadrant
///   2 horizontal bar across the middle
///   3 square, upper-right quadrant
///   4 square, lower-left quadrant
///   5 short vertical bar, top center
///   6 line along the top edge
///   7 line along the bottom edge
namespace synthetic {

inline constexpr std::size_t kMaxAttrs = 8;
inline constexpr float kDarkBackground = -0.6f;
inline constexpr float kBrightBackground = -0.2f;

inline const std::array<const char*, kMaxAttrs> kNames{
    "bright_background", "square", "bar", "square_right", "square_low", "stick", "top_line",
    "bottom_line"};
inline const std::array<const char*, kMaxAttrs> kColumns{
    "Bright_Background", "Square", "Bar", "Square_Right", "Square_Low", "Stick", "Top_Line",
    "Bottom_Line"};

inline const std::array<std::array<float, 3>, kMaxAttrs> kColors{{
    {0.0f, 0.0f, 0.0f},  // unused: attribute 0 is the background level
    {0.9f, 0.3f, 0.3f},
    {0.3f, 0.4f, 0.9f},
    {0.3f, 0.9f, 0.4f},
    {0.9f, 0.9f, 0.3f},
    {0.9f, 0.5f, 0.9f},
    {0.8f, 0.8f, 0.8f},
    {0.3f, 0.9f, 0.9f},
}};

inline SchemaPtr schema(std::size_t n_attrs) {
  if (n_attrs == 0 || n_attrs > kMaxAttrs) {
    throw ContractError("synthetic data supports 1.." + std::to_string(kMaxAttrs) + " attributes");
  }
  AttributeSchema s;
  for (std::size_t i = 0; i < n_attrs; ++i) {
    s.names.emplace_back(kNames[i]);
    s.columns.emplace_back(kColumns[i]);
  }
  return std::make_shared<const AttributeSchema>(std::move(s));
}

struct Rect {
  std::size_t r0, r1, c0, c1;  // half-open
};

/// Region of attribute i (1..7) on a size x size canvas.
inline Rect region(std::size_t i, std::size_t s) {
  const std::size_t m = s * 3 / 32, q = s / 4, t = std::max<std::size_t>(1, s / 32);
  switch (i) {
    case 1: return {m, m + q, m, m + q};
    case 2: return {s / 2 - s / 16, s / 2 + s / 16, 0, s};
    case 3: return {m, m + q, s - m - q, s - m};
    case 4: return {s * 5 / 8, s * 5 / 8 + q, m, m + q};
    case 5: return {s / 16, s / 2 - s / 8, s / 2 - t, s / 2 + t};
    case 6: return {0, t, 0, s};
    case 7: return {s - t, s, 0, s};
    default: throw ContractError("synthetic region index out of range");
  }
}

/// Renders the image for (seed, id, attrs). Pure function of its arguments.
inline Tensor<float> render(std::uint64_t seed, std::uint64_t id, const AttributeVector& attrs,
                            std::size_t size) {
  if (size < 16) throw ContractError("synthetic images need size >= 16");
  if (attrs.size() > kMaxAttrs) throw ContractError("too many synthetic attributes");
  const std::size_t plane = size * size;
  std::vector<float> img(3 * plane, attrs[0] != 0.0 ? kBrightBackground : kDarkBackground);
  auto set = [&](std::size_t r, std::size_t c, const std::array<float, 3>& rgb) {
    for (std::size_t ch = 0; ch < 3; ++ch) img[ch * plane + r * size + c] = rgb[ch];
  };

  // identity disc; kept clear of every attribute region
  Rng rng(mix_seed(seed ^ 0x1D3A7C5Bull, id));
  const double s = static_cast<double>(size);
  const double cx = s * (0.62 + 0.22 * rng.uniform());
  const double cy = s * (0.72 + 0.10 * rng.uniform());
  const double radius = s * (1.0 / 16.0 + rng.uniform() / 16.0);
  std::array<float, 3> color{};
  for (auto& v : color) v = static_cast<float>(-0.1 + 1.0 * rng.uniform());
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double dy = r + 0.5 - cy, dx = c + 0.5 - cx;
      if (dx * dx + dy * dy <= radius * radius) set(r, c, color);
    }
  }

  for (std::size_t i = 1; i < attrs.size(); ++i) {
    if (attrs[i] == 0.0) continue;
    const Rect box = region(i, size);
    for (std::size_t r = box.r0; r < box.r1; ++r) {
      for (std::size_t c = box.c0; c < box.c1; ++c) set(r, c, kColors[i]);
    }
  }
  return Tensor<float>({3, size, size}, std::move(img));
}

/// Uniform random binary attributes for example `id`.
inline AttributeVector sample_attributes(std::uint64_t seed, std::uint64_t id, const SchemaPtr& schema) {
  Rng rng(mix_seed(seed, id));
  std::vector<double> values(schema->size());
  for (auto& v : values) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return AttributeVector(schema, std::move(values));
}

}  // namespace synthetic

/// `count` synthetic examples with ids first_id, first_id+1, ...
inline std::vector<Example> gen_synthetic(std::size_t count, std::size_t n_attrs, std::size_t size,
                                          std::uint64_t seed, std::uint64_t first_id = 0) {
  const auto schema = synthetic::schema(n_attrs);
  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t id = first_id + k;
    auto attrs = synthetic::sample_attributes(seed, id, schema);
    auto image = synthetic::render(seed, id, attrs, size);
    out.push_back({std::move(image), std::move(attrs), "synthetic_" + std::to_string(id)});
  }
  return out;
}

}  // namespace adgan
