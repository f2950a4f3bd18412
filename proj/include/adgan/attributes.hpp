#pragma once

#include <algorithm>
#include <charconv>
#include <numeric>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "adgan/core/ops.hpp"
#include "adgan/core/rng.hpp"

namespace adgan {

/// Ordered attribute names plus the dataset column each one reads from.
struct AttributeSchema {
  std::vector<std::string> names;
  std::vector<std::string> columns;

  std::size_t size() const { return names.size(); }

  /// Looks an attribute up by name or by dataset column. Throws
  /// ContractError listing the schema when absent.
  std::size_t index_of(std::string_view key) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == key || columns[i] == key) return i;
    }
    throw ContractError("unknown attribute '" + std::string(key) + "'; schema is: " + listing());
  }

  std::string listing() const {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
      out += (i ? ", " : "") + names[i] + " (" + columns[i] + ")";
    }
    return out;
  }

  /// One "name<TAB>column" line per attribute, in order.
  std::string serialize() const {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += names[i] + '\t' + columns[i] + '\n';
    return out;
  }

  static AttributeSchema parse(std::string_view text) {
    AttributeSchema schema;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ContractError("schema line without column: " + line);
      schema.names.push_back(line.substr(0, tab));
      schema.columns.push_back(line.substr(tab + 1));
    }
    schema.validate();
    return schema;
  }

  void validate() const {
    if (names.size() != columns.size() || names.empty()) {
      throw ContractError("attribute schema needs one column per name");
    }
    auto sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ContractError("attribute schema has duplicate names");
    }
  }

  /// The thirteen editable face attributes and their CelebA columns.
  static AttributeSchema celeba_default() {
    return {{"bald", "bangs", "black_hair", "blond_hair", "brown_hair", "bushy_eyebrows",
             "eyeglasses", "gender", "mouth_open", "mustache", "no_beard", "pale_skin", "young"},
            {"Bald", "Bangs", "Black_Hair", "Blond_Hair", "Brown_Hair", "Bushy_Eyebrows",
             "Eyeglasses", "Male", "Mouth_Slightly_Open", "Mustache", "No_Beard", "Pale_Skin",
             "Young"}};
  }

  bool operator==(const AttributeSchema&) const = default;
};

using SchemaPtr = std::shared_ptr<const AttributeSchema>;

/// Attribute values under a schema: binary for a and b, [0,1] for c.
class AttributeVector {
 public:
  AttributeVector() = default;
  AttributeVector(SchemaPtr schema, std::vector<double> values)
      : schema_(std::move(schema)), values_(std::move(values)) {
    if (!schema_ || schema_->size() != values_.size()) {
      throw ContractError("attribute vector length " + std::to_string(values_.size()) +
                          " does not match schema");
    }
  }

  const SchemaPtr& schema() const { return schema_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_.at(i); }

  bool is_binary() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0 || v == 1.0; });
  }
  bool in_unit_range() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
  }

  bool same_schema(const AttributeVector& other) const {
    return schema_ == other.schema_ || (schema_ && other.schema_ && *schema_ == *other.schema_);
  }

  /// Space-separated shortest round-trip decimal values.
  std::string format() const {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < values_.size(); ++i) {
      auto res = std::to_chars(buf, buf + sizeof buf, values_[i]);
      out += (i ? " " : "") + std::string(buf, res.ptr);
    }
    return out;
  }

  static AttributeVector parse(SchemaPtr schema, std::string_view text) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && text[pos] == ' ') ++pos;
      if (pos >= text.size()) break;
      double v = 0.0;
      auto res = std::from_chars(text.data() + pos, text.data() + text.size(), v);
      if (res.ec != std::errc()) throw ContractError("bad attribute value in '" + std::string(text) + "'");
      values.push_back(v);
      pos = static_cast<std::size_t>(res.ptr - text.data());
    }
    return AttributeVector(std::move(schema), std::move(values));
  }

  bool operator==(const AttributeVector& other) const {
    return same_schema(other) && values_ == other.values_;
  }

 private:
  SchemaPtr schema_;
  std::vector<double> values_;
};

using AttributeBatch = std::vector<AttributeVector>;

/// How target attributes b are drawn from the batch's own attributes a.
enum class TargetSampling {
  batch_permutation,  // b = a under a random permutation of batch indices
  random_flip,        // each entry flipped independently with probability 1/2
};

namespace detail {
inline void require_one_schema(std::span<const AttributeVector> batch, const char* op) {
  if (batch.empty()) throw ContractError(std::string(op) + ": empty attribute batch");
  for (const auto& v : batch) {
    if (!v.same_schema(batch.front())) throw ContractError(std::string(op) + ": mixed schemas");
  }
}
}  // namespace detail

/// Target attributes b = f(a) for a batch.
inline AttributeBatch shuffle_attrs(std::span<const AttributeVector> batch, Rng& rng,
                                    TargetSampling mode = TargetSampling::batch_permutation) {
  detail::require_one_schema(batch, "shuffle_attrs");
  if (mode == TargetSampling::random_flip) {
    AttributeBatch out;
    for (const auto& a : batch) {
      std::vector<double> v(a.values().begin(), a.values().end());
      for (auto& x : v) {
        if (rng.bernoulli(0.5)) x = 1.0 - x;
      }
      out.emplace_back(a.schema(), std::move(v));
    }
    return out;
  }
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  AttributeBatch out;
  out.reserve(batch.size());
  for (auto i : order) out.push_back(batch[i]);
  return out;
}

/// c = (a + b) / 2.
inline AttributeVector mean_attrs(const AttributeVector& a, const AttributeVector& b) {
  if (a.size() != b.size() || !a.same_schema(b)) {
    throw ContractError("mean_attrs: vectors of different schema or length");
  }
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = (a[i] + b[i]) / 2.0;
  return AttributeVector(a.schema(), std::move(c));
}

inline AttributeBatch mean_attrs(std::span<const AttributeVector> a, std::span<const AttributeVector> b) {
  if (a.size() != b.size()) throw ContractError("mean_attrs: batch sizes differ");
  AttributeBatch out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(mean_attrs(a[i], b[i]));
  return out;
}

/// Copy of a with entry `index` inverted.
inline AttributeVector flip_single(const AttributeVector& a, std::size_t index) {
  if (!a.is_binary()) throw ContractError("flip_single: attribute vector is not binary");
  if (index >= a.size()) {
    throw ContractError("flip_single: index " + std::to_string(index) + " out of range");
  }
  std::vector<double> v(a.values().begin(), a.values().end());
  v[index] = 1.0 - v[index];
  return AttributeVector(a.schema(), std::move(v));
}

/// Constant [N,n] tensor of attribute values.
template <class T>
Tensor<T> attribute_matrix(std::span<const AttributeVector> batch) {
  detail::require_one_schema(batch, "attribute_matrix");
  const std::size_t n = batch.front().size();
  std::vector<T> data;
  data.reserve(batch.size() * n);
  for (const auto& v : batch) {
    for (double x : v.values()) data.push_back(static_cast<T>(x));
  }
  return Tensor<T>({batch.size(), n}, std::move(data));
}

/// Broadcasts each attribute to an h x w plane and appends the planes after
/// the latent channels: [N,C,h,w] -> [N,C+n,h,w]. The planes are constants.
template <class T>
Tensor<T> tile_and_concat(const Tensor<T>& z, std::span<const AttributeVector> attrs) {
  if (z.rank() != 4) throw ShapeError("tile_and_concat: latent must be [N,C,h,w]");
  if (attrs.size() != z.dim(0)) {
    throw ContractError("tile_and_concat: " + std::to_string(attrs.size()) +
                        " attribute vectors for batch of " + std::to_string(z.dim(0)));
  }
  detail::require_one_schema(attrs, "tile_and_concat");
  const std::size_t n = attrs.front().size(), plane = z.dim(2) * z.dim(3);
  std::vector<T> planes(attrs.size() * n * plane);
  for (std::size_t s = 0; s < attrs.size(); ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      std::fill_n(planes.begin() + (s * n + i) * plane, plane, static_cast<T>(attrs[s][i]));
    }
  }
  return concat_channels(z, Tensor<T>({z.dim(0), n, z.dim(2), z.dim(3)}, std::move(planes)));
}

}  // namespace adgan
