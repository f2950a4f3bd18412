#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adgan/attributes.hpp"
#include "adgan/core/rng.hpp"
#include "adgan/data/attr_file.hpp"
#include "adgan/data/image_io.hpp"

namespace adgan {

/// An image x^a in [-1,1] with its binary attributes a.
struct Example {
  Tensor<float> image;  // [3,H,W]
  AttributeVector attrs;
  std::string id;
};

/// Random-access collection of examples. Backed either by memory or by a
/// loader that decodes on demand (CelebA does not fit in memory).
class Dataset {
 public:
  using Loader = std::function<Example(std::size_t)>;

  Dataset() = default;
  Dataset(std::size_t size, Loader loader, SchemaPtr schema)
      : size_(size), loader_(std::move(loader)), schema_(std::move(schema)) {}

  static Dataset in_memory(std::vector<Example> examples, SchemaPtr schema) {
    auto shared = std::make_shared<const std::vector<Example>>(std::move(examples));
    const auto n = shared->size();
    return Dataset(n, [shared](std::size_t i) { return (*shared)[i]; }, std::move(schema));
  }

  /// Rows `indices` of an attribute table, images read from image_dir.
  static Dataset from_table(std::shared_ptr<const AttrTable> table, std::vector<std::size_t> indices,
                            std::string image_dir, SchemaPtr schema, std::size_t image_size) {
    std::vector<std::size_t> columns;
    for (const auto& c : schema->columns) columns.push_back(table->column_index(c));
    const auto n = indices.size();
    Loader loader = [table, indices = std::move(indices), image_dir = std::move(image_dir), schema, columns,
                     image_size](std::size_t i) {
      const AttrRow& row = table->rows[indices[i]];
      std::vector<double> values;
      for (auto c : columns) values.push_back(row.values[c]);
      return Example{load_image(image_dir + "/" + row.filename, image_size), AttributeVector(schema, std::move(values)),
                     row.filename};
    };
    return Dataset(n, std::move(loader), std::move(schema));
  }

  std::size_t size() const { return size_; }
  Example get(std::size_t i) const {
    if (i >= size_) throw ContractError("dataset index " + std::to_string(i) + " out of range");
    return loader_(i);
  }
  const SchemaPtr& schema() const { return schema_; }

 private:
  std::size_t size_ = 0;
  Loader loader_;
  SchemaPtr schema_;
};

/// Images stacked into [N,3,H,W] plus the N attribute vectors.
struct Batch {
  Tensor<float> images;
  AttributeBatch attrs;
  std::vector<std::string> ids;

  std::size_t size() const { return attrs.size(); }
};

inline Batch stack_examples(std::span<const Example> examples) {
  if (examples.empty()) throw ContractError("cannot stack an empty batch");
  const Shape& s = examples.front().image.shape();
  std::vector<float> data;
  data.reserve(examples.size() * shape_numel(s));
  Batch batch;
  for (const auto& e : examples) {
    if (e.image.shape() != s) throw ShapeError("batch images differ in shape");
    data.insert(data.end(), e.image.data().begin(), e.image.data().end());
    batch.attrs.push_back(e.attrs);
    batch.ids.push_back(e.id);
  }
  batch.images = Tensor<float>({examples.size(), s[0], s[1], s[2]}, std::move(data));
  return batch;
}

inline Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<Example> examples;
  examples.reserve(indices.size());
  for (auto i : indices) examples.push_back(dataset.get(i));
  return stack_examples(examples);
}

/// Epoch-wise seeded shuffling into fixed-size batches; the final short
/// batch is kept. Batch k of the run is a pure function of (seed, k), so a
/// resumed run sees the same stream as an uninterrupted one.
class Batcher {
 public:
  Batcher(Dataset dataset, std::size_t batch_size, std::uint64_t seed)
      : dataset_(std::move(dataset)), batch_size_(batch_size), seed_(seed) {
    if (batch_size == 0) throw ContractError("batch_size must be >= 1");
    if (dataset_.size() == 0) throw ContractError("cannot batch an empty dataset");
  }

  std::size_t batches_per_epoch() const { return (dataset_.size() + batch_size_ - 1) / batch_size_; }

  /// Example order of epoch e.
  std::vector<std::size_t> epoch_order(std::uint64_t epoch) const {
    std::vector<std::size_t> order(dataset_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed_, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    return order;
  }

  /// Indices of the step-th batch of the stream.
  std::vector<std::size_t> indices_at(std::uint64_t step) {
    const std::uint64_t epoch = step / batches_per_epoch();
    const std::size_t pos = step % batches_per_epoch();
    if (epoch != cached_epoch_) {
      order_ = epoch_order(epoch);
      cached_epoch_ = epoch;
    }
    const std::size_t begin = pos * batch_size_;
    const std::size_t end = std::min(begin + batch_size_, order_.size());
    return {order_.begin() + begin, order_.begin() + end};
  }

  Batch batch_at(std::uint64_t step) {
    const auto idx = indices_at(step);
    return make_batch(dataset_, idx);
  }

  /// Sequential stream interface.
  Batch next() { return batch_at(cursor_++); }
  void seek(std::uint64_t step) { cursor_ = step; }

 private:
  Dataset dataset_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t cursor_ = 0;
  std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> order_;
};

}  // namespace adgan
