#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "adgan/attributes.hpp"
#include "adgan/core/ops.hpp"
#include "adgan/data/dataset.hpp"
#include "adgan/data/image_io.hpp"
#include "adgan/losses.hpp"
#include "adgan/models.hpp"
#include "adgan/training/adam.hpp"
#include "adgan/training/checkpoint.hpp"
#include "adgan/training/config.hpp"

namespace adgan {

// ---------------------------------------------------------------------------
// Independent attribute classifier

/// Discriminator-shaped network with only an attribute head. It never sees
/// generated images during training, so it can judge edits.
template <class T>
struct AttrClassifier {
  ModelConfig config;
  SchemaPtr schema;
  ParamMap<T> params;

  Tensor<T> logits(const Tensor<T>& x) const {
    detail::check_image_batch(config, x, "classifier");
    const auto h = detail::disc_trunk(params, "classifier", config, x);
    return dense(h, detail::param(params, std::string("classifier.attr.weight")),
                 detail::param(params, std::string("classifier.attr.bias")));
  }

  /// sigmoid probabilities, row-major [N,n]
  std::vector<double> probabilities(const Tensor<T>& x) const {
    const auto l = logits(x);
    std::vector<double> out(l.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::stable_sigmoid<double>(l.data()[i]);
    return out;
  }
};

template <class T>
AttrClassifier<T> init_classifier(std::uint64_t seed, const ModelConfig& cfg, SchemaPtr schema) {
  cfg.validate();
  AttrClassifier<T> c{cfg, schema, {}};
  Rng rng(seed);
  detail::add_disc_trunk(c.params, "classifier", cfg, rng);
  detail::add_dense(c.params, "classifier.attr", schema->size(), cfg.disc_hidden, cfg.init_std, rng);
  return c;
}

struct ClassifierConfig {
  ModelConfig model;
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 11;
};

/// Per-attribute accuracy (threshold 0.5) over a dataset.
template <class T>
std::vector<double> classifier_accuracy(const AttrClassifier<T>& clf, const Dataset& data,
                                        std::size_t chunk = 100) {
  const std::size_t n = clf.schema->size();
  std::vector<std::size_t> correct(n, 0);
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(begin + chunk, data.size()); ++i) idx.push_back(i);
    const Batch b = make_batch(data, idx);
    const auto p = clf.probabilities(b.images.template cast<T>());
    for (std::size_t s = 0; s < b.size(); ++s) {
      for (std::size_t k = 0; k < n; ++k) {
        if ((p[s * n + k] > 0.5) == (b.attrs[s][k] == 1.0)) ++correct[k];
      }
    }
  }
  std::vector<double> acc(n);
  for (std::size_t k = 0; k < n; ++k) acc[k] = static_cast<double>(correct[k]) / data.size();
  return acc;
}

struct ClassifierResult {
  AttrClassifier<float> classifier;
  std::vector<double> test_accuracy;
};

/// Trains the judge with BCE on true labels, then scores it on `test`.
inline ClassifierResult train_attr_classifier(const Dataset& train, const Dataset& test,
                                              const ClassifierConfig& cfg) {
  auto clf = init_classifier<float>(cfg.seed, cfg.model, train.schema());
  Adam<float> opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Batcher batcher(train, cfg.batch_size, mix_seed(cfg.seed, 1));
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Batch b = batcher.batch_at(step);
    for (auto& [name, t] : clf.params) t.zero_grad();
    const auto loss = bce_with_logits(clf.logits(b.images), attribute_matrix<float>(b.attrs));
    if (!std::isfinite(loss.item())) throw NumericError("classifier loss became non-finite");
    loss.backward();
    opt.step(clf.params);
  }
  auto acc = classifier_accuracy(clf, test);
  return {std::move(clf), std::move(acc)};
}

/// Stored in the checkpoint container: config carries the architecture,
/// tensors the classifier.* parameters, no optimizer or RNG state.
inline Checkpoint classifier_checkpoint(const AttrClassifier<float>& clf) {
  TrainConfig cfg;
  cfg.model = clf.config;
  Checkpoint ck;
  ck.config = "# attribute classifier\n" + cfg.serialize();
  ck.schema = clf.schema->serialize();
  for (const auto& [name, t] : clf.params) ck.tensors[name] = StoredTensor::from(t);
  return ck;
}

inline AttrClassifier<float> classifier_from_checkpoint(const Checkpoint& ck) {
  const auto cfg = TrainConfig::parse(ck.config);
  auto schema = std::make_shared<const AttributeSchema>(AttributeSchema::parse(ck.schema));
  auto clf = init_classifier<float>(0, cfg.model, schema);
  if (ck.tensors.size() != clf.params.size()) throw FormatError("not an attribute classifier checkpoint", 0);
  for (auto& [name, t] : clf.params) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end() || it->second.dtype != DType::f32 || it->second.shape != t.shape()) {
      throw FormatError("classifier checkpoint: bad or missing tensor " + name, 0);
    }
    std::copy(it->second.f32.begin(), it->second.f32.end(), t.mutable_data().begin());
  }
  return clf;
}

// ---------------------------------------------------------------------------
// Editing

/// Maps input images and target attributes to edited images.
using Editor = std::function<Tensor<float>(const Tensor<float>&, std::span<const AttributeVector>)>;

/// Test-time path: decode_g1(encode(x), targets).
inline Editor generator_editor(const ModelParams<float>& params) {
  return [&params](const Tensor<float>& x, std::span<const AttributeVector> targets) {
    return decode_g1(params, encode(params, x), targets);
  };
}

/// Returns its input unchanged; the baseline that never edits anything.
inline Editor identity_editor() {
  return [](const Tensor<float>& x, std::span<const AttributeVector>) { return x; };
}

struct EvalReport {
  std::vector<std::string> attribute_names;
  std::vector<double> flip_rate;  // per attribute, in [0,1]
  double recon_l1 = 0.0;          // mean |x - edit(x, a)|
  double identity_l1 = 0.0;       // mean |x - edit(x, flip_single(a, i))| over all i
  std::size_t samples = 0;

  std::string csv_header() const {
    std::string out;
    for (const auto& n : attribute_names) out += n + "_flip_rate,";
    return out + "recon_l1,identity_l1";
  }
  std::string csv_row() const {
    std::string out;
    for (double r : flip_rate) out += format_double(r) + ",";
    return out + format_double(recon_l1) + "," + format_double(identity_l1);
  }

  void print(std::ostream& os) const {
    os << "samples: " << samples << '\n';
    for (std::size_t i = 0; i < flip_rate.size(); ++i) {
      os << "  " << std::left << std::setw(22) << attribute_names[i] << " flip success "
         << format_double(flip_rate[i]) << '\n';
    }
    os << "  recon_l1 " << format_double(recon_l1) << "\n  identity_l1 " << format_double(identity_l1) << '\n';
  }
};

namespace detail {
inline double mean_abs_diff(std::span<const float> a, std::span<const float> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(static_cast<double>(a[i]) - b[i]);
  return total / static_cast<double>(a.size());
}

inline void require_schema(const SchemaPtr& a, const SchemaPtr& b, const char* what) {
  if (!a || !b || *a != *b) throw ContractError(std::string(what) + ": attribute schemas differ");
}
}  // namespace detail

/// Scores single-attribute edits of every test example. An edit of
/// attribute i succeeds when the classifier puts the edited image on the
/// target side of 0.5 for attribute i. Results are aggregated in dataset
/// order, so they are reproducible bit for bit.
inline EvalReport evaluate_editor(const Editor& edit, const AttrClassifier<float>& clf,
                                  const Dataset& data, std::size_t chunk = 50) {
  detail::require_schema(clf.schema, data.schema(), "evaluate");
  const std::size_t n = clf.schema->size();
  EvalReport report;
  report.attribute_names = clf.schema->names;
  report.flip_rate.assign(n, 0.0);
  std::vector<std::size_t> success(n, 0);
  double recon_total = 0.0, identity_total = 0.0;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(begin + chunk, data.size()); ++i) idx.push_back(i);
    const Batch b = make_batch(data, idx);
    const std::size_t per = b.images.numel() / b.size();
    const auto recon = edit(b.images, b.attrs);
    for (std::size_t s = 0; s < b.size(); ++s) {
      recon_total += detail::mean_abs_diff(b.images.data().subspan(s * per, per), recon.data().subspan(s * per, per));
    }
    for (std::size_t k = 0; k < n; ++k) {
      AttributeBatch targets;
      for (const auto& a : b.attrs) targets.push_back(flip_single(a, k));
      const auto edited = edit(b.images, targets);
      const auto p = clf.probabilities(edited);
      for (std::size_t s = 0; s < b.size(); ++s) {
        if ((p[s * n + k] > 0.5) == (targets[s][k] == 1.0)) ++success[k];
        identity_total += detail::mean_abs_diff(b.images.data().subspan(s * per, per),
                                                edited.data().subspan(s * per, per));
      }
    }
  }
  report.samples = data.size();
  for (std::size_t k = 0; k < n; ++k) report.flip_rate[k] = static_cast<double>(success[k]) / data.size();
  report.recon_l1 = recon_total / data.size();
  report.identity_l1 = identity_total / (static_cast<double>(data.size()) * n);
  return report;
}

/// Fraction of examples whose single flip of `index` the classifier judges
/// as reaching the target value.
inline double flip_success_rate(const Editor& edit, const AttrClassifier<float>& clf, const Dataset& data,
                                std::size_t index, std::size_t chunk = 50) {
  detail::require_schema(clf.schema, data.schema(), "flip_success_rate");
  const std::size_t n = clf.schema->size();
  if (index >= n) throw ContractError("flip_success_rate: attribute index out of range");
  std::size_t success = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(begin + chunk, data.size()); ++i) idx.push_back(i);
    const Batch b = make_batch(data, idx);
    AttributeBatch targets;
    for (const auto& a : b.attrs) targets.push_back(flip_single(a, index));
    const auto p = clf.probabilities(edit(b.images, targets));
    for (std::size_t s = 0; s < b.size(); ++s) {
      if ((p[s * n + index] > 0.5) == (targets[s][index] == 1.0)) ++success;
    }
  }
  return static_cast<double>(success) / data.size();
}

// ---------------------------------------------------------------------------
// Rendering

struct GridLayout {
  std::size_t rows = 0, cols = 0, width = 0, height = 0;
};

inline GridLayout grid_layout(std::size_t rows, std::size_t n_attrs, std::size_t image_size,
                              std::size_t separator) {
  GridLayout g;
  g.rows = rows;
  g.cols = n_attrs + 2;
  g.width = g.cols * image_size + (g.cols - 1) * separator;
  g.height = rows * image_size + (rows - 1) * separator;
  return g;
}

/// One row per input: [input, reconstruction, flip of attribute 0, ..., flip of n-1].
/// Separators are white. Only each input's own attributes are read.
inline GridLayout render_grid(const ModelParams<float>& params, std::span<const Example> inputs,
                              const std::string& path, std::size_t separator = 2) {
  if (inputs.empty()) throw ContractError("render_grid: no inputs");
  const std::size_t size = params.config.image_size, n = params.schema->size();
  const auto layout = grid_layout(inputs.size(), n, size, separator);
  cv::Mat canvas(static_cast<int>(layout.height), static_cast<int>(layout.width), CV_8UC3,
                 cv::Scalar(255, 255, 255));
  const Batch b = stack_examples(inputs);
  for (const auto& a : b.attrs) detail::require_schema(a.schema(), params.schema, "render_grid");
  const auto z = encode(params, b.images);
  std::vector<Tensor<float>> columns{b.images, decode_g1(params, z, b.attrs)};
  for (std::size_t k = 0; k < n; ++k) {
    AttributeBatch targets;
    for (const auto& a : b.attrs) targets.push_back(flip_single(a, k));
    columns.push_back(decode_g1(params, z, targets));
  }
  const std::size_t per = 3 * size * size;
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      blit(canvas, columns[c].data().subspan(r * per, per), size, size,
           static_cast<int>(c * (size + separator)), static_cast<int>(r * (size + separator)));
    }
  }
  write_png(path, canvas);
  return layout;
}

/// Decodes one image through G2 with a soft attribute vector c in [0,1]^n.
inline Tensor<float> soft_edit(const ModelParams<float>& params, const Tensor<float>& image,
                               std::span<const double> c) {
  if (c.size() != params.schema->size()) {
    throw ContractError("soft_edit: " + std::to_string(c.size()) + " values for " +
                        std::to_string(params.schema->size()) + " attributes");
  }
  for (double v : c) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("soft_edit: attribute value " + format_double(v) + " outside [0,1]");
  }
  if (image.rank() != 3) throw ShapeError("soft_edit: expected [3,H,W] image");
  const Tensor<float> x({1, image.dim(0), image.dim(1), image.dim(2)},
                        std::vector<float>(image.data().begin(), image.data().end()));
  const AttributeBatch target{AttributeVector(params.schema, {c.begin(), c.end()})};
  const auto out = decode_g2(params, encode(params, x), target);
  return Tensor<float>({image.dim(0), image.dim(1), image.dim(2)},
                       std::vector<float>(out.data().begin(), out.data().end()));
}

}  // namespace adgan
