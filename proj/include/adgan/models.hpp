#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adgan/attributes.hpp"
#include "adgan/core/conv.hpp"
#include "adgan/core/ops.hpp"
#include "adgan/core/rng.hpp"

namespace adgan {

/// Architecture hyperparameters. Every stride-2 block halves the spatial
/// size, so image_size must be divisible by 2^blocks.
struct ModelConfig {
  std::size_t image_size = 64;
  std::vector<std::size_t> encoder_channels{32, 64, 128, 256};
  std::vector<std::size_t> disc_channels{32, 64, 128, 256};
  std::size_t disc_hidden = 512;
  std::size_t kernel = 4;
  double leaky_slope = 0.2;
  double norm_eps = 1e-5;
  double init_std = 0.02;

  std::size_t latent_size() const { return image_size >> encoder_channels.size(); }
  std::size_t latent_channels() const { return encoder_channels.back(); }
  std::size_t disc_feature_size() const { return image_size >> disc_channels.size(); }

  void validate() const {
    if (encoder_channels.empty() || disc_channels.empty()) {
      throw ConfigError("encoder and discriminator need at least one block");
    }
    for (auto blocks : {encoder_channels.size(), disc_channels.size()}) {
      if (blocks >= 16 || image_size % (std::size_t{1} << blocks) != 0 ||
          (image_size >> blocks) == 0) {
        throw ConfigError("image_size " + std::to_string(image_size) + " is not divisible by 2^" +
                          std::to_string(blocks));
      }
    }
    if (kernel != 4) throw ConfigError("kernel must be 4 for exact stride-2 halving/doubling");
    if (disc_hidden == 0) throw ConfigError("disc_hidden must be positive");
  }

  bool operator==(const ModelConfig&) const = default;
};

template <class T>
using ParamMap = std::map<std::string, Tensor<T>>;

enum class ParamGroup { encoder, decoder_g1, decoder_g2, disc1, disc2 };

inline constexpr std::array<ParamGroup, 5> kAllGroups{ParamGroup::encoder, ParamGroup::decoder_g1,
                                                       ParamGroup::decoder_g2, ParamGroup::disc1,
                                                       ParamGroup::disc2};

inline const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::decoder_g1: return "decoder_g1";
    case ParamGroup::decoder_g2: return "decoder_g2";
    case ParamGroup::disc1: return "disc1";
    case ParamGroup::disc2: return "disc2";
  }
  return "?";
}

/// All network parameters. The encoder exists once and is used by both
/// generator paths; the two discriminators own disjoint tensors.
template <class T>
struct ModelParams {
  ModelConfig config;
  SchemaPtr schema;
  ParamMap<T> encoder, decoder_g1, decoder_g2, disc1, disc2;

  ParamMap<T>& group(ParamGroup g) {
    switch (g) {
      case ParamGroup::encoder: return encoder;
      case ParamGroup::decoder_g1: return decoder_g1;
      case ParamGroup::decoder_g2: return decoder_g2;
      case ParamGroup::disc1: return disc1;
      case ParamGroup::disc2: return disc2;
    }
    throw ContractError("unknown parameter group");
  }
  const ParamMap<T>& group(ParamGroup g) const { return const_cast<ModelParams&>(*this).group(g); }

  /// Every tensor keyed by its full name, sorted.
  ParamMap<T> all() const {
    ParamMap<T> out;
    for (auto g : kAllGroups) out.insert(group(g).begin(), group(g).end());
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& [name, t] : all()) total += t.numel();
    return total;
  }

  void set_trainable(ParamGroup g, bool flag) {
    for (auto& [name, t] : group(g)) t.set_requires_grad(flag);
  }

  void zero_grad() {
    for (auto g : kAllGroups) {
      for (auto& [name, t] : group(g)) t.zero_grad();
    }
  }

  /// Deep copy (fresh tensors) converted to another precision.
  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    out.schema = schema;
    for (auto g : kAllGroups) {
      for (const auto& [name, t] : group(g)) out.group(g).emplace(name, t.template cast<U>());
    }
    return out;
  }

  ModelParams clone() const { return cast<T>(); }
};

template <class T>
struct DiscOutput {
  Tensor<T> adv_logit;    // [N,1]
  Tensor<T> attr_logits;  // [N,n]
};

namespace detail {

template <class T>
Tensor<T> normal_tensor(Shape shape, double std, Rng& rng) {
  std::vector<T> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<T>(std * rng.normal());
  return Tensor<T>(std::move(shape), std::move(data), true);
}

template <class T>
void add_conv(ParamMap<T>& map, const std::string& prefix, std::size_t out, std::size_t in,
              std::size_t k, double std, Rng& rng) {
  map.emplace(prefix + ".weight", normal_tensor<T>({out, in, k, k}, std, rng));
  map.emplace(prefix + ".bias", Tensor<T>::zeros({out}, true));
}

template <class T>
void add_norm(ParamMap<T>& map, const std::string& prefix, std::size_t channels) {
  map.emplace(prefix + ".gain", Tensor<T>::full({channels}, T(1), true));
  map.emplace(prefix + ".shift", Tensor<T>::zeros({channels}, true));
}

template <class T>
void add_dense(ParamMap<T>& map, const std::string& prefix, std::size_t out, std::size_t in,
               double std, Rng& rng) {
  map.emplace(prefix + ".weight", normal_tensor<T>({out, in}, std, rng));
  map.emplace(prefix + ".bias", Tensor<T>::zeros({out}, true));
}

template <class T>
const Tensor<T>& param(const ParamMap<T>& map, const std::string& name) {
  auto it = map.find(name);
  if (it == map.end()) throw ContractError("missing parameter " + name);
  return it->second;
}

// Decoder block i consumes the bottleneck (plus attribute planes) at i = 0
// and emits RGB at the last block. Hidden blocks after the first are
// instance-normalized.
inline bool decoder_block_normalized(std::size_t i, std::size_t blocks) {
  return i > 0 && i + 1 < blocks;
}

inline std::size_t decoder_out_channels(const ModelConfig& cfg, std::size_t i) {
  const std::size_t blocks = cfg.encoder_channels.size();
  return i + 1 < blocks ? cfg.encoder_channels[blocks - 2 - i] : 3;
}

// Convolutional trunk + hidden dense layer shared by discriminators and the
// evaluation classifier.
template <class T>
void add_disc_trunk(ParamMap<T>& map, const std::string& prefix, const ModelConfig& cfg, Rng& rng) {
  std::size_t in = 3;
  for (std::size_t i = 0; i < cfg.disc_channels.size(); ++i) {
    add_conv(map, prefix + ".conv" + std::to_string(i), cfg.disc_channels[i], in, cfg.kernel,
             cfg.init_std, rng);
    in = cfg.disc_channels[i];
  }
  const std::size_t side = cfg.disc_feature_size();
  add_dense(map, prefix + ".hidden", cfg.disc_hidden, in * side * side, cfg.init_std, rng);
}

template <class T>
Tensor<T> disc_trunk(const ParamMap<T>& map, const std::string& prefix, const ModelConfig& cfg,
                     const Tensor<T>& x) {
  const T slope = static_cast<T>(cfg.leaky_slope);
  Tensor<T> h = x;
  for (std::size_t i = 0; i < cfg.disc_channels.size(); ++i) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    h = leaky_relu(conv2d(h, param(map, p + ".weight"), param(map, p + ".bias"), 2, 1), slope);
  }
  return leaky_relu(dense(flatten(h), param(map, prefix + ".hidden.weight"),
                          param(map, prefix + ".hidden.bias")),
                    slope);
}

template <class T>
Tensor<T> decode_with(const ParamMap<T>& map, const std::string& prefix, const ModelConfig& cfg,
                      const Tensor<T>& z, std::span<const AttributeVector> attrs) {
  if (z.rank() != 4 || z.dim(1) != cfg.latent_channels() || z.dim(2) != cfg.latent_size() ||
      z.dim(3) != cfg.latent_size()) {
    throw ShapeError(prefix + ": latent shape " + shape_str(z.shape()) + " does not match config");
  }
  const std::size_t blocks = cfg.encoder_channels.size();
  Tensor<T> h = tile_and_concat(z, attrs);
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::string p = prefix + ".deconv" + std::to_string(i);
    h = conv_transpose2d(h, param(map, p + ".weight"), param(map, p + ".bias"), 2, 1);
    if (i + 1 == blocks) return tanh(h);
    if (decoder_block_normalized(i, blocks)) {
      const std::string n = prefix + ".norm" + std::to_string(i);
      h = instance_norm(h, param(map, n + ".gain"), param(map, n + ".shift"),
                        static_cast<T>(cfg.norm_eps));
    }
    h = relu(h);
  }
  return h;
}

template <class T>
void check_image_batch(const ModelConfig& cfg, const Tensor<T>& x, const char* op) {
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != cfg.image_size || x.dim(3) != cfg.image_size) {
    throw ShapeError(std::string(op) + ": expected [N,3," + std::to_string(cfg.image_size) + "," +
                     std::to_string(cfg.image_size) + "], got " + shape_str(x.shape()));
  }
}

}  // namespace detail

/// Deterministic initialization: N(0, init_std) weights, zero biases, unit
/// norm gains, zero norm shifts. Groups draw from one stream in fixed order.
template <class T>
ModelParams<T> init_params(std::uint64_t seed, const ModelConfig& cfg, SchemaPtr schema) {
  cfg.validate();
  if (!schema) throw ContractError("init_params: schema required");
  ModelParams<T> p;
  p.config = cfg;
  p.schema = schema;
  Rng rng(seed);
  const std::size_t n = schema->size(), blocks = cfg.encoder_channels.size();

  std::size_t in = 3;
  for (std::size_t i = 0; i < blocks; ++i) {
    detail::add_conv(p.encoder, "encoder.conv" + std::to_string(i), cfg.encoder_channels[i], in,
                     cfg.kernel, cfg.init_std, rng);
    detail::add_norm(p.encoder, "encoder.norm" + std::to_string(i), cfg.encoder_channels[i]);
    in = cfg.encoder_channels[i];
  }
  for (auto g : {ParamGroup::decoder_g1, ParamGroup::decoder_g2}) {
    const std::string prefix = group_name(g);
    std::size_t c = cfg.latent_channels() + n;
    for (std::size_t i = 0; i < blocks; ++i) {
      const std::size_t out = detail::decoder_out_channels(cfg, i);
      // transposed-conv layout [C_in, C_out, k, k]
      p.group(g).emplace(prefix + ".deconv" + std::to_string(i) + ".weight",
                         detail::normal_tensor<T>({c, out, cfg.kernel, cfg.kernel}, cfg.init_std, rng));
      p.group(g).emplace(prefix + ".deconv" + std::to_string(i) + ".bias",
                         Tensor<T>::zeros({out}, true));
      if (detail::decoder_block_normalized(i, blocks)) {
        detail::add_norm(p.group(g), prefix + ".norm" + std::to_string(i), out);
      }
      c = out;
    }
  }
  for (auto g : {ParamGroup::disc1, ParamGroup::disc2}) {
    const std::string prefix = group_name(g);
    detail::add_disc_trunk(p.group(g), prefix, cfg, rng);
    detail::add_dense(p.group(g), prefix + ".adv", 1, cfg.disc_hidden, cfg.init_std, rng);
    detail::add_dense(p.group(g), prefix + ".attr", n, cfg.disc_hidden, cfg.init_std, rng);
  }
  return p;
}

/// z = Enc(x): stride-2 conv, instance norm, leaky ReLU per block.
template <class T>
Tensor<T> encode(const ModelParams<T>& p, const Tensor<T>& x) {
  const auto& cfg = p.config;
  detail::check_image_batch(cfg, x, "encode");
  const T slope = static_cast<T>(cfg.leaky_slope);
  Tensor<T> h = x;
  for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i) {
    const std::string c = "encoder.conv" + std::to_string(i);
    const std::string n = "encoder.norm" + std::to_string(i);
    h = conv2d(h, detail::param(p.encoder, c + ".weight"), detail::param(p.encoder, c + ".bias"), 2, 1);
    h = instance_norm(h, detail::param(p.encoder, n + ".gain"), detail::param(p.encoder, n + ".shift"),
                      static_cast<T>(cfg.norm_eps));
    h = leaky_relu(h, slope);
  }
  return h;
}

/// G1 decoder, binary attribute targets (reconstruction with a, edit with b).
template <class T>
Tensor<T> decode_g1(const ModelParams<T>& p, const Tensor<T>& z, std::span<const AttributeVector> attrs) {
  return detail::decode_with(p.decoder_g1, "decoder_g1", p.config, z, attrs);
}

/// G2 decoder, soft attribute targets c in [0,1].
template <class T>
Tensor<T> decode_g2(const ModelParams<T>& p, const Tensor<T>& z, std::span<const AttributeVector> attrs) {
  for (const auto& c : attrs) {
    if (!c.in_unit_range()) throw ContractError("decode_g2: attribute values must lie in [0,1]");
  }
  return detail::decode_with(p.decoder_g2, "decoder_g2", p.config, z, attrs);
}

/// Disc1 (which = 1) or Disc2 (which = 2): adversarial and attribute logits.
template <class T>
DiscOutput<T> discriminate(const ModelParams<T>& p, int which, const Tensor<T>& x) {
  if (which != 1 && which != 2) throw ContractError("discriminate: which must be 1 or 2");
  detail::check_image_batch(p.config, x, "discriminate");
  const std::string prefix = which == 1 ? "disc1" : "disc2";
  const auto& map = which == 1 ? p.disc1 : p.disc2;
  Tensor<T> h = detail::disc_trunk(map, prefix, p.config, x);
  return {dense(h, detail::param(map, prefix + ".adv.weight"), detail::param(map, prefix + ".adv.bias")),
          dense(h, detail::param(map, prefix + ".attr.weight"), detail::param(map, prefix + ".attr.bias"))};
}

}  // namespace adgan
