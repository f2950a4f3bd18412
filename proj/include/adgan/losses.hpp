#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "adgan/attributes.hpp"
#include "adgan/core/ops.hpp"

namespace adgan {

/// Scalar control parameters of the objectives.
struct LossWeights {
  double gamma_d = 1.0;  // adversarial terms
  double alpha = 1.0;    // original-attribute term in the discriminator objectives
  double lambda = 10.0;  // target-attribute term in the generator objectives
  double zeta = 100.0;   // reconstruction

  void validate() const {
    for (double w : {gamma_d, alpha, lambda, zeta}) {
      if (!std::isfinite(w) || w < 0.0) {
        throw ConfigError("loss weights must be finite and non-negative");
      }
    }
  }

  bool operator==(const LossWeights&) const = default;
};

enum class GeneratorMode {
  literal,  // gamma_d * (1 - sigmoid(fake)), minimized as written
  nonsaturating,  // gamma_d * BCE(fake, 1): same fixed point, gradient does not vanish
};

inline GeneratorMode parse_generator_mode(std::string_view s) {
  if (s == "literal") return GeneratorMode::literal;
  if (s == "nonsaturating") return GeneratorMode::nonsaturating;
  throw ConfigError("unknown generator mode '" + std::string(s) +
                    "' (expected literal or nonsaturating)");
}

inline const char* generator_mode_name(GeneratorMode m) {
  return m == GeneratorMode::literal ? "literal" : "nonsaturating";
}

enum class DiscMode {
  literal,   // gamma_d * (D(x) + 1 - D(fake))
  log_likelihood,  // gamma_d * (log D(x) + log(1 - D(fake)))
};

inline DiscMode parse_disc_mode(std::string_view s) {
  if (s == "literal") return DiscMode::literal;
  if (s == "log_likelihood") return DiscMode::log_likelihood;
  throw ConfigError("unknown discriminator mode '" + std::string(s) +
                    "' (expected literal or log_likelihood)");
}

inline const char* disc_mode_name(DiscMode m) {
  return m == DiscMode::literal ? "literal" : "log_likelihood";
}

/// Discriminator adversarial objective with D = sigmoid(logit), batch-averaged.
/// A good discriminator maximizes this; the discriminator loss uses its negation.
template <class T>
Tensor<T> d_gan_objective(const Tensor<T>& real_logit, const Tensor<T>& fake_logit, double gamma_d,
                          DiscMode mode = DiscMode::literal) {
  if (mode == DiscMode::log_likelihood) {
    const auto real = bce_with_logits(real_logit, Tensor<T>::full(real_logit.shape(), T(1)));
    const auto fake = bce_with_logits(fake_logit, Tensor<T>::full(fake_logit.shape(), T(0)));
    return mul_scalar(add(real, fake), static_cast<T>(-gamma_d));
  }
  const auto real = mean_all(sigmoid(real_logit));
  const auto fake = mean_all(sigmoid(fake_logit));
  return mul_scalar(add_scalar(sub(real, fake), T(1)), static_cast<T>(gamma_d));
}

/// Generator adversarial loss (minimized).
template <class T>
Tensor<T> g_gan_objective(const Tensor<T>& fake_logit, double gamma_d, GeneratorMode mode) {
  if (mode == GeneratorMode::literal) {
    const auto fake = mean_all(sigmoid(fake_logit));
    return mul_scalar(add_scalar(mul_scalar(fake, T(-1)), T(1)), static_cast<T>(gamma_d));
  }
  return mul_scalar(bce_with_logits(fake_logit, Tensor<T>::full(fake_logit.shape(), T(1))),
                    static_cast<T>(gamma_d));
}

namespace detail {
template <class T>
void check_attr_logits(const Tensor<T>& logits, std::span<const AttributeVector> targets,
                       const char* op) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size() ||
      (!targets.empty() && logits.dim(1) != targets.front().size())) {
    throw ContractError(std::string(op) + ": logits " + shape_str(logits.shape()) +
                        " do not match " + std::to_string(targets.size()) + " attribute vectors");
  }
}
}  // namespace detail

/// Attribute classification loss against the real attributes a (binary).
template <class T>
Tensor<T> attr_loss_real(const Tensor<T>& attr_logits, std::span<const AttributeVector> a) {
  detail::check_attr_logits(attr_logits, a, "attr_loss_real");
  for (const auto& v : a) {
    if (!v.is_binary()) throw ContractError("attr_loss_real: attributes must be binary");
  }
  return bce_with_logits(attr_logits, attribute_matrix<T>(a));
}

/// Attribute classification loss against edit targets (b binary, c soft).
template <class T>
Tensor<T> attr_loss_target(const Tensor<T>& attr_logits, std::span<const AttributeVector> t) {
  detail::check_attr_logits(attr_logits, t, "attr_loss_target");
  for (const auto& v : t) {
    if (!v.in_unit_range()) throw DomainError("attr_loss_target: targets must lie in [0,1]");
  }
  return bce_with_logits(attr_logits, attribute_matrix<T>(t));
}

/// zeta * mean |x - x_rec|
template <class T>
Tensor<T> recon_loss(const Tensor<T>& x, const Tensor<T>& x_rec, double zeta) {
  if (x.shape() != x_rec.shape()) {
    throw ContractError("recon_loss: shapes " + shape_str(x.shape()) + " and " +
                        shape_str(x_rec.shape()) + " differ");
  }
  return mul_scalar(mean_all(abs(sub(x, x_rec))), static_cast<T>(zeta));
}

/// -d_gan + alpha * att_a
template <class T>
Tensor<T> disc_loss(const Tensor<T>& d_gan, const Tensor<T>& att_a, const LossWeights& w) {
  return add(mul_scalar(d_gan, T(-1)), mul_scalar(att_a, static_cast<T>(w.alpha)));
}

/// g_gan + lambda * att_target + recons
template <class T>
Tensor<T> gen_loss(const Tensor<T>& g_gan, const Tensor<T>& att_target, const Tensor<T>& recons,
                   const LossWeights& w) {
  return add(add(g_gan, mul_scalar(att_target, static_cast<T>(w.lambda))), recons);
}

/// Every individual term and composite of one training step.
struct LossReport {
  double d1_gan = 0, d2_gan = 0, d1_att_a = 0, d2_att_a = 0;
  double g1_gan = 0, g2_gan = 0, d1_att_b = 0, d2_att_c = 0, recons = 0;
  double L_Disc1 = 0, L_Disc2 = 0, L_Gen1 = 0, L_Gen2 = 0;

  static constexpr std::array<const char*, 13> kNames{
      "d1_gan", "d2_gan", "d1_att_a", "d2_att_a", "g1_gan", "g2_gan",  "d1_att_b",
      "d2_att_c", "recons", "L_Disc1", "L_Disc2", "L_Gen1", "L_Gen2"};

  std::array<double, 13> values() const {
    return {d1_gan, d2_gan, d1_att_a, d2_att_a, g1_gan, g2_gan, d1_att_b,
            d2_att_c, recons, L_Disc1, L_Disc2, L_Gen1, L_Gen2};
  }

  /// Throws NumericError naming the first non-finite term.
  void check_finite() const {
    const auto v = values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) {
        throw NumericError(std::string("non-finite loss term ") + kNames[i] + " = " +
                           std::to_string(v[i]));
      }
    }
  }

  static std::string csv_header() {
    std::string out = "step";
    for (const char* n : kNames) out += std::string(",") + n;
    return out;
  }

  std::string csv_row(std::uint64_t step) const;
};

/// The nine individual terms of a step, as graph tensors.
template <class T>
struct LossPieces {
  Tensor<T> d1_gan, d2_gan, d1_att_a, d2_att_a, g1_gan, g2_gan, d1_att_b, d2_att_c, recons;
};

/// Assembles the four composites from the nine terms.
template <class T>
LossReport compose(const LossPieces<T>& p, const LossWeights& w) {
  const std::array<const Tensor<T>*, 9> all{&p.d1_gan, &p.d2_gan, &p.d1_att_a, &p.d2_att_a, &p.g1_gan,
                                            &p.g2_gan, &p.d1_att_b, &p.d2_att_c, &p.recons};
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!all[i]->defined()) throw ContractError(std::string("compose: missing ") + LossReport::kNames[i]);
  }
  LossReport r;
  r.d1_gan = p.d1_gan.item();
  r.d2_gan = p.d2_gan.item();
  r.d1_att_a = p.d1_att_a.item();
  r.d2_att_a = p.d2_att_a.item();
  r.g1_gan = p.g1_gan.item();
  r.g2_gan = p.g2_gan.item();
  r.d1_att_b = p.d1_att_b.item();
  r.d2_att_c = p.d2_att_c.item();
  r.recons = p.recons.item();
  r.L_Disc1 = -r.d1_gan + w.alpha * r.d1_att_a;
  r.L_Disc2 = -r.d2_gan + w.alpha * r.d2_att_a;
  r.L_Gen1 = r.g1_gan + w.lambda * r.d1_att_b + r.recons;
  r.L_Gen2 = r.g2_gan + w.lambda * r.d2_att_c + r.recons;
  return r;
}

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string LossReport::csv_row(std::uint64_t step) const {
  std::string out = std::to_string(step);
  for (double v : values()) out += "," + format_double(v);
  return out;
}

}  // namespace adgan
