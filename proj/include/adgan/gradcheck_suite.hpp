#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "adgan/core.hpp"
#include "adgan/losses.hpp"
#include "adgan/models.hpp"
#include "adgan/training/trainer.hpp"

namespace adgan {

/// One finite-difference check: a scalar function of some 64-bit inputs.
struct GradCase {
  std::string name;
  std::function<Tensor<double>()> fn;
  std::vector<Tensor<double>> inputs;
};

struct GradCaseResult {
  std::string name;
  GradCheckReport report;
};

namespace detail {

// Values in +-[0.1, 1], so kinked ops (relu, abs) are never probed at a kink.
inline Tensor<double> away_from_zero(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (0.1 + 0.9 * rng.uniform()) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  return Tensor<double>(std::move(shape), std::move(v));
}

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor<double>(std::move(shape), std::move(v));
}

// Reduces any output to a scalar with a fixed random cotangent.
inline Tensor<double> project(const Tensor<double>& out, const Tensor<double>& weights) {
  return sum_all(mul(out, weights));
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

template <class Op>
GradCase projected_case(std::string name, std::vector<Tensor<double>> inputs, Op op, Rng& rng) {
  const Shape out_shape = op(inputs).shape();
  auto w = random_tensor(out_shape, rng);
  auto in = inputs;
  return {std::move(name), [op, in, w] { return project(op(in), w); }, inputs};
}

}  // namespace detail

/// Every differentiable primitive on randomly drawn small shapes.
inline std::vector<GradCase> primitive_cases(Rng& rng) {
  using detail::away_from_zero;
  using detail::pick;
  using detail::random_tensor;
  using V = std::vector<Tensor<double>>;
  std::vector<GradCase> cases;

  {
    const std::size_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3), k = pick(rng, 1, 3);
    const std::size_t stride = pick(rng, 1, 2), pad = pick(rng, 0, 1), h = pick(rng, std::max<std::size_t>(k, 3), 6);
    cases.push_back(detail::projected_case(
        "conv2d", V{random_tensor({n, ci, h, h}, rng), random_tensor({co, ci, k, k}, rng), random_tensor({co}, rng)},
        [stride, pad](const V& v) { return conv2d(v[0], v[1], v[2], stride, pad); }, rng));
  }
  {
    const std::size_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3), k = pick(rng, 2, 4);
    const std::size_t stride = pick(rng, 1, 2), h = pick(rng, 2, 4), pad = std::min<std::size_t>(pick(rng, 0, 1), k - 1);
    cases.push_back(detail::projected_case(
        "conv_transpose2d",
        V{random_tensor({n, ci, h, h}, rng), random_tensor({ci, co, k, k}, rng), random_tensor({co}, rng)},
        [stride, pad](const V& v) { return conv_transpose2d(v[0], v[1], v[2], stride, pad); }, rng));
  }
  {
    const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), h = pick(rng, 2, 4), w = pick(rng, 2, 4);
    cases.push_back(detail::projected_case(
        "instance_norm", V{random_tensor({n, c, h, w}, rng), random_tensor({c}, rng), random_tensor({c}, rng)},
        [](const V& v) { return instance_norm(v[0], v[1], v[2], 1e-5); }, rng));
  }
  const Shape s{pick(rng, 1, 3), pick(rng, 1, 4)};
  cases.push_back(detail::projected_case("relu", V{away_from_zero(s, rng)}, [](const V& v) { return relu(v[0]); }, rng));
  cases.push_back(detail::projected_case("leaky_relu", V{away_from_zero(s, rng)},
                                         [](const V& v) { return leaky_relu(v[0], 0.2); }, rng));
  cases.push_back(detail::projected_case("tanh", V{random_tensor(s, rng)}, [](const V& v) { return tanh(v[0]); }, rng));
  cases.push_back(
      detail::projected_case("sigmoid", V{random_tensor(s, rng, 3.0)}, [](const V& v) { return sigmoid(v[0]); }, rng));
  {
    std::vector<double> t(shape_numel(s));
    for (auto& x : t) x = rng.uniform();
    const Tensor<double> targets(s, t);
    auto logits = random_tensor(s, rng, 3.0);
    cases.push_back({"bce_with_logits", [logits, targets] { return bce_with_logits(logits, targets); }, {logits}});
  }
  cases.push_back(detail::projected_case("add", V{random_tensor(s, rng), random_tensor(s, rng)},
                                         [](const V& v) { return add(v[0], v[1]); }, rng));
  cases.push_back(detail::projected_case("sub", V{random_tensor(s, rng), random_tensor(s, rng)},
                                         [](const V& v) { return sub(v[0], v[1]); }, rng));
  cases.push_back(detail::projected_case("mul", V{random_tensor(s, rng), random_tensor(s, rng)},
                                         [](const V& v) { return mul(v[0], v[1]); }, rng));
  cases.push_back(detail::projected_case("mul_scalar", V{random_tensor(s, rng)},
                                         [](const V& v) { return mul_scalar(v[0], -1.7); }, rng));
  cases.push_back(detail::projected_case("add_scalar", V{random_tensor(s, rng)},
                                         [](const V& v) { return add_scalar(v[0], 0.3); }, rng));
  cases.push_back(detail::projected_case("abs", V{away_from_zero(s, rng)}, [](const V& v) { return abs(v[0]); }, rng));
  {
    auto x = random_tensor(s, rng);
    cases.push_back({"sum_all", [x] { return sum_all(x); }, {x}});
  }
  {
    auto x = random_tensor(s, rng), y = random_tensor(s, rng);
    // shift y off x so |x - y| has no ties
    for (std::size_t i = 0; i < x.numel(); ++i) y.mutable_data()[i] = x.data()[i] + away_from_zero({1}, rng).item();
    cases.push_back({"mean_all(abs(x-y))", [x, y] { return mean_all(abs(sub(x, y))); }, {x}});
  }
  {
    const std::size_t n = pick(rng, 1, 2), h = pick(rng, 1, 3);
    cases.push_back(detail::projected_case(
        "concat_channels", V{random_tensor({n, pick(rng, 1, 3), h, h}, rng), random_tensor({n, pick(rng, 1, 3), h, h}, rng)},
        [](const V& v) { return concat_channels(v[0], v[1]); }, rng));
    const std::size_t c = pick(rng, 2, 4);
    cases.push_back(detail::projected_case("slice_channels", V{random_tensor({n, c, h, h}, rng)},
                                           [c](const V& v) { return slice_channels(v[0], 1, c); }, rng));
    cases.push_back(detail::projected_case("flatten", V{random_tensor({n, c, h, h}, rng)},
                                           [](const V& v) { return flatten(v[0]); }, rng));
  }
  {
    const std::size_t n = pick(rng, 1, 3), f = pick(rng, 1, 5), o = pick(rng, 1, 4);
    cases.push_back(detail::projected_case("dense",
                                           V{random_tensor({n, f}, rng), random_tensor({o, f}, rng), random_tensor({o}, rng)},
                                           [](const V& v) { return dense(v[0], v[1], v[2]); }, rng));
  }
  {
    const std::size_t n = pick(rng, 1, 2), na = pick(rng, 1, 3);
    auto schema = std::make_shared<const AttributeSchema>([na] {
      AttributeSchema sc;
      for (std::size_t i = 0; i < na; ++i) {
        sc.names.push_back("a" + std::to_string(i));
        sc.columns.push_back("A" + std::to_string(i));
      }
      return sc;
    }());
    AttributeBatch attrs;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(na);
      for (auto& x : v) x = rng.uniform();
      attrs.emplace_back(schema, std::move(v));
    }
    cases.push_back(detail::projected_case("tile_and_concat", V{random_tensor({n, pick(rng, 1, 3), 2, 2}, rng)},
                                           [attrs](const V& v) { return tile_and_concat(v[0], attrs); }, rng));
  }
  return cases;
}

/// 4x4 images, 2 attributes, batch 2, one encoder block.
inline ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.image_size = 4;
  cfg.encoder_channels = {4};
  cfg.disc_channels = {3};
  cfg.disc_hidden = 5;
  cfg.init_std = 0.5;
  return cfg;
}

inline SchemaPtr micro_schema() {
  return std::make_shared<const AttributeSchema>(AttributeSchema{{"first", "second"}, {"First", "Second"}});
}

/// Fixed micro-config problem: parameters, a batch, and targets.
struct MicroProblem {
  ModelParams<double> params;
  Tensor<double> x;
  AttributeBatch a, b;
};

inline MicroProblem micro_problem(std::uint64_t seed = 5) {
  MicroProblem m;
  const auto schema = micro_schema();
  m.params = init_params<double>(seed, micro_config(), schema);
  Rng rng(mix_seed(seed, 99));
  m.x = detail::random_tensor({2, 3, 4, 4}, rng, 0.5);
  for (auto& v : m.x.mutable_data()) v = std::tanh(v);
  m.a = {AttributeVector(schema, {1, 0}), AttributeVector(schema, {0, 1})};
  m.b = {AttributeVector(schema, {0, 1}), AttributeVector(schema, {1, 1})};
  // norm gains and biases away from their init constants
  for (auto g : kAllGroups) {
    for (auto& [name, t] : m.params.group(g)) {
      if (name.ends_with(".bias") || name.ends_with(".shift")) {
        for (auto& v : t.mutable_data()) v = 0.1 * rng.normal();
      } else if (name.ends_with(".gain")) {
        for (auto& v : t.mutable_data()) v = 1.0 + 0.1 * rng.normal();
      }
    }
  }
  return m;
}

namespace detail {
inline std::vector<Tensor<double>> tensors_of(const ParamMap<double>& map) {
  std::vector<Tensor<double>> out;
  for (const auto& [name, t] : map) out.push_back(t);
  return out;
}
}  // namespace detail

/// Every loss term and composite over the micro-config networks.
inline std::vector<GradCase> composite_cases() {
  auto m = std::make_shared<MicroProblem>(micro_problem());
  const LossWeights w{1.0, 1.0, 10.0, 100.0};
  std::vector<Tensor<double>> gen = detail::tensors_of(generator_params(m->params));
  std::vector<Tensor<double>> d1 = detail::tensors_of(m->params.disc1);
  std::vector<Tensor<double>> d2 = detail::tensors_of(m->params.disc2);
  auto fwd = [m] { return forward_generators(m->params, m->x, m->a, m->b); };
  auto cat = [](std::vector<Tensor<double>> a, const std::vector<Tensor<double>>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };

  std::vector<GradCase> cases;
  for (auto mode : {DiscMode::literal, DiscMode::log_likelihood}) {
    cases.push_back({std::string("d_gan_objective(") + disc_mode_name(mode) + ")",
                     [m, fwd, w, mode] { return disc_terms(m->params, fwd(), w, mode).d1_gan; }, d1});
  }
  cases.push_back({"attr_loss_real", [m, fwd, w] { return disc_terms(m->params, fwd(), w).d2_att_a; }, d2});
  cases.push_back({"L_Disc1", [m, fwd, w] {
                     const auto t = disc_terms(m->params, fwd(), w);
                     return disc_loss(t.d1_gan, t.d1_att_a, w);
                   }, d1});
  cases.push_back({"L_Disc2", [m, fwd, w] {
                     const auto t = disc_terms(m->params, fwd(), w);
                     return disc_loss(t.d2_gan, t.d2_att_a, w);
                   }, d2});
  for (auto mode : {GeneratorMode::literal, GeneratorMode::nonsaturating}) {
    cases.push_back({std::string("g_gan_objective(") + generator_mode_name(mode) + ")",
                     [m, fwd, w, mode] { return gen_terms(m->params, fwd(), w, mode).g1_gan; }, cat(gen, d1)});
  }
  cases.push_back({"attr_loss_target(soft)",
                   [m, fwd, w] { return gen_terms(m->params, fwd(), w, GeneratorMode::nonsaturating).d2_att_c; },
                   cat(gen, d2)});
  cases.push_back({"recon_loss",
                   [m, fwd, w] { return gen_terms(m->params, fwd(), w, GeneratorMode::nonsaturating).recons; }, gen});
  cases.push_back({"L_Gen1", [m, fwd, w] {
                     return gen_terms(m->params, fwd(), w, GeneratorMode::nonsaturating).path1(w);
                   }, gen});
  cases.push_back({"L_Gen2", [m, fwd, w] {
                     return gen_terms(m->params, fwd(), w, GeneratorMode::nonsaturating).path2(w, true);
                   }, gen});
  cases.push_back({"L_Gen1+L_Gen2", [m, fwd, w] {
                     return gen_terms(m->params, fwd(), w, GeneratorMode::literal).joint(w, false);
                   }, gen});
  return cases;
}

inline std::vector<GradCaseResult> run_cases(const std::vector<GradCase>& cases, double h, double tolerance) {
  std::vector<GradCaseResult> out;
  for (const auto& c : cases) out.push_back({c.name, grad_check(c.fn, c.inputs, h, tolerance)});
  return out;
}

/// The full suite: primitives on one draw of shapes plus all composites.
inline std::vector<GradCaseResult> run_gradcheck_suite(double tolerance = 1e-5, double h = 1e-5,
                                                       std::uint64_t seed = 2024) {
  Rng rng(seed);
  auto cases = primitive_cases(rng);
  auto comp = composite_cases();
  cases.insert(cases.end(), comp.begin(), comp.end());
  return run_cases(cases, h, tolerance);
}

}  // namespace adgan
