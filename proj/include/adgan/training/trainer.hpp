#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "adgan/attributes.hpp"
#include "adgan/data/attr_file.hpp"
#include "adgan/data/dataset.hpp"
#include "adgan/data/synthetic.hpp"
#include "adgan/evaluation.hpp"
#include "adgan/losses.hpp"
#include "adgan/models.hpp"
#include "adgan/training/adam.hpp"
#include "adgan/training/checkpoint.hpp"
#include "adgan/training/config.hpp"

namespace adgan {

inline AdamConfig adam_config(const TrainConfig& cfg) { return {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps}; }

/// Everything that evolves during training.
template <class T>
struct TrainState {
  ModelParams<T> params;
  Adam<T> opt_disc1, opt_disc2, opt_gen;
  Rng rng;
  std::uint64_t step = 0;
};

template <class T>
TrainState<T> init_train_state(const TrainConfig& cfg, SchemaPtr schema) {
  cfg.validate();
  const auto adam = adam_config(cfg);
  return {init_params<T>(mix_seed(cfg.seed, 0), cfg.model, std::move(schema)), Adam<T>(adam), Adam<T>(adam),
          Adam<T>(adam), Rng(mix_seed(cfg.seed, 1)), 0};
}

/// Encoder and both decoders as one map (handles alias the live tensors).
template <class T>
ParamMap<T> generator_params(const ModelParams<T>& p) {
  ParamMap<T> out = p.encoder;
  out.insert(p.decoder_g1.begin(), p.decoder_g1.end());
  out.insert(p.decoder_g2.begin(), p.decoder_g2.end());
  return out;
}

/// The three configurations of one batch and their decodes.
template <class T>
struct Generated {
  AttributeBatch a, b, c;
  Tensor<T> x, z, x_a, x_b, x_c;
};

/// Decodes x under a, the given targets b, and c = (a + b) / 2.
template <class T>
Generated<T> forward_generators(const ModelParams<T>& p, const Tensor<T>& x, AttributeBatch a, AttributeBatch b) {
  Generated<T> g;
  g.a = std::move(a);
  g.b = std::move(b);
  g.c = mean_attrs(g.a, g.b);
  g.x = x;
  g.z = encode(p, x);
  g.x_a = decode_g1(p, g.z, g.a);
  g.x_b = decode_g1(p, g.z, g.b);
  g.x_c = decode_g2(p, g.z, g.c);
  return g;
}

/// Same, drawing b from the batch's own attributes.
template <class T>
Generated<T> forward_generators(const ModelParams<T>& p, const Tensor<T>& x, AttributeBatch a, Rng& rng,
                                TargetSampling sampling) {
  auto b = shuffle_attrs(a, rng, sampling);
  return forward_generators(p, x, std::move(a), std::move(b));
}

template <class T>
struct DiscTerms {
  Tensor<T> d1_gan, d2_gan, d1_att_a, d2_att_a;
};

/// Discriminator terms; the fakes enter detached.
template <class T>
DiscTerms<T> disc_terms(const ModelParams<T>& p, const Generated<T>& g, const LossWeights& w,
                        DiscMode mode = DiscMode::literal) {
  const auto real1 = discriminate(p, 1, g.x);
  const auto fake1 = discriminate(p, 1, g.x_b.detach());
  const auto real2 = discriminate(p, 2, g.x);
  const auto fake2 = discriminate(p, 2, g.x_c.detach());
  return {d_gan_objective(real1.adv_logit, fake1.adv_logit, w.gamma_d, mode),
          d_gan_objective(real2.adv_logit, fake2.adv_logit, w.gamma_d, mode), attr_loss_real(real1.attr_logits, g.a),
          attr_loss_real(real2.attr_logits, g.a)};
}

template <class T>
struct GenTerms {
  Tensor<T> g1_gan, g2_gan, d1_att_b, d2_att_c, recons;

  /// Terms that flow through G1: adversarial, target attribute, reconstruction.
  Tensor<T> path1(const LossWeights& w) const { return gen_loss(g1_gan, d1_att_b, recons, w); }
  /// Terms that flow through G2; recons is added only when counted per generator.
  Tensor<T> path2(const LossWeights& w, bool with_recons) const {
    const auto base = add(g2_gan, mul_scalar(d2_att_c, static_cast<T>(w.lambda)));
    return with_recons ? add(base, recons) : base;
  }
  Tensor<T> joint(const LossWeights& w, bool recons_per_generator) const {
    return add(path1(w), path2(w, recons_per_generator));
  }
};

template <class T>
GenTerms<T> gen_terms(const ModelParams<T>& p, const Generated<T>& g, const LossWeights& w, GeneratorMode mode) {
  const auto d1 = discriminate(p, 1, g.x_b);
  const auto d2 = discriminate(p, 2, g.x_c);
  return {g_gan_objective(d1.adv_logit, w.gamma_d, mode), g_gan_objective(d2.adv_logit, w.gamma_d, mode),
          attr_loss_target(d1.attr_logits, g.b), attr_loss_target(d2.attr_logits, g.c),
          recon_loss(g.x, g.x_a, w.zeta)};
}

/// d_steps Adam updates of each discriminator. Generator tensors are not read
/// for gradients and never written.
template <class T>
DiscTerms<T> discriminator_update(TrainState<T>& s, const Generated<T>& g, const TrainConfig& cfg) {
  DiscTerms<T> terms;
  for (std::size_t k = 0; k < cfg.d_steps; ++k) {
    terms = disc_terms(s.params, g, cfg.weights, cfg.disc_mode);
    for (auto& [n, t] : s.params.disc1) t.zero_grad();
    for (auto& [n, t] : s.params.disc2) t.zero_grad();
    disc_loss(terms.d1_gan, terms.d1_att_a, cfg.weights).backward();
    disc_loss(terms.d2_gan, terms.d2_att_a, cfg.weights).backward();
    s.opt_disc1.step(s.params.disc1);
    s.opt_disc2.step(s.params.disc2);
  }
  return terms;
}

/// One joint Adam update of encoder, G1 and G2 with both discriminators frozen.
template <class T>
GenTerms<T> generator_update(TrainState<T>& s, const Generated<T>& g, const TrainConfig& cfg) {
  s.params.set_trainable(ParamGroup::disc1, false);
  s.params.set_trainable(ParamGroup::disc2, false);
  auto gen = generator_params(s.params);
  GenTerms<T> terms;
  try {
    terms = gen_terms(s.params, g, cfg.weights, cfg.generator_mode);
    for (auto& [n, t] : gen) t.zero_grad();
    terms.joint(cfg.weights, cfg.recons_per_generator).backward();
  } catch (...) {
    s.params.set_trainable(ParamGroup::disc1, true);
    s.params.set_trainable(ParamGroup::disc2, true);
    throw;
  }
  s.params.set_trainable(ParamGroup::disc1, true);
  s.params.set_trainable(ParamGroup::disc2, true);
  s.opt_gen.step(gen);
  return terms;
}

/// One full step on a batch: configurations, discriminator updates, joint
/// generator update. Throws NumericError naming the first non-finite term.
template <class T>
LossReport train_step(TrainState<T>& s, const Batch& batch, const TrainConfig& cfg) {
  const auto g = forward_generators(s.params, batch.images.template cast<T>(), batch.attrs, s.rng,
                                    cfg.target_sampling);
  const auto d = discriminator_update(s, g, cfg);
  const auto gt = generator_update(s, g, cfg);
  const auto report = compose(LossPieces<T>{d.d1_gan, d.d2_gan, d.d1_att_a, d.d2_att_a, gt.g1_gan, gt.g2_gan,
                                            gt.d1_att_b, gt.d2_att_c, gt.recons},
                              cfg.weights);
  report.check_finite();
  ++s.step;
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoint conversion

namespace detail {
inline ParamGroup group_of(const std::string& name) {
  const std::string prefix = name.substr(0, name.find('.'));
  for (auto g : kAllGroups) {
    if (prefix == group_name(g)) return g;
  }
  throw FormatError("tensor " + name + " belongs to no parameter group", 0);
}

inline void store_moments(TensorTable& table, const Adam<float>& opt, const ParamMap<float>& params) {
  for (const auto& [name, m] : opt.moments()) {
    const auto& shape = params.at(name).shape();
    table[name + ".m"] = {DType::f32, shape, m.m, {}};
    table[name + ".v"] = {DType::f32, shape, m.v, {}};
  }
}

inline std::uint64_t read_counter(const TensorTable& table, const std::string& name) {
  auto it = table.find(name);
  if (it == table.end() || it->second.dtype != DType::u64 || it->second.u64.size() != 1) {
    throw FormatError("checkpoint lacks counter " + name, 0);
  }
  return it->second.u64[0];
}
}  // namespace detail

inline Checkpoint to_checkpoint(const TrainState<float>& s, const TrainConfig& cfg) {
  Checkpoint ck;
  ck.config = cfg.serialize();
  ck.schema = s.params.schema->serialize();
  const auto all = s.params.all();
  for (const auto& [name, t] : all) ck.tensors[name] = StoredTensor::from(t);
  detail::store_moments(ck.optimizer, s.opt_disc1, all);
  detail::store_moments(ck.optimizer, s.opt_disc2, all);
  detail::store_moments(ck.optimizer, s.opt_gen, all);
  ck.optimizer["step.disc1"] = StoredTensor::counter(s.opt_disc1.steps());
  ck.optimizer["step.disc2"] = StoredTensor::counter(s.opt_disc2.steps());
  ck.optimizer["step.gen"] = StoredTensor::counter(s.opt_gen.steps());
  ck.optimizer["step.train"] = StoredTensor::counter(s.step);
  ck.rng_state = s.rng.serialize();
  return ck;
}

/// Parameters only, validated against the manifest implied by the stored config.
inline ModelParams<float> params_from_checkpoint(const Checkpoint& ck) {
  const auto cfg = TrainConfig::parse(ck.config);
  auto schema = std::make_shared<const AttributeSchema>(AttributeSchema::parse(ck.schema));
  auto p = init_params<float>(0, cfg.model, schema);
  for (auto g : kAllGroups) {
    for (auto& [name, t] : p.group(g)) {
      auto it = ck.tensors.find(name);
      if (it == ck.tensors.end()) throw FormatError("checkpoint lacks tensor " + name, 0);
      if (it->second.dtype != DType::f32 || it->second.shape != t.shape()) {
        throw FormatError("tensor " + name + " has shape " + shape_str(it->second.shape) + ", expected " +
                              shape_str(t.shape()),
                          0);
      }
      std::copy(it->second.f32.begin(), it->second.f32.end(), t.mutable_data().begin());
    }
  }
  if (ck.tensors.size() != p.all().size()) throw FormatError("checkpoint has unexpected extra tensors", 0);
  return p;
}

inline TrainState<float> state_from_checkpoint(const Checkpoint& ck, const TrainConfig& cfg) {
  TrainState<float> s;
  s.params = params_from_checkpoint(ck);
  const auto adam = adam_config(cfg);
  s.opt_disc1 = Adam<float>(adam);
  s.opt_disc2 = Adam<float>(adam);
  s.opt_gen = Adam<float>(adam);
  const auto all = s.params.all();
  for (const auto& [key, t] : ck.optimizer) {
    if (key.starts_with("step.")) continue;
    const bool is_m = key.ends_with(".m"), is_v = key.ends_with(".v");
    const std::string name = key.substr(0, key.size() - 2);
    if ((!is_m && !is_v) || !all.contains(name) || t.dtype != DType::f32 || t.shape != all.at(name).shape()) {
      throw FormatError("unexpected optimizer tensor " + key, 0);
    }
    const auto g = detail::group_of(name);
    auto& opt = g == ParamGroup::disc1 ? s.opt_disc1 : g == ParamGroup::disc2 ? s.opt_disc2 : s.opt_gen;
    auto& m = opt.moments()[name];
    (is_m ? m.m : m.v) = t.f32;
  }
  s.opt_disc1.set_steps(detail::read_counter(ck.optimizer, "step.disc1"));
  s.opt_disc2.set_steps(detail::read_counter(ck.optimizer, "step.disc2"));
  s.opt_gen.set_steps(detail::read_counter(ck.optimizer, "step.gen"));
  s.step = detail::read_counter(ck.optimizer, "step.train");
  s.rng = Rng::deserialize(ck.rng_state);
  return s;
}

// ---------------------------------------------------------------------------
// Datasets

struct TrainData {
  Dataset train, test;
};

/// Resolves the `attributes` key against a table's columns. Accepts
/// "default", "all", or a comma list of schema names (e.g. gender) or columns.
inline AttributeSchema resolve_schema(const std::string& spec, const AttrTable& table) {
  const auto defaults = AttributeSchema::celeba_default();
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
  };
  AttributeSchema s;
  if (spec == "default") {
    s = defaults;
  } else if (spec == "all") {
    for (const auto& c : table.columns) {
      s.names.push_back(lower(c));
      s.columns.push_back(c);
    }
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      const auto token = detail::trim(spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      auto it = std::find(defaults.names.begin(), defaults.names.end(), token);
      if (it != defaults.names.end()) {
        s.names.push_back(token);
        s.columns.push_back(defaults.columns[static_cast<std::size_t>(it - defaults.names.begin())]);
      } else {
        s.names.push_back(lower(token));
        s.columns.push_back(token);
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  s.validate();
  for (const auto& c : s.columns) table.column_index(c);
  return s;
}

inline TrainData build_datasets(const TrainConfig& cfg) {
  const std::size_t size = cfg.model.image_size;
  if (cfg.dataset == "synthetic") {
    auto schema = synthetic::schema(cfg.synthetic_attrs);
    return {Dataset::in_memory(gen_synthetic(cfg.synthetic_count, cfg.synthetic_attrs, size, cfg.seed), schema),
            Dataset::in_memory(
                gen_synthetic(cfg.synthetic_test_count, cfg.synthetic_attrs, size, cfg.seed, cfg.synthetic_count),
                schema)};
  }
  if (cfg.data_dir.empty() && (cfg.attr_file.empty() || cfg.image_dir.empty())) {
    throw ConfigError("dataset celeba needs data_dir (or ADGAN_DATA_DIR)");
  }
  const std::string attr_path = cfg.attr_file.empty() ? cfg.data_dir + "/list_attr_celeba.txt" : cfg.attr_file;
  const std::string image_dir = cfg.image_dir.empty() ? cfg.data_dir + "/img_align_celeba" : cfg.image_dir;
  if (!std::filesystem::exists(attr_path)) throw IoError("attribute file not found: " + attr_path);
  if (!std::filesystem::is_directory(image_dir)) throw IoError("image directory not found: " + image_dir);
  auto table = std::make_shared<const AttrTable>(parse_attr_file(attr_path));
  auto schema = std::make_shared<const AttributeSchema>(resolve_schema(cfg.attributes, *table));
  const auto split = make_split(table->rows.size(), cfg.train_count);
  return {Dataset::from_table(table, split.train, image_dir, schema, size),
          Dataset::from_table(table, split.test, image_dir, schema, size)};
}

// ---------------------------------------------------------------------------
// Run loop

struct TrainOptions {
  std::optional<Checkpoint> resume;
  std::ostream* progress = nullptr;
  bool write_files = true;  // log, checkpoints and sample grids under out_dir
};

struct TrainResult {
  Checkpoint final_checkpoint;
  std::vector<std::string> log_rows;  // rows written this run, without header
};

/// Runs train_step until cfg.steps steps have completed in total.
inline TrainResult train(const TrainConfig& cfg, const TrainData& data, const TrainOptions& opts = {}) {
  cfg.validate();
  TrainState<float> state;
  if (opts.resume) {
    state = state_from_checkpoint(*opts.resume, cfg);
    if (state.params.config != cfg.model) throw ConfigError("resume: model config differs from checkpoint");
    if (*state.params.schema != *data.train.schema()) {
      throw ContractError("resume: attribute schema differs from checkpoint");
    }
  } else {
    state = init_train_state<float>(cfg, data.train.schema());
  }

  const std::filesystem::path out(cfg.out_dir);
  std::ofstream log;
  if (opts.write_files) {
    std::filesystem::create_directories(out);
    const auto log_path = out / "losses.csv";
    const bool append = opts.resume.has_value() && std::filesystem::exists(log_path);
    log.open(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    if (!append) log << LossReport::csv_header() << '\n';
  }

  std::vector<Example> samples;
  for (std::size_t i = 0; i < std::min<std::size_t>(4, data.test.size()); ++i) samples.push_back(data.test.get(i));

  TrainResult result;
  Batcher batcher(data.train, cfg.batch_size, mix_seed(cfg.seed, 2));
  while (state.step < cfg.steps) {
    LossReport report;
    try {
      report = train_step(state, batcher.batch_at(state.step), cfg);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(state.step + 1) + ": " + e.what());
    }
    const std::uint64_t done = state.step;
    if (done % cfg.log_interval == 0) {
      result.log_rows.push_back(report.csv_row(done));
      if (log.is_open()) log << result.log_rows.back() << '\n' << std::flush;
      if (opts.progress) {
        *opts.progress << "step " << done << "  L_Disc1 " << format_double(report.L_Disc1) << "  L_Gen1 "
                       << format_double(report.L_Gen1) << "  recons " << format_double(report.recons) << '\n';
      }
    }
    if (opts.write_files && cfg.checkpoint_interval && done % cfg.checkpoint_interval == 0) {
      to_checkpoint(state, cfg).save((out / ("checkpoint_" + std::to_string(done) + ".adgn")).string());
    }
    if (opts.write_files && cfg.sample_interval && done % cfg.sample_interval == 0 && !samples.empty()) {
      render_grid(state.params, samples, (out / ("samples_" + std::to_string(done) + ".png")).string());
    }
  }
  result.final_checkpoint = to_checkpoint(state, cfg);
  if (opts.write_files) result.final_checkpoint.save((out / "final.adgn").string());
  return result;
}

}  // namespace adgan
