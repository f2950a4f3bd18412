#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adgan/attributes.hpp"
#include "adgan/errors.hpp"
#include "adgan/losses.hpp"
#include "adgan/models.hpp"

namespace adgan {

/// Everything a training run needs. Serialized as line-oriented
/// `key = value` text; the key order below is the canonical file order.
struct TrainConfig {
  // data
  std::string dataset = "synthetic";  // synthetic | celeba
  std::string data_dir;               // celeba root (defaults from ADGAN_DATA_DIR)
  std::string attr_file;              // default: <data_dir>/list_attr_celeba.txt
  std::string image_dir;              // default: <data_dir>/img_align_celeba
  std::string attributes = "default";  // default | all | comma-separated columns
  std::size_t train_count = kTrainCountDefault;
  std::size_t synthetic_count = 2000;
  std::size_t synthetic_test_count = 500;
  std::size_t synthetic_attrs = 3;

  ModelConfig model{};
  std::size_t batch_size = 32;
  std::uint64_t steps = 10000;
  std::uint64_t seed = 1;

  LossWeights weights{};
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  GeneratorMode generator_mode = GeneratorMode::nonsaturating;
  DiscMode disc_mode = DiscMode::literal;
  bool recons_per_generator = false;
  std::size_t d_steps = 1;
  TargetSampling target_sampling = TargetSampling::batch_permutation;

  std::uint64_t log_interval = 10;
  std::uint64_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::uint64_t sample_interval = 0;      // 0: no sample grids
  std::string out_dir = "run";

  static constexpr std::size_t kTrainCountDefault = 182000;

  std::string serialize() const;
  static TrainConfig parse(std::string_view text);
  static TrainConfig load(const std::string& path);
  /// Applies one `key = value` setting; unknown keys and bad values throw ConfigError.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  static const std::vector<std::string>& keys();
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class N>
N parse_number(std::string_view key, std::string_view text) {
  N value{};
  const std::string t = trim(text);
  auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("bad value '" + t + "' for " + std::string(key));
  }
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("bad boolean '" + t + "' for " + std::string(key));
}

inline std::vector<std::size_t> parse_list(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  std::string t = trim(text);
  std::size_t pos = 0;
  while (pos <= t.size()) {
    const auto comma = t.find(',', pos);
    const auto item = t.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    out.push_back(parse_number<std::size_t>(key, item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string format_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct ConfigField {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

template <class N>
ConfigField number_field(std::string key, N TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<N>) return format_double(c.*member);
            else return std::to_string(c.*member);
          },
          [member, key](TrainConfig& c, std::string_view v) { c.*member = parse_number<N>(key, v); }};
}

inline ConfigField string_field(std::string key, std::string TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return c.*member; },
          [member](TrainConfig& c, std::string_view v) { c.*member = trim(v); }};
}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    f.push_back(string_field("dataset", &TrainConfig::dataset));
    f.push_back(string_field("data_dir", &TrainConfig::data_dir));
    f.push_back(string_field("attr_file", &TrainConfig::attr_file));
    f.push_back(string_field("image_dir", &TrainConfig::image_dir));
    f.push_back(string_field("attributes", &TrainConfig::attributes));
    f.push_back(number_field("train_count", &TrainConfig::train_count));
    f.push_back(number_field("synthetic_count", &TrainConfig::synthetic_count));
    f.push_back(number_field("synthetic_test_count", &TrainConfig::synthetic_test_count));
    f.push_back(number_field("synthetic_attrs", &TrainConfig::synthetic_attrs));
    f.push_back({"image_size", [](const TrainConfig& c) { return std::to_string(c.model.image_size); },
                 [](TrainConfig& c, std::string_view v) {
                   c.model.image_size = parse_number<std::size_t>("image_size", v);
                 }});
    f.push_back({"encoder_channels", [](const TrainConfig& c) { return format_list(c.model.encoder_channels); },
                 [](TrainConfig& c, std::string_view v) {
                   c.model.encoder_channels = parse_list("encoder_channels", v);
                 }});
    f.push_back({"disc_channels", [](const TrainConfig& c) { return format_list(c.model.disc_channels); },
                 [](TrainConfig& c, std::string_view v) {
                   c.model.disc_channels = parse_list("disc_channels", v);
                 }});
    f.push_back({"disc_hidden", [](const TrainConfig& c) { return std::to_string(c.model.disc_hidden); },
                 [](TrainConfig& c, std::string_view v) {
                   c.model.disc_hidden = parse_number<std::size_t>("disc_hidden", v);
                 }});
    f.push_back(number_field("batch_size", &TrainConfig::batch_size));
    f.push_back(number_field("steps", &TrainConfig::steps));
    f.push_back(number_field("seed", &TrainConfig::seed));
    f.push_back({"gamma_d", [](const TrainConfig& c) { return format_double(c.weights.gamma_d); },
                 [](TrainConfig& c, std::string_view v) { c.weights.gamma_d = parse_number<double>("gamma_d", v); }});
    f.push_back({"alpha", [](const TrainConfig& c) { return format_double(c.weights.alpha); },
                 [](TrainConfig& c, std::string_view v) { c.weights.alpha = parse_number<double>("alpha", v); }});
    f.push_back({"lambda", [](const TrainConfig& c) { return format_double(c.weights.lambda); },
                 [](TrainConfig& c, std::string_view v) { c.weights.lambda = parse_number<double>("lambda", v); }});
    f.push_back({"zeta", [](const TrainConfig& c) { return format_double(c.weights.zeta); },
                 [](TrainConfig& c, std::string_view v) { c.weights.zeta = parse_number<double>("zeta", v); }});
    f.push_back(number_field("lr", &TrainConfig::lr));
    f.push_back(number_field("beta1", &TrainConfig::beta1));
    f.push_back(number_field("beta2", &TrainConfig::beta2));
    f.push_back(number_field("adam_eps", &TrainConfig::adam_eps));
    f.push_back({"generator_mode", [](const TrainConfig& c) { return std::string(generator_mode_name(c.generator_mode)); },
                 [](TrainConfig& c, std::string_view v) { c.generator_mode = parse_generator_mode(trim(v)); }});
    f.push_back({"disc_mode", [](const TrainConfig& c) { return std::string(disc_mode_name(c.disc_mode)); },
                 [](TrainConfig& c, std::string_view v) { c.disc_mode = parse_disc_mode(trim(v)); }});
    f.push_back({"recons_per_generator",
                 [](const TrainConfig& c) { return std::string(c.recons_per_generator ? "true" : "false"); },
                 [](TrainConfig& c, std::string_view v) {
                   c.recons_per_generator = parse_bool("recons_per_generator", v);
                 }});
    f.push_back(number_field("d_steps", &TrainConfig::d_steps));
    f.push_back({"target_sampling",
                 [](const TrainConfig& c) {
                   return std::string(c.target_sampling == TargetSampling::random_flip ? "random_flip"
                                                                                      : "batch_permutation");
                 },
                 [](TrainConfig& c, std::string_view v) {
                   const auto t = trim(v);
                   if (t == "batch_permutation") c.target_sampling = TargetSampling::batch_permutation;
                   else if (t == "random_flip") c.target_sampling = TargetSampling::random_flip;
                   else throw ConfigError("bad target_sampling '" + t + "'");
                 }});
    f.push_back(number_field("log_interval", &TrainConfig::log_interval));
    f.push_back(number_field("checkpoint_interval", &TrainConfig::checkpoint_interval));
    f.push_back(number_field("sample_interval", &TrainConfig::sample_interval));
    f.push_back(string_field("out_dir", &TrainConfig::out_dir));
    return f;
  }();
  return fields;
}

}  // namespace detail

inline const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : detail::config_fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

inline std::string TrainConfig::serialize() const {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

inline void TrainConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : detail::config_fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(detail::trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  return cfg;
}

inline TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

inline void TrainConfig::validate() const {
  if (dataset != "synthetic" && dataset != "celeba") {
    throw ConfigError("dataset must be synthetic or celeba, got '" + dataset + "'");
  }
  if (batch_size == 0 || d_steps == 0 || log_interval == 0) {
    throw ConfigError("batch_size, d_steps and log_interval must be positive");
  }
  if (!(lr > 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(adam_eps > 0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  weights.validate();
  model.validate();
}

}  // namespace adgan
