#include <gtest/gtest.h>

#include <cmath>

#include "adgan/models.hpp"

using namespace adgan;

namespace {

SchemaPtr default_schema() { return std::make_shared<const AttributeSchema>(AttributeSchema::celeba_default()); }

SchemaPtr small_schema(std::size_t n) {
  AttributeSchema s;
  for (std::size_t i = 0; i < n; ++i) {
    s.names.push_back("a" + std::to_string(i));
    s.columns.push_back("A" + std::to_string(i));
  }
  return std::make_shared<const AttributeSchema>(s);
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.image_size = 16;
  cfg.encoder_channels = {8, 16};
  cfg.disc_channels = {8, 16};
  cfg.disc_hidden = 32;
  return cfg;
}

template <class T>
Tensor<T> random_images(std::size_t n, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<T> v(n * 3 * size * size);
  for (auto& x : v) x = static_cast<T>(2.0 * rng.uniform() - 1.0);
  return Tensor<T>({n, 3, size, size}, std::move(v));
}

AttributeBatch random_attrs(const SchemaPtr& s, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  AttributeBatch out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(s->size());
    for (auto& x : v) x = rng.bernoulli(0.5);
    out.emplace_back(s, v);
  }
  return out;
}

bool same(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST(Models, DefaultShapes) {
  const auto s = default_schema();
  const auto p = init_params<float>(1, ModelConfig{}, s);
  const auto x = random_images<float>(1, 64, 2);
  const auto z = encode(p, x);
  EXPECT_EQ(z.shape(), (Shape{1, 256, 4, 4}));
  const auto a = random_attrs(s, 1, 3);
  EXPECT_EQ(decode_g1(p, z, a).shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(decode_g2(p, z, a).shape(), (Shape{1, 3, 64, 64}));
  const auto d = discriminate(p, 1, x);
  EXPECT_EQ(d.adv_logit.shape(), (Shape{1, 1}));
  EXPECT_EQ(d.attr_logits.shape(), (Shape{1, 13}));
}

TEST(Models, WrongImageShapeRejected) {
  const auto p = init_params<float>(1, small_config(), small_schema(2));
  EXPECT_THROW(encode(p, random_images<float>(1, 32, 1)), ShapeError);
  EXPECT_THROW(discriminate(p, 1, Tensor<float>::zeros({1, 1, 16, 16})), ShapeError);
  EXPECT_THROW(discriminate(p, 3, random_images<float>(1, 16, 1)), ContractError);
  EXPECT_THROW(decode_g1(p, Tensor<float>::zeros({1, 16, 2, 2}), random_attrs(p.schema, 1, 1)), ShapeError);
}

TEST(Models, GeneratorOutputsStrictlyInsideUnitBox) {
  auto cfg = small_config();
  cfg.init_std = 0.1;  // larger than default, still clear of float rounding to ±1
  const auto s = small_schema(3);
  const auto p = init_params<double>(4, cfg, s);
  const auto z = encode(p, random_images<double>(4, 16, 5));
  const auto a = random_attrs(s, 4, 6);
  for (const auto& out : {decode_g1(p, z, a), decode_g2(p, z, mean_attrs(a, random_attrs(s, 4, 7)))}) {
    for (double v : out.data()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Models, ForwardIsDeterministic) {
  const auto s = small_schema(3);
  const auto p = init_params<float>(9, small_config(), s);
  const auto x = random_images<float>(2, 16, 1);
  const auto a = random_attrs(s, 2, 2);
  EXPECT_TRUE(same(decode_g1(p, encode(p, x), a), decode_g1(p, encode(p, x), a)));
  EXPECT_TRUE(same(discriminate(p, 2, x).attr_logits, discriminate(p, 2, x).attr_logits));
}

TEST(Models, EncoderIsSharedByBothDecoders) {
  const auto s = small_schema(2);
  auto p = init_params<float>(3, small_config(), s);
  const auto x = random_images<float>(1, 16, 4);
  const auto a = random_attrs(s, 1, 5);
  const auto g1 = decode_g1(p, encode(p, x), a);
  const auto g2 = decode_g2(p, encode(p, x), a);
  p.encoder.at("encoder.conv0.weight").mutable_data()[0] += 0.5f;
  EXPECT_FALSE(same(g1, decode_g1(p, encode(p, x), a)));
  EXPECT_FALSE(same(g2, decode_g2(p, encode(p, x), a)));
}

TEST(Models, DiscriminatorsAreIndependent) {
  const auto p = init_params<float>(3, small_config(), small_schema(2));
  const auto x = random_images<float>(1, 16, 4);
  EXPECT_FALSE(same(discriminate(p, 1, x).adv_logit, discriminate(p, 2, x).adv_logit));
  for (const auto& [name, t] : p.disc1) {
    const auto twin = "disc2" + name.substr(5);
    ASSERT_TRUE(p.disc2.contains(twin));
    EXPECT_NE(t.node(), p.disc2.at(twin).node());
  }
}

TEST(Models, InitialAdversarialLogitsAreSmall) {
  const auto s = default_schema();
  const auto p = init_params<float>(7, ModelConfig{}, s);
  const auto x = random_images<float>(100, 64, 8);
  for (int which : {1, 2}) {
    const auto logits = discriminate(p, which, x).adv_logit;
    for (float v : logits.data()) EXPECT_LT(std::abs(v), 1.0f);
  }
}

TEST(Models, InitializationStatistics) {
  const auto s = default_schema();
  const ModelConfig cfg;
  const auto p = init_params<float>(11, cfg, s), q = init_params<float>(11, cfg, s);
  const auto all_p = p.all(), all_q = q.all();
  ASSERT_EQ(all_p.size(), all_q.size());
  for (const auto& [name, t] : all_p) {
    EXPECT_TRUE(same(t, all_q.at(name))) << name;
    if (name.ends_with(".bias") || name.ends_with(".shift")) {
      for (float v : t.data()) EXPECT_EQ(v, 0.0f) << name;
    } else if (name.ends_with(".gain")) {
      for (float v : t.data()) EXPECT_EQ(v, 1.0f) << name;
    } else {
      double mean = 0, sq = 0;
      for (float v : t.data()) {
        mean += v;
        sq += double(v) * v;
      }
      mean /= t.numel();
      const double sd = std::sqrt(sq / t.numel() - mean * mean);
      EXPECT_LT(std::abs(mean), 3 * cfg.init_std / std::sqrt(double(t.numel()))) << name;
      if (t.numel() >= 1000) {
        EXPECT_NEAR(sd, cfg.init_std, 0.1 * cfg.init_std) << name;
      }
    }
  }
  const auto r = init_params<float>(12, cfg, s);
  EXPECT_FALSE(same(all_p.at("encoder.conv0.weight"), r.all().at("encoder.conv0.weight")));
}

TEST(Models, ParameterCountOfDefaultArchitecture) {
  // encoder 691104, each decoder 716707, each discriminator 2794990
  const auto p = init_params<float>(1, ModelConfig{}, default_schema());
  EXPECT_EQ(p.encoder.size(), 16u);
  EXPECT_EQ(p.parameter_count(), 7714498u);
}

TEST(Models, ParameterNamesAreGroupPrefixed) {
  const auto p = init_params<float>(1, small_config(), small_schema(2));
  for (auto g : kAllGroups) {
    for (const auto& [name, t] : p.group(g)) EXPECT_TRUE(name.starts_with(std::string(group_name(g)) + "."));
  }
}

TEST(Models, SoftDecoderRejectsValuesOutsideUnitInterval) {
  const auto s = small_schema(2);
  const auto p = init_params<float>(1, small_config(), s);
  const auto z = encode(p, random_images<float>(1, 16, 1));
  EXPECT_THROW(decode_g2(p, z, AttributeBatch{AttributeVector(s, {1.5, 0})}), ContractError);
  EXPECT_THROW(decode_g2(p, z, AttributeBatch{AttributeVector(s, {0, -0.1})}), ContractError);
  EXPECT_NO_THROW(decode_g2(p, z, AttributeBatch{AttributeVector(s, {0.5, 1})}));
}

TEST(Models, ConfigValidation) {
  auto cfg = small_config();
  cfg.image_size = 18;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.kernel = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.disc_channels.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(init_params<float>(1, small_config(), nullptr), ContractError);
}

TEST(Models, CastPreservesValues) {
  const auto p = init_params<float>(2, small_config(), small_schema(2));
  const auto d = p.cast<double>().all();
  for (const auto& [name, t] : p.all()) {
    const auto& u = d.at(name);
    for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_EQ(double(t.data()[i]), u.data()[i]);
  }
}
