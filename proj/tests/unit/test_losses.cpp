#include <gtest/gtest.h>

#include <cmath>

#include "adgan/losses.hpp"

using namespace adgan;

namespace {

using TD = Tensor<double>;

TD logits(std::vector<double> v, bool grad = false) {
  const auto n = v.size();
  return TD({n, 1}, std::move(v), grad);
}

SchemaPtr schema_of(std::size_t n) {
  AttributeSchema s;
  for (std::size_t i = 0; i < n; ++i) {
    s.names.push_back("a" + std::to_string(i));
    s.columns.push_back("A" + std::to_string(i));
  }
  return std::make_shared<const AttributeSchema>(s);
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -[t log s + (1-t) log(1-s)] written out without the stable rearrangement
double bce_ref(double logit, double t) {
  const double s = sigmoid_ref(logit);
  return -(t * std::log(s) + (1 - t) * std::log(1 - s));
}

LossPieces<double> pieces(std::array<double, 9> v) {
  LossPieces<double> p;
  TD* slots[] = {&p.d1_gan, &p.d2_gan, &p.d1_att_a, &p.d2_att_a, &p.g1_gan,
                 &p.g2_gan, &p.d1_att_b, &p.d2_att_c, &p.recons};
  for (std::size_t i = 0; i < 9; ++i) *slots[i] = TD::scalar(v[i]);
  return p;
}

}  // namespace

TEST(DiscGan, Endpoints) {
  EXPECT_NEAR(d_gan_objective(logits({60}), logits({-60}), 1.0).item(), 2.0, 1e-12);
  EXPECT_NEAR(d_gan_objective(logits({-60}), logits({60}), 1.0).item(), 0.0, 1e-12);
  EXPECT_NEAR(d_gan_objective(logits({0}), logits({0}), 1.0).item(), 1.0, 1e-15);
  EXPECT_NEAR(d_gan_objective(logits({60, 60}), logits({-60, -60}), 0.5).item(), 1.0, 1e-12);
}

TEST(DiscGan, LinearInGamma) {
  const auto r = logits({0.3, -1.2}), f = logits({0.7, 2.0});
  const double base = d_gan_objective(r, f, 1.0).item();
  for (double g : {0.0, 0.5, 2.0, 7.0}) EXPECT_NEAR(d_gan_objective(r, f, g).item(), g * base, 1e-12);
}

TEST(DiscGan, MonotoneInEachLogit) {
  double prev_real = -1, prev_fake = 3;
  for (double l = -6; l <= 6; l += 0.5) {
    const double by_real = d_gan_objective(logits({l}), logits({0.0}), 1.0).item();
    const double by_fake = d_gan_objective(logits({0.0}), logits({l}), 1.0).item();
    EXPECT_GT(by_real, prev_real);
    EXPECT_LT(by_fake, prev_fake);
    prev_real = by_real;
    prev_fake = by_fake;
  }
}

TEST(DiscGan, GradientScalesWithGamma) {
  auto grad_at = [](double gamma) {
    auto r = logits({0.4, -0.3}, true), f = logits({-0.2, 1.1}, true);
    d_gan_objective(r, f, gamma).backward();
    return std::vector<double>{r.grad()[0], r.grad()[1], f.grad()[0], f.grad()[1]};
  };
  const auto g1 = grad_at(1.0);
  // d/dl mean(sigmoid(l)) = s(1-s)/N
  const double s = sigmoid_ref(0.4);
  EXPECT_NEAR(g1[0], s * (1 - s) / 2, 1e-15);
  EXPECT_LT(g1[2], 0.0);
  for (double gamma : {0.5, 2.0}) {
    const auto g = grad_at(gamma);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[i], gamma * g1[i], 1e-15);
  }
}

TEST(DiscGan, LogLikelihoodValues) {
  const auto ll = DiscMode::log_likelihood;
  EXPECT_NEAR(d_gan_objective(logits({0}), logits({0}), 1.0, ll).item(), 2 * std::log(0.5), 1e-15);
  const auto r = logits({0.3, -1.2}), f = logits({0.7, 2.0});
  const double want = 0.5 * (std::log(sigmoid_ref(0.3)) + std::log(sigmoid_ref(-1.2))) +
                      0.5 * (std::log(1 - sigmoid_ref(0.7)) + std::log(1 - sigmoid_ref(2.0)));
  EXPECT_NEAR(d_gan_objective(r, f, 3.0, ll).item(), 3 * want, 1e-12);
  // the upper bound 0 is approached but the gradient survives saturation
  EXPECT_NEAR(d_gan_objective(logits({40}), logits({-40}), 1.0, ll).item(), 0.0, 1e-12);
  const auto real = logits({-30}, true);
  d_gan_objective(real, logits({-30}), 1.0, ll).backward();
  EXPECT_NEAR(real.grad()[0], 1.0, 1e-12);
}

TEST(DiscGan, ModeNames) {
  for (auto m : {DiscMode::literal, DiscMode::log_likelihood}) EXPECT_EQ(parse_disc_mode(disc_mode_name(m)), m);
  EXPECT_THROW(parse_disc_mode("wasserstein"), ConfigError);
}

TEST(GenGan, LiteralValues) {
  EXPECT_NEAR(g_gan_objective(logits({0}), 1.0, GeneratorMode::literal).item(), 0.5, 1e-15);
  EXPECT_NEAR(g_gan_objective(logits({60}), 1.0, GeneratorMode::literal).item(), 0.0, 1e-12);
  EXPECT_NEAR(g_gan_objective(logits({-60}), 2.0, GeneratorMode::literal).item(), 2.0, 1e-12);
  EXPECT_NEAR(g_gan_objective(logits({0}), 1.0, GeneratorMode::nonsaturating).item(), std::log(2.0), 1e-15);
}

TEST(GenGan, BothModesShareTheirMinimizer) {
  // scalar sweep: both decrease towards "fake judged real"
  double best_literal = 1e9, best_ns = 1e9, arg_literal = 0, arg_ns = 0;
  for (double l = -8; l <= 8; l += 0.25) {
    const double a = g_gan_objective(logits({l}), 1.0, GeneratorMode::literal).item();
    const double b = g_gan_objective(logits({l}), 1.0, GeneratorMode::nonsaturating).item();
    if (a < best_literal) best_literal = a, arg_literal = l;
    if (b < best_ns) best_ns = b, arg_ns = l;
  }
  EXPECT_EQ(arg_literal, 8.0);
  EXPECT_EQ(arg_ns, 8.0);
}

TEST(GenGan, NonsaturatingKeepsGradientWhereLiteralVanishes) {
  auto slope = [](GeneratorMode m) {
    auto l = logits({-12.0}, true);
    g_gan_objective(l, 1.0, m).backward();
    return std::abs(l.grad()[0]);
  };
  EXPECT_LT(slope(GeneratorMode::literal), 1e-5);
  EXPECT_GT(slope(GeneratorMode::nonsaturating), 0.99);
  EXPECT_THROW(parse_generator_mode("hinge"), ConfigError);
  EXPECT_EQ(parse_generator_mode(generator_mode_name(GeneratorMode::literal)), GeneratorMode::literal);
}

TEST(AttrLoss, RealGradientIsSigmoidMinusTarget) {
  const auto s = schema_of(3);
  const AttributeBatch a{AttributeVector(s, {1, 0, 1}), AttributeVector(s, {0, 0, 1})};
  const std::vector<double> v{0.5, -1.0, 2.0, 0.1, 0.0, -0.7};
  TD l({2, 3}, v, true);
  const auto loss = attr_loss_real(l, a);
  double expected = 0;
  for (std::size_t i = 0; i < 6; ++i) expected += bce_ref(v[i], a[i / 3][i % 3]);
  EXPECT_NEAR(loss.item(), expected / 6, 1e-14);
  loss.backward();
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(l.grad()[i], (sigmoid_ref(v[i]) - a[i / 3][i % 3]) / 6.0, 1e-15);
  }
}

TEST(AttrLoss, RejectsBadTargets) {
  const auto s = schema_of(2);
  const TD l({1, 2}, {0.0, 0.0});
  EXPECT_THROW(attr_loss_real(l, AttributeBatch{AttributeVector(s, {0.5, 1})}), ContractError);
  EXPECT_THROW(attr_loss_real(l, AttributeBatch{AttributeVector(schema_of(3), {0, 1, 1})}), ContractError);
  EXPECT_THROW(attr_loss_target(TD({2, 2}, {0, 0, 0, 0}), AttributeBatch{AttributeVector(s, {0, 1})}),
               ContractError);
}

TEST(AttrLoss, SoftTargetLiteralValue) {
  const auto s = schema_of(2);
  const TD l({1, 2}, {0.8, -2.5});
  const AttributeBatch c{AttributeVector(s, {0.5, 0.25})};
  EXPECT_NEAR(attr_loss_target(l, c).item(), (bce_ref(0.8, 0.5) + bce_ref(-2.5, 0.25)) / 2, 1e-14);
}

TEST(AttrLoss, SoftTargetMinimizerIsLogOdds) {
  // target 0.25: optimum logit log(0.25 / 0.75) = -1.0986
  const auto s = schema_of(1);
  const AttributeBatch c{AttributeVector(s, {0.25})};
  auto value = [&](double l) { return attr_loss_target(TD({1, 1}, {l}), c).item(); };
  double lo = -5, hi = 5;
  for (int i = 0; i < 200; ++i) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (value(m1) < value(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  EXPECT_NEAR((lo + hi) / 2, -1.0986, 1e-4);
  TD l({1, 1}, {std::log(1.0 / 3.0)}, true);
  attr_loss_target(l, c).backward();
  EXPECT_NEAR(l.grad()[0], 0.0, 1e-15);
}

TEST(AttrLoss, MonotoneTowardsTarget) {
  const auto s = schema_of(1);
  const AttributeBatch one{AttributeVector(s, {1})}, zero{AttributeVector(s, {0})};
  double prev_one = 1e9, prev_zero = -1;
  for (double l = -6; l <= 6; l += 0.5) {
    const double a = attr_loss_target(TD({1, 1}, {l}), one).item();
    const double b = attr_loss_target(TD({1, 1}, {l}), zero).item();
    EXPECT_LT(a, prev_one);
    EXPECT_GT(b, prev_zero);
    prev_one = a;
    prev_zero = b;
  }
}

TEST(AttrLoss, OutOfRangeSoftTargetIsDomainError) {
  // AttributeVector itself accepts any finite value; the loss enforces [0,1]
  const auto s = schema_of(1);
  EXPECT_THROW(attr_loss_target(TD({1, 1}, {0.0}), AttributeBatch{AttributeVector(s, {1.5})}), DomainError);
}

TEST(Recon, Examples) {
  const auto x = TD::zeros({1, 3, 2, 2});
  EXPECT_NEAR(recon_loss(x, TD::full({1, 3, 2, 2}, 0.5), 100.0).item(), 50.0, 1e-12);
  EXPECT_EQ(recon_loss(x, x, 100.0).item(), 0.0);
  const TD y({1, 1, 1, 4}, {1, -1, 0.5, 0});
  EXPECT_NEAR(recon_loss(TD::zeros({1, 1, 1, 4}), y, 2.0).item(), 2.0 * 2.5 / 4, 1e-15);
  EXPECT_THROW(recon_loss(x, TD::zeros({1, 3, 2, 3}), 1.0), ContractError);
}

TEST(Recon, GradientIsSignOverCount) {
  TD x({1, 1, 1, 3}, {0.2, -0.4, 0.9}, true);
  const TD target({1, 1, 1, 3}, {0.0, 0.0, 1.0});
  recon_loss(x, target, 10.0).backward();
  EXPECT_NEAR(x.grad()[0], 10.0 / 3, 1e-14);
  EXPECT_NEAR(x.grad()[1], -10.0 / 3, 1e-14);
  EXPECT_NEAR(x.grad()[2], -10.0 / 3, 1e-14);
}

TEST(Compose, CompositesFromTerms) {
  LossWeights w;
  w.alpha = 2;
  w.lambda = 10;
  const auto r = compose(pieces({1.5, 1.2, 0.3, 0.4, 0.7, 0.6, 0.2, 0.1, 5.0}), w);
  EXPECT_DOUBLE_EQ(r.L_Disc1, -1.5 + 2 * 0.3);
  EXPECT_DOUBLE_EQ(r.L_Disc2, -1.2 + 2 * 0.4);
  EXPECT_DOUBLE_EQ(r.L_Gen1, 0.7 + 10 * 0.2 + 5.0);
  EXPECT_DOUBLE_EQ(r.L_Gen2, 0.6 + 10 * 0.1 + 5.0);
  EXPECT_EQ(r.recons, 5.0);
}

TEST(Compose, GraphCompositesMatchReport) {
  const LossWeights w;
  const auto p = pieces({1.5, 1.2, 0.3, 0.4, 0.7, 0.6, 0.2, 0.1, 5.0});
  const auto r = compose(p, w);
  EXPECT_DOUBLE_EQ(disc_loss(p.d1_gan, p.d1_att_a, w).item(), r.L_Disc1);
  EXPECT_DOUBLE_EQ(gen_loss(p.g2_gan, p.d2_att_c, p.recons, w).item(), r.L_Gen2);
}

TEST(Compose, MissingTermIsNamed) {
  auto p = pieces({1, 1, 1, 1, 1, 1, 1, 1, 1});
  p.d2_att_c = TD();
  try {
    compose(p, LossWeights{});
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("d2_att_c"), std::string::npos);
  }
}

TEST(Report, CheckFiniteNamesTerm) {
  auto r = compose(pieces({1, 1, 1, 1, 1, 1, 1, 1, 1}), LossWeights{});
  EXPECT_NO_THROW(r.check_finite());
  r.g2_gan = std::nan("");
  try {
    r.check_finite();
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("g2_gan"), std::string::npos);
  }
}

TEST(Report, CsvFormat) {
  EXPECT_EQ(LossReport::csv_header(),
            "step,d1_gan,d2_gan,d1_att_a,d2_att_a,g1_gan,g2_gan,d1_att_b,d2_att_c,recons,L_Disc1,L_Disc2,L_Gen1,"
            "L_Gen2");
  const auto r = compose(pieces({0.1, 1, 1, 1, 1, 1, 1, 1, 0.25}), LossWeights{});
  const auto row = r.csv_row(7);
  EXPECT_TRUE(row.starts_with("7,0.1,1,"));
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 13);
}

TEST(Weights, Validation) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.lambda = -1;
  EXPECT_THROW(w.validate(), ConfigError);
  w.lambda = std::numeric_limits<double>::infinity();
  EXPECT_THROW(w.validate(), ConfigError);
}
