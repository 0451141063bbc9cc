#include <gtest/gtest.h>

#include "oracles.hpp"
#include "plap/discretization.hpp"
#include "plap/weights.hpp"

using namespace plap;

namespace {

NodalFunction sin_pi(const MeshPtr& m) {
  return NodalFunction::interpolate(m, [](double x) { return std::sin(oracle::pi * x); });
}

double total_length(const IntervalList& l) {
  double s = 0;
  for (const auto& iv : l) s += iv.length();
  return s;
}

}  // namespace

TEST(Mesh, FourElementsTwoPointGauss) {
  auto m = build_mesh(0, 1, 4, 2);
  EXPECT_DOUBLE_EQ(m->h(), 0.25);
  EXPECT_EQ(m->quad_size(), 8u);
  EXPECT_EQ(m->interior_nodes(), 3);
}

TEST(Mesh, MidpointRuleWeightsSumToH) {
  auto m = build_mesh(0, 1, 2, 1);
  EXPECT_DOUBLE_EQ(m->h(), 0.5);
  EXPECT_DOUBLE_EQ(m->quad_weight(), 0.5);
  auto g = build_mesh(0, 1, 2, 2);
  EXPECT_DOUBLE_EQ(2 * g->quad_weight(), g->h());
}

TEST(Mesh, NodesOnSymmetricInterval) {
  auto m = build_mesh(-1, 1, 8, 2);
  EXPECT_DOUBLE_EQ(m->h(), 0.25);
  for (int i = 0; i <= 8; ++i) EXPECT_DOUBLE_EQ(m->node(i), -1 + 0.25 * i);
}

TEST(Mesh, RejectsBadArguments) {
  EXPECT_THROW(build_mesh(1, 0, 4), InvalidArgument);
  EXPECT_THROW(build_mesh(0, 1, 1), InvalidArgument);
  EXPECT_THROW(build_mesh(0, 1, 4, 3), InvalidArgument);
}

TEST(NodalFunctionTest, SizeChecked) {
  auto m = build_mesh(0, 1, 4);
  EXPECT_THROW(NodalFunction(m, Vector::Zero(4)), InvalidArgument);
  EXPECT_THROW(NodalFunction(nullptr, Vector::Zero(3)), InvalidArgument);
  NodalFunction u(m, Vector::Ones(3));
  EXPECT_EQ(u.at_node(0), 0.0);
  EXPECT_EQ(u.at_node(4), 0.0);
  EXPECT_EQ(u.at_node(2), 1.0);
}

TEST(Integrals, ZeroFunction) {
  auto m = build_mesh(0, 1, 16);
  auto z = NodalFunction::zero(m);
  EXPECT_EQ(gradient_p_norm(z, 2.0), 0.0);
  EXPECT_EQ(lp_power_integral(z, 3.0), 0.0);
  EXPECT_EQ(weighted_power_integral(z, cos2pi_weight(m), 4.0), 0.0);
}

TEST(Integrals, HatFunction) {
  auto m = build_mesh(0, 1, 2);
  NodalFunction hat(m, Vector::Ones(1));
  EXPECT_DOUBLE_EQ(gradient_p_norm(hat, 2.0), 4.0);
}

TEST(Integrals, SinInterpolantAgainstAnalytic) {
  auto m = build_mesh(0, 1, 512);
  auto u = sin_pi(m);
  const double pi2 = oracle::pi * oracle::pi;
  EXPECT_NEAR(gradient_p_norm(u, 2.0) / (pi2 / 2), 1.0, 1e-3);
  EXPECT_NEAR(lp_power_integral(u, 2.0) / 0.5, 1.0, 1e-3);
  EXPECT_NEAR(lp_power_integral(u, 4.0) / 0.375, 1.0, 1e-3);
  const double ref = oracle::integrate(
      [](double x) { return std::cos(2 * oracle::pi * x) * std::pow(std::sin(oracle::pi * x), 4); }, 0, 1);
  EXPECT_NEAR(ref, -0.25, 1e-14);
  EXPECT_NEAR(weighted_power_integral(u, cos2pi_weight(m), 4.0), ref, 1e-3);
}

TEST(Integrals, UnitWeightReducesToLp) {
  auto m = build_mesh(0, 1, 64);
  auto u = sin_pi(m);
  EXPECT_NEAR(weighted_power_integral(u, constant_weight(m, 1.0), 3.0), lp_power_integral(u, 3.0), 1e-15);
}

TEST(Integrals, MatchHighOrderQuadratureOfThePiecewiseLinearFunction) {
  auto g = oracle::rng(7);
  const int n = 64;
  auto m = build_mesh(0, 1, n);
  oracle::P1 ref{0, 1, n};
  for (int trial = 0; trial < 5; ++trial) {
    auto v = oracle::random_positive(g, n);
    NodalFunction u(m, Eigen::Map<Vector>(v.data(), n - 1));
    EXPECT_NEAR(gradient_p_norm(u, 2.5), ref.grad_p(v, 2.5), 1e-12 * ref.grad_p(v, 2.5));
    // two-point Gauss is exact for |u|^2 on P1 elements
    const double L2 = ref.mass(v, 2.0, [](double) { return 1.0; });
    EXPECT_NEAR(lp_power_integral(u, 2.0), L2, 1e-12 * L2);
    const double F = ref.mass(v, 4.0, [](double x) { return std::cos(2 * oracle::pi * x); });
    EXPECT_NEAR(weighted_power_integral(u, cos2pi_weight(m), 4.0), F, 1e-5 * std::abs(F) + 1e-8);
  }
}

TEST(Integrals, SecondOrderConvergence) {
  const double exact[3] = {oracle::pi * oracle::pi / 2, 0.375, -0.25};
  double prev[3] = {0, 0, 0};
  for (int n : {32, 64, 128, 256}) {
    auto m = build_mesh(0, 1, n);
    auto u = sin_pi(m);
    const double err[3] = {std::abs(gradient_p_norm(u, 2.0) - exact[0]), std::abs(lp_power_integral(u, 4.0) - exact[1]),
                           std::abs(weighted_power_integral(u, cos2pi_weight(m), 4.0) - exact[2])};
    for (int k = 0; k < 3; ++k) {
      if (n > 32) { EXPECT_GE(prev[k] / err[k], 3.5) << "quantity " << k << " at n=" << n; }
      prev[k] = err[k];
    }
  }
}

TEST(Integrals, Homogeneity) {
  auto g = oracle::rng(11);
  auto m = build_mesh(0, 1, 50);
  auto f = cos2pi_weight(m);
  std::uniform_real_distribution<double> S(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = oracle::random_positive(g, 50);
    NodalFunction u(m, Eigen::Map<Vector>(v.data(), 49));
    const double s = S(g), p = 1.5 + trial * 0.1;
    auto su = u.scaled(s);
    EXPECT_NEAR(gradient_p_norm(su, p), std::pow(std::abs(s), p) * gradient_p_norm(u, p),
                1e-13 * gradient_p_norm(su, p));
    EXPECT_NEAR(lp_power_integral(su, p), std::pow(std::abs(s), p) * lp_power_integral(u, p),
                1e-13 * lp_power_integral(su, p));
    const double F = weighted_power_integral(su, f, p + 1);
    EXPECT_NEAR(F, std::pow(std::abs(s), p + 1) * weighted_power_integral(u, f, p + 1), 1e-13 * std::abs(F) + 1e-300);
  }
}

TEST(Support, CosinePartition) {
  auto m = build_mesh(0, 1, 256);
  auto c = classify_support(cos2pi_weight(m));
  ASSERT_EQ(c.plus.size(), 2u);
  EXPECT_DOUBLE_EQ(c.plus[0].lo, 0.0);
  EXPECT_DOUBLE_EQ(c.plus[0].hi, 0.25);
  EXPECT_DOUBLE_EQ(c.plus[1].lo, 0.75);
  EXPECT_DOUBLE_EQ(c.plus[1].hi, 1.0);
  ASSERT_EQ(c.minus.size(), 1u);
  EXPECT_DOUBLE_EQ(c.minus[0].lo, 0.25);
  EXPECT_DOUBLE_EQ(c.minus[0].hi, 0.75);
  EXPECT_TRUE(c.zero.empty());
}

TEST(Support, NegativeConstantHasNoPositiveSet) {
  auto m = build_mesh(0, 1, 16);
  EXPECT_FALSE(classify_support(constant_weight(m, -1.0)).has_plus());
}

TEST(Support, StepThirdsAllNonempty) {
  auto m = build_mesh(0, 1, 99);
  auto c = classify_support(step3_weight(m));
  EXPECT_TRUE(c.has_plus() && c.has_minus() && c.has_zero());
  EXPECT_NEAR(total_length(c.plus), 1.0 / 3, 1e-12);
  EXPECT_NEAR(total_length(c.zero), 1.0 / 3, 1e-12);
}

TEST(Support, PartitionIsExact) {
  for (int n : {7, 30, 99, 128}) {
    auto m = build_mesh(-0.5, 1.5, n);
    for (auto f : {cos2pi_weight(m), step3_weight(m, 1, 2)}) {
      auto c = classify_support(f);
      IntervalList all = c.plus;
      all.insert(all.end(), c.minus.begin(), c.minus.end());
      all.insert(all.end(), c.zero.begin(), c.zero.end());
      EXPECT_NEAR(total_length(c.plus) + total_length(c.minus) + total_length(c.zero), 2.0, 1e-12);
      auto merged = merge_intervals(all);
      ASSERT_EQ(merged.size(), 1u);
      EXPECT_DOUBLE_EQ(merged[0].lo, -0.5);
      EXPECT_DOUBLE_EQ(merged[0].hi, 1.5);
    }
  }
}

TEST(Support, ThresholdMasksNoise) {
  auto m = build_mesh(0, 1, 20);
  auto f = WeightField::sample(m, [](double x) { return x < 0.5 ? 1.0 : 1e-9 * std::sin(100 * x); }, {"noisy", {}});
  EXPECT_TRUE(classify_support(f, 0.0).has_minus());
  auto c = classify_support(f, 1e-6);
  EXPECT_FALSE(c.has_minus());
  EXPECT_NEAR(total_length(c.zero), 0.5, 1e-12);
}

TEST(Weights, CustomSamplesFile) {
  auto m = build_mesh(0, 1, 4);
  const std::string path = ::testing::TempDir() + "plap_weight_samples.txt";
  {
    std::ofstream out(path);
    for (int k = 0; k < 8; ++k) out << (k < 4 ? 1.0 : -1.0) << "\n";
  }
  auto f = load_weight_samples(m, path);
  EXPECT_EQ(f.samples()[0], 1.0);
  EXPECT_EQ(f.samples()[7], -1.0);
  {
    std::ofstream out(path);
    out << "1 2 3\n";
  }
  EXPECT_THROW(load_weight_samples(m, path), InvalidArgument);
  EXPECT_THROW(load_weight_samples(m, path + ".missing"), InvalidArgument);
}
