#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace rvlbm;
using namespace rvlbm::testing;

TEST(AmplificationMatrix, ZeroWavevectorIsCollision) {
  const auto spec = d2q5(0.2);
  const auto G = amplification_matrix<long double>(spec, {0.0, 0.0}, 0.1L);
  const auto C = collision_matrix<long double>(spec);
  EXPECT_LT(static_cast<double>((G.g.real() - C).cwiseAbs().maxCoeff()), 1e-18);
  const auto ev = eigenvalues(G.g);
  long double nearest = 1;
  for (const auto& z : ev) nearest = std::min(nearest, std::abs(z - LComplex(1)));
  EXPECT_LT(static_cast<double>(nearest), 1e-17);
}

TEST(AmplificationMatrix, FrozenRelaxationIsPureTransport) {
  auto spec = d1q3(vec({0.5, 0.3, 0.2}), vec({0, 1, 1}));
  spec.s.setZero();
  const auto G = amplification_matrix<long double>(spec, {0.7}, 0.3L);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      EXPECT_LT(static_cast<double>(std::abs(G.g(i, j))), 1e-18);
    }
  }
  for (const auto& z : eigenvalues(G.g)) EXPECT_NEAR(static_cast<double>(std::abs(z)), 1.0, 1e-17);
  // The +lambda branch of D1Q2 transport is exp(-i k lambda dt).
  auto q2 = d1q2(0.3, 1.0);
  q2.s.setZero();
  const auto g = dominant_eigenvalue(amplification_matrix<long double>(q2, {0.2}, 0.1L).g,
                                     std::polar(1.0L, -0.02L));
  EXPECT_LT(static_cast<double>(std::abs(g - std::polar(1.0L, -0.02L))), 1e-17);
}

TEST(DominantEigenvalue, UnitAtZeroWavevector) {
  const auto spec = d1q3_seeded(17, 0.3);
  const auto g = tracked_eigenvalue<long double>(spec, {0.0}, 0.05L);
  EXPECT_LT(static_cast<double>(std::abs(g - LComplex(1))), 1e-17);
}

TEST(DominantEigenvalue, AmbiguityIsDetected) {
  ComplexMatrix<long double> g = ComplexMatrix<long double>::Identity(2, 2);
  EXPECT_THROW(dominant_eigenvalue(g), BranchAmbiguity);
}

TEST(DominantEigenvalue, MatchesCharacteristicPolynomialRoots) {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-0.5, 0.5), k(-2.0, 2.0);
  for (int t = 0; t < 12; ++t) {
    const auto spec = t % 2 ? d1q3_seeded(rng(), u(rng)) : d2q5(u(rng));
    std::vector<double> kv(spec.dim());
    for (auto& v : kv) v = k(rng);
    const long double dt = 0.05L;
    const auto G = amplification_matrix<long double>(spec, kv, dt);
    const auto roots = polynomial_roots(characteristic_polynomial(G.g));
    LComplex best = roots[0];
    for (const auto& r : roots)
      if (std::abs(r - LComplex(1)) < std::abs(best - LComplex(1))) best = r;
    const auto g = tracked_eigenvalue<long double>(spec, kv, dt);
    EXPECT_LT(static_cast<double>(std::abs(g - best)), 1e-14) << "trial " << t;
  }
}

TEST(SymbolSeries, ZeroWavevectorGivesZeroRates) {
  const auto s = extract_symbol_series(d1q2(0.5, 1.5), {0.0}, geometric_dt_sequence(0.01, 5));
  EXPECT_LT(std::abs(s.mu0), 1e-15);
  EXPECT_LT(std::abs(s.mu1), 1e-13);
  EXPECT_LT(std::abs(s.mu2), 1e-11);
}

TEST(SymbolSeries, D1Q2AdvectionAndDiffusion) {
  const double k = 0.4;
  const auto s = extract_symbol_series(d1q2(0.5, 1.0), {k}, geometric_dt_sequence(2e-3 / k, 5));
  EXPECT_NEAR(s.mu0.real(), 0.0, 1e-12);
  EXPECT_NEAR(s.mu0.imag(), -0.5 * k, 1e-8 * 0.5 * k);
  // Classical D1Q2 diffusivity sigma (lambda^2 - c^2) = 0.5 * 0.75.
  EXPECT_NEAR(s.mu1.real(), -0.375 * k * k, 1e-6 * 0.375 * k * k);
  EXPECT_NEAR(s.mu1.imag(), 0.0, 1e-10);
}

TEST(SymbolSeries, RejectsShortSequences) {
  EXPECT_THROW(geometric_dt_sequence(0.1, 4), ValidationError);
  EXPECT_THROW(extract_symbol_series(d1q2(0.5, 1.0), {0.1}, {0.1, 0.05, 0.025}), ValidationError);
}

TEST(CompareWithPrediction, ZeroSigmaHasNoFirstOrderRate) {
  const auto rep = compare_with_prediction(d1q2(0.3, 2.0), default_k_samples(1));
  EXPECT_TRUE(rep.pass);
  for (const auto& s : rep.samples) EXPECT_LT(std::abs(s.mu[1]), 1e-8);
}

TEST(CompareWithPrediction, D1Q2FamilyAllOrdersPass) {
  for (double c : {0.0, 0.3, 0.6})
    for (double u : {0.0, 0.2, 0.5}) {
      const auto rep = compare_with_prediction(d1q2(c, 1.5, u), default_k_samples(1));
      EXPECT_TRUE(rep.pass) << c << " " << u;
      for (const auto& s : rep.samples)
        for (int l = 0; l < 3; ++l) EXPECT_TRUE(s.order_pass[l]);
    }
}

TEST(CompareWithPrediction, ShiftSweepKeepsLowOrders) {
  const auto base = compare_with_prediction(d2q5(0.0), default_k_samples(2));
  bool mu2_varies = false;
  for (double u : {0.2, 0.5}) {
    const auto rep = compare_with_prediction(d2q5(u), default_k_samples(2));
    ASSERT_TRUE(rep.pass);
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
      const auto& a = base.samples[i];
      const auto& b = rep.samples[i];
      EXPECT_LE(std::abs(a.mu[0] - b.mu[0]), std::max(1e-8 * std::abs(a.mu[0]), 1e-12));
      EXPECT_LE(std::abs(a.mu[1] - b.mu[1]), std::max(1e-6 * std::abs(a.mu[1]), 1e-10));
      mu2_varies = mu2_varies || std::abs(a.mu[2] - b.mu[2]) > 1e-6;
    }
  }
  EXPECT_TRUE(mu2_varies);
}

TEST(CompareWithPrediction, WrongPredictionFails) {
  const auto spec = d1q3_seeded(8, 0.2);
  auto eq = derive_equivalent_equation(spec, 3);
  eq.ops[1] *= -1.0;
  const auto rep = compare_with_prediction(spec, eq, default_k_samples(1));
  EXPECT_FALSE(rep.pass);
  for (const auto& s : rep.samples) {
    EXPECT_TRUE(s.order_pass[0]);
    EXPECT_FALSE(s.order_pass[1]);
  }
}

TEST(CompareWithPrediction, SortedAndStable) {
  auto ks = default_k_samples(2, 10);
  std::mt19937_64 rng(4);
  std::shuffle(ks.begin(), ks.end(), rng);
  const auto a = compare_with_prediction(d2q5(0.2), ks);
  EXPECT_TRUE(std::is_sorted(a.samples.begin(), a.samples.end(),
                             [](const auto& x, const auto& y) { return x.k < y.k; }));
  std::shuffle(ks.begin(), ks.end(), rng);
  const auto b = compare_with_prediction(d2q5(0.2), ks);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(to_csv(a), to_csv(b));
}

TEST(CompareWithPrediction, CsvHasOneRowPerWavevectorAndOrder) {
  const auto rep = compare_with_prediction(d1q2(0.3, 1.2), default_k_samples(1, 8));
  const auto csv = to_csv(rep);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 8 * 3);
  EXPECT_EQ(csv.rfind("sample,k,order,", 0), 0u);
}

TEST(DefaultSamples, WithinResolvedRange) {
  for (int d : {1, 2, 3})
    for (const auto& k : default_k_samples(d, 8)) {
      EXPECT_EQ(static_cast<int>(k.size()), d);
      EXPECT_GE(norm2(k), 0.05 - 1e-15);
      EXPECT_LE(norm2(k), 0.5 + 1e-15);
    }
}
