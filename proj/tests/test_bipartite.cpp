#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qotomo/bipartite.hpp"
#include "qotomo/random.hpp"

using namespace qotomo;

namespace {

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

TEST(Vec, IdentityAndSingleEntry) {
  const BipartiteVector v = vec(ComplexMatrix::Identity(2, 2));
  EXPECT_EQ(v.amplitudes()(0), Complex(1.0));
  EXPECT_EQ(v.amplitudes()(1), Complex(0.0));
  EXPECT_EQ(v.amplitudes()(2), Complex(0.0));
  EXPECT_EQ(v.amplitudes()(3), Complex(1.0));

  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  const BipartiteVector w = vec(m);
  EXPECT_EQ(w(0, 1), Complex(1.0));
  EXPECT_DOUBLE_EQ(w.amplitudes().cwiseAbs().sum(), 1.0);
}

TEST(Vec, RoundTripAndNorm) {
  std::mt19937_64 rng(1);
  for (int d = 1; d <= 32; d += 7) {
    const ComplexMatrix m = random_complex_matrix(d, d, rng);
    EXPECT_EQ(unvec(vec(m)), m);
    EXPECT_NEAR(vec(m).norm(), hs_norm(m), 1e-12 * hs_norm(m));
  }
}

TEST(Vec, MaximallyEntangled) {
  ComplexVector amps = ComplexVector::Zero(4);
  amps(0) = amps(3) = 1.0 / std::sqrt(2.0);
  EXPECT_LT(max_abs(unvec(amps) - ComplexMatrix::Identity(2, 2) / std::sqrt(2.0)), 1e-15);
}

TEST(Vec, RejectsNonSquare) { EXPECT_THROW(vec(ComplexMatrix::Zero(2, 3)), ShapeError); }

TEST(Vec, KroneckerIdentity) {
  // (A (x) C^T) vec(B) = vec(A B C), checked by brute-force index sums.
  std::mt19937_64 rng(2);
  const int d = 3;
  const ComplexMatrix a = random_complex_matrix(d, d, rng), b = random_complex_matrix(d, d, rng),
                      c = random_complex_matrix(d, d, rng);
  ComplexVector lhs = ComplexVector::Zero(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) lhs(i * d + j) += a(i, k) * c(l, j) * b(k, l);
  EXPECT_LT((lhs - vec(a * b * c).amplitudes()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((kron(a, c.transpose()) * vec(b).amplitudes() - lhs).cwiseAbs().maxCoeff(), 1e-12);
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  EXPECT_LT((kron(a, id) * vec(b).amplitudes() - vec(a * b).amplitudes()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HilbertSchmidt, NormAndInner) {
  EXPECT_NEAR(hs_norm(ComplexMatrix::Identity(3, 3)), std::sqrt(3.0), 1e-15);
  std::mt19937_64 rng(3);
  const ComplexMatrix m = random_complex_matrix(4, 4, rng);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sum += std::norm(m(i, j));
  EXPECT_NEAR(hs_norm(m) * hs_norm(m), sum, 1e-12);
  EXPECT_NEAR(hs_inner(m, m).real(), sum, 1e-12);
  EXPECT_NEAR(hs_inner(m, m).imag(), 0.0, 1e-12);
  EXPECT_THROW(hs_inner(m, ComplexMatrix::Zero(3, 3)), ShapeError);
}

TEST(PartialTrace, FactorizedAndMaximallyEntangled) {
  std::mt19937_64 rng(4);
  const ComplexMatrix rho = random_density(3, rng), sigma = random_complex_matrix(3, 3, rng);
  EXPECT_LT(max_abs(partial_trace_2(kron(rho, sigma)) - rho * sigma.trace()), 1e-12);

  ComplexVector ii = ComplexVector::Zero(4);
  ii(0) = ii(3) = 1.0;
  const ComplexMatrix proj = ii * ii.adjoint();
  ComplexMatrix brute = ComplexMatrix::Zero(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int k = 0; k < 2; ++k) brute(a, b) += proj(a * 2 + k, b * 2 + k);
  EXPECT_LT(max_abs(partial_trace_2(proj) - brute), 1e-15);
  EXPECT_LT(max_abs(brute - ComplexMatrix::Identity(2, 2)), 1e-15);

  const ComplexMatrix x = random_complex_matrix(9, 9, rng);
  EXPECT_NEAR(std::abs(partial_trace_2(x).trace() - x.trace()), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(partial_trace_1(x).trace() - x.trace()), 0.0, 1e-12);
  EXPECT_THROW(partial_trace_2(ComplexMatrix::Zero(5, 5)), ShapeError);
}

TEST(PartialTrace, Linear) {
  std::mt19937_64 rng(5);
  const ComplexMatrix x = random_complex_matrix(4, 4, rng), y = random_complex_matrix(4, 4, rng);
  const Complex c(0.3, -1.2);
  EXPECT_LT(max_abs(partial_trace_2(x + c * y) - partial_trace_2(x) - c * partial_trace_2(y)), 1e-12);
}

TEST(Inverse, DiagonalAndRandom) {
  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  d(0, 0) = 0.5;
  d(1, 1) = std::sqrt(0.75) * 0.5;
  const ComplexMatrix inv = inverse(d);
  EXPECT_NEAR(inv(0, 0).real(), 2.0, 1e-14);
  EXPECT_NEAR(inv(1, 1).real(), 1.0 / (0.5 * std::sqrt(0.75)), 1e-12);
  EXPECT_EQ(kron(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2)), ComplexMatrix::Identity(4, 4));

  std::mt19937_64 rng(6);
  const ComplexMatrix m = random_complex_matrix(4, 4, rng) + 3.0 * ComplexMatrix::Identity(4, 4);
  EXPECT_LT(max_abs(m * inverse(m) - ComplexMatrix::Identity(4, 4)), 1e-10);
  EXPECT_LT(max_abs(inverse(m) * m - ComplexMatrix::Identity(4, 4)), 1e-10 * 4);
}

TEST(Inverse, RejectsSingularAndIllConditioned) {
  ComplexMatrix s = ComplexMatrix::Identity(3, 3);
  s(2, 2) = 0.0;
  EXPECT_THROW(inverse(s), NonInvertibleEntangler);
  s(2, 2) = 1e-14;
  EXPECT_THROW(inverse(s), NonInvertibleEntangler);
  try {
    inverse(s);
  } catch (const NonInvertibleEntangler& e) {
    EXPECT_NE(std::string(e.what()).find("non-invertible entangler"), std::string::npos);
  }
}

TEST(ConjTranspose, Basic) {
  ComplexMatrix m(1, 2);
  m << Complex(1, 2), Complex(3, -4);
  EXPECT_EQ(conj(m)(0, 1), Complex(3, 4));
  EXPECT_EQ(transpose(m).rows(), 2);
  EXPECT_EQ(transpose(m)(1, 0), Complex(3, -4));
}

TEST(PhaseAlign, TrivialCases) {
  std::mt19937_64 rng(7);
  const ComplexMatrix n = random_complex_matrix(3, 3, rng);
  const PhaseAlignment a = phase_align(Complex(0, 1) * n, n);
  EXPECT_NEAR(std::abs(a.phase - Complex(0, 1)), 0.0, 1e-14);
  EXPECT_NEAR(a.distance, 0.0, 1e-12);
  const PhaseAlignment b = phase_align(n, n);
  EXPECT_NEAR(std::abs(b.phase - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(b.distance, 0.0, 1e-12);
  EXPECT_THROW(phase_align(n, ComplexMatrix::Zero(3, 3)), ShapeError);
}

TEST(PhaseAlign, BeatsBruteForceScan) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> theta(0.0, 2.0 * std::numbers::pi);
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexMatrix m = random_complex_matrix(3, 3, rng), n = random_complex_matrix(3, 3, rng);
    const PhaseAlignment a = phase_align(m, n);
    for (int probe = 0; probe < 100; ++probe)
      EXPECT_LE(a.distance, (m - std::polar(1.0, theta(rng)) * n).norm() + 1e-12);
  }
}

TEST(PhaseAlign, RecoversRandomPhase) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> alpha(-std::numbers::pi, std::numbers::pi);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix m = random_complex_matrix(4, 4, rng);
    const Complex p = std::polar(1.0, alpha(rng));
    EXPECT_LT(std::abs(phase_align(p * m, m).phase - p), 1e-10);
  }
}

} // namespace
