#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qotomo/maps.hpp"
#include "qotomo/random.hpp"
#include "qotomo/special.hpp"
#include "qotomo/states.hpp"

using namespace qotomo;

namespace {

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

ComplexMatrix max_entangled(int d) { return ComplexMatrix::Identity(d, d) / std::sqrt(static_cast<double>(d)); }

ComplexMatrix projector0(int d) {
  ComplexMatrix p = ComplexMatrix::Zero(d, d);
  p(0, 0) = 1.0;
  return p;
}

TEST(PureOperation, RejectsExpansion) {
  EXPECT_NO_THROW(PureOperation(ComplexMatrix::Identity(3, 3)));
  EXPECT_THROW(PureOperation(1.01 * ComplexMatrix::Identity(3, 3)), InvalidOperation);
}

TEST(ApplyPure, IdentityAndProjector) {
  std::mt19937_64 rng(11);
  const ComplexMatrix psi = random_entangler(3, rng);
  const PureOutput id = apply_pure(PureOperation(ComplexMatrix::Identity(3, 3)), psi);
  EXPECT_LT(max_abs(id.phi - psi), 1e-14);
  EXPECT_NEAR(id.probability, 1.0, 1e-14);

  const PureOutput pr = apply_pure(PureOperation(projector0(2)), max_entangled(2));
  EXPECT_LT(max_abs(pr.phi - projector0(2)), 1e-14);
  EXPECT_NEAR(pr.probability, 0.5, 1e-14);
  EXPECT_NEAR(hs_norm(pr.phi), 1.0, 1e-14);
}

TEST(ApplyPure, AnnihilationIsAnError) {
  ComplexMatrix a = ComplexMatrix::Zero(2, 2);
  a(1, 1) = 1.0;
  EXPECT_THROW(apply_pure(PureOperation(a), projector0(2)), NumericalError);
}

TEST(ApplyPure, DisplacementOnTwinBeamIsUnitary) {
  const TwinBeamState tb = twin_beam(5.0, 16, 1.0);
  const ComplexMatrix d16 = displacement_matrix(Complex(1.0, 0.0), 16).matrix;
  const PureOutput out = apply_pure(PureOperation(d16), tb.psi / hs_norm(tb.psi));
  // Oracle: the same probability computed with a much larger cutoff.
  const ComplexMatrix d64 = displacement_matrix(Complex(1.0, 0.0), 64).matrix;
  ComplexMatrix psi64 = ComplexMatrix::Zero(64, 64);
  psi64.topLeftCorner(16, 16) = tb.psi / hs_norm(tb.psi);
  const double p64 = (d64 * psi64).squaredNorm();
  EXPECT_NEAR(p64, 1.0, 1e-6);
  // Probability kept inside the 16-level cutoff.
  EXPECT_NEAR(out.probability, (d64 * psi64).topRows(16).squaredNorm(), 1e-6);
  EXPECT_LT(out.probability, 1.0);
}

TEST(ReconstructPure, RoundTrips) {
  std::mt19937_64 rng(12);
  const ComplexMatrix psi = random_entangler(4, rng);
  EXPECT_LT(max_abs(reconstruct_pure(psi, psi, 1.0) - ComplexMatrix::Identity(4, 4)), 1e-12);
  for (int t = 0; t < 5; ++t) {
    const ComplexMatrix a = random_contraction(4, rng);
    const PureOutput out = apply_pure(PureOperation(a), psi);
    const ComplexMatrix rec = reconstruct_pure(out.phi, psi, out.probability);
    EXPECT_LT(phase_align(rec, a).distance, 1e-10);
  }
}

TEST(ReconstructPure, TwinBeamDisplacementWindow) {
  const int dim = 24;
  const TwinBeamState tb = twin_beam(3.0, dim, 1.0);
  const ComplexMatrix d = displacement_matrix(Complex(1.0, 0.0), dim).matrix;
  const ComplexMatrix psi = tb.psi / hs_norm(tb.psi);
  const PureOutput out = apply_pure(PureOperation(d), psi);
  const ComplexMatrix rec = reconstruct_pure(out.phi, psi, out.probability);
  const ComplexMatrix truth = displacement_matrix(Complex(1.0, 0.0), 2 * dim).matrix.topLeftCorner(9, 9);
  EXPECT_LT(phase_align(rec.topLeftCorner(9, 9), truth).distance, 1e-6);
}

TEST(Kraus, BipartiteAction) {
  const ComplexMatrix psi = max_entangled(2);
  const ComplexMatrix r = apply_kraus_bipartite(KrausMap({ComplexMatrix::Identity(2, 2)}), psi);
  const ComplexVector v = vec(psi).amplitudes();
  EXPECT_LT(max_abs(r - v * v.adjoint()), 1e-15);
  EXPECT_NEAR(r.trace().real(), 1.0, 1e-15);

  ComplexMatrix sx = ComplexMatrix::Zero(2, 2);
  sx(0, 1) = sx(1, 0) = 1.0;
  const KrausMap dep({std::sqrt(0.5) * ComplexMatrix::Identity(2, 2), std::sqrt(0.5) * sx});
  const ComplexMatrix rd = apply_kraus_bipartite(dep, psi);
  EXPECT_NEAR(rd.trace().real(), 1.0, 1e-14);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rd);
  int rank = 0;
  for (int k = 0; k < 4; ++k) rank += es.eigenvalues()(k) > 1e-12;
  EXPECT_EQ(rank, 2);

  const ComplexMatrix rs = apply_kraus_bipartite(KrausMap({0.5 * ComplexMatrix::Identity(2, 2)}), psi);
  EXPECT_NEAR(rs.trace().real(), 0.25, 1e-15);
}

TEST(Kraus, RejectsTraceIncreasing) {
  EXPECT_THROW(KrausMap({ComplexMatrix::Identity(2, 2), 0.5 * ComplexMatrix::Identity(2, 2)}), InvalidOperation);
}

TEST(Kraus, TraceDecreasing) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 10; ++t) {
    const KrausMap map = random_kraus_map(3, 3, rng);
    EXPECT_LE(map.apply(random_density(3, rng)).trace().real(), 1.0 + 1e-10);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<ComplexMatrix>(kraus_to_choi(map).r).eigenvalues().minCoeff(), -1e-8 * 3);
  }
}

TEST(Kraus, PureSpecialCase) {
  std::mt19937_64 rng(14);
  const ComplexMatrix a = random_contraction(3, rng);
  const ComplexMatrix psi = random_entangler(3, rng);
  const ComplexMatrix r = apply_kraus_bipartite(KrausMap({a}), psi);
  const ComplexVector v = vec(a * psi).amplitudes();
  EXPECT_LT(max_abs(r - v * v.adjoint()), 1e-14);
  EXPECT_NEAR(r.trace().real(), apply_pure(PureOperation(a), psi).probability, 1e-14);
}

TEST(Choi, NormalizeIdentityOnMaximallyEntangled) {
  const ComplexMatrix psi = max_entangled(3);
  const ChoiMatrix c = choi_normalize(apply_kraus_bipartite(KrausMap({ComplexMatrix::Identity(3, 3)}), psi), psi);
  const ComplexVector ii = vec(ComplexMatrix::Identity(3, 3)).amplitudes();
  EXPECT_LT(max_abs(c.r - ii * ii.adjoint()), 1e-13);
  EXPECT_NEAR(c.r.trace().real(), 3.0, 1e-13);
}

TEST(Choi, NormalizeOnTwinBeamMatchesDirect) {
  std::mt19937_64 rng(15);
  const int d = 6;
  const KrausMap map = random_kraus_map(d, 2, rng);
  const TwinBeamState tb = twin_beam(1.0, d, 1.0);
  const ChoiMatrix c = choi_normalize(apply_kraus_bipartite(map, tb.psi), tb.psi);
  const ComplexMatrix direct = kraus_to_choi(map).r;
  double worst = 0.0;
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 4; ++j)
      for (int l = 0; l <= 4; ++l)
        for (int k = 0; k <= 4; ++k) worst = std::max(worst, std::abs(c.r(i * d + j, l * d + k) - direct(i * d + j, l * d + k)));
  EXPECT_LT(worst, 1e-8);
}

TEST(Choi, DiagonalEntanglerIndexFormula) {
  std::mt19937_64 rng(16);
  const int d = 3;
  const ComplexMatrix psi = twin_beam(2.0, d, 1.0).psi;
  const ComplexMatrix r_psi = apply_kraus_bipartite(random_kraus_map(d, 2, rng), psi);
  const ChoiMatrix c = choi_normalize(r_psi, psi);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k)
          EXPECT_LT(std::abs(c.r(i * d + j, l * d + k) -
                             r_psi(i * d + j, l * d + k) / (psi(j, j) * std::conj(psi(k, k)))),
                    1e-12);
}

TEST(Choi, MapFromChoi) {
  std::mt19937_64 rng(17);
  const ComplexVector ii = vec(ComplexMatrix::Identity(3, 3)).amplitudes();
  const ChoiMatrix id = ChoiMatrix::validated(ii * ii.adjoint());
  const ComplexMatrix rho = random_density(3, rng);
  EXPECT_LT(max_abs(map_from_choi(id, rho) - rho), 1e-14);

  const KrausMap map = random_kraus_map(3, 2, rng);
  const ComplexMatrix sigma = random_density(3, rng);
  ComplexMatrix direct = ComplexMatrix::Zero(3, 3);
  for (const auto& k : map.kraus()) direct += k * sigma * k.adjoint();
  EXPECT_LT(max_abs(map_from_choi(kraus_to_choi(map), sigma) - direct), 1e-12);

  // Unitary channel is trace preserving.
  const ComplexMatrix u = displacement_matrix(Complex(0.3, 0.1), 3, 40).matrix;
  Eigen::HouseholderQR<ComplexMatrix> qr(u);
  const ComplexMatrix q = qr.householderQ();
  const ComplexMatrix out = map_from_choi(kraus_to_choi(KrausMap({q})), ComplexMatrix::Identity(3, 3) / 3.0);
  EXPECT_NEAR(out.trace().real(), 1.0, 1e-12);
}

TEST(Choi, KrausRoundTrip) {
  const ChoiMatrix id = kraus_to_choi(KrausMap({ComplexMatrix::Identity(2, 2)}));
  Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(id.r).eigenvalues();
  EXPECT_NEAR(ev(3), 2.0, 1e-14);
  EXPECT_NEAR(ev.head(3).cwiseAbs().maxCoeff(), 0.0, 1e-14);

  std::mt19937_64 rng(18);
  const KrausMap map = random_kraus_map(3, 2, rng);
  const KrausMap back = choi_to_kraus(kraus_to_choi(map));
  for (int t = 0; t < 20; ++t) {
    const ComplexMatrix rho = random_density(3, rng);
    EXPECT_LT(max_abs(back.apply(rho) - map.apply(rho)), 1e-10);
  }
}

TEST(Choi, RejectsNegativeEigenvalue) {
  ComplexMatrix r = ComplexMatrix::Zero(4, 4);
  r(0, 0) = 1.0;
  r(3, 3) = -0.1;
  EXPECT_THROW(choi_to_kraus(ChoiMatrix::unchecked(r)), NotCompletelyPositive);
  EXPECT_THROW(ChoiMatrix::validated(r), NotCompletelyPositive);
}

TEST(Displacement, ZeroIsIdentity) {
  EXPECT_LT(max_abs(displacement_matrix(Complex(0.0, 0.0), 8).matrix - ComplexMatrix::Identity(8, 8)), 1e-14);
}

TEST(Displacement, VacuumElementAndLaguerreDiagonal) {
  const ComplexMatrix d = displacement_matrix(Complex(1.0, 0.0), 24).matrix;
  EXPECT_NEAR(d(0, 0).real(), 0.606531, 1e-6);
  for (int n = 0; n <= 8; ++n) {
    EXPECT_NEAR(d(n, n).real(), oracle::displacement_diag_z1(n), 1e-6) << n;
    EXPECT_NEAR(d(n, n).imag(), 0.0, 1e-10);
  }
  for (int n = 0; n <= 6; ++n)
    for (int m = 0; m <= 6; ++m) EXPECT_NEAR(std::abs(d(n, m) - oracle::displacement_real(n, m, 1.0)), 0.0, 1e-6);
}

TEST(Displacement, ClosedFormMatchesExponential) {
  const Complex z(0.7, -0.4);
  const ComplexMatrix d = displacement_matrix(z, 12).matrix;
  for (int n = 0; n < 8; ++n)
    for (int m = 0; m < 8; ++m) EXPECT_LT(std::abs(d(n, m) - displacement_element(n, m, z)), 1e-8);
}

TEST(Displacement, UnitaryOnInnerBlock) {
  const int dim = 24;
  const ComplexMatrix d = displacement_matrix(Complex(1.0, 0.5), dim).matrix;
  // Columns far from the cutoff lose no weight above it.
  const int inner = dim / 3;
  const ComplexMatrix g = (d.adjoint() * d).topLeftCorner(inner, inner);
  EXPECT_LT(max_abs(g - ComplexMatrix::Identity(inner, inner)), 1e-6);
  for (int n = 0; n < inner; ++n) EXPECT_NEAR(d.col(n).norm(), 1.0, 1e-6);
}

TEST(Laguerre, MatchesSeries) {
  for (int n = 0; n < 12; ++n)
    for (double x : {0.0, 0.5, 1.0, 3.7}) EXPECT_NEAR(laguerre(n, 0.0, x), oracle::laguerre_series(n, x), 1e-9);
}

TEST(TwinBeam, VacuumAndNbar3) {
  const TwinBeamState vac = twin_beam(0.0, 8);
  EXPECT_NEAR(vac.psi(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(max_abs(vac.psi) - 1.0, 0.0, 1e-15);
  EXPECT_NEAR(hs_norm(vac.psi), 1.0, 1e-15);

  const TwinBeamState tb = twin_beam(3.0, default_dim_cut(3.0));
  EXPECT_NEAR(tb.lambda * tb.lambda, 0.75, 1e-15);
  EXPECT_NEAR(tb.psi(0, 0).real(), 0.5, 1e-15);
  for (int n = 0; n < 5; ++n) EXPECT_NEAR(tb.psi(n, n).real(), 0.5 * std::pow(0.75, 0.5 * n), 1e-14);
  EXPECT_TRUE(tb.psi.isDiagonal());
}

TEST(TwinBeam, ReducedStateIsThermal) {
  for (double nbar : {0.5, 1.0, 3.0}) {
    const int dim = static_cast<int>(16 * (nbar + 1));
    const TwinBeamState tb = twin_beam(nbar, dim);
    const ComplexVector v = vec(tb.psi).amplitudes();
    const ComplexMatrix rho1 = partial_trace_2(v * v.adjoint());
    double mean_n = 0.0;
    for (int n = 0; n < dim; ++n) mean_n += n * rho1(n, n).real();
    EXPECT_NEAR(mean_n, nbar, 1e-6);
    const double l2 = nbar / (nbar + 1.0);
    for (int n = 0; n < 6; ++n) EXPECT_NEAR(rho1(n, n).real(), (1 - l2) * std::pow(l2, n), 1e-12);
  }
}

TEST(TwinBeam, DeficitWarning) {
  const TwinBeamState small = twin_beam(5.0, 10);
  EXPECT_GT(small.truncation_deficit, kDefaultMaxDeficit);
  EXPECT_TRUE(small.warning.has_value());
  const TwinBeamState ok = twin_beam(5.0, default_dim_cut(5.0));
  EXPECT_EQ(ok.dim_cut, 48);
  EXPECT_LT(ok.truncation_deficit, kDefaultMaxDeficit);
  EXPECT_FALSE(ok.warning.has_value());
  EXPECT_THROW(twin_beam(-1.0, 8), ShapeError);
}

TEST(States, DensitiesAreNormalized) {
  EXPECT_NEAR(coherent_density(Complex(1.0, 0.0), 40).trace().real(), 1.0, 1e-12);
  EXPECT_NEAR(thermal_density(1.0, 60).trace().real(), 1.0, 1e-12);
  EXPECT_NEAR(coherent_density(Complex(1.0, 0.0), 40)(0, 1).real(), std::exp(-1.0), 1e-12);
}

} // namespace
