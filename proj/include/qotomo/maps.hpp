#pragma once

// Quantum operations: pure contractions, Kraus maps and Choi matrices.
//
// The Choi matrix uses the unnormalized maximally entangled vector
// |I>> = sum_i |ii>, so R(I) = (E (x) I)(|I>><<I|) has trace Tr E(I) and
// E(rho) = Tr_2[(I (x) rho^T) R(I)] holds without extra factors of d.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/errors.hpp"

namespace qotomo {

inline double operator_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues()(0);
}

/// rho -> A rho A^dagger with ||A|| <= 1.
class PureOperation {
public:
  static constexpr double kNormSlack = 1e-10;

  explicit PureOperation(ComplexMatrix a) : a_(std::move(a)) {
    require_square(a_, "PureOperation");
    if (!all_finite(a_)) throw InvalidOperation("PureOperation: non-finite entries");
    const double norm = operator_norm(a_);
    if (norm > 1.0 + kNormSlack)
      throw InvalidOperation("PureOperation: operator norm " + std::to_string(norm) +
                             " exceeds 1, not a contraction");
  }

  const ComplexMatrix& matrix() const { return a_; }
  Eigen::Index dim() const { return a_.rows(); }

private:
  ComplexMatrix a_;
};

/// rho -> sum_n K_n rho K_n^dagger with sum_n K_n^dagger K_n <= I.
class KrausMap {
public:
  static constexpr double kBoundSlack = 1e-10;

  explicit KrausMap(std::vector<ComplexMatrix> kraus, bool validate = true) : kraus_(std::move(kraus)) {
    if (kraus_.empty()) throw InvalidOperation("KrausMap: empty Kraus list");
    for (const auto& k : kraus_) {
      require_square(k, "KrausMap");
      if (k.rows() != kraus_.front().rows())
        throw ShapeError("KrausMap: Kraus operators of different dimensions");
    }
    if (validate && bound_excess() > kBoundSlack)
      throw InvalidOperation("KrausMap: sum K^dagger K exceeds identity by " +
                             std::to_string(bound_excess()));
  }

  const std::vector<ComplexMatrix>& kraus() const { return kraus_; }
  Eigen::Index dim() const { return kraus_.front().rows(); }

  ComplexMatrix kraus_sum() const {
    ComplexMatrix s = ComplexMatrix::Zero(dim(), dim());
    for (const auto& k : kraus_) s += k.adjoint() * k;
    return s;
  }

  /// Largest eigenvalue of sum K^dagger K - I (<= 0 for a trace-decreasing map).
  double bound_excess() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(kraus_sum());
    return es.eigenvalues().maxCoeff() - 1.0;
  }

  ComplexMatrix apply(const ComplexMatrix& rho) const {
    require_same_shape(rho, kraus_.front(), "KrausMap::apply");
    ComplexMatrix out = ComplexMatrix::Zero(dim(), dim());
    for (const auto& k : kraus_) out += k * rho * k.adjoint();
    return out;
  }

private:
  std::vector<ComplexMatrix> kraus_;
};

/// d^2 x d^2 Choi matrix R(I).
struct ChoiMatrix {
  ComplexMatrix r;
  Eigen::Index dim = 0;

  static constexpr double kHermitianTolerance = 1e-10;
  static constexpr double kPsdTolerance = 1e-8;

  /// Wraps R and checks hermiticity and positivity.
  static ChoiMatrix validated(ComplexMatrix r) {
    ChoiMatrix c = unchecked(std::move(r));
    const double scale = std::max(1.0, c.r.norm());
    if ((c.r - c.r.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance * scale)
      throw NotCompletelyPositive("Choi matrix is not Hermitian");
    const double trace = std::max(c.r.trace().real(), 0.0);
    const double min_eig = c.min_eigenvalue();
    if (min_eig < -kPsdTolerance * std::max(trace, 1.0))
      throw NotCompletelyPositive("Choi matrix has eigenvalue " + std::to_string(min_eig));
    return c;
  }

  static ChoiMatrix unchecked(ComplexMatrix r) {
    require_square(r, "ChoiMatrix");
    const Eigen::Index d = composite_root(r.rows(), "ChoiMatrix");
    return ChoiMatrix{std::move(r), d};
  }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
};

struct PureOutput {
  ComplexMatrix phi; // normalized output state matrix
  double probability = 0.0;
};

/// |psi>> -> (A (x) I)|psi>> / ||A psi||_HS, together with p_A = ||A psi||^2.
inline PureOutput apply_pure(const PureOperation& op, const ComplexMatrix& psi) {
  require_same_shape(op.matrix(), psi, "apply_pure");
  ComplexMatrix out = op.matrix() * psi;
  const double norm = out.norm();
  if (!(norm > 0.0)) throw NumericalError("apply_pure", "operation annihilates the entangled input");
  return {out / norm, norm * norm};
}

/// A = phi psi^{-1} sqrt(p).
inline ComplexMatrix reconstruct_pure(const ComplexMatrix& phi, const ComplexMatrix& psi, double p) {
  require_same_shape(phi, psi, "reconstruct_pure");
  if (!(p > 0.0 && p <= 1.0 + 1e-12))
    throw NumericalError("reconstruct_pure", "occurrence probability must lie in (0, 1]");
  return phi * inverse(psi) * std::sqrt(p);
}

/// R(psi) = sum_n (K_n (x) I)|psi>><<psi|(K_n (x) I)^dagger.
inline ComplexMatrix apply_kraus_bipartite(const KrausMap& map, const ComplexMatrix& psi) {
  require_same_shape(map.kraus().front(), psi, "apply_kraus_bipartite");
  const Eigen::Index d = psi.rows();
  ComplexMatrix out = ComplexMatrix::Zero(d * d, d * d);
  for (const auto& k : map.kraus()) {
    const ComplexVector v = vec(k * psi).amplitudes();
    out.noalias() += v * v.adjoint();
  }
  return out;
}

/// R(I) = (I (x) psi^{-T}) R(psi) (I (x) psi^{-*}).
inline ChoiMatrix choi_normalize(const ComplexMatrix& r_psi, const ComplexMatrix& psi) {
  require_square(r_psi, "choi_normalize");
  require_square(psi, "choi_normalize");
  if (r_psi.rows() != psi.rows() * psi.rows())
    throw ShapeError("choi_normalize: R(psi) must be d^2 x d^2 for a d x d entangler");
  const ComplexMatrix inv = inverse(psi);
  const ComplexMatrix id = ComplexMatrix::Identity(psi.rows(), psi.rows());
  const ComplexMatrix left = kron(id, inv.transpose());
  const ComplexMatrix right = kron(id, inv.conjugate());
  return ChoiMatrix::unchecked(left * r_psi * right);
}

/// E(rho) = Tr_2[(I (x) rho^T) R(I)].
inline ComplexMatrix map_from_choi(const ChoiMatrix& choi, const ComplexMatrix& rho) {
  require_square(rho, "map_from_choi");
  const Eigen::Index d = choi.dim;
  if (rho.rows() != d) throw ShapeError("map_from_choi: rho dimension does not match the Choi matrix");
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      Complex acc = 0.0;
      for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) acc += rho(l, k) * choi.r(a * d + l, b * d + k);
      out(a, b) = acc;
    }
  return out;
}

inline ChoiMatrix kraus_to_choi(const KrausMap& map) {
  const Eigen::Index d = map.dim();
  ComplexMatrix r = ComplexMatrix::Zero(d * d, d * d);
  for (const auto& k : map.kraus()) {
    const ComplexVector v = vec(k).amplitudes();
    r.noalias() += v * v.adjoint();
  }
  return ChoiMatrix::unchecked(std::move(r));
}

/// Kraus operators from the eigendecomposition of R. Eigenvalues in
/// (-1e-8 Tr R, 0) are clipped; anything more negative is rejected. The
/// returned map is not checked against the trace-decreasing bound.
inline KrausMap choi_to_kraus(const ChoiMatrix& choi) {
  const ComplexMatrix herm = 0.5 * (choi.r + choi.r.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm);
  const double trace = std::max(herm.trace().real(), 0.0);
  const double clip = ChoiMatrix::kPsdTolerance * std::max(trace, 1e-300);
  std::vector<ComplexMatrix> kraus;
  for (Eigen::Index k = es.eigenvalues().size() - 1; k >= 0; --k) {
    const double lambda = es.eigenvalues()(k);
    if (lambda < -clip)
      throw NotCompletelyPositive("eigenvalue " + std::to_string(lambda) + " below clipping tolerance");
    if (lambda <= clip) continue;
    kraus.push_back(std::sqrt(lambda) * unvec(ComplexVector(es.eigenvectors().col(k))));
  }
  if (kraus.empty()) kraus.push_back(ComplexMatrix::Zero(choi.dim, choi.dim));
  return KrausMap(std::move(kraus), false);
}

} // namespace qotomo
