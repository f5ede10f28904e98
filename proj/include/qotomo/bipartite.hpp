#pragma once

// Dense complex linear algebra and the correspondence between d x d matrices
// and vectors of the bipartite space H (x) H.
//
// Convention: amplitude (i, j) of |psi>> = sum_ij psi_ij |i> (x) |j> sits at
// flat index i * d + j, i.e. the first tensor factor is the matrix row.

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "qotomo/errors.hpp"

namespace qotomo {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;

/// Reciprocal condition estimate below which inverse() refuses to invert.
inline constexpr double kMinReciprocalCondition = 1e-12;

/// Absolute tolerance scaled with the dimension it applies to.
inline double dim_tolerance(Eigen::Index d, double base = 1e-10) {
  return base * static_cast<double>(d);
}

/// Vector of H (x) H, indexable by the pair (i, j).
class BipartiteVector {
public:
  BipartiteVector() = default;
  explicit BipartiteVector(Eigen::Index dim)
      : dim_(dim), amplitudes_(ComplexVector::Zero(dim * dim)) {}
  BipartiteVector(Eigen::Index dim, ComplexVector amplitudes)
      : dim_(dim), amplitudes_(std::move(amplitudes)) {
    if (dim_ <= 0 || amplitudes_.size() != dim_ * dim_)
      throw ShapeError("BipartiteVector: amplitude count must be dim^2");
  }

  Eigen::Index dim() const { return dim_; }
  const ComplexVector& amplitudes() const { return amplitudes_; }
  ComplexVector& amplitudes() { return amplitudes_; }

  Complex operator()(Eigen::Index i, Eigen::Index j) const { return amplitudes_(i * dim_ + j); }
  Complex& operator()(Eigen::Index i, Eigen::Index j) { return amplitudes_(i * dim_ + j); }

  double norm() const { return amplitudes_.norm(); }

private:
  Eigen::Index dim_ = 0;
  ComplexVector amplitudes_;
};

inline void require_square(const ComplexMatrix& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ShapeError(std::string(who) + ": expected a non-empty square matrix, got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

inline void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(who) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

inline bool all_finite(const ComplexMatrix& m) {
  return m.allFinite();
}

inline BipartiteVector vec(const ComplexMatrix& m) {
  require_square(m, "vec");
  const Eigen::Index d = m.rows();
  BipartiteVector v(d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) v(i, j) = m(i, j);
  return v;
}

inline ComplexMatrix unvec(const BipartiteVector& v) {
  const Eigen::Index d = v.dim();
  ComplexMatrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = v(i, j);
  return m;
}

/// Unvec of a raw amplitude vector of length d^2.
inline ComplexMatrix unvec(const ComplexVector& amplitudes) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(amplitudes.size()))));
  return unvec(BipartiteVector(d, amplitudes));
}

inline double hs_norm(const ComplexMatrix& m) {
  return m.norm();
}

/// Tr(M^dagger N).
inline Complex hs_inner(const ComplexMatrix& m, const ComplexMatrix& n) {
  require_same_shape(m, n, "hs_inner");
  return (m.conjugate().cwiseProduct(n)).sum();
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline ComplexMatrix conj(const ComplexMatrix& m) {
  return m.conjugate();
}

inline ComplexMatrix transpose(const ComplexMatrix& m) {
  return m.transpose();
}

/// Integer square root of a composite dimension d^2; throws unless exact.
inline Eigen::Index composite_root(Eigen::Index n, const char* who) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (d <= 0 || d * d != n)
    throw ShapeError(std::string(who) + ": dimension " + std::to_string(n) + " is not a perfect square");
  return d;
}

/// (Tr_2 X)_{ab} = sum_k X_{(a,k),(b,k)}.
inline ComplexMatrix partial_trace_2(const ComplexMatrix& x) {
  require_square(x, "partial_trace_2");
  const Eigen::Index d = composite_root(x.rows(), "partial_trace_2");
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index k = 0; k < d; ++k) out(a, b) += x(a * d + k, b * d + k);
  return out;
}

/// (Tr_1 X)_{ab} = sum_k X_{(k,a),(k,b)}.
inline ComplexMatrix partial_trace_1(const ComplexMatrix& x) {
  require_square(x, "partial_trace_1");
  const Eigen::Index d = composite_root(x.rows(), "partial_trace_1");
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index k = 0; k < d; ++k) out(a, b) += x(k * d + a, k * d + b);
  return out;
}

/// Inverse through a pivoted LU factorization. Refuses matrices whose
/// reciprocal condition estimate falls below kMinReciprocalCondition.
inline ComplexMatrix inverse(const ComplexMatrix& m) {
  require_square(m, "inverse");
  if (!all_finite(m)) throw NonInvertibleEntangler("matrix has non-finite entries");
  const Eigen::VectorXd sv = Eigen::JacobiSVD<ComplexMatrix>(m).singularValues();
  const double rcond = sv.size() == 0 || sv(0) == 0.0 ? 0.0 : sv(sv.size() - 1) / sv(0);
  if (!(rcond >= kMinReciprocalCondition))
    throw NonInvertibleEntangler("reciprocal condition number " + std::to_string(rcond) +
                                 " below " + std::to_string(kMinReciprocalCondition));
  return m.partialPivLu().inverse();
}

struct PhaseAlignment {
  Complex phase;   // unit modulus
  double distance; // || M - phase * N ||_HS
};

/// Global phase e^{i theta} minimizing ||M - e^{i theta} N||_HS.
inline PhaseAlignment phase_align(const ComplexMatrix& m, const ComplexMatrix& n) {
  require_same_shape(m, n, "phase_align");
  if (n.norm() == 0.0) throw ShapeError("phase_align: reference matrix is zero");
  const Complex overlap = hs_inner(n, m);
  const Complex phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex(1.0, 0.0);
  return {phase, (m - phase * n).norm()};
}

} // namespace qotomo
