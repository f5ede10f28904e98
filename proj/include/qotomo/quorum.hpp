#pragma once

// Finite-dimensional quorums: a family of observables O(l) spanning the
// operator space together with the biorthogonal dual frame Q(l),
// Tr[Q(i)^dagger O(j)] = delta_ij, so that H = sum_l Tr[Q(l)^dagger H] O(l).

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/errors.hpp"

namespace qotomo {

/// Outcome of a single-system quorum measurement: which observable was
/// measured and which eigenvector was found.
struct FiniteRecord {
  int observable = 0;
  int eigen_index = 0;
};

class FiniteQuorum {
public:
  using Record = FiniteRecord;
  using Workspace = FiniteRecord;

  FiniteQuorum(std::vector<ComplexMatrix> observables, std::vector<double> weights)
      : observables_(std::move(observables)), weights_(std::move(weights)) {
    if (observables_.empty()) throw ShapeError("FiniteQuorum: no observables");
    dim_ = observables_.front().rows();
    if (weights_.size() != observables_.size())
      throw ShapeError("FiniteQuorum: one weight per observable required");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw ShapeError("FiniteQuorum: sampling weights must be positive");
      total += w;
    }
    for (double& w : weights_) w /= total;

    const Eigen::Index d2 = dim_ * dim_;
    const auto count = static_cast<Eigen::Index>(observables_.size());
    ComplexMatrix frame(d2, count);
    for (Eigen::Index l = 0; l < count; ++l) {
      const ComplexMatrix& o = observables_[static_cast<std::size_t>(l)];
      require_square(o, "FiniteQuorum");
      if (o.rows() != dim_) throw ShapeError("FiniteQuorum: observables of different dimensions");
      if ((o - o.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw ShapeError("FiniteQuorum: observable " + std::to_string(l) + " is not Hermitian");
      frame.col(l) = vec(o).amplitudes();
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(o);
      eigenvalues_.push_back(es.eigenvalues());
      eigenvectors_.push_back(es.eigenvectors());
    }

    const ComplexMatrix gram = frame.adjoint() * frame;
    Eigen::JacobiSVD<ComplexMatrix> svd(frame);
    const double tol = 1e-10 * std::max(1.0, svd.singularValues()(0));
    gram_rank_ = 0;
    for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
      if (svd.singularValues()(k) > tol) ++gram_rank_;
    if (gram_rank_ < d2)
      throw ShapeError("FiniteQuorum: observables span only " + std::to_string(gram_rank_) +
                       " of " + std::to_string(d2) + " operator dimensions");

    // Q(i) = sum_k conj(G^+)_{ik} O(k)
    const ComplexMatrix gram_pinv = gram.completeOrthogonalDecomposition().pseudoInverse();
    const ComplexMatrix coeffs = gram_pinv.conjugate();
    for (Eigen::Index i = 0; i < count; ++i) {
      ComplexMatrix q = ComplexMatrix::Zero(dim_, dim_);
      for (Eigen::Index k = 0; k < count; ++k) q += coeffs(i, k) * observables_[static_cast<std::size_t>(k)];
      duals_.push_back(std::move(q));
    }
  }

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return observables_.size(); }
  Eigen::Index gram_rank() const { return gram_rank_; }

  const std::vector<ComplexMatrix>& observables() const { return observables_; }
  const std::vector<ComplexMatrix>& duals() const { return duals_; }
  const std::vector<double>& weights() const { return weights_; }
  const Eigen::VectorXd& eigenvalues(std::size_t l) const { return eigenvalues_[l]; }
  const ComplexMatrix& eigenvectors(std::size_t l) const { return eigenvectors_[l]; }

  void prepare(const Record& r, Workspace& ws) const {
    if (r.observable < 0 || static_cast<std::size_t>(r.observable) >= observables_.size() || r.eigen_index < 0 ||
        r.eigen_index >= dim_)
      throw ShapeError("FiniteQuorum: record outside the quorum");
    ws = r;
  }

  /// Single-outcome unbiased estimate of Tr[rho H].
  Complex estimate(const ComplexMatrix& h, const Record& r) const {
    const auto l = static_cast<std::size_t>(r.observable);
    return hs_inner(duals_[l], h) * eigenvalues_[l](r.eigen_index) / weights_[l];
  }

  /// Single-outcome unbiased estimate of Tr[rho |row><col|] = <col|rho|row>.
  Complex dyad(int row, int col, const Record& r) const {
    const auto l = static_cast<std::size_t>(r.observable);
    return std::conj(duals_[l](row, col)) * eigenvalues_[l](r.eigen_index) / weights_[l];
  }

private:
  Eigen::Index dim_ = 0;
  std::vector<ComplexMatrix> observables_;
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> eigenvalues_;
  std::vector<ComplexMatrix> eigenvectors_;
  std::vector<ComplexMatrix> duals_;
  Eigen::Index gram_rank_ = 0;
};

/// Generalized Gell-Mann matrices plus the identity: d^2 Hermitian
/// observables. For d = 2 these are sigma_x, sigma_y, sigma_z and I.
inline std::vector<ComplexMatrix> gell_mann_observables(int dim) {
  std::vector<ComplexMatrix> out;
  const Complex i_unit(0.0, 1.0);
  for (int j = 0; j < dim; ++j)
    for (int k = j + 1; k < dim; ++k) {
      ComplexMatrix sym = ComplexMatrix::Zero(dim, dim);
      sym(j, k) = sym(k, j) = 1.0;
      out.push_back(sym);
      ComplexMatrix anti = ComplexMatrix::Zero(dim, dim);
      anti(j, k) = -i_unit;
      anti(k, j) = i_unit;
      out.push_back(anti);
    }
  for (int l = 1; l < dim; ++l) {
    ComplexMatrix diag = ComplexMatrix::Zero(dim, dim);
    const double scale = std::sqrt(2.0 / (l * (l + 1.0)));
    for (int j = 0; j < l; ++j) diag(j, j) = scale;
    diag(l, l) = -scale * l;
    out.push_back(diag);
  }
  out.push_back(ComplexMatrix::Identity(dim, dim));
  return out;
}

/// Quorum of d^2 observables with uniform sampling weights.
inline FiniteQuorum build_finite_quorum(int dim) {
  if (dim < 2) throw ShapeError("build_finite_quorum: dim must be >= 2");
  auto observables = gell_mann_observables(dim);
  std::vector<double> weights(observables.size(), 1.0);
  return FiniteQuorum(std::move(observables), std::move(weights));
}

/// c_l = Tr[Q(l)^dagger H], so that H = sum_l c_l O(l).
inline std::vector<Complex> expand_in_quorum(const ComplexMatrix& h, const FiniteQuorum& q) {
  if (h.rows() != q.dim() || h.cols() != q.dim()) throw ShapeError("expand_in_quorum: dimension mismatch");
  std::vector<Complex> c;
  c.reserve(q.size());
  for (const auto& dual : q.duals()) c.push_back(hs_inner(dual, h));
  return c;
}

inline ComplexMatrix resum_quorum(const std::vector<Complex>& coeffs, const FiniteQuorum& q) {
  ComplexMatrix h = ComplexMatrix::Zero(q.dim(), q.dim());
  for (std::size_t l = 0; l < coeffs.size(); ++l) h += coeffs[l] * q.observables()[l];
  return h;
}

} // namespace qotomo
