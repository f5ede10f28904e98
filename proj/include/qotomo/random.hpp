#pragma once

// Random matrices for property checks: Ginibre draws from a seeded engine.

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/maps.hpp"

namespace qotomo {

template <class Engine>
ComplexMatrix random_complex_matrix(int rows, int cols, Engine& engine) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double re = g(engine);
      const double im = g(engine);
      m(i, j) = Complex(re, im);
    }
  return m;
}

/// Unit-trace positive matrix.
template <class Engine>
ComplexMatrix random_density(int dim, Engine& engine) {
  const ComplexMatrix g = random_complex_matrix(dim, dim, engine);
  ComplexMatrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

/// Matrix with operator norm `norm` (default strictly contractive).
template <class Engine>
ComplexMatrix random_contraction(int dim, Engine& engine, double norm = 0.9) {
  const ComplexMatrix g = random_complex_matrix(dim, dim, engine);
  return g * (norm / operator_norm(g));
}

/// Normalized bipartite amplitude matrix, invertible with probability one.
template <class Engine>
ComplexMatrix random_entangler(int dim, Engine& engine) {
  const ComplexMatrix g = random_complex_matrix(dim, dim, engine) + 2.0 * ComplexMatrix::Identity(dim, dim);
  return g / hs_norm(g);
}

/// Trace-decreasing map with `count` Kraus operators, sum K^dag K having
/// largest eigenvalue `bound`.
template <class Engine>
KrausMap random_kraus_map(int dim, int count, Engine& engine, double bound = 0.9) {
  std::vector<ComplexMatrix> ks;
  for (int k = 0; k < count; ++k) ks.push_back(random_complex_matrix(dim, dim, engine));
  ComplexMatrix s = ComplexMatrix::Zero(dim, dim);
  for (const auto& k : ks) s += k.adjoint() * k;
  const double top = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(s).eigenvalues().maxCoeff();
  for (auto& k : ks) k *= std::sqrt(bound / top);
  return KrausMap(std::move(ks));
}

} // namespace qotomo
