#pragma once

// Fock-basis states and the example operation of the optical scheme:
// the twin beam from parametric downconversion and the displacement D(z).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qotomo/bipartite.hpp"
#include "qotomo/errors.hpp"
#include "qotomo/maps.hpp"

namespace qotomo {

/// Extra Fock levels used when exponentiating a truncated generator.
inline constexpr int kGuardBand = 8;

/// Default truncation for a twin beam of mean photon number nbar.
inline int default_dim_cut(double nbar) {
  return std::max(16, static_cast<int>(std::ceil(8.0 * (nbar + 1.0))));
}

inline ComplexMatrix annihilation_matrix(int dim) {
  ComplexMatrix a = ComplexMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

struct TwinBeamState {
  double nbar = 0.0;
  int dim_cut = 0;
  double lambda = 0.0;           // real positive, lambda^2 = nbar / (nbar + 1)
  ComplexMatrix psi;             // diagonal, psi_nn = sqrt(1 - lambda^2) lambda^n
  double truncation_deficit = 0; // 1 - sum_{n < dim_cut} psi_nn^2
  std::optional<std::string> warning;
};

inline constexpr double kDefaultMaxDeficit = 1e-3;

/// Twin beam truncated at dim_cut. The amplitudes are not renormalized;
/// the missing weight is reported as truncation_deficit.
inline TwinBeamState twin_beam(double nbar, int dim_cut, double max_deficit = kDefaultMaxDeficit) {
  if (!(nbar >= 0.0) || !std::isfinite(nbar)) throw ShapeError("twin_beam: nbar must be >= 0");
  if (dim_cut < 1) throw ShapeError("twin_beam: dim_cut must be positive");
  TwinBeamState s;
  s.nbar = nbar;
  s.dim_cut = dim_cut;
  const double lambda2 = nbar / (nbar + 1.0);
  s.lambda = std::sqrt(lambda2);
  s.psi = ComplexMatrix::Zero(dim_cut, dim_cut);
  const double amp0 = std::sqrt(1.0 - lambda2);
  double kept = 0.0;
  for (int n = 0; n < dim_cut; ++n) {
    const double amp = amp0 * std::pow(s.lambda, n);
    s.psi(n, n) = amp;
    kept += amp * amp;
  }
  s.truncation_deficit = std::max(0.0, 1.0 - kept);
  if (s.truncation_deficit > max_deficit)
    s.warning = "twin beam truncation deficit " + std::to_string(s.truncation_deficit) +
                " exceeds bound " + std::to_string(max_deficit) + "; increase dim_cut";
  return s;
}

struct DisplacementOp {
  Complex z;
  int dim_cut = 0;
  ComplexMatrix matrix;

  PureOperation as_operation() const { return PureOperation(matrix); }
};

/// Truncated D(z) = exp(z a^dag - z^* a), exponentiated at dim_cut + guard
/// band and cropped to dim_cut.
inline DisplacementOp displacement_matrix(Complex z, int dim_cut, int guard = kGuardBand) {
  if (dim_cut < 2) throw ShapeError("displacement_matrix: dim_cut must be >= 2");
  const int big = dim_cut + guard;
  const ComplexMatrix a = annihilation_matrix(big);
  const ComplexMatrix generator = z * a.adjoint() - std::conj(z) * a;
  const ComplexMatrix full = generator.exp();
  return {z, dim_cut, full.topLeftCorner(dim_cut, dim_cut)};
}

inline ComplexMatrix fock_density(int n, int dim) {
  ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
  rho(n, n) = 1.0;
  return rho;
}

/// Truncated coherent state |alpha><alpha|.
inline ComplexMatrix coherent_density(Complex alpha, int dim) {
  ComplexVector v(dim);
  const double env = std::exp(-0.5 * std::norm(alpha));
  Complex amp = env;
  for (int n = 0; n < dim; ++n) {
    if (n > 0) amp *= alpha / std::sqrt(static_cast<double>(n));
    v(n) = amp;
  }
  return v * v.adjoint();
}

/// Truncated thermal state with geometric weights.
inline ComplexMatrix thermal_density(double nbar, int dim) {
  ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
  const double q = nbar / (nbar + 1.0);
  for (int n = 0; n < dim; ++n) rho(n, n) = (1.0 - q) * std::pow(q, n);
  return rho;
}

} // namespace qotomo
