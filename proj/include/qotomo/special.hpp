#pragma once

// Special functions of the single-mode Fock basis.
//
// Quadratures follow X_phi = (a^dag e^{i phi} + a e^{-i phi}) / 2, so the
// vacuum has <X^2> = 1/4 and the position wavefunctions are
//   psi_n(x) = (2/pi)^{1/4} H_n(sqrt(2) x) e^{-x^2} / sqrt(2^n n!).

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace qotomo {

/// Generalized Laguerre polynomial L_n^{(alpha)}(x) by upward recurrence.
inline double laguerre(int n, double alpha, double x) {
  if (n < 0) return 0.0;
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 1.0 + alpha - x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Fills out[n] = psi_n(x) for n < out.size().
inline void quadrature_wavefunctions(double x, std::span<double> out) {
  if (out.empty()) return;
  const double norm0 = std::pow(2.0 / std::numbers::pi, 0.25);
  out[0] = norm0 * std::exp(-x * x);
  if (out.size() == 1) return;
  out[1] = 2.0 * x * out[0];
  for (std::size_t n = 1; n + 1 < out.size(); ++n) {
    const double nn = static_cast<double>(n);
    out[n + 1] = (2.0 * x * out[n] - std::sqrt(nn) * out[n - 1]) / std::sqrt(nn + 1.0);
  }
}

inline std::vector<double> quadrature_wavefunctions(double x, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  quadrature_wavefunctions(x, out);
  return out;
}

inline std::complex<double> ipow(std::complex<double> z, int k) {
  std::complex<double> out(1.0, 0.0);
  for (int i = 0; i < k; ++i) out *= z;
  return out;
}

/// <n|D(beta)|m> from the Laguerre closed form.
inline std::complex<double> displacement_element(int n, int m, std::complex<double> beta) {
  const double r2 = std::norm(beta);
  const double envelope = std::exp(-0.5 * r2);
  if (n >= m) {
    const int delta = n - m;
    const double ratio = std::exp(0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0)));
    return ratio * ipow(beta, delta) * envelope * laguerre(m, delta, r2);
  }
  const int delta = m - n;
  const double ratio = std::exp(0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)));
  return ratio * ipow(-std::conj(beta), delta) * envelope * laguerre(n, delta, r2);
}

} // namespace qotomo
