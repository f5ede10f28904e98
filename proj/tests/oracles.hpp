#pragma once

// Reference values computed independently of the library.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

inline double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

/// L_n(x) from its explicit finite series.
inline double laguerre_series(int n, double x) {
  double s = 0.0;
  for (int k = 0; k <= n; ++k) s += (k % 2 ? -1.0 : 1.0) * binomial(n, k) * std::pow(x, k) / factorial(k);
  return s;
}

/// <n|D(1)|n> = e^{-1/2} L_n(1).
inline double displacement_diag_z1(int n) { return std::exp(-0.5) * laguerre_series(n, 1.0); }

/// <n|D(z)|m> for real z from the normally ordered product
/// e^{-z^2/2} sum_k <n|(a^dag)^p|k'>..., written as the double sum
/// sum_{k} sqrt(n! m!) (z)^{n-k} (-z)^{m-k} / ((n-k)! (m-k)! k!).
inline double displacement_real(int n, int m, double z) {
  double s = 0.0;
  for (int k = 0; k <= std::min(n, m); ++k)
    s += std::pow(z, n - k) * std::pow(-z, m - k) / (factorial(n - k) * factorial(m - k) * factorial(k));
  return std::exp(-0.5 * z * z) * std::sqrt(factorial(n) * factorial(m)) * s;
}

/// Fock wavefunction in vacuum-variance-1/4 units: H_n(sqrt2 x) explicit
/// polynomial times the Gaussian.
inline double hermite_phys(int n, double y) {
  double s = 0.0;
  for (int k = 0; k <= n / 2; ++k)
    s += (k % 2 ? -1.0 : 1.0) * factorial(n) / (factorial(k) * factorial(n - 2 * k)) * std::pow(2.0 * y, n - 2 * k);
  return s;
}

inline double fock_wavefunction(int n, double x) {
  const double y = std::sqrt(2.0) * x;
  return std::pow(2.0 / std::numbers::pi, 0.25) * std::exp(-x * x) * hermite_phys(n, y) /
         std::sqrt(std::pow(2.0, n) * factorial(n));
}

} // namespace oracle
