#pragma once

// Oracle suites behind `qotomo verify`. Each check reports a measured value
// against a bound; the report is one line per check.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/estimator.hpp"
#include "qotomo/homodyne.hpp"
#include "qotomo/maps.hpp"
#include "qotomo/quorum.hpp"
#include "qotomo/random.hpp"
#include "qotomo/rng.hpp"
#include "qotomo/sampler.hpp"
#include "qotomo/states.hpp"

namespace qotomo {

struct Check {
  std::string suite;
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<Check> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }

  void add(std::string suite, std::string name, double value, double bound) {
    checks.push_back({std::move(suite), std::move(name), value, bound, std::isfinite(value) && value <= bound});
  }

  std::string format() const {
    std::string out;
    char buf[512];
    for (const auto& c : checks) {
      std::snprintf(buf, sizeof buf, "%s suite=%s check=%s value=%.3g bound=%.3g\n", c.pass ? "PASS" : "FAIL",
                    c.suite.c_str(), c.name.c_str(), c.value, c.bound);
      out += buf;
    }
    return out;
  }
};

inline std::vector<std::string> verify_suites() { return {"unbiasedness", "choi", "kernels", "sampler-moments"}; }

inline double max_abs(const ComplexMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Exact expectation of the pure-case chain over every finite-quorum
/// outcome, for a random contraction on a random entangled input.
inline double exact_pure_error(int dim, std::mt19937_64& engine) {
  const FiniteQuorum q = build_finite_quorum(dim);
  const ComplexMatrix a = random_contraction(dim, engine);
  const ComplexMatrix psi = random_entangler(dim, engine);
  const PureOutput out = apply_pure(PureOperation(a), psi);
  const ComplexVector v = vec(out.phi).amplitudes();
  Eigen::Index i0 = 0, j0 = 0;
  out.phi.cwiseAbs().maxCoeff(&i0, &j0);
  const Entangler ent(psi);
  const PurePlan plan(ent, dim, static_cast<int>(i0), static_cast<int>(j0));
  const BlockAccumulator acc = accumulate_exact(plan, q, finite_outcome_table(v * v.adjoint(), q), out.probability);
  const MatrixEstimate est = estimate_pure_matrix({acc}, plan);
  const PhaseAlignment al = phase_align(est.values, a);
  return max_abs(est.values - al.phase * a);
}

/// Same for the Choi matrix of a random map with `count` Kraus operators.
inline double exact_choi_error(int dim, int count, std::mt19937_64& engine) {
  const FiniteQuorum q = build_finite_quorum(dim);
  const KrausMap map = random_kraus_map(dim, count, engine);
  const ComplexMatrix psi = random_entangler(dim, engine);
  const ComplexMatrix r_out = apply_kraus_bipartite(map, psi);
  const double p = r_out.trace().real();
  const Entangler ent(psi);
  const ChoiPlan plan(ent, dim);
  const BlockAccumulator acc = accumulate_exact(plan, q, finite_outcome_table(r_out, q), p);
  const MatrixEstimate est = estimate_choi({acc}, plan);
  const ComplexMatrix truth = kraus_to_choi(map).r;
  const PhaseAlignment al = phase_align(est.values, truth);
  return max_abs(est.values - al.phase * truth);
}

inline void verify_unbiasedness(VerifyReport& report, const std::vector<int>& dims, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  for (int d : dims) {
    report.add("unbiasedness", "pure_d" + std::to_string(d), exact_pure_error(d, engine), 1e-10);
    report.add("unbiasedness", "choi_d" + std::to_string(d), exact_choi_error(d, 2, engine), 1e-10);
  }
}

inline void verify_choi(VerifyReport& report, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  const int d = 3;
  const KrausMap map = random_kraus_map(d, 3, engine);
  const ChoiMatrix choi = kraus_to_choi(map);
  double roundtrip = 0.0;
  for (int t = 0; t < 20; ++t) {
    const ComplexMatrix rho = random_density(d, engine);
    roundtrip = std::max(roundtrip, max_abs(map_from_choi(choi, rho) - map.apply(rho)));
  }
  report.add("choi", "roundtrip_d3_20_states", roundtrip, 1e-12);

  const ComplexMatrix psi = random_entangler(d, engine);
  const ChoiMatrix via_psi = choi_normalize(apply_kraus_bipartite(map, psi), psi);
  report.add("choi", "normalize_matches_direct", max_abs(via_psi.r - choi.r), 1e-10);

  const KrausMap back = choi_to_kraus(choi);
  report.add("choi", "kraus_roundtrip", max_abs(kraus_to_choi(back).r - choi.r), 1e-10);
}

/// Kernel calibration: vacuum, coherent(1) and thermal(1) recovered from
/// their exact smeared distributions, indices up to dim / 2.
inline void verify_kernels(VerifyReport& report, const std::vector<double>& etas, int dim = 16) {
  const int state_dim = 60;
  const int max_index = dim / 2;
  for (double eta : etas) {
    const HomodyneKernel kernel = build_homodyne_kernel(dim, eta, default_kernel_grid(1.0));
    const struct {
      const char* name;
      ComplexMatrix rho;
    } states[] = {{"vacuum", fock_density(0, state_dim)},
                  {"coherent1", coherent_density(Complex(1.0, 0.0), state_dim)},
                  {"thermal1", thermal_density(1.0, state_dim)}};
    char tag[64];
    for (const auto& s : states) {
      const ComplexMatrix got = recover_from_distribution(kernel, s.rho, max_index, 12.0, 0.01);
      const double err = max_abs(got - s.rho.topLeftCorner(max_index + 1, max_index + 1));
      std::snprintf(tag, sizeof tag, "%s_eta%.3g", s.name, eta);
      report.add("kernels", tag, err, 1e-3);
    }
  }
}

struct VarianceCheck {
  double variance = 0.0;
  double std_error = 0.0;
};

inline VarianceCheck sample_variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0, s4 = 0.0;
  for (double x : xs) {
    const double d2 = (x - mean) * (x - mean);
    ss += d2;
    s4 += d2 * d2;
  }
  const double n = static_cast<double>(xs.size());
  const double var = ss / (n - 1.0);
  // Var of the sample variance ~ (m4 - var^2) / n
  return {var, std::sqrt(std::max(s4 / n - var * var, 0.0) / n)};
}

/// Quadrature variances: vacuum 1/(4 eta) and twin-beam reduced mode
/// (2 nbar + 1)/4 + (1 - eta)/(4 eta), each within 4 sigma.
inline void verify_sampler_moments(VerifyReport& report, const std::vector<double>& etas, std::size_t samples,
                                   std::uint64_t seed, double nbar = 3.0) {
  char tag[64];
  std::uint64_t block = 0;
  for (double eta : etas) {
    RngStream vac_stream(seed, block++);
    const auto vac = sample_quadratures(displaced_twinbeam_gaussian(0.0, 0.0), eta, samples, vac_stream);
    std::vector<double> xs;
    xs.reserve(samples);
    for (const auto& s : vac) xs.push_back(s.x1);
    VarianceCheck v = sample_variance(xs);
    std::snprintf(tag, sizeof tag, "vacuum_variance_eta%.3g_sigmas", eta);
    report.add("sampler-moments", tag, std::abs(v.variance - 1.0 / (4.0 * eta)) / v.std_error, 4.0);

    RngStream tb_stream(seed, block++);
    const auto tb = sample_quadratures(displaced_twinbeam_gaussian(0.0, nbar), eta, samples, tb_stream);
    xs.clear();
    for (const auto& s : tb) xs.push_back(s.x2);
    v = sample_variance(xs);
    const double expected = (2.0 * nbar + 1.0) / 4.0 + eta_noise_variance(eta);
    std::snprintf(tag, sizeof tag, "twinbeam_reduced_variance_eta%.3g_sigmas", eta);
    report.add("sampler-moments", tag, std::abs(v.variance - expected) / v.std_error, 4.0);
  }
}

} // namespace qotomo
