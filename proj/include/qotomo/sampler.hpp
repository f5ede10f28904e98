#pragma once

// Monte Carlo generation of joint measurement records on the two output
// modes: an exact Gaussian path for the displaced twin beam, a Fock-grid
// path for arbitrary (non-Gaussian) outputs, and Born-rule sampling of
// finite-dimensional quorum outcomes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/errors.hpp"
#include "qotomo/homodyne.hpp"
#include "qotomo/maps.hpp"
#include "qotomo/quorum.hpp"
#include "qotomo/rng.hpp"
#include "qotomo/special.hpp"

namespace qotomo {

/// Joint homodyne record: phases and quadrature outcomes of both modes.
struct QuadratureSample {
  double phi1 = 0.0;
  double phi2 = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
  bool herald = true;

  HomodyneRecord mode1() const { return {x1, phi1}; }
  HomodyneRecord mode2() const { return {x2, phi2}; }
};

/// Two-mode Gaussian state over (x1, p1, x2, p2), with x = (a + a^dag)/2
/// and p = (a - a^dag)/(2i); the vacuum covariance is I/4.
struct GaussianState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = 0.25 * Eigen::Matrix4d::Identity();

  /// Smallest symplectic eigenvalue; the uncertainty bound requires >= 1/4.
  double min_symplectic_eigenvalue() const {
    Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();
    omega(0, 1) = omega(2, 3) = 1.0;
    omega(1, 0) = omega(3, 2) = -1.0;
    Eigen::EigenSolver<Eigen::Matrix4d> es(omega * cov);
    return es.eigenvalues().cwiseAbs().minCoeff();
  }
};

/// Twin beam with mean photon number nbar per mode, mode 1 displaced by z.
inline GaussianState displaced_twinbeam_gaussian(Complex z, double nbar) {
  if (!(nbar >= 0.0)) throw ShapeError("displaced_twinbeam_gaussian: nbar must be >= 0");
  GaussianState s;
  s.mean << z.real(), z.imag(), 0.0, 0.0;
  const double c = 2.0 * nbar + 1.0;                    // cosh 2r
  const double sh = 2.0 * std::sqrt(nbar * (nbar + 1.0)); // sinh 2r
  s.cov = Eigen::Matrix4d::Zero();
  s.cov.diagonal().setConstant(c);
  s.cov(0, 2) = s.cov(2, 0) = sh;
  s.cov(1, 3) = s.cov(3, 1) = -sh;
  s.cov *= 0.25;
  return s;
}

/// Bivariate law of (X_phi1, X_phi2) for a Gaussian state.
struct QuadratureLaw {
  double mean1 = 0, mean2 = 0, var1 = 0, var2 = 0, cov12 = 0;
};

inline QuadratureLaw quadrature_law(const GaussianState& s, double phi1, double phi2) {
  Eigen::Vector4d u1(std::cos(phi1), std::sin(phi1), 0.0, 0.0);
  Eigen::Vector4d u2(0.0, 0.0, std::cos(phi2), std::sin(phi2));
  return {u1.dot(s.mean), u2.dot(s.mean), u1.dot(s.cov * u1), u2.dot(s.cov * u2), u1.dot(s.cov * u2)};
}

/// Fixed local-oscillator phases, for tests that need a definite quadrature pair.
struct PhaseOverride {
  std::optional<double> phi1;
  std::optional<double> phi2;
};

inline QuadratureSample draw_gaussian(const GaussianState& state, double eta, RngStream& stream,
                                      const PhaseOverride& fixed = {}) {
  QuadratureSample s;
  s.phi1 = stream.phase();
  s.phi2 = stream.phase();
  if (fixed.phi1) s.phi1 = *fixed.phi1;
  if (fixed.phi2) s.phi2 = *fixed.phi2;
  const QuadratureLaw law = quadrature_law(state, s.phi1, s.phi2);
  const double z1 = stream.normal();
  const double z2 = stream.normal();
  s.x1 = law.mean1 + std::sqrt(law.var1) * z1;
  const double slope = law.cov12 / law.var1;
  const double cond_var = std::max(0.0, law.var2 - slope * law.cov12);
  s.x2 = law.mean2 + slope * (s.x1 - law.mean1) + std::sqrt(cond_var) * z2;
  const double noise = std::sqrt(eta_noise_variance(eta));
  const double n1 = stream.normal();
  const double n2 = stream.normal();
  s.x1 += noise * n1;
  s.x2 += noise * n2;
  return s;
}

inline void require_eta(double eta, const char* who) {
  if (!(eta > 0.5 && eta <= 1.0))
    throw ShapeError(std::string(who) + ": eta = " + std::to_string(eta) + " must lie in (0.5, 1]");
}

/// n joint records with independent uniform phases, smeared by detector
/// efficiency eta.
inline std::vector<QuadratureSample> sample_quadratures(const GaussianState& state, double eta, std::size_t n,
                                                        RngStream& stream, const PhaseOverride& fixed = {}) {
  require_eta(eta, "sample_quadratures");
  std::vector<QuadratureSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_gaussian(state, eta, stream, fixed));
  return out;
}

/// Exact sampler for an arbitrary two-mode density matrix R (d^2 x d^2,
/// row-major pair index) by inverse CDF on an x-grid: x1 from its phase-
/// dependent marginal, then x2 from the conditional density given x1.
class FockSampler {
public:
  static constexpr std::size_t kBins = 64;
  static constexpr std::size_t kCellsPerBin = 64; // 2^12 grid intervals in total
  static constexpr double kMassTolerance = 1e-6;

  FockSampler(const ComplexMatrix& r_out, double eta, double x_max = 0.0) : eta_(eta) {
    require_eta(eta, "FockSampler");
    require_square(r_out, "FockSampler");
    dim_ = static_cast<int>(composite_root(r_out.rows(), "FockSampler"));
    const double trace = r_out.trace().real();
    if (!(trace > 0.0)) throw NumericalError("fock sampler", "output state has zero trace");
    r_ = r_out / trace;
    reduced1_ = partial_trace_2(r_);
    if (x_max <= 0.0) x_max = 6.0 * std::sqrt((2.0 * (dim_ - 1) + 1.0) / 4.0) + 1.0;
    x_min_ = -x_max;
    const std::size_t cells = kBins * kCellsPerBin;
    dx_ = 2.0 * x_max / static_cast<double>(cells);
    psi_grid_.resize((cells + 1) * static_cast<std::size_t>(dim_));
    for (std::size_t i = 0; i <= cells; ++i)
      quadrature_wavefunctions(x_min_ + static_cast<double>(i) * dx_,
                               std::span<double>(psi_grid_.data() + i * static_cast<std::size_t>(dim_),
                                                 static_cast<std::size_t>(dim_)));
    bin_integrals_.assign(kBins, RealMatrix::Zero(dim_, dim_));
    RealMatrix total = RealMatrix::Zero(dim_, dim_);
    for (std::size_t b = 0; b < kBins; ++b) {
      for (std::size_t c = 0; c < kCellsPerBin; ++c) {
        const std::size_t i = b * kCellsPerBin + c;
        const Eigen::Map<const Eigen::VectorXd> lo(psi_at(i), dim_), hi(psi_at(i + 1), dim_);
        bin_integrals_[b] += 0.5 * dx_ * (lo * lo.transpose() + hi * hi.transpose());
      }
      total += bin_integrals_[b];
    }
    const double deficit = (total - RealMatrix::Identity(dim_, dim_)).cwiseAbs().maxCoeff();
    if (deficit > kMassTolerance)
      throw NumericalError("fock sampler", "grid truncation deficit " + std::to_string(deficit) +
                                               " above bound; widen the grid");
  }

  int dim() const { return dim_; }

  QuadratureSample draw(RngStream& stream) {
    QuadratureSample s;
    s.phi1 = stream.phase();
    s.phi2 = stream.phase();
    const double u1 = stream.uniform();
    const double u2 = stream.uniform();
    const double u3 = stream.uniform();
    const double u4 = stream.uniform();

    ComplexMatrix m1 = reduced1_;
    rotate(m1, s.phi1);
    s.x1 = sample_density(m1.real(), u1, u2);

    const std::vector<double> w_abs = quadrature_wavefunctions(s.x1, dim_);
    ComplexVector w(dim_);
    for (int n = 0; n < dim_; ++n) w(n) = std::polar(w_abs[static_cast<std::size_t>(n)], -n * s.phi1);
    ComplexMatrix m2 = ComplexMatrix::Zero(dim_, dim_);
    for (int n = 0; n < dim_; ++n)
      for (int np = 0; np < dim_; ++np) {
        const Complex c = w(n) * std::conj(w(np));
        if (c == Complex(0.0, 0.0)) continue;
        m2 += c * r_.block(n * dim_, np * dim_, dim_, dim_);
      }
    rotate(m2, s.phi2);
    s.x2 = sample_density(m2.real(), u3, u4);

    const double noise = std::sqrt(eta_noise_variance(eta_));
    s.x1 += noise * stream.normal();
    s.x2 += noise * stream.normal();
    return s;
  }

private:
  const double* psi_at(std::size_t i) const { return psi_grid_.data() + i * static_cast<std::size_t>(dim_); }

  // M_{nn'} -> M_{nn'} e^{-i (n - n') phi}
  void rotate(ComplexMatrix& m, double phi) const {
    for (int n = 0; n < dim_; ++n)
      for (int np = 0; np < dim_; ++np) m(n, np) *= std::polar(1.0, -(n - np) * phi);
  }

  double density_at(const RealMatrix& s, std::size_t i) const {
    const Eigen::Map<const Eigen::VectorXd> v(psi_at(i), dim_);
    return std::max(0.0, v.dot(s * v));
  }

  // Density x -> sum S_{nn'} psi_n(x) psi_n'(x): pick a coarse bin by mass,
  // then a cell inside it, then invert the linear density on the cell.
  double sample_density(const RealMatrix& s, double u_bin, double u_cell) const {
    std::array<double, kBins> mass{};
    double total = 0.0;
    for (std::size_t b = 0; b < kBins; ++b) {
      mass[b] = std::max(0.0, (s.array() * bin_integrals_[b].array()).sum());
      total += mass[b];
    }
    if (!(total > 0.0)) throw NumericalError("fock sampler", "conditional density vanishes on the grid");
    double target = u_bin * total;
    std::size_t bin = 0;
    while (bin + 1 < kBins && target >= mass[bin]) {
      target -= mass[bin];
      ++bin;
    }
    std::array<double, kCellsPerBin + 1> p{};
    for (std::size_t c = 0; c <= kCellsPerBin; ++c) p[c] = density_at(s, bin * kCellsPerBin + c);
    std::array<double, kCellsPerBin> cell_mass{};
    double bin_mass = 0.0;
    for (std::size_t c = 0; c < kCellsPerBin; ++c) {
      cell_mass[c] = 0.5 * dx_ * (p[c] + p[c + 1]);
      bin_mass += cell_mass[c];
    }
    double r = u_cell * bin_mass;
    std::size_t cell = 0;
    while (cell + 1 < kCellsPerBin && r >= cell_mass[cell]) {
      r -= cell_mass[cell];
      ++cell;
    }
    const double p0 = p[cell], p1 = p[cell + 1];
    r = std::clamp(r / dx_, 0.0, 0.5 * (p0 + p1));
    const double disc = std::max(0.0, p0 * p0 + 2.0 * (p1 - p0) * r);
    const double denom = p0 + std::sqrt(disc);
    const double t = denom > 0.0 ? std::clamp(2.0 * r / denom, 0.0, 1.0) : 0.5;
    return x_min_ + (static_cast<double>(bin * kCellsPerBin + cell) + t) * dx_;
  }

  int dim_ = 0;
  double eta_ = 1.0;
  double x_min_ = 0.0;
  double dx_ = 0.0;
  ComplexMatrix r_;
  ComplexMatrix reduced1_;
  std::vector<double> psi_grid_;
  std::vector<RealMatrix> bin_integrals_;
};

/// Samples from the pure output |phi_out>> (d x d matrix form).
inline std::vector<QuadratureSample> sample_fock_general(const ComplexMatrix& phi_out, double eta, std::size_t n,
                                                         RngStream& stream) {
  const ComplexVector v = vec(phi_out).amplitudes();
  FockSampler sampler(v * v.adjoint(), eta);
  std::vector<QuadratureSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sampler.draw(stream));
  return out;
}

/// Joint outcome of a product quorum measurement O(k) (x) O(l).
struct FiniteOutcome {
  int k = 0;
  int l = 0;
  int a = 0; // eigenvector index of O(k)
  int b = 0; // eigenvector index of O(l)
  double probability = 0.0;
  bool herald = true;

  FiniteRecord mode1() const { return {k, a}; }
  FiniteRecord mode2() const { return {l, b}; }
};

inline constexpr double kNegativeProbabilityTolerance = 1e-10;

/// Every joint outcome with probability w_k w_l <u_a v_b|R|u_a v_b> / Tr R.
inline std::vector<FiniteOutcome> finite_outcome_table(const ComplexMatrix& r_out, const FiniteQuorum& q) {
  require_square(r_out, "finite_outcome_table");
  const Eigen::Index d = q.dim();
  if (r_out.rows() != d * d) throw ShapeError("finite_outcome_table: state dimension does not match quorum");
  const double trace = r_out.trace().real();
  if (!(trace > 0.0)) throw NumericalError("finite sampler", "output state has zero trace");
  std::vector<FiniteOutcome> table;
  for (std::size_t k = 0; k < q.size(); ++k)
    for (std::size_t l = 0; l < q.size(); ++l) {
      const ComplexMatrix& u = q.eigenvectors(k);
      const ComplexMatrix& v = q.eigenvectors(l);
      const double wkl = q.weights()[k] * q.weights()[l];
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) {
          ComplexVector uv(d * d);
          for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) uv(i * d + j) = u(i, a) * v(j, b);
          double prob = (uv.adjoint() * r_out * uv)(0, 0).real() / trace;
          if (prob < -kNegativeProbabilityTolerance)
            throw NumericalError("finite sampler", "negative outcome probability " + std::to_string(prob) +
                                                       "; output state is not positive semidefinite");
          prob = std::max(prob, 0.0);
          table.push_back({static_cast<int>(k), static_cast<int>(l), static_cast<int>(a),
                           static_cast<int>(b), wkl * prob, true});
        }
    }
  return table;
}

/// Draws outcomes from a precomputed outcome table.
class FiniteSampler {
public:
  FiniteSampler(const ComplexMatrix& r_out, const FiniteQuorum& q) : table_(finite_outcome_table(r_out, q)) {
    cdf_.reserve(table_.size());
    double acc = 0.0;
    for (const auto& o : table_) {
      acc += o.probability;
      cdf_.push_back(acc);
    }
    total_ = acc;
  }

  FiniteOutcome draw(RngStream& stream) const {
    const double u = stream.uniform() * total_;
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return table_[static_cast<std::size_t>(it - cdf_.begin())];
  }

  const std::vector<FiniteOutcome>& table() const { return table_; }

private:
  std::vector<FiniteOutcome> table_;
  std::vector<double> cdf_;
  double total_ = 0.0;
};

inline std::vector<FiniteOutcome> sample_finite(const ComplexMatrix& r_out, const FiniteQuorum& q, std::size_t n,
                                                RngStream& stream) {
  FiniteSampler sampler(r_out, q);
  std::vector<FiniteOutcome> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sampler.draw(stream));
  return out;
}

/// Occurrence model of a non-deterministic operation on the entangled
/// input: the probability and the conditional (normalized) output state.
struct HeraldModel {
  double probability = 1.0;
  ComplexMatrix conditional_state; // d^2 x d^2 density matrix of the heralded output

  bool draw(RngStream& stream) const { return probability >= 1.0 || stream.bernoulli(probability); }
};

inline HeraldModel herald(const PureOperation& op, const ComplexMatrix& psi) {
  const PureOutput out = apply_pure(op, psi);
  const ComplexVector v = vec(out.phi).amplitudes();
  return {std::min(out.probability, 1.0), v * v.adjoint()};
}

inline HeraldModel herald(const KrausMap& map, const ComplexMatrix& psi) {
  const ComplexMatrix r = apply_kraus_bipartite(map, psi);
  const double p = r.trace().real();
  if (!(p > 0.0)) throw NumericalError("herald", "operation never occurs on this input");
  return {std::min(p, 1.0), r / p};
}

/// Raw dump line: block_id, phi1, phi2, x1, x2, herald (9 significant digits).
inline void write_sample_dump(std::ostream& out, std::size_t block_id, const std::vector<QuadratureSample>& samples) {
  char line[160];
  for (const auto& s : samples) {
    std::snprintf(line, sizeof line, "%zu, %.9g, %.9g, %.9g, %.9g, %d\n", block_id, s.phi1, s.phi2, s.x1, s.x2,
                  s.herald ? 1 : 0);
    out << line;
  }
}

inline constexpr const char* kSampleDumpHeader = "# block_id, phi1, phi2, x1, x2, herald\n";

struct DumpedSample {
  std::size_t block_id = 0;
  QuadratureSample sample;
};

inline std::vector<DumpedSample> read_sample_dump(std::istream& in) {
  std::vector<DumpedSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    DumpedSample d;
    int herald_flag = 0;
    if (!(ss >> d.block_id >> d.sample.phi1 >> d.sample.phi2 >> d.sample.x1 >> d.sample.x2 >> herald_flag))
      throw Error("sample dump: malformed line '" + line + "'");
    d.sample.herald = herald_flag != 0;
    out.push_back(d);
  }
  return out;
}

} // namespace qotomo
