#pragma once

// Reconstruction of the operation matrix from joint measurement records.
//
// Pure operation (output |phi>> = (A (x) I)|psi>> / ||A psi||):
//   A_ij = kappa <E_ij(psi)>,  E_ij(psi) = |i0><i| (x) |j0><psi^{-1*}(j)|,
//   kappa = e^{i theta} sqrt(p_A / <|i0 j0>><<i0 j0|>).
// General operation (output R(psi), trace p):
//   <<i,j|R(I)|l,k>> = p < |l><i| (x) |psi^{-1*}(k)><psi^{-1*}(j)| >.
//
// Every ensemble average is the mean over samples of a product of two
// single-mode estimates; any single-mode quorum works as long as it provides
// prepare(record, workspace) and dyad(row, col, workspace), the unbiased
// single-outcome estimate of Tr[rho |row><col|].

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/errors.hpp"
#include "qotomo/quorum.hpp"
#include "qotomo/sampler.hpp"

namespace qotomo {

template <class Q>
concept SingleModeQuorum = requires(const Q& q, const typename Q::Record& r, typename Q::Workspace& ws) {
  q.prepare(r, ws);
  { q.dyad(0, 0, ws) } -> std::convertible_to<Complex>;
};

/// Entangled input matrix psi with its inverse and the sparsity pattern of
/// the inverse columns.
struct Entangler {
  ComplexMatrix psi;
  ComplexMatrix inv;
  std::vector<std::vector<std::pair<int, Complex>>> columns; // (k, inv(k, j)) with inv(k, j) != 0

  explicit Entangler(ComplexMatrix psi_in) : psi(std::move(psi_in)), inv(inverse(psi)) {
    columns.resize(static_cast<std::size_t>(inv.cols()));
    for (Eigen::Index j = 0; j < inv.cols(); ++j)
      for (Eigen::Index k = 0; k < inv.rows(); ++k)
        if (inv(k, j) != Complex(0.0, 0.0))
          columns[static_cast<std::size_t>(j)].emplace_back(static_cast<int>(k), inv(k, j));
  }

  int dim() const { return static_cast<int>(psi.rows()); }
};

/// Coefficients of E_ij(psi) = |i0><i| (x) |j0><psi^{-1*}(j)| where
/// <psi^{-1*}(j)| = sum_k inv(k, j) <k|.
struct EstimatorCoefficients {
  int i = 0, j = 0, i0 = 0, j0 = 0;
  std::vector<std::pair<int, Complex>> row;

  /// a_ij(kl) = <i|Q^dag(k)|i0> <psi^{-1*}(j)|Q^dag(l)|j0>.
  Complex coefficient(const FiniteQuorum& q, std::size_t k, std::size_t l) const {
    const Complex first = std::conj(q.duals()[k](i0, i));
    Complex second = 0.0;
    for (const auto& [m, c] : row) second += c * std::conj(q.duals()[l](j0, m));
    return first * second;
  }

  /// The operator E_ij(psi) on the bipartite space, for exact checks.
  ComplexMatrix operator_matrix(int dim) const {
    ComplexMatrix first = ComplexMatrix::Zero(dim, dim);
    first(i0, i) = 1.0;
    ComplexMatrix second = ComplexMatrix::Zero(dim, dim);
    for (const auto& [m, c] : row) second(j0, m) += c;
    return kron(first, second);
  }
};

inline EstimatorCoefficients estimator_coefficients(int i, int j, int i0, int j0, const Entangler& ent) {
  const int d = ent.dim();
  if (i < 0 || j < 0 || i0 < 0 || j0 < 0 || i >= d || j >= d || i0 >= d || j0 >= d)
    throw ShapeError("estimator_coefficients: index outside entangler dimension");
  return {i, j, i0, j0, ent.columns[static_cast<std::size_t>(j)]};
}

/// Running sums of one block. Each target accumulates weight * estimate;
/// herald and trial weights give the occurrence frequency of the operation.
struct BlockAccumulator {
  std::vector<Complex> sums;
  Complex reference_sum = 0.0; // estimator of <|i0 j0>><<i0 j0|> (pure case)
  double weight = 0.0;         // total weight of heralded samples
  double herald_weight = 0.0;
  double trial_weight = 0.0;

  BlockAccumulator() = default;
  explicit BlockAccumulator(std::size_t targets) : sums(targets, 0.0) {}

  void merge(const BlockAccumulator& other) {
    if (other.sums.size() != sums.size()) throw ShapeError("BlockAccumulator::merge: target count mismatch");
    for (std::size_t t = 0; t < sums.size(); ++t) sums[t] += other.sums[t];
    reference_sum += other.reference_sum;
    weight += other.weight;
    herald_weight += other.herald_weight;
    trial_weight += other.trial_weight;
  }
};

/// Targets A_ij for 0 <= i, j < window, reference element (i0, j0).
class PurePlan {
public:
  PurePlan(const Entangler& ent, int window, int i0, int j0) : window_(window), i0_(i0), j0_(j0) {
    if (window < 1 || window > ent.dim()) throw ShapeError("PurePlan: window outside entangler dimension");
    if (i0 < 0 || j0 < 0 || i0 >= ent.dim() || j0 >= ent.dim())
      throw ShapeError("PurePlan: reference indices outside entangler dimension");
    for (int j = 0; j < window; ++j) coefficients_.push_back(estimator_coefficients(0, j, i0, j0, ent));
    std::vector<bool> used(static_cast<std::size_t>(ent.dim()), false);
    for (const auto& c : coefficients_)
      for (const auto& [k, v] : c.row) used[static_cast<std::size_t>(k)] = true;
    for (int k = 0; k < ent.dim(); ++k)
      if (used[static_cast<std::size_t>(k)]) support_.push_back(k);
  }

  int window() const { return window_; }
  int i0() const { return i0_; }
  int j0() const { return j0_; }
  std::size_t targets() const { return static_cast<std::size_t>(window_) * window_; }
  /// Largest Fock index touched on either mode.
  int max_index() const {
    int m = std::max({window_ - 1, i0_, j0_});
    for (int k : support_) m = std::max(m, k);
    return m;
  }
  BlockAccumulator make_accumulator() const { return BlockAccumulator(targets()); }

  template <SingleModeQuorum Q>
  void add(const Q& q, const typename Q::Workspace& ws1, const typename Q::Workspace& ws2, double weight,
           BlockAccumulator& acc) const {
    const auto n = static_cast<std::size_t>(window_);
    first_.resize(n);
    second_.resize(n);
    for (int i = 0; i < window_; ++i) first_[static_cast<std::size_t>(i)] = q.dyad(i0_, i, ws1);
    mode2_.assign(static_cast<std::size_t>(max_index()) + 1, 0.0);
    for (int k : support_) mode2_[static_cast<std::size_t>(k)] = q.dyad(j0_, k, ws2);
    for (std::size_t j = 0; j < n; ++j) {
      Complex e = 0.0;
      for (const auto& [k, c] : coefficients_[j].row) e += c * mode2_[static_cast<std::size_t>(k)];
      second_[j] = weight * e;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Complex f = first_[i];
      Complex* row = acc.sums.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += f * second_[j];
    }
    acc.reference_sum += weight * q.dyad(i0_, i0_, ws1) * q.dyad(j0_, j0_, ws2);
    acc.weight += weight;
  }

private:
  int window_, i0_, j0_;
  std::vector<EstimatorCoefficients> coefficients_;
  std::vector<int> support_;
  mutable std::vector<Complex> first_, second_, mode2_;
};

/// Targets <<i,j|R(I)|l,k>> for 0 <= i, j, l, k < window, stored at
/// row (i * window + j), column (l * window + k).
class ChoiPlan {
public:
  ChoiPlan(const Entangler& ent, int window) : window_(window), inv_(ent.inv) {
    if (window < 1 || window > ent.dim()) throw ShapeError("ChoiPlan: window outside entangler dimension");
    std::vector<bool> used(static_cast<std::size_t>(ent.dim()), false);
    for (int j = 0; j < window; ++j)
      for (const auto& [k, v] : ent.columns[static_cast<std::size_t>(j)]) used[static_cast<std::size_t>(k)] = true;
    for (int k = 0; k < ent.dim(); ++k)
      if (used[static_cast<std::size_t>(k)]) support_.push_back(k);
    const auto s = static_cast<Eigen::Index>(support_.size());
    inv_support_ = ComplexMatrix::Zero(s, window);
    for (Eigen::Index a = 0; a < s; ++a)
      for (int j = 0; j < window; ++j) inv_support_(a, j) = ent.inv(support_[static_cast<std::size_t>(a)], j);
  }

  int window() const { return window_; }
  std::size_t side() const { return static_cast<std::size_t>(window_) * window_; }
  std::size_t targets() const { return side() * side(); }
  int max_index() const {
    int m = window_ - 1;
    for (int k : support_) m = std::max(m, k);
    return m;
  }
  BlockAccumulator make_accumulator() const { return BlockAccumulator(targets()); }

  template <SingleModeQuorum Q>
  void add(const Q& q, const typename Q::Workspace& ws1, const typename Q::Workspace& ws2, double weight,
           BlockAccumulator& acc) const {
    const int n = window_;
    first_.resize(n, n);
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i) first_(l, i) = q.dyad(l, i, ws1);
    const auto s = static_cast<Eigen::Index>(support_.size());
    dyads_.resize(s, s);
    for (Eigen::Index a = 0; a < s; ++a)
      for (Eigen::Index b = 0; b < s; ++b)
        dyads_(a, b) = q.dyad(support_[static_cast<std::size_t>(a)], support_[static_cast<std::size_t>(b)], ws2);
    // second(k, j) = sum_ab conj(inv(a, k)) dyad(a, b) inv(b, j)
    second_ = weight * (inv_support_.adjoint() * dyads_ * inv_support_);
    const std::size_t side_len = side();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Complex* row = acc.sums.data() + (static_cast<std::size_t>(i) * n + j) * side_len;
        for (int l = 0; l < n; ++l) {
          const Complex f = first_(l, i);
          for (int k = 0; k < n; ++k) row[static_cast<std::size_t>(l) * n + k] += f * second_(k, j);
        }
      }
    acc.weight += weight;
  }

private:
  int window_;
  ComplexMatrix inv_;
  std::vector<int> support_;
  ComplexMatrix inv_support_;
  mutable ComplexMatrix first_, dyads_, second_;
};

/// Feeds a sequence of joint records into the accumulator. Records whose
/// herald flag is false count as trials only.
template <class Plan, SingleModeQuorum Q, class Sample>
void accumulate(const Plan& plan, const Q& q, const std::vector<Sample>& samples, BlockAccumulator& acc) {
  typename Q::Workspace ws1, ws2;
  for (const auto& s : samples) {
    acc.trial_weight += 1.0;
    if (!s.herald) continue;
    acc.herald_weight += 1.0;
    q.prepare(s.mode1(), ws1);
    q.prepare(s.mode2(), ws2);
    plan.add(q, ws1, ws2, 1.0, acc);
  }
}

/// Exact expectation: every outcome weighted by its probability, with the
/// occurrence probability p supplied directly.
template <class Plan>
BlockAccumulator accumulate_exact(const Plan& plan, const FiniteQuorum& q, const std::vector<FiniteOutcome>& table,
                                  double occurrence_probability) {
  BlockAccumulator acc = plan.make_accumulator();
  FiniteQuorum::Workspace ws1, ws2;
  for (const auto& o : table) {
    if (o.probability == 0.0) continue;
    q.prepare(o.mode1(), ws1);
    q.prepare(o.mode2(), ws2);
    plan.add(q, ws1, ws2, o.probability, acc);
  }
  acc.trial_weight = 1.0;
  acc.herald_weight = occurrence_probability;
  return acc;
}

struct KappaEstimate {
  double p_hat = 0.0;
  double p_stderr = 0.0;
  double denominator = 0.0; // <|i0 j0>><<i0 j0|>
  double denominator_stderr = 0.0;
  Complex kappa = 0.0;
  std::string theta_rule = "theta=0";
};

struct MatrixEstimate {
  ComplexMatrix values;
  RealMatrix std_errors;
  Complex kappa = 0.0;
  double p_hat = 0.0;
  double p_stderr = 0.0;
  double denominator = 0.0;
  double denominator_stderr = 0.0;
  int i0 = 0, j0 = 0;
  std::string config_hash;
  double truncation_deficit = 0.0;
  std::string phase_convention = "none";
  Complex applied_phase = 1.0;
  double hermiticity_defect = 0.0;       // max |R - R^dag| / 2 before hermitization
  double hermiticity_defect_sigma = 0.0; // same, in units of the entry std error
  std::string normalization;
};

namespace detail {

struct BlockMoments {
  std::size_t blocks = 0;
  std::vector<std::vector<Complex>> means; // per block, per target
  std::vector<double> reference;           // per block
  std::vector<double> occurrence;          // per block
};

inline BlockMoments block_moments(const std::vector<BlockAccumulator>& blocks, const char* stage) {
  if (blocks.empty()) throw NumericalError(stage, "no blocks to estimate from");
  BlockMoments m;
  m.blocks = blocks.size();
  double heralds = 0.0;
  for (const auto& b : blocks) heralds += b.weight;
  if (!(heralds > 0.0)) throw NumericalError(stage, "empty heralded set");
  for (const auto& b : blocks) {
    if (!(b.weight > 0.0)) throw NumericalError(stage, "a block has no heralded samples; use larger blocks");
    if (!(b.trial_weight > 0.0)) throw NumericalError(stage, "a block has no trials");
    std::vector<Complex> mean(b.sums.size());
    for (std::size_t t = 0; t < b.sums.size(); ++t) mean[t] = b.sums[t] / b.weight;
    m.means.push_back(std::move(mean));
    m.reference.push_back((b.reference_sum / b.weight).real());
    m.occurrence.push_back(b.herald_weight / b.trial_weight);
  }
  return m;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Standard error of the mean of complex block values: sqrt(var Re + var Im) / sqrt(B).
inline double complex_stderr(const std::vector<Complex>& v) {
  if (v.size() < 2) return 0.0;
  Complex mu = 0.0;
  for (const auto& x : v) mu += x;
  mu /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const auto& x : v) ss += std::norm(x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

} // namespace detail

/// kappa = sqrt(p_A / <|i0 j0>><<i0 j0|>) with theta fixed to 0; p_A from
/// the herald frequency, the denominator from the same data.
inline KappaEstimate estimate_kappa(const std::vector<BlockAccumulator>& blocks) {
  const detail::BlockMoments m = detail::block_moments(blocks, "estimate_kappa");
  KappaEstimate k;
  k.p_hat = detail::mean_of(m.occurrence);
  k.p_stderr = detail::stderr_of(m.occurrence);
  k.denominator = detail::mean_of(m.reference);
  k.denominator_stderr = detail::stderr_of(m.reference);
  if (!(k.denominator > 0.0))
    throw NumericalError("estimate_kappa", "reference element estimate is not positive; choose different (i0, j0)");
  if (k.denominator <= 2.0 * k.denominator_stderr)
    throw NumericalError("estimate_kappa", "reference element too small, choose different (i0, j0)");
  if (!(k.p_hat > 0.0)) throw NumericalError("estimate_kappa", "operation never heralded");
  k.kappa = std::sqrt(k.p_hat / k.denominator);
  return k;
}

/// A_ij = kappa * mean of the E_ij estimator. Error bars come from block
/// pseudo-values linearized in (block mean, reference, occurrence), so they
/// include the uncertainty of kappa.
inline MatrixEstimate estimate_pure_matrix(const std::vector<BlockAccumulator>& blocks, const PurePlan& plan) {
  const KappaEstimate kappa = estimate_kappa(blocks);
  const detail::BlockMoments m = detail::block_moments(blocks, "estimate_pure_matrix");
  const std::size_t n = static_cast<std::size_t>(plan.window());
  const std::size_t targets = plan.targets();
  std::vector<Complex> grand(targets, 0.0);
  for (const auto& bm : m.means)
    for (std::size_t t = 0; t < targets; ++t) grand[t] += bm[t];
  for (auto& g : grand) g /= static_cast<double>(m.blocks);

  MatrixEstimate est;
  est.values = ComplexMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  est.std_errors = RealMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double kap = kappa.kappa.real();
  std::vector<Complex> pseudo(m.blocks);
  for (std::size_t t = 0; t < targets; ++t) {
    const auto i = static_cast<Eigen::Index>(t / n), j = static_cast<Eigen::Index>(t % n);
    est.values(i, j) = kap * grand[t];
    for (std::size_t b = 0; b < m.blocks; ++b)
      pseudo[b] = kap * (m.means[b][t] - grand[t] * (m.reference[b] - kappa.denominator) / (2.0 * kappa.denominator) +
                         grand[t] * (m.occurrence[b] - kappa.p_hat) / (2.0 * kappa.p_hat));
    est.std_errors(i, j) = detail::complex_stderr(pseudo);
  }
  est.kappa = kappa.kappa;
  est.p_hat = kappa.p_hat;
  est.p_stderr = kappa.p_stderr;
  est.denominator = kappa.denominator;
  est.denominator_stderr = kappa.denominator_stderr;
  est.i0 = plan.i0();
  est.j0 = plan.j0();
  est.normalization = "kappa=sqrt(p/denominator), theta=0";
  if (!est.values.allFinite()) throw NumericalError("estimate_pure_matrix", "non-finite estimate");
  return est;
}

/// R(I) entries: occurrence probability times the mean of the Choi
/// estimator, hermitized as (R + R^dag)/2 with the defect recorded.
inline MatrixEstimate estimate_choi(const std::vector<BlockAccumulator>& blocks, const ChoiPlan& plan) {
  const detail::BlockMoments m = detail::block_moments(blocks, "estimate_choi");
  const double p_hat = detail::mean_of(m.occurrence);
  const std::size_t side = plan.side();
  const std::size_t targets = plan.targets();
  std::vector<Complex> grand(targets, 0.0);
  for (const auto& bm : m.means)
    for (std::size_t t = 0; t < targets; ++t) grand[t] += bm[t];
  for (auto& g : grand) g /= static_cast<double>(m.blocks);

  const auto s = static_cast<Eigen::Index>(side);
  ComplexMatrix raw(s, s);
  RealMatrix errors(s, s);
  std::vector<Complex> pseudo(m.blocks);
  for (std::size_t t = 0; t < targets; ++t) {
    const auto r = static_cast<Eigen::Index>(t / side), c = static_cast<Eigen::Index>(t % side);
    raw(r, c) = p_hat * grand[t];
    for (std::size_t b = 0; b < m.blocks; ++b)
      pseudo[b] = p_hat * m.means[b][t] + grand[t] * (m.occurrence[b] - p_hat);
    errors(r, c) = detail::complex_stderr(pseudo);
  }
  MatrixEstimate est;
  const ComplexMatrix defect = 0.5 * (raw - raw.adjoint());
  est.hermiticity_defect = defect.cwiseAbs().maxCoeff();
  double worst_sigma = 0.0;
  for (Eigen::Index r = 0; r < s; ++r)
    for (Eigen::Index c = 0; c < s; ++c) {
      const double sigma = 0.5 * std::hypot(errors(r, c), errors(c, r));
      if (sigma > 0.0) worst_sigma = std::max(worst_sigma, std::abs(defect(r, c)) / sigma);
    }
  est.hermiticity_defect_sigma = worst_sigma;
  est.values = 0.5 * (raw + raw.adjoint());
  est.std_errors = 0.5 * (errors + errors.transpose());
  est.p_hat = p_hat;
  est.p_stderr = detail::stderr_of(m.occurrence);
  est.kappa = 1.0;
  est.normalization = "entries scaled by occurrence probability, hermitized";
  if (!est.values.allFinite()) throw NumericalError("estimate_choi", "non-finite estimate");
  return est;
}

struct ReferenceChoice {
  int i0 = 0;
  int j0 = 0;
  std::optional<std::string> warning;
};

/// (i0, j0) maximizing the pilot magnitude table; first entry in row-major
/// order on ties, (0, 0) with a warning for an all-zero pilot.
inline ReferenceChoice select_reference(const RealMatrix& pilot_magnitudes) {
  ReferenceChoice choice;
  double best = 0.0;
  for (Eigen::Index i = 0; i < pilot_magnitudes.rows(); ++i)
    for (Eigen::Index j = 0; j < pilot_magnitudes.cols(); ++j)
      if (pilot_magnitudes(i, j) > best) {
        best = pilot_magnitudes(i, j);
        choice.i0 = static_cast<int>(i);
        choice.j0 = static_cast<int>(j);
      }
  if (!(best > 0.0)) {
    choice = {};
    choice.warning = "pilot estimate vanishes; falling back to reference (0, 0)";
  }
  return choice;
}

/// Pilot table of |phi_ik|^2 = <|ik>><<ik|> from a batch of records, each
/// entry lowered by two standard errors so that noisy high-index entries
/// do not win the argmax.
template <SingleModeQuorum Q, class Sample>
RealMatrix pilot_output_magnitudes(const Q& q, const std::vector<Sample>& samples, int window) {
  RealMatrix sums = RealMatrix::Zero(window, window);
  RealMatrix squares = RealMatrix::Zero(window, window);
  std::size_t count = 0;
  typename Q::Workspace ws1, ws2;
  std::vector<double> a(static_cast<std::size_t>(window)), b(static_cast<std::size_t>(window));
  for (const auto& s : samples) {
    if (!s.herald) continue;
    q.prepare(s.mode1(), ws1);
    q.prepare(s.mode2(), ws2);
    for (int i = 0; i < window; ++i) {
      a[static_cast<std::size_t>(i)] = q.dyad(i, i, ws1).real();
      b[static_cast<std::size_t>(i)] = q.dyad(i, i, ws2).real();
    }
    for (int i = 0; i < window; ++i)
      for (int k = 0; k < window; ++k) {
        const double v = a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(k)];
        sums(i, k) += v;
        squares(i, k) += v * v;
      }
    ++count;
  }
  if (count < 2) return RealMatrix::Zero(window, window);
  const double n = static_cast<double>(count);
  const RealMatrix mean = sums / n;
  const RealMatrix var = ((squares / n - mean.cwiseAbs2()) * (n / (n - 1.0))).cwiseMax(0.0);
  return (mean - 2.0 * (var / n).cwiseSqrt()).cwiseMax(0.0);
}

inline constexpr const char* kPhaseConvention = "largest-entry-real-positive";

/// Rotates the estimate so its largest-magnitude entry is real positive.
inline MatrixEstimate phase_fix(MatrixEstimate est) {
  Eigen::Index bi = 0, bj = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < est.values.rows(); ++i)
    for (Eigen::Index j = 0; j < est.values.cols(); ++j)
      if (std::abs(est.values(i, j)) > best) {
        best = std::abs(est.values(i, j));
        bi = i;
        bj = j;
      }
  Complex phase = 1.0;
  if (best > 0.0) phase = std::conj(est.values(bi, bj)) / best;
  est.values *= phase;
  est.values(bi, bj) = Complex(std::abs(est.values(bi, bj)), 0.0);
  est.applied_phase *= phase;
  est.phase_convention = kPhaseConvention;
  return est;
}

/// phase_align of estimate and truth after dividing every entry by its
/// reported error, so that noisy entries do not dominate the fitted phase.
/// Entries with zero error get the smallest positive error as scale.
inline PhaseAlignment weighted_phase_align(const ComplexMatrix& estimate, const RealMatrix& errors,
                                           const ComplexMatrix& truth) {
  require_same_shape(estimate, truth, "weighted_phase_align");
  if (errors.rows() != estimate.rows() || errors.cols() != estimate.cols())
    throw ShapeError("weighted_phase_align: error matrix shape mismatch");
  double floor = 0.0;
  for (Eigen::Index i = 0; i < errors.size(); ++i)
    if (errors.data()[i] > 0.0 && (floor == 0.0 || errors.data()[i] < floor)) floor = errors.data()[i];
  if (floor == 0.0) return phase_align(estimate, truth);
  ComplexMatrix a = estimate, b = truth;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double scale = errors(i, j) > 0.0 ? errors(i, j) : floor;
      a(i, j) /= scale;
      b(i, j) /= scale;
    }
  const PhaseAlignment w = phase_align(a, b);
  return {w.phase, (estimate - w.phase * truth).norm()};
}

} // namespace qotomo
