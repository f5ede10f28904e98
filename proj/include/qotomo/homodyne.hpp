#pragma once

// Homodyne pattern-function kernels with quantum-efficiency deconvolution.
//
// For quadrature outcomes x at local-oscillator phase phi, recorded with
// efficiency eta (Gaussian smearing of variance (1 - eta) / (4 eta)), the
// function
//
//   R_nm(x, phi) = f_nm(x) e^{i (n - m) phi}
//
// averaged over the data with phi uniform gives <n|rho|m> for any state.
// The real kernels f_nm come from the inverse-Radon integral
//
//   R[O](x, phi) = int dk |k|/4 Tr[O e^{-i k X_phi}] e^{i k x} e^{k^2 (1 - eta) / (8 eta)}
//
// evaluated by trapezoidal quadrature in k and tabulated on an x-grid
// (value and derivative, cubic Hermite interpolation). The k-integrand
// decays like exp(-k^2 (2 eta - 1) / (8 eta)), which is why eta must exceed 1/2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/errors.hpp"
#include "qotomo/special.hpp"

namespace qotomo {

struct GridSpec {
  double x_max = 12.0;  // table covers [-x_max, x_max]
  double dx = 0.01;     // table spacing
  double k_step = 0.02; // trapezoid step of the k-integral

  bool operator==(const GridSpec&) const = default;
};

/// Default table range for a twin beam with mean photon number nbar.
inline GridSpec default_kernel_grid(double nbar) {
  return GridSpec{6.0 * (1.0 + nbar), 0.01, 0.02};
}

inline double eta_noise_variance(double eta) {
  return (1.0 - eta) / (4.0 * eta);
}

struct HomodyneRecord {
  double x = 0.0;
  double phi = 0.0;
};

class HomodyneKernel {
public:
  using Record = HomodyneRecord;

  /// Per-sample workspace: grid cell of x and powers of e^{i phi}.
  struct Workspace {
    double x = 0.0;
    double abs_x = 0.0;
    bool negative = false;
    bool outside = false;
    std::size_t cell = 0;
    double h00 = 0, h10 = 0, h01 = 0, h11 = 0;
    std::vector<Complex> phase; // phase[d + dim - 1] = e^{i d phi}
  };

  static constexpr double kMaxKRange = 600.0;
  static constexpr std::uint32_t kCacheVersion = 1;

  HomodyneKernel(int dim, double eta, GridSpec grid) : dim_(dim), eta_(eta), grid_(grid) {
    if (dim_ < 1) throw ShapeError("homodyne kernel: dim must be positive");
    if (!(eta_ > 0.5 && eta_ <= 1.0))
      throw NumericalError("homodyne kernel",
                           "unphysical deconvolution: eta = " + std::to_string(eta_) +
                               " must lie in (0.5, 1]");
    if (!(grid_.x_max > 0.0 && grid_.dx > 0.0 && grid_.k_step > 0.0))
      throw ShapeError("homodyne kernel: grid parameters must be positive");
    npts_ = static_cast<std::size_t>(std::ceil(grid_.x_max / grid_.dx)) + 1;
    build_k_table();
  }

  int dim() const { return dim_; }
  double eta() const { return eta_; }
  const GridSpec& grid() const { return grid_; }
  double noise_variance() const { return eta_noise_variance(eta_); }
  std::size_t pair_count() const { return static_cast<std::size_t>(dim_) * (dim_ + 1) / 2; }
  double k_max() const { return k_step_count_ * grid_.k_step; }

  static std::size_t pair_index(int n, int m) {
    const int hi = std::max(n, m), lo = std::min(n, m);
    return static_cast<std::size_t>(hi) * (hi + 1) / 2 + static_cast<std::size_t>(lo);
  }

  void prepare(const Record& r, Workspace& ws) const {
    ws.x = r.x;
    ws.abs_x = std::abs(r.x);
    ws.negative = r.x < 0.0;
    const double t = ws.abs_x / grid_.dx;
    ws.outside = !(t < static_cast<double>(npts_ - 1));
    if (!ws.outside) {
      ws.cell = static_cast<std::size_t>(t);
      const double u = t - static_cast<double>(ws.cell);
      const double u2 = u * u, u3 = u2 * u;
      ws.h00 = 2 * u3 - 3 * u2 + 1;
      ws.h10 = (u3 - 2 * u2 + u) * grid_.dx;
      ws.h01 = -2 * u3 + 3 * u2;
      ws.h11 = (u3 - u2) * grid_.dx;
    }
    ws.phase.resize(static_cast<std::size_t>(2 * dim_ - 1));
    const Complex unit = std::polar(1.0, r.phi);
    const std::size_t mid = static_cast<std::size_t>(dim_ - 1);
    ws.phase[mid] = 1.0;
    for (int d = 1; d < dim_; ++d) {
      ws.phase[mid + d] = ws.phase[mid + d - 1] * unit;
      ws.phase[mid - d] = std::conj(ws.phase[mid + d]);
    }
  }

  /// f_nm at the prepared point.
  double pattern(int n, int m, const Workspace& ws) const {
    check_index(n, m);
    const std::size_t p = pair_index(n, m);
    const bool odd = ((std::abs(n - m)) & 1) != 0;
    double v;
    if (ws.outside) {
      v = direct(p, ws.abs_x);
    } else {
      const double* f = values_.data() + p * npts_;
      const double* df = derivs_.data() + p * npts_;
      const std::size_t i = ws.cell;
      v = ws.h00 * f[i] + ws.h10 * df[i] + ws.h01 * f[i + 1] + ws.h11 * df[i + 1];
    }
    return (odd && ws.negative) ? -v : v;
  }

  double pattern(int n, int m, double x) const {
    Workspace ws;
    prepare({x, 0.0}, ws);
    return pattern(n, m, ws);
  }

  /// Single-sample estimate of <n|rho|m>.
  Complex estimate(int n, int m, const Workspace& ws) const {
    return pattern(n, m, ws) * ws.phase[static_cast<std::size_t>(n - m + dim_ - 1)];
  }

  Complex estimate(int n, int m, const Record& r) const {
    Workspace ws;
    prepare(r, ws);
    return estimate(n, m, ws);
  }

  /// Single-sample estimate of Tr[rho |row><col|] = <col|rho|row>.
  Complex dyad(int row, int col, const Workspace& ws) const { return estimate(col, row, ws); }

  /// Kernel value by direct k-quadrature, bypassing the table.
  double pattern_direct(int n, int m, double x) const {
    check_index(n, m);
    const double v = direct(pair_index(n, m), std::abs(x));
    return (((std::abs(n - m)) & 1) != 0 && x < 0.0) ? -v : v;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("kernel cache: cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kCacheVersion);
    write_pod(out, static_cast<std::int32_t>(dim_));
    write_pod(out, eta_);
    write_pod(out, grid_.x_max);
    write_pod(out, grid_.dx);
    write_pod(out, grid_.k_step);
    write_pod(out, static_cast<std::uint64_t>(npts_));
    out.write(reinterpret_cast<const char*>(values_.data()),
              static_cast<std::streamsize>(values_.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(derivs_.data()),
              static_cast<std::streamsize>(derivs_.size() * sizeof(double)));
  }

  /// Loads a cached table; empty if the file is missing, of another format
  /// version or keyed by a different (dim, eta, grid).
  static std::optional<HomodyneKernel> load(const std::filesystem::path& path, int dim, double eta,
                                            const GridSpec& grid) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[sizeof(kMagic)] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) return std::nullopt;
    std::uint32_t version = 0;
    std::int32_t file_dim = 0;
    double file_eta = 0, x_max = 0, dx = 0, k_step = 0;
    std::uint64_t npts = 0;
    read_pod(in, version);
    read_pod(in, file_dim);
    read_pod(in, file_eta);
    read_pod(in, x_max);
    read_pod(in, dx);
    read_pod(in, k_step);
    read_pod(in, npts);
    if (!in || version != kCacheVersion || file_dim != dim || file_eta != eta ||
        !(GridSpec{x_max, dx, k_step} == grid))
      return std::nullopt;
    HomodyneKernel k(dim, eta, grid);
    if (npts != k.npts_) return std::nullopt;
    k.values_.resize(k.pair_count() * k.npts_);
    k.derivs_.resize(k.pair_count() * k.npts_);
    in.read(reinterpret_cast<char*>(k.values_.data()),
            static_cast<std::streamsize>(k.values_.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(k.derivs_.data()),
            static_cast<std::streamsize>(k.derivs_.size() * sizeof(double)));
    if (!in) return std::nullopt;
    return k;
  }

  friend HomodyneKernel build_homodyne_kernel(int dim, double eta, const GridSpec& grid);

private:
  static constexpr char kMagic[8] = {'Q', 'O', 'T', 'K', 'E', 'R', 'N', '\0'};

  template <class T>
  static void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <class T>
  static void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
  }

  void check_index(int n, int m) const {
    if (n < 0 || m < 0 || n >= dim_ || m >= dim_)
      throw ShapeError("homodyne kernel: index (" + std::to_string(n) + "," + std::to_string(m) +
                       ") outside table of dim " + std::to_string(dim_));
  }

  // Integrand without the oscillating factor, for the pair (hi, lo):
  //   g(k) = (k/4) (k/2)^delta e^{-gamma k^2} L_lo^{(delta)}(k^2/4)
  double g(int hi, int lo, double k) const {
    const int delta = hi - lo;
    double p = 1.0;
    for (int i = 0; i < delta; ++i) p *= 0.5 * k;
    return 0.25 * k * p * std::exp(-gamma_ * k * k) * laguerre(lo, delta, 0.25 * k * k);
  }

  // f_{hi,lo} = prefactor * int_0^inf g(k) {cos or sin}(k x) dk
  double prefactor(int hi, int lo) const {
    const int delta = hi - lo;
    const double ratio = std::exp(0.5 * (std::lgamma(lo + 1.0) - std::lgamma(hi + 1.0)));
    const int half = (delta & 1) ? (delta - 1) / 2 : delta / 2;
    return 2.0 * ratio * ((half & 1) ? -1.0 : 1.0);
  }

  void build_k_table() {
    gamma_ = (2.0 * eta_ - 1.0) / (8.0 * eta_);
    // Support of the k-integrand, found per pair from its envelope.
    double k_max = 0.0;
    for (int hi = 0; hi < dim_; ++hi)
      for (int lo = 0; lo <= hi; ++lo) {
        double peak = 0.0, k_end = 0.0;
        const double k_probe = 0.25;
        for (double k = k_probe;; k += k_probe) {
          if (k > kMaxKRange)
            throw NumericalError("homodyne kernel", "k-integral for diagonal delta = " +
                                                        std::to_string(hi - lo) +
                                                        " does not converge; eta too close to 1/2");
          const double v = std::abs(g(hi, lo, k)) * (1.0 + k);
          peak = std::max(peak, v);
          if (k > std::sqrt((hi + lo + 2.0) / gamma_) && v < 1e-18 * peak) {
            k_end = k;
            break;
          }
        }
        k_max = std::max(k_max, k_end);
      }
    k_step_count_ = static_cast<std::size_t>(std::ceil(k_max / grid_.k_step));
    const std::size_t nk = k_step_count_ + 1;
    const std::size_t np = pair_count();
    weighted_g_ = RealMatrix::Zero(static_cast<Eigen::Index>(nk), static_cast<Eigen::Index>(np));
    for (int hi = 0; hi < dim_; ++hi)
      for (int lo = 0; lo <= hi; ++lo) {
        const auto p = static_cast<Eigen::Index>(pair_index(hi, lo));
        const double pref = prefactor(hi, lo);
        for (std::size_t j = 0; j < nk; ++j) {
          const double k = static_cast<double>(j) * grid_.k_step;
          const double w = (j == 0 || j + 1 == nk) ? 0.5 * grid_.k_step : grid_.k_step;
          weighted_g_(static_cast<Eigen::Index>(j), p) = pref * w * g(hi, lo, k);
        }
      }
  }

  // Trapezoidal sum at a single point x >= 0 (with endpoint correction for
  // delta = 0, where the even extension of the integrand has a kink at k = 0).
  double direct(std::size_t p, double x) const {
    const int hi = static_cast<int>((std::sqrt(8.0 * static_cast<double>(p) + 1.0) - 1.0) / 2.0);
    const int lo = static_cast<int>(p - static_cast<std::size_t>(hi) * (hi + 1) / 2);
    const bool odd = ((hi - lo) & 1) != 0;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < weighted_g_.rows(); ++j) {
      const double kx = static_cast<double>(j) * grid_.k_step * x;
      acc += weighted_g_(j, static_cast<Eigen::Index>(p)) * (odd ? std::sin(kx) : std::cos(kx));
    }
    if (hi == lo) acc += prefactor(hi, lo) * grid_.k_step * grid_.k_step / 48.0;
    return acc;
  }

  void tabulate() {
    const std::size_t np = pair_count();
    const auto nk = weighted_g_.rows();
    values_.assign(np * npts_, 0.0);
    derivs_.assign(np * npts_, 0.0);

    std::vector<Eigen::Index> even, odd;
    for (int hi = 0; hi < dim_; ++hi)
      for (int lo = 0; lo <= hi; ++lo)
        (((hi - lo) & 1) ? odd : even).push_back(static_cast<Eigen::Index>(pair_index(hi, lo)));

    Eigen::VectorXd kvals(nk);
    for (Eigen::Index j = 0; j < nk; ++j) kvals(j) = static_cast<double>(j) * grid_.k_step;
    auto gather = [&](const std::vector<Eigen::Index>& cols, bool times_k) {
      RealMatrix out(nk, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = weighted_g_.col(cols[c]);
        if (times_k) out.col(static_cast<Eigen::Index>(c)).array() *= kvals.array();
      }
      return out;
    };
    const RealMatrix g_even = gather(even, false), gk_even = gather(even, true);
    const RealMatrix g_odd = gather(odd, false), gk_odd = gather(odd, true);

    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < npts_; start += kChunk) {
      const std::size_t rows = std::min(kChunk, npts_ - start);
      RealMatrix c(static_cast<Eigen::Index>(rows), nk), s(static_cast<Eigen::Index>(rows), nk);
      for (std::size_t r = 0; r < rows; ++r) {
        const double x = static_cast<double>(start + r) * grid_.dx;
        for (Eigen::Index j = 0; j < nk; ++j) {
          const double kx = kvals(j) * x;
          c(static_cast<Eigen::Index>(r), j) = std::cos(kx);
          s(static_cast<Eigen::Index>(r), j) = std::sin(kx);
        }
      }
      // even delta: f = C g, f' = -S (k g); odd delta: f = S g, f' = C (k g)
      const RealMatrix fe = c * g_even, dfe = -(s * gk_even);
      const RealMatrix fo = s * g_odd, dfo = c * gk_odd;
      for (std::size_t e = 0; e < even.size(); ++e) {
        const auto p = static_cast<std::size_t>(even[e]);
        for (std::size_t r = 0; r < rows; ++r) {
          values_[p * npts_ + start + r] = fe(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e));
          derivs_[p * npts_ + start + r] = dfe(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e));
        }
      }
      for (std::size_t o = 0; o < odd.size(); ++o) {
        const auto p = static_cast<std::size_t>(odd[o]);
        for (std::size_t r = 0; r < rows; ++r) {
          values_[p * npts_ + start + r] = fo(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(o));
          derivs_[p * npts_ + start + r] = dfo(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(o));
        }
      }
    }
    for (int n = 0; n < dim_; ++n) {
      const std::size_t p = pair_index(n, n);
      const double corr = prefactor(n, n) * grid_.k_step * grid_.k_step / 48.0;
      for (std::size_t i = 0; i < npts_; ++i) values_[p * npts_ + i] += corr;
    }
    for (double v : values_)
      if (!std::isfinite(v)) throw NumericalError("homodyne kernel", "non-finite tabulated value");
  }

  int dim_;
  double eta_;
  GridSpec grid_;
  double gamma_ = 0.0;
  std::size_t npts_ = 0;
  std::size_t k_step_count_ = 0;
  RealMatrix weighted_g_;
  std::vector<double> values_;
  std::vector<double> derivs_;
};

/// Tabulates f_nm for all 0 <= n, m < dim.
inline HomodyneKernel build_homodyne_kernel(int dim, double eta, const GridSpec& grid) {
  HomodyneKernel k(dim, eta, grid);
  k.tabulate();
  return k;
}

inline std::string kernel_cache_name(int dim, double eta, const GridSpec& grid) {
  std::ostringstream name;
  name.precision(17);
  name << "kernel_d" << dim << "_eta" << eta << "_x" << grid.x_max << "_dx" << grid.dx << "_dk"
       << grid.k_step << ".bin";
  return name.str();
}

/// Loads the kernel from cache_dir when a matching table exists, otherwise
/// builds it and refreshes the cache file.
inline HomodyneKernel load_or_build_kernel(const std::filesystem::path& cache_dir, int dim, double eta,
                                           const GridSpec& grid) {
  const auto path = cache_dir / kernel_cache_name(dim, eta, grid);
  if (auto cached = HomodyneKernel::load(path, dim, eta, grid)) return std::move(*cached);
  HomodyneKernel k = build_homodyne_kernel(dim, eta, grid);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  k.save(path);
  return k;
}

/// Exact eta-smeared quadrature density of rho, resolved into its phase
/// harmonics: p(x, phi) = sum_delta p_delta(x) e^{-i delta phi}, computed
/// in position space by convolving products of Fock wavefunctions.
struct SmearedDistribution {
  std::vector<double> x;
  int max_delta = 0;
  std::vector<std::vector<Complex>> harmonics; // index delta + max_delta

  const std::vector<Complex>& harmonic(int delta) const {
    return harmonics[static_cast<std::size_t>(delta + max_delta)];
  }
};

inline SmearedDistribution smeared_distribution(const ComplexMatrix& rho, double eta, int max_delta,
                                                double x_max, double dx) {
  require_square(rho, "smeared_distribution");
  const int d = static_cast<int>(rho.rows());
  const auto n = static_cast<std::size_t>(std::floor(2.0 * x_max / dx)) + 1;
  SmearedDistribution out;
  out.max_delta = max_delta;
  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.x[i] = -x_max + static_cast<double>(i) * dx;

  std::vector<std::vector<Complex>> raw(static_cast<std::size_t>(2 * max_delta + 1),
                                        std::vector<Complex>(n, 0.0));
  std::vector<double> psi(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    quadrature_wavefunctions(out.x[i], psi);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        const int delta = a - b;
        if (std::abs(delta) > max_delta) continue;
        raw[static_cast<std::size_t>(delta + max_delta)][i] +=
            rho(a, b) * psi[static_cast<std::size_t>(a)] * psi[static_cast<std::size_t>(b)];
      }
  }
  const double var = eta_noise_variance(eta);
  if (var <= 0.0) {
    out.harmonics = std::move(raw);
    return out;
  }
  const double sigma = std::sqrt(var);
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(9.0 * sigma / dx));
  std::vector<double> gauss(static_cast<std::size_t>(2 * half + 1));
  for (std::ptrdiff_t s = -half; s <= half; ++s) {
    const double u = static_cast<double>(s) * dx;
    gauss[static_cast<std::size_t>(s + half)] =
        dx * std::exp(-0.5 * u * u / var) / std::sqrt(2.0 * std::numbers::pi * var);
  }
  out.harmonics.assign(raw.size(), std::vector<Complex>(n, 0.0));
  for (std::size_t h = 0; h < raw.size(); ++h)
    for (std::size_t i = 0; i < n; ++i) {
      Complex acc = 0.0;
      for (std::ptrdiff_t s = -half; s <= half; ++s) {
        const auto j = static_cast<std::ptrdiff_t>(i) - s;
        if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
        acc += gauss[static_cast<std::size_t>(s + half)] * raw[h][static_cast<std::size_t>(j)];
      }
      out.harmonics[h][i] = acc;
    }
  return out;
}

/// Matrix elements <n|rho|m>, 0 <= n, m <= max_index, recovered by applying
/// the kernel to the exact smeared distribution of rho (phase-averaged
/// expectation of the single-sample estimator).
inline ComplexMatrix recover_from_distribution(const HomodyneKernel& kernel, const ComplexMatrix& rho,
                                               int max_index, double x_max = 10.0, double dx = 0.01) {
  if (max_index >= kernel.dim()) throw ShapeError("recover_from_distribution: max_index outside kernel");
  const SmearedDistribution dist = smeared_distribution(rho, kernel.eta(), max_index, x_max, dx);
  ComplexMatrix out = ComplexMatrix::Zero(max_index + 1, max_index + 1);
  const std::size_t npts = dist.x.size();
  HomodyneKernel::Workspace ws;
  for (std::size_t i = 0; i < npts; ++i) {
    kernel.prepare({dist.x[i], 0.0}, ws);
    const double w = (i == 0 || i + 1 == npts) ? 0.5 * dx : dx;
    for (int n = 0; n <= max_index; ++n)
      for (int m = 0; m <= max_index; ++m)
        out(n, m) += w * kernel.pattern(n, m, ws) * dist.harmonic(n - m)[i];
  }
  return out;
}

} // namespace qotomo
