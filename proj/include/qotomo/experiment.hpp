#pragma once

// Experiment configuration, the simulate -> estimate pipeline, and the
// versioned result document.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qotomo/bipartite.hpp"
#include "qotomo/blocks.hpp"
#include "qotomo/errors.hpp"
#include "qotomo/estimator.hpp"
#include "qotomo/homodyne.hpp"
#include "qotomo/maps.hpp"
#include "qotomo/rng.hpp"
#include "qotomo/sampler.hpp"
#include "qotomo/states.hpp"

namespace qotomo {

enum class OperationKind { displacement, identity, kraus };

inline const char* to_string(OperationKind k) {
  switch (k) {
  case OperationKind::displacement: return "displacement";
  case OperationKind::identity: return "identity";
  case OperationKind::kraus: return "kraus";
  }
  return "?";
}

inline constexpr int kConfigFormatVersion = 1;
inline constexpr int kResultFormatVersion = 1;

struct ExperimentConfig {
  int format_version = kConfigFormatVersion;
  OperationKind operation = OperationKind::displacement;
  double z_re = 1.0;
  double z_im = 0.0;
  std::string kraus_file;
  double nbar = 5.0;
  double eta = 0.9;
  int dim_cut = 0; // 0 selects the default truncation
  int n_max = 7;
  std::size_t blocks = 150;
  std::size_t samples_per_block = 10000;
  std::uint64_t master_seed = 1;
  bool reference_auto = false;
  int i0 = 0;
  int j0 = 0;
  double max_deficit = kDefaultMaxDeficit;
  double grid_x_max = 0.0; // 0 selects the default for nbar
  double grid_dx = 0.01;
  double grid_k_step = 0.02;
  std::string output = "result.txt";
  std::string dump_samples;
  std::string kernel_cache;

  // Directory relative paths are resolved against; not part of the file.
  std::filesystem::path base_dir;

  Complex z() const { return {z_re, z_im}; }

  bool operator==(const ExperimentConfig& o) const {
    return format_version == o.format_version && operation == o.operation && z_re == o.z_re && z_im == o.z_im &&
           kraus_file == o.kraus_file && nbar == o.nbar && eta == o.eta && dim_cut == o.dim_cut &&
           n_max == o.n_max && blocks == o.blocks && samples_per_block == o.samples_per_block &&
           master_seed == o.master_seed && reference_auto == o.reference_auto && i0 == o.i0 && j0 == o.j0 &&
           max_deficit == o.max_deficit && grid_x_max == o.grid_x_max && grid_dx == o.grid_dx &&
           grid_k_step == o.grid_k_step && output == o.output && dump_samples == o.dump_samples &&
           kernel_cache == o.kernel_cache;
  }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }
};

namespace detail {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_value(double v) {
  if (v == 0.0) v = 0.0; // no "-0"
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_error(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  T out{};
  if constexpr (std::is_unsigned_v<T>) {
    if (!value.empty() && value[0] == '-') throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  if (!(ss >> out) || !(ss >> std::ws).eof())
    throw ConfigError(key + ": cannot parse '" + value + "'");
  return out;
}

} // namespace detail

/// Flat `key = value` text, one key per line, all keys always written.
inline std::string serialize(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "format_version = " << c.format_version << "\n";
  out << "operation = " << to_string(c.operation) << "\n";
  out << "z_re = " << detail::format_real(c.z_re) << "\n";
  out << "z_im = " << detail::format_real(c.z_im) << "\n";
  out << "kraus_file = " << c.kraus_file << "\n";
  out << "nbar = " << detail::format_real(c.nbar) << "\n";
  out << "eta = " << detail::format_real(c.eta) << "\n";
  out << "dim_cut = " << c.dim_cut << "\n";
  out << "n_max = " << c.n_max << "\n";
  out << "blocks = " << c.blocks << "\n";
  out << "samples_per_block = " << c.samples_per_block << "\n";
  out << "master_seed = " << c.master_seed << "\n";
  out << "reference = " << (c.reference_auto ? "auto" : "fixed") << "\n";
  out << "i0 = " << c.i0 << "\n";
  out << "j0 = " << c.j0 << "\n";
  out << "max_deficit = " << detail::format_real(c.max_deficit) << "\n";
  out << "grid_x_max = " << detail::format_real(c.grid_x_max) << "\n";
  out << "grid_dx = " << detail::format_real(c.grid_dx) << "\n";
  out << "grid_k_step = " << detail::format_real(c.grid_k_step) << "\n";
  out << "output = " << c.output << "\n";
  out << "dump_samples = " << c.dump_samples << "\n";
  out << "kernel_cache = " << c.kernel_cache << "\n";
  return out.str();
}

/// Parses the flat format. Missing keys keep their defaults; unknown keys
/// and repeated keys are rejected.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::map<std::string, std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (!seen.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }
  for (const auto& [key, value] : seen) {
    if (key == "format_version") c.format_version = detail::parse_number<int>(key, value);
    else if (key == "operation") {
      if (value == "displacement") c.operation = OperationKind::displacement;
      else if (value == "identity") c.operation = OperationKind::identity;
      else if (value == "kraus") c.operation = OperationKind::kraus;
      else throw ConfigError("operation: expected displacement, identity or kraus, got '" + value + "'");
    } else if (key == "z_re") c.z_re = detail::parse_number<double>(key, value);
    else if (key == "z_im") c.z_im = detail::parse_number<double>(key, value);
    else if (key == "kraus_file") c.kraus_file = value;
    else if (key == "nbar") c.nbar = detail::parse_number<double>(key, value);
    else if (key == "eta") c.eta = detail::parse_number<double>(key, value);
    else if (key == "dim_cut") c.dim_cut = detail::parse_number<int>(key, value);
    else if (key == "n_max") c.n_max = detail::parse_number<int>(key, value);
    else if (key == "blocks") c.blocks = detail::parse_number<std::size_t>(key, value);
    else if (key == "samples_per_block") c.samples_per_block = detail::parse_number<std::size_t>(key, value);
    else if (key == "master_seed") c.master_seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "reference") {
      if (value == "auto") c.reference_auto = true;
      else if (value == "fixed") c.reference_auto = false;
      else throw ConfigError("reference: expected auto or fixed, got '" + value + "'");
    } else if (key == "i0") c.i0 = detail::parse_number<int>(key, value);
    else if (key == "j0") c.j0 = detail::parse_number<int>(key, value);
    else if (key == "max_deficit") c.max_deficit = detail::parse_number<double>(key, value);
    else if (key == "grid_x_max") c.grid_x_max = detail::parse_number<double>(key, value);
    else if (key == "grid_dx") c.grid_dx = detail::parse_number<double>(key, value);
    else if (key == "grid_k_step") c.grid_k_step = detail::parse_number<double>(key, value);
    else if (key == "output") c.output = value;
    else if (key == "dump_samples") c.dump_samples = value;
    else if (key == "kernel_cache") c.kernel_cache = value;
    else throw ConfigError("unknown key '" + key + "'");
  }
  if (c.format_version != kConfigFormatVersion)
    throw ConfigError("format_version " + std::to_string(c.format_version) + " is not supported (expected " +
                      std::to_string(kConfigFormatVersion) + ")");
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  ExperimentConfig c = parse_config(in);
  c.base_dir = path.parent_path();
  return c;
}

/// FNV-1a over the serialized config, 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Kraus file: `dim d`, then one `kraus` line per operator followed by d
/// rows of d complex entries written as `re im` pairs. `#` starts a comment.
inline KrausMap parse_kraus(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
  }
  std::size_t pos = 0;
  auto next = [&](const char* what) -> const std::string& {
    if (pos >= tokens.size()) throw ConfigError(std::string("kraus file: unexpected end, expected ") + what);
    return tokens[pos++];
  };
  if (next("'dim'") != "dim") throw ConfigError("kraus file: must start with 'dim d'");
  const int d = detail::parse_number<int>("kraus file dim", next("dimension"));
  if (d < 1 || d > 64) throw ConfigError("kraus file: dimension must lie in [1, 64]");
  std::vector<ComplexMatrix> ks;
  while (pos < tokens.size()) {
    if (next("'kraus'") != "kraus") throw ConfigError("kraus file: expected 'kraus' before each operator");
    ComplexMatrix k(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double re = detail::parse_number<double>("kraus entry", next("matrix entry"));
        const double im = detail::parse_number<double>("kraus entry", next("matrix entry"));
        k(i, j) = Complex(re, im);
      }
    ks.push_back(std::move(k));
  }
  if (ks.empty()) throw ConfigError("kraus file: no operators");
  try {
    return KrausMap(std::move(ks));
  } catch (const Error& e) {
    throw ConfigError(std::string("kraus file: ") + e.what());
  }
}

inline KrausMap load_kraus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kraus file '" + path.string() + "'");
  return parse_kraus(in);
}

/// Everything derived from a validated config.
struct ResolvedExperiment {
  ExperimentConfig config;
  int dim_cut = 0;
  int window = 0; // reconstruction window: n_max + 1, or d for Kraus runs
  GridSpec grid;
  ComplexMatrix psi; // entangled input amplitudes
  double truncation_deficit = 0.0;
  std::shared_ptr<Entangler> entangler;
  std::optional<KrausMap> kraus;
  std::vector<std::string> warnings;

  bool choi() const { return config.operation == OperationKind::kraus; }
};

inline void validate_basic(const ExperimentConfig& c) {
  if (!(c.eta > 0.5 && c.eta <= 1.0))
    throw ConfigError("eta = " + detail::format_value(c.eta) +
                      " outside (0.5, 1]; the loss deconvolution diverges at eta <= 0.5");
  if (c.blocks < 2) throw ConfigError("blocks must be >= 2 for block error bars");
  if (c.samples_per_block < 1) throw ConfigError("samples_per_block must be positive");
  if (!(c.nbar > 0.0) || !std::isfinite(c.nbar))
    throw ConfigError("nbar must be positive: a twin beam with nbar = 0 is not an invertible entangler");
  if (c.dim_cut < 0) throw ConfigError("dim_cut must be >= 0 (0 selects the default)");
  if (c.n_max < 0) throw ConfigError("n_max must be >= 0");
  if (!std::isfinite(c.z_re) || !std::isfinite(c.z_im)) throw ConfigError("z must be finite");
  if (!(c.max_deficit > 0.0 && c.max_deficit < 1.0)) throw ConfigError("max_deficit must lie in (0, 1)");
  if (c.grid_x_max < 0.0 || !(c.grid_dx > 0.0) || !(c.grid_k_step > 0.0))
    throw ConfigError("grid_dx and grid_k_step must be positive, grid_x_max >= 0");
  if (c.operation == OperationKind::kraus && c.kraus_file.empty())
    throw ConfigError("operation = kraus needs kraus_file");
}

inline ResolvedExperiment resolve_experiment(const ExperimentConfig& c) {
  validate_basic(c);
  ResolvedExperiment r;
  r.config = c;
  r.grid = default_kernel_grid(c.nbar);
  if (c.grid_x_max > 0.0) r.grid.x_max = c.grid_x_max;
  r.grid.dx = c.grid_dx;
  r.grid.k_step = c.grid_k_step;

  if (c.operation == OperationKind::kraus) {
    r.kraus = load_kraus(c.resolve(c.kraus_file));
    const int d = r.kraus->dim();
    if (c.dim_cut != 0 && c.dim_cut != d)
      throw ConfigError("dim_cut = " + std::to_string(c.dim_cut) + " conflicts with kraus dimension " +
                        std::to_string(d) + "; use 0 or " + std::to_string(d));
    r.dim_cut = d;
    r.window = d;
    const TwinBeamState tb = twin_beam(c.nbar, d, 1.0);
    r.truncation_deficit = tb.truncation_deficit;
    r.psi = tb.psi / hs_norm(tb.psi);
    r.warnings.push_back("twin beam truncated to the kraus dimension and renormalized (dropped weight " +
                         detail::format_value(tb.truncation_deficit) + ")");
  } else {
    r.dim_cut = c.dim_cut > 0 ? c.dim_cut : default_dim_cut(c.nbar);
    if (c.n_max >= r.dim_cut)
      throw ConfigError("n_max = " + std::to_string(c.n_max) + " must be below dim_cut = " + std::to_string(r.dim_cut));
    const TwinBeamState tb = twin_beam(c.nbar, r.dim_cut, c.max_deficit);
    r.truncation_deficit = tb.truncation_deficit;
    if (tb.truncation_deficit > c.max_deficit) {
      int needed = r.dim_cut;
      const double l2 = c.nbar / (c.nbar + 1.0);
      while (std::pow(l2, needed) > c.max_deficit) ++needed;
      throw ConfigError("twin-beam truncation deficit " + detail::format_value(tb.truncation_deficit) +
                        " exceeds max_deficit " + detail::format_value(c.max_deficit) +
                        "; increase dim_cut to at least " + std::to_string(needed));
    }
    r.psi = tb.psi;
    r.window = c.n_max + 1;
  }
  try {
    r.entangler = std::make_shared<Entangler>(r.psi);
  } catch (const NonInvertibleEntangler& e) {
    throw ConfigError(std::string("entangler is not invertible at dim_cut = ") + std::to_string(r.dim_cut) +
                      " (" + e.what() + "); raise nbar or lower dim_cut");
  }
  if (!c.reference_auto && !r.choi() && (c.i0 < 0 || c.j0 < 0 || c.i0 >= r.window || c.j0 >= r.window))
    throw ConfigError("reference (i0, j0) must lie inside the window 0.." + std::to_string(r.window - 1));
  return r;
}

/// Exact target of the reconstruction: A on the window for pure runs,
/// R(I) for Kraus runs.
inline ComplexMatrix theory_matrix(const ResolvedExperiment& r) {
  switch (r.config.operation) {
  case OperationKind::displacement: {
    ComplexMatrix d(r.window, r.window);
    for (int n = 0; n < r.window; ++n)
      for (int m = 0; m < r.window; ++m) d(n, m) = displacement_element(n, m, r.config.z());
    return d;
  }
  case OperationKind::identity: return ComplexMatrix::Identity(r.window, r.window);
  case OperationKind::kraus: return kraus_to_choi(*r.kraus).r;
  }
  return {};
}

struct SimulationResult {
  ResolvedExperiment experiment;
  MatrixEstimate estimate;
  double wall_seconds = 0.0;
};

inline constexpr std::uint64_t kPilotStream = ~0ULL;

namespace detail {

struct BlockOutput {
  BlockAccumulator acc;
  std::string dump;
};

inline HomodyneKernel make_kernel(const ResolvedExperiment& r, int dim) {
  if (r.config.kernel_cache.empty()) return build_homodyne_kernel(dim, r.config.eta, r.grid);
  return load_or_build_kernel(r.config.resolve(r.config.kernel_cache), dim, r.config.eta, r.grid);
}

// Draws the heralded records of one block.
class BlockSampler {
public:
  explicit BlockSampler(const ResolvedExperiment& r) : eta_(r.config.eta) {
    if (r.choi()) {
      model_ = herald(*r.kraus, r.psi);
      fock_.emplace(model_.conditional_state, eta_);
    } else {
      const Complex z = r.config.operation == OperationKind::displacement ? r.config.z() : Complex(0.0, 0.0);
      gaussian_ = displaced_twinbeam_gaussian(z, r.config.nbar);
    }
  }

  std::vector<QuadratureSample> draw(RngStream& stream, std::size_t n) {
    std::vector<QuadratureSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (fock_) {
        if (model_.draw(stream)) {
          QuadratureSample s = fock_->draw(stream);
          s.herald = true;
          out.push_back(s);
        } else {
          out.push_back(QuadratureSample{});
          out.back().herald = false;
        }
      } else {
        out.push_back(draw_gaussian(gaussian_, eta_, stream));
      }
    }
    return out;
  }

private:
  double eta_;
  GaussianState gaussian_;
  HeraldModel model_;
  std::optional<FockSampler> fock_;
};

} // namespace detail

/// Samples, estimates and returns the reconstructed matrix. Output does not
/// depend on `threads`.
inline SimulationResult run_simulate(const ResolvedExperiment& r, unsigned threads, std::ostream* log = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig& c = r.config;
  SimulationResult result;
  result.experiment = r;

  int i0 = c.i0, j0 = c.j0;
  const int kernel_dim = r.choi() ? r.window : std::max(r.window, 1);
  const HomodyneKernel kernel = detail::make_kernel(r, kernel_dim);
  if (log) *log << "kernel: dim " << kernel.dim() << ", eta " << c.eta << ", x_max " << r.grid.x_max << "\n";

  if (!r.choi() && c.reference_auto) {
    RngStream pilot_stream(c.master_seed, kPilotStream);
    detail::BlockSampler sampler(r);
    const auto pilot = sampler.draw(pilot_stream, c.samples_per_block);
    const ReferenceChoice choice = select_reference(pilot_output_magnitudes(kernel, pilot, r.window));
    i0 = choice.i0;
    j0 = choice.j0;
    if (choice.warning) result.experiment.warnings.push_back(*choice.warning);
    if (log) *log << "reference: (" << i0 << ", " << j0 << ") from pilot\n";
  }

  const bool dump = !c.dump_samples.empty();
  auto run = [&](const auto& plan) {
    return run_blocks(c.blocks, threads, [&] {
      return [&, plan_copy = plan, sampler = detail::BlockSampler(r)](std::size_t b) mutable {
        RngStream stream(c.master_seed, b);
        const auto samples = sampler.draw(stream, c.samples_per_block);
        detail::BlockOutput out{plan_copy.make_accumulator(), {}};
        accumulate(plan_copy, kernel, samples, out.acc);
        if (dump) {
          std::ostringstream ss;
          write_sample_dump(ss, b, samples);
          out.dump = ss.str();
        }
        return out;
      };
    });
  };
  auto collect = [&](std::vector<detail::BlockOutput>& outputs) {
    std::vector<BlockAccumulator> accs;
    accs.reserve(outputs.size());
    std::ofstream dump_file;
    if (dump) {
      dump_file.open(c.resolve(c.dump_samples));
      if (!dump_file) throw NumericalError("simulate", "cannot open dump file '" + c.dump_samples + "'");
      dump_file << kSampleDumpHeader;
    }
    for (auto& o : outputs) {
      if (dump) dump_file << o.dump;
      accs.push_back(std::move(o.acc));
    }
    return accs;
  };

  if (r.choi()) {
    const ChoiPlan plan(*r.entangler, r.window);
    auto outputs = run(plan);
    result.estimate = estimate_choi(collect(outputs), plan);
    result.estimate.phase_convention = "none (hermitian)";
  } else {
    const PurePlan plan(*r.entangler, r.window, i0, j0);
    auto outputs = run(plan);
    result.estimate = phase_fix(estimate_pure_matrix(collect(outputs), plan));
  }
  result.estimate.config_hash = config_hash(c);
  result.estimate.truncation_deficit = r.truncation_deficit;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// Result document. Wall-clock time is kept out of it so identical runs
/// produce identical bytes; see write_timing.
inline void write_result_document(std::ostream& out, const SimulationResult& res) {
  const auto& e = res.estimate;
  const auto& r = res.experiment;
  out << "# qotomo result document\n";
  out << "result_format_version = " << kResultFormatVersion << "\n";
  out << "kind = " << (r.choi() ? "choi" : "pure") << "\n";
  out << "config_hash = " << e.config_hash << "\n";
  out << "master_seed = " << r.config.master_seed << "\n";
  out << "[config]\n" << serialize(r.config) << "[end config]\n";
  out << "dim_cut_resolved = " << r.dim_cut << "\n";
  out << "window = " << r.window << "\n";
  out << "kappa_re = " << detail::format_value(e.kappa.real()) << "\n";
  out << "kappa_im = " << detail::format_value(e.kappa.imag()) << "\n";
  out << "p_hat = " << detail::format_value(e.p_hat) << "\n";
  out << "p_hat_stderr = " << detail::format_error(e.p_stderr) << "\n";
  out << "denominator = " << detail::format_value(e.denominator) << "\n";
  out << "denominator_stderr = " << detail::format_error(e.denominator_stderr) << "\n";
  out << "truncation_deficit = " << detail::format_value(e.truncation_deficit) << "\n";
  out << "reference_i0 = " << e.i0 << "\n";
  out << "reference_j0 = " << e.j0 << "\n";
  out << "normalization = " << e.normalization << "\n";
  out << "phase_convention = " << e.phase_convention << "\n";
  out << "applied_phase_re = " << detail::format_value(e.applied_phase.real()) << "\n";
  out << "applied_phase_im = " << detail::format_value(e.applied_phase.imag()) << "\n";
  out << "hermiticity_defect = " << detail::format_error(e.hermiticity_defect) << "\n";
  out << "hermiticity_defect_sigma = " << detail::format_error(e.hermiticity_defect_sigma) << "\n";
  for (const auto& w : r.warnings) out << "warning = " << w << "\n";
  out << "rows = " << e.values.rows() << "\n";
  out << "cols = " << e.values.cols() << "\n";
  out << "[matrix] i j re im stderr\n";
  for (Eigen::Index i = 0; i < e.values.rows(); ++i)
    for (Eigen::Index j = 0; j < e.values.cols(); ++j)
      out << i << " " << j << " " << detail::format_value(e.values(i, j).real()) << " "
          << detail::format_value(e.values(i, j).imag()) << " " << detail::format_error(e.std_errors(i, j)) << "\n";
  out << "[end matrix]\n";
}

inline void write_timing(std::ostream& out, const SimulationResult& res) {
  out << "config_hash = " << res.estimate.config_hash << "\n";
  out << "wall_clock_seconds = " << detail::format_value(res.wall_seconds) << "\n";
}

struct ResultDocument {
  ExperimentConfig config;
  std::string kind;
  std::map<std::string, std::string> fields;
  ComplexMatrix values;
  RealMatrix std_errors;
};

inline ResultDocument read_result_document(std::istream& in, const std::filesystem::path& base_dir = {}) {
  ResultDocument doc;
  std::string line;
  std::ostringstream config_text;
  enum { top, config, matrix } section = top;
  bool have_config = false, have_matrix = false;
  Eigen::Index rows = -1, cols = -1;
  while (std::getline(in, line)) {
    if (section == config) {
      if (line == "[end config]") {
        section = top;
        have_config = true;
      } else {
        config_text << line << "\n";
      }
      continue;
    }
    if (section == matrix) {
      if (line == "[end matrix]") {
        section = top;
        have_matrix = true;
        continue;
      }
      std::istringstream ss(line);
      Eigen::Index i = 0, j = 0;
      double re = 0, im = 0, se = 0;
      if (!(ss >> i >> j >> re >> im >> se) || i < 0 || j < 0 || i >= rows || j >= cols)
        throw Error("result document: malformed matrix line '" + line + "'");
      doc.values(i, j) = Complex(re, im);
      doc.std_errors(i, j) = se;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (line == "[config]") {
      section = config;
      continue;
    }
    if (line.rfind("[matrix]", 0) == 0) {
      if (rows < 0 || cols < 0) throw Error("result document: matrix before its shape");
      doc.values = ComplexMatrix::Zero(rows, cols);
      doc.std_errors = RealMatrix::Zero(rows, cols);
      section = matrix;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("result document: malformed line '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "rows") rows = std::stol(value);
    else if (key == "cols") cols = std::stol(value);
    else if (key == "kind") doc.kind = value;
    doc.fields[key] = value;
  }
  if (!have_config || !have_matrix) throw Error("result document: missing config or matrix section");
  if (doc.fields["result_format_version"] != std::to_string(kResultFormatVersion))
    throw Error("result document: unsupported result_format_version");
  doc.config = parse_config_text(config_text.str());
  doc.config.base_dir = base_dir;
  return doc;
}

/// Plot tables: diagonal `n, re_A_nn, im_A_nn, stderr, theory_re, theory_im`
/// and full matrix `n, m, re, im, stderr`. The estimate is phase aligned to
/// the theory matrix (error weighted) before writing.
struct PlotFiles {
  std::string diagonal;
  std::string matrix;
  Complex alignment_phase = 1.0;
};

inline PlotFiles make_plot_data(const ResultDocument& doc) {
  const ResolvedExperiment r = resolve_experiment(doc.config);
  const ComplexMatrix theory = theory_matrix(r);
  if (theory.rows() != doc.values.rows() || theory.cols() != doc.values.cols())
    throw Error("emit-plotdata: result matrix shape does not match the configured theory");
  PlotFiles files;
  ComplexMatrix aligned = doc.values;
  if (theory.norm() > 0.0) {
    files.alignment_phase = weighted_phase_align(doc.values, doc.std_errors, theory).phase;
    aligned = doc.values * std::conj(files.alignment_phase);
  }
  std::ostringstream diag, mat;
  const std::string phase_note = "# estimate multiplied by " + detail::format_value(std::conj(files.alignment_phase).real()) +
                                 (std::conj(files.alignment_phase).imag() < 0 ? " - " : " + ") +
                                 detail::format_value(std::abs(files.alignment_phase.imag())) +
                                 "i to align with theory\n";
  diag << phase_note << "# n, re_A_nn, im_A_nn, stderr, theory_re, theory_im\n";
  for (Eigen::Index n = 0; n < aligned.rows(); ++n)
    diag << n << ", " << detail::format_value(aligned(n, n).real()) << ", " << detail::format_value(aligned(n, n).imag())
         << ", " << detail::format_error(doc.std_errors(n, n)) << ", " << detail::format_value(theory(n, n).real())
         << ", " << detail::format_value(theory(n, n).imag()) << "\n";
  mat << phase_note << "# n, m, re, im, stderr\n";
  for (Eigen::Index n = 0; n < aligned.rows(); ++n)
    for (Eigen::Index m = 0; m < aligned.cols(); ++m)
      mat << n << ", " << m << ", " << detail::format_value(aligned(n, m).real()) << ", "
          << detail::format_value(aligned(n, m).imag()) << ", " << detail::format_error(doc.std_errors(n, m)) << "\n";
  files.diagonal = diag.str();
  files.matrix = mat.str();
  return files;
}

/// Text printed by `simulate --dry-run`.
inline std::string dry_run_report(const ResolvedExperiment& r) {
  std::ostringstream out;
  out << "# resolved configuration\n" << serialize(r.config);
  out << "# derived\n";
  out << "dim_cut_resolved = " << r.dim_cut << "\n";
  out << "window = " << r.window << "\n";
  out << "truncation_deficit = " << detail::format_value(r.truncation_deficit) << "\n";
  out << "kernel_grid = x_max " << detail::format_value(r.grid.x_max) << ", dx " << detail::format_value(r.grid.dx)
      << ", k_step " << detail::format_value(r.grid.k_step) << "\n";
  out << "total_samples = " << r.config.blocks * r.config.samples_per_block << "\n";
  for (const auto& w : r.warnings) out << "warning = " << w << "\n";
  const ComplexMatrix t = theory_matrix(r);
  out << "# theory diagonal: n, re, im\n";
  for (Eigen::Index n = 0; n < t.rows(); ++n)
    out << n << ", " << detail::format_value(t(n, n).real()) << ", " << detail::format_value(t(n, n).imag()) << "\n";
  return out.str();
}

/// Bundled configurations.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.operation = OperationKind::displacement;
  c.z_re = 1.0;
  c.z_im = 0.0;
  c.master_seed = 20240601;
  if (name == "fig2_top") {
    c.nbar = 5.0;
    c.eta = 0.9;
    c.blocks = 150;
    c.samples_per_block = 10000;
  } else if (name == "fig2_bottom" || name == "fig2_bottom_scaled") {
    c.nbar = 3.0;
    c.eta = 0.7;
    c.blocks = 300;
    c.samples_per_block = name == "fig2_bottom" ? 200000 : 20000;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.output = name + ".result";
  return c;
}

} // namespace qotomo
