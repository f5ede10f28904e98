// qotomo: simulate, verify and plot-data front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qotomo/errors.hpp"
#include "qotomo/experiment.hpp"
#include "qotomo/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitVerification = 4;

int simulate(const std::string& config_path, unsigned threads, bool dry_run) {
  const qotomo::ExperimentConfig config = qotomo::load_config(config_path);
  const qotomo::ResolvedExperiment resolved = qotomo::resolve_experiment(config);
  if (dry_run) {
    std::cout << qotomo::dry_run_report(resolved);
    return kExitOk;
  }
  for (const auto& w : resolved.warnings) std::cerr << "warning: " << w << "\n";
  const qotomo::SimulationResult result = qotomo::run_simulate(resolved, threads, &std::cerr);
  const auto out_path = config.resolve(config.output);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  {
    std::ofstream out(out_path);
    if (!out) throw qotomo::Error("cannot write result document '" + out_path.string() + "'");
    qotomo::write_result_document(out, result);
  }
  {
    std::ofstream timing(out_path.string() + ".timing");
    qotomo::write_timing(timing, result);
  }
  std::cerr << "wrote " << out_path.string() << " (" << result.wall_seconds << " s)\n";
  return kExitOk;
}

int verify(const std::string& suite, const std::vector<double>& etas, const std::vector<int>& dims,
           std::size_t samples, std::uint64_t seed) {
  qotomo::VerifyReport report;
  if (suite == "unbiasedness") qotomo::verify_unbiasedness(report, dims, seed);
  else if (suite == "choi") qotomo::verify_choi(report, seed);
  else if (suite == "kernels") qotomo::verify_kernels(report, etas);
  else if (suite == "sampler-moments") qotomo::verify_sampler_moments(report, etas, samples, seed);
  std::cout << report.format();
  return report.passed() ? kExitOk : kExitVerification;
}

int emit_plotdata(const std::string& result_path, std::string prefix) {
  std::ifstream in(result_path);
  if (!in) throw qotomo::ConfigError("cannot open result document '" + result_path + "'");
  const qotomo::ResultDocument doc =
      qotomo::read_result_document(in, std::filesystem::path(result_path).parent_path());
  const qotomo::PlotFiles files = qotomo::make_plot_data(doc);
  if (prefix.empty()) prefix = result_path;
  std::ofstream(prefix + ".diag.dat") << files.diagonal;
  std::ofstream(prefix + ".matrix.dat") << files.matrix;
  std::cerr << "wrote " << prefix << ".diag.dat and " << prefix << ".matrix.dat\n";
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tomography of quantum operations from joint homodyne records"};
  app.require_subcommand(1);

  std::string config_path;
  unsigned threads = 0;
  bool dry_run = false;
  auto* sim = app.add_subcommand("simulate", "Sample, estimate and write a result document");
  sim->add_option("--config", config_path, "Experiment configuration file")->required()->check(CLI::ExistingFile);
  sim->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");
  sim->add_flag("--dry-run", dry_run, "Print the resolved configuration and theory targets only");

  std::string suite;
  std::vector<double> etas{1.0, 0.9, 0.7};
  std::vector<int> dims{2, 3};
  std::size_t samples = 1000000;
  std::uint64_t seed = 12345;
  auto* ver = app.add_subcommand("verify", "Run an oracle suite");
  ver->add_option("suite", suite, "unbiasedness | choi | kernels | sampler-moments")
      ->required()
      ->check(CLI::IsMember(qotomo::verify_suites()));
  ver->add_option("--eta", etas, "Detector efficiencies");
  ver->add_option("--dim", dims, "Dimensions for the unbiasedness suite");
  ver->add_option("--samples", samples, "Samples per moment check");
  ver->add_option("--seed", seed, "Master seed");

  std::string result_path, prefix;
  auto* plot = app.add_subcommand("emit-plotdata", "Write columnar plot tables from a result document");
  plot->add_option("--from", result_path, "Result document")->required()->check(CLI::ExistingFile);
  plot->add_option("--prefix", prefix, "Output prefix (default: the result path)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return simulate(config_path, threads, dry_run);
    if (*ver) return verify(suite, etas, dims, samples, seed);
    if (*plot) return emit_plotdata(result_path, prefix);
  } catch (const qotomo::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qotomo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
