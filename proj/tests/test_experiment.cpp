#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qotomo/experiment.hpp"

using namespace qotomo;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("qotomo_test_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.nbar = 1.0;
  c.eta = 0.9;
  c.n_max = 3;
  c.blocks = 4;
  c.samples_per_block = 3000;
  c.master_seed = 77;
  return c;
}

std::string document(const SimulationResult& r) {
  std::ostringstream out;
  write_result_document(out, r);
  return out.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QOTOMO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Config, SerializeParseRoundTrip) {
  std::mt19937_64 rng(201);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    ExperimentConfig c;
    c.operation = static_cast<OperationKind>(t % 3);
    c.z_re = u(rng) * 4 - 2;
    c.z_im = u(rng) * 1e-7;
    c.kraus_file = t % 2 ? "ops.kraus" : "";
    c.nbar = 0.1 + 10 * u(rng);
    c.eta = 0.5 + 0.5 * u(rng);
    c.dim_cut = t % 50;
    c.n_max = t % 7;
    c.blocks = 2 + t;
    c.samples_per_block = 1 + 997 * t;
    c.master_seed = rng();
    c.reference_auto = t % 4 == 0;
    c.i0 = t % 3;
    c.j0 = t % 5;
    c.max_deficit = u(rng) * 1e-2;
    c.grid_x_max = t % 3 ? 0.0 : 10 * u(rng);
    c.grid_dx = 1e-3 + u(rng) * 1e-2;
    c.grid_k_step = 1e-3 + u(rng) * 1e-2;
    c.output = "out/" + std::to_string(t) + ".result";
    c.dump_samples = t % 5 ? "" : "dump.txt";
    c.kernel_cache = t % 6 ? "" : "cache";
    const ExperimentConfig back = parse_config_text(serialize(c));
    EXPECT_TRUE(back == c) << serialize(c);
    EXPECT_EQ(config_hash(back), config_hash(c));
  }
  ExperimentConfig a, b;
  b.master_seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config_text("nbar = 1\ncolour = red\n"), ConfigError);
  EXPECT_THROW(parse_config_text("nbar = 1\nnbar = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("format_version = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("operation = teleport\n"), ConfigError);
  EXPECT_THROW(parse_config_text("nbar = lots\n"), ConfigError);
  EXPECT_THROW(parse_config_text("nbar 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("blocks = -3\n"), ConfigError);
  EXPECT_NO_THROW(parse_config_text("# comment\n\nnbar = 2 \n"));
}

TEST(Config, EtaRange) {
  ExperimentConfig c = small_config();
  for (double eta : {0.5, 0.3, 1.01, -1.0, std::nan("")}) {
    c.eta = eta;
    EXPECT_THROW(resolve_experiment(c), ConfigError) << eta;
  }
  for (double eta : {0.51, 0.7, 1.0}) {
    c.eta = eta;
    EXPECT_NO_THROW(resolve_experiment(c)) << eta;
  }
}

TEST(Config, TruncationDeficitNamesMinimumCut) {
  ExperimentConfig c = small_config();
  c.nbar = 5.0;
  c.dim_cut = 20;
  c.n_max = 7;
  // Dropped weight (nbar / (nbar + 1))^N <= 1e-3 first at N = 38.
  int needed = 1;
  while (std::pow(5.0 / 6.0, needed) > 1e-3) ++needed;
  ASSERT_EQ(needed, 38);
  try {
    resolve_experiment(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("increase dim_cut to at least 38"), std::string::npos) << e.what();
  }
  c.dim_cut = 38;
  EXPECT_NO_THROW(resolve_experiment(c));
  c.dim_cut = 0;
  EXPECT_EQ(resolve_experiment(c).dim_cut, default_dim_cut(5.0));
}

TEST(Config, WindowAndReference) {
  ExperimentConfig c = small_config();
  c.dim_cut = 16;
  c.n_max = 16;
  EXPECT_THROW(resolve_experiment(c), ConfigError);
  c.n_max = 3;
  EXPECT_EQ(resolve_experiment(c).window, 4);
  c.i0 = 4;
  EXPECT_THROW(resolve_experiment(c), ConfigError);
  c.reference_auto = true;
  EXPECT_NO_THROW(resolve_experiment(c));
  c = small_config();
  c.blocks = 1;
  EXPECT_THROW(resolve_experiment(c), ConfigError);
  c = small_config();
  c.nbar = 0.0;
  EXPECT_THROW(resolve_experiment(c), ConfigError);
  c = small_config();
  c.operation = OperationKind::kraus;
  EXPECT_THROW(resolve_experiment(c), ConfigError);
}

TEST(KrausFile, ParsesBundledAmplitudeDamping) {
  const KrausMap k = load_kraus(fs::path(QOTOMO_CONFIG_DIR) / "amplitude_damping.kraus");
  ASSERT_EQ(k.dim(), 2);
  ASSERT_EQ(k.kraus().size(), 2u);
  ComplexMatrix s = ComplexMatrix::Zero(2, 2);
  for (const auto& m : k.kraus()) s += m.adjoint() * m;
  EXPECT_LT((s - ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(std::norm(k.kraus()[1](0, 1)), 0.3, 1e-15);
}

TEST(KrausFile, RejectsMalformed) {
  const auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_kraus(in);
  };
  EXPECT_THROW(parse("kraus 1 0"), ConfigError);
  EXPECT_THROW(parse("dim 1\n"), ConfigError);
  EXPECT_THROW(parse("dim 1\nkraus 1\n"), ConfigError);
  EXPECT_THROW(parse("dim 1\nkraus 2 0\n"), ConfigError); // norm above one
  EXPECT_NEAR(parse("dim 1 # scalar\nkraus 0.5 0.5\n").kraus()[0](0, 0).imag(), 0.5, 0);
}

TEST(ResultDocument, WriteReadRoundTrip) {
  const SimulationResult res = run_simulate(resolve_experiment(small_config()), 1);
  std::istringstream in(document(res));
  const ResultDocument doc = read_result_document(in);
  EXPECT_EQ(doc.kind, "pure");
  EXPECT_TRUE(doc.config == small_config());
  EXPECT_EQ(doc.fields.at("config_hash"), config_hash(small_config()));
  EXPECT_EQ(doc.fields.at("phase_convention"), kPhaseConvention);
  ASSERT_EQ(doc.values.rows(), 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      EXPECT_LE(std::abs(doc.values(i, j) - res.estimate.values(i, j)), 1e-8 * (1 + std::abs(res.estimate.values(i, j))));
      EXPECT_NEAR(doc.std_errors(i, j), res.estimate.std_errors(i, j), 1e-2 * res.estimate.std_errors(i, j));
    }
  std::istringstream broken("result_format_version = 1\n[config]\n[end config]\nrows = 1\ncols = 1\n[matrix]\n5 5 0 0 0\n");
  EXPECT_THROW(read_result_document(broken), Error);
}

TEST(Simulate, ThreadCountDoesNotChangeDocument) {
  const ResolvedExperiment r = resolve_experiment(small_config());
  const std::string one = document(run_simulate(r, 1));
  EXPECT_EQ(one, document(run_simulate(r, 4)));
  EXPECT_EQ(one, document(run_simulate(r, 3)));
  ExperimentConfig other = small_config();
  other.master_seed = 78;
  EXPECT_NE(one, document(run_simulate(resolve_experiment(other), 1)));
}

TEST(Simulate, AutoReferenceAndDump) {
  const fs::path dir = scratch_dir();
  ExperimentConfig c = small_config();
  c.reference_auto = true;
  c.dump_samples = "samples.txt";
  c.base_dir = dir;
  const SimulationResult res = run_simulate(resolve_experiment(c), 2);
  // Twin beam nbar = 1 under D(1): the largest output amplitude sits in
  // the first rows and columns.
  EXPECT_LE(res.estimate.i0, 2);
  EXPECT_LE(res.estimate.j0, 2);
  std::ifstream in(dir / "samples.txt");
  const auto rows = read_sample_dump(in);
  ASSERT_EQ(rows.size(), c.blocks * c.samples_per_block);
  EXPECT_EQ(rows.front().block_id, 0u);
  EXPECT_EQ(rows.back().block_id, c.blocks - 1);
}

TEST(Simulate, KernelCacheGivesSameDocument) {
  const fs::path dir = scratch_dir();
  ExperimentConfig c = small_config();
  c.kernel_cache = "kcache";
  c.base_dir = dir;
  const ResolvedExperiment r = resolve_experiment(c);
  const std::string first = document(run_simulate(r, 1));
  ASSERT_FALSE(fs::is_empty(dir / "kcache"));
  EXPECT_EQ(first, document(run_simulate(r, 1)));
}

TEST(Simulate, AmplitudeDampingChoi) {
  ExperimentConfig c = load_config(fs::path(QOTOMO_CONFIG_DIR) / "amplitude_damping.cfg");
  const ResolvedExperiment r = resolve_experiment(c);
  ASSERT_TRUE(r.choi());
  const SimulationResult res = run_simulate(r, 1);
  const ComplexMatrix truth = theory_matrix(r);
  ASSERT_EQ(res.estimate.values.rows(), 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      EXPECT_LT(std::abs(res.estimate.values(i, j) - truth(i, j)), 5.0 * res.estimate.std_errors(i, j) + 1e-12)
          << i << "," << j;
  EXPECT_NEAR(res.estimate.p_hat, 1.0, 1e-12);
}

TEST(PlotData, DiagonalTableWithTheoryColumn) {
  ExperimentConfig c = preset("fig2_top");
  c.blocks = 4;
  c.samples_per_block = 2000;
  const SimulationResult res = run_simulate(resolve_experiment(c), 1);
  std::istringstream in(document(res));
  const PlotFiles files = make_plot_data(read_result_document(in));
  std::istringstream diag(files.diagonal);
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(diag, line)) {
    if (line == "# n, re_A_nn, im_A_nn, stderr, theory_re, theory_im") header = true;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    int n = -1;
    double re, im, se, tre, tim;
    ASSERT_TRUE(ss >> n >> re >> im >> se >> tre >> tim);
    EXPECT_EQ(n, rows);
    EXPECT_NEAR(tre, oracle::displacement_diag_z1(n), 1e-8);
    EXPECT_EQ(tim, 0.0);
    ++rows;
  }
  EXPECT_TRUE(header);
  EXPECT_EQ(rows, 8);
  EXPECT_NE(files.matrix.find("# n, m, re, im, stderr\n"), std::string::npos);
  EXPECT_EQ(std::count(files.matrix.begin(), files.matrix.end(), '\n'), 2 + 64);
}

TEST(PlotData, IdentityTheoryIsDelta) {
  ExperimentConfig c = small_config();
  c.operation = OperationKind::identity;
  const ComplexMatrix t = theory_matrix(resolve_experiment(c));
  EXPECT_EQ(t, ComplexMatrix::Identity(4, 4));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir();
  const std::string cfg_dir = QOTOMO_CONFIG_DIR;
  EXPECT_EQ(run_cli("simulate --config " + cfg_dir + "/fig2_top.cfg --dry-run"), 0);
  EXPECT_EQ(run_cli("verify choi"), 0);
  EXPECT_EQ(run_cli("verify unbiasedness --dim 2 3"), 0);
  EXPECT_EQ(run_cli("verify nonsense"), 2);
  EXPECT_EQ(run_cli("simulate"), 2);
  EXPECT_EQ(run_cli(""), 2);

  {
    std::ofstream bad(dir / "bad.cfg");
    bad << "format_version = 1\neta = 0.4\n";
  }
  EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.cfg").string()), 2);
  {
    std::ofstream bad(dir / "unknown.cfg");
    bad << "format_version = 1\nwhatever = 1\n";
  }
  EXPECT_EQ(run_cli("simulate --config " + (dir / "unknown.cfg").string()), 2);
  {
    std::ofstream junk(dir / "junk.result");
    junk << "not a result\n";
  }
  EXPECT_EQ(run_cli("emit-plotdata --from " + (dir / "junk.result").string()), 3);

  {
    std::ofstream ok(dir / "small.cfg");
    ok << "format_version = 1\nnbar = 1\nn_max = 3\nblocks = 3\nsamples_per_block = 500\noutput = small.result\n";
  }
  ASSERT_EQ(run_cli("simulate --config " + (dir / "small.cfg").string() + " --threads 2"), 0);
  EXPECT_TRUE(fs::exists(dir / "small.result"));
  EXPECT_NE(slurp(dir / "small.result.timing").find("wall_clock_seconds = "), std::string::npos);
  EXPECT_EQ(slurp(dir / "small.result").find("wall_clock"), std::string::npos);
  ASSERT_EQ(run_cli("emit-plotdata --from " + (dir / "small.result").string() + " --prefix " + (dir / "plot").string()), 0);
  EXPECT_NE(slurp(dir / "plot.diag.dat").find("theory_re"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "plot.matrix.dat"));
}

} // namespace
