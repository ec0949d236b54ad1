#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "lcgp/cli.hpp"

using namespace lcgp;
using namespace lcgp::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("lcgp_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::vector<std::vector<double>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(LCGP_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

AnalysisConfig with_dir(AnalysisConfig c, const fs::path& dir) {
  c.output_dir = dir.string();
  return c;
}

}  // namespace

TEST(Presets, PaperParameterSets) {
  const auto chirp = preset("chirp-paper");
  EXPECT_EQ(chirp.state_grid().size(), 30u);
  EXPECT_EQ(chirp.windows.width_s, 0.25);
  EXPECT_EQ(chirp.windows.spacing_s, 0.1);
  EXPECT_EQ(chirp.step_std_hz, 0.2);
  EXPECT_EQ(chirp.noise_variance, 0.25);

  const auto two = preset("twostate-paper");
  EXPECT_EQ(two.windows.width_s, 0.4);
  EXPECT_EQ(two.windows.spacing_s, 0.05);
  EXPECT_EQ(two.noise_variance, 0.09);
  EXPECT_EQ(two.estimator, Estimator::Mode);
  EXPECT_EQ(two.state_grid().values(), (std::vector<double>{0.0, 1.0}));

  const auto meg = preset("meg-alpha");
  EXPECT_TRUE(std::holds_alternative<Exponential>(meg.broadband));
  EXPECT_EQ(std::get<Oscillatory>(meg.oscillatory).freq_hz, 10.0);
  EXPECT_NO_THROW(meg.model_config().validate());

  EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(ConfigFile, OverridesAndValidation) {
  const auto c = apply_config_text(preset("chirp-paper"),
                                   "[windows]\nwindow_width_s = 0.3\n"
                                   "[grid]\nfreq_min_hz=1\nfreq_max_hz=3\nfreq_step_hz=0.5\n"
                                   "[noise]\nnoise_std = 0.4\n"
                                   "[simulate]\nseed = 18446744073709551615\n"
                                   "[compare]\nbaselines = se(delta_s=0.1); osc(d_s=0.2, freq_hz=4)\n"
                                   "[family]\nbroadband = exp(ell_s=0.5)\n");
  EXPECT_EQ(c.windows.width_s, 0.3);
  EXPECT_EQ(c.state_grid().values(), (std::vector<double>{1.0, 1.5, 2.0, 2.5, 3.0}));
  EXPECT_NEAR(c.noise_variance, 0.16, 1e-15);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_EQ(c.baselines, (std::vector<std::string>{"se(delta_s=0.1)", "osc(d_s=0.2, freq_hz=4)"}));
  EXPECT_TRUE(std::holds_alternative<Exponential>(c.broadband));

  EXPECT_THROW(apply_config_text(c, "[windows]\nwidth = 1\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "[windows]\nwindow_width_s = wide\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "[output]\nestimator = median\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "[family]\nbroadband = rbf(x=1)\n"), ParseError);
  EXPECT_THROW(apply_config_text(c, "[windows\n"), ParseError);
}

TEST(ConfigFile, EchoIncludesDefaults) {
  const auto j = to_json(preset("twostate-paper"));
  for (const char* section : {"input", "simulate", "windows", "family", "grid", "transition", "noise", "output"}) {
    EXPECT_TRUE(j.contains(section)) << section;
  }
  EXPECT_EQ(j["windows"]["truncation_radius"], 3.0);
  EXPECT_EQ(j["transition"]["stay_probability"], 0.98);
  EXPECT_EQ(j["family"]["broadband"], "se(delta_s=0.2)");
}

TEST(Csv, ReadsAndReportsErrors) {
  TempDir dir;
  write_text(dir / "ok.csv", "time,value\n0,1.5\n0.5,-2\n\n1e0,3\n");
  const auto s = read_series_csv(dir / "ok.csv");
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.values()[1], -2.0);

  write_text(dir / "bad.csv", "time,value\n0,1\n0.1,abc\n");
  try {
    read_series_csv(dir / "bad.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text(dir / "hdr.csv", "t,v\n0,1\n");
  EXPECT_THROW(read_series_csv(dir / "hdr.csv"), ParseError);
  write_text(dir / "cols.csv", "time,value\n0,1,2\n");
  EXPECT_THROW(read_series_csv(dir / "cols.csv"), ParseError);
  write_text(dir / "order.csv", "time,value\n0,1\n0,2\n");
  EXPECT_THROW(read_series_csv(dir / "order.csv"), InputError);
  EXPECT_THROW(read_series_csv(dir / "missing.csv"), IoError);
}

TEST(CovarianceBin, LayoutIsHeaderPlusRowMajorLittleEndian) {
  TempDir dir;
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 3.0, 4.5;
  write_covariance_bin(dir / "c.bin", m);
  const std::string bytes = slurp(dir / "c.bin");
  ASSERT_EQ(bytes.size(), 8u + 4u * 8u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 2);
  for (int k = 1; k < 8; ++k) EXPECT_EQ(bytes[k], 0);
  // Second stored value is m(0, 1) = 2.0 = 0x4000000000000000.
  EXPECT_EQ(static_cast<unsigned char>(bytes[8 + 8 + 7]), 0x40);
  EXPECT_EQ(read_covariance_bin(dir / "c.bin"), m);
}

TEST(Simulate, ChirpAndTwoStateRowCounts) {
  TempDir dir;
  cmd_simulate(with_dir(preset("chirp-paper"), dir / "chirp"));
  EXPECT_EQ(count_lines(dir / "chirp/noisy.csv"), 252u);
  EXPECT_EQ(count_lines(dir / "chirp/truth.csv"), 252u);
  cmd_simulate(with_dir(preset("twostate-paper"), dir / "two"));
  EXPECT_EQ(count_lines(dir / "two/noisy.csv"), 502u);
  EXPECT_EQ(slurp(dir / "two/clean.csv").substr(0, 11), "time,value\n");
  EXPECT_THROW(cmd_simulate(with_dir(preset("meg-alpha"), dir / "meg")), ConfigError);
}

TEST(Simulate, SameSeedIsByteIdentical) {
  TempDir dir;
  auto c = preset("twostate-paper");
  c.seed = 99;
  cmd_simulate(with_dir(c, dir / "a"));
  cmd_simulate(with_dir(c, dir / "b"));
  for (const char* f : {"clean.csv", "noisy.csv", "truth.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  c.seed = 100;
  cmd_simulate(with_dir(c, dir / "c"));
  EXPECT_NE(slurp(dir / "a/noisy.csv"), slurp(dir / "c/noisy.csv"));
}

TEST(Analyze, RoundTripFromSimulate) {
  TempDir dir;
  const auto c = with_dir(preset("chirp-paper"), dir.path());
  cmd_simulate(c);
  const auto out = cmd_analyze(c);

  const auto posterior = read_rows(dir / "state_posterior.csv");
  ASSERT_EQ(posterior.size(), 26u);
  for (const auto& row : posterior) {
    ASSERT_EQ(row.size(), 31u);  // segment_time + 30 states
    double sum = 0.0;
    for (std::size_t k = 1; k < row.size(); ++k) sum += row[k];
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  std::ifstream hdr(dir / "state_posterior.csv");
  std::string header;
  std::getline(hdr, header);
  EXPECT_EQ(header.substr(0, 37), "segment_time,state_0.1,state_0.5,stat");

  EXPECT_EQ(count_lines(dir / "posterior_mean.csv"), 252u);
  EXPECT_EQ(count_lines(dir / "point_estimates.csv"), 27u);
  const auto cov = read_covariance_bin(dir / "covariance.bin");
  EXPECT_EQ(cov, out.fit.global_cov.matrix);

  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["num_samples"], 251);
  EXPECT_EQ(summary["config"]["grid"]["states"].size(), 30u);
  EXPECT_TRUE(summary.contains("runtime_s"));
}

TEST(Analyze, RerunGivesIdenticalArtifacts) {
  TempDir dir;
  const auto c = with_dir(preset("twostate-paper"), dir.path());
  cmd_simulate(c);
  cmd_analyze(c);
  const std::string first_mean = slurp(dir / "posterior_mean.csv");
  const std::string first_cov = slurp(dir / "covariance.bin");
  auto first = nlohmann::json::parse(slurp(dir / "summary.json"));
  cmd_analyze(c);
  auto second = nlohmann::json::parse(slurp(dir / "summary.json"));
  first.erase("runtime_s");
  second.erase("runtime_s");
  EXPECT_EQ(first, second);
  EXPECT_EQ(first_mean, slurp(dir / "posterior_mean.csv"));
  EXPECT_EQ(first_cov, slurp(dir / "covariance.bin"));
}

TEST(Compare, ReportsCorrelationsWhenCleanAvailable) {
  TempDir dir;
  auto c = with_dir(preset("twostate-paper"), dir.path());
  cmd_simulate(c);
  c.baselines.push_back(c.baselines.front());  // duplicate on purpose
  const auto methods = cmd_compare(c);
  ASSERT_EQ(methods.size(), 4u);
  const auto report = nlohmann::json::parse(slurp(dir / "comparison.json"));
  ASSERT_EQ(report["methods"].size(), 4u);
  for (const auto& m : report["methods"]) {
    EXPECT_TRUE(m.contains("correlation"));
    EXPECT_TRUE(fs::exists(dir / m["file"].get<std::string>()));
  }
  EXPECT_EQ(report["methods"][1]["correlation"], report["methods"][3]["correlation"]);
  EXPECT_GT(report["methods"][0]["correlation"].get<double>(), report["methods"][1]["correlation"].get<double>());
}

TEST(Compare, NoCleanSignalOmitsCorrelations) {
  TempDir dir;
  auto c = with_dir(preset("chirp-paper"), dir.path());
  cmd_simulate(c);
  fs::remove(dir / "clean.csv");
  const auto methods = cmd_compare(c);
  ASSERT_EQ(methods.size(), 2u);
  EXPECT_FALSE(methods[0].correlation);
  EXPECT_TRUE(methods[1].selected_param);
  const auto report = nlohmann::json::parse(slurp(dir / "comparison.json"));
  EXPECT_FALSE(report["methods"][0].contains("correlation"));
  EXPECT_TRUE(fs::exists(dir / "method_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "method_1.csv"));
}

TEST(Compare, BadBaselineIsRejected) {
  TempDir dir;
  auto c = with_dir(preset("twostate-paper"), dir.path());
  cmd_simulate(c);
  c.baselines = {"scan_osc(width=2)"};
  EXPECT_THROW(cmd_compare(c), ConfigError);
}

TEST(Executable, CommandsAndExitCodes) {
  TempDir dir;
  const std::string out = "--output-dir " + dir.path().string();
  EXPECT_EQ(run_tool("simulate --preset twostate-paper --seed 3 " + out), 0);
  EXPECT_EQ(run_tool("analyze --preset twostate-paper " + out), 0);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_EQ(run_tool("compare --preset twostate-paper " + out), 0);
  EXPECT_TRUE(fs::exists(dir / "comparison.json"));

  write_text(dir / "cfg.ini", "[transition]\nstay_probability = 0.9\n");
  EXPECT_EQ(run_tool("analyze --preset twostate-paper --config " + (dir / "cfg.ini").string() + " " + out), 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["config"]["transition"]["stay_probability"], 0.9);

  EXPECT_NE(run_tool("analyze --preset twostate-paper --input " + (dir / "missing.csv").string() + " " + out), 0);
  write_text(dir / "bad.ini", "[transition]\nstay_probability = 2\n");
  EXPECT_NE(run_tool("analyze --preset twostate-paper --config " + (dir / "bad.ini").string() + " " + out), 0);
  EXPECT_NE(run_tool("simulate --preset unknown " + out), 0);
  EXPECT_NE(run_tool("frobnicate"), 0);
}

TEST(Executable, DiagnosticIsOneLineOnStderr) {
  TempDir dir;
  const std::string cmd = std::string(LCGP_TOOL_PATH) + " analyze --input " + (dir / "nope.csv").string() +
                          " --output-dir " + dir.path().string() + " 2>" + (dir / "err.txt").string();
  EXPECT_NE(std::system(cmd.c_str()), 0);
  const std::string err = slurp(dir / "err.txt");
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  EXPECT_EQ(err.rfind("lcgp: ", 0), 0u);
}
