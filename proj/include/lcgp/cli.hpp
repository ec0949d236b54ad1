#pragma once

// Command layer behind the `lcgp` executable: presets, INI configuration,
// CSV / binary artifacts and the simulate / analyze / compare commands.
// Depends on nlohmann/json and Boost.PropertyTree in addition to Eigen.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "lcgp/coupled.hpp"
#include "lcgp/detail/numfmt.hpp"
#include "lcgp/error.hpp"
#include "lcgp/signals.hpp"

namespace lcgp::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

enum class SignalKind { None, Chirp, TwoState };
enum class FamilyKind { Frequency, Switch };
enum class TransitionKind { RandomWalk, Switch };

/// Every effective parameter of one CLI invocation.
struct AnalysisConfig {
  std::string preset = "chirp-paper";

  // [input]
  std::optional<std::string> input_path;  // default <output_dir>/noisy.csv
  std::optional<std::string> clean_path;  // default <output_dir>/clean.csv when present

  // [simulate]
  SignalKind signal = SignalKind::Chirp;
  ChirpSpec chirp;
  TwoStateSpec two_state;
  std::uint64_t seed = 1;
  double signal_noise_std = 0.5;

  // [windows]
  WindowParams windows{0.1, 0.25, 3.0};

  // [family]
  FamilyKind family = FamilyKind::Frequency;
  double oscillation_width_s = 0.4;
  StationaryKernel broadband = SquaredExponential{0.2};
  StationaryKernel oscillatory = Oscillatory{0.2, 5.0};

  // [grid]  (frequency family only; the switch family always uses {0, 1})
  double freq_min_hz = 0.1;
  double freq_max_hz = 12.0;
  double freq_step_hz = 0.4;

  // [transition]
  TransitionKind transition = TransitionKind::RandomWalk;
  double step_std_hz = 0.2;
  double autoregressive_coeff = 1.0;
  double stay_probability = 0.98;

  // [noise]
  double noise_variance = 0.25;
  std::optional<double> regression_noise_variance;

  // [output]
  std::string output_dir = "out";
  Estimator estimator = Estimator::Mean;

  // [compare]  kernel strings, or scan_osc(d_s=...) for a likelihood scan over the grid
  std::vector<std::string> baselines{"scan_osc(d_s=0.4)"};

  LocalModelFamily model_family() const {
    if (family == FamilyKind::Frequency) return FrequencyFamily{oscillation_width_s};
    return SwitchFamily{broadband, oscillatory};
  }

  StateGrid state_grid() const {
    if (family == FamilyKind::Switch) return StateGrid({0.0, 1.0});
    return StateGrid::range(freq_min_hz, freq_max_hz, freq_step_hz);
  }

  CoupledModelConfig model_config() const {
    CoupledModelConfig c{
        model_family(),
        state_grid(),
        transition == TransitionKind::RandomWalk
            ? TransitionParams{RandomWalkTransition{step_std_hz, autoregressive_coeff}}
            : TransitionParams{SwitchTransition{stay_probability}},
        windows,
        NoiseModel{noise_variance},
        estimator,
        std::nullopt,
    };
    if (regression_noise_variance) c.regression_noise = NoiseModel{*regression_noise_variance};
    return c;
  }

  fs::path input_file() const { return input_path ? fs::path(*input_path) : fs::path(output_dir) / "noisy.csv"; }

  std::optional<fs::path> clean_file() const {
    if (clean_path) return fs::path(*clean_path);
    const auto p = fs::path(output_dir) / "clean.csv";
    if (fs::exists(p)) return p;
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() { return {"chirp-paper", "twostate-paper", "meg-alpha"}; }

inline AnalysisConfig preset(std::string_view name) {
  AnalysisConfig c;
  c.preset = std::string(name);
  if (name == "chirp-paper") return c;  // the struct defaults

  if (name == "twostate-paper" || name == "meg-alpha") {
    c.windows = {0.05, 0.4, 3.0};
    c.family = FamilyKind::Switch;
    c.transition = TransitionKind::Switch;
    c.stay_probability = 0.98;
    c.estimator = Estimator::Mode;
  }
  if (name == "twostate-paper") {
    c.signal = SignalKind::TwoState;
    c.signal_noise_std = 0.3;
    c.broadband = SquaredExponential{0.2};
    c.oscillatory = Oscillatory{0.2, 5.0};
    c.noise_variance = 0.09;
    c.baselines = {"se(delta_s=0.2)", "osc(d_s=0.2, freq_hz=5)"};
    return c;
  }
  if (name == "meg-alpha") {
    c.signal = SignalKind::None;
    c.broadband = Exponential{0.3};
    c.oscillatory = Oscillatory{std::sqrt(0.03), 10.0};
    c.noise_variance = 0.5;
    c.baselines = {to_string(c.broadband), to_string(c.oscillatory)};
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// INI configuration

namespace detail {

inline double number_field(const std::string& key, const std::string& text) {
  const auto v = lcgp::detail::parse_number(text);
  if (!v || !std::isfinite(*v)) throw ConfigError("'" + key + "': not a number: '" + text + "'");
  return *v;
}

inline std::uint64_t seed_field(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto t = lcgp::detail::trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "': not an unsigned 64-bit integer: '" + text + "'");
  }
  return v;
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    const auto semi = text.find(';');
    const auto item = lcgp::detail::trim(text.substr(0, semi));
    if (!item.empty()) out.emplace_back(item);
    if (semi == std::string_view::npos) break;
    text.remove_prefix(semi + 1);
  }
  return out;
}

}  // namespace detail

/// Applies the key/value pairs of an INI text on top of `base`. Unknown
/// sections or keys are rejected.
inline AnalysisConfig apply_config_text(AnalysisConfig c, const std::string& text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }

  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ConfigError("key '" + section + "' must appear inside a [section]");
    }
    for (const auto& [key, node] : entries) {
      const std::string full = section + "." + key;
      const std::string value = node.data();
      const auto num = [&] { return detail::number_field(full, value); };

      if (full == "input.path") c.input_path = value;
      else if (full == "input.clean") c.clean_path = value;
      else if (full == "simulate.signal") {
        if (value == "chirp") c.signal = SignalKind::Chirp;
        else if (value == "twostate") c.signal = SignalKind::TwoState;
        else if (value == "none") c.signal = SignalKind::None;
        else throw ConfigError("simulate.signal must be chirp, twostate or none");
      }
      else if (full == "simulate.seed") c.seed = detail::seed_field(full, value);
      else if (full == "simulate.noise_std") c.signal_noise_std = num();
      else if (full == "simulate.t_start_s") c.chirp.t_start = c.two_state.t_start = num();
      else if (full == "simulate.t_end_s") c.chirp.t_end = c.two_state.t_end = num();
      else if (full == "simulate.sample_rate_hz") c.chirp.sample_rate_hz = num();
      else if (full == "simulate.step_s") c.two_state.step = num();
      else if (full == "simulate.state_threshold") c.two_state.state_threshold = num();
      else if (full == "windows.window_spacing_s") c.windows.spacing_s = num();
      else if (full == "windows.window_width_s") c.windows.width_s = num();
      else if (full == "windows.truncation_radius") c.windows.truncation_radius = num();
      else if (full == "family.type") {
        if (value == "frequency") c.family = FamilyKind::Frequency;
        else if (value == "switch") c.family = FamilyKind::Switch;
        else throw ConfigError("family.type must be frequency or switch");
      }
      else if (full == "family.oscillation_width_s") c.oscillation_width_s = num();
      else if (full == "family.broadband") c.broadband = parse_kernel(value);
      else if (full == "family.oscillatory") c.oscillatory = parse_kernel(value);
      else if (full == "grid.freq_min_hz") c.freq_min_hz = num();
      else if (full == "grid.freq_max_hz") c.freq_max_hz = num();
      else if (full == "grid.freq_step_hz") c.freq_step_hz = num();
      else if (full == "transition.type") {
        if (value == "random_walk") c.transition = TransitionKind::RandomWalk;
        else if (value == "switch") c.transition = TransitionKind::Switch;
        else throw ConfigError("transition.type must be random_walk or switch");
      }
      else if (full == "transition.step_std_hz") c.step_std_hz = num();
      else if (full == "transition.autoregressive_coeff") c.autoregressive_coeff = num();
      else if (full == "transition.stay_probability") c.stay_probability = num();
      else if (full == "noise.noise_variance") c.noise_variance = num();
      else if (full == "noise.noise_std") c.noise_variance = num() * num();
      else if (full == "noise.regression_noise_variance") c.regression_noise_variance = num();
      else if (full == "output.dir") c.output_dir = value;
      else if (full == "output.estimator") {
        if (value == "mean") c.estimator = Estimator::Mean;
        else if (value == "mode") c.estimator = Estimator::Mode;
        else throw ConfigError("output.estimator must be mean or mode");
      }
      else if (full == "compare.baselines") c.baselines = detail::split_list(value);
      else throw ConfigError("unknown configuration key '" + full + "'");
    }
  }
  return c;
}

inline AnalysisConfig load_config(const fs::path& path, AnalysisConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return apply_config_text(std::move(base), buf.str());
}

inline ordered_json to_json(const AnalysisConfig& c) {
  const auto signal = c.signal == SignalKind::Chirp ? "chirp" : c.signal == SignalKind::TwoState ? "twostate" : "none";
  ordered_json j;
  j["preset"] = c.preset;
  j["input"] = {{"path", c.input_file().string()},
                {"clean", c.clean_path ? ordered_json(*c.clean_path) : ordered_json(nullptr)}};
  j["simulate"] = {{"signal", signal},
                   {"seed", c.seed},
                   {"noise_std", c.signal_noise_std},
                   {"chirp", {{"t_start_s", c.chirp.t_start}, {"t_end_s", c.chirp.t_end},
                              {"sample_rate_hz", c.chirp.sample_rate_hz}}},
                   {"twostate", {{"t_start_s", c.two_state.t_start}, {"t_end_s", c.two_state.t_end},
                                 {"step_s", c.two_state.step}, {"state_threshold", c.two_state.state_threshold}}}};
  j["windows"] = {{"window_spacing_s", c.windows.spacing_s},
                  {"window_width_s", c.windows.width_s},
                  {"truncation_radius", c.windows.truncation_radius}};
  j["family"] = {{"type", c.family == FamilyKind::Frequency ? "frequency" : "switch"},
                 {"oscillation_width_s", c.oscillation_width_s},
                 {"broadband", to_string(c.broadband)},
                 {"oscillatory", to_string(c.oscillatory)}};
  j["grid"] = {{"freq_min_hz", c.freq_min_hz}, {"freq_max_hz", c.freq_max_hz}, {"freq_step_hz", c.freq_step_hz},
               {"states", c.state_grid().values()}};
  j["transition"] = {{"type", c.transition == TransitionKind::RandomWalk ? "random_walk" : "switch"},
                     {"step_std_hz", c.step_std_hz},
                     {"autoregressive_coeff", c.autoregressive_coeff},
                     {"stay_probability", c.stay_probability}};
  j["noise"] = {{"noise_variance", c.noise_variance},
                {"regression_noise_variance",
                 c.regression_noise_variance ? ordered_json(*c.regression_noise_variance) : ordered_json(nullptr)}};
  j["output"] = {{"dir", c.output_dir}, {"estimator", c.estimator == Estimator::Mean ? "mean" : "mode"}};
  j["compare"] = {{"baselines", c.baselines}};
  return j;
}

// ---------------------------------------------------------------------------
// Files

/// Reads a `time,value` CSV. Throws ParseError (with line) or InputError.
inline TimeSeries read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> times, values;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = lcgp::detail::trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      std::string h(row);
      std::erase(h, ' ');
      if (h != "time,value") throw ParseError(path.string() + ": expected header 'time,value'", line_no);
      header_seen = true;
      continue;
    }
    const auto comma = row.find(',');
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
      throw ParseError(path.string() + ": expected two comma-separated fields", line_no);
    }
    const auto t = lcgp::detail::parse_number(row.substr(0, comma));
    const auto v = lcgp::detail::parse_number(row.substr(comma + 1));
    if (!t || !v) throw ParseError(path.string() + ": malformed number", line_no);
    times.push_back(*t);
    values.push_back(*v);
  }
  if (!header_seen) throw ParseError(path.string() + ": empty file", line_no);
  return TimeSeries(std::move(times), std::move(values));
}

/// Writes a header-first CSV of equally long numeric columns.
inline void write_csv(const fs::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out << (c ? "," : "") << lcgp::detail::format_number(columns[c][r]);
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

namespace detail {

template <class T>
void put_le(std::ostream& out, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.write(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <class T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bits{};
  in.read(reinterpret_cast<char*>(bits.data()), bits.size());
  if (!in) throw IoError("truncated binary file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

/// Layout: uint64 n, then n*n float64 in row-major order; all little-endian.
inline void write_covariance_bin(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_le<double>(out, m(r, c));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline Eigen::MatrixXd read_covariance_bin(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const auto n = static_cast<Eigen::Index>(detail::get_le<std::uint64_t>(in));
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = detail::get_le<double>(in);
  }
  return m;
}

inline void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline fs::path prepare_output_dir(const AnalysisConfig& c) {
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

// ---------------------------------------------------------------------------
// Commands

/// Writes clean.csv, noisy.csv and truth.csv (true frequency or oscillatory
/// state indicator) for the configured synthetic signal.
inline std::vector<fs::path> cmd_simulate(const AnalysisConfig& c) {
  const fs::path dir = prepare_output_dir(c);
  std::vector<double> times, clean, noisy, truth;
  if (c.signal == SignalKind::Chirp) {
    ChirpSpec spec = c.chirp;
    spec.seed = c.seed;
    spec.noise_std = c.signal_noise_std;
    auto data = gen_chirp(spec);
    times.assign(data.clean.times().begin(), data.clean.times().end());
    clean.assign(data.clean.values().begin(), data.clean.values().end());
    noisy.assign(data.noisy.values().begin(), data.noisy.values().end());
    truth = std::move(data.true_frequency);
  } else if (c.signal == SignalKind::TwoState) {
    TwoStateSpec spec = c.two_state;
    spec.seed = c.seed;
    spec.noise_std = c.signal_noise_std;
    auto data = gen_two_state(spec);
    times.assign(data.clean.times().begin(), data.clean.times().end());
    clean.assign(data.clean.values().begin(), data.clean.values().end());
    noisy.assign(data.noisy.values().begin(), data.noisy.values().end());
    truth = std::move(data.true_state);
  } else {
    throw ConfigError("preset '" + c.preset + "' has no synthetic signal; set [simulate] signal");
  }

  std::vector<fs::path> written{dir / "clean.csv", dir / "noisy.csv", dir / "truth.csv"};
  write_csv(written[0], {"time", "value"}, {times, clean});
  write_csv(written[1], {"time", "value"}, {times, noisy});
  write_csv(written[2], {"time", "value"}, {times, truth});
  return written;
}

struct AnalyzeOutput {
  FitResult fit;
  ordered_json summary;
};

/// Runs the coupled fit and writes posterior_mean.csv, state_posterior.csv,
/// point_estimates.csv, covariance.bin and summary.json.
inline AnalyzeOutput cmd_analyze(const AnalysisConfig& c) {
  const auto started = std::chrono::steady_clock::now();
  const TimeSeries series = read_series_csv(c.input_file());
  const CoupledModelConfig model = c.model_config();
  FitResult r = fit(series, model);
  const fs::path dir = prepare_output_dir(c);

  std::vector<double> times(series.times().begin(), series.times().end());
  write_csv(dir / "posterior_mean.csv", {"time", "mean", "variance"},
            {times, detail::to_vector(r.regression.posterior_mean),
             detail::to_vector(r.regression.posterior_variance)});

  std::vector<std::string> header{"segment_time"};
  std::vector<std::vector<double>> cols{r.windows.support_points};
  for (std::size_t a = 0; a < model.grid.size(); ++a) {
    header.push_back("state_" + lcgp::detail::format_number(model.grid[a]));
    cols.push_back(detail::to_vector(r.marginals.gamma.col(static_cast<Eigen::Index>(a))));
  }
  write_csv(dir / "state_posterior.csv", header, cols);
  write_csv(dir / "point_estimates.csv", {"segment_time", "estimate"},
            {r.windows.support_points, r.point_estimates});
  write_covariance_bin(dir / "covariance.bin", r.global_cov.matrix);

  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  ordered_json summary;
  summary["log_evidence"] = r.marginals.log_evidence;
  summary["num_samples"] = series.size();
  summary["num_segments"] = r.plan.size();
  summary["num_states"] = model.grid.size();
  summary["regression_jitter"] = r.regression_jitter;
  summary["config"] = to_json(c);
  summary["runtime_s"] = runtime;
  write_json(dir / "summary.json", summary);
  return {std::move(r), std::move(summary)};
}

struct MethodResult {
  std::string name;
  RegressionResult regression;
  std::optional<double> correlation;
  std::optional<double> selected_param;
};

/// Runs one baseline description: a stationary kernel string, or
/// scan_osc(d_s=...) for an oscillatory likelihood scan over the state grid.
inline MethodResult run_baseline(const std::string& text, const TimeSeries& series, const AnalysisConfig& c) {
  MethodResult m;
  m.name = text;
  const auto body = lcgp::detail::trim(text);
  if (body.starts_with("scan_osc(")) {
    const auto inner = body.substr(9, body.size() - 10);
    const auto eq = inner.find('=');
    if (!body.ends_with(")") || eq == std::string_view::npos || lcgp::detail::trim(inner.substr(0, eq)) != "d_s") {
      throw ConfigError("baseline '" + text + "': expected scan_osc(d_s=<seconds>)");
    }
    const double d = detail::number_field(text, std::string(inner.substr(eq + 1)));
    const StateGrid grid = StateGrid::range(c.freq_min_hz, c.freq_max_hz, c.freq_step_hz);
    auto best = stationary_baseline_fit(series, FrequencyFamily{d}, grid.values(), NoiseModel{c.noise_variance});
    m.regression = std::move(best.regression);
    m.selected_param = best.best_param;
  } else {
    m.regression = stationary_fit(series, as_kernel(parse_kernel(body)), NoiseModel{c.noise_variance});
  }
  return m;
}

/// Coupled model plus every configured baseline; writes comparison.json and
/// one method_<k>.csv per method.
inline std::vector<MethodResult> cmd_compare(const AnalysisConfig& c) {
  const TimeSeries series = read_series_csv(c.input_file());
  std::optional<TimeSeries> clean;
  if (const auto p = c.clean_file()) clean = read_series_csv(*p);
  if (clean && clean->size() != series.size()) throw InputError("clean signal length differs from input");

  std::vector<MethodResult> methods;
  methods.push_back({"coupled", fit(series, c.model_config()).regression, std::nullopt, std::nullopt});
  for (const auto& b : c.baselines) methods.push_back(run_baseline(b, series, c));

  const fs::path dir = prepare_output_dir(c);
  std::vector<double> times(series.times().begin(), series.times().end());
  ordered_json report;
  report["input"] = c.input_file().string();
  report["clean"] = clean ? ordered_json(c.clean_file()->string()) : ordered_json(nullptr);
  report["methods"] = ordered_json::array();
  for (std::size_t k = 0; k < methods.size(); ++k) {
    auto& m = methods[k];
    if (clean) m.correlation = pearson_correlation(m.regression.posterior_mean, clean->values());
    const std::string file = "method_" + std::to_string(k) + ".csv";
    write_csv(dir / file, {"time", "mean", "variance"},
              {times, detail::to_vector(m.regression.posterior_mean),
               detail::to_vector(m.regression.posterior_variance)});
    ordered_json entry{{"name", m.name}, {"file", file}};
    if (m.correlation) entry["correlation"] = *m.correlation;
    if (m.selected_param) entry["selected_param"] = *m.selected_param;
    report["methods"].push_back(std::move(entry));
  }
  report["config"] = to_json(c);
  write_json(dir / "comparison.json", report);
  return methods;
}

}  // namespace lcgp::cli
