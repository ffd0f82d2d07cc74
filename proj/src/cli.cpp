#include "csieve/cli.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "csieve/calibration.hpp"
#include "csieve/evaluation.hpp"
#include "csieve/models.hpp"
#include "csieve/scanner.hpp"

namespace csieve {

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) fail("IoError", "cannot write " + out_path);
  out << text;
}

AlphabetMode parse_alphabet(const std::string& s) {
  if (s == "observed") return AlphabetMode::observed();
  if (s == "fixed") return AlphabetMode::fixed(256);
  if (s.rfind("fixed:", 0) == 0) {
    const int size = std::stoi(s.substr(6));
    return AlphabetMode::fixed(size);
  }
  fail("BadAlphabet", "expected observed, fixed, or fixed:<size>, got " + s);
}

std::int64_t parse_theta(const std::string& s) {
  if (s == "inf" || s == "none") return kNoChange;
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1)
    fail("BadTheta", "--theta expects a positive integer or 'inf'");
  return v;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

struct DetectorFlags {
  std::string method = "cusum";
  double c = 1.2;
  int df = 255;
  std::string direction = "below";
  std::string drift = "exact";
  double nu = 0.05;

  DetectorConfig to_config() const {
    DetectorConfig config;
    config.method = method_from_string(method);
    config.model = ShiftModel{df, c};
    config.shewhart_direction = direction_from_string(direction);
    config.drift = drift_from_string(drift);
    config.nu = config.method == Method::ShiryaevBayes ? nu : 0.0;
    return config;
  }
};

void add_detector_flags(CLI::App* cmd, DetectorFlags& flags) {
  cmd->add_option("--method", flags.method, "Stopping rule")
      ->check(CLI::IsMember({"shewhart", "cusum", "shiryaev-roberts", "shiryaev_roberts",
                             "shiryaev-bayes", "shiryaev_bayes"}));
  cmd->add_option("--c", flags.c, "Shift size (pre-change scale), > 1; presets 1.1/1.2/1.3")
      ->check(CLI::Range(std::nextafter(1.0, 2.0), 1e9));
  cmd->add_option("--df", flags.df, "Degrees of freedom (alphabet kinds - 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--direction", flags.direction, "Shewhart alarm side")
      ->check(CLI::IsMember({"below", "above"}));
  cmd->add_option("--drift", flags.drift, "LLR drift convention")
      ->check(CLI::IsMember({"exact", "paper"}));
  cmd->add_option("--nu", flags.nu, "Shiryaev-Bayes prior hazard, in (0,1)");
}

CalibrationResult load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("IoError", "cannot read calibration file " + path);
  nlohmann::json j;
  in >> j;
  return j.get<CalibrationResult>();
}

int run_calibrate(const DetectorFlags& detector, double target, std::int64_t reps,
                  double tolerance, std::int64_t horizon, std::uint64_t seed,
                  int threads, const std::string& out_path) {
  CalibrationOptions options;
  options.target_arl0 = target;
  options.tolerance = tolerance;
  options.replications = reps;
  options.horizon = horizon;
  options.seed = seed;
  options.threads = threads;
  const CalibrationResult result = calibrate_threshold(detector.to_config(), options);
  emit(nlohmann::json(result).dump(2) + "\n", out_path);
  return 0;
}

int run_scan(const std::string& path, const DetectorFlags& detector,
             std::size_t block_size, const std::string& alphabet,
             std::optional<double> threshold, std::optional<double> target_arl0,
             std::int64_t reps, std::uint64_t seed, int threads,
             const std::string& restart, std::int64_t skip,
             std::optional<std::int64_t> max_blocks, bool trace,
             const std::string& out_path) {
  ScanConfig config;
  config.block_size = block_size;
  config.alphabet = parse_alphabet(alphabet);
  config.detector = detector.to_config();
  config.restart = restart == "restart" ? RestartPolicy::RestartAfterAlarm
                                        : RestartPolicy::StopAtFirstAlarm;
  config.skip_after_alarm = skip;
  config.max_blocks = max_blocks;
  config.keep_trace = trace;

  if (threshold) {
    config.detector.threshold = *threshold;
  } else {
    CalibrationOptions options;
    options.target_arl0 = *target_arl0;
    options.replications = reps;
    options.seed = seed;
    options.threads = threads;
    std::cerr << "calibrating " << to_string(config.detector.method) << " to ARL0 "
              << *target_arl0 << " (reps " << reps << ", seed " << seed << ")\n";
    const CalibrationResult cal = calibrate_threshold(config.detector, options);
    config.detector.threshold = cal.threshold;
    std::cerr << "threshold " << cal.threshold << " (arl0_hat " << cal.arl0_hat << ")\n";
  }

  DetectionReport report;
  if (path == "-") {
    report = scan_image(std::cin, config, "<stdin>");
  } else {
    report = scan_file(path, config);
  }
  emit(write_report_json(report), out_path);
  return 0;
}

int run_evaluate_ced(const std::string& calibration_path, std::int64_t theta_max,
                     std::int64_t reps, std::uint64_t seed, int threads, bool json_out,
                     const std::string& out_path) {
  const CalibrationResult cal = load_calibration(calibration_path);
  std::vector<std::int64_t> thetas(static_cast<std::size_t>(theta_max));
  std::iota(thetas.begin(), thetas.end(), std::int64_t{1});
  EvalOptions options;
  options.replications = reps;
  options.seed = seed;
  options.threads = threads;
  const MetricCurve curve = estimate_ced(cal.to_config(), thetas, options);
  if (json_out)
    emit(nlohmann::json(curve).dump(2) + "\n", out_path);
  else
    emit(export_curves_csv(std::span(&curve, 1)), out_path);
  return 0;
}

int run_evaluate_pv(const std::string& calibration_path, std::vector<double> nus,
                    std::int64_t t_max, std::int64_t reps, std::uint64_t seed,
                    int threads, bool json_out, const std::string& out_path) {
  const CalibrationResult cal = load_calibration(calibration_path);
  if (nus.empty()) nus = {0.01, 0.05, 0.10};
  std::vector<std::int64_t> ts(static_cast<std::size_t>(t_max));
  std::iota(ts.begin(), ts.end(), std::int64_t{1});
  EvalOptions options;
  options.replications = reps;
  options.seed = seed;
  options.threads = threads;

  std::vector<MetricCurve> curves;
  for (double nu : nus)
    curves.push_back(estimate_pv(cal.to_config(), ChangePointPrior{nu}, ts, options));
  if (json_out) {
    nlohmann::json j = nlohmann::json::array();
    for (const MetricCurve& curve : curves) j.push_back(nlohmann::json(curve));
    emit(j.dump(2) + "\n", out_path);
  } else {
    emit(export_curves_csv(curves), out_path);
  }
  return 0;
}

int run_simulate(double c, int df, const std::string& theta_text, std::int64_t length,
                 std::uint64_t seed, const std::string& out_path) {
  const std::int64_t theta = parse_theta(theta_text);
  SeededRng rng(seed, 0);
  UStream stream(ShiftModel{df, c}, theta, rng);
  std::string out = "t,u\n";
  for (std::int64_t i = 1; i <= length; ++i) {
    out += std::to_string(i);
    out += ',';
    append_double(out, stream.next());
    out += '\n';
  }
  emit(out, out_path);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Chi-square crypto sieve: locate likely-encrypted block runs in raw images"};
  app.require_subcommand(1);

  std::string out_path;
  std::uint64_t seed = 0;
  std::int64_t reps = 100000;
  int threads = 0;

  // scan
  auto* scan = app.add_subcommand("scan", "Scan a raw image for encrypted segments");
  std::string scan_path;
  scan->add_option("path", scan_path, "Image file, or - for stdin")->required();
  DetectorFlags scan_detector;
  add_detector_flags(scan, scan_detector);
  std::size_t block_size = 4096;
  std::string alphabet = "fixed:256";
  scan->add_option("--block-size", block_size, "Block size in bytes (>= 64)");
  scan->add_option("--alphabet", alphabet, "observed, fixed, or fixed:<size>");
  std::optional<double> threshold;
  std::optional<double> target_arl0;
  auto* thr = scan->add_option("--threshold", threshold, "Alarm threshold C");
  auto* tgt = scan->add_option("--target-arl0", target_arl0,
                               "Calibrate the threshold to this in-control ARL first");
  thr->excludes(tgt);
  tgt->excludes(thr);
  std::string restart = "stop";
  std::int64_t skip = 0;
  std::optional<std::int64_t> max_blocks;
  bool trace = false;
  scan->add_option("--restart", restart, "After an alarm: stop or restart")
      ->check(CLI::IsMember({"stop", "restart"}));
  scan->add_option("--skip", skip, "Blocks to skip after an alarm when restarting");
  scan->add_option("--max-blocks", max_blocks, "Stop after this many blocks");
  scan->add_flag("--trace", trace, "Record per-block (t, U_t, a_t) rows in the report");
  scan->add_option("--reps", reps, "Replications for on-the-fly calibration");
  scan->add_option("--seed", seed, "RNG seed for on-the-fly calibration");
  scan->add_option("--threads", threads, "Worker threads (0 = auto)");
  scan->add_option("--out", out_path, "Write output here instead of stdout");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Choose a threshold for a target ARL0");
  DetectorFlags cal_detector;
  add_detector_flags(calibrate, cal_detector);
  double target = 100.0;
  double tolerance = 0.0;
  std::int64_t horizon = 0;
  calibrate->add_option("--target-arl0", target, "In-control average run length target");
  calibrate->add_option("--tolerance", tolerance,
                        "Acceptable |arl0_hat - target| (default 2% of target)");
  calibrate->add_option("--reps", reps, "Monte-Carlo replications");
  calibrate->add_option("--horizon", horizon, "Censoring horizon (default 100 * target)");
  calibrate->add_option("--seed", seed, "RNG seed");
  calibrate->add_option("--threads", threads, "Worker threads (0 = auto)");
  calibrate->add_option("--out", out_path, "Write output here instead of stdout");

  // evaluate-ced
  auto* eval_ced = app.add_subcommand("evaluate-ced", "Conditional expected delay curve");
  std::string calibration_path;
  eval_ced->add_option("--calibration", calibration_path, "CalibrationResult JSON file")
      ->required();
  std::int64_t theta_max = 50;
  bool json_out = false;
  eval_ced->add_option("--theta-max", theta_max, "Evaluate theta = 1..theta-max");
  eval_ced->add_option("--reps", reps, "Replications per point");
  eval_ced->add_option("--seed", seed, "RNG seed");
  eval_ced->add_option("--threads", threads, "Worker threads (0 = auto)");
  eval_ced->add_flag("--json", json_out, "Emit the JSON mirror instead of CSV");
  eval_ced->add_option("--out", out_path, "Write output here instead of stdout");

  // evaluate-pv
  auto* eval_pv = app.add_subcommand("evaluate-pv", "Predictive value curve");
  eval_pv->add_option("--calibration", calibration_path, "CalibrationResult JSON file")
      ->required();
  std::vector<double> nus;
  std::int64_t t_max = 50;
  eval_pv->add_option("--nu", nus, "Geometric prior hazard(s); default 0.01 0.05 0.10");
  eval_pv->add_option("--t-max", t_max, "Evaluate t = 1..t-max");
  eval_pv->add_option("--reps", reps, "Replications per curve");
  eval_pv->add_option("--seed", seed, "RNG seed");
  eval_pv->add_option("--threads", threads, "Worker threads (0 = auto)");
  eval_pv->add_flag("--json", json_out, "Emit the JSON mirror instead of CSV");
  eval_pv->add_option("--out", out_path, "Write output here instead of stdout");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Emit a raw U-stream as CSV");
  double sim_c = 1.2;
  int sim_df = 255;
  std::string sim_theta = "inf";
  std::int64_t length = 0;
  simulate->add_option("--c", sim_c, "Shift size")->check(CLI::Range(std::nextafter(1.0, 2.0), 1e9));
  simulate->add_option("--df", sim_df, "Degrees of freedom")->check(CLI::PositiveNumber);
  simulate->add_option("--theta", sim_theta, "Change point (positive integer or 'inf')");
  simulate->add_option("--length", length, "Number of observations")->required();
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--out", out_path, "Write output here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return 1;
  }

  try {
    if (scan->parsed()) {
      if (!threshold && !target_arl0) {
        std::cerr << "scan requires either --threshold or --target-arl0\n";
        return 1;
      }
      return run_scan(scan_path, scan_detector, block_size, alphabet, threshold,
                      target_arl0, reps, seed, threads, restart, skip, max_blocks,
                      trace, out_path);
    }
    if (calibrate->parsed())
      return run_calibrate(cal_detector, target, reps, tolerance, horizon, seed,
                           threads, out_path);
    if (eval_ced->parsed())
      return run_evaluate_ced(calibration_path, theta_max, reps, seed, threads,
                              json_out, out_path);
    if (eval_pv->parsed())
      return run_evaluate_pv(calibration_path, nus, t_max, reps, seed, threads,
                             json_out, out_path);
    if (simulate->parsed()) return run_simulate(sim_c, sim_df, sim_theta, length, seed, out_path);
  } catch (const SieveError& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace csieve
