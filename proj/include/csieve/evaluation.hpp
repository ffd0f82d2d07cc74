#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csieve/calibration.hpp"
#include "csieve/detectors.hpp"

#include "json.hpp"

namespace csieve {

enum class Metric { Ced, Pv };

/// One estimated point: value NaN with n_eff == 0 marks "no qualifying runs",
/// reported rather than silently dropped.
struct CurvePoint {
  std::int64_t t = 0;
  double value = 0.0;
  double se = 0.0;
  std::int64_t n_eff = 0;
};

struct MetricCurve {
  Metric metric = Metric::Ced;
  DetectorConfig config{};
  double nu = 0.0;  // PV only; 0 for CED
  std::vector<CurvePoint> points;
  std::int64_t replications = 0;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  std::int64_t replications = 100000;
  std::uint64_t seed = 0;
  int threads = 0;
  std::int64_t delay_horizon = 100000;  // CED: give up on a run this long after theta
};

/// Conditional expected delay E(T - theta | T >= theta = t) for each requested
/// change point, by simulating streams with a deterministic change at t and
/// discarding runs that alarm before the change.
MetricCurve estimate_ced(const DetectorConfig& config,
                         std::span<const std::int64_t> theta_values,
                         const EvalOptions& options);

/// Predictive value P(theta <= t | T = t) under a geometric change-point
/// prior, per requested alarm time t.
MetricCurve estimate_pv(const DetectorConfig& config, const ChangePointPrior& prior,
                        std::span<const std::int64_t> t_values,
                        const EvalOptions& options);

/// CSV with columns metric,method,c,df,nu,t,value,se,n_eff; one row per point,
/// curves in input order. Floats use shortest round-trip formatting.
std::string export_curves_csv(std::span<const MetricCurve> curves);

/// Flat row as exported; nu and value may be NaN (empty / "nan" in the file).
struct CurveRow {
  std::string metric;
  std::string method;
  double c = 0.0;
  std::int64_t df = 0;
  double nu = 0.0;
  std::int64_t t = 0;
  double value = 0.0;
  double se = 0.0;
  std::int64_t n_eff = 0;
};

std::vector<CurveRow> parse_curve_rows_csv(std::string_view csv);

std::string to_string(Metric metric);
void to_json(nlohmann::json& j, const MetricCurve& curve);

}  // namespace csieve
