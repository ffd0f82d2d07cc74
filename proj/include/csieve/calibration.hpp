#pragma once

#include <cstdint>
#include <string>

#include "csieve/detectors.hpp"

#include "json.hpp"

namespace csieve {

struct Arl0Estimate {
  double arl0_hat = 0.0;
  double se = 0.0;
  std::int64_t censored = 0;
};

struct Arl0Options {
  std::int64_t replications = 100000;
  std::int64_t horizon = 10000;
  std::uint64_t seed = 0;
  std::uint64_t stream_base = 0;  // replication i draws from stream_base + i
  int threads = 0;                // 0 = hardware concurrency
};

/// Mean run length to false alarm under a pure pre-change stream (theta never
/// arrives). Runs outliving the horizon are censored at the horizon and
/// counted, which biases the mean low; the count is reported, not hidden.
Arl0Estimate estimate_arl0(const DetectorConfig& config, const Arl0Options& options);

struct CalibrationOptions {
  double target_arl0 = 100.0;
  double tolerance = 0.0;          // acceptable |arl0_hat - target|; 0 = 2% of target
  std::int64_t replications = 100000;
  std::int64_t horizon = 0;        // 0 = 100 * target
  std::uint64_t seed = 0;
  int threads = 0;
};

struct CalibrationResult {
  Method method = Method::Cusum;
  ShewhartDirection shewhart_direction = ShewhartDirection::Below;
  DriftConvention drift = DriftConvention::ExactLlr;
  ShiftModel model{};
  double nu = 0.0;
  double threshold = 0.0;
  double arl0_hat = 0.0;
  double arl0_se = 0.0;
  std::int64_t censored = 0;
  std::int64_t replications = 0;
  std::uint64_t seed = 0;

  DetectorConfig to_config() const;
};

/// Finds the threshold whose in-control average run length hits the target.
///
/// Expanding bracket plus bisection on a monotone ordinate (the threshold, its
/// negation for Shewhart/Below, log-threshold for the multiplicative rules),
/// with common random numbers across candidates so the estimated ARL0 is
/// exactly non-decreasing along the search. The reported estimate comes from
/// fresh streams at full replications. config.threshold is ignored on input.
CalibrationResult calibrate_threshold(const DetectorConfig& config,
                                      const CalibrationOptions& options);

void to_json(nlohmann::json& j, const CalibrationResult& r);
void from_json(const nlohmann::json& j, CalibrationResult& r);

}  // namespace csieve
