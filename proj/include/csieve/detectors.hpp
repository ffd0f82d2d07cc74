#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "csieve/common.hpp"
#include "csieve/models.hpp"

namespace csieve {

enum class Method { Shewhart, Cusum, ShiryaevRoberts, ShiryaevBayes };

/// The modeled change is a drop in scale (pre-change c > 1, post-change 1), so
/// Below alarms on small U and is the default; Above is the literal one-sided
/// chart for replication.
enum class ShewhartDirection { Below, Above };

/// ExactLlr uses the true log density ratio of chi2(df) to the scaled law,
/// (df/2) ln c - ((c-1)/(2c)) u. PaperLiteral uses df ln c for the drift term
/// instead, for replication of published runs.
enum class DriftConvention { ExactLlr, PaperLiteral };

struct DetectorConfig {
  Method method = Method::Cusum;
  ShiftModel model{};
  double threshold = 0.0;
  ShewhartDirection shewhart_direction = ShewhartDirection::Below;
  DriftConvention drift = DriftConvention::ExactLlr;
  double nu = 0.0;  // ShiryaevBayes hazard, in (0, 1)
};

void validate(const DetectorConfig& config);

/// Per-observation log-likelihood-ratio increment. Accepts c >= 1 (the c -> 1
/// limit is identically 0).
double llr_step(double u, int df, double c, DriftConvention convention);

inline double llr_step(double u, const ShiftModel& model, DriftConvention convention) {
  return llr_step(u, model.df, model.c, convention);
}

/// One stopping rule's running state.
///
/// `a` is the alarm statistic in the method's natural scale; for the
/// multiplicative rules (Shiryaev-Roberts / Shiryaev-Bayes) the authoritative
/// value is kept in log space (`log_a`) so long in-control runs cannot
/// overflow, and alarm comparisons happen there. For Shewhart/Below, `a` is -u
/// and the alarm test is a > -C, i.e. u < C.
struct DetectorState {
  std::int64_t t = 0;
  double a = 0.0;
  bool alarmed = false;
  double log_a = -std::numeric_limits<double>::infinity();
};

/// Advances one stopping rule by a single observation. Throws "AlreadyStopped"
/// if the state has alarmed and "BadObservation" on non-finite u.
DetectorState update(const DetectorState& state, const DetectorConfig& config, double u);

struct RunOutcome {
  bool alarmed = false;
  std::int64_t stopping_time = 0;  // T when alarmed, else observations consumed
  double final_stat = 0.0;         // alarm statistic at the last step taken
};

/// Runs the rule over u_1, u_2, ... until the first alarm; consumes nothing
/// past T. Returns alarmed == false with the count consumed if the sequence
/// ends (or max_steps is reached) first.
RunOutcome run_until_alarm(const DetectorConfig& config, std::span<const double> us);

// String forms shared by JSON, CSV and the CLI.
std::string to_string(Method method);
std::string to_string(ShewhartDirection direction);
std::string to_string(DriftConvention drift);
Method method_from_string(const std::string& s);
ShewhartDirection direction_from_string(const std::string& s);
DriftConvention drift_from_string(const std::string& s);

template <class Gen>
RunOutcome run_until_alarm(const DetectorConfig& config, Gen&& next_u,
                           std::int64_t max_steps) {
  validate(config);
  DetectorState state;
  for (std::int64_t i = 0; i < max_steps; ++i) {
    state = update(state, config, next_u());
    if (state.alarmed) return {true, state.t, state.a};
  }
  return {false, state.t, state.a};
}

}  // namespace csieve
