#include "csieve/detectors.hpp"

namespace csieve {

void validate(const DetectorConfig& config) {
  if (config.model.df < 1) fail("BadModel", "DetectorConfig.model.df must be >= 1");
  if (!(config.model.c >= 1.0)) fail("BadModel", "DetectorConfig.model.c must be >= 1");
  if (std::isnan(config.threshold))
    fail("BadThreshold", "DetectorConfig.threshold must not be NaN");
  if (config.method == Method::ShiryaevBayes &&
      (!(config.nu > 0.0) || !(config.nu < 1.0)))
    fail("BadPrior", "ShiryaevBayes requires 0 < nu < 1");
}

double llr_step(double u, int df, double c, DriftConvention convention) {
  if (df < 1) fail("BadModel", "llr_step df must be >= 1");
  if (!(c >= 1.0)) fail("BadModel", "llr_step c must be >= 1");
  const double drift = convention == DriftConvention::ExactLlr
                           ? 0.5 * static_cast<double>(df) * std::log(c)
                           : static_cast<double>(df) * std::log(c);
  return drift - (c - 1.0) / (2.0 * c) * u;
}

namespace {

// log(1 + e^x) without overflow; this is the log-space form of a' = 1 + a.
double log1p_exp(double x) {
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  if (x > 36.0) return x + std::exp(-x);  // exp(-x) below double epsilon of x
  return std::log1p(std::exp(x));
}

}  // namespace

DetectorState update(const DetectorState& state, const DetectorConfig& config, double u) {
  if (state.alarmed) fail("AlreadyStopped", "cannot update an alarmed detector");
  if (!std::isfinite(u)) fail("BadObservation", "observation must be finite");

  DetectorState next = state;
  next.t = state.t + 1;

  switch (config.method) {
    case Method::Shewhart: {
      if (config.shewhart_direction == ShewhartDirection::Above) {
        next.a = u;
        next.alarmed = next.a > config.threshold;
      } else {
        next.a = -u;
        next.alarmed = next.a > -config.threshold;  // i.e. u < C
      }
      break;
    }
    case Method::Cusum: {
      const double l = llr_step(u, config.model, config.drift);
      next.a = std::max(0.0, state.a) + l;
      next.alarmed = next.a > config.threshold;
      break;
    }
    case Method::ShiryaevRoberts:
    case Method::ShiryaevBayes: {
      double l = llr_step(u, config.model, config.drift);
      if (config.method == Method::ShiryaevBayes) l -= std::log1p(-config.nu);
      next.log_a = log1p_exp(state.log_a) + l;
      next.a = std::exp(next.log_a);
      // a_t > 0 for t >= 1, so a non-positive threshold always alarms.
      next.alarmed = config.threshold > 0.0 ? next.log_a > std::log(config.threshold)
                                            : true;
      break;
    }
  }
  return next;
}

RunOutcome run_until_alarm(const DetectorConfig& config, std::span<const double> us) {
  validate(config);
  DetectorState state;
  for (double u : us) {
    state = update(state, config, u);
    if (state.alarmed) return {true, state.t, state.a};
  }
  return {false, state.t, state.a};
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Shewhart: return "shewhart";
    case Method::Cusum: return "cusum";
    case Method::ShiryaevRoberts: return "shiryaev_roberts";
    case Method::ShiryaevBayes: return "shiryaev_bayes";
  }
  return "unknown";
}

std::string to_string(ShewhartDirection direction) {
  return direction == ShewhartDirection::Below ? "below" : "above";
}

std::string to_string(DriftConvention drift) {
  return drift == DriftConvention::ExactLlr ? "exact_llr" : "paper_literal";
}

Method method_from_string(const std::string& s) {
  if (s == "shewhart") return Method::Shewhart;
  if (s == "cusum") return Method::Cusum;
  if (s == "shiryaev_roberts" || s == "shiryaev-roberts") return Method::ShiryaevRoberts;
  if (s == "shiryaev_bayes" || s == "shiryaev-bayes") return Method::ShiryaevBayes;
  fail("BadMethod", "unknown method: " + s);
}

ShewhartDirection direction_from_string(const std::string& s) {
  if (s == "below") return ShewhartDirection::Below;
  if (s == "above") return ShewhartDirection::Above;
  fail("BadMethod", "unknown shewhart direction: " + s);
}

DriftConvention drift_from_string(const std::string& s) {
  if (s == "exact_llr" || s == "exact") return DriftConvention::ExactLlr;
  if (s == "paper_literal" || s == "paper") return DriftConvention::PaperLiteral;
  fail("BadMethod", "unknown drift convention: " + s);
}

}  // namespace csieve
