#include "csieve/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "csieve/parallel.hpp"

namespace csieve {

DetectorConfig CalibrationResult::to_config() const {
  DetectorConfig config;
  config.method = method;
  config.model = model;
  config.threshold = threshold;
  config.shewhart_direction = shewhart_direction;
  config.drift = drift;
  config.nu = nu;
  return config;
}

Arl0Estimate estimate_arl0(const DetectorConfig& config, const Arl0Options& options) {
  validate(config);
  if (options.replications < 1) fail("BadOptions", "replications must be >= 1");
  if (options.horizon < 1) fail("BadOptions", "horizon must be >= 1");

  const std::int64_t n = options.replications;
  const int threads = detail::resolve_threads(options.threads, n);

  // Stopping times are integers, so per-chunk sums combine exactly and the
  // estimate does not depend on the thread count.
  struct Partial {
    std::int64_t sum = 0;
    unsigned __int128 sumsq = 0;
    std::int64_t censored = 0;
  };
  std::vector<Partial> partials(static_cast<std::size_t>(threads));

  detail::for_chunks(n, threads, [&](std::int64_t begin, std::int64_t end, int chunk) {
    Partial& p = partials[static_cast<std::size_t>(chunk)];
    for (std::int64_t i = begin; i < end; ++i) {
      UStream stream(config.model, kNoChange,
                     SeededRng(options.seed, options.stream_base + static_cast<std::uint64_t>(i)));
      const RunOutcome out =
          run_until_alarm(config, [&stream] { return stream.next(); }, options.horizon);
      const std::int64_t t = out.alarmed ? out.stopping_time : options.horizon;
      if (!out.alarmed) ++p.censored;
      p.sum += t;
      p.sumsq += static_cast<unsigned __int128>(t) * static_cast<unsigned __int128>(t);
    }
  });

  std::int64_t sum = 0;
  unsigned __int128 sumsq = 0;
  std::int64_t censored = 0;
  for (const Partial& p : partials) {
    sum += p.sum;
    sumsq += p.sumsq;
    censored += p.censored;
  }

  Arl0Estimate est;
  est.arl0_hat = static_cast<double>(sum) / static_cast<double>(n);
  est.censored = censored;
  if (n > 1) {
    const unsigned __int128 num =
        static_cast<unsigned __int128>(n) * sumsq -
        static_cast<unsigned __int128>(sum) * static_cast<unsigned __int128>(sum);
    const long double var = static_cast<long double>(num) /
                            (static_cast<long double>(n) * static_cast<long double>(n - 1));
    est.se = static_cast<double>(std::sqrt(var / static_cast<long double>(n)));
  }
  return est;
}

namespace {

// Ordinate along which ARL0 is non-decreasing: the threshold itself for
// Shewhart/Above and CUSUM, its negation for Shewhart/Below (raising C_low
// makes alarms easier), log-threshold for the multiplicative rules.
double threshold_from_ordinate(const DetectorConfig& config, double z) {
  switch (config.method) {
    case Method::Shewhart:
      return config.shewhart_direction == ShewhartDirection::Below ? -z : z;
    case Method::Cusum:
      return z;
    case Method::ShiryaevRoberts:
    case Method::ShiryaevBayes:
      return std::exp(z);
  }
  return z;
}

struct SearchPoint {
  double z = 0.0;
  double arl = 0.0;
};

}  // namespace

CalibrationResult calibrate_threshold(const DetectorConfig& config,
                                      const CalibrationOptions& options) {
  validate(config);
  validate(config.model);  // sampling needs c strictly above 1
  if (!(options.target_arl0 > 1.0)) fail("BadOptions", "target ARL0 must be > 1");
  if (options.replications < 1) fail("BadOptions", "replications must be >= 1");

  const double target = options.target_arl0;
  const double tol = options.tolerance > 0.0 ? options.tolerance : 0.02 * target;
  const std::int64_t full_reps = options.replications;
  const std::int64_t full_horizon =
      options.horizon > 0 ? options.horizon
                          : static_cast<std::int64_t>(std::ceil(100.0 * target));
  const std::int64_t search_reps =
      std::clamp<std::int64_t>(full_reps / 10, std::min<std::int64_t>(full_reps, 1000),
                               full_reps);
  const std::int64_t search_horizon =
      std::min<std::int64_t>(full_horizon,
                             std::max<std::int64_t>(static_cast<std::int64_t>(10.0 * target), 100));

  DetectorConfig candidate = config;
  const auto arl_at = [&](double z, std::int64_t reps, std::int64_t horizon,
                          std::uint64_t stream_base) {
    candidate.threshold = threshold_from_ordinate(config, z);
    Arl0Options opt;
    opt.replications = reps;
    opt.horizon = horizon;
    opt.seed = options.seed;
    opt.stream_base = stream_base;
    opt.threads = options.threads;
    return estimate_arl0(candidate, opt);
  };

  // Search phase: common random numbers (stream base 0) keep the estimated
  // ARL0 exactly monotone in z, so plain bracketing works.
  double z0;
  double step0;
  switch (config.method) {
    case Method::Shewhart: {
      const double pre_mean = config.model.c * config.model.df;
      z0 = config.shewhart_direction == ShewhartDirection::Below ? -pre_mean : pre_mean;
      step0 = std::max(1.0, 0.25 * pre_mean);
      break;
    }
    case Method::Cusum:
      z0 = 1.0;
      step0 = 1.0;
      break;
    default:  // multiplicative rules: ordinate is log C
      z0 = std::log(target);
      step0 = 1.0;
      break;
  }

  const auto search = [&](double z) {
    return arl_at(z, search_reps, search_horizon, 0).arl0_hat;
  };

  SearchPoint lo{z0, search(z0)};
  SearchPoint hi = lo;
  double step = step0;
  int expansions = 0;
  while (hi.arl < target) {
    lo = hi;
    hi.z += step;
    hi.arl = search(hi.z);
    step *= 2.0;
    if (++expansions > 200) fail("CalibrationDiverged", "no upper bracket for target ARL0");
  }
  step = step0;
  while (lo.arl >= target) {
    hi = lo;
    lo.z -= step;
    lo.arl = search(lo.z);
    step *= 2.0;
    if (++expansions > 400) fail("CalibrationDiverged", "no lower bracket for target ARL0");
  }

  for (int iter = 0; iter < 48; ++iter) {
    if (hi.z - lo.z < 1e-9 * (1.0 + std::abs(lo.z) + std::abs(hi.z))) break;
    SearchPoint mid{0.5 * (lo.z + hi.z), 0.0};
    mid.arl = search(mid.z);
    if (std::abs(mid.arl - target) <= 0.25 * tol) {
      lo = mid;
      hi = mid;
      break;
    }
    (mid.arl < target ? lo : hi) = mid;
  }

  // Polish at full replications (same CRN streams), then report from fresh
  // streams. Retries tighten the polish if the fresh estimate drifts outside
  // the tolerance.
  const double polish_tol0 = 0.2 * tol;
  for (int attempt = 0; attempt < 3; ++attempt) {
    const double polish_tol = polish_tol0 / (1 << attempt);
    SearchPoint plo = lo;
    SearchPoint phi = hi;
    plo.arl = arl_at(plo.z, full_reps, full_horizon, 0).arl0_hat;
    phi.arl = arl_at(phi.z, full_reps, full_horizon, 0).arl0_hat;
    double widen = std::max(0.25 * step0, 0.5 * (phi.z - plo.z));
    int guard = 0;
    while (phi.arl < target) {
      plo = phi;
      phi.z += widen;
      widen *= 2.0;
      phi.arl = arl_at(phi.z, full_reps, full_horizon, 0).arl0_hat;
      if (++guard > 60) fail("CalibrationDiverged", "full-replication bracket lost (upper)");
    }
    while (plo.arl >= target) {
      phi = plo;
      plo.z -= widen;
      widen *= 2.0;
      plo.arl = arl_at(plo.z, full_reps, full_horizon, 0).arl0_hat;
      if (++guard > 120) fail("CalibrationDiverged", "full-replication bracket lost (lower)");
    }
    SearchPoint best = std::abs(plo.arl - target) < std::abs(phi.arl - target) ? plo : phi;
    for (int iter = 0; iter < 30; ++iter) {
      if (phi.z - plo.z < 1e-9 * (1.0 + std::abs(plo.z) + std::abs(phi.z))) break;
      SearchPoint mid{0.5 * (plo.z + phi.z), 0.0};
      mid.arl = arl_at(mid.z, full_reps, full_horizon, 0).arl0_hat;
      if (std::abs(mid.arl - target) < std::abs(best.arl - target)) best = mid;
      if (std::abs(mid.arl - target) <= polish_tol) break;
      (mid.arl < target ? plo : phi) = mid;
    }

    const std::uint64_t fresh_base =
        (static_cast<std::uint64_t>(attempt) + 1) << 32;
    const Arl0Estimate fresh = arl_at(best.z, full_reps, full_horizon, fresh_base);
    if (std::abs(fresh.arl0_hat - target) <= tol) {
      CalibrationResult result;
      result.method = config.method;
      result.shewhart_direction = config.shewhart_direction;
      result.drift = config.drift;
      result.model = config.model;
      result.nu = config.nu;
      result.threshold = threshold_from_ordinate(config, best.z);
      result.arl0_hat = fresh.arl0_hat;
      result.arl0_se = fresh.se;
      result.censored = fresh.censored;
      result.replications = full_reps;
      result.seed = options.seed;
      return result;
    }
    lo = best;
    hi = best;
    lo.z -= 0.05 * std::max(1.0, std::abs(best.z));
    hi.z += 0.05 * std::max(1.0, std::abs(best.z));
    lo.arl = search(lo.z);
    hi.arl = search(hi.z);
  }
  fail("CalibrationDiverged", "fresh-stream ARL0 estimate stayed outside tolerance");
}

void to_json(nlohmann::json& j, const CalibrationResult& r) {
  j = nlohmann::json{{"method", to_string(r.method)},
                     {"shewhart_direction", to_string(r.shewhart_direction)},
                     {"drift_convention", to_string(r.drift)},
                     {"df", r.model.df},
                     {"c", r.model.c},
                     {"nu", r.nu},
                     {"threshold", r.threshold},
                     {"arl0_hat", r.arl0_hat},
                     {"arl0_se", r.arl0_se},
                     {"censored", r.censored},
                     {"replications", r.replications},
                     {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, CalibrationResult& r) {
  r.method = method_from_string(j.at("method").get<std::string>());
  r.shewhart_direction =
      direction_from_string(j.value("shewhart_direction", std::string("below")));
  r.drift = drift_from_string(j.value("drift_convention", std::string("exact_llr")));
  r.model.df = j.at("df").get<int>();
  r.model.c = j.at("c").get<double>();
  r.nu = j.value("nu", 0.0);
  r.threshold = j.at("threshold").get<double>();
  r.arl0_hat = j.value("arl0_hat", 0.0);
  r.arl0_se = j.value("arl0_se", 0.0);
  r.censored = j.value("censored", std::int64_t{0});
  r.replications = j.value("replications", std::int64_t{0});
  r.seed = j.value("seed", std::uint64_t{0});
}

}  // namespace csieve
