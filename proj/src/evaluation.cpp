#include "csieve/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>

#include "csieve/parallel.hpp"

namespace csieve {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

CurvePoint point_from_integer_sums(std::int64_t t, std::int64_t n_eff, std::int64_t sum,
                                   unsigned __int128 sumsq) {
  CurvePoint p;
  p.t = t;
  p.n_eff = n_eff;
  if (n_eff == 0) {
    p.value = kNan;
    p.se = kNan;
    return p;
  }
  p.value = static_cast<double>(sum) / static_cast<double>(n_eff);
  if (n_eff > 1) {
    const unsigned __int128 num =
        static_cast<unsigned __int128>(n_eff) * sumsq -
        static_cast<unsigned __int128>(sum) * static_cast<unsigned __int128>(sum);
    const long double var =
        static_cast<long double>(num) /
        (static_cast<long double>(n_eff) * static_cast<long double>(n_eff - 1));
    p.se = static_cast<double>(std::sqrt(var / static_cast<long double>(n_eff)));
  }
  return p;
}

}  // namespace

MetricCurve estimate_ced(const DetectorConfig& config,
                         std::span<const std::int64_t> theta_values,
                         const EvalOptions& options) {
  validate(config);
  validate(config.model);
  if (theta_values.empty()) fail("BadOptions", "need at least one theta value");
  for (std::int64_t t : theta_values)
    if (t < 1) fail("BadOptions", "theta values must be >= 1");
  if (options.replications < 1) fail("BadOptions", "replications must be >= 1");

  MetricCurve curve;
  curve.metric = Metric::Ced;
  curve.config = config;
  curve.replications = options.replications;
  curve.seed = options.seed;

  const std::int64_t n = options.replications;
  const int threads = detail::resolve_threads(options.threads, n);

  for (std::int64_t theta : theta_values) {
    struct Partial {
      std::int64_t kept = 0;
      std::int64_t sum = 0;
      unsigned __int128 sumsq = 0;
    };
    std::vector<Partial> partials(static_cast<std::size_t>(threads));
    const std::int64_t horizon = theta + options.delay_horizon;

    detail::for_chunks(n, threads, [&](std::int64_t begin, std::int64_t end, int chunk) {
      Partial& p = partials[static_cast<std::size_t>(chunk)];
      for (std::int64_t i = begin; i < end; ++i) {
        UStream stream(config.model, theta,
                       SeededRng(options.seed, static_cast<std::uint64_t>(i)));
        const RunOutcome out =
            run_until_alarm(config, [&stream] { return stream.next(); }, horizon);
        const std::int64_t t_stop = out.alarmed ? out.stopping_time : horizon;
        if (t_stop < theta) continue;  // false alarm before the change
        const std::int64_t delay = t_stop - theta;
        ++p.kept;
        p.sum += delay;
        p.sumsq += static_cast<unsigned __int128>(delay) * static_cast<unsigned __int128>(delay);
      }
    });

    std::int64_t kept = 0;
    std::int64_t sum = 0;
    unsigned __int128 sumsq = 0;
    for (const Partial& p : partials) {
      kept += p.kept;
      sum += p.sum;
      sumsq += p.sumsq;
    }
    curve.points.push_back(point_from_integer_sums(theta, kept, sum, sumsq));
  }
  return curve;
}

MetricCurve estimate_pv(const DetectorConfig& config, const ChangePointPrior& prior,
                        std::span<const std::int64_t> t_values,
                        const EvalOptions& options) {
  validate(config);
  validate(config.model);
  validate(prior);
  if (t_values.empty()) fail("BadOptions", "need at least one t value");
  for (std::int64_t t : t_values)
    if (t < 1) fail("BadOptions", "t values must be >= 1");
  if (options.replications < 1) fail("BadOptions", "replications must be >= 1");

  MetricCurve curve;
  curve.metric = Metric::Pv;
  curve.config = config;
  curve.nu = prior.nu;
  curve.replications = options.replications;
  curve.seed = options.seed;

  const std::int64_t n = options.replications;
  const std::int64_t t_max = *std::max_element(t_values.begin(), t_values.end());
  const int threads = detail::resolve_threads(options.threads, n);

  // Runs alarming after t_max contribute to no requested point, so each
  // replication is at most t_max steps long.
  struct Partial {
    std::vector<std::int64_t> alarms;   // #{T = t}
    std::vector<std::int64_t> covered;  // #{T = t and theta <= t}
  };
  std::vector<Partial> partials(static_cast<std::size_t>(threads));
  for (auto& p : partials) {
    p.alarms.assign(static_cast<std::size_t>(t_max) + 1, 0);
    p.covered.assign(static_cast<std::size_t>(t_max) + 1, 0);
  }

  detail::for_chunks(n, threads, [&](std::int64_t begin, std::int64_t end, int chunk) {
    Partial& p = partials[static_cast<std::size_t>(chunk)];
    for (std::int64_t i = begin; i < end; ++i) {
      SeededRng rng(options.seed, static_cast<std::uint64_t>(i));
      const std::int64_t theta = sample_theta(prior, rng);
      UStream stream(config.model, theta, rng);
      const RunOutcome out =
          run_until_alarm(config, [&stream] { return stream.next(); }, t_max);
      if (!out.alarmed) continue;
      const auto at = static_cast<std::size_t>(out.stopping_time);
      ++p.alarms[at];
      if (theta <= out.stopping_time) ++p.covered[at];
    }
  });

  for (std::int64_t t : t_values) {
    std::int64_t alarms = 0;
    std::int64_t covered = 0;
    for (const Partial& p : partials) {
      alarms += p.alarms[static_cast<std::size_t>(t)];
      covered += p.covered[static_cast<std::size_t>(t)];
    }
    CurvePoint point;
    point.t = t;
    point.n_eff = alarms;
    if (alarms == 0) {
      point.value = kNan;
      point.se = kNan;
    } else {
      const double pv = static_cast<double>(covered) / static_cast<double>(alarms);
      point.value = pv;
      point.se = std::sqrt(pv * (1.0 - pv) / static_cast<double>(alarms));
    }
    curve.points.push_back(point);
  }
  return curve;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void append_int(std::string& out, std::int64_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_double_field(std::string_view field) {
  if (field.empty()) return kNan;
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    fail("BadCsv", "unparseable float field: " + std::string(field));
  return v;
}

std::int64_t parse_int_field(std::string_view field) {
  std::int64_t v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    fail("BadCsv", "unparseable integer field: " + std::string(field));
  return v;
}

}  // namespace

std::string to_string(Metric metric) { return metric == Metric::Ced ? "ced" : "pv"; }

std::string export_curves_csv(std::span<const MetricCurve> curves) {
  std::string out = "metric,method,c,df,nu,t,value,se,n_eff\n";
  for (const MetricCurve& curve : curves) {
    for (const CurvePoint& p : curve.points) {
      out += to_string(curve.metric);
      out += ',';
      out += to_string(curve.config.method);
      out += ',';
      append_double(out, curve.config.model.c);
      out += ',';
      append_int(out, curve.config.model.df);
      out += ',';
      if (curve.metric == Metric::Pv) append_double(out, curve.nu);
      out += ',';
      append_int(out, p.t);
      out += ',';
      append_double(out, p.value);
      out += ',';
      append_double(out, p.se);
      out += ',';
      append_int(out, p.n_eff);
      out += '\n';
    }
  }
  return out;
}

std::vector<CurveRow> parse_curve_rows_csv(std::string_view csv) {
  std::vector<CurveRow> rows;
  std::size_t line_start = 0;
  bool header = true;
  while (line_start < csv.size()) {
    std::size_t line_end = csv.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = csv.size();
    const std::string_view line = csv.substr(line_start, line_end - line_start);
    line_start = line_end + 1;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 9) fail("BadCsv", "expected 9 fields per row");
    CurveRow row;
    row.metric = std::string(fields[0]);
    row.method = std::string(fields[1]);
    row.c = parse_double_field(fields[2]);
    row.df = parse_int_field(fields[3]);
    row.nu = parse_double_field(fields[4]);
    row.t = parse_int_field(fields[5]);
    row.value = parse_double_field(fields[6]);
    row.se = parse_double_field(fields[7]);
    row.n_eff = parse_int_field(fields[8]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void to_json(nlohmann::json& j, const MetricCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const CurvePoint& p : curve.points) {
    points.push_back(nlohmann::json{{"t", p.t},
                                    {"value", std::isnan(p.value) ? nlohmann::json() : nlohmann::json(p.value)},
                                    {"se", std::isnan(p.se) ? nlohmann::json() : nlohmann::json(p.se)},
                                    {"n_eff", p.n_eff}});
  }
  j = nlohmann::json{{"metric", to_string(curve.metric)},
                     {"method", to_string(curve.config.method)},
                     {"c", curve.config.model.c},
                     {"df", curve.config.model.df},
                     {"threshold", curve.config.threshold},
                     {"nu", curve.metric == Metric::Pv ? nlohmann::json(curve.nu) : nlohmann::json()},
                     {"points", std::move(points)},
                     {"replications", curve.replications},
                     {"seed", curve.seed}};
}

}  // namespace csieve
