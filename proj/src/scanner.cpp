#include "csieve/scanner.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <tuple>

#include <openssl/evp.h>

namespace csieve {

void validate(const ScanConfig& config) {
  if (config.block_size < 64)
    fail("BadBlockSize", "block_size must be >= 64 (indicator needs enough symbols)");
  if (config.skip_after_alarm < 0) fail("BadOptions", "skip_after_alarm must be >= 0");
  if (config.max_blocks && *config.max_blocks < 0)
    fail("BadOptions", "max_blocks must be >= 0");
  if (config.degenerate_fallback_size && *config.degenerate_fallback_size < 2)
    fail("BadOptions", "degenerate_fallback_size must be >= 2");
  validate(config.detector);
}

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      fail("DigestError", "failed to initialize SHA-256");
  }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  ~Sha256() { EVP_MD_CTX_free(ctx_); }

  void update(const std::uint8_t* data, std::size_t len) {
    if (EVP_DigestUpdate(ctx_, data, len) != 1) fail("DigestError", "SHA-256 update failed");
  }

  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, digest, &len) != 1)
      fail("DigestError", "SHA-256 finalize failed");
    static const char* kHex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[digest[i] >> 4];
      out += kHex[digest[i] & 0xF];
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

DetectionReport scan_image(std::istream& input, const ScanConfig& config,
                           std::string_view path_label) {
  validate(config);

  DetectionReport report;
  report.input_path = std::string(path_label);
  report.config = config;

  Sha256 digest;
  std::vector<std::uint8_t> buffer(config.block_size);
  DetectorState state;
  std::int64_t skip_remaining = 0;
  bool stopped = false;

  while (!stopped) {
    if (config.max_blocks && report.blocks_scanned >= *config.max_blocks) break;

    input.read(reinterpret_cast<char*>(buffer.data()),
               static_cast<std::streamsize>(buffer.size()));
    const auto got = static_cast<std::size_t>(input.gcount());
    if (input.bad())
      fail("IoError", "read failed at byte offset " + std::to_string(report.bytes_consumed));
    if (got == 0) break;

    digest.update(buffer.data(), got);
    report.bytes_consumed += static_cast<std::int64_t>(got);

    if (got < config.block_size && got < 64) {
      // Trailing fragment too short for the indicator's large-sample premise.
      report.skipped_tail_bytes = static_cast<std::int64_t>(got);
      break;
    }

    const std::int64_t t = report.blocks_scanned + 1;
    report.blocks_scanned = t;
    const std::int64_t byte_offset =
        (t - 1) * static_cast<std::int64_t>(config.block_size);
    const std::span<const std::uint8_t> block(buffer.data(), got);

    if (skip_remaining > 0) {
      --skip_remaining;
      if (input.eof()) break;
      continue;
    }

    double u;
    try {
      u = config.alphabet == AlphabetMode::fixed(256)
              ? crypto_indicator_bytes256(block)
              : crypto_indicator(count_block(block, config.alphabet));
    } catch (const SieveError& e) {
      if (std::string_view(e.code()) != "DegenerateAlphabet") throw;
      if (!config.degenerate_fallback_size) {
        ++report.degenerate_blocks;
        if (config.keep_trace)
          report.trace.push_back({t, byte_offset, std::nan(""), state.a, false});
        if (input.eof()) break;
        continue;
      }
      u = crypto_indicator(count_block(block, AlphabetMode::fixed(*config.degenerate_fallback_size)));
    }

    state = update(state, config.detector, u);
    if (config.keep_trace)
      report.trace.push_back({t, byte_offset, u, state.a, state.alarmed});

    if (state.alarmed) {
      report.segments.push_back(
          {t, byte_offset, state.a, to_string(config.detector.method)});
      if (config.restart == RestartPolicy::StopAtFirstAlarm) {
        stopped = true;
      } else {
        state = DetectorState{};
        skip_remaining = config.skip_after_alarm;
      }
    }
    if (input.eof()) break;
  }

  report.sha256 = digest.hex();
  return report;
}

DetectionReport scan_file(const std::string& path, const ScanConfig& config) {
  std::ifstream in;
  std::vector<char> io_buffer(1 << 18);
  in.rdbuf()->pubsetbuf(io_buffer.data(), static_cast<std::streamsize>(io_buffer.size()));
  in.open(path, std::ios::binary);
  if (!in) fail("IoError", "cannot open " + path);
  return scan_image(in, config, path);
}

namespace {

nlohmann::json alphabet_to_json(const AlphabetMode& mode) {
  if (mode.kind == AlphabetMode::Kind::Observed)
    return nlohmann::json{{"mode", "observed"}};
  return nlohmann::json{{"mode", "fixed"}, {"size", mode.size}};
}

AlphabetMode alphabet_from_json(const nlohmann::json& j) {
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "observed") return AlphabetMode::observed();
  if (mode == "fixed") return AlphabetMode::fixed(j.at("size").get<int>());
  fail("BadJson", "unknown alphabet mode: " + mode);
}

nlohmann::json detector_to_json(const DetectorConfig& d) {
  return nlohmann::json{{"method", to_string(d.method)},
                        {"df", d.model.df},
                        {"c", d.model.c},
                        {"threshold", d.threshold},
                        {"shewhart_direction", to_string(d.shewhart_direction)},
                        {"drift_convention", to_string(d.drift)},
                        {"nu", d.nu}};
}

DetectorConfig detector_from_json(const nlohmann::json& j) {
  DetectorConfig d;
  d.method = method_from_string(j.at("method").get<std::string>());
  d.model.df = j.at("df").get<int>();
  d.model.c = j.at("c").get<double>();
  d.threshold = j.at("threshold").get<double>();
  d.shewhart_direction =
      direction_from_string(j.value("shewhart_direction", std::string("below")));
  d.drift = drift_from_string(j.value("drift_convention", std::string("exact_llr")));
  d.nu = j.value("nu", 0.0);
  return d;
}

}  // namespace

std::string write_report_json(const DetectionReport& report) {
  nlohmann::json segments = nlohmann::json::array();
  for (const AlarmSegment& s : report.segments)
    segments.push_back(nlohmann::json{{"alarm_block", s.alarm_block},
                                      {"byte_offset", s.byte_offset},
                                      {"statistic_at_alarm", s.statistic_at_alarm},
                                      {"method", s.method}});
  nlohmann::json trace = nlohmann::json::array();
  for (const TraceRow& r : report.trace)
    trace.push_back(nlohmann::json{{"t", r.t},
                                   {"byte_offset", r.byte_offset},
                                   {"u", std::isnan(r.u) ? nlohmann::json() : nlohmann::json(r.u)},
                                   {"a", r.a},
                                   {"alarmed", r.alarmed}});

  const ScanConfig& c = report.config;
  nlohmann::json config{
      {"block_size", c.block_size},
      {"alphabet", alphabet_to_json(c.alphabet)},
      {"detector", detector_to_json(c.detector)},
      {"restart", c.restart == RestartPolicy::StopAtFirstAlarm ? "stop_at_first_alarm"
                                                               : "restart_after_alarm"},
      {"skip_after_alarm", c.skip_after_alarm},
      {"max_blocks", c.max_blocks ? nlohmann::json(*c.max_blocks) : nlohmann::json()},
      {"keep_trace", c.keep_trace},
      {"degenerate_fallback_size", c.degenerate_fallback_size
                                       ? nlohmann::json(*c.degenerate_fallback_size)
                                       : nlohmann::json()},
      // The single-change model ends at the first alarm; later segments are an
      // artifact extension.
      {"multi_segment_extension", c.restart == RestartPolicy::RestartAfterAlarm}};

  nlohmann::json j{{"input", nlohmann::json{{"path", report.input_path},
                                            {"bytes_consumed", report.bytes_consumed},
                                            {"sha256", report.sha256}}},
                   {"config", std::move(config)},
                   {"segments", std::move(segments)},
                   {"blocks_scanned", report.blocks_scanned},
                   {"skipped_tail_bytes", report.skipped_tail_bytes},
                   {"degenerate_blocks", report.degenerate_blocks},
                   {"trace", std::move(trace)}};
  return j.dump(2) + "\n";
}

DetectionReport parse_report_json(std::string_view json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  DetectionReport report;
  report.input_path = j.at("input").at("path").get<std::string>();
  report.bytes_consumed = j.at("input").at("bytes_consumed").get<std::int64_t>();
  report.sha256 = j.at("input").at("sha256").get<std::string>();

  const nlohmann::json& c = j.at("config");
  report.config.block_size = c.at("block_size").get<std::size_t>();
  report.config.alphabet = alphabet_from_json(c.at("alphabet"));
  report.config.detector = detector_from_json(c.at("detector"));
  report.config.restart = c.at("restart").get<std::string>() == "stop_at_first_alarm"
                              ? RestartPolicy::StopAtFirstAlarm
                              : RestartPolicy::RestartAfterAlarm;
  report.config.skip_after_alarm = c.at("skip_after_alarm").get<std::int64_t>();
  if (!c.at("max_blocks").is_null())
    report.config.max_blocks = c.at("max_blocks").get<std::int64_t>();
  report.config.keep_trace = c.at("keep_trace").get<bool>();
  if (!c.at("degenerate_fallback_size").is_null())
    report.config.degenerate_fallback_size = c.at("degenerate_fallback_size").get<int>();

  for (const auto& s : j.at("segments"))
    report.segments.push_back({s.at("alarm_block").get<std::int64_t>(),
                               s.at("byte_offset").get<std::int64_t>(),
                               s.at("statistic_at_alarm").get<double>(),
                               s.at("method").get<std::string>()});
  report.blocks_scanned = j.at("blocks_scanned").get<std::int64_t>();
  report.skipped_tail_bytes = j.at("skipped_tail_bytes").get<std::int64_t>();
  report.degenerate_blocks = j.at("degenerate_blocks").get<std::int64_t>();
  for (const auto& r : j.at("trace"))
    report.trace.push_back({r.at("t").get<std::int64_t>(),
                            r.at("byte_offset").get<std::int64_t>(),
                            r.at("u").is_null() ? std::nan("") : r.at("u").get<double>(),
                            r.at("a").get<double>(), r.at("alarmed").get<bool>()});
  return report;
}

std::string write_trace_csv(const DetectionReport& report) {
  std::string out = "t,byte_offset,u,a,alarmed\n";
  for (const TraceRow& r : report.trace) {
    out += std::to_string(r.t);
    out += ',';
    out += std::to_string(r.byte_offset);
    out += ',';
    append_double(out, r.u);
    out += ',';
    append_double(out, r.a);
    out += ',';
    out += r.alarmed ? '1' : '0';
    out += '\n';
  }
  return out;
}

bool operator==(const ScanConfig& a, const ScanConfig& b) {
  const auto key = [](const ScanConfig& c) {
    return std::tuple(c.block_size, c.alphabet, c.detector.method, c.detector.model.df,
                      c.detector.model.c, c.detector.threshold,
                      c.detector.shewhart_direction, c.detector.drift, c.detector.nu,
                      c.restart, c.skip_after_alarm, c.max_blocks, c.keep_trace,
                      c.degenerate_fallback_size);
  };
  return key(a) == key(b);
}

bool operator==(const DetectionReport& a, const DetectionReport& b) {
  const auto trace_eq = [](const std::vector<TraceRow>& x, const std::vector<TraceRow>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool u_eq = (std::isnan(x[i].u) && std::isnan(y[i].u)) || x[i].u == y[i].u;
      if (!u_eq || x[i].t != y[i].t || x[i].byte_offset != y[i].byte_offset ||
          x[i].a != y[i].a || x[i].alarmed != y[i].alarmed)
        return false;
    }
    return true;
  };
  return a.input_path == b.input_path && a.bytes_consumed == b.bytes_consumed &&
         a.sha256 == b.sha256 && a.config == b.config && a.segments == b.segments &&
         a.blocks_scanned == b.blocks_scanned &&
         a.skipped_tail_bytes == b.skipped_tail_bytes &&
         a.degenerate_blocks == b.degenerate_blocks && trace_eq(a.trace, b.trace);
}

}  // namespace csieve
