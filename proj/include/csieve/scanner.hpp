#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csieve/detectors.hpp"
#include "csieve/indicator.hpp"

#include "json.hpp"

namespace csieve {

enum class RestartPolicy { StopAtFirstAlarm, RestartAfterAlarm };

/// Applies a calibrated stopping rule to a raw image: consecutive
/// non-overlapping block_size windows in storage order, no filesystem
/// structure assumed (quick-deleted drives have none).
struct ScanConfig {
  std::size_t block_size = 4096;
  AlphabetMode alphabet = AlphabetMode::fixed(256);
  DetectorConfig detector{};
  RestartPolicy restart = RestartPolicy::StopAtFirstAlarm;
  std::int64_t skip_after_alarm = 0;  // RestartAfterAlarm: blocks to jump past the alarm
  std::optional<std::int64_t> max_blocks;
  bool keep_trace = false;
  // Observed-mode blocks with a single character kind have no indicator; feed
  // the detector the Fixed(size) value instead when set, else skip the block
  // and count a warning.
  std::optional<int> degenerate_fallback_size;
};

void validate(const ScanConfig& config);

struct AlarmSegment {
  std::int64_t alarm_block = 0;       // block index T (1-based)
  std::int64_t byte_offset = 0;       // (T-1) * block_size
  double statistic_at_alarm = 0.0;    // detector statistic a_T
  std::string method;

  bool operator==(const AlarmSegment&) const = default;
};

struct TraceRow {
  std::int64_t t = 0;
  std::int64_t byte_offset = 0;
  double u = 0.0;
  double a = 0.0;
  bool alarmed = false;

  bool operator==(const TraceRow&) const = default;
};

struct DetectionReport {
  std::string input_path;
  std::int64_t bytes_consumed = 0;
  std::string sha256;  // hex digest of the bytes consumed
  ScanConfig config{};
  std::vector<AlarmSegment> segments;
  std::int64_t blocks_scanned = 0;
  std::int64_t skipped_tail_bytes = 0;
  std::int64_t degenerate_blocks = 0;
  std::vector<TraceRow> trace;
};

/// Single pass, constant memory; reads nothing past the alarm block under
/// StopAtFirstAlarm. The path label is recorded, not opened.
DetectionReport scan_image(std::istream& input, const ScanConfig& config,
                           std::string_view path_label);

DetectionReport scan_file(const std::string& path, const ScanConfig& config);

std::string write_report_json(const DetectionReport& report);
DetectionReport parse_report_json(std::string_view json_text);

/// Per-block rows t,byte_offset,u,a,alarmed (requires keep_trace).
std::string write_trace_csv(const DetectionReport& report);

bool operator==(const ScanConfig& a, const ScanConfig& b);
bool operator==(const DetectionReport& a, const DetectionReport& b);

}  // namespace csieve
