#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "csieve/common.hpp"

namespace csieve {

/// Pre/post-change law pair: post-change U ~ chi2(df), pre-change U ~ c * chi2(df)
/// for a scale c > 1 (cleartext blocks sit above the encrypted baseline).
struct ShiftModel {
  int df = 255;
  double c = 1.2;
};

/// Throws unless df >= 1 and c > 1.
void validate(const ShiftModel& model);

/// Geometric change-point prior on {1, 2, 3, ...}: P(theta = t) = nu * (1-nu)^(t-1).
struct ChangePointPrior {
  double nu = 0.05;
};

void validate(const ChangePointPrior& prior);

/// xoshiro256++ seeded via splitmix64 from (seed, stream_id).
///
/// Same (seed, stream_id) always reproduces the same draws, independent of the
/// standard library, so frozen test values stay valid everywhere. Distinct
/// stream_ids give statistically independent streams; Monte-Carlo replication i
/// owns stream i and runs without shared state.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  /// Uniform on [0, 1), 53-bit resolution.
  double next_double();

  /// Uniform on (0, 1); never returns 0 so callers may take logs.
  double next_positive_double();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  std::uint64_t stream_;
};

double sample_standard_normal(SeededRng& rng);

/// Gamma(shape, scale=1) via Marsaglia-Tsang; shape > 0.
double sample_gamma(double shape, SeededRng& rng);

/// One draw from chi-square with df >= 1 degrees of freedom.
double sample_chi2(int df, SeededRng& rng);

/// Pre-change draw: c * chi2(df). Consumes exactly the same underlying uniforms
/// as sample_post, so coupled streams satisfy pre == c * post draw for draw.
double sample_pre(const ShiftModel& model, SeededRng& rng);

/// Post-change draw: chi2(df).
double sample_post(const ShiftModel& model, SeededRng& rng);

/// Change point value meaning "no change ever" (pure pre-change stream).
inline constexpr std::int64_t kNoChange = std::numeric_limits<std::int64_t>::max();

/// Lazily yields U_1, U_2, ... with the change at time theta (1-indexed):
/// t < theta pre-change, t >= theta post-change. theta == kNoChange never switches,
/// theta == 1 is pure post-change.
class UStream {
 public:
  UStream(ShiftModel model, std::int64_t theta, SeededRng rng);

  double next();
  std::int64_t t() const noexcept { return t_; }

 private:
  ShiftModel model_;
  std::int64_t theta_;
  SeededRng rng_;
  std::int64_t t_ = 0;
};

/// Materialized stream of `length` values (theta semantics as in UStream).
std::vector<double> gen_stream(const ShiftModel& model, std::int64_t theta,
                               std::int64_t length, SeededRng& rng);

/// Geometric draw on {1, 2, 3, ...} with hazard prior.nu.
std::int64_t sample_theta(const ChangePointPrior& prior, SeededRng& rng);

}  // namespace csieve
