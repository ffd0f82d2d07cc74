#include "csieve/models.hpp"

#include <cmath>
#include <numbers>

namespace csieve {

void validate(const ShiftModel& model) {
  if (model.df < 1) fail("BadModel", "ShiftModel.df must be >= 1");
  if (!(model.c > 1.0)) fail("BadModel", "ShiftModel.c must be > 1");
}

void validate(const ChangePointPrior& prior) {
  if (!(prior.nu > 0.0) || !(prior.nu <= 1.0))
    fail("BadPrior", "ChangePointPrior.nu must lie in (0, 1]");
}

namespace {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id) {
  // Walk a splitmix64 sequence whose origin depends on both the seed and the
  // stream id, so streams with the same seed are decorrelated.
  std::uint64_t x = seed + kGolden * (stream_id + 1);
  for (auto& word : s_) {
    x += kGolden;
    word = mix64(x);
  }
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = kGolden;  // xoshiro needs nonzero state
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_positive_double() {
  double u;
  do {
    u = next_double();
  } while (u == 0.0);
  return u;
}

double sample_standard_normal(SeededRng& rng) {
  // Box-Muller, one value per call; no cached state so the draw sequence is a
  // pure function of the stream position.
  const double u1 = rng.next_positive_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sample_gamma(double shape, SeededRng& rng) {
  if (!(shape > 0.0)) fail("BadModel", "gamma shape must be > 0");
  if (shape < 1.0) {
    // Boost the shape, then shrink: Gamma(a) = Gamma(a+1) * U^(1/a).
    const double boosted = sample_gamma(shape + 1.0, rng);
    const double u = rng.next_positive_double();
    return boosted * std::pow(u, 1.0 / shape);
  }
  // Marsaglia & Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double cc = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = sample_standard_normal(rng);
      v = 1.0 + cc * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_positive_double();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_chi2(int df, SeededRng& rng) {
  if (df < 1) fail("BadModel", "chi2 df must be >= 1");
  return 2.0 * sample_gamma(0.5 * static_cast<double>(df), rng);
}

double sample_pre(const ShiftModel& model, SeededRng& rng) {
  return model.c * sample_chi2(model.df, rng);
}

double sample_post(const ShiftModel& model, SeededRng& rng) {
  return sample_chi2(model.df, rng);
}

UStream::UStream(ShiftModel model, std::int64_t theta, SeededRng rng)
    : model_(model), theta_(theta), rng_(rng) {
  validate(model_);
  if (theta_ < 1) fail("BadTheta", "change point must be >= 1");
}

double UStream::next() {
  ++t_;
  return t_ < theta_ ? sample_pre(model_, rng_) : sample_post(model_, rng_);
}

std::vector<double> gen_stream(const ShiftModel& model, std::int64_t theta,
                               std::int64_t length, SeededRng& rng) {
  if (length < 1) fail("BadLength", "stream length must be >= 1");
  UStream stream(model, theta, rng);
  std::vector<double> us;
  us.reserve(static_cast<std::size_t>(length));
  for (std::int64_t i = 0; i < length; ++i) us.push_back(stream.next());
  return us;
}

std::int64_t sample_theta(const ChangePointPrior& prior, SeededRng& rng) {
  validate(prior);
  const double u = rng.next_double();
  if (prior.nu == 1.0) return 1;
  // Inversion: theta = 1 + floor(log(1-u) / log(1-nu)).
  const double k = std::floor(std::log1p(-u) / std::log1p(-prior.nu));
  return 1 + static_cast<std::int64_t>(k);
}

}  // namespace csieve
