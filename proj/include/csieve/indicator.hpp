#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "csieve/common.hpp"

namespace csieve {

/// How the alphabet (and hence the degrees of freedom K-1) is determined.
///
/// Observed counts only the kinds present in the block, as in desk-scale
/// replication over tiny alphabets. Fixed(size) declares the alphabet up front
/// (the byte scanner default, Fixed(256)): absent symbols count as empty cells,
/// so every block shares the same df and thresholds stay comparable.
struct AlphabetMode {
  enum class Kind { Observed, Fixed };

  Kind kind = Kind::Fixed;
  int size = 256;  // Fixed only

  static AlphabetMode observed() { return {Kind::Observed, 0}; }
  static AlphabetMode fixed(int size) { return {Kind::Fixed, size}; }

  bool operator==(const AlphabetMode&) const = default;
};

/// Per-block character counts: N (total symbols) and K (character kinds).
struct BlockHistogram {
  AlphabetMode mode;
  std::vector<std::int64_t> counts;  // dense, indexed by symbol id
  std::int64_t n_total = 0;
  std::int64_t k_kinds = 0;

  std::int64_t count_of(std::int64_t symbol) const {
    if (symbol < 0 || symbol >= static_cast<std::int64_t>(counts.size())) return 0;
    return counts[static_cast<std::size_t>(symbol)];
  }
};

/// One indicator observation: u = U_t with df = K_t - 1, at block index t.
struct IndicatorSample {
  std::int64_t t = 0;
  double u = 0.0;
  std::int64_t df = 0;
};

namespace detail {
BlockHistogram count_symbols(std::span<const std::int64_t> symbols, AlphabetMode mode);
}

/// Tallies one block of symbols into a histogram.
///
/// Symbol identity is the raw byte value; any non-negative integer id works for
/// small-alphabet experiments. Fixed mode requires size >= 2 and every id to lie
/// inside the declared alphabet.
BlockHistogram count_block(std::span<const std::uint8_t> block, AlphabetMode mode);

template <std::integral Symbol>
BlockHistogram count_block(std::span<const Symbol> symbols, AlphabetMode mode) {
  std::vector<std::int64_t> ids(symbols.begin(), symbols.end());
  return detail::count_symbols(ids, mode);
}

/// The crypto indicator of a block: the Pearson chi-square statistic against the
/// uniform law,
///
///   U = sum_i (K*O_i - N)^2 / (K*N)  over all K alphabet cells,
///
/// which equals sum_i (O_i - N/K)^2 / (N/K). Low values mean evenly used
/// symbols, i.e. encryption-like content. Numerators are accumulated in exact
/// integer arithmetic; only the final division is floating point.
double crypto_indicator(const BlockHistogram& h);

/// Indicator of a raw byte block over the full Fixed(256) alphabet, computed
/// without materializing a histogram: the scanner's hot path. Exactly the
/// integer arithmetic of crypto_indicator over count_block(block, fixed(256)).
double crypto_indicator_bytes256(std::span<const std::uint8_t> block);

/// Pulls whole blocks; empty optional ends the stream.
using BlockSource = std::function<std::optional<std::vector<std::uint8_t>>()>;

/// Lazily turns a block source into indicator samples t = 1, 2, 3, ...
/// Constant memory in the number of blocks; errors are rethrown tagged with the
/// offending block index.
class IndicatorStream {
 public:
  IndicatorStream(BlockSource source, AlphabetMode mode);

  std::optional<IndicatorSample> next();

 private:
  BlockSource source_;
  AlphabetMode mode_;
  std::int64_t t_ = 0;
};

}  // namespace csieve
