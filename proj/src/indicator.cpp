#include "csieve/indicator.hpp"

#include <algorithm>
#include <string>

namespace csieve {

namespace {

// Cap on Observed-mode symbol ids; dense count storage would explode otherwise.
constexpr std::int64_t kMaxSymbolId = 1 << 20;

void check_mode(const AlphabetMode& mode) {
  if (mode.kind == AlphabetMode::Kind::Fixed && mode.size < 2)
    fail("BadAlphabet", "Fixed alphabet size must be >= 2");
}

BlockHistogram finish(std::vector<std::int64_t> counts, std::int64_t n_total,
                      AlphabetMode mode) {
  BlockHistogram h;
  h.mode = mode;
  h.n_total = n_total;
  if (mode.kind == AlphabetMode::Kind::Fixed) {
    counts.resize(static_cast<std::size_t>(mode.size), 0);
    h.k_kinds = mode.size;
  } else {
    while (!counts.empty() && counts.back() == 0) counts.pop_back();
    h.k_kinds = static_cast<std::int64_t>(
        std::count_if(counts.begin(), counts.end(), [](std::int64_t c) { return c > 0; }));
  }
  h.counts = std::move(counts);
  return h;
}

}  // namespace

namespace detail {

BlockHistogram count_symbols(std::span<const std::int64_t> symbols, AlphabetMode mode) {
  check_mode(mode);
  if (symbols.empty()) fail("EmptyBlock", "cannot count an empty block");

  std::vector<std::int64_t> counts;
  if (mode.kind == AlphabetMode::Kind::Fixed)
    counts.resize(static_cast<std::size_t>(mode.size), 0);

  for (std::int64_t sym : symbols) {
    if (sym < 0) fail("SymbolOutOfRange", "symbol ids must be non-negative");
    if (mode.kind == AlphabetMode::Kind::Fixed) {
      if (sym >= mode.size)
        fail("SymbolOutOfRange",
             "symbol " + std::to_string(sym) + " outside Fixed(" +
                 std::to_string(mode.size) + ") alphabet");
    } else {
      if (sym >= kMaxSymbolId) fail("SymbolOutOfRange", "symbol id too large");
      if (sym >= static_cast<std::int64_t>(counts.size()))
        counts.resize(static_cast<std::size_t>(sym) + 1, 0);
    }
    ++counts[static_cast<std::size_t>(sym)];
  }
  return finish(std::move(counts), static_cast<std::int64_t>(symbols.size()), mode);
}

}  // namespace detail

BlockHistogram count_block(std::span<const std::uint8_t> block, AlphabetMode mode) {
  check_mode(mode);
  if (block.empty()) fail("EmptyBlock", "cannot count an empty block");

  std::vector<std::int64_t> counts(256, 0);
  if (mode.kind == AlphabetMode::Kind::Fixed && mode.size < 256) {
    for (std::uint8_t b : block)
      if (static_cast<int>(b) >= mode.size)
        fail("SymbolOutOfRange", "byte " + std::to_string(int(b)) + " outside Fixed(" +
                                     std::to_string(mode.size) + ") alphabet");
  }
  for (std::uint8_t b : block) ++counts[b];
  return finish(std::move(counts), static_cast<std::int64_t>(block.size()), mode);
}

double crypto_indicator(const BlockHistogram& h) {
  if (h.k_kinds < 2)
    fail("DegenerateAlphabet", "indicator undefined for a single-kind block (df = 0)");

  const std::int64_t k = h.k_kinds;
  const std::int64_t n = h.n_total;
  // Sum (K*O_i - N)^2 over all K cells. Observed mode stores exactly the
  // present kinds (plus trailing zeros already trimmed); Fixed mode includes
  // empty cells, each contributing N^2.
  unsigned __int128 num = 0;
  for (std::int64_t c : h.counts) {
    if (h.mode.kind == AlphabetMode::Kind::Observed && c == 0) continue;
    const std::int64_t d = k * c - n;
    num += static_cast<unsigned __int128>(static_cast<__int128>(d) * d);
  }
  const long double denom = static_cast<long double>(k) * static_cast<long double>(n);
  return static_cast<double>(static_cast<long double>(num) / denom);
}

double crypto_indicator_bytes256(std::span<const std::uint8_t> block) {
  if (block.empty()) fail("EmptyBlock", "cannot count an empty block");

  // Four count tables break the store-to-load dependency on repeated bytes.
  std::int64_t counts[4][256] = {};
  const std::uint8_t* p = block.data();
  std::size_t i = 0;
  for (; i + 4 <= block.size(); i += 4) {
    ++counts[0][p[i]];
    ++counts[1][p[i + 1]];
    ++counts[2][p[i + 2]];
    ++counts[3][p[i + 3]];
  }
  for (; i < block.size(); ++i) ++counts[0][p[i]];

  const std::int64_t n = static_cast<std::int64_t>(block.size());
  unsigned __int128 num = 0;
  for (int s = 0; s < 256; ++s) {
    const std::int64_t total =
        counts[0][s] + counts[1][s] + counts[2][s] + counts[3][s];
    const std::int64_t d = 256 * total - n;
    num += static_cast<unsigned __int128>(static_cast<__int128>(d) * d);
  }
  return static_cast<double>(static_cast<long double>(num) /
                             (256.0L * static_cast<long double>(n)));
}

IndicatorStream::IndicatorStream(BlockSource source, AlphabetMode mode)
    : source_(std::move(source)), mode_(mode) {
  check_mode(mode_);
}

std::optional<IndicatorSample> IndicatorStream::next() {
  auto block = source_();
  if (!block) return std::nullopt;
  const std::int64_t t = t_ + 1;
  try {
    BlockHistogram h = count_block(std::span<const std::uint8_t>(*block), mode_);
    IndicatorSample s{t, crypto_indicator(h), h.k_kinds - 1};
    t_ = t;
    return s;
  } catch (const SieveError& e) {
    throw SieveError(e.code(), "block " + std::to_string(t) + ": " + e.what());
  }
}

}  // namespace csieve
