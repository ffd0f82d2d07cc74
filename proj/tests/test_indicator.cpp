#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "csieve/indicator.hpp"
#include "csieve/models.hpp"
#include "oracles.hpp"

using namespace csieve;

namespace {

// 60-symbol reference block over the alphabet {0,1,2,3}; tallies to
// {0:16, 1:19, 2:11, 3:14}.
const std::vector<std::int64_t> kReferenceBlock = {
    1, 2, 1, 1, 1, 0, 1, 0, 3, 3,  //
    0, 3, 1, 1, 3, 2, 0, 2, 0, 3,  //
    0, 2, 2, 0, 1, 0, 0, 0, 3, 0,  //
    1, 0, 3, 0, 1, 2, 2, 2, 1, 1,  //
    2, 1, 3, 3, 1, 0, 2, 1, 3, 3,  //
    3, 0, 1, 1, 1, 0, 1, 3, 3, 2,
};

std::span<const std::int64_t> ref_block() { return kReferenceBlock; }

}  // namespace

TEST_CASE("reference block counts") {
  const BlockHistogram h = count_block(ref_block(), AlphabetMode::observed());
  CHECK(h.n_total == 60);
  CHECK(h.k_kinds == 4);
  CHECK(h.count_of(0) == 16);
  CHECK(h.count_of(1) == 19);
  CHECK(h.count_of(2) == 11);
  CHECK(h.count_of(3) == 14);
  const std::int64_t sum = std::accumulate(h.counts.begin(), h.counts.end(), std::int64_t{0});
  CHECK(sum == h.n_total);
}

TEST_CASE("reference block indicator value") {
  const BlockHistogram h = count_block(ref_block(), AlphabetMode::observed());
  // (4*16-60)^2 + (4*19-60)^2 + (4*11-60)^2 + (4*14-60)^2 = 544; 544/240 = 34/15
  CHECK(crypto_indicator(h) == doctest::Approx(34.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("all-zero block in fixed mode") {
  const std::vector<std::uint8_t> zeros(512, 0);
  const BlockHistogram h =
      count_block(std::span<const std::uint8_t>(zeros), AlphabetMode::fixed(256));
  CHECK(h.n_total == 512);
  CHECK(h.k_kinds == 256);
  CHECK(h.count_of(0) == 512);
  CHECK(h.count_of(1) == 0);
  CHECK(h.count_of(255) == 0);
  // All mass on one of K cells: U = N * (K - 1).
  CHECK(crypto_indicator(h) == doctest::Approx(512.0 * 255.0).epsilon(1e-12));
}

TEST_CASE("perfectly uniform block has zero indicator") {
  std::vector<std::int64_t> block;
  for (int rep = 0; rep < 7; ++rep)
    for (std::int64_t s = 0; s < 5; ++s) block.push_back(s);
  const BlockHistogram h =
      count_block(std::span<const std::int64_t>(block), AlphabetMode::observed());
  CHECK(crypto_indicator(h) == 0.0);
}

TEST_CASE("indicator is zero only for exactly equal counts") {
  // Uniform block, then perturb one pair of cells: U must leave zero.
  std::vector<std::int64_t> block;
  for (int rep = 0; rep < 6; ++rep)
    for (std::int64_t s = 0; s < 4; ++s) block.push_back(s);
  CHECK(crypto_indicator(count_block(std::span<const std::int64_t>(block),
                              AlphabetMode::observed())) == 0.0);
  block[0] = 1;  // counts now {5,7,6,6}
  CHECK(crypto_indicator(count_block(std::span<const std::int64_t>(block),
                              AlphabetMode::observed())) > 0.0);
}

TEST_CASE("empty block is rejected") {
  const std::vector<std::uint8_t> empty;
  CHECK_THROWS_WITH_AS(count_block(std::span<const std::uint8_t>(empty),
                                   AlphabetMode::fixed(256)),
                       "cannot count an empty block", SieveError);
  try {
    count_block(std::span<const std::uint8_t>(empty), AlphabetMode::observed());
    FAIL("expected EmptyBlock");
  } catch (const SieveError& e) {
    CHECK(e.code() == "EmptyBlock");
  }
}

TEST_CASE("single-kind observed block is countable but has no indicator") {
  const std::vector<std::int64_t> block(32, 7);
  const BlockHistogram h =
      count_block(std::span<const std::int64_t>(block), AlphabetMode::observed());
  CHECK(h.k_kinds == 1);
  CHECK(h.n_total == 32);
  try {
    crypto_indicator(h);
    FAIL("expected DegenerateAlphabet");
  } catch (const SieveError& e) {
    CHECK(e.code() == "DegenerateAlphabet");
  }
}

TEST_CASE("fixed mode rejects out-of-alphabet symbols") {
  const std::vector<std::int64_t> block = {0, 1, 2, 3, 4};
  try {
    count_block(std::span<const std::int64_t>(block), AlphabetMode::fixed(4));
    FAIL("expected SymbolOutOfRange");
  } catch (const SieveError& e) {
    CHECK(e.code() == "SymbolOutOfRange");
  }
}

TEST_CASE("indicator equals the classical Pearson form on random histograms") {
  SeededRng rng(20240805, 0);
  for (int iter = 0; iter < 1200; ++iter) {
    const int k = 2 + static_cast<int>(rng.next_u64() % 40);
    std::vector<std::int64_t> block;
    for (int s = 0; s < k; ++s) {
      const auto copies = 1 + rng.next_u64() % 60;  // every kind present
      for (std::uint64_t i = 0; i < copies; ++i) block.push_back(s);
    }
    const BlockHistogram h =
        count_block(std::span<const std::int64_t>(block), AlphabetMode::observed());
    REQUIRE(h.k_kinds == k);
    const double u = crypto_indicator(h);
    const double reference = oracles::pearson_uniform(h.counts, k);
    CHECK(std::abs(u - reference) <= 1e-9 * (1.0 + u));
  }
}

TEST_CASE("fixed-mode indicator counts absent cells") {
  // One observed symbol out of Fixed(8): the 7 empty cells contribute N/K each.
  std::vector<std::int64_t> block = {0, 0, 0, 0, 1, 1, 2, 3};
  const BlockHistogram h =
      count_block(std::span<const std::int64_t>(block), AlphabetMode::fixed(8));
  const double u = crypto_indicator(h);
  std::vector<std::int64_t> dense(8, 0);
  dense[0] = 4;
  dense[1] = 2;
  dense[2] = 1;
  dense[3] = 1;
  CHECK(u == doctest::Approx(oracles::pearson_uniform(dense, 8)).epsilon(1e-12));
}

TEST_CASE("byte fast path equals the histogram route") {
  SeededRng rng(515, 0);
  for (std::size_t len : {64u, 65u, 66u, 67u, 255u, 4096u}) {
    std::vector<std::uint8_t> block(len);
    for (auto& b : block) b = static_cast<std::uint8_t>(rng.next_u64() & 0xFF);
    const std::span<const std::uint8_t> view(block);
    CHECK(crypto_indicator_bytes256(view) ==
          crypto_indicator(count_block(view, AlphabetMode::fixed(256))));
  }
  const std::vector<std::uint8_t> zeros(512, 0);
  CHECK(crypto_indicator_bytes256(std::span<const std::uint8_t>(zeros)) ==
        512.0 * 255.0);
}

TEST_CASE("permuting symbol labels leaves the indicator unchanged") {
  SeededRng rng(99, 1);
  for (int iter = 0; iter < 200; ++iter) {
    const int k = 3 + static_cast<int>(rng.next_u64() % 10);
    std::vector<std::int64_t> block;
    for (int s = 0; s < k; ++s) {
      const auto copies = 1 + rng.next_u64() % 25;
      for (std::uint64_t i = 0; i < copies; ++i) block.push_back(s);
    }
    std::vector<std::int64_t> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    std::vector<std::int64_t> relabeled;
    relabeled.reserve(block.size());
    for (std::int64_t s : block) relabeled.push_back(perm[static_cast<std::size_t>(s)]);

    const double u1 = crypto_indicator(
        count_block(std::span<const std::int64_t>(block), AlphabetMode::observed()));
    const double u2 = crypto_indicator(
        count_block(std::span<const std::int64_t>(relabeled), AlphabetMode::observed()));
    CHECK(u1 == doctest::Approx(u2).epsilon(1e-12));
  }
}

TEST_CASE("scaling every count by m scales the indicator by m") {
  SeededRng rng(7, 2);
  for (int iter = 0; iter < 100; ++iter) {
    const int k = 2 + static_cast<int>(rng.next_u64() % 8);
    std::vector<std::int64_t> block;
    for (int s = 0; s < k; ++s) {
      const auto copies = 1 + rng.next_u64() % 12;
      for (std::uint64_t i = 0; i < copies; ++i) block.push_back(s);
    }
    const int m = 2 + static_cast<int>(rng.next_u64() % 5);
    std::vector<std::int64_t> scaled;
    for (std::int64_t s : block)
      for (int i = 0; i < m; ++i) scaled.push_back(s);

    const double u1 = crypto_indicator(
        count_block(std::span<const std::int64_t>(block), AlphabetMode::observed()));
    const double um = crypto_indicator(
        count_block(std::span<const std::int64_t>(scaled), AlphabetMode::observed()));
    CHECK(um == doctest::Approx(m * u1).epsilon(1e-10));
  }
}

namespace {

BlockSource source_from_blocks(std::vector<std::vector<std::uint8_t>> blocks) {
  auto index = std::make_shared<std::size_t>(0);
  auto store = std::make_shared<std::vector<std::vector<std::uint8_t>>>(std::move(blocks));
  return [index, store]() -> std::optional<std::vector<std::uint8_t>> {
    if (*index >= store->size()) return std::nullopt;
    return (*store)[(*index)++];
  };
}

}  // namespace

TEST_CASE("indicator stream yields consecutive t and propagates values") {
  std::vector<std::uint8_t> uniform;
  for (int rep = 0; rep < 4; ++rep)
    for (int s = 0; s < 4; ++s) uniform.push_back(static_cast<std::uint8_t>(s));

  IndicatorStream stream(source_from_blocks({uniform, uniform, uniform}),
                         AlphabetMode::observed());
  for (std::int64_t expect_t = 1; expect_t <= 3; ++expect_t) {
    const auto sample = stream.next();
    REQUIRE(sample.has_value());
    CHECK(sample->t == expect_t);
    CHECK(sample->u == 0.0);
    CHECK(sample->df == 3);
  }
  CHECK(!stream.next().has_value());
}

TEST_CASE("indicator stream over an empty source") {
  IndicatorStream stream(source_from_blocks({}), AlphabetMode::fixed(256));
  CHECK(!stream.next().has_value());
}

TEST_CASE("indicator stream repeats the reference value") {
  std::vector<std::uint8_t> block;
  for (std::int64_t s : kReferenceBlock) block.push_back(static_cast<std::uint8_t>(s));
  IndicatorStream stream(source_from_blocks({block, block}), AlphabetMode::observed());
  const auto s1 = stream.next();
  const auto s2 = stream.next();
  REQUIRE(s1.has_value());
  REQUIRE(s2.has_value());
  CHECK(s1->u == doctest::Approx(34.0 / 15.0).epsilon(1e-12));
  CHECK(s2->u == doctest::Approx(34.0 / 15.0).epsilon(1e-12));
  CHECK(s2->t == 2);
}

TEST_CASE("indicator stream tags errors with the block index") {
  std::vector<std::uint8_t> good = {0, 1, 2, 3};
  std::vector<std::uint8_t> degenerate(16, 9);
  IndicatorStream stream(source_from_blocks({good, degenerate}),
                         AlphabetMode::observed());
  CHECK(stream.next().has_value());
  try {
    stream.next();
    FAIL("expected DegenerateAlphabet");
  } catch (const SieveError& e) {
    CHECK(e.code() == "DegenerateAlphabet");
    CHECK(std::string(e.what()).find("block 2") != std::string::npos);
  }
}
