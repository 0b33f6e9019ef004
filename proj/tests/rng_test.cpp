#include <doctest.h>

#include <cmath>

#include "svaclr/rng.hpp"

using namespace svaclr;

TEST_CASE("same seed gives the same stream") {
  Rng a(0), b(0);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(0), d(0);
  for (int i = 0; i < 2; ++i) CHECK(c.uniform_int(4) == d.uniform_int(4));
}

TEST_CASE("xoshiro256** reference stream for seed 1") {
  // First outputs of xoshiro256** with splitmix64-expanded seed 1; frozen
  // so any regression in the update or seeding rule is caught bit-exactly.
  Rng rng(1);
  const std::uint64_t expected[] = {12966619160104079557ull,
                                    9600361134598540522ull,
                                    10590380919521690900ull};
  for (const std::uint64_t e : expected) CHECK(rng.next_u64() == e);
}

TEST_CASE("uniform stays in range") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(0.0, 1.0);
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(rng.uniform(1.0, 1.0), DomainError);
}

TEST_CASE("uniform_int is unbiased in range and rejects n=0") {
  Rng rng(5);
  int counts[5] = {};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform_int(5)];
  for (int c = 0; c < 5; ++c) {
    const double freq = static_cast<double>(counts[c]) / draws;
    CHECK(freq > 0.19);
    CHECK(freq < 0.21);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), DomainError);
  for (int i = 0; i < 100; ++i) CHECK(rng.uniform_int(1) == 0);
}

TEST_CASE("normal draws average to zero") {
  Rng rng(9);
  double sum = 0.0, sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sq / draws - 1.0) < 0.05);
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(0, 1, 0) != mix_seed(0, 2, 0));
  CHECK(mix_seed(0, 1, 0) != mix_seed(0, 1, 1));
  CHECK(mix_seed(0, 1, 5) == mix_seed(0, 1, 5));
  CHECK(mix_seed(1, 1, 5) != mix_seed(2, 1, 5));
}
