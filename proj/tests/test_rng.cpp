#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "skt/rng.hpp"

using skt::Rng;

TEST_CASE("same seed reproduces the exact stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(43);
  int diff = 0;
  for (int i = 0; i < 16; ++i) diff += c.next_u64() != d.next_u64();
  CHECK(diff > 12);
}

TEST_CASE("uniform stays in [0,1) and covers the range") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("bounded and uniform_int respect bounds") {
  Rng rng(11);
  std::set<int> seen;
  for (int i = 0; i < 5000; ++i) {
    const int v = rng.uniform_int(3, 9);
    CHECK(v >= 3);
    CHECK(v <= 9);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  for (int i = 0; i < 100; ++i) CHECK(rng.bounded(1) == 0);
}

TEST_CASE("normal moments") {
  Rng rng(1234);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(2.0, 3.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(std::sqrt(var) == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("split streams are independent and reproducible") {
  Rng base(42);
  Rng s1 = base.split(1);
  Rng s2 = base.split(2);
  Rng s1b = Rng(42).split(1);
  int same12 = 0;
  for (int i = 0; i < 64; ++i) {
    const auto a = s1.next_u64();
    const auto b = s2.next_u64();
    CHECK(a == s1b.next_u64());
    same12 += a == b;
  }
  CHECK(same12 == 0);
}

TEST_CASE("shuffle is a seeded permutation") {
  Rng a(5), b(5);
  std::vector<int> v1(50), v2(50);
  for (int i = 0; i < 50; ++i) v1[static_cast<std::size_t>(i)] = v2[static_cast<std::size_t>(i)] = i;
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("stream values are pinned for cross-platform reproducibility") {
  // Frozen from the documented splitmix64 + xoshiro256++ construction; a
  // change here breaks every seeded artifact downstream.
  Rng rng(42);
  CHECK(rng.next_u64() == 15021278609987233951ULL);
  CHECK(rng.next_u64() == 5881210131331364753ULL);
  CHECK(rng.next_u64() == 18149643915985481100ULL);
  Rng other(3407);
  CHECK(other.next_u64() == 1886853574874669938ULL);
}
