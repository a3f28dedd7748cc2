#include <cmath>
#include <set>

#include "doctest.h"
#include "prpolab/rng.hpp"

using namespace prpolab;

TEST_SUITE("rng") {

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 2000; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(42), d(42);
  for (int i = 0; i < 500; ++i) CHECK(c.gaussian() == d.gaussian());
}

TEST_CASE("uniform stays inside [0, 1)") {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gaussian moments are roughly standard") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum2 += g * g;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("below respects its bound") {
  Rng rng(9);
  for (int i = 0; i < 5000; ++i) CHECK(rng.below(17) < 17);
}

TEST_CASE("derived seeds separate by every coordinate") {
  std::set<uint64_t> seen;
  for (uint64_t a = 0; a < 8; ++a)
    for (uint64_t b = 0; b < 8; ++b)
      for (uint64_t c = 0; c < 8; ++c) CHECK(seen.insert(derive_seed(5, a, b, c)).second);
  CHECK(derive_seed(1, 2, 3, 4) != derive_seed(2, 1, 3, 4));
  CHECK(derive_seed(1, 2, 3, 4) == derive_seed(1, 2, 3, 4));
}

TEST_CASE("splitmix scrambles zero") {
  CHECK(splitmix64(0) != 0);
  CHECK(splitmix64(1) != splitmix64(2));
}

}  // TEST_SUITE
