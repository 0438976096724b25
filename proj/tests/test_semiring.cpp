#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "mpinf/semiring.hpp"
#include "test_util.hpp"

using namespace mpinf;

TEST_CASE("combine at beta=1 on equal inputs gives log 2", "[semiring]") {
  CHECK(combine(temperature::finite(1.0), 0.0, 0.0) == Catch::Approx(std::log(2.0)).margin(1e-15));
}

TEST_CASE("combine at beta=inf is max", "[semiring]") {
  CHECK(combine(temperature::infinite(), 3.0, 5.0) == 5.0);
  CHECK(combine(temperature::infinite(), 5.0, 3.0) == 5.0);
  CHECK(combine(temperature::infinite(), -1.0, neg_inf) == -1.0);
}

TEST_CASE("-inf is the exact neutral element", "[semiring]") {
  std::mt19937_64 rng(1);
  const temperature t = temperature::finite(1.0);
  for (int i = 0; i < 100; ++i) {
    const double x = testutil::uniform(rng, -50.0, 50.0);
    CHECK(combine(t, x, neg_inf) == x);
    CHECK(combine(t, neg_inf, x) == x);
  }
  CHECK(combine(t, neg_inf, neg_inf) == neg_inf);
}

TEST_CASE("combine_reduce examples", "[semiring]") {
  const std::vector<double> four_zeros{0.0, 0.0, 0.0, 0.0};
  CHECK(combine_reduce(temperature::finite(1.0), four_zeros) == Catch::Approx(std::log(4.0)).margin(1e-15));
  const std::vector<double> mix{-1.0, 2.0, 0.0};
  CHECK(combine_reduce(temperature::infinite(), mix) == 2.0);
  const std::vector<double> two_zeros{0.0, 0.0};
  CHECK(combine_reduce(temperature::finite(10.0), two_zeros) == Catch::Approx(std::log(2.0) / 10.0).margin(1e-15));
}

TEST_CASE("combine_reduce rejects an empty sequence", "[semiring]") {
  CHECK_THROWS_AS(combine_reduce(temperature::finite(1.0), std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("combine_reduce of all -inf is -inf", "[semiring]") {
  const std::vector<double> dead{neg_inf, neg_inf, neg_inf};
  CHECK(combine_reduce(temperature::finite(2.0), dead) == neg_inf);
  CHECK(combine_reduce(temperature::infinite(), dead) == neg_inf);
}

TEST_CASE("temperature rejects nonpositive or non-finite beta", "[semiring]") {
  CHECK_THROWS_AS(temperature::finite(0.0), std::invalid_argument);
  CHECK_THROWS_AS(temperature::finite(-3.0), std::invalid_argument);
  CHECK_THROWS_AS(temperature::finite(std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("max <= combine <= max + log2/beta", "[semiring]") {
  std::mt19937_64 rng(2);
  for (double beta : {1.0, 10.0, 100.0, 1000.0}) {
    const temperature t = temperature::finite(beta);
    const double bound = std::log(2.0) / beta;
    for (int i = 0; i < 500; ++i) {
      const double x = testutil::uniform(rng, -30.0, 30.0);
      const double y = testutil::uniform(rng, -30.0, 30.0);
      const double c = combine(t, x, y);
      const double m = std::max(x, y);
      CHECK(c >= m);
      CHECK(c - m <= bound);
    }
    // exact tie: the bound is attained
    CHECK(combine(t, 1.25, 1.25) - 1.25 <= bound);
  }
}

TEST_CASE("adding a constant distributes over combine", "[semiring]") {
  std::mt19937_64 rng(3);
  for (double beta : {0.5, 1.0, 7.0}) {
    const temperature t = temperature::finite(beta);
    for (int i = 0; i < 200; ++i) {
      const double x = testutil::uniform(rng, -10.0, 10.0);
      const double y = testutil::uniform(rng, -10.0, 10.0);
      const double c = testutil::uniform(rng, -10.0, 10.0);
      CHECK(combine(t, x + c, y + c) == Catch::Approx(combine(t, x, y) + c).margin(1e-12));
    }
  }
}

TEST_CASE("combine is commutative and associative within 1e-10", "[semiring]") {
  std::mt19937_64 rng(4);
  for (double beta : {1.0, 25.0}) {
    const temperature t = temperature::finite(beta);
    for (int i = 0; i < 200; ++i) {
      const double x = testutil::uniform(rng, -20.0, 20.0);
      const double y = testutil::uniform(rng, -20.0, 20.0);
      const double z = testutil::uniform(rng, -20.0, 20.0);
      CHECK(combine(t, x, y) == Catch::Approx(combine(t, y, x)).margin(1e-10));
      CHECK(combine(t, combine(t, x, y), z) == Catch::Approx(combine(t, x, combine(t, y, z))).margin(1e-10));
    }
  }
}

TEST_CASE("combine_reduce matches sequential combine within 1e-10", "[semiring]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const temperature t = (trial % 3 == 0) ? temperature::infinite()
                                           : temperature::finite(testutil::uniform(rng, 0.1, 50.0));
    const std::size_t n = 1 + rng() % 64;
    std::vector<double> xs(n);
    for (auto& x : xs) x = (rng() % 16 == 0) ? neg_inf : testutil::uniform(rng, -20.0, 20.0);
    double fold = xs[0];
    for (std::size_t i = 1; i < n; ++i) fold = combine(t, fold, xs[i]);
    const double reduced = combine_reduce(t, xs);
    if (fold == neg_inf)
      CHECK(reduced == neg_inf);
    else
      CHECK(reduced == Catch::Approx(fold).margin(1e-10));
  }
}

TEST_CASE("semiring results are never NaN or +inf", "[semiring]") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const temperature t = (i % 2) ? temperature::infinite() : temperature::finite(testutil::uniform(rng, 1e-3, 1e3));
    const double x = (rng() % 8 == 0) ? neg_inf : testutil::uniform(rng, -700.0, 700.0);
    const double y = (rng() % 8 == 0) ? neg_inf : testutil::uniform(rng, -700.0, 700.0);
    CHECK(is_valid_value(combine(t, x, y)));
  }
}
