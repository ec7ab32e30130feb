#include <doctest.h>

#include <cmath>
#include <vector>

#include "dfr/common.hpp"
#include "dfr/rng.hpp"
#include "oracles.hpp"

using dfr::RngStream;

TEST_CASE("normal quantile matches an erfc-based cdf oracle") {
  // verify in tail-probability space: the erfc tail is fully accurate there,
  // while x-space bisection degrades near p = 1 with the granularity of p
  for (double p : {1e-12, 1e-6, 1e-3, 0.025, 0.1, 0.3, 0.5, 0.7, 0.975, 0.999, 1.0 - 1e-9}) {
    const double got = dfr::norm_quantile(p);
    if (p <= 0.5) {
      const double tail = oracles::normal_cdf(got);
      CHECK(std::fabs(tail - p) <= 1e-9 * p);
    } else {
      const double upper = oracles::normal_cdf(-got);
      CHECK(std::fabs(upper - (1.0 - p)) <= 1e-9 * (1.0 - p));
    }
  }
  for (double p : {1e-3, 0.025, 0.3, 0.5, 0.8}) {
    const double want = oracles::normal_quantile_bisect(p);
    CHECK(dfr::norm_quantile(p) == doctest::Approx(want).epsilon(1e-9));
  }
  CHECK(dfr::norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(dfr::norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(dfr::norm_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK_THROWS_AS(dfr::norm_quantile(0.0), dfr::Error);
  CHECK_THROWS_AS(dfr::norm_quantile(1.0), dfr::Error);
}

TEST_CASE("streams are deterministic and children are independent") {
  RngStream a = RngStream::root(42);
  RngStream b = RngStream::root(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c1 = RngStream::root(42).child("net", 0);
  RngStream c2 = RngStream::root(42).child("net", 1);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += (c1.next_u32() == c2.next_u32());
  CHECK(equal < 4);

  RngStream d1 = RngStream::root(1);
  RngStream d2 = RngStream::root(2);
  CHECK(d1.next_u64() != d2.next_u64());
}

TEST_CASE("uniform, below, and open-interval draws stay in range") {
  RngStream s = RngStream::root(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = s.uniform_open();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    const auto k = s.below(17);
    CHECK(k < 17);
  }
  double lo = 1.0, hi = 0.0;
  RngStream t = RngStream::root(8);
  for (int i = 0; i < 20000; ++i) {
    const double u = t.uniform(2.0, 5.0);
    CHECK(u >= 2.0);
    CHECK(u < 5.0);
    lo = std::min(lo, (u - 2.0) / 3.0);
    hi = std::max(hi, (u - 2.0) / 3.0);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("gamma moments match shape*scale and shape*scale^2") {
  RngStream s = RngStream::root(11);
  const double shape = 9.0, scale = 1.0 / 3.0;  // mean 3, variance 1
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = s.gamma(shape, scale);
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(3.0).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));

  // small-shape branch
  RngStream t = RngStream::root(12);
  double small_sum = 0.0;
  for (int i = 0; i < n; ++i) small_sum += t.gamma(0.4, 2.0);
  CHECK(small_sum / n == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("beta sample mean approaches alpha1/(alpha1+alpha2)") {
  RngStream s = RngStream::root(13);
  const double a = 0.7, b = 1.9;
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += s.beta(a, b);
  CHECK(sum / n == doctest::Approx(a / (a + b)).epsilon(0.01));
  RngStream t = RngStream::root(14);
  for (int i = 0; i < 1000; ++i) {
    const double x = t.beta(0.05, 3.0);
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("normal draws match moments via inversion") {
  RngStream s = RngStream::root(15);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal(2.0, 3.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(std::sqrt(sumsq / n - mean * mean) == doctest::Approx(3.0).epsilon(0.02));
}
