#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <rareloom/measures.hpp>
#include <rareloom/rng.hpp>

#include "test_util.hpp"

using namespace rareloom;

TEST_CASE("discrete measure construction enforces invariants") {
  CHECK_THROWS_AS(DiscreteMeasure({{1.0, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(DiscreteMeasure({{0.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(DiscreteMeasure({{-1.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(DiscreteMeasure({{1.0, -0.5}, {2.0, 1.5}}), std::invalid_argument);

  // Near-duplicate locations merge; zero weights are dropped.
  DiscreteMeasure m({{1.0, 0.25}, {1.0 + 1e-14, 0.25}, {2.0, 0.5}, {3.0, 0.0}});
  CHECK(m.size() == 2);
  CHECK(m.atoms()[0].weight == Catch::Approx(0.5).margin(1e-15));
  CHECK(m.support_hi() == 2.0);
}

TEST_CASE("cdf of a point mass is a right-continuous step") {
  const DiscreteMeasure d1 = DiscreteMeasure::delta(1.0);
  CHECK(d1.cdf(0.5) == 0.0);
  CHECK(d1.cdf(1.0) == 1.0);
  CHECK(d1.cdf(2.0) == 1.0);
}

TEST_CASE("cdf of a Poisson mixture matches direct summation") {
  const auto mix = poisson_mixture(DiscreteMeasure::delta(1.0), 40);
  // e^-1 * (1 + 1), summed independently
  CHECK(mix.pmf.cdf(1) == Catch::Approx(0.7357588823428846).margin(1e-12));
}

TEST_CASE("cdf is monotone and reaches one at the top atom") {
  Xoshiro256StarStar rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    const DiscreteMeasure m = test_util::random_measure(rng);
    double prev = 0.0;
    for (double x = 0.0; x < 11.0; x += 0.37) {
      const double f = m.cdf(x);
      CHECK(f >= prev);
      prev = f;
    }
    CHECK(m.cdf(m.support_hi()) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("wasserstein point-mass identities") {
  CHECK(wasserstein(DiscreteMeasure::delta(1.0), DiscreteMeasure::delta(1.0)) == 0.0);
  CHECK(wasserstein(DiscreteMeasure::delta(0.5), DiscreteMeasure::delta(1.5)) ==
        Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("wasserstein integrates the cdf gap exactly on a three-atom case") {
  const DiscreteMeasure p({{0.1, 0.5}, {1.1, 0.5}});
  const DiscreteMeasure q = DiscreteMeasure::delta(0.6);
  CHECK(wasserstein(p, q) == Catch::Approx(0.5).margin(1e-15));
  CHECK(wasserstein(q, p) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("wasserstein is a metric on random atom triples") {
  Xoshiro256StarStar rng(7);
  for (int rep = 0; rep < 1000; ++rep) {
    const DiscreteMeasure a = test_util::random_measure(rng, 4);
    const DiscreteMeasure b = test_util::random_measure(rng, 4);
    const DiscreteMeasure c = test_util::random_measure(rng, 4);
    CHECK(wasserstein(a, a) == 0.0);
    CHECK(wasserstein(a, b) == wasserstein(b, a));
    CHECK(wasserstein(a, c) <= wasserstein(a, b) + wasserstein(b, c) + 1e-12);
  }
}

TEST_CASE("ks distance basics and a frozen mixture value") {
  const auto m1 = poisson_mixture(DiscreteMeasure::delta(1.0), 50).pmf;
  CHECK(ks_distance(m1, m1) == 0.0);
  CHECK(ks_distance(CountDistribution::delta(0), CountDistribution::delta(1)) == 1.0);

  // Brute-force oracle: cumulative pmf difference summed to k = 50.
  const auto m2 = poisson_mixture(DiscreteMeasure::delta(1.1), 50).pmf;
  CHECK(ks_distance(m1, m2) == Catch::Approx(0.0367296065769176).margin(1e-12));
}

TEST_CASE("l1 distance basics") {
  const auto m1 = poisson_mixture(DiscreteMeasure::delta(1.0), 30).pmf;
  CHECK(l1_distance(m1, m1) == 0.0);
  CHECK(l1_distance(CountDistribution::delta(0), CountDistribution::delta(1)) == 2.0);
}

TEST_CASE("l1 between a truncated-renormalized Poisson and its exact pmf") {
  std::vector<double> exact(21), renorm(21);
  double total = 0.0;
  for (int k = 0; k <= 20; ++k) {
    exact[static_cast<std::size_t>(k)] = poisson_pmf(k, 1.0);
    total += exact[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k <= 20; ++k) {
    renorm[static_cast<std::size_t>(k)] = exact[static_cast<std::size_t>(k)] / total;
  }
  // The independent evaluation of this distance is ~7.5e-21, below double
  // resolution at these magnitudes.
  CHECK(l1_distance(CountDistribution(renorm), CountDistribution(exact)) <= 1e-15);
}

TEST_CASE("poisson mixture point values") {
  const auto single = poisson_mixture(DiscreteMeasure::delta(1.0), 20);
  CHECK(single.pmf.pmf(0) == Catch::Approx(std::exp(-1.0)).margin(1e-15));
  for (int k = 0; k <= 20; ++k) {
    CHECK(single.pmf.pmf(k) == Catch::Approx(poisson_pmf(k, 1.0)).margin(1e-15));
  }

  const DiscreteMeasure two({{0.5, 0.25}, {1.5, 0.75}});
  const auto mix = poisson_mixture(two, 30);
  CHECK(mix.pmf.pmf(0) == Catch::Approx(0.3189802850394807).margin(1e-12));
}

TEST_CASE("poisson mixture of a point mass normalizes up to a vanishing tail") {
  for (double c : {0.5, 1.0, 5.0, 50.0}) {
    const auto mix = poisson_mixture(DiscreteMeasure::delta(c), 200);
    CHECK(mix.tail_mass < 1e-12);
    CHECK(mix.pmf.total_mass() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("poisson mixture is affine in the mixing measure") {
  Xoshiro256StarStar rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const DiscreteMeasure q1 = test_util::random_measure(rng, 3, 0.1, 8.0);
    const DiscreteMeasure q2 = test_util::random_measure(rng, 3, 0.1, 8.0);
    const double alpha = rng.next_double();
    const auto blended = poisson_mixture(mix(q1, q2, alpha), 40).pmf;
    const auto p1 = poisson_mixture(q1, 40).pmf;
    const auto p2 = poisson_mixture(q2, 40).pmf;
    for (int k = 0; k <= 40; ++k) {
      const double expected = alpha * p1.pmf(k) + (1.0 - alpha) * p2.pmf(k);
      CHECK(blended.pmf(k) == Catch::Approx(expected).margin(1e-12));
    }
  }
}

TEST_CASE("poisson mixture of a point mass has mean equal to its rate") {
  for (double c : {0.3, 1.0, 2.5, 7.0}) {
    const int k_top = suggest_k_max(c);
    const auto mix = poisson_mixture(DiscreteMeasure::delta(c), k_top);
    double mean = 0.0;
    for (int k = 0; k <= k_top; ++k) mean += k * mix.pmf.pmf(k);
    CHECK(mean == Catch::Approx(c).margin(1e-7));
  }
}

TEST_CASE("suggested k_max keeps the truncation tail below 1e-10") {
  for (double c : {0.2, 1.0, 3.0, 20.0}) {
    const int k = suggest_k_max(c);
    CHECK(k <= static_cast<int>(std::ceil(10.0 * c + 50.0)));
    double cum = 0.0;
    for (int i = 0; i <= k; ++i) cum += poisson_pmf(i, c);
    CHECK(1.0 - cum < 1e-10);
  }
}

TEST_CASE("count distribution accepts deficient mass but rejects surplus") {
  CHECK_NOTHROW(CountDistribution({0.5, 0.4}));  // truncated mixture carries a tail
  CHECK_THROWS_AS(CountDistribution({0.7, 0.7}), std::invalid_argument);
  CHECK_THROWS_AS(CountDistribution({-0.1, 1.1}), std::invalid_argument);

  const CountDistribution trimmed({0.5, 0.5, 0.0, 0.0});
  CHECK(trimmed.k_max() == 1);
  CHECK(trimmed.pmf(5) == 0.0);
}
