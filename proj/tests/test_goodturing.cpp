#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <rareloom/goodturing.hpp>
#include <rareloom/measures.hpp>
#include <rareloom/sources.hpp>

using namespace rareloom;

namespace {

SampleRecord record_from(std::vector<std::uint32_t> counts) {
  SampleRecord rec;
  long n = 0;
  for (std::uint32_t c : counts) n += c;
  rec.counts = std::move(counts);
  rec.n = n;
  return rec;
}

PiecewiseDensity two_step() { return PiecewiseDensity::step({0.0, 0.5, 1.0}, {0.5, 1.5}); }

}  // namespace

TEST_CASE("occupancy tallies the count histogram") {
  const OccupancyCounts a = occupancy(record_from({2, 1}));
  CHECK(a.n == 3);
  CHECK(a.at(1) == 1);
  CHECK(a.at(2) == 1);
  CHECK(a.at(3) == 0);

  const OccupancyCounts b = occupancy(record_from({1, 1, 1}));
  CHECK(b.at(1) == 3);

  const OccupancyCounts c = occupancy(record_from({3}));
  CHECK(c.at(3) == 1);
  CHECK(c.at(1) == 0);
}

TEST_CASE("good-turing estimator on tiny occupancy profiles") {
  const CountDistribution a = gt_estimator(occupancy(record_from({2, 1})));
  CHECK(a.pmf(0) == Catch::Approx(1.0 / 3.0).margin(1e-15));
  CHECK(a.pmf(1) == Catch::Approx(2.0 / 3.0).margin(1e-15));

  const CountDistribution b = gt_estimator(occupancy(record_from({1, 1, 1})));
  CHECK(b.pmf(0) == 1.0);
  CHECK(b.k_max() == 0);

  const CountDistribution c = gt_estimator(occupancy(record_from({3})));
  CHECK(c.pmf(2) == 1.0);
  CHECK(c.pmf(0) == 0.0);
}

TEST_CASE("good-turing masses sum to one on sampled data") {
  const RareEventsSource src = quantize(two_step(), 20000);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const CountDistribution phi = gt_estimator(occupancy(sample(src, seed)));
    CHECK(phi.total_mass() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("true gamma sums the source probability per occupancy class") {
  const RareEventsSource src(3, 1.0, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  const CountDistribution gamma = true_gamma(src, record_from({2, 1, 0}));
  CHECK(gamma.pmf(0) == Catch::Approx(1.0 / 3.0).margin(1e-15));
  CHECK(gamma.pmf(1) == Catch::Approx(1.0 / 3.0).margin(1e-15));
  CHECK(gamma.pmf(2) == Catch::Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("unseen mass is the complement of the seen probabilities") {
  const RareEventsSource src(2, 2.0, {0.1, 0.2, 0.3, 0.4});
  const CountDistribution gamma = true_gamma(src, record_from({1, 0, 1, 0}));
  CHECK(gamma.pmf(0) == Catch::Approx(0.6).margin(1e-15));
  CHECK(gamma.pmf(1) == Catch::Approx(0.4).margin(1e-15));
}

TEST_CASE("single-symbol source puts all gamma mass at k = n") {
  const RareEventsSource src(5, 0.2, {1.0});
  const CountDistribution gamma = true_gamma(src, record_from({5}));
  CHECK(gamma.pmf(5) == 1.0);
  CHECK(gamma.total_mass() == 1.0);
}

TEST_CASE("true gamma rejects a mismatched record") {
  const RareEventsSource src(3, 1.0, {0.5, 0.5});
  CHECK_THROWS_AS(true_gamma(src, record_from({1, 1, 1})), MismatchedSourceError);
}

TEST_CASE("true gamma sums to one on sampled data") {
  const RareEventsSource src = quantize(two_step(), 5000);
  const SampleRecord rec = sample(src, 17);
  const CountDistribution gamma = true_gamma(src, rec);
  CHECK(gamma.total_mass() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("mixture target of the uniform density is Poisson(1)") {
  const CountDistribution lambda = mixture_target(PiecewiseDensity::uniform(), 25);
  for (int k = 0; k <= 20; ++k) {
    CHECK(lambda.pmf(k) == Catch::Approx(poisson_pmf(k, 1.0)).margin(1e-12));
  }
  CHECK(lambda.total_mass() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("mixture target of the two-step density") {
  const CountDistribution lambda = mixture_target(two_step(), 30);
  CHECK(lambda.pmf(0) == Catch::Approx(0.3189802850394807).margin(1e-12));
  CHECK(lambda.total_mass() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("pseudo-empirical l1 error shrinks with n") {
  const PiecewiseDensity g = two_step();
  const CountDistribution lambda = mixture_target(g, 40);
  double prev = 2.0;
  for (long n : {100L, 1000L, 10000L}) {
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const CountDistribution phi = gt_estimator(occupancy(sample(quantize(g, n), seed)));
      mean += l1_distance(phi, lambda);
    }
    mean /= 5.0;
    CHECK(mean < prev);
    prev = mean;
  }
}

TEST_CASE("concentration around the replication mean does not worsen at rate 0.4") {
  const PiecewiseDensity g = two_step();
  const int reps = 200;
  double prev_scaled = std::numeric_limits<double>::infinity();
  for (long n : {100L, 1000L, 10000L, 100000L}) {
    const RareEventsSource src = quantize(g, n);
    std::vector<std::vector<double>> phis;
    phis.reserve(reps);
    std::size_t width = 0;
    for (int r = 0; r < reps; ++r) {
      const CountDistribution phi =
          gt_estimator(occupancy(sample(src, 1000 + static_cast<std::uint64_t>(r))));
      phis.push_back(phi.masses());
      width = std::max(width, phis.back().size());
    }
    std::vector<double> mean(width, 0.0);
    for (const auto& v : phis) {
      for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
    }
    for (double& m : mean) m /= static_cast<double>(reps);

    double avg_l1 = 0.0;
    for (const auto& v : phis) {
      double l1 = 0.0;
      for (std::size_t k = 0; k < width; ++k) {
        const double vk = k < v.size() ? v[k] : 0.0;
        l1 += std::abs(vk - mean[k]);
      }
      avg_l1 += l1;
    }
    avg_l1 /= static_cast<double>(reps);

    const double scaled = avg_l1 * std::pow(static_cast<double>(n), 0.4);
    CHECK(scaled <= prev_scaled);
    prev_scaled = scaled;
  }
}
