#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <rareloom/measures.hpp>
#include <rareloom/sources.hpp>

using namespace rareloom;

namespace {

PiecewiseDensity two_step() { return PiecewiseDensity::step({0.0, 0.5, 1.0}, {0.5, 1.5}); }

// Step at w = 1/3 with levels chosen to integrate to 1.
PiecewiseDensity misaligned_step() {
  return PiecewiseDensity::step({0.0, 1.0 / 3.0, 1.0}, {0.5, 1.25});
}

}  // namespace

TEST_CASE("piecewise density validates its structure") {
  CHECK_THROWS_AS(PiecewiseDensity::step({0.0, 0.6}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseDensity::step({0.0, 0.5, 1.0}, {1.0, 1.2}),
                  std::invalid_argument);  // does not integrate to 1
  CHECK_THROWS_AS(PiecewiseDensity::step({0.0, 0.5, 1.0}, {0.0, 2.0}),
                  std::invalid_argument);  // touches zero
  CHECK_THROWS_AS(
      PiecewiseDensity({{0.0, 0.4, 0.0, 1.0}, {0.6, 1.0, 0.0, 1.0}}),
      std::invalid_argument);  // gap

  const PiecewiseDensity g = two_step();
  CHECK(g.c_lo() == 0.5);
  CHECK(g.c_hi() == 1.5);
  CHECK(g.is_step());
  CHECK(g.discontinuity_count() == 1);
}

TEST_CASE("a continuous tent density has no jump discontinuities") {
  const PiecewiseDensity tent({{0.0, 0.5, 2.0, 0.5}, {0.5, 1.0, -2.0, 2.5}});
  CHECK(tent.discontinuity_count() == 0);
  CHECK_FALSE(tent.is_step());
  CHECK(tent.c_lo() == 0.5);
  CHECK(tent.c_hi() == 1.5);
}

TEST_CASE("quantize integrates the density exactly over cells") {
  const RareEventsSource s4 = quantize(two_step(), 4);
  const std::vector<double> expected4 = {0.125, 0.125, 0.375, 0.375};
  REQUIRE(s4.probs().size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s4.probs()[i] == Catch::Approx(expected4[i]).margin(1e-15));
  }

  const RareEventsSource u7 = quantize(PiecewiseDensity::uniform(), 7);
  for (double p : u7.probs()) CHECK(p == Catch::Approx(1.0 / 7.0).margin(1e-15));

  // Cell 2 of 3 straddles the jump at w = 0.5.
  const RareEventsSource s3 = quantize(two_step(), 3);
  CHECK(s3.probs()[0] == Catch::Approx(1.0 / 6.0).margin(1e-15));
  CHECK(s3.probs()[1] == Catch::Approx(1.0 / 3.0).margin(1e-15));
  CHECK(s3.probs()[2] == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("quantize rejects an empty alphabet") {
  CHECK_THROWS_AS(quantize(PiecewiseDensity::uniform(), 10, 0.01),
                  InvalidConfigurationError);
}

TEST_CASE("alpha scales the alphabet size") {
  CHECK(quantize(PiecewiseDensity::uniform(), 10, 0.5).alphabet_size() == 5);
  CHECK(quantize(PiecewiseDensity::uniform(), 10, 2.0).alphabet_size() == 20);
}

TEST_CASE("shadow distribution aggregates equal shadow values") {
  const DiscreteMeasure uniform_shadow =
      shadow_distribution(quantize(PiecewiseDensity::uniform(), 64));
  REQUIRE(uniform_shadow.size() == 1);
  CHECK(uniform_shadow.atoms()[0].location == 1.0);

  const DiscreteMeasure s4 = shadow_distribution(quantize(two_step(), 4));
  REQUIRE(s4.size() == 2);
  CHECK(s4.atoms()[0].location == Catch::Approx(0.5).margin(1e-14));
  CHECK(s4.atoms()[0].weight == Catch::Approx(0.25).margin(1e-14));
  CHECK(s4.atoms()[1].location == Catch::Approx(1.5).margin(1e-14));
  CHECK(s4.atoms()[1].weight == Catch::Approx(0.75).margin(1e-14));

  const DiscreteMeasure s3 = shadow_distribution(quantize(two_step(), 3));
  REQUIRE(s3.size() == 3);
  CHECK(s3.atoms()[0].location == Catch::Approx(0.5).margin(1e-14));
  CHECK(s3.atoms()[0].weight == Catch::Approx(1.0 / 6.0).margin(1e-14));
  CHECK(s3.atoms()[1].location == Catch::Approx(1.0).margin(1e-14));
  CHECK(s3.atoms()[1].weight == Catch::Approx(1.0 / 3.0).margin(1e-14));
  CHECK(s3.atoms()[2].location == Catch::Approx(1.5).margin(1e-14));
  CHECK(s3.atoms()[2].weight == Catch::Approx(0.5).margin(1e-14));
}

TEST_CASE("limit distribution of step densities") {
  const DiscreteMeasure u = limit_distribution(PiecewiseDensity::uniform());
  REQUIRE(u.size() == 1);
  CHECK(u.atoms()[0].location == 1.0);

  const DiscreteMeasure t = limit_distribution(two_step());
  REQUIRE(t.size() == 2);
  CHECK(t.atoms()[0].location == 0.5);
  CHECK(t.atoms()[0].weight == Catch::Approx(0.25).margin(1e-15));
  CHECK(t.atoms()[1].weight == Catch::Approx(0.75).margin(1e-15));

  // Levels aggregate across non-contiguous pieces: 0.8 carries total length
  // 5/6, so mass 0.8 * 5/6 = 2/3, and the 2.0 stretch of length 1/6 the rest.
  const PiecewiseDensity three =
      PiecewiseDensity::step({0.0, 0.25, 0.25 + 1.0 / 6.0, 1.0}, {0.8, 2.0, 0.8});
  const DiscreteMeasure lim = limit_distribution(three);
  REQUIRE(lim.size() == 2);
  CHECK(lim.atoms()[0].location == 0.8);
  CHECK(lim.atoms()[0].weight == Catch::Approx(2.0 / 3.0).margin(1e-12));
  CHECK(lim.atoms()[1].location == 2.0);
  CHECK(lim.atoms()[1].weight == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("limit distribution refuses sloped densities") {
  const PiecewiseDensity sloped({{0.0, 1.0, 1.0, 0.5}});
  CHECK_THROWS_AS(limit_distribution(sloped), UnsupportedDensityError);
}

TEST_CASE("sampling is deterministic and conserves counts") {
  const RareEventsSource single(5, 1.0, {1.0});
  const SampleRecord rec = sample(single, 99);
  REQUIRE(rec.counts.size() == 1);
  CHECK(rec.counts[0] == 5);

  const RareEventsSource src = quantize(two_step(), 1000);
  const SampleRecord a = sample(src, 7);
  const SampleRecord b = sample(src, 7);
  CHECK(a.counts == b.counts);

  long total = 0;
  for (std::uint32_t c : a.counts) total += c;
  CHECK(total == 1000);

  const SampleRecord c = sample(src, 8);
  CHECK(a.counts != c.counts);
}

TEST_CASE("uniform source sample stays within a sane per-symbol band") {
  const long n = 100000;
  const RareEventsSource src = quantize(PiecewiseDensity::uniform(), n);
  const SampleRecord rec = sample(src, 123);
  long total = 0;
  std::uint32_t max_count = 0;
  for (std::uint32_t c : rec.counts) {
    total += c;
    max_count = std::max(max_count, c);
  }
  CHECK(total == n);  // empirical mean count is exactly one
  CHECK(max_count <= 10);
}

TEST_CASE("aligned quantization is lossless") {
  const DiscreteMeasure limit = limit_distribution(two_step());
  for (long n : {4L, 8L, 16L, 64L}) {
    CHECK(wasserstein(shadow_distribution(quantize(two_step(), n)), limit) == 0.0);
  }
  for (long n : {12L, 20L, 1000L}) {
    CHECK(wasserstein(shadow_distribution(quantize(two_step(), n)), limit) <= 1e-14);
  }
}

TEST_CASE("shadow atoms stay inside the density bounds") {
  for (long n : {4L, 10L, 64L, 1001L}) {
    const RareEventsSource src = quantize(two_step(), n);
    const DiscreteMeasure shadow = shadow_distribution(src);
    CHECK(shadow.support_lo() >= 0.5 * (1.0 - 1e-9));
    CHECK(shadow.support_hi() <= 1.5 * (1.0 + 1e-9));
  }
  // With alpha != 1 the bounds rescale by n / floor(alpha n).
  const RareEventsSource half = quantize(two_step(), 10, 0.5);
  const DiscreteMeasure shadow = shadow_distribution(half);
  CHECK(shadow.support_lo() >= 2.0 * 0.5 * (1.0 - 1e-9));
  CHECK(shadow.support_hi() <= 2.0 * 1.5 * (1.0 + 1e-9));
}

TEST_CASE("quantization error obeys the jump-count bound for every n") {
  const PiecewiseDensity g = misaligned_step();
  const DiscreteMeasure limit = limit_distribution(g);
  const double bound_scale =
      static_cast<double>(g.discontinuity_count() + 1) * (g.c_hi() - g.c_lo());
  for (long n : {10L, 100L, 1000L, 10000L}) {
    const double dw = wasserstein(shadow_distribution(quantize(g, n)), limit);
    CHECK(dw <= bound_scale / static_cast<double>(n));
  }
}
