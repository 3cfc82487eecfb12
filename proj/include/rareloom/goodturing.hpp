#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rareloom/errors.hpp"
#include "rareloom/measures.hpp"
#include "rareloom/sources.hpp"

namespace rareloom {

/// Occupancy statistics: how many symbols appear exactly k times.
struct OccupancyCounts {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> varphi;  // sorted (k, count), k >= 1
  long n = 0;

  std::uint64_t at(std::uint32_t k) const {
    for (const auto& [kk, c] : varphi) {
      if (kk == k) return c;
    }
    return 0;
  }
};

inline OccupancyCounts occupancy(const SampleRecord& rec) {
  std::uint32_t max_count = 0;
  for (std::uint32_t c : rec.counts) max_count = std::max(max_count, c);
  std::vector<std::uint64_t> tally(static_cast<std::size_t>(max_count) + 1, 0);
  for (std::uint32_t c : rec.counts) ++tally[c];

  OccupancyCounts occ;
  occ.n = rec.n;
  for (std::uint32_t k = 1; k <= max_count; ++k) {
    if (tally[k] > 0) occ.varphi.emplace_back(k, tally[k]);
  }
  return occ;
}

/// The Good-Turing pseudo-empirical measure: mass (k+1)*varphi_{k+1}/n at k.
/// The masses sum to exactly n/n = 1 as rationals, so the floating-point
/// total lands within a few ulp of 1.
inline CountDistribution gt_estimator(const OccupancyCounts& occ) {
  if (occ.n < 1) {
    throw std::invalid_argument("gt_estimator: sample size must be >= 1");
  }
  std::uint32_t top = 0;
  for (const auto& [k, c] : occ.varphi) top = std::max(top, k);
  std::vector<double> masses(top > 0 ? top : 1, 0.0);
  const double n = static_cast<double>(occ.n);
  for (const auto& [k, c] : occ.varphi) {
    masses[k - 1] = static_cast<double>(k) * static_cast<double>(c) / n;
  }
  return CountDistribution(std::move(masses));
}

/// Ground-truth Good-Turing probabilities: gamma_k is the total source
/// probability of the symbols seen exactly k times (k = 0 covers the unseen).
inline CountDistribution true_gamma(const RareEventsSource& s, const SampleRecord& rec) {
  if (rec.counts.size() != s.alphabet_size() || rec.n != s.n()) {
    throw MismatchedSourceError("true_gamma: record does not match source");
  }
  std::uint32_t max_count = 0;
  for (std::uint32_t c : rec.counts) max_count = std::max(max_count, c);
  std::vector<double> gamma(static_cast<std::size_t>(max_count) + 1, 0.0);
  for (std::size_t a = 0; a < rec.counts.size(); ++a) {
    gamma[rec.counts[a]] += s.probs()[a];
  }
  return CountDistribution(std::move(gamma));
}

/// Poisson mixture of the limiting law of g: the common target of both
/// gamma_n and the Good-Turing estimator.
inline CountDistribution mixture_target(const PiecewiseDensity& g, int k_max) {
  return poisson_mixture(limit_distribution(g), k_max).pmf;
}

}  // namespace rareloom
