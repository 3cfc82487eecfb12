#pragma once

#include <vector>

#include <rareloom/measures.hpp>
#include <rareloom/rng.hpp>

namespace test_util {

inline double uniform_in(rareloom::Xoshiro256StarStar& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.next_double();
}

inline rareloom::DiscreteMeasure random_measure(rareloom::Xoshiro256StarStar& rng,
                                                int max_atoms = 5, double loc_lo = 0.05,
                                                double loc_hi = 10.0) {
  const int count = 1 + static_cast<int>(rng.next_u64() % static_cast<unsigned>(max_atoms));
  std::vector<double> raw(static_cast<std::size_t>(count));
  double total = 0.0;
  for (double& w : raw) {
    w = 0.05 + rng.next_double();
    total += w;
  }
  std::vector<rareloom::Atom> atoms;
  atoms.reserve(raw.size());
  for (double w : raw) {
    atoms.push_back({uniform_in(rng, loc_lo, loc_hi), w / total});
  }
  return rareloom::DiscreteMeasure(std::move(atoms));
}

}  // namespace test_util
