#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rareloom/errors.hpp"

namespace rareloom {

/// Neumaier-compensated sum; keeps long weight vectors accurate to ~1 ulp.
inline double compensated_sum(const std::vector<double>& values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

struct Atom {
  double location;
  double weight;
};

/// Finitely supported probability measure on the positive reals.
///
/// Atoms are kept sorted by location; locations closer than 1e-12 are
/// merged on construction (weights summed) so floating-point duplicates
/// cannot produce degenerate CDF steps. Zero-weight atoms are dropped.
class DiscreteMeasure {
 public:
  static constexpr double kMergeTolerance = 1e-12;
  static constexpr double kMassTolerance = 1e-12;

  explicit DiscreteMeasure(std::vector<Atom> atoms) {
    if (atoms.empty()) {
      throw std::invalid_argument("DiscreteMeasure: no atoms");
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.location < b.location; });

    // Merge clusters of near-identical locations; representative location is
    // the weighted mean of the cluster.
    atoms_.reserve(atoms.size());
    std::size_t i = 0;
    while (i < atoms.size()) {
      double w = 0.0, wx = 0.0;
      std::size_t j = i;
      while (j < atoms.size() &&
             (j == i || atoms[j].location - atoms[j - 1].location < kMergeTolerance)) {
        if (atoms[j].weight < 0.0) {
          throw std::invalid_argument("DiscreteMeasure: negative weight");
        }
        w += atoms[j].weight;
        wx += atoms[j].weight * atoms[j].location;
        ++j;
      }
      if (w > 0.0) {
        atoms_.push_back({wx / w, w});
      }
      i = j;
    }
    if (atoms_.empty()) {
      throw std::invalid_argument("DiscreteMeasure: all weights zero");
    }
    if (atoms_.front().location <= 0.0) {
      throw std::invalid_argument("DiscreteMeasure: locations must be positive");
    }

    std::vector<double> ws;
    ws.reserve(atoms_.size());
    for (const Atom& a : atoms_) ws.push_back(a.weight);
    const double total = compensated_sum(ws);
    if (std::abs(total - 1.0) > kMassTolerance) {
      throw std::invalid_argument("DiscreteMeasure: weights must sum to 1");
    }

    cdf_.resize(atoms_.size());
    double run = 0.0, comp = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      double v = atoms_[k].weight;
      double t = run + v;
      comp += (std::abs(run) >= std::abs(v)) ? (run - t) + v : (v - t) + run;
      run = t;
      cdf_[k] = run + comp;
    }
    cdf_.back() = std::min(cdf_.back(), 1.0);
  }

  static DiscreteMeasure delta(double location) {
    return DiscreteMeasure({{location, 1.0}});
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double support_lo() const { return atoms_.front().location; }
  double support_hi() const { return atoms_.back().location; }

  /// Right-continuous CDF.
  double cdf(double x) const {
    // first atom strictly above x
    std::size_t lo = 0, hi = atoms_.size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (atoms_[mid].location <= x) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo == 0 ? 0.0 : cdf_[lo - 1];
  }

  double mean() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.weight * a.location;
    return m;
  }

 private:
  std::vector<Atom> atoms_;
  std::vector<double> cdf_;
};

/// Convex combination alpha*p + (1-alpha)*q.
inline DiscreteMeasure mix(const DiscreteMeasure& p, const DiscreteMeasure& q,
                           double alpha) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("mix: alpha outside [0,1]");
  }
  std::vector<Atom> atoms;
  atoms.reserve(p.size() + q.size());
  for (const Atom& a : p.atoms()) atoms.push_back({a.location, alpha * a.weight});
  for (const Atom& a : q.atoms()) atoms.push_back({a.location, (1.0 - alpha) * a.weight});
  return DiscreteMeasure(std::move(atoms));
}

/// PMF on {0,1,...} with finite stored support, dense from k = 0.
///
/// Total mass may fall short of 1 (a truncated mixture carries its tail as
/// a separate signal) but can never exceed 1 + 1e-9.
class CountDistribution {
 public:
  static constexpr double kMassTolerance = 1e-9;

  explicit CountDistribution(std::vector<double> masses) : masses_(std::move(masses)) {
    if (masses_.empty()) {
      throw std::invalid_argument("CountDistribution: empty pmf");
    }
    for (double m : masses_) {
      if (!(m >= 0.0)) {
        throw std::invalid_argument("CountDistribution: negative or NaN mass");
      }
    }
    while (masses_.size() > 1 && masses_.back() == 0.0) masses_.pop_back();
    total_ = compensated_sum(masses_);
    if (total_ <= 0.0 || total_ > 1.0 + kMassTolerance) {
      throw std::invalid_argument("CountDistribution: total mass outside (0, 1]");
    }
    cdf_.resize(masses_.size());
    double run = 0.0, comp = 0.0;
    for (std::size_t k = 0; k < masses_.size(); ++k) {
      double v = masses_[k];
      double t = run + v;
      comp += (std::abs(run) >= std::abs(v)) ? (run - t) + v : (v - t) + run;
      run = t;
      cdf_[k] = std::min(run + comp, 1.0);
    }
  }

  static CountDistribution delta(int k) {
    std::vector<double> m(static_cast<std::size_t>(k) + 1, 0.0);
    m.back() = 1.0;
    return CountDistribution(std::move(m));
  }

  const std::vector<double>& masses() const { return masses_; }
  int k_max() const { return static_cast<int>(masses_.size()) - 1; }
  double total_mass() const { return total_; }

  double pmf(int k) const {
    if (k < 0 || k >= static_cast<int>(masses_.size())) return 0.0;
    return masses_[static_cast<std::size_t>(k)];
  }

  double cdf(int k) const {
    if (k < 0) return 0.0;
    if (k >= static_cast<int>(cdf_.size())) return cdf_.back();
    return cdf_[static_cast<std::size_t>(k)];
  }

 private:
  std::vector<double> masses_;
  std::vector<double> cdf_;
  double total_ = 0.0;
};

/// L1 distance between the CDFs, integrated exactly over the merged atom
/// grid. Both CDFs are step functions, so no quadrature is involved.
inline double wasserstein(const DiscreteMeasure& p, const DiscreteMeasure& q) {
  const auto& pa = p.atoms();
  const auto& qa = q.atoms();
  std::vector<double> grid;
  grid.reserve(pa.size() + qa.size());
  for (const Atom& a : pa) grid.push_back(a.location);
  for (const Atom& a : qa) grid.push_back(a.location);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  double dist = 0.0;
  double fp = 0.0, fq = 0.0;
  std::size_t ip = 0, iq = 0;
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    const double x = grid[g];
    while (ip < pa.size() && pa[ip].location <= x) fp += pa[ip++].weight;
    while (iq < qa.size() && qa[iq].location <= x) fq += qa[iq++].weight;
    dist += std::abs(fp - fq) * (grid[g + 1] - x);
  }
  return dist;
}

/// sup_k |F(k;p) - F(k;q)| over the union of stored supports.
inline double ks_distance(const CountDistribution& p, const CountDistribution& q) {
  const int top = std::max(p.k_max(), q.k_max());
  double best = 0.0;
  double fp = 0.0, fq = 0.0;
  for (int k = 0; k <= top; ++k) {
    fp += p.pmf(k);
    fq += q.pmf(k);
    best = std::max(best, std::abs(fp - fq));
  }
  return best;
}

/// sum_k |p_k - q_k| over the union of stored supports.
inline double l1_distance(const CountDistribution& p, const CountDistribution& q) {
  const int top = std::max(p.k_max(), q.k_max());
  double total = 0.0;
  for (int k = 0; k <= top; ++k) {
    total += std::abs(p.pmf(k) - q.pmf(k));
  }
  return total;
}

/// log Poisson pmf, overflow-free up to k ~ 1e6.
inline double log_poisson_pmf(int k, double rate) {
  if (k < 0) return -std::numeric_limits<double>::infinity();
  if (rate <= 0.0) {
    throw std::invalid_argument("log_poisson_pmf: rate must be positive");
  }
  return static_cast<double>(k) * std::log(rate) - rate -
         std::lgamma(static_cast<double>(k) + 1.0);
}

inline double poisson_pmf(int k, double rate) {
  return std::exp(log_poisson_pmf(k, rate));
}

struct PoissonMixture {
  CountDistribution pmf;
  double tail_mass;  // 1 - sum of the stored masses; the caller's truncation signal
};

/// Poisson mixture of q truncated at k_max. Each component pmf is evaluated
/// in log space; a too-small k_max is not an error, the tail mass says so.
inline PoissonMixture poisson_mixture(const DiscreteMeasure& q, int k_max) {
  if (k_max < 0) {
    throw std::invalid_argument("poisson_mixture: k_max must be >= 0");
  }
  std::vector<double> masses(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (const Atom& a : q.atoms()) {
    for (int k = 0; k <= k_max; ++k) {
      masses[static_cast<std::size_t>(k)] += a.weight * poisson_pmf(k, a.location);
    }
  }
  const double total = compensated_sum(masses);
  const double tail = std::max(0.0, 1.0 - total);
  return {CountDistribution(std::move(masses)), tail};
}

/// Smallest k whose Poisson(top_atom) tail drops below 1e-10, capped at
/// 10*top_atom + 50. A mixture's tail is bounded by its top atom's tail, so
/// this k_max keeps any truncated mixture within CountDistribution tolerance.
inline int suggest_k_max(double top_atom) {
  if (top_atom <= 0.0) {
    throw std::invalid_argument("suggest_k_max: top atom must be positive");
  }
  const int cap = static_cast<int>(std::ceil(10.0 * top_atom + 50.0));
  double cum = 0.0;
  for (int k = 0; k <= cap; ++k) {
    cum += poisson_pmf(k, top_atom);
    if (1.0 - cum < 1e-10) return k;
  }
  return cap;
}

}  // namespace rareloom
