#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rareloom/errors.hpp"
#include "rareloom/measures.hpp"
#include "rareloom/rng.hpp"

namespace rareloom {

/// One affine piece of a density on [0,1): value(w) = slope*w + intercept
/// on [lo, hi).
struct DensityPiece {
  double lo;
  double hi;
  double slope;
  double intercept;

  double value(double w) const { return slope * w + intercept; }
  double integral() const {
    return 0.5 * slope * (hi * hi - lo * lo) + intercept * (hi - lo);
  }
};

/// Piecewise-affine density g on [0,1], bounded away from zero. Affine
/// pieces keep every cell integral closed-form; step densities additionally
/// admit an exact limiting law.
class PiecewiseDensity {
 public:
  explicit PiecewiseDensity(std::vector<DensityPiece> pieces)
      : pieces_(std::move(pieces)) {
    if (pieces_.empty()) {
      throw std::invalid_argument("PiecewiseDensity: no pieces");
    }
    std::sort(pieces_.begin(), pieces_.end(),
              [](const DensityPiece& a, const DensityPiece& b) { return a.lo < b.lo; });
    constexpr double tol = 1e-12;
    if (std::abs(pieces_.front().lo) > tol || std::abs(pieces_.back().hi - 1.0) > tol) {
      throw std::invalid_argument("PiecewiseDensity: pieces must cover [0,1]");
    }
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      if (pieces_[i].hi <= pieces_[i].lo) {
        throw std::invalid_argument("PiecewiseDensity: empty piece");
      }
      if (i > 0 && std::abs(pieces_[i].lo - pieces_[i - 1].hi) > tol) {
        throw std::invalid_argument("PiecewiseDensity: gap or overlap between pieces");
      }
    }
    // Snap boundaries so neighboring pieces share them exactly.
    pieces_.front().lo = 0.0;
    pieces_.back().hi = 1.0;
    for (std::size_t i = 1; i < pieces_.size(); ++i) {
      pieces_[i].lo = pieces_[i - 1].hi;
    }

    c_lo_ = std::numeric_limits<double>::infinity();
    c_hi_ = 0.0;
    double total = 0.0;
    for (const DensityPiece& p : pieces_) {
      const double va = p.value(p.lo);
      const double vb = p.value(p.hi);
      c_lo_ = std::min({c_lo_, va, vb});
      c_hi_ = std::max({c_hi_, va, vb});
      total += p.integral();
    }
    if (c_lo_ <= 0.0) {
      throw std::invalid_argument("PiecewiseDensity: density must be bounded away from 0");
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("PiecewiseDensity: density must integrate to 1");
    }
  }

  /// Step density from (breakpoint, level) runs: level_i on [break_i, break_{i+1}).
  static PiecewiseDensity step(const std::vector<double>& breaks,
                               const std::vector<double>& levels) {
    if (breaks.size() != levels.size() + 1) {
      throw std::invalid_argument("PiecewiseDensity::step: need one more break than level");
    }
    std::vector<DensityPiece> pieces;
    pieces.reserve(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
      pieces.push_back({breaks[i], breaks[i + 1], 0.0, levels[i]});
    }
    return PiecewiseDensity(std::move(pieces));
  }

  static PiecewiseDensity uniform() { return step({0.0, 1.0}, {1.0}); }

  const std::vector<DensityPiece>& pieces() const { return pieces_; }
  double c_lo() const { return c_lo_; }
  double c_hi() const { return c_hi_; }

  bool is_step() const {
    return std::all_of(pieces_.begin(), pieces_.end(),
                       [](const DensityPiece& p) { return p.slope == 0.0; });
  }

  /// Number of interior jump discontinuities.
  int discontinuity_count() const {
    int jumps = 0;
    for (std::size_t i = 1; i < pieces_.size(); ++i) {
      if (pieces_[i - 1].value(pieces_[i - 1].hi) != pieces_[i].value(pieces_[i].lo)) {
        ++jumps;
      }
    }
    return jumps;
  }

  /// Exact integral of g over [a, b], split at piece boundaries.
  double integral(double a, double b) const {
    double total = 0.0;
    for (const DensityPiece& p : pieces_) {
      const double lo = std::max(a, p.lo);
      const double hi = std::min(b, p.hi);
      if (hi > lo) {
        total += 0.5 * p.slope * (hi * hi - lo * lo) + p.intercept * (hi - lo);
      }
    }
    return total;
  }

 private:
  std::vector<DensityPiece> pieces_;
  double c_lo_ = 0.0;
  double c_hi_ = 0.0;
};

/// A concrete (alphabet, pmf) pair at scale n: floor(alpha*n) symbols whose
/// probabilities sum to 1, each of order 1/n.
class RareEventsSource {
 public:
  RareEventsSource(long n, double alpha, std::vector<double> probs)
      : n_(n), alpha_(alpha), probs_(std::move(probs)) {
    if (n_ < 1 || probs_.empty()) {
      throw InvalidConfigurationError("RareEventsSource: need n >= 1 and symbols");
    }
    for (double p : probs_) {
      if (!(p > 0.0)) {
        throw std::invalid_argument("RareEventsSource: probabilities must be positive");
      }
    }
    if (std::abs(compensated_sum(probs_) - 1.0) > 1e-12) {
      throw std::invalid_argument("RareEventsSource: probabilities must sum to 1");
    }
    cumulative_.resize(probs_.size());
    double run = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      double v = probs_[i];
      double t = run + v;
      comp += (std::abs(run) >= std::abs(v)) ? (run - t) + v : (v - t) + run;
      run = t;
      cumulative_[i] = run + comp;
    }
    cumulative_.back() = 1.0;
  }

  long n() const { return n_; }
  double alpha() const { return alpha_; }
  std::size_t alphabet_size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& cumulative() const { return cumulative_; }

 private:
  long n_;
  double alpha_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

/// i.i.d. sample in sufficient-statistic form: per-symbol occurrence counts.
struct SampleRecord {
  std::vector<std::uint32_t> counts;  // dense, one slot per symbol
  long n = 0;
  std::uint64_t seed = 0;
};

/// Build the scale-n source from g: p_n(a) is the exact integral of g over
/// the a-th of floor(alpha*n) equal cells.
inline RareEventsSource quantize(const PiecewiseDensity& g, long n, double alpha = 1.0) {
  if (n < 1) {
    throw InvalidConfigurationError("quantize: n must be >= 1");
  }
  const long cells = static_cast<long>(std::floor(alpha * static_cast<double>(n)));
  if (cells < 1) {
    throw InvalidConfigurationError("quantize: floor(alpha*n) must be >= 1");
  }
  std::vector<double> probs(static_cast<std::size_t>(cells));
  const double m = static_cast<double>(cells);
  const double inv_m = 1.0 / m;
  for (long a = 0; a < cells; ++a) {
    const double cell_lo = static_cast<double>(a) / m;
    const double cell_hi = static_cast<double>(a + 1) / m;
    double integral = 0.0;
    for (const DensityPiece& p : g.pieces()) {
      if (p.lo <= cell_lo && cell_hi <= p.hi) {
        // Cell fully inside the piece: use the exact cell width so equal
        // cells get bit-identical probabilities.
        integral += inv_m * (0.5 * p.slope * (cell_hi + cell_lo) + p.intercept);
      } else {
        const double lo = std::max(cell_lo, p.lo);
        const double hi = std::min(cell_hi, p.hi);
        if (hi > lo) {
          integral += (hi - lo) * (0.5 * p.slope * (hi + lo) + p.intercept);
        }
      }
    }
    probs[static_cast<std::size_t>(a)] = integral;
  }
  const double total = compensated_sum(probs);
  for (double& p : probs) p /= total;
  return RareEventsSource(n, alpha, std::move(probs));
}

/// Law of the shadow variable n*p_n(X), X ~ p_n: an atom at n*p_n(a) with
/// weight p_n(a). Near-equal shadow values aggregate via the measure's
/// merge rule.
inline DiscreteMeasure shadow_distribution(const RareEventsSource& s) {
  std::vector<Atom> atoms;
  atoms.reserve(s.alphabet_size());
  const double n = static_cast<double>(s.n());
  for (double p : s.probs()) {
    atoms.push_back({n * p, p});
  }
  return DiscreteMeasure(std::move(atoms));
}

/// Law of g(W) with W ~ g. Exact only for step densities: each level v
/// carries mass v * (total length at that level).
inline DiscreteMeasure limit_distribution(const PiecewiseDensity& g) {
  if (!g.is_step()) {
    throw UnsupportedDensityError(
        "limit_distribution: exact limiting law requires a step density");
  }
  std::map<double, double> length_at_level;
  for (const DensityPiece& p : g.pieces()) {
    length_at_level[p.intercept] += p.hi - p.lo;
  }
  std::vector<Atom> atoms;
  atoms.reserve(length_at_level.size());
  double total = 0.0;
  for (const auto& [level, length] : length_at_level) {
    atoms.push_back({level, level * length});
    total += level * length;
  }
  for (Atom& a : atoms) a.weight /= total;
  return DiscreteMeasure(std::move(atoms));
}

/// n i.i.d. draws from the source by inverse-CDF lookup on a seeded
/// xoshiro256** stream. Identical (source, seed) gives identical records.
inline SampleRecord sample(const RareEventsSource& s, std::uint64_t seed) {
  SampleRecord rec;
  rec.n = s.n();
  rec.seed = seed;
  rec.counts.assign(s.alphabet_size(), 0);
  Xoshiro256StarStar rng(seed);
  const auto& cum = s.cumulative();
  for (long i = 0; i < s.n(); ++i) {
    const double u = rng.next_double();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cum.begin());
    if (idx >= rec.counts.size()) idx = rec.counts.size() - 1;
    ++rec.counts[idx];
  }
  return rec;
}

}  // namespace rareloom
