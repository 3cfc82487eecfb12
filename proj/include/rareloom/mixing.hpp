#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rareloom/errors.hpp"
#include "rareloom/measures.hpp"

namespace rareloom {

struct NpmleConfig {
  double grid_lo = 0.0;  // 0 = derive from the data (see resolve_grid)
  double grid_hi = 0.0;
  int grid_points = 400;
  int max_iters = 100000;   // multiplicative updates crawl near the optimum
  double dd_tol = 1e-6;     // directional-derivative stopping threshold
  double weight_floor = 1e-8;
};

struct MinDistConfig {
  int m = 1;               // atom budget
  double epsilon = 1e-3;   // precision margin over the searched infimum
  double search_lo = 0.0;  // 0 = derive from the data
  double search_hi = 0.0;
  int coarse_grid = 25;
  int refine_rounds = 2;
  long max_tuples = 200000;  // budget on coarse location m-tuples
};

struct FitDiagnostics {
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double max_directional_derivative = std::numeric_limits<double>::quiet_NaN();
};

struct MixingFit {
  DiscreteMeasure measure;
  FitDiagnostics diagnostics;
};

namespace detail {

struct DataSupport {
  int k_lo = 0;  // smallest k with positive mass
  int k_hi = 0;  // largest k with positive mass
};

inline DataSupport data_support(const CountDistribution& phi) {
  DataSupport s;
  s.k_lo = -1;
  for (int k = 0; k <= phi.k_max(); ++k) {
    if (phi.pmf(k) > 0.0) {
      if (s.k_lo < 0) s.k_lo = k;
      s.k_hi = k;
    }
  }
  if (s.k_lo < 0) {
    throw std::invalid_argument("mixing: pmf has no positive mass");
  }
  return s;
}

/// Default location range [k_lo/2 v 0.01, 2*k_hi], clipped to [0.01, 100]:
/// a Poisson of rate x concentrates near k = x, so the observed counts pin
/// where mixing atoms can live.
inline std::pair<double, double> default_range(const DataSupport& s) {
  double lo = std::max(0.01, static_cast<double>(s.k_lo) / 2.0);
  double hi = std::min(100.0, std::max(1.0, 2.0 * static_cast<double>(s.k_hi)));
  if (lo >= hi) lo = std::max(0.01, hi / 2.0);
  return {lo, hi};
}

/// Poisson CDF column h(k; x) for k = 0..k_top.
inline std::vector<double> poisson_cdf_column(double x, int k_top) {
  std::vector<double> col(static_cast<std::size_t>(k_top) + 1);
  double run = 0.0;
  for (int k = 0; k <= k_top; ++k) {
    run += poisson_pmf(k, x);
    col[static_cast<std::size_t>(k)] = std::min(run, 1.0);
  }
  return col;
}

/// Best simplex weights for fixed columns: minimize the sup-norm between
/// the weighted column mix and the target CDF. The |1 - T| floor accounts
/// for all k beyond the last tabulated row (both CDFs are monotone there,
/// so the tail sup is attained at the endpoints).
///
/// Solved by direct convex minimization rather than an LP tableau: the
/// constraint rows are near-collinear wherever the CDF columns saturate,
/// which is poison for a dense simplex. Along any mass transfer between
/// two coordinates the objective is convex piecewise-linear, so
/// golden-section is certified there; one coordinate pair covers m <= 2
/// exactly, and larger m runs cyclic pairwise transfers seeded from the
/// best single vertex (so more atoms can never fit worse).
inline std::pair<std::vector<double>, double> chebyshev_weights(
    const std::vector<const std::vector<double>*>& columns,
    const std::vector<double>& target_cdf, double target_total) {
  const std::size_t m = columns.size();
  const std::size_t rows = target_cdf.size();
  const double tail_floor = std::abs(1.0 - target_total);

  auto objective_at = [&](const std::vector<double>& w) {
    double worst = tail_floor;
    for (std::size_t k = 0; k < rows; ++k) {
      double mixed = 0.0;
      for (std::size_t j = 0; j < m; ++j) mixed += w[j] * (*columns[j])[k];
      worst = std::max(worst, std::abs(mixed - target_cdf[k]));
    }
    return worst;
  };

  if (m == 1) {
    std::vector<double> w{1.0};
    const double obj = objective_at(w);
    return {std::move(w), obj};
  }

  // Golden-section the split w[i] in [0, w[i]+w[j]] with everything else
  // fixed; returns the improved objective and updates w in place.
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  auto optimize_pair = [&](std::vector<double>& w, std::size_t i, std::size_t j,
                           double current) {
    const double s = w[i] + w[j];
    if (s <= 0.0) return current;
    std::vector<double> probe = w;
    auto value_at = [&](double wi) {
      probe[i] = wi;
      probe[j] = s - wi;
      return objective_at(probe);
    };
    double a = 0.0, b = s;
    double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
    double f1 = value_at(x1), f2 = value_at(x2);
    double best_x = w[i], best_f = current;
    auto consider = [&](double x, double f) {
      if (f < best_f) {
        best_f = f;
        best_x = x;
      }
    };
    consider(x1, f1);
    consider(x2, f2);
    consider(0.0, value_at(0.0));
    consider(s, value_at(s));
    for (int it = 0; it < 72; ++it) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - golden * (b - a);
        f1 = value_at(x1);
        consider(x1, f1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + golden * (b - a);
        f2 = value_at(x2);
        consider(x2, f2);
      }
    }
    w[i] = best_x;
    w[j] = s - best_x;
    return best_f;
  };

  // Seed at the best single vertex.
  std::vector<double> w(m, 0.0);
  std::size_t seed = 0;
  double best_vertex = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> vertex(m, 0.0);
    vertex[j] = 1.0;
    const double f = objective_at(vertex);
    if (f < best_vertex) {
      best_vertex = f;
      seed = j;
    }
  }
  w[seed] = 1.0;
  double current = best_vertex;

  if (m == 2) {
    current = optimize_pair(w, 0, 1, current);
    return {std::move(w), current};
  }

  // Larger budgets start from the best two-coordinate solution, so a fit
  // with more atoms can never lose to one restricted to any pair.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      std::vector<double> pair_w(m, 0.0);
      pair_w[i] = 1.0;
      double f = objective_at(pair_w);
      f = optimize_pair(pair_w, i, j, f);
      if (f < current) {
        current = f;
        w = std::move(pair_w);
      }
    }
  }

  for (int sweep = 0; sweep < 60; ++sweep) {
    const double before = current;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        current = optimize_pair(w, i, j, current);
      }
    }
    if (before - current < 1e-13) break;
  }
  return {std::move(w), current};
}

}  // namespace detail

/// Best simplex weights on fixed atom locations: minimizes
/// sup_{k<=k_max} |sum_j w_j h(k;x_j) - F(k;phi)| over the weight simplex.
inline std::pair<std::vector<double>, double> fit_weights_chebyshev(
    const std::vector<double>& locations, const CountDistribution& phi, int k_max) {
  if (locations.empty()) {
    throw std::invalid_argument("fit_weights_chebyshev: no locations");
  }
  if (k_max < 0) {
    throw std::invalid_argument("fit_weights_chebyshev: k_max must be >= 0");
  }
  for (std::size_t i = 0; i < locations.size(); ++i) {
    if (!(locations[i] > 0.0)) {
      throw std::invalid_argument("fit_weights_chebyshev: locations must be positive");
    }
    for (std::size_t j = i + 1; j < locations.size(); ++j) {
      if (locations[i] == locations[j]) {
        throw std::invalid_argument("fit_weights_chebyshev: locations must be distinct");
      }
    }
  }
  std::vector<std::vector<double>> cols;
  cols.reserve(locations.size());
  for (double x : locations) cols.push_back(detail::poisson_cdf_column(x, k_max));
  std::vector<const std::vector<double>*> col_ptrs;
  for (const auto& c : cols) col_ptrs.push_back(&c);

  std::vector<double> target(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) target[static_cast<std::size_t>(k)] = phi.cdf(k);
  // Over k = 0..k_max only, so the tail row is pinned by the last entry.
  auto [w, lp_obj] =
      detail::chebyshev_weights(col_ptrs, target, target.back());
  (void)lp_obj;
  // Report the sup-norm of the returned weights exactly, over every row.
  double objective = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    double mixed = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      mixed += w[j] * cols[j][static_cast<std::size_t>(k)];
    }
    objective = std::max(objective, std::abs(mixed - target[static_cast<std::size_t>(k)]));
  }
  return {std::move(w), objective};
}

/// Nonparametric pseudo-maximum-likelihood recovery of the mixing measure:
/// fixed-grid EM with multiplicative weight updates and a directional-
/// derivative optimality certificate for the grid-restricted problem.
///
/// An optional trace collects the pseudo-log-likelihood per iteration
/// (ascent is asserted by tests, not assumed).
inline MixingFit npmle(const CountDistribution& phi, const NpmleConfig& cfg = {},
                       std::vector<double>* objective_trace = nullptr) {
  if (cfg.grid_points < 2) {
    throw InvalidConfigurationError("npmle: grid_points must be >= 2");
  }
  if (!(cfg.dd_tol > 0.0)) {
    throw InvalidConfigurationError("npmle: dd_tol must be positive");
  }
  if (cfg.max_iters < 0) {
    throw InvalidConfigurationError("npmle: max_iters must be >= 0");
  }
  const detail::DataSupport sup = detail::data_support(phi);
  if (sup.k_hi == 0) {
    throw DegenerateInputError(
        "npmle: all mass on k = 0; the likelihood has no interior optimum");
  }

  double lo = cfg.grid_lo, hi = cfg.grid_hi;
  if (lo == 0.0 && hi == 0.0) {
    std::tie(lo, hi) = detail::default_range(sup);
  }
  if (!(lo > 0.0) || !(lo < hi)) {
    throw InvalidConfigurationError("npmle: need 0 < grid_lo < grid_hi");
  }

  const std::size_t grid_n = static_cast<std::size_t>(cfg.grid_points);
  std::vector<double> grid(grid_n);
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  for (std::size_t j = 0; j < grid_n; ++j) {
    grid[j] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(j) /
                                    static_cast<double>(grid_n - 1));
  }

  // Only counts with positive pseudo-mass enter the likelihood.
  std::vector<int> ks;
  std::vector<double> weight;
  for (int k = 0; k <= phi.k_max(); ++k) {
    if (phi.pmf(k) > 0.0) {
      ks.push_back(k);
      weight.push_back(phi.pmf(k));
    }
  }
  const std::size_t nk = ks.size();

  std::vector<std::vector<double>> f(grid_n, std::vector<double>(nk));
  for (std::size_t j = 0; j < grid_n; ++j) {
    for (std::size_t i = 0; i < nk; ++i) {
      f[j][i] = poisson_pmf(ks[i], grid[j]);
    }
  }

  std::vector<double> w(grid_n, 1.0 / static_cast<double>(grid_n));
  std::vector<double> fitted(nk);
  std::vector<double> ratio(grid_n);
  std::size_t active = grid_n;  // grid points with non-negligible weight live in [0, active)
  FitDiagnostics diag;
  for (int iter = 0;; ++iter) {
    for (std::size_t i = 0; i < nk; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < active; ++j) v += w[j] * f[j][i];
      fitted[i] = v;
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < nk; ++i) {
      if (!(fitted[i] > 0.0)) {
        throw NumericFailureError("npmle: fitted mixture mass underflowed to zero");
      }
      obj += weight[i] * std::log(fitted[i]);
    }
    if (!std::isfinite(obj)) {
      throw NumericFailureError("npmle: non-finite pseudo-log-likelihood");
    }
    if (objective_trace) objective_trace->push_back(obj);

    double dd_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < active; ++j) {
      double r = 0.0;
      for (std::size_t i = 0; i < nk; ++i) r += weight[i] * f[j][i] / fitted[i];
      ratio[j] = r;
      dd_max = std::max(dd_max, r - 1.0);
    }

    diag.objective = obj;
    diag.iterations = iter;
    diag.max_directional_derivative = dd_max;
    if (dd_max <= cfg.dd_tol) {
      diag.converged = true;
      break;
    }
    if (iter >= cfg.max_iters) {
      diag.converged = false;
      break;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < active; ++j) {
      w[j] *= ratio[j];
      total += w[j];
    }
    for (std::size_t j = 0; j < active; ++j) w[j] /= total;

    // The multiplicative update never revives a vanished weight, so points
    // at noise level can be retired; this only trims dead arithmetic.
    if (iter % 64 == 63) {
      std::size_t keep = 0;
      for (std::size_t j = 0; j < active; ++j) {
        if (w[j] > 1e-16) {
          if (keep != j) {
            w[keep] = w[j];
            grid[keep] = grid[j];
            f[keep].swap(f[j]);
          }
          ++keep;
        }
      }
      active = std::max<std::size_t>(keep, 1);
    }
  }

  std::vector<Atom> atoms;
  for (std::size_t j = 0; j < active; ++j) {
    if (w[j] >= cfg.weight_floor) atoms.push_back({grid[j], w[j]});
  }
  if (atoms.empty()) {
    throw NumericFailureError("npmle: every grid weight fell below the floor");
  }
  double kept = 0.0;
  for (const Atom& a : atoms) kept += a.weight;
  for (Atom& a : atoms) a.weight /= kept;

  DiscreteMeasure measure{std::move(atoms)};
  // Report the likelihood of what is actually returned, post-pruning.
  double final_obj = 0.0;
  for (std::size_t i = 0; i < nk; ++i) {
    double v = 0.0;
    for (const Atom& a : measure.atoms()) v += a.weight * poisson_pmf(ks[i], a.location);
    final_obj += weight[i] * std::log(v);
  }
  diag.objective = final_obj;
  return {std::move(measure), diag};
}

/// Minimum-distance recovery: exhaustive coarse search over location
/// m-tuples, a Chebyshev weight fit per tuple, then golden-section
/// refinement of each location. The config epsilon is the licensed margin
/// over the searched infimum; the search itself never returns a candidate
/// worse than the best coarse tuple.
inline MixingFit min_distance(const CountDistribution& phi, const MinDistConfig& cfg = {}) {
  if (cfg.m < 1) {
    throw InvalidConfigurationError("min_distance: atom budget m must be >= 1");
  }
  if (!(cfg.epsilon > 0.0)) {
    throw InvalidConfigurationError("min_distance: epsilon must be positive");
  }
  if (cfg.coarse_grid < 2) {
    throw InvalidConfigurationError("min_distance: coarse_grid must be >= 2");
  }
  if (cfg.refine_rounds < 0) {
    throw InvalidConfigurationError("min_distance: refine_rounds must be >= 0");
  }
  const detail::DataSupport sup = detail::data_support(phi);
  double lo = cfg.search_lo, hi = cfg.search_hi;
  if (lo == 0.0 && hi == 0.0) {
    std::tie(lo, hi) = detail::default_range(sup);
  }
  if (!(lo > 0.0) || !(lo < hi)) {
    throw InvalidConfigurationError("min_distance: need 0 < search_lo < search_hi");
  }

  // Tuple budget: C(coarse_grid, m) candidate supports.
  {
    double count = 1.0;
    for (int i = 0; i < cfg.m; ++i) {
      count *= static_cast<double>(cfg.coarse_grid - i) / static_cast<double>(i + 1);
      if (count > static_cast<double>(cfg.max_tuples)) {
        throw BudgetExceededError(
            "min_distance: coarse grid tuple count exceeds max_tuples");
      }
    }
  }
  const int m_atoms = std::min(cfg.m, cfg.coarse_grid);

  // Objective range: every k the data or any candidate mixture can reach.
  const int k_obj =
      std::max(sup.k_hi, suggest_k_max(std::max(static_cast<double>(sup.k_hi), hi)));
  // LP rows beyond the data's top count are dominated by the top-count row
  // and the asymptotic row, so the inner solve stops at k_hi.
  const int k_fit = sup.k_hi;
  std::vector<double> target(static_cast<std::size_t>(k_fit) + 1);
  for (int k = 0; k <= k_fit; ++k) target[static_cast<std::size_t>(k)] = phi.cdf(k);
  const double target_total = phi.total_mass();

  std::vector<double> coarse(static_cast<std::size_t>(cfg.coarse_grid));
  for (int i = 0; i < cfg.coarse_grid; ++i) {
    coarse[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.coarse_grid - 1);
  }
  std::vector<std::vector<double>> coarse_cols(coarse.size());
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    coarse_cols[i] = detail::poisson_cdf_column(coarse[i], k_fit);
  }

  int lp_solves = 0;
  auto evaluate = [&](const std::vector<const std::vector<double>*>& cols) {
    ++lp_solves;
    return detail::chebyshev_weights(cols, target, target_total);
  };

  // Exhaustive coarse pass, lexicographic order; strict improvement keeps
  // the lexicographically smallest tuple among ties.
  std::vector<int> combo(static_cast<std::size_t>(m_atoms));
  for (int i = 0; i < m_atoms; ++i) combo[static_cast<std::size_t>(i)] = i;
  std::vector<double> best_locs;
  std::vector<double> best_w;
  double best_obj = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<const std::vector<double>*> cols;
    cols.reserve(combo.size());
    for (int idx : combo) cols.push_back(&coarse_cols[static_cast<std::size_t>(idx)]);
    auto [w, obj] = evaluate(cols);
    if (obj < best_obj) {
      best_obj = obj;
      best_w = std::move(w);
      best_locs.clear();
      for (int idx : combo) best_locs.push_back(coarse[static_cast<std::size_t>(idx)]);
    }
    // next combination
    int pos = m_atoms - 1;
    while (pos >= 0 &&
           combo[static_cast<std::size_t>(pos)] == cfg.coarse_grid - m_atoms + pos) {
      --pos;
    }
    if (pos < 0) break;
    ++combo[static_cast<std::size_t>(pos)];
    for (int q = pos + 1; q < m_atoms; ++q) {
      combo[static_cast<std::size_t>(q)] = combo[static_cast<std::size_t>(q - 1)] + 1;
    }
  }

  // Local refinement around the winning tuple. Per-coordinate line search
  // alone stalls in curved valleys, so each round first sweeps a joint
  // local grid (all locations moved at once), then polishes coordinates by
  // golden section, then shrinks the radius.
  const double spacing = (hi - lo) / static_cast<double>(cfg.coarse_grid - 1);
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  const std::size_t n_locs = best_locs.size();

  auto obj_for_locs = [&](const std::vector<double>& locs) {
    std::vector<std::vector<double>> cols(locs.size());
    std::vector<const std::vector<double>*> ptrs(locs.size());
    for (std::size_t q = 0; q < locs.size(); ++q) {
      cols[q] = detail::poisson_cdf_column(locs[q], k_fit);
      ptrs[q] = &cols[q];
    }
    return evaluate(ptrs);
  };

  double radius = spacing;
  for (int round = 0; round < cfg.refine_rounds; ++round) {
    // Joint pass: 7 offsets per location while the tuple budget allows it,
    // else 3, else coordinate polish only.
    std::size_t offsets_per_loc = 7;
    double joint_cost = std::pow(7.0, static_cast<double>(n_locs));
    if (joint_cost > 20000.0) {
      offsets_per_loc = 3;
      joint_cost = std::pow(3.0, static_cast<double>(n_locs));
    }
    if (joint_cost <= 20000.0) {
      std::vector<std::vector<double>> choices(n_locs);
      for (std::size_t q = 0; q < n_locs; ++q) {
        for (std::size_t o = 0; o < offsets_per_loc; ++o) {
          const double frac = offsets_per_loc == 1
                                  ? 0.0
                                  : -1.0 + 2.0 * static_cast<double>(o) /
                                               static_cast<double>(offsets_per_loc - 1);
          choices[q].push_back(
              std::min(hi, std::max(lo, best_locs[q] + frac * radius)));
        }
      }
      std::vector<std::size_t> pick(n_locs, 0);
      std::vector<double> locs(n_locs);
      for (;;) {
        for (std::size_t q = 0; q < n_locs; ++q) locs[q] = choices[q][pick[q]];
        auto [w, obj] = obj_for_locs(locs);
        if (obj < best_obj) {
          best_obj = obj;
          best_w = std::move(w);
          best_locs = locs;
        }
        std::size_t q = 0;
        while (q < n_locs && ++pick[q] == offsets_per_loc) {
          pick[q] = 0;
          ++q;
        }
        if (q == n_locs) break;
      }
    }

    // Coordinate polish within a third of the joint radius.
    for (std::size_t j = 0; j < n_locs; ++j) {
      std::vector<std::vector<double>> fixed_cols(n_locs);
      for (std::size_t q = 0; q < n_locs; ++q) {
        fixed_cols[q] = detail::poisson_cdf_column(best_locs[q], k_fit);
      }
      auto obj_at = [&](double x) {
        std::vector<const std::vector<double>*> cols;
        cols.reserve(n_locs);
        std::vector<double> moved = detail::poisson_cdf_column(x, k_fit);
        for (std::size_t q = 0; q < n_locs; ++q) {
          cols.push_back(q == j ? &moved : &fixed_cols[q]);
        }
        return evaluate(cols);
      };
      double a = std::max(lo, best_locs[j] - radius / 3.0);
      double b = std::min(hi, best_locs[j] + radius / 3.0);
      double x1 = b - golden * (b - a);
      double x2 = a + golden * (b - a);
      auto [w1, f1] = obj_at(x1);
      auto [w2, f2] = obj_at(x2);
      for (int it = 0; it < 24; ++it) {
        if (f1 <= f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          w2 = std::move(w1);
          x1 = b - golden * (b - a);
          std::tie(w1, f1) = obj_at(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          w1 = std::move(w2);
          x2 = a + golden * (b - a);
          std::tie(w2, f2) = obj_at(x2);
        }
        if (f1 < best_obj) {
          best_obj = f1;
          best_w = w1;
          best_locs[j] = x1;
        }
        if (f2 < best_obj) {
          best_obj = f2;
          best_w = w2;
          best_locs[j] = x2;
        }
      }
    }
    radius /= 3.0;
  }

  std::vector<Atom> atoms;
  for (std::size_t j = 0; j < best_locs.size(); ++j) {
    if (best_w[j] > 0.0) atoms.push_back({best_locs[j], best_w[j]});
  }
  if (atoms.empty()) {
    throw NumericFailureError("min_distance: weight fit returned an empty measure");
  }
  double kept = 0.0;
  for (const Atom& a : atoms) kept += a.weight;
  for (Atom& a : atoms) a.weight /= kept;
  DiscreteMeasure measure{std::move(atoms)};

  FitDiagnostics diag;
  diag.iterations = lp_solves;
  diag.converged = true;
  // Reported objective is re-evaluated from the returned measure over the
  // full objective range, so callers can reproduce it exactly.
  diag.objective = ks_distance(poisson_mixture(measure, k_obj).pmf, phi);
  return {std::move(measure), diag};
}

}  // namespace rareloom
