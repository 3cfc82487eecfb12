#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rareloom/canonical.hpp"
#include "rareloom/errors.hpp"
#include "rareloom/goodturing.hpp"
#include "rareloom/measures.hpp"
#include "rareloom/mixing.hpp"
#include "rareloom/sources.hpp"

namespace rareloom {

enum class Quantity {
  Entropy,
  SeqProb,
  Alphabet,
  Support,  // expands to two report rows, support_lo and support_hi
  GtL1,
  GtKs,
  MixingWass,
};

inline const char* quantity_name(Quantity q) {
  switch (q) {
    case Quantity::Entropy: return "entropy";
    case Quantity::SeqProb: return "seqprob";
    case Quantity::Alphabet: return "alphabet";
    case Quantity::Support: return "support";
    case Quantity::GtL1: return "gt_l1";
    case Quantity::GtKs: return "gt_ks";
    case Quantity::MixingWass: return "mixing_wass";
  }
  return "?";
}

inline Quantity quantity_from_name(const std::string& name) {
  for (Quantity q : {Quantity::Entropy, Quantity::SeqProb, Quantity::Alphabet,
                     Quantity::Support, Quantity::GtL1, Quantity::GtKs,
                     Quantity::MixingWass}) {
    if (name == quantity_name(q)) return q;
  }
  throw InvalidConfigurationError("unknown quantity: " + name);
}

struct DensitySpec {
  std::vector<DensityPiece> pieces;
  double alpha = 1.0;

  PiecewiseDensity density() const { return PiecewiseDensity(pieces); }
};

struct ExperimentConfig {
  DensitySpec source;
  std::vector<long> n_grid;
  std::vector<std::uint64_t> seeds;
  std::string estimator = "mindist";  // "npmle" | "mindist"
  NpmleConfig npmle;
  MinDistConfig mindist;
  bool mindist_epsilon_auto = true;  // epsilon_n = n^-0.6 unless pinned
  std::vector<Quantity> quantities;
  Schedule schedule = Schedule::power(1.0);
  std::string output_path;

  void validate() const {
    if (n_grid.empty()) {
      throw InvalidConfigurationError("config: n_grid must be non-empty");
    }
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
      if (n_grid[i] <= n_grid[i - 1]) {
        throw InvalidConfigurationError("config: n_grid must be strictly ascending");
      }
    }
    if (seeds.empty()) {
      throw InvalidConfigurationError("config: seeds must be non-empty");
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      for (std::size_t j = i + 1; j < seeds.size(); ++j) {
        if (seeds[i] == seeds[j]) {
          throw InvalidConfigurationError("config: seeds must be distinct");
        }
      }
    }
    if (estimator != "npmle" && estimator != "mindist") {
      throw InvalidConfigurationError("config: estimator must be npmle or mindist");
    }
    if (quantities.empty()) {
      throw InvalidConfigurationError("config: quantities must be non-empty");
    }
  }
};

struct EstimateReport {
  long n = 0;
  std::uint64_t seed = 0;
  std::string quantity;
  double estimate = 0.0;
  std::optional<double> ground_truth;
  std::optional<double> abs_error;
  std::string estimator;
  double runtime_ms = 0.0;  // wall clock; in-memory only, excluded from files
};

// ---------------------------------------------------------------------------
// Config files

namespace detail {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidConfigurationError("cannot open file: " + path);
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfigurationError(path + ": " + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) {
    throw InvalidConfigurationError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigurationError(where + ": bad field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const std::string& key, T fallback,
           const std::string& where) {
  if (!j.contains(key)) return fallback;
  return field<T>(j, key, where);
}

}  // namespace detail

/// Density spec file: {"pieces": [{"lo","hi","a","b"}...], "alpha": 1.0}
/// where each piece contributes a*w + b on [lo, hi).
inline DensitySpec load_density(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  DensitySpec spec;
  spec.alpha = detail::field_or<double>(j, "alpha", 1.0, path);
  if (!j.contains("pieces") || !j.at("pieces").is_array()) {
    throw InvalidConfigurationError(path + ": missing 'pieces' array");
  }
  for (const auto& pj : j.at("pieces")) {
    DensityPiece p{};
    p.lo = detail::field<double>(pj, "lo", path);
    p.hi = detail::field<double>(pj, "hi", path);
    p.slope = detail::field_or<double>(pj, "a", 0.0, path);
    p.intercept = detail::field<double>(pj, "b", path);
    spec.pieces.push_back(p);
  }
  if (spec.pieces.empty()) {
    throw InvalidConfigurationError(path + ": 'pieces' must be non-empty");
  }
  return spec;
}

inline Schedule parse_schedule(const nlohmann::json& j, const std::string& where) {
  const std::string kind = detail::field<std::string>(j, "kind", where);
  if (kind == "fixed") {
    return Schedule::fixed(detail::field<double>(j, "D", where));
  }
  if (kind == "power") {
    return Schedule::power(detail::field<double>(j, "s", where));
  }
  if (kind == "fallback") {
    return Schedule::fallback(detail::field_or<double>(j, "epsilon", 0.5, where));
  }
  if (kind == "known_bounds") {
    return Schedule::known_bounds(detail::field<double>(j, "d_min", where),
                                  detail::field<double>(j, "d_max", where),
                                  detail::field_or<double>(j, "s", 1.0, where));
  }
  throw InvalidConfigurationError(where + ": unknown schedule kind '" + kind + "'");
}

/// Experiment config. A relative density path resolves against the config
/// file's own directory.
inline ExperimentConfig load_experiment_config(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  ExperimentConfig cfg;

  std::filesystem::path density_path = detail::field<std::string>(j, "density", path);
  if (density_path.is_relative()) {
    density_path = std::filesystem::path(path).parent_path() / density_path;
  }
  cfg.source = load_density(density_path.string());

  cfg.n_grid = detail::field<std::vector<long>>(j, "n_grid", path);
  cfg.seeds = detail::field<std::vector<std::uint64_t>>(j, "seeds", path);
  cfg.estimator = detail::field_or<std::string>(j, "estimator", "mindist", path);
  cfg.output_path = detail::field_or<std::string>(j, "output", "", path);

  if (j.contains("npmle")) {
    const auto& nj = j.at("npmle");
    cfg.npmle.grid_lo = detail::field_or<double>(nj, "grid_lo", 0.0, path);
    cfg.npmle.grid_hi = detail::field_or<double>(nj, "grid_hi", 0.0, path);
    cfg.npmle.grid_points = detail::field_or<int>(nj, "grid_points", 400, path);
    cfg.npmle.max_iters = detail::field_or<int>(nj, "max_iters", 2000, path);
    cfg.npmle.dd_tol = detail::field_or<double>(nj, "dd_tol", 1e-6, path);
    cfg.npmle.weight_floor = detail::field_or<double>(nj, "weight_floor", 1e-8, path);
  }
  if (j.contains("mindist")) {
    const auto& mj = j.at("mindist");
    cfg.mindist.m = detail::field_or<int>(mj, "m", 1, path);
    if (mj.contains("epsilon")) {
      cfg.mindist.epsilon = detail::field<double>(mj, "epsilon", path);
      cfg.mindist_epsilon_auto = false;
    }
    cfg.mindist.search_lo = detail::field_or<double>(mj, "search_lo", 0.0, path);
    cfg.mindist.search_hi = detail::field_or<double>(mj, "search_hi", 0.0, path);
    cfg.mindist.coarse_grid = detail::field_or<int>(mj, "coarse_grid", 25, path);
    cfg.mindist.refine_rounds = detail::field_or<int>(mj, "refine_rounds", 2, path);
    cfg.mindist.max_tuples = detail::field_or<long>(mj, "max_tuples", 200000, path);
  }
  if (j.contains("schedule")) {
    cfg.schedule = parse_schedule(j.at("schedule"), path);
  }
  for (const auto& qj : detail::field<std::vector<std::string>>(j, "quantities", path)) {
    cfg.quantities.push_back(quantity_from_name(qj));
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace detail {

inline unsigned worker_count(std::size_t tasks) {
  unsigned cap = 0;
  if (const char* env = std::getenv("RARELOOM_THREADS")) {
    cap = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  }
  if (cap == 0) {
    cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
  }
  return static_cast<unsigned>(std::min<std::size_t>(cap, std::max<std::size_t>(tasks, 1)));
}

inline int quantity_rank(const std::string& name) {
  static const char* order[] = {"entropy",    "seqprob", "alphabet", "support_lo",
                                "support_hi", "gt_l1",   "gt_ks",    "mixing_wass"};
  for (int i = 0; i < 8; ++i) {
    if (name == order[i]) return i;
  }
  return 8;
}

inline bool needs_mixing_fit(const std::vector<Quantity>& qs) {
  for (Quantity q : qs) {
    if (q == Quantity::Entropy || q == Quantity::SeqProb || q == Quantity::Alphabet ||
        q == Quantity::Support || q == Quantity::MixingWass) {
      return true;
    }
  }
  return false;
}

inline bool needs_limit_law(const std::vector<Quantity>& qs) {
  for (Quantity q : qs) {
    if (q == Quantity::GtL1 || q == Quantity::GtKs || q == Quantity::MixingWass) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Runs the full (n, seed) sweep. Tasks fan out across workers (capped by
/// RARELOOM_THREADS, 0 = auto); each task is pure, and rows are gathered and
/// sorted by (n, seed, quantity) before being returned, so output is
/// deterministic regardless of thread interleaving.
inline std::vector<EstimateReport> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const PiecewiseDensity g = cfg.source.density();

  const bool want_fit = detail::needs_mixing_fit(cfg.quantities);
  const bool want_limit =
      detail::needs_limit_law(cfg.quantities) ||
      (g.is_step() && want_fit);  // step sources also supply plug-in ground truths
  if (detail::needs_limit_law(cfg.quantities) && !g.is_step()) {
    throw UnsupportedDensityError(
        "run_experiment: distance-to-truth quantities require a step density");
  }

  std::optional<DiscreteMeasure> limit;
  if (g.is_step()) limit = limit_distribution(g);

  struct Task {
    long n;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (long n : cfg.n_grid) {
    for (std::uint64_t s : cfg.seeds) tasks.push_back({n, s});
  }

  std::vector<std::vector<EstimateReport>> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_task = [&](const Task& task) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<EstimateReport> rows;

    const RareEventsSource src = quantize(g, task.n, cfg.source.alpha);
    const SampleRecord rec = sample(src, task.seed);
    const OccupancyCounts occ = occupancy(rec);
    const CountDistribution phi = gt_estimator(occ);

    std::optional<DiscreteMeasure> fitted;
    if (want_fit) {
      if (cfg.estimator == "npmle") {
        fitted = npmle(phi, cfg.npmle).measure;
      } else {
        MinDistConfig mdc = cfg.mindist;
        if (cfg.mindist_epsilon_auto) {
          mdc.epsilon = std::pow(static_cast<double>(task.n), -0.6);
        }
        fitted = min_distance(phi, mdc).measure;
      }
    }

    std::optional<CountDistribution> lambda;
    if (want_limit && limit && (std::find(cfg.quantities.begin(), cfg.quantities.end(),
                                          Quantity::GtL1) != cfg.quantities.end() ||
                                std::find(cfg.quantities.begin(), cfg.quantities.end(),
                                          Quantity::GtKs) != cfg.quantities.end())) {
      const int k_lambda = std::max(suggest_k_max(limit->support_hi()), phi.k_max());
      lambda = poisson_mixture(*limit, k_lambda).pmf;
    }

    auto push = [&](const std::string& name, double estimate,
                    std::optional<double> truth) {
      EstimateReport r;
      r.n = task.n;
      r.seed = task.seed;
      r.quantity = name;
      r.estimate = estimate;
      r.ground_truth = truth;
      if (truth) r.abs_error = std::abs(estimate - *truth);
      r.estimator = cfg.estimator;
      rows.push_back(std::move(r));
    };

    for (Quantity q : cfg.quantities) {
      switch (q) {
        case Quantity::Entropy: {
          const double est = estimate_entropy(*fitted, cfg.schedule, task.n);
          std::optional<double> truth;
          if (limit) {
            double s = 0.0;
            for (const Atom& a : limit->atoms()) s += a.weight * std::log(a.location);
            truth = -s;
          }
          push("entropy", est, truth);
          break;
        }
        case Quantity::SeqProb: {
          const double est = estimate_seq_logprob(*fitted, cfg.schedule, task.n);
          std::optional<double> truth;
          if (limit) {
            double s = 0.0;
            for (const Atom& a : limit->atoms()) s += a.weight * std::log(a.location);
            truth = s;
          }
          push("seqprob", est, truth);
          break;
        }
        case Quantity::Alphabet: {
          const double est = estimate_alphabet_size(*fitted, cfg.schedule, task.n);
          std::optional<double> truth;
          if (limit) {
            double s = 0.0;
            for (const Atom& a : limit->atoms()) s += a.weight / a.location;
            truth = s;
          }
          push("alphabet", est, truth);
          break;
        }
        case Quantity::Support: {
          const SupportEstimate est = estimate_support(*fitted, cfg.schedule, task.n);
          std::optional<double> lo_truth, hi_truth;
          if (limit) {
            lo_truth = limit->support_lo();
            hi_truth = limit->support_hi();
          }
          push("support_lo", est.c_lo, lo_truth);
          push("support_hi", est.c_hi, hi_truth);
          break;
        }
        case Quantity::GtL1:
          push("gt_l1", l1_distance(phi, *lambda), 0.0);
          break;
        case Quantity::GtKs:
          push("gt_ks", ks_distance(phi, *lambda), 0.0);
          break;
        case Quantity::MixingWass:
          push("mixing_wass", wasserstein(*fitted, *limit), 0.0);
          break;
      }
    }

    const auto t1 = std::chrono::steady_clock::now();
    const double ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0)
            .count();
    for (EstimateReport& r : rows) r.runtime_ms = std::max(ms, 1e-3);
    return rows;
  };

  const unsigned workers = detail::worker_count(tasks.size());
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) break;
      try {
        slots[i] = run_task(tasks[i]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) {
          std::ostringstream msg;
          msg << "estimate task (n=" << tasks[i].n << ", seed=" << tasks[i].seed
              << "): " << e.what();
          first_error = std::make_exception_ptr(Error(msg.str()));
        }
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) std::rethrow_exception(first_error);

  std::vector<EstimateReport> all;
  for (auto& s : slots) {
    for (auto& r : s) all.push_back(std::move(r));
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const EstimateReport& a, const EstimateReport& b) {
                     if (a.n != b.n) return a.n < b.n;
                     if (a.seed != b.seed) return a.seed < b.seed;
                     return detail::quantity_rank(a.quantity) <
                            detail::quantity_rank(b.quantity);
                   });
  return all;
}

// ---------------------------------------------------------------------------
// Writers: JSON-lines plus a CSV mirror with identical values. Numbers are
// rendered by the same shortest-round-trip serializer in both formats, and
// runtime_ms is deliberately not written so reruns are byte-identical.

namespace detail {

inline std::string number_repr(double v) { return nlohmann::json(v).dump(); }

}  // namespace detail

inline void write_jsonl(std::ostream& out, const std::vector<EstimateReport>& rows) {
  for (const EstimateReport& r : rows) {
    nlohmann::json j;
    j["n"] = r.n;
    j["seed"] = r.seed;
    j["quantity"] = r.quantity;
    j["estimate"] = r.estimate;
    if (r.ground_truth) j["ground_truth"] = *r.ground_truth;
    if (r.abs_error) j["abs_error"] = *r.abs_error;
    j["estimator"] = r.estimator;
    out << j.dump() << "\n";
  }
}

inline constexpr const char* kCsvHeader =
    "n,seed,quantity,estimate,ground_truth,abs_error,estimator";

inline void write_csv(std::ostream& out, const std::vector<EstimateReport>& rows) {
  out << kCsvHeader << "\n";
  for (const EstimateReport& r : rows) {
    out << r.n << ',' << r.seed << ',' << r.quantity << ','
        << detail::number_repr(r.estimate) << ',';
    if (r.ground_truth) out << detail::number_repr(*r.ground_truth);
    out << ',';
    if (r.abs_error) out << detail::number_repr(*r.abs_error);
    out << ',' << r.estimator << "\n";
  }
}

inline void write_report_files(const std::string& prefix,
                               const std::vector<EstimateReport>& rows) {
  if (prefix.empty()) {
    throw InvalidConfigurationError("write_report_files: empty output path");
  }
  const std::filesystem::path base(prefix);
  if (base.has_parent_path()) {
    std::filesystem::create_directories(base.parent_path());
  }
  std::ofstream jl(prefix + ".jsonl", std::ios::binary);
  std::ofstream cs(prefix + ".csv", std::ios::binary);
  if (!jl || !cs) {
    throw Error("write_report_files: cannot open output files at " + prefix);
  }
  write_jsonl(jl, rows);
  write_csv(cs, rows);
}

/// Parses rows back from a JSON-lines report (for the `rates` verb).
inline std::vector<EstimateReport> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidConfigurationError("cannot open report: " + path);
  }
  std::vector<EstimateReport> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidConfigurationError(path + ":" + std::to_string(line_no) + ": " +
                                      e.what());
    }
    EstimateReport r;
    r.n = detail::field<long>(j, "n", path);
    r.seed = detail::field<std::uint64_t>(j, "seed", path);
    r.quantity = detail::field<std::string>(j, "quantity", path);
    r.estimate = detail::field<double>(j, "estimate", path);
    if (j.contains("ground_truth")) r.ground_truth = j.at("ground_truth").get<double>();
    if (j.contains("abs_error")) r.abs_error = j.at("abs_error").get<double>();
    r.estimator = detail::field_or<std::string>(j, "estimator", "", path);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rate summaries

struct RateRow {
  std::string quantity;
  long n = 0;
  std::size_t replications = 0;
  double mean_error = 0.0;
  double scaled_error = 0.0;  // mean_error * n^beta
};

/// Seed-averaged error per (quantity, n), with the configured n^beta scaling.
/// The error is abs_error where present, |estimate| otherwise (distance
/// quantities are already errors).
inline std::vector<RateRow> summarize(const std::vector<EstimateReport>& rows,
                                      double beta = 0.0) {
  std::vector<long> ns;
  for (const EstimateReport& r : rows) {
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
  }
  if (ns.size() < 2) {
    throw InvalidConfigurationError("summarize: need reports for at least two n");
  }
  std::sort(ns.begin(), ns.end());

  std::vector<std::string> quantities;
  for (const EstimateReport& r : rows) {
    if (std::find(quantities.begin(), quantities.end(), r.quantity) == quantities.end()) {
      quantities.push_back(r.quantity);
    }
  }
  std::sort(quantities.begin(), quantities.end(), [](const auto& a, const auto& b) {
    return detail::quantity_rank(a) < detail::quantity_rank(b);
  });

  std::vector<RateRow> table;
  for (const std::string& q : quantities) {
    for (long n : ns) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const EstimateReport& r : rows) {
        if (r.quantity == q && r.n == n) {
          sum += r.abs_error ? *r.abs_error : std::abs(r.estimate);
          ++count;
        }
      }
      if (count == 0) continue;
      RateRow row;
      row.quantity = q;
      row.n = n;
      row.replications = count;
      row.mean_error = sum / static_cast<double>(count);
      row.scaled_error = row.mean_error * std::pow(static_cast<double>(n), beta);
      table.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace rareloom
