// rareloom CLI: simulate rare-events sources, run seeded estimation sweeps,
// and summarize error rates from report files.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <rareloom/rareloom.hpp>

namespace {

nlohmann::json measure_to_json(const rareloom::DiscreteMeasure& m) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const rareloom::Atom& a : m.atoms()) {
    atoms.push_back({{"location", a.location}, {"weight", a.weight}});
  }
  return atoms;
}

int cmd_simulate(const std::string& config_path, long n, const std::string& out_path) {
  const rareloom::DensitySpec spec = rareloom::load_density(config_path);
  const rareloom::PiecewiseDensity g = spec.density();
  const rareloom::RareEventsSource src = rareloom::quantize(g, n, spec.alpha);
  const rareloom::DiscreteMeasure shadow = rareloom::shadow_distribution(src);

  nlohmann::json j;
  j["n"] = n;
  j["alpha"] = spec.alpha;
  j["alphabet_size"] = src.alphabet_size();
  j["shadow"] = measure_to_json(shadow);
  if (g.is_step()) {
    const rareloom::DiscreteMeasure limit = rareloom::limit_distribution(g);
    j["limit"] = measure_to_json(limit);
    j["wasserstein_to_limit"] = rareloom::wasserstein(shadow, limit);
    j["lemma_bound"] = static_cast<double>(g.discontinuity_count() + 1) *
                       (g.c_hi() - g.c_lo()) / static_cast<double>(n);
  }

  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      throw rareloom::Error("cannot open output file: " + out_path);
    }
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& out_override,
                 const std::vector<std::string>& quantity_override,
                 const std::string& estimator_override, std::uint64_t seed_offset) {
  rareloom::ExperimentConfig cfg = rareloom::load_experiment_config(config_path);
  if (!quantity_override.empty()) {
    cfg.quantities.clear();
    for (const std::string& q : quantity_override) {
      cfg.quantities.push_back(rareloom::quantity_from_name(q));
    }
  }
  if (!estimator_override.empty()) cfg.estimator = estimator_override;
  if (seed_offset != 0) {
    for (std::uint64_t& s : cfg.seeds) s += seed_offset;
  }
  if (!out_override.empty()) cfg.output_path = out_override;
  if (cfg.output_path.empty()) {
    throw rareloom::InvalidConfigurationError(
        "no output path: set 'output' in the config or pass --out");
  }
  cfg.validate();

  const std::vector<rareloom::EstimateReport> rows = rareloom::run_experiment(cfg);
  rareloom::write_report_files(cfg.output_path, rows);
  std::cout << "wrote " << rows.size() << " rows to " << cfg.output_path << ".jsonl and "
            << cfg.output_path << ".csv\n";
  return 0;
}

int cmd_rates(const std::string& in_path, double beta, const std::string& out_path) {
  const std::vector<rareloom::EstimateReport> rows = rareloom::read_jsonl(in_path);
  const std::vector<rareloom::RateRow> table = rareloom::summarize(rows, beta);

  std::ostringstream csv;
  csv << "quantity,n,replications,mean_error,scaled_error\n";
  for (const rareloom::RateRow& r : table) {
    csv << r.quantity << ',' << r.n << ',' << r.replications << ','
        << rareloom::detail::number_repr(r.mean_error) << ','
        << rareloom::detail::number_repr(r.scaled_error) << "\n";
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      throw rareloom::Error("cannot open output file: " + out_path);
    }
    out << csv.str();
    std::cout << "wrote " << table.size() << " rows to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rareloom: estimation in the rare-events regime"};
  app.require_subcommand(1);

  std::string config_path, out_path, estimator_override, rates_in;
  std::vector<std::string> quantities;
  std::uint64_t seed_offset = 0;
  long sim_n = 1000;
  double beta = 0.0;

  CLI::App* sim = app.add_subcommand(
      "simulate", "Build a source from a density spec and report its shadow law");
  sim->add_option("--config", config_path, "density spec file (JSON)")->required();
  sim->add_option("--n", sim_n, "scale parameter n")->required();
  sim->add_option("--out", out_path, "output file (default: stdout)");

  CLI::App* est = app.add_subcommand(
      "estimate", "Run the full estimation sweep from an experiment config");
  est->add_option("--config", config_path, "experiment config file (JSON)")->required();
  est->add_option("--out", out_path, "output path prefix (overrides config)");
  est->add_option("--quantity", quantities, "restrict to these quantities");
  est->add_option("--estimator", estimator_override, "npmle or mindist (overrides config)");
  est->add_option("--seed-offset", seed_offset, "shift every configured seed");

  CLI::App* rates = app.add_subcommand("rates", "Summarize a JSON-lines report");
  rates->add_option("--in", rates_in, "report .jsonl file")->required();
  rates->add_option("--beta", beta, "scale mean errors by n^beta");
  rates->add_option("--out", out_path, "output CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, sim_n, out_path);
    if (est->parsed()) {
      return cmd_estimate(config_path, out_path, quantities, estimator_override,
                          seed_offset);
    }
    if (rates->parsed()) return cmd_rates(rates_in, beta, out_path);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
