#include "bqr/ald.hpp"
#include "bqr/datagen.hpp"
#include "bqr/harness.hpp"
#include "bqr/linalg.hpp"
#include "bqr/random.hpp"
#include "bqr/special.hpp"
#include "oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#ifndef BQR_VERSION
#define BQR_VERSION "dev"
#endif

namespace {

using namespace bqr;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Flags collected as text and applied on top of the config file, so every flag
// shares its spelling and parsing with the corresponding config key.
struct Overrides {
  std::optional<std::string> config;
  std::map<std::string, std::optional<std::string>> values;

  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option(flag, values[key], help);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config ? read_config_file(*config) : ExperimentConfig{};
    for (const auto& [key, value] : values) {
      if (value) apply_setting(cfg, key, *value);
    }
    return cfg;
  }

  bool has(const std::string& key) const {
    const auto it = values.find(key);
    return it != values.end() && it->second.has_value();
  }
};

std::uint64_t fresh_seed() {
  std::random_device rd;
  const auto t = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  return mix64((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ t);
}

// Absent seed: generate one and announce it so the run can be replayed.
void ensure_seed(const Overrides& o, ExperimentConfig& cfg) {
  if (o.has("seed")) return;
  if (o.config) {
    std::ifstream in(*o.config);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find("master_seed") != std::string::npos || line.rfind("seed", 0) == 0) return;
    }
  }
  cfg.master_seed = fresh_seed();
  std::cerr << "seed=" << cfg.master_seed << " (generated)\n";
}

QuantileLevel single_tau(const ExperimentConfig& cfg) {
  if (cfg.taus.size() != 1) throw UsageError("exactly one --tau is required here");
  try {
    return QuantileLevel(cfg.taus.front());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

PriorSpec prior_for(const ExperimentConfig& cfg, std::size_t p) {
  switch (cfg.prior_scenario) {
    case PriorScenario::Flat:
      return flat_prior(p, cfg.scale);
    case PriorScenario::Informative:
      if (p != 3) throw UsageError("the informative prior is defined for three coefficients");
      return informative_prior(cfg.scale);
    case PriorScenario::File: {
      PriorSpec prior = read_prior_file(cfg.prior_file, cfg.scale);
      prior.validate(p);
      return prior;
    }
  }
  return flat_prior(p, cfg.scale);
}

std::string vec(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(10);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v(i);
  return os.str();
}

int run_fit(const Overrides& o, const std::string& input, const std::optional<std::string>& chain_out) {
  ExperimentConfig cfg = o.resolve();
  ensure_seed(o, cfg);
  const QuantileLevel tau = single_tau(cfg);
  Dataset data = [&] {
    try {
      return read_dataset_csv_file(input);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("reading data: ") + e.what());
    }
  }();

  MethodSettings settings;
  settings.methods = cfg.methods;
  settings.level = cfg.level;
  settings.prior = prior_for(cfg, data.p());
  settings.gibbs = cfg.gibbs;
  settings.bootstrap_B = cfg.bootstrap_B;
  settings.keep_chain = chain_out.has_value();

  MethodFit fit;
  try {
    fit = fit_methods(data, tau, settings, cfg.master_seed);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("fitting: ") + e.what());
  }

  std::cout << "# seed=" << cfg.master_seed << "\n";
  std::cout << "n " << data.n() << " p " << data.p() << " tau " << tau.value() << " level " << cfg.level << "\n";
  if (fit.qr) std::cout << "beta_qr " << vec(fit.qr->beta) << "\n";
  if (fit.summary) {
    std::cout << "beta_tilde " << vec(fit.summary->beta_tilde) << "\n";
    std::cout << "sigma0_hat " << fit.summary->sigma0_hat << "\n";
  }
  if (fit.sigma_n) {
    for (Eigen::Index r = 0; r < fit.sigma_n->rows(); ++r) {
      std::cout << "sigma_n[" << r << "] " << vec(fit.sigma_n->row(r).transpose()) << "\n";
    }
  }
  for (Method m : kAllMethods) {
    const auto& iv = fit.interval(m);
    if (!iv) continue;
    for (std::size_t j = 0; j < iv->size(); ++j) {
      std::printf("interval %s %zu %.10g %.10g\n", std::string(method_name(m)).c_str(), j, iv->lo[j], iv->hi[j]);
    }
  }
  if (chain_out && fit.chain) {
    std::ofstream out(*chain_out);
    if (!out) throw std::runtime_error("cannot write chain to '" + *chain_out + "'");
    write_chain_csv(out, *fit.chain);
  }
  return 0;
}

int run_simulate(const Overrides& o, const std::optional<std::string>& out_path) {
  ExperimentConfig cfg = o.resolve();
  ensure_seed(o, cfg);
  if (cfg.models.size() != 1) throw UsageError("exactly one --model is required");
  const QuantileLevel tau = single_tau(cfg);
  const ModelSpec spec(cfg.models.front(), tau);
  Rng root(cfg.master_seed);
  Rng cov_rng = root.split(1);
  Rng resp_rng = root.split(2);
  const Dataset data = generate_dataset(spec, sample_covariates(cfg.N, cov_rng), resp_rng);

  std::ostringstream tau_text;
  tau_text.precision(17);
  tau_text << tau.value();
  const std::vector<std::string> header{"seed=" + std::to_string(cfg.master_seed),
                                        "model=" + std::to_string(spec.model_id) + " tau=" + tau_text.str() +
                                            " n=" + std::to_string(cfg.N)};
  if (out_path) {
    std::ofstream out(*out_path);
    if (!out) throw std::runtime_error("cannot write '" + *out_path + "'");
    write_dataset_csv(out, data, header);
  } else {
    write_dataset_csv(std::cout, data, header);
  }
  return 0;
}

int run_experiment_cmd(const Overrides& o, const std::optional<std::string>& csv_path,
                       const std::optional<std::string>& md_path) {
  ExperimentConfig cfg = o.resolve();
  ensure_seed(o, cfg);
  const auto started = std::chrono::steady_clock::now();
  const CoverageReport report = run_experiment(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const auto write = [](const std::optional<std::string>& path, const std::string& text) {
    if (!path) return;
    std::ofstream out(*path);
    if (!out) throw std::runtime_error("cannot write '" + *path + "'");
    out << text;
  };
  const std::string md = format_report(report, ReportLayout::Markdown);
  write(csv_path, format_report(report, ReportLayout::Csv));
  write(md_path, md);
  if (!md_path) std::cout << md;
  std::cerr << "experiment finished in " << secs << " s\n";
  return 0;
}

// Small oracle cross-checks; a quick confidence test of an installed build.
int run_validate(std::uint64_t seed) {
  int failures = 0;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
    failures += ok ? 0 : 1;
  };
  Rng root(seed);

  {
    Rng rng = root.split(1);
    const QuantileLevel tau(0.3);
    Eigen::VectorXd y(30);
    for (auto& v : y) v = 2.0 + rng.normal();
    const Dataset data(y, Eigen::MatrixXd::Ones(30, 1));
    const PriorSpec prior = PriorSpec::normal(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 100.0));
    const auto grid = oracle::grid_posterior(data, tau.value(), prior, 1.0, {{-6.0, 10.0, 4000}});
    GibbsConfig gc;
    gc.burn_in = 1000;
    gc.n_draws = 20000;
    gc.seed = root.derive_seed(2);
    const Chain chain = run_gibbs(data, tau, prior, gc);
    const double mean = chain.beta_draws.col(0).mean();
    const double sd = std::sqrt(grid.cov(0, 0));
    const double mcse = sd / std::sqrt(chain.diagnostics.ess.at(0));
    std::ostringstream d;
    d << "gibbs " << mean << " grid " << grid.mean(0) << " mcse " << mcse;
    report("gibbs-vs-grid posterior mean", std::abs(mean - grid.mean(0)) < 4.0 * mcse, d.str());
  }
  {
    Rng rng = root.split(3);
    const QuantileLevel tau(0.7);
    Eigen::MatrixXd x(35, 2);
    Eigen::VectorXd y(35);
    for (Eigen::Index i = 0; i < 35; ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = 4.0 * rng.uniform();
      y(i) = 1.0 - x(i, 1) + rng.normal();
    }
    const Dataset data(y, x);
    const double fit = fit_classical_qr(data, tau).objective;
    const double brute = oracle::check_sum(data, tau.value(), oracle::brute_force_qr(data, tau.value(), {{-10, 10, 40}, {-10, 10, 40}}));
    std::ostringstream d;
    d << "solver " << fit << " grid " << brute;
    report("check-loss minimizer vs grid search", std::abs(fit - brute) < 1e-3 && fit <= brute + 1e-9, d.str());
  }
  {
    const QuantileLevel tau(0.25);
    Rng rng = root.split(4);
    std::vector<double> s(20000);
    const double theta = (1.0 - 2.0 * tau.value()) / tau.spread();
    const double psi = std::sqrt(2.0 / tau.spread());
    for (auto& v : s) {
      const double w = rng.exponential();
      v = theta * w + psi * std::sqrt(w) * rng.normal();
    }
    const auto ks = oracle::ks_statistic(s, [&](double v) { return ald_cdf(v, 0.0, tau, 1.0); });
    report("mixture representation KS", ks.p_value > 0.001, "p=" + std::to_string(ks.p_value));
  }
  for (int model = 1; model <= 4; ++model) {
    const ModelSpec spec(model, QuantileLevel(0.75));
    Rng rng = root.split(10 + static_cast<std::uint64_t>(model));
    Eigen::RowVector3d x(1.0, 3.2, 1.0);
    const double q = true_quantile(x);
    int below = 0;
    constexpr int kDraws = 200000;
    for (int i = 0; i < kDraws; ++i) below += generate_response(spec, x, rng) <= q ? 1 : 0;
    const double frac = static_cast<double>(below) / kDraws;
    report("model " + std::to_string(model) + " quantile identity", std::abs(frac - 0.75) < 0.005,
           "P(Y<=q)=" + std::to_string(frac));
  }
  std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian quantile regression with sandwich-corrected posteriors"};
  app.set_version_flag("--version", std::string("bqr ") + BQR_VERSION);
  app.require_subcommand(1);

  const auto common = [](CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "key = value settings file; flags override it")->check(CLI::ExistingFile);
    o.bind(cmd, "--seed", "seed", "master seed (generated and printed when absent)");
  };
  const auto estimation = [](CLI::App* cmd, Overrides& o) {
    o.bind(cmd, "--tau", "tau", "quantile level(s), comma separated");
    o.bind(cmd, "--methods", "methods", "comma list of qr, ald, slqr, slba");
    o.bind(cmd, "--prior", "prior", "flat, informative or file");
    o.bind(cmd, "--prior-file", "prior_file", "file of 'mean,variance' lines");
    o.bind(cmd, "--scale", "scale", "fixed:<v>, gamma:<shape>,<rate> or invgamma:<shape>,<rate>");
    o.bind(cmd, "--burn-in", "burn_in", "Gibbs burn-in (default 2000)");
    o.bind(cmd, "--draws", "n_draws", "kept Gibbs draws (default 1000)");
    o.bind(cmd, "--level", "level", "interval level (default 0.95)");
    o.bind(cmd, "--bootstrap-b", "bootstrap_B", "bootstrap replicates for QR (default 600)");
  };

  Overrides fit_o;
  std::string fit_input;
  std::optional<std::string> chain_out;
  auto* fit = app.add_subcommand("fit", "fit one CSV dataset and print estimates and intervals");
  fit->add_option("data", fit_input, "CSV with header y,x1,...")->required()->check(CLI::ExistingFile);
  fit->add_option("--chain-out", chain_out, "write the ALD chain as CSV");
  common(fit, fit_o);
  estimation(fit, fit_o);

  Overrides sim_o;
  std::optional<std::string> sim_out;
  auto* sim = app.add_subcommand("simulate", "draw one dataset from a simulation model");
  common(sim, sim_o);
  sim_o.bind(sim, "--model", "model", "model id 1-4");
  sim_o.bind(sim, "--tau", "tau", "quantile level");
  sim_o.bind(sim, "--n", "N", "sample size");
  sim->add_option("-o,--out", sim_out, "output path (default stdout)");

  Overrides exp_o;
  std::optional<std::string> csv_out;
  std::optional<std::string> md_out;
  auto* exp = app.add_subcommand("experiment", "replicated coverage study");
  common(exp, exp_o);
  estimation(exp, exp_o);
  exp_o.bind(exp, "--models", "models", "model ids, comma separated");
  exp_o.bind(exp, "--n", "N", "sample size");
  exp_o.bind(exp, "--reps", "reps", "replications (default 200)");
  exp_o.bind(exp, "--workers", "workers", "worker threads");
  exp_o.bind(exp, "--scale-scenario", "scale_scenario", "fixed_one or random_scale_prior[:gamma]");
  exp->add_option("--csv", csv_out, "CSV report path");
  exp->add_option("--markdown", md_out, "markdown report path");

  std::uint64_t validate_seed = 20240601;
  auto* val = app.add_subcommand("validate", "run the oracle cross-checks");
  val->add_option("--seed", validate_seed, "seed for the checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit->parsed()) return run_fit(fit_o, fit_input, chain_out);
    if (sim->parsed()) return run_simulate(sim_o, sim_out);
    if (exp->parsed()) return run_experiment_cmd(exp_o, csv_out, md_out);
    if (val->parsed()) return run_validate(validate_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
