#pragma once

#include "bqr/datagen.hpp"
#include "bqr/gibbs.hpp"
#include "bqr/interval.hpp"
#include "bqr/qr_fit.hpp"
#include "bqr/sandwich.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bqr {

enum class Method { Qr = 0, Ald = 1, Slqr = 2, Slba = 3 };
inline constexpr std::array<Method, 4> kAllMethods{Method::Qr, Method::Ald, Method::Slqr, Method::Slba};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
/// Comma-separated list, e.g. "qr,slba". Output is in canonical order without duplicates.
std::vector<Method> parse_methods(std::string_view list);

enum class PriorScenario { Flat, Informative, File };

/// N(0,100) on every coefficient.
PriorSpec flat_prior(std::size_t p, ScaleRule scale = FixedScale{});
/// N(0.9,1) x N(2.1,1) x N(2.9,1).
PriorSpec informative_prior(ScaleRule scale = FixedScale{});
/// One "mean,variance" pair per line; '#' starts a comment.
PriorSpec read_prior_file(const std::string& path, ScaleRule scale = FixedScale{});

/// "fixed:<v>", "gamma:<shape>,<rate>" or "invgamma:<shape>,<rate>".
ScaleRule parse_scale(std::string_view text);
std::string format_scale(const ScaleRule& scale);

/// Prior with mean 100 and variance 1000 on sigma (inverse-gamma form unless `gamma`).
RandomScale random_scale_prior(bool gamma_family = false);

/// Settings shared by every method fitted to one dataset.
struct MethodSettings {
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  double level = 0.95;
  PriorSpec prior;
  GibbsConfig gibbs;  ///< seed is overwritten per fit
  std::size_t bootstrap_B = kDefaultBootstrapReplicates;
  bool keep_chain = false;
};

struct CallCounts {
  std::size_t chain_runs = 0;
  std::size_t qr_fits = 0;
};

struct MethodFit {
  std::array<std::optional<IntervalSet>, 4> intervals;  ///< indexed by Method
  std::optional<QrFit> qr;
  std::optional<PosteriorSummary> summary;
  std::optional<Eigen::MatrixXd> sigma_n;
  std::optional<SandwichPosterior> slqr;
  std::optional<SandwichPosterior> slba;
  std::optional<Chain> chain;  ///< only with keep_chain
  CallCounts calls;

  const std::optional<IntervalSet>& interval(Method m) const { return intervals[static_cast<std::size_t>(m)]; }
};

/**
 * Fit the requested methods to one dataset. The ALD chain runs at most once and
 * is shared by ALD, SLQR and SLBA; the check-loss estimate runs at most once and
 * is shared by QR (as the bootstrap warm start) and SLQR.
 */
MethodFit fit_methods(const Dataset& data, QuantileLevel tau, const MethodSettings& settings, std::uint64_t seed);

struct ExperimentConfig {
  std::vector<int> models{1};
  std::vector<double> taus{0.25};
  std::size_t N = 2000;
  std::size_t reps = 200;
  double level = 0.95;
  PriorScenario prior_scenario = PriorScenario::Flat;
  std::string prior_file;
  ScaleRule scale = FixedScale{1.0};
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  GibbsConfig gibbs;
  std::size_t bootstrap_B = kDefaultBootstrapReplicates;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  std::size_t max_redraws = 50;

  /// Throws std::invalid_argument on an unusable configuration.
  void validate() const;
  PriorSpec prior() const;
};

/// Apply one key-value setting (config file or command line). Unknown keys throw.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
/// Flat "key = value" text with '#' comments.
ExperimentConfig read_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig read_config_file(const std::string& path, ExperimentConfig base = {});
std::string describe_config(const ExperimentConfig& config);

struct Scenario {
  ModelSpec model;
  std::size_t N = 0;
  MethodSettings settings;

  std::string label() const;
};

std::vector<Scenario> make_scenarios(const ExperimentConfig& config);

struct ReplicationResult {
  MethodFit fit;
  std::array<std::vector<bool>, 4> hits;  ///< per method, per coefficient
  std::size_t redraws = 0;
};

/**
 * One replication: draw covariates and responses, fit the scenario's methods and
 * record which intervals contain (1, 2, 3). The streams are keyed by
 * (master_seed, rep_index, attempt), with the covariates shared by every model
 * and level. A failing attempt is redrawn; after max_redraws failures the last
 * error is rethrown with the scenario label.
 */
ReplicationResult run_replication(const Scenario& scenario, std::size_t rep_index, std::uint64_t master_seed,
                                  std::size_t max_redraws = 50);

struct CoverageCell {
  int model_id = 0;
  double tau = 0.0;
  Method method = Method::Qr;
  std::size_t coefficient = 0;
  std::size_t hits = 0;
  std::size_t reps = 0;
  double cov_pct = 0.0;
  double len = 0.0;
  double mc_se_cov = 0.0;  ///< binomial standard error of cov_pct, in points
};

struct CoverageReport {
  std::uint64_t master_seed = 0;
  std::size_t N = 0;
  std::size_t reps = 0;
  std::size_t p = 3;
  std::vector<int> models;
  std::vector<double> taus;
  std::vector<Method> methods;
  std::vector<CoverageCell> cells;  ///< model-major, then tau, coefficient, method
  std::vector<std::size_t> redraws;  ///< per (model, tau)
  std::string config_text;

  const CoverageCell& cell(int model_id, double tau, Method method, std::size_t coefficient) const;
};

/// Runs every (scenario, rep) pair on `workers` threads; the result does not depend on the worker count.
CoverageReport run_experiment(const ExperimentConfig& config);

enum class ReportLayout { Csv, Markdown };

/// "(COV,LEN)": coverage as an integer percentage, length rounded to two decimals.
std::string format_cell(double cov_pct, double len);
std::string format_report(const CoverageReport& report, ReportLayout layout);

}  // namespace bqr
