#include "bqr/harness.hpp"

#include "bqr/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bqr {

namespace {

// Stream tags below a replication's (rep, attempt) node.
enum StreamTag : std::uint64_t { kCovariates = 1, kResponses = 2, kMethods = 3 };
enum SeedTag : std::uint64_t { kGibbsSeed = 1, kBootstrapSeed = 2 };

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(sep, start);
    const auto piece = trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!piece.empty()) out.push_back(piece);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double parse_double(std::string_view text, std::string_view what) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument(std::string(what) + ": expected a number, got '" + s + "'");
}

std::uint64_t parse_count(std::string_view text, std::string_view what) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument(std::string(what) + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t tau_tag(double tau) { return std::bit_cast<std::uint64_t>(tau); }

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// Shortest text that reads back to the same double.
std::string exact(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string coefficient_name(std::size_t j, std::size_t p) {
  if (p == 3) {
    static const char* names[] = {"alpha", "beta1", "beta2"};
    return names[j];
  }
  return "b" + std::to_string(j);
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Qr:
      return "QR";
    case Method::Ald:
      return "ALD";
    case Method::Slqr:
      return "SLQR";
    case Method::Slba:
      return "SLBA";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  const std::string s = lower(trim(name));
  if (s == "qr") return Method::Qr;
  if (s == "ald") return Method::Ald;
  if (s == "slqr") return Method::Slqr;
  if (s == "slba") return Method::Slba;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected qr, ald, slqr, slba)");
}

std::vector<Method> parse_methods(std::string_view list) {
  std::array<bool, 4> chosen{};
  for (const auto& piece : split_list(list)) chosen[static_cast<std::size_t>(parse_method(piece))] = true;
  std::vector<Method> out;
  for (Method m : kAllMethods) {
    if (chosen[static_cast<std::size_t>(m)]) out.push_back(m);
  }
  if (out.empty()) throw std::invalid_argument("no methods selected");
  return out;
}

PriorSpec flat_prior(std::size_t p, ScaleRule scale) {
  const auto dim = static_cast<Eigen::Index>(p);
  return PriorSpec::normal(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Constant(dim, 100.0), scale);
}

PriorSpec informative_prior(ScaleRule scale) {
  return PriorSpec::normal(Eigen::Vector3d(0.9, 2.1, 2.9), Eigen::Vector3d::Ones(), scale);
}

PriorSpec read_prior_file(const std::string& path, ScaleRule scale) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prior file '" + path + "'");
  std::vector<double> means;
  std::vector<double> vars;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto fields = split_list(body);
    if (fields.size() != 2) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected 'mean,variance'");
    }
    means.push_back(parse_double(fields[0], "prior mean"));
    vars.push_back(parse_double(fields[1], "prior variance"));
  }
  if (means.empty()) throw std::invalid_argument(path + ": no prior entries");
  return PriorSpec::normal(Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size())),
                           Eigen::Map<Eigen::VectorXd>(vars.data(), static_cast<Eigen::Index>(vars.size())), scale);
}

ScaleRule parse_scale(std::string_view text) {
  const std::string s = lower(trim(text));
  const auto colon = s.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("scale '" + s + "': expected fixed:<v>, gamma:<shape>,<rate> or invgamma:<shape>,<rate>");
  }
  const std::string kind = s.substr(0, colon);
  const auto args = split_list(std::string_view(s).substr(colon + 1));
  if (kind == "fixed") {
    if (args.size() != 1) throw std::invalid_argument("scale fixed:<v> takes one value");
    const double v = parse_double(args[0], "fixed scale");
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("fixed scale must be positive");
    return FixedScale{v};
  }
  if (kind == "gamma" || kind == "invgamma") {
    if (args.size() != 2) throw std::invalid_argument("scale " + kind + " takes <shape>,<rate>");
    RandomScale rs;
    rs.family = kind == "gamma" ? RandomScale::Family::Gamma : RandomScale::Family::InverseGamma;
    rs.shape = parse_double(args[0], "scale shape");
    rs.rate = parse_double(args[1], "scale rate");
    if (!(rs.shape > 0.0) || !(rs.rate > 0.0)) throw std::invalid_argument("scale shape and rate must be positive");
    return rs;
  }
  throw std::invalid_argument("unknown scale kind '" + kind + "'");
}

std::string format_scale(const ScaleRule& scale) {
  if (const auto* f = std::get_if<FixedScale>(&scale)) return "fixed:" + exact(f->sigma0);
  const auto& rs = std::get<RandomScale>(scale);
  const std::string kind = rs.family == RandomScale::Family::Gamma ? "gamma:" : "invgamma:";
  return kind + exact(rs.shape) + "," + exact(rs.rate);
}

RandomScale random_scale_prior(bool gamma_family) {
  return RandomScale::from_moments(gamma_family ? RandomScale::Family::Gamma : RandomScale::Family::InverseGamma,
                                   100.0, 1000.0);
}

MethodFit fit_methods(const Dataset& data, QuantileLevel tau, const MethodSettings& settings, std::uint64_t seed) {
  require_level(settings.level);
  const auto wants = [&](Method m) {
    return std::find(settings.methods.begin(), settings.methods.end(), m) != settings.methods.end();
  };
  const bool need_chain = wants(Method::Ald) || wants(Method::Slqr) || wants(Method::Slba);
  const bool need_qr = wants(Method::Qr) || wants(Method::Slqr);
  const Rng seeds(seed);

  MethodFit out;
  if (need_qr) {
    out.qr = fit_classical_qr(data, tau);
    ++out.calls.qr_fits;
  }
  if (wants(Method::Qr)) {
    out.intervals[static_cast<std::size_t>(Method::Qr)] = bootstrap_intervals(
        data, tau, settings.bootstrap_B, settings.level, seeds.derive_seed(kBootstrapSeed), out.qr->beta);
  }
  if (!need_chain) return out;

  GibbsConfig gibbs = settings.gibbs;
  gibbs.seed = seeds.derive_seed(kGibbsSeed);
  Chain chain = run_gibbs(data, tau, settings.prior, gibbs);
  ++out.calls.chain_runs;
  if (wants(Method::Ald)) out.intervals[static_cast<std::size_t>(Method::Ald)] = credible_interval(chain, settings.level);
  out.summary = summarize_chain(chain, data, settings.prior);

  if (wants(Method::Slqr) || wants(Method::Slba)) {
    SandwichInputs inputs;
    inputs.v_n_inv = out.summary->v_n_inv;
    inputs.s_n = compute_s_n(data);
    inputs.n = data.n();
    inputs.tau = tau;
    inputs.prior = settings.prior;
    if (wants(Method::Slba)) {
      inputs.center = out.summary->beta_tilde;
      inputs.centering = Centering::Slba;
      out.slba = sandwich_posterior(inputs);
      out.intervals[static_cast<std::size_t>(Method::Slba)] = credible_interval(*out.slba, settings.level);
      out.sigma_n = out.slba->sigma_n;
    }
    if (wants(Method::Slqr)) {
      inputs.center = out.qr->beta;
      inputs.centering = Centering::Slqr;
      out.slqr = sandwich_posterior(inputs);
      out.intervals[static_cast<std::size_t>(Method::Slqr)] = credible_interval(*out.slqr, settings.level);
      if (!out.sigma_n) out.sigma_n = out.slqr->sigma_n;
    }
  }
  if (settings.keep_chain) out.chain = std::move(chain);
  return out;
}

void ExperimentConfig::validate() const {
  if (models.empty()) throw std::invalid_argument("config: no models");
  for (int m : models) {
    if (m < 1 || m > 4) throw std::invalid_argument("config: model ids must be 1..4");
  }
  if (taus.empty()) throw std::invalid_argument("config: no quantile levels");
  for (double t : taus) QuantileLevel{t};
  if (reps < 1) throw std::invalid_argument("config: reps must be at least 1");
  if (N < 3) throw std::invalid_argument("config: N must be at least 3");
  require_level(level);
  if (methods.empty()) throw std::invalid_argument("config: no methods");
  if (gibbs.n_draws < 2) throw std::invalid_argument("config: n_draws must be at least 2");
  if (workers < 1) throw std::invalid_argument("config: workers must be at least 1");
  const bool uses_qr = std::find(methods.begin(), methods.end(), Method::Qr) != methods.end();
  if (uses_qr && bootstrap_B < 100) throw std::invalid_argument("config: bootstrap_B must be at least 100");
  prior().validate(3);
}

PriorSpec ExperimentConfig::prior() const {
  switch (prior_scenario) {
    case PriorScenario::Flat:
      return flat_prior(3, scale);
    case PriorScenario::Informative:
      return informative_prior(scale);
    case PriorScenario::File:
      return read_prior_file(prior_file, scale);
  }
  throw std::logic_error("unreachable prior scenario");
}

void apply_setting(ExperimentConfig& config, std::string_view key_in, std::string_view value_in) {
  std::string key = lower(trim(key_in));
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(value_in);

  if (key == "models" || key == "model") {
    config.models.clear();
    for (const auto& s : split_list(value)) config.models.push_back(static_cast<int>(parse_count(s, key)));
  } else if (key == "taus" || key == "tau") {
    config.taus.clear();
    for (const auto& s : split_list(value)) config.taus.push_back(parse_double(s, key));
  } else if (key == "n") {
    config.N = parse_count(value, key);
  } else if (key == "reps") {
    config.reps = parse_count(value, key);
  } else if (key == "level") {
    config.level = parse_double(value, key);
  } else if (key == "prior_scenario" || key == "prior") {
    const auto v = lower(value);
    if (v == "flat") {
      config.prior_scenario = PriorScenario::Flat;
    } else if (v == "informative") {
      config.prior_scenario = PriorScenario::Informative;
    } else if (v == "file") {
      config.prior_scenario = PriorScenario::File;
    } else {
      throw std::invalid_argument("prior must be flat, informative or file, got '" + value + "'");
    }
  } else if (key == "prior_file") {
    config.prior_file = value;
    config.prior_scenario = PriorScenario::File;
  } else if (key == "scale_scenario") {
    auto v = lower(value);
    v.erase(std::remove(v.begin(), v.end(), '_'), v.end());
    if (v == "fixedone") {
      config.scale = FixedScale{1.0};
    } else if (v == "randomscaleprior" || v == "randomscaleprior:invgamma") {
      config.scale = random_scale_prior(false);
    } else if (v == "randomscaleprior:gamma") {
      config.scale = random_scale_prior(true);
    } else {
      throw std::invalid_argument("scale_scenario must be fixed_one or random_scale_prior[:gamma|:invgamma]");
    }
  } else if (key == "scale") {
    config.scale = parse_scale(value);
  } else if (key == "methods") {
    config.methods = parse_methods(value);
  } else if (key == "burn_in" || key == "gibbs.burn_in") {
    config.gibbs.burn_in = parse_count(value, key);
  } else if (key == "draws" || key == "n_draws" || key == "gibbs.n_draws") {
    config.gibbs.n_draws = parse_count(value, key);
  } else if (key == "bootstrap_b") {
    config.bootstrap_B = parse_count(value, key);
  } else if (key == "master_seed" || key == "seed") {
    config.master_seed = parse_count(value, key);
  } else if (key == "workers") {
    config.workers = parse_count(value, key);
  } else if (key == "max_redraws") {
    config.max_redraws = parse_count(value, key);
  } else {
    throw std::invalid_argument("unknown config key '" + std::string(key_in) + "'");
  }
}

ExperimentConfig read_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(base, body.substr(0, eq), body.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig read_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return read_config(in, std::move(base));
}

std::string describe_config(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto join = [&os](const auto& xs, auto&& f) {
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << f(xs[i]);
  };
  os << "models=";
  join(c.models, [](int m) { return std::to_string(m); });
  os << " taus=";
  join(c.taus, [](double t) { return exact(t); });
  os << " N=" << c.N << " reps=" << c.reps << " level=" << exact(c.level) << " prior_scenario="
     << (c.prior_scenario == PriorScenario::Flat ? "flat"
         : c.prior_scenario == PriorScenario::Informative ? "informative"
                                                          : "file:" + c.prior_file)
     << " scale=" << format_scale(c.scale) << " methods=";
  join(c.methods, [](Method m) { return std::string(method_name(m)); });
  os << " burn_in=" << c.gibbs.burn_in << " n_draws=" << c.gibbs.n_draws << " bootstrap_B=" << c.bootstrap_B;
  return os.str();
}

std::string Scenario::label() const {
  return "model=" + std::to_string(model.model_id) + " tau=" + fmt("%g", model.tau.value()) +
         " N=" + std::to_string(N);
}

std::vector<Scenario> make_scenarios(const ExperimentConfig& config) {
  config.validate();
  MethodSettings settings;
  settings.methods = config.methods;
  settings.level = config.level;
  settings.prior = config.prior();
  settings.gibbs = config.gibbs;
  settings.bootstrap_B = config.bootstrap_B;

  std::vector<Scenario> out;
  for (int m : config.models) {
    for (double t : config.taus) out.push_back(Scenario{ModelSpec(m, QuantileLevel{t}), config.N, settings});
  }
  return out;
}

ReplicationResult run_replication(const Scenario& scenario, std::size_t rep_index, std::uint64_t master_seed,
                                  std::size_t max_redraws) {
  const Rng rep_root = Rng(master_seed).split(rep_index);
  const std::uint64_t model_tag = static_cast<std::uint64_t>(scenario.model.model_id);
  const std::uint64_t level_tag = tau_tag(scenario.model.tau.value());

  for (std::size_t attempt = 0;; ++attempt) {
    const Rng root = rep_root.split(attempt);
    try {
      Rng cov_rng = root.split(kCovariates);
      Rng resp_rng = root.split(kResponses).split(model_tag).split(level_tag);
      const Eigen::MatrixXd design = sample_covariates(scenario.N, cov_rng);
      const Dataset data = generate_dataset(scenario.model, design, resp_rng);
      const std::uint64_t seed = root.split(kMethods).split(model_tag).derive_seed(level_tag);

      ReplicationResult result;
      result.fit = fit_methods(data, scenario.model.tau, scenario.settings, seed);
      result.redraws = attempt;
      for (Method m : kAllMethods) {
        const auto& iv = result.fit.interval(m);
        if (!iv) continue;
        auto& h = result.hits[static_cast<std::size_t>(m)];
        for (std::size_t j = 0; j < iv->size(); ++j) h.push_back(iv->contains(j, kTrueBeta.at(j)));
      }
      return result;
    } catch (const std::exception& e) {
      if (attempt >= max_redraws) {
        throw std::runtime_error(scenario.label() + " rep=" + std::to_string(rep_index) + ": failed after " +
                                 std::to_string(attempt + 1) + " attempts: " + e.what());
      }
      warn(scenario.label() + " rep=" + std::to_string(rep_index) + ": redrawing after failure: " + e.what());
    }
  }
}

const CoverageCell& CoverageReport::cell(int model_id, double tau, Method method, std::size_t coefficient) const {
  for (const auto& c : cells) {
    if (c.model_id == model_id && c.tau == tau && c.method == method && c.coefficient == coefficient) return c;
  }
  throw std::out_of_range("coverage report has no such cell");
}

CoverageReport run_experiment(const ExperimentConfig& config) {
  const auto scenarios = make_scenarios(config);
  const std::size_t reps = config.reps;
  const std::size_t jobs = scenarios.size() * reps;

  struct Slot {
    std::array<std::vector<bool>, 4> hits;
    std::array<std::vector<double>, 4> widths;
    std::size_t redraws = 0;
  };
  std::vector<Slot> slots(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  const auto worker = [&] {
    for (std::size_t job = next++; job < jobs && !failed; job = next++) {
      const auto& sc = scenarios[job / reps];
      try {
        auto r = run_replication(sc, job % reps, config.master_seed, config.max_redraws);
        Slot& s = slots[job];
        s.hits = std::move(r.hits);
        s.redraws = r.redraws;
        for (Method m : kAllMethods) {
          if (const auto& iv = r.fit.interval(m)) {
            for (std::size_t j = 0; j < iv->size(); ++j) s.widths[static_cast<std::size_t>(m)].push_back(iv->width(j));
          }
        }
      } catch (...) {
        errors[job] = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t nthreads = std::min(config.workers, jobs);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  CoverageReport report;
  report.master_seed = config.master_seed;
  report.N = config.N;
  report.reps = reps;
  report.p = 3;
  report.models = config.models;
  report.taus = config.taus;
  report.methods = config.methods;
  report.config_text = describe_config(config);

  // Aggregation runs in replication order, so sums are identical for any worker count.
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    std::size_t redraws = 0;
    for (std::size_t r = 0; r < reps; ++r) redraws += slots[s * reps + r].redraws;
    report.redraws.push_back(redraws);
    for (std::size_t j = 0; j < report.p; ++j) {
      for (Method m : config.methods) {
        const auto mi = static_cast<std::size_t>(m);
        CoverageCell c;
        c.model_id = scenarios[s].model.model_id;
        c.tau = scenarios[s].model.tau.value();
        c.method = m;
        c.coefficient = j;
        c.reps = reps;
        double len_sum = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          const Slot& slot = slots[s * reps + r];
          c.hits += slot.hits[mi].at(j) ? 1 : 0;
          len_sum += slot.widths[mi].at(j);
        }
        const double frac = static_cast<double>(c.hits) / static_cast<double>(reps);
        c.cov_pct = 100.0 * frac;
        c.len = len_sum / static_cast<double>(reps);
        c.mc_se_cov = 100.0 * std::sqrt(frac * (1.0 - frac) / static_cast<double>(reps));
        report.cells.push_back(c);
      }
    }
  }
  return report;
}

std::string format_cell(double cov_pct, double len) {
  std::string l = fmt("%.2f", len);
  while (!l.empty() && l.back() == '0') l.pop_back();
  if (!l.empty() && l.back() == '.') l.pop_back();
  if (l == "-0") l = "0";
  return "(" + fmt("%.0f", cov_pct) + "," + l + ")";
}

std::string format_report(const CoverageReport& report, ReportLayout layout) {
  if (report.cells.empty()) throw std::invalid_argument("format_report: empty report");
  std::ostringstream os;
  os << "# seed=" << report.master_seed << "\n# " << report.config_text << "\n";

  if (layout == ReportLayout::Csv) {
    os << "model,tau,coefficient,method,hits,reps,cov_pct,len,mc_se_cov,redraws\n";
    std::size_t scenario = 0;
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
      const auto& c = report.cells[i];
      scenario = i / (report.p * report.methods.size());
      os << c.model_id << ',' << exact(c.tau) << ',' << coefficient_name(c.coefficient, report.p) << ','
         << method_name(c.method) << ',' << c.hits << ',' << c.reps << ',' << exact(c.cov_pct) << ','
         << exact(c.len) << ',' << exact(c.mc_se_cov) << ',' << report.redraws.at(scenario) << '\n';
    }
    return os.str();
  }

  os << "\n| Model | tau |";
  for (std::size_t j = 0; j < report.p; ++j) {
    for (Method m : report.methods) os << ' ' << coefficient_name(j, report.p) << ' ' << method_name(m) << " |";
  }
  os << "\n|---|---|";
  for (std::size_t k = 0; k < report.p * report.methods.size(); ++k) os << "---|";
  os << '\n';
  const std::size_t per_row = report.p * report.methods.size();
  for (std::size_t row = 0; row * per_row < report.cells.size(); ++row) {
    const auto& first = report.cells[row * per_row];
    os << "| " << first.model_id << " | " << fmt("%g", first.tau) << " |";
    for (std::size_t k = 0; k < per_row; ++k) {
      const auto& c = report.cells[row * per_row + k];
      os << ' ' << format_cell(c.cov_pct, c.len) << " |";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace bqr
