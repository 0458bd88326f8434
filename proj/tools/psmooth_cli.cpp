// Command-line front end: simulate data from the built-in models, run
// Metropolised smoothing chains over them, and analyse a finished run's
// variance and efficiency. Every command is deterministic given its seed; all
// measured timings go into dedicated times*.csv files so the remaining
// outputs are byte-identical across reruns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "psmooth/discrete_hmm.hpp"
#include "psmooth/growth_model.hpp"
#include "psmooth/io.hpp"
#include "psmooth/kernels.hpp"
#include "psmooth/linear_gaussian.hpp"
#include "psmooth/mcmc.hpp"
#include "psmooth/model.hpp"
#include "psmooth/numerics.hpp"
#include "psmooth/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace psmooth;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Canonical display form ("bs:25") and filename-safe form ("bs25"). Plain
// ExtractionMode::name() drops the trajectory count, which would collide when
// one run carries several bs modes.
std::string mode_label(const ExtractionMode& m) {
  if (m.kind == ExtractionMode::Kind::BS) return "bs:" + std::to_string(m.num_trajectories);
  return m.name();
}

std::string mode_slug(const ExtractionMode& m) {
  if (m.kind == ExtractionMode::Kind::BS) return "bs" + std::to_string(m.num_trajectories);
  return m.name();
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path.string());
  return os;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

// Optional flat key=value config file per subcommand. Values fill in options
// the command line did not set, so flags always win; CLI11's own config
// reader is bypassed because it scopes keys by subcommand sections.
struct ConfigBinding {
  std::string key;
  CLI::Option* option;  // command-line presence check
  std::function<void(const std::string&)> apply;
};

long long config_int(const std::string& key, const std::string& value) {
  const double v = parse_double(value);
  const long long i = std::llround(v);
  if (static_cast<double>(i) != v)
    throw std::invalid_argument("config key '" + key + "' must be an integer");
  return i;
}

bool config_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("config key '" + key + "' must be true or false");
}

void apply_config_file(const std::string& path, const std::vector<ConfigBinding>& bindings) {
  for (const auto& [key, value] : read_key_value_file(path)) {
    const auto it = std::find_if(bindings.begin(), bindings.end(),
                                 [&key](const ConfigBinding& b) { return b.key == key; });
    if (it == bindings.end())
      throw std::invalid_argument("unknown config key '" + key + "' in " + path);
    if (it->option == nullptr || it->option->count() == 0) it->apply(value);
  }
}

// ---------------------------------------------------------------------------
// Model registry: growth | lg | hmm, parameters from a flat key=value map.

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
  if (out.empty()) throw std::invalid_argument("empty number list");
  return out;
}

std::vector<double> parse_matrix(const std::string& text, int* n_cols) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string row;
  *n_cols = 0;
  while (std::getline(ss, row, ';')) {
    const auto vals = parse_list(row);
    if (*n_cols == 0)
      *n_cols = static_cast<int>(vals.size());
    else if (static_cast<int>(vals.size()) != *n_cols)
      throw std::invalid_argument("matrix rows must have equal length");
    out.insert(out.end(), vals.begin(), vals.end());
  }
  if (out.empty()) throw std::invalid_argument("empty matrix");
  return out;
}

std::string serialize_list(const std::vector<double>& vals, int n_cols) {
  std::string out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i > 0) out += (n_cols > 0 && i % static_cast<std::size_t>(n_cols) == 0) ? ';' : ',';
    out += format_double(vals[i]);
  }
  return out;
}

using ParamMap = std::map<std::string, std::string>;

double get_num(const ParamMap& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : parse_double(it->second);
}

int get_int(const ParamMap& p, const std::string& key, int fallback) {
  const double v = get_num(p, key, fallback);
  const int i = static_cast<int>(std::llround(v));
  if (static_cast<double>(i) != v) throw std::invalid_argument(key + " must be an integer");
  return i;
}

void check_keys(const ParamMap& p, const std::string& model,
                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : p) {
    (void)value;
    if (key.rfind("pmmh_", 0) == 0) continue;
    if (std::find_if(known.begin(), known.end(),
                     [&key](const char* k) { return key == k; }) == known.end())
      throw std::invalid_argument("unknown parameter '" + key + "' for model '" + model + "'");
  }
}

GrowthModelParams growth_params(const ParamMap& p) {
  check_keys(p, "growth", {"sigma0_sq", "sigmaV_sq", "sigmaW_sq"});
  GrowthModelParams gp;
  gp.sigma0_sq = get_num(p, "sigma0_sq", gp.sigma0_sq);
  gp.sigmaV_sq = get_num(p, "sigmaV_sq", gp.sigmaV_sq);
  gp.sigmaW_sq = get_num(p, "sigmaW_sq", gp.sigmaW_sq);
  return gp;
}

LinearGaussianParams lg_params(const ParamMap& p) {
  check_keys(p, "lg", {"phi", "state_noise_var", "obs_coeff", "obs_noise_var", "init_mean",
                       "init_var"});
  LinearGaussianParams lp;
  lp.phi = get_num(p, "phi", lp.phi);
  lp.state_noise_var = get_num(p, "state_noise_var", lp.state_noise_var);
  lp.obs_coeff = get_num(p, "obs_coeff", lp.obs_coeff);
  lp.obs_noise_var = get_num(p, "obs_noise_var", lp.obs_noise_var);
  lp.init_mean = get_num(p, "init_mean", lp.init_mean);
  lp.init_var = get_num(p, "init_var", lp.init_var);
  return lp;
}

DiscreteHmmParams hmm_params(const ParamMap& p) {
  check_keys(p, "hmm", {"n_states", "n_symbols", "initial", "transition", "emission"});
  DiscreteHmmParams hp;
  hp.n_states = get_int(p, "n_states", 2);
  hp.n_symbols = get_int(p, "n_symbols", 2);
  hp.initial = p.count("initial") ? parse_list(p.at("initial"))
                                  : std::vector<double>{0.5, 0.5};
  int cols = 0;
  hp.transition = p.count("transition") ? parse_matrix(p.at("transition"), &cols)
                                        : std::vector<double>{0.8, 0.2, 0.2, 0.8};
  hp.emission = p.count("emission") ? parse_matrix(p.at("emission"), &cols)
                                    : std::vector<double>{0.9, 0.1, 0.1, 0.9};
  return hp;
}

void require_model_name(const std::string& name) {
  if (name != "growth" && name != "lg" && name != "hmm")
    throw std::invalid_argument("unknown model '" + name + "' (expected growth, lg or hmm)");
}

std::unique_ptr<StateSpaceModel> make_model(const std::string& name, const ParamMap& p,
                                            ObservationRecord obs) {
  require_model_name(name);
  if (name == "growth") {
    auto gp = growth_params(p);
    gp.validate();
    return std::make_unique<GrowthModel>(gp, std::move(obs));
  }
  if (name == "lg") {
    auto lp = lg_params(p);
    lp.validate();
    return std::make_unique<LinearGaussianModel>(lp, std::move(obs));
  }
  auto hp = hmm_params(p);
  hp.validate();
  return std::make_unique<DiscreteHmmModel>(hp, std::move(obs));
}

SimulatedPath run_simulation(const std::string& name, const ParamMap& p, int n, Rng& rng) {
  require_model_name(name);
  if (name == "growth") return simulate_growth(growth_params(p), n, rng);
  if (name == "lg") return simulate_linear_gaussian(lg_params(p), n, rng);
  return simulate_hmm(hmm_params(p), n, rng);
}

// Resolved parameter values (defaults filled in), for the run_config echo.
std::vector<std::pair<std::string, std::string>> echo_params(const std::string& name,
                                                             const ParamMap& p) {
  std::vector<std::pair<std::string, std::string>> out;
  if (name == "growth") {
    const auto gp = growth_params(p);
    out.emplace_back("param_sigma0_sq", format_double(gp.sigma0_sq));
    out.emplace_back("param_sigmaV_sq", format_double(gp.sigmaV_sq));
    out.emplace_back("param_sigmaW_sq", format_double(gp.sigmaW_sq));
  } else if (name == "lg") {
    const auto lp = lg_params(p);
    out.emplace_back("param_phi", format_double(lp.phi));
    out.emplace_back("param_state_noise_var", format_double(lp.state_noise_var));
    out.emplace_back("param_obs_coeff", format_double(lp.obs_coeff));
    out.emplace_back("param_obs_noise_var", format_double(lp.obs_noise_var));
    out.emplace_back("param_init_mean", format_double(lp.init_mean));
    out.emplace_back("param_init_var", format_double(lp.init_var));
  } else {
    const auto hp = hmm_params(p);
    out.emplace_back("param_n_states", std::to_string(hp.n_states));
    out.emplace_back("param_n_symbols", std::to_string(hp.n_symbols));
    out.emplace_back("param_initial", serialize_list(hp.initial, 0));
    out.emplace_back("param_transition", serialize_list(hp.transition, hp.n_states));
    out.emplace_back("param_emission", serialize_list(hp.emission, hp.n_symbols));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter-chain (pmmh) plumbing. One scalar model parameter is sampled;
// which one, its prior and its random-walk proposal come from pmmh_* keys in
// the parameter file:
//   pmmh_param   = sigmaV_sq
//   pmmh_prior   = flat | flat:lo:hi | normal:mu:sigma | lognormal:mu:sigma
//                  | inverse_gamma:shape:rate
//   pmmh_rw_sd   = 0.1
//   pmmh_walk    = linear | log
//   pmmh_init    = starting value (default: the parameter file's value)

struct PmmhSetup {
  std::string param_name;
  std::string prior_spec = "flat";
  std::string walk = "linear";
  double rw_sd = 0.1;
  double init = 0.0;
};

std::function<double(double)> parse_prior(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty()) throw std::invalid_argument("empty prior spec");

  const auto arg = [&parts, &spec](std::size_t i) {
    if (i >= parts.size()) throw std::invalid_argument("prior spec needs more arguments: " + spec);
    return parse_double(parts[i]);
  };

  if (parts[0] == "flat") {
    if (parts.size() == 1) return [](double) { return 0.0; };
    const double lo = arg(1), hi = arg(2);
    if (!(lo < hi)) throw std::invalid_argument("flat prior needs lo < hi");
    return [lo, hi](double t) { return (t < lo || t > hi) ? kNegInf : 0.0; };
  }
  if (parts[0] == "normal") {
    const double mu = arg(1), sigma = arg(2);
    if (sigma <= 0.0) throw std::invalid_argument("normal prior needs sigma > 0");
    return [mu, v = sigma * sigma](double t) { return gaussian_logpdf(t, mu, v); };
  }
  if (parts[0] == "lognormal") {
    const double mu = arg(1), sigma = arg(2);
    if (sigma <= 0.0) throw std::invalid_argument("lognormal prior needs sigma > 0");
    return [mu, v = sigma * sigma](double t) {
      return t <= 0.0 ? kNegInf : gaussian_logpdf(std::log(t), mu, v) - std::log(t);
    };
  }
  if (parts[0] == "inverse_gamma") {
    const double a = arg(1), b = arg(2);
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("inverse_gamma prior needs a, b > 0");
    const double log_norm = a * std::log(b) - std::lgamma(a);
    return [a, b, log_norm](double t) {
      return t <= 0.0 ? kNegInf : log_norm - (a + 1.0) * std::log(t) - b / t;
    };
  }
  throw std::invalid_argument("unknown prior '" + parts[0] +
                              "' (expected flat, normal, lognormal or inverse_gamma)");
}

// Values the model construction itself rejects; the prior support excludes
// them so the factory is never called on an invalid parameter.
std::function<bool(double)> structural_support(const std::string& model, const std::string& key) {
  static const std::map<std::string, std::vector<std::string>> positive = {
      {"growth", {"sigma0_sq", "sigmaV_sq", "sigmaW_sq"}},
      {"lg", {"state_noise_var", "obs_noise_var", "init_var"}},
  };
  const auto it = positive.find(model);
  if (it != positive.end() &&
      std::find(it->second.begin(), it->second.end(), key) != it->second.end())
    return [](double t) { return t > 0.0; };
  return [](double) { return true; };
}

PmmhSetup pmmh_setup(const std::string& model_name, const ParamMap& p) {
  if (model_name == "hmm")
    throw std::invalid_argument("the pmmh sampler supports scalar parameters only; "
                                "model 'hmm' has none");
  const auto it = p.find("pmmh_param");
  if (it == p.end())
    throw std::invalid_argument("sampler pmmh needs pmmh_param=<name> in the parameter file");
  PmmhSetup s;
  s.param_name = it->second;

  const auto resolved = echo_params(model_name, p);
  double current = kNaN;
  for (const auto& [key, value] : resolved)
    if (key == "param_" + s.param_name) current = parse_double(value);
  if (std::isnan(current) && s.param_name != "nan")
    throw std::invalid_argument("pmmh_param '" + s.param_name + "' is not a parameter of model '" +
                                model_name + "'");

  if (p.count("pmmh_prior")) s.prior_spec = p.at("pmmh_prior");
  if (p.count("pmmh_walk")) s.walk = p.at("pmmh_walk");
  if (s.walk != "linear" && s.walk != "log")
    throw std::invalid_argument("pmmh_walk must be linear or log");
  s.rw_sd = get_num(p, "pmmh_rw_sd", s.rw_sd);
  if (s.rw_sd <= 0.0) throw std::invalid_argument("pmmh_rw_sd must be > 0");
  s.init = get_num(p, "pmmh_init", current);
  if (s.walk == "log" && s.init <= 0.0)
    throw std::invalid_argument("pmmh_walk=log needs a positive starting value");
  return s;
}

ParameterModel make_param_model(const PmmhSetup& s, const std::string& model_name) {
  ParameterModel pm;
  const auto prior = parse_prior(s.prior_spec);
  const auto structural = structural_support(model_name, s.param_name);
  pm.prior_logdensity = [prior, structural](std::span<const double> theta) {
    return structural(theta[0]) ? prior(theta[0]) : kNegInf;
  };
  const double v = s.rw_sd * s.rw_sd;
  if (s.walk == "linear") {
    pm.propose = [v](std::span<const double> theta, Rng& rng) {
      return std::vector<double>{theta[0] + rng.normal(0.0, v)};
    };
    pm.proposal_logdensity = [v](std::span<const double> from, std::span<const double> to) {
      return gaussian_logpdf(to[0], from[0], v);
    };
  } else {
    // Multiplicative walk theta' = theta exp(s Z); density in theta space
    // carries the 1/theta' Jacobian.
    pm.propose = [sd = s.rw_sd](std::span<const double> theta, Rng& rng) {
      return std::vector<double>{theta[0] * std::exp(sd * rng.normal())};
    };
    pm.proposal_logdensity = [v](std::span<const double> from, std::span<const double> to) {
      if (from[0] <= 0.0 || to[0] <= 0.0) return kNegInf;
      return gaussian_logpdf(std::log(to[0]), std::log(from[0]), v) - std::log(to[0]);
    };
  }
  return pm;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string model;
  std::string params_path;
  std::string out_dir;
  int n = 50;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void cmd_simulate(const SimulateArgs& args) {
  const ParamMap params = args.params_path.empty() ? ParamMap{}
                                                   : read_key_value_file(args.params_path);
  const std::uint64_t seed = args.seed_set ? args.seed : entropy_seed();
  std::cout << "seed: " << seed << "\n";

  Rng rng(seed);
  const SimulatedPath path = run_simulation(args.model, params, args.n, rng);

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  const int state_dim = static_cast<int>(path.states.size()) / path.obs.size();
  write_observations_csv((dir / "observations.csv").string(), path.obs);
  write_trajectory_csv((dir / "latent.csv").string(), path.states, state_dim);
  std::cout << "wrote " << (dir / "observations.csv").string() << " and "
            << (dir / "latent.csv").string() << " (" << path.obs.size() << " rows)\n";
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  std::string model;
  std::string params_path;
  std::string data_path;
  std::string sampler = "imh";
  std::vector<std::string> mode_texts;
  std::string out_dir;
  int particles = 500;
  int sweeps = 5000;
  int traj = 25;
  int burn_in = 0;
  int max_rej = 15;
  int chains = 1;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool dump_trace = false;
  bool dump_trajectories = false;
};

struct ChainOutcome {
  std::string summary;
  std::string warning;  // empty when clean
};

ChainOutcome run_one_chain(const RunArgs& args, const ParamMap& params,
                           const ObservationRecord& obs,
                           const std::vector<ExtractionMode>& modes, int chain_index,
                           std::uint64_t chain_seed, const fs::path& dir) {
  fs::create_directories(dir);

  ChainConfig config;
  config.sampler = args.sampler == "pmmh" ? ChainConfig::Sampler::PMMH
                                          : ChainConfig::Sampler::IMH;
  config.modes = modes;
  config.n_particles = args.particles;
  config.n_sweeps = args.sweeps;
  config.seed = chain_seed;
  config.burn_in = args.burn_in;
  config.max_rejections = args.max_rej;
  config.keep_trajectories = args.dump_trajectories;

  std::unique_ptr<StateSpaceModel> model;
  std::optional<PmmhSetup> pmmh;
  if (config.sampler == ChainConfig::Sampler::PMMH) {
    pmmh = pmmh_setup(args.model, params);
    config.theta_init = {pmmh->init};
    config.param_model = make_param_model(*pmmh, args.model);
    // Rebuild the model with the sampled value substituted into the map; the
    // textual round-trip is lossless because format_double is.
    config.factory = [model_name = args.model, params, key = pmmh->param_name,
                      &obs](std::span<const double> theta) {
      ParamMap p = params;
      p[key] = format_double(theta[0]);
      return make_model(model_name, p, obs);
    };
  } else {
    model = make_model(args.model, params, obs);
  }

  const int n = obs.size() - 1;
  const std::size_t n_modes = modes.size();

  auto chain_csv = open_output(dir / "chain.csv");
  chain_csv << "sweep,accepted,log_z,log_z_proposed,max_log_weight";
  if (pmmh) chain_csv << "," << pmmh->param_name;
  chain_csv << "\n";
  auto times_csv = open_output(dir / "times.csv");
  times_csv << "sweep,tau_pf_s,tau_bs_s\n";

  std::vector<std::ofstream> stream_csv, mode_times_csv;
  std::vector<std::optional<std::ofstream>> var_csv(n_modes), traj_csv(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    const std::string slug = mode_slug(modes[m]);
    stream_csv.push_back(open_output(dir / ("stream_" + slug + ".csv")));
    stream_csv.back() << "sweep,k,value\n";
    mode_times_csv.push_back(open_output(dir / ("times_" + slug + ".csv")));
    mode_times_csv.back() << "sweep,tau_s\n";
    if (modes[m].kind == ExtractionMode::Kind::BS && modes[m].num_trajectories >= 2) {
      var_csv[m].emplace(open_output(dir / ("stream_" + slug + "_var.csv")));
      *var_csv[m] << "sweep,k,value\n";
    }
    const bool trajectory_valued = modes[m].kind == ExtractionMode::Kind::GT ||
                                   modes[m].kind == ExtractionMode::Kind::BS;
    if (args.dump_trajectories && trajectory_valued) {
      traj_csv[m].emplace(open_output(dir / ("trajectories_" + slug + ".csv")));
      *traj_csv[m] << "sweep,j,k,x\n";  // state_dim is 1 for every built-in model
    }
  }

  // Post-burn-in running sums; estimates_<mode>.csv is their mean, so no
  // per-sweep matrix is ever kept in memory.
  std::vector<std::vector<double>> sums(n_modes, std::vector<double>(n + 1, 0.0));
  long long used_sweeps = 0;

  config.on_sweep = [&](const SweepRecord& rec) {
    const std::string sweep = std::to_string(rec.sweep);
    chain_csv << sweep << ',' << (rec.accepted ? 1 : 0) << ',' << format_double(rec.log_z) << ','
              << format_double(rec.log_z_proposed) << ',' << format_double(rec.max_log_weight);
    if (pmmh) chain_csv << ',' << format_double(rec.theta.at(0));
    chain_csv << '\n';
    times_csv << sweep << ',' << format_double(rec.tau_pf_s) << ','
              << format_double(rec.tau_bs_s) << '\n';

    const bool used = rec.sweep >= args.burn_in;
    if (used) ++used_sweeps;
    for (std::size_t m = 0; m < n_modes; ++m) {
      const ModeOutput& out = rec.modes[m];
      for (int k = 0; k <= n; ++k) {
        stream_csv[m] << sweep << ',' << k << ',' << format_double(out.estimate[k]) << '\n';
        if (used) sums[m][k] += out.estimate[k];
      }
      mode_times_csv[m] << sweep << ',' << format_double(out.tau_s) << '\n';
      if (var_csv[m])
        for (int k = 0; k <= n; ++k)
          *var_csv[m] << sweep << ',' << k << ',' << format_double(out.within_variance[k])
                      << '\n';
      if (traj_csv[m])
        for (std::size_t j = 0; j < out.trajectories.size(); ++j)
          for (int k = 0; k <= n; ++k)
            *traj_csv[m] << sweep << ',' << j << ',' << k << ','
                         << format_double(out.trajectories[j][k]) << '\n';
    }
  };

  const ChainResult result = run_chain(config, model.get());

  for (std::size_t m = 0; m < n_modes; ++m) {
    std::vector<double> means(sums[m].size());
    for (std::size_t k = 0; k < means.size(); ++k)
      means[k] = used_sweeps > 0 ? sums[m][k] / static_cast<double>(used_sweeps) : kNaN;
    write_estimates_csv((dir / ("estimates_" + mode_slug(modes[m]) + ".csv")).string(), means);
  }
  if (args.dump_trace && result.final_trace)
    write_trace_csv((dir / "trace.csv").string(), *result.final_trace);

  std::string mode_list;
  for (std::size_t m = 0; m < n_modes; ++m)
    mode_list += (m ? "," : "") + mode_label(modes[m]);
  auto config_txt = open_output(dir / "run_config.txt");
  std::vector<std::pair<std::string, std::string>> kv = {
      {"model", args.model},
      {"data", args.data_path},
      {"sampler", args.sampler},
      {"modes", mode_list},
      {"particles", std::to_string(args.particles)},
      {"sweeps", std::to_string(args.sweeps)},
      {"seed", std::to_string(chain_seed)},
      {"burn_in", std::to_string(args.burn_in)},
      {"max_rejections", std::to_string(args.max_rej)},
      {"chains", std::to_string(args.chains)},
      {"chain_index", std::to_string(chain_index)},
      {"horizon", std::to_string(n)},
      {"state_dim", "1"},
  };
  for (auto& pr : echo_params(args.model, params)) kv.push_back(std::move(pr));
  if (pmmh) {
    kv.emplace_back("pmmh_param", pmmh->param_name);
    kv.emplace_back("pmmh_prior", pmmh->prior_spec);
    kv.emplace_back("pmmh_walk", pmmh->walk);
    kv.emplace_back("pmmh_rw_sd", format_double(pmmh->rw_sd));
    kv.emplace_back("pmmh_init", format_double(pmmh->init));
  }
  for (const auto& [key, value] : kv) config_txt << key << '=' << value << '\n';

  ChainOutcome outcome;
  char line[256];
  const std::string prefix =
      args.chains > 1 ? "chain " + std::to_string(chain_index) + ": " : "";
  if (result.is_stats.proposals > 0)
    std::snprintf(line, sizeof line, "%sacceptance rate %.4f, IS acceptance rate %.4f",
                  prefix.c_str(), result.acceptance_rate(), result.is_acceptance_rate());
  else
    std::snprintf(line, sizeof line, "%sacceptance rate %.4f, IS acceptance rate n/a",
                  prefix.c_str(), result.acceptance_rate());
  outcome.summary = line;
  if (result.weight_growth_warning)
    outcome.warning = "warning: " + (prefix.empty() ? std::string("chain") : prefix) +
                      " per-sweep max log weight kept growing; "
                      "estimates may not have stabilised";
  return outcome;
}

void cmd_run(const RunArgs& args) {
  require(args.particles >= 1, "--particles must be >= 1");
  require(args.sweeps >= 1, "--sweeps must be >= 1");
  require(args.traj >= 1, "--traj must be >= 1");
  require(args.burn_in >= 0, "--burn-in must be >= 0");
  require(args.max_rej >= 1, "--max-rej must be >= 1");
  require(args.chains >= 1, "--chains must be >= 1");
  require(args.threads >= 0, "--threads must be >= 0");
  require(args.burn_in < args.sweeps, "burn-in must be smaller than the sweep count");
  if (args.sampler != "imh" && args.sampler != "pmmh")
    throw std::invalid_argument("unknown sampler '" + args.sampler + "' (expected imh or pmmh)");

#ifdef _OPENMP
  if (args.threads > 1) omp_set_num_threads(args.threads);
#endif
  if (args.threads == 1) kernels::set_parallel(false);

  const ParamMap params = args.params_path.empty() ? ParamMap{}
                                                   : read_key_value_file(args.params_path);
  const ObservationRecord obs = read_observations_csv(args.data_path);

  std::vector<std::string> texts = args.mode_texts;
  if (texts.empty()) texts = {"gt", "gtrb", "bs", "bsm"};
  std::vector<ExtractionMode> modes;
  for (const auto& t : texts) {
    ExtractionMode m = ExtractionMode::parse(t);
    if (t == "bs") m.num_trajectories = args.traj;
    modes.push_back(m);
  }
  for (std::size_t a = 0; a < modes.size(); ++a)
    for (std::size_t b = a + 1; b < modes.size(); ++b)
      if (mode_slug(modes[a]) == mode_slug(modes[b]))
        throw std::invalid_argument("duplicate extraction mode: " + mode_label(modes[a]));

  // Fail on a bad model/parameter combination before any chain starts.
  if (args.sampler == "pmmh")
    pmmh_setup(args.model, params);
  else
    make_model(args.model, params, obs);

  const std::uint64_t seed = args.seed_set ? args.seed : entropy_seed();
  std::cout << "seed: " << seed << "\n";

  const fs::path out(args.out_dir);
  std::vector<ChainOutcome> outcomes(args.chains);
  std::vector<std::exception_ptr> errors(args.chains);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (args.chains > 1)
#endif
  for (int c = 0; c < args.chains; ++c) {
    try {
      const std::uint64_t chain_seed =
          args.chains == 1 ? seed : Rng(seed).substream(static_cast<std::uint64_t>(c)).seed();
      const fs::path dir = args.chains == 1 ? out : out / ("chain" + std::to_string(c));
      outcomes[c] = run_one_chain(args, params, obs, modes, c, chain_seed, dir);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  for (const auto& outcome : outcomes) {
    if (!outcome.warning.empty()) std::cerr << outcome.warning << "\n";
    std::cout << outcome.summary << "\n";
  }
  std::cout << "outputs in " << out.string() << "\n";
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::string run_dir;
  std::string out_dir;  // defaults to run_dir
  int burn_in = -1;     // defaults to the run's own burn-in
};

struct ModeSeries {
  ExtractionMode mode;
  std::vector<std::vector<double>> per_k;      // [k][used sweep]
  std::vector<std::vector<double>> var_per_k;  // BS within-sweep variances
  double total_tau_s = 0.0;                    // extraction time over used sweeps
};

// Rows of a sweep-indexed long CSV, restricted to sweeps >= burn_in.
std::vector<std::vector<double>> load_stream(const fs::path& path, int horizon, int burn_in) {
  const CsvTable table = read_csv(path.string());
  const int sweep_col = table.column("sweep");
  const int k_col = table.column("k");
  const int value_col = table.column("value");
  if (sweep_col < 0 || k_col < 0 || value_col < 0)
    throw std::runtime_error("malformed stream file: " + path.string());
  std::vector<std::vector<double>> per_k(static_cast<std::size_t>(horizon) + 1);
  for (const auto& row : table.rows) {
    if (row[static_cast<std::size_t>(sweep_col)] < burn_in) continue;
    const long long k = std::llround(row[static_cast<std::size_t>(k_col)]);
    if (k < 0 || k > horizon) throw std::runtime_error("malformed stream file: " + path.string());
    per_k[static_cast<std::size_t>(k)].push_back(row[static_cast<std::size_t>(value_col)]);
  }
  return per_k;
}

void cmd_analyze(const AnalyzeArgs& args) {
  const fs::path dir(args.run_dir);
  if (!fs::exists(dir / "run_config.txt")) {
    if (fs::exists(dir / "chain0" / "run_config.txt"))
      throw std::invalid_argument(dir.string() +
                                  " holds multiple chains; analyze one chain directory, e.g. " +
                                  (dir / "chain0").string());
    throw std::invalid_argument("not a run directory (no run_config.txt): " + dir.string());
  }
  const ParamMap config = read_key_value_file((dir / "run_config.txt").string());
  const auto need = [&config](const std::string& key) {
    const auto it = config.find(key);
    if (it == config.end())
      throw std::runtime_error("run_config.txt is missing the key '" + key + "'");
    return it->second;
  };

  const int horizon = get_int(config, "horizon", -1);
  if (horizon < 0) throw std::runtime_error("run_config.txt is missing the key 'horizon'");
  const int burn_in = args.burn_in >= 0 ? args.burn_in : get_int(config, "burn_in", 0);

  std::vector<ExtractionMode> configured;
  {
    std::stringstream ss(need("modes"));
    std::string item;
    while (std::getline(ss, item, ',')) configured.push_back(ExtractionMode::parse(item));
  }

  // Filter timing, shared by every method's cost accounting.
  const CsvTable times = read_csv((dir / "times.csv").string());
  const int t_sweep = times.column("sweep");
  const int t_pf = times.column("tau_pf_s");
  if (t_sweep < 0 || t_pf < 0) throw std::runtime_error("malformed times.csv");
  double total_pf_s = 0.0;
  long long pf_rows = 0;
  for (const auto& row : times.rows) {
    if (row[static_cast<std::size_t>(t_sweep)] < burn_in) continue;
    total_pf_s += row[static_cast<std::size_t>(t_pf)];
    ++pf_rows;
  }

  std::vector<ModeSeries> loaded;
  for (const auto& mode : configured) {
    const std::string slug = mode_slug(mode);
    const fs::path stream_path = dir / ("stream_" + slug + ".csv");
    if (!fs::exists(stream_path)) {
      std::cerr << "warning: no output for mode " << mode_label(mode) << " in " << dir.string()
                << ", skipping\n";
      continue;
    }
    ModeSeries series;
    series.mode = mode;
    series.per_k = load_stream(stream_path, horizon, burn_in);

    const CsvTable mode_times = read_csv((dir / ("times_" + slug + ".csv")).string());
    const int m_sweep = mode_times.column("sweep");
    const int m_tau = mode_times.column("tau_s");
    if (m_sweep < 0 || m_tau < 0) throw std::runtime_error("malformed times_" + slug + ".csv");
    for (const auto& row : mode_times.rows)
      if (row[static_cast<std::size_t>(m_sweep)] >= burn_in)
        series.total_tau_s += row[static_cast<std::size_t>(m_tau)];

    const fs::path var_path = dir / ("stream_" + slug + "_var.csv");
    if (fs::exists(var_path)) series.var_per_k = load_stream(var_path, horizon, burn_in);
    loaded.push_back(std::move(series));
  }
  if (loaded.empty()) throw std::runtime_error("no mode outputs found in " + dir.string());

  const long long r_used = static_cast<long long>(loaded.front().per_k.front().size());
  if (r_used < 4)
    throw std::invalid_argument("need at least 4 post-burn-in sweeps to estimate variances; got " +
                                std::to_string(r_used));

  // Backward-smoothing marginal stream: its per-time TAVC is the
  // between-sweep term of the combined bs variance (sigma_sq / J + tavc) / R.
  const ModeSeries* bsm = nullptr;
  for (const auto& series : loaded)
    if (series.mode.kind == ExtractionMode::Kind::BSM) {
      bsm = &series;
      break;
    }
  std::vector<double> bsm_tavc;
  if (bsm) {
    bsm_tavc.resize(static_cast<std::size_t>(horizon) + 1);
    for (int k = 0; k <= horizon; ++k)
      bsm_tavc[static_cast<std::size_t>(k)] = tavc(bsm->per_k[static_cast<std::size_t>(k)]).value;
  }

  VarianceReport report;
  // per mode: per-k variance and efficiency, reused by the ratio table
  std::vector<std::vector<double>> efficiencies(loaded.size());
  std::vector<double> bs_j_opts;  // first bs mode only
  const ModeSeries* first_bs = nullptr;

  for (std::size_t m = 0; m < loaded.size(); ++m) {
    const ModeSeries& series = loaded[m];
    const bool is_bs = series.mode.kind == ExtractionMode::Kind::BS;
    const int j = series.mode.num_trajectories;
    const double total_time_s = total_pf_s + series.total_tau_s;
    const double tau_pf_mean = pf_rows > 0 ? total_pf_s / static_cast<double>(pf_rows) : 0.0;
    const double tau_bs_per_traj =
        r_used > 0 && j > 0 ? series.total_tau_s / static_cast<double>(r_used * j) : 0.0;
    if (is_bs && first_bs == nullptr) first_bs = &series;
    efficiencies[m].resize(static_cast<std::size_t>(horizon) + 1, kNaN);

    for (int k = 0; k <= horizon; ++k) {
      const auto& values = series.per_k[static_cast<std::size_t>(k)];
      const TavcEstimate own_tavc = tavc(values);
      VarianceReportRow row;
      row.k = k;
      row.method = mode_label(series.mode);
      row.sigma_sq = kNaN;
      row.j_opt = kNaN;
      report.tavc_floored = report.tavc_floored || own_tavc.floored;
      report.tavc_nonstationary = report.tavc_nonstationary || own_tavc.nonstationary;

      double variance = kNaN;
      if (is_bs) {
        if (!series.var_per_k.empty())
          row.sigma_sq = mean(series.var_per_k[static_cast<std::size_t>(k)]);
        if (bsm) {
          const double tavc_bsm = bsm_tavc[static_cast<std::size_t>(k)];
          const double sigma_sq = std::isnan(row.sigma_sq) ? 0.0 : row.sigma_sq;
          variance = estimator_variance(sigma_sq, tavc_bsm, j, static_cast<int>(r_used));
          row.tavc = tavc_bsm;
          if (row.sigma_sq > 0.0 && tavc_bsm > 0.0 && tau_bs_per_traj > 0.0 &&
              tau_pf_mean > 0.0) {
            row.j_opt = j_opt(row.sigma_sq, tavc_bsm, tau_bs_per_traj, tau_pf_mean);
            if (&series == first_bs) bs_j_opts.push_back(row.j_opt);
          }
        } else {
          variance = own_tavc.value / static_cast<double>(r_used);
          row.tavc = own_tavc.value;
        }
      } else {
        variance = own_tavc.value / static_cast<double>(r_used);
        row.tavc = own_tavc.value;
      }
      row.std_err = variance >= 0.0 ? std::sqrt(variance) : kNaN;
      row.efficiency =
          variance > 0.0 && total_time_s > 0.0 ? efficiency(variance, total_time_s) : kNaN;
      efficiencies[m][static_cast<std::size_t>(k)] = row.efficiency;
      report.rows.push_back(std::move(row));
    }
  }

  const fs::path out_dir(args.out_dir.empty() ? args.run_dir : args.out_dir);
  fs::create_directories(out_dir);
  write_variance_report_csv((out_dir / "variance_report.csv").string(), report);

  // Pairwise efficiency-ratio table over time points where both methods have
  // a positive finite efficiency.
  struct RatioRow {
    std::string a, b;
    double min = kNaN, max = kNaN, geo_mean = kNaN;
    long long above_one = 0, n_times = 0;
  };
  std::vector<RatioRow> ratio_rows;
  for (std::size_t a = 0; a < loaded.size(); ++a)
    for (std::size_t b = 0; b < loaded.size(); ++b) {
      if (a == b) continue;
      RatioRow row;
      row.a = mode_label(loaded[a].mode);
      row.b = mode_label(loaded[b].mode);
      std::vector<double> ratios;
      for (int k = 0; k <= horizon; ++k) {
        const double ea = efficiencies[a][static_cast<std::size_t>(k)];
        const double eb = efficiencies[b][static_cast<std::size_t>(k)];
        if (std::isfinite(ea) && std::isfinite(eb) && ea > 0.0 && eb > 0.0)
          ratios.push_back(ea / eb);
      }
      row.n_times = static_cast<long long>(ratios.size());
      if (!ratios.empty()) {
        row.min = *std::min_element(ratios.begin(), ratios.end());
        row.max = *std::max_element(ratios.begin(), ratios.end());
        row.geo_mean = geometric_mean(ratios);
        for (double r : ratios)
          if (r > 1.0) ++row.above_one;
      }
      ratio_rows.push_back(std::move(row));
    }
  {
    auto os = open_output(out_dir / "efficiency_ratios.csv");
    os << "method_a,method_b,min_ratio,max_ratio,geometric_mean,count_above_one,n_times\n";
    for (const auto& row : ratio_rows)
      os << row.a << ',' << row.b << ',' << format_double(row.min) << ','
         << format_double(row.max) << ',' << format_double(row.geo_mean) << ',' << row.above_one
         << ',' << row.n_times << '\n';
  }

  // Human-readable summary, mirrored to stdout and summary.txt.
  std::ostringstream summary;
  summary << "run: " << dir.string() << "\n";
  summary << "sweeps used: " << r_used << " (burn-in " << burn_in << " of " << need("sweeps")
          << ")\n";
  summary << "mean filter time per sweep: "
          << fmt(pf_rows > 0 ? total_pf_s / static_cast<double>(pf_rows) : kNaN) << " s\n";
  for (std::size_t m = 0; m < loaded.size(); ++m) {
    double se_sum = 0.0;
    int se_count = 0;
    for (const auto& row : report.rows)
      if (row.method == mode_label(loaded[m].mode) && std::isfinite(row.std_err)) {
        se_sum += row.std_err;
        ++se_count;
      }
    summary << mode_label(loaded[m].mode) << ": mean std err "
            << fmt(se_count > 0 ? se_sum / se_count : kNaN) << ", total time "
            << fmt(total_pf_s + loaded[m].total_tau_s) << " s\n";
  }
  if (report.tavc_floored)
    summary << "note: some autocovariance sums were negative and floored at zero\n";
  if (report.tavc_nonstationary)
    summary << "note: some series look nonstationary; increase sweeps or burn-in\n";
  if (!bs_j_opts.empty()) {
    const int rec = recommended_j(bs_j_opts);
    summary << "recommended J (" << mode_label(first_bs->mode) << "): " << rec << "\n";
  }
  if (ratio_rows.empty()) {
    summary << "efficiency ratios: none (single mode)\n";
  } else {
    summary << "efficiency ratios (per-time, method a vs method b):\n";
    for (const auto& row : ratio_rows)
      summary << "  " << row.a << " / " << row.b << ": min " << fmt(row.min) << ", max "
              << fmt(row.max) << ", geometric mean " << fmt(row.geo_mean) << ", "
              << row.above_one << "/" << row.n_times << " above one\n";
  }
  auto summary_txt = open_output(out_dir / "summary.txt");
  summary_txt << summary.str();
  std::cout << summary.str();
  std::cout << "report in " << (out_dir / "variance_report.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle smoothing experiments: simulate data, run Metropolised smoothing "
               "chains, analyse a run's variance and efficiency."};
  app.require_subcommand(1);

  SimulateArgs sim;
  std::string sim_config;
  auto* simulate = app.add_subcommand("simulate", "Draw a latent path and observations");
  simulate->add_option("--config", sim_config, "Flat key=value config file; flags override");
  auto* sim_model = simulate->add_option("--model", sim.model, "Model: growth, lg or hmm");
  auto* sim_params =
      simulate->add_option("--params", sim.params_path, "Model parameter file (key=value lines)");
  auto* sim_n = simulate->add_option("--n", sim.n, "Number of observations")->default_val(50);
  auto* sim_seed = simulate->add_option("--seed", sim.seed, "Random seed (default: entropy)");
  auto* sim_out = simulate->add_option("--out", sim.out_dir, "Output directory");
  simulate->callback([&] {
    sim.seed_set = sim_seed->count() > 0;
    if (!sim_config.empty()) {
      const std::vector<ConfigBinding> bindings = {
          {"model", sim_model, [&](const std::string& v) { sim.model = v; }},
          {"params", sim_params, [&](const std::string& v) { sim.params_path = v; }},
          {"n", sim_n,
           [&](const std::string& v) { sim.n = static_cast<int>(config_int("n", v)); }},
          {"seed", sim_seed,
           [&](const std::string& v) {
             sim.seed = std::stoull(v);
             sim.seed_set = true;
           }},
          {"out", sim_out, [&](const std::string& v) { sim.out_dir = v; }},
      };
      apply_config_file(sim_config, bindings);
    }
    require(!sim.model.empty(), "--model is required");
    require(!sim.out_dir.empty(), "--out is required");
    cmd_simulate(sim);
  });

  RunArgs run;
  std::string run_config;
  auto* runc = app.add_subcommand("run", "Run a Metropolised smoothing chain");
  runc->add_option("--config", run_config, "Flat key=value config file; flags override");
  auto* run_model = runc->add_option("--model", run.model, "Model: growth, lg or hmm");
  auto* run_params =
      runc->add_option("--params", run.params_path, "Model parameter file (key=value lines)");
  auto* run_data =
      runc->add_option("--data", run.data_path, "Observation CSV (from simulate or hand-made)");
  auto* run_sampler =
      runc->add_option("--sampler", run.sampler, "Sampler: imh or pmmh")->default_val("imh");
  auto* run_mode = runc->add_option("--mode", run.mode_texts,
                                    "Extraction mode gt|gtrb|bs|bs:J|bsm, repeatable "
                                    "(default: gt gtrb bs bsm)");
  auto* run_particles =
      runc->add_option("--particles", run.particles, "Particles per filter run")->default_val(500);
  auto* run_sweeps = runc->add_option("--sweeps", run.sweeps, "Chain sweeps")->default_val(5000);
  auto* run_traj =
      runc->add_option("--traj", run.traj, "Trajectories per sweep for plain bs mode")
          ->default_val(25);
  auto* run_seed = runc->add_option("--seed", run.seed, "Random seed (default: entropy)");
  auto* run_burn =
      runc->add_option("--burn-in", run.burn_in, "Sweeps discarded from estimate means")
          ->default_val(0);
  auto* run_rej = runc->add_option("--max-rej", run.max_rej,
                                   "Backward-sampling rejections before the exact fallback")
                      ->default_val(15);
  auto* run_out = runc->add_option("--out", run.out_dir, "Output directory");
  auto* run_chains =
      runc->add_option("--chains", run.chains, "Independent chains run in parallel")
          ->default_val(1);
  auto* run_threads =
      runc->add_option("--threads", run.threads,
                       "Worker threads (0 = library default, 1 = serial)")
          ->default_val(0);
  auto* run_dtrace = runc->add_flag("--dump-trace", run.dump_trace,
                                    "Write the final retained filter trace to trace.csv");
  auto* run_dtraj = runc->add_flag("--dump-trajectories", run.dump_trajectories,
                                   "Write every sampled trajectory to trajectories_<mode>.csv");
  runc->callback([&] {
    run.seed_set = run_seed->count() > 0;
    if (!run_config.empty()) {
      const auto int_of = [](const std::string& key, const std::string& v) {
        return static_cast<int>(config_int(key, v));
      };
      const std::vector<ConfigBinding> bindings = {
          {"model", run_model, [&](const std::string& v) { run.model = v; }},
          {"params", run_params, [&](const std::string& v) { run.params_path = v; }},
          {"data", run_data, [&](const std::string& v) { run.data_path = v; }},
          {"sampler", run_sampler, [&](const std::string& v) { run.sampler = v; }},
          {"mode", run_mode,
           [&](const std::string& v) {
             run.mode_texts.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ',')) run.mode_texts.push_back(item);
           }},
          {"particles", run_particles,
           [&](const std::string& v) { run.particles = int_of("particles", v); }},
          {"sweeps", run_sweeps, [&](const std::string& v) { run.sweeps = int_of("sweeps", v); }},
          {"traj", run_traj, [&](const std::string& v) { run.traj = int_of("traj", v); }},
          {"seed", run_seed,
           [&](const std::string& v) {
             run.seed = std::stoull(v);
             run.seed_set = true;
           }},
          {"burn_in", run_burn,
           [&](const std::string& v) { run.burn_in = int_of("burn_in", v); }},
          {"max_rej", run_rej,
           [&](const std::string& v) { run.max_rej = int_of("max_rej", v); }},
          {"out", run_out, [&](const std::string& v) { run.out_dir = v; }},
          {"chains", run_chains,
           [&](const std::string& v) { run.chains = int_of("chains", v); }},
          {"threads", run_threads,
           [&](const std::string& v) { run.threads = int_of("threads", v); }},
          {"dump_trace", run_dtrace,
           [&](const std::string& v) { run.dump_trace = config_bool("dump_trace", v); }},
          {"dump_trajectories", run_dtraj,
           [&](const std::string& v) {
             run.dump_trajectories = config_bool("dump_trajectories", v);
           }},
      };
      apply_config_file(run_config, bindings);
    }
    require(!run.model.empty(), "--model is required");
    require(!run.data_path.empty(), "--data is required");
    require(!run.out_dir.empty(), "--out is required");
    cmd_run(run);
  });

  AnalyzeArgs ana;
  auto* analyze = app.add_subcommand("analyze", "Variance/efficiency report for a finished run");
  analyze->add_option("dir", ana.run_dir, "Run output directory (one chain)")->required();
  analyze->add_option("--burn-in", ana.burn_in, "Override the run's burn-in")
      ->check(CLI::NonNegativeNumber);
  analyze->add_option("--out", ana.out_dir, "Report directory (default: the run directory)");
  analyze->callback([&] { cmd_analyze(ana); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const DegenerateCloudError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
