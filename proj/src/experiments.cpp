#include "rwre/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rwre/error.hpp"
#include "rwre/kernels.hpp"
#include "rwre/parallel.hpp"
#include "rwre/potential.hpp"
#include "rwre/stable.hpp"

namespace rwre {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, x);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(x))
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

// Accepts plain integers and integral scientific notation (1e6).
std::uint64_t parse_count(const std::string& key, const std::string& v) {
  const double x = parse_double(key, v);
  if (x < 0.0 || x != std::floor(x) || x > 1.8e19)
    throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(x);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>)
      s += fmt(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / name);
  if (!out) throw std::runtime_error("cannot write " + dir + "/" + name);
  return out;
}

constexpr std::size_t kReplicaBlock = 16;

EnvironmentLaw law_of(const ExperimentConfig& c) { return EnvironmentLaw::parse(c.law); }

double laplace_mean(const std::vector<double>& x, double lambda, double* se) {
  const auto s = kernels::laplace_sums(x, lambda);
  const double n = static_cast<double>(x.size());
  const double m = s.sum / n;
  if (se) *se = x.size() > 1 ? std::sqrt(std::max(0.0, s.sum_sq / n - m * m) / (n - 1.0)) : 0.0;
  return m;
}

// Potential over a window grown until `fn(path)` stops throwing WindowExhausted.
template <class Fn>
auto with_growing_window(const EnvironmentLaw& law, EnvironmentSlice& env, PotentialPath& path,
                         std::uint64_t& retries, Fn&& fn) {
  for (;;) {
    try {
      return fn(path);
    } catch (const WindowExhausted& w) {
      ++retries;
      if (retries > 64) throw;
      const long width = env.hi() - env.lo() + 1;
      if (w.side() == WindowExhausted::Side::left)
        extend_environment(law, env, std::min(w.needed_site(), env.lo()) - std::max<long>(4096, -env.lo()), env.hi());
      else
        extend_environment(law, env, env.lo(), std::max(w.needed_site(), env.hi()) + std::max<long>(4096, width / 2));
      path = build_potential(env);
    }
  }
}

}  // namespace

const char* library_version() { return "rwre 1.0.0"; }

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (key == "law") {
    EnvironmentLaw::parse(v);  // validates
    c.law = v;
  } else if (key == "n_values") {
    c.n_values.clear();
    for (const auto& s : split(v, ',')) c.n_values.push_back(static_cast<long>(parse_count(key, s)));
  } else if (key == "replicas") {
    c.replicas = parse_count(key, v);
  } else if (key == "epsilon") {
    c.epsilon = parse_double(key, v);
  } else if (key == "lambda_grid") {
    c.lambda_grid.clear();
    for (const auto& s : split(v, ',')) c.lambda_grid.push_back(parse_double(key, s));
  } else if (key == "master_seed") {
    c.master_seed = parse_count(key, v);
  } else if (key == "output_dir") {
    c.output_dir = v;
  } else if (key == "step_cap") {
    c.step_cap = parse_count(key, v);
  } else if (key == "workers") {
    c.workers = static_cast<unsigned>(parse_count(key, v));
  } else if (key == "environments") {
    c.environments = parse_count(key, v);
  } else if (key == "h_grid") {
    c.h_grid.clear();
    for (const auto& s : split(v, ',')) c.h_grid.push_back(parse_double(key, s));
  } else if (key == "particles") {
    c.particles = parse_count(key, v);
  } else if (key == "q_batches") {
    c.q_batches = static_cast<int>(parse_count(key, v));
  } else if (key == "e1_samples") {
    c.e1_samples = parse_count(key, v);
  } else if (key == "c_prime") {
    c.c_prime = parse_double(key, v);
  } else if (key == "c_double_prime") {
    c.c_double_prime = parse_double(key, v);
  } else if (key == "delta") {
    c.delta = parse_double(key, v);
  } else if (key == "c_k") {
    c.c_k = parse_double(key, v);
  } else if (key == "limit_samples") {
    c.limit_samples = parse_count(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void validate(const ExperimentConfig& c) {
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0 / 3.0)) throw ConfigError("epsilon must lie in (0, 1/3)");
  if (c.replicas < 1) throw ConfigError("replicas must be >= 1");
  if (c.n_values.empty()) throw ConfigError("n_values must not be empty");
  for (std::size_t i = 0; i < c.n_values.size(); ++i) {
    if (c.n_values[i] < 1) throw ConfigError("n_values must be positive");
    if (i > 0 && c.n_values[i] <= c.n_values[i - 1]) throw ConfigError("n_values must be increasing");
  }
  for (double l : c.lambda_grid)
    if (!(l >= 0.0)) throw ConfigError("lambda_grid entries must be >= 0");
  if (c.environments < 1) throw ConfigError("environments must be >= 1");
  if (c.q_batches < 2) throw ConfigError("q_batches must be >= 2");
  if (c.particles < 1) throw ConfigError("particles must be >= 1");
  if (c.step_cap < 1) throw ConfigError("step_cap must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string config_body(const ExperimentConfig& c, bool with_runtime) {
  std::ostringstream o;
  o << "law = " << c.law << "\n";
  o << "n_values = " << join(c.n_values) << "\n";
  o << "replicas = " << c.replicas << "\n";
  o << "epsilon = " << fmt(c.epsilon) << "\n";
  o << "lambda_grid = " << join(c.lambda_grid) << "\n";
  o << "master_seed = " << c.master_seed << "\n";
  if (with_runtime) o << "output_dir = " << c.output_dir << "\n";
  o << "step_cap = " << c.step_cap << "\n";
  if (with_runtime) o << "workers = " << c.workers << "\n";
  o << "environments = " << c.environments << "\n";
  o << "h_grid = " << join(c.h_grid) << "\n";
  o << "particles = " << c.particles << "\n";
  o << "q_batches = " << c.q_batches << "\n";
  o << "e1_samples = " << c.e1_samples << "\n";
  o << "c_prime = " << fmt(c.c_prime) << "\n";
  o << "c_double_prime = " << fmt(c.c_double_prime) << "\n";
  o << "delta = " << fmt(c.delta) << "\n";
  o << "c_k = " << fmt(c.c_k) << "\n";
  o << "limit_samples = " << c.limit_samples << "\n";
  return o.str();
}

}  // namespace

std::string config_to_text(const ExperimentConfig& c) { return config_body(c, true); }

const char* experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::tau: return "tau";
    case ExperimentKind::position: return "position";
    case ExperimentKind::census: return "census";
    case ExperimentKind::reduction: return "reduction";
    case ExperimentKind::crossing: return "crossing";
  }
  return "?";
}

ExperimentKind experiment_from_name(const std::string& name) {
  for (auto k : {ExperimentKind::tau, ExperimentKind::position, ExperimentKind::census, ExperimentKind::reduction,
                 ExperimentKind::crossing})
    if (name == experiment_name(k)) return k;
  throw ConfigError("unknown experiment '" + name + "'");
}

std::uint64_t replica_seed(std::uint64_t master, ExperimentKind kind, long level, std::uint64_t replica) {
  return derive_key(master, {0xE0ULL + static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(level), replica})[0];
}

// Worker count and output directory are left out: they do not change results.
std::string manifest_to_text(const Manifest& m) {
  std::ostringstream o;
  o << "# rwre run manifest\n";
  o << "experiment = " << experiment_name(m.kind) << "\n";
  o << config_body(m.config, false);
  for (const auto& [k, v] : m.info) o << "info." << k << " = " << v << "\n";
  return o.str();
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::ostringstream cfg;
  std::istringstream in(text);
  std::string line;
  bool have_kind = false;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("manifest: expected key = value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "experiment") {
      m.kind = experiment_from_name(value);
      have_kind = true;
    } else if (key.rfind("info.", 0) == 0) {
      m.info[key.substr(5)] = value;
    } else {
      cfg << key << " = " << value << "\n";
    }
  }
  if (!have_kind) throw ConfigError("manifest: missing experiment");
  m.config = parse_config(cfg.str());
  return m;
}

Manifest load_manifest(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open manifest '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

// ---- tau(n) ----------------------------------------------------------------

TauReport run_tau_experiment(const ExperimentConfig& c) {
  validate(c);
  const auto law = law_of(c);
  TauReport rep;
  rep.params = limit_params_for(law, c.c_k);
  const double kappa = rep.params.kappa;
  for (long n : c.n_values) {
    std::vector<double> tau(c.replicas, 0.0);
    parallel_blocks(block_count(c.replicas, kReplicaBlock), c.workers, [&](std::size_t blk) {
      const std::size_t end = std::min<std::size_t>(c.replicas, (blk + 1) * kReplicaBlock);
      for (std::size_t r = blk * kReplicaBlock; r < end; ++r) {
        const std::uint64_t seed = replica_seed(c.master_seed, ExperimentKind::tau, n, r);
        auto env = sample_environment(law, -256, n - 1, seed);
        CounterRng rng(seed, {0x7A0});
        tau[r] = sample_hitting_time(env, n, rng, &law);
      }
    });
    TauRow row;
    row.n = n;
    row.replicas = c.replicas;
    std::vector<double> kept;
    const double norm = std::pow(static_cast<double>(n), 1.0 / kappa);
    for (double t : tau) {
      if (t > static_cast<double>(c.step_cap)) {
        ++row.truncated;
        continue;
      }
      kept.push_back(t / norm);
    }
    if (kept.size() < 4) throw std::runtime_error("tau experiment: too few untruncated replicas");
    for (double lam : c.lambda_grid) {
      LaplaceRow lr;
      lr.n = n;
      lr.lambda = lam;
      lr.empirical = laplace_mean(kept, lam, &lr.se);
      lr.predicted = std::exp(-rep.params.lambda_scale * std::pow(lam, kappa));
      rep.laplace.push_back(lr);
    }
    const std::size_t k = std::max<std::size_t>(1, std::min(stats::default_hill_k(kept.size()), kept.size() - 1));
    row.hill = stats::hill(kept, k);
    const double factors[] = {0.5, 1.0, 2.0};
    row.hill_sweep = stats::hill_sweep(kept, k, factors);
    const auto limit = sample_positive_stable({kappa, rep.params.tau_prefactor}, c.limit_samples,
                                              replica_seed(c.master_seed, ExperimentKind::tau, n, ~0ULL), c.workers);
    row.ks = stats::ks_two_sample(kept, limit);
    row.dkw = stats::dkw_epsilon(kept.size()) + stats::dkw_epsilon(limit.size());
    row.fitted_lambda = -std::log(laplace_mean(kept, 1.0, nullptr));
    rep.rows.push_back(row);
    rep.scaled.push_back(std::move(kept));
  }
  return rep;
}

// ---- X_n -------------------------------------------------------------------

PositionReport run_position_experiment(const ExperimentConfig& c) {
  validate(c);
  const auto law = law_of(c);
  PositionReport rep;
  rep.params = limit_params_for(law, c.c_k);
  const double kappa = rep.params.kappa;
  for (long n : c.n_values) {
    std::vector<double> x(c.replicas, 0.0);
    std::vector<char> cut(c.replicas, 0);
    parallel_blocks(block_count(c.replicas, kReplicaBlock), c.workers, [&](std::size_t blk) {
      const std::size_t end = std::min<std::size_t>(c.replicas, (blk + 1) * kReplicaBlock);
      for (std::size_t r = blk * kReplicaBlock; r < end; ++r) {
        const std::uint64_t seed = replica_seed(c.master_seed, ExperimentKind::position, n, r);
        auto env = sample_environment(law, -1024, 4095, seed);
        const auto res = simulate_walk(env, 0, std::nullopt, WalkStop::after(static_cast<std::uint64_t>(n)),
                                       derive_key(seed, {0x9051})[0], c.step_cap, false, &law);
        x[r] = static_cast<double>(res.endpoint);
        cut[r] = res.truncated;
      }
    });
    PositionRow row;
    row.n = n;
    row.replicas = c.replicas;
    std::vector<double> kept;
    const double norm = std::pow(static_cast<double>(n), kappa);
    for (std::size_t r = 0; r < x.size(); ++r) {
      if (cut[r]) {
        ++row.truncated;
        continue;
      }
      kept.push_back(x[r] / norm);
    }
    if (kept.empty()) throw std::runtime_error("position experiment: every replica truncated");
    std::vector<double> sorted = kept;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    row.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    row.mean = stats::mean_se(kept).mean;
    row.fitted_x_scale = row.mean * std::tgamma(1.0 + kappa);
    auto limit = sample_positive_stable({kappa, 1.0}, c.limit_samples,
                                        replica_seed(c.master_seed, ExperimentKind::position, n, ~0ULL), c.workers);
    for (double& s : limit) s = rep.params.x_scale * std::pow(s, -kappa);
    row.ks = stats::ks_two_sample(kept, limit);
    row.dkw = stats::dkw_epsilon(kept.size()) + stats::dkw_epsilon(limit.size());
    rep.rows.push_back(row);
  }
  return rep;
}

// ---- valley census ---------------------------------------------------------

CensusReport run_valley_census(const ExperimentConfig& c) {
  validate(c);
  const auto law = law_of(c);
  CensusReport rep;
  rep.kappa = kappa_solve(law).kappa;
  const double kappa = rep.kappa;
  const auto e1 = sample_excursions(law, {c.e1_samples, replica_seed(c.master_seed, ExperimentKind::census, 0, 1),
                                          c.workers});
  const double mean_e1 = stats::mean_se(e1.length).mean;
  GoodEnvironmentConstants k = default_good_constants(mean_e1, kappa, c.epsilon);
  if (c.c_prime > 0.0) k.c_prime = c.c_prime;
  if (c.c_double_prime > 0.0) k.c_double_prime = c.c_double_prime;
  if (c.delta > 0.0) k.delta = c.delta;

  std::vector<double> hgrid;
  for (double h = 1.0; h <= 12.0 + 1e-9; h += 0.5) hgrid.push_back(h);

  for (long n : c.n_values) {
    CensusRow row;
    row.n = n;
    row.h_n = critical_height(n, c.epsilon, kappa);
    row.D_n = valley_depth(n, kappa);
    row.mean_e1 = mean_e1;
    row.constants = k;
    row.q = excursion_tail_splitting(law, kappa, row.h_n, c.particles, c.q_batches,
                                     replica_seed(c.master_seed, ExperimentKind::census, n, 2));
    row.height_grid = hgrid;
    const std::size_t E = c.environments;
    row.envs.resize(E);
    row.valleys.resize(E);
    std::vector<std::vector<std::uint64_t>> hcount(E, std::vector<std::uint64_t>(hgrid.size(), 0));
    std::vector<std::uint64_t> hn(E, 0);
    parallel_blocks(E, c.workers, [&](std::size_t e) {
      const std::uint64_t seed = replica_seed(c.master_seed, ExperimentKind::census, n, 1000 + e);
      auto env = sample_environment(law, -4096, static_cast<long>(std::ceil(mean_e1 * static_cast<double>(n) * 1.2)) + 4096, seed);
      auto path = build_potential(env);
      CensusEnvRow& er = row.envs[e];
      er.env = e;
      const auto [deep, star] = with_growing_window(law, env, path, er.window_retries, [&](const PotentialPath& p) {
        auto d = detect_deep_valleys(p, n, c.epsilon, kappa, true);
        auto s = detect_star_valleys(p, n, c.epsilon, kappa);
        return std::make_pair(std::move(d), std::move(s));
      });
      er.e_n = deep.e_n;
      er.K_n = deep.K_n;
      er.K_star = star.K_star;
      er.coincide = valleys_coincide(deep, star);
      er.events = check_good_environment(path, deep, c.epsilon, k, row.q.q);
      row.valleys[e] = deep.valleys;
      const auto ex = excursions(path, n + 1);
      hn[e] = ex.size();
      for (const auto& r : ex)
        for (std::size_t g = 0; g < hgrid.size(); ++g)
          if (r.height >= hgrid[g]) ++hcount[e][g];
    });
    std::vector<double> ratios;
    double coincide = 0.0;
    const double expected = static_cast<double>(n + 1) * row.q.q;
    for (const auto& er : row.envs) {
      ratios.push_back(static_cast<double>(er.K_n) / expected);
      coincide += er.coincide;
      const bool f[7] = {er.events.A1, er.events.A2, er.events.A3, er.events.A4, er.events.A5,
                         er.events.first_four(), er.events.all()};
      for (int i = 0; i < 7; ++i) row.freq[i] += f[i];
      row.window_retries += er.window_retries;
    }
    const auto rs = stats::mean_se(ratios);
    row.ratio_mean = rs.mean;
    row.ratio_se = rs.se;
    row.coincidence = coincide / static_cast<double>(E);
    for (double& f : row.freq) f /= static_cast<double>(E);
    std::uint64_t total = 0;
    for (auto t : hn) total += t;
    for (std::size_t g = 0; g < hgrid.size(); ++g) {
      std::uint64_t cnt = 0;
      for (std::size_t e = 0; e < E; ++e) cnt += hcount[e][g];
      const double p = static_cast<double>(cnt) / static_cast<double>(total);
      row.height_tail.push_back(p);
      row.height_scaled.push_back(p * std::exp(kappa * hgrid[g]));
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---- single-valley reduction bracket ---------------------------------------

ReductionReport verify_reduction(const ExperimentConfig& c) {
  validate(c);
  const auto law = law_of(c);
  ReductionReport rep;
  rep.kappa = kappa_solve(law).kappa;
  const double kappa = rep.kappa;
  for (long n : c.n_values) {
    const double h_n = critical_height(n, c.epsilon, kappa);
    const auto q = excursion_tail_splitting(law, kappa, h_n, c.particles, c.q_batches,
                                            replica_seed(c.master_seed, ExperimentKind::reduction, n, 2));
    if (rep.rows.empty()) rep.q = q;
    const std::size_t E = c.environments;
    const std::size_t L = c.lambda_grid.size();
    std::vector<double> left(E * L), factor(E * L);
    const double norm = std::pow(static_cast<double>(n), 1.0 / kappa);
    parallel_blocks(block_count(E, kReplicaBlock), c.workers, [&](std::size_t blk) {
      const std::size_t end = std::min<std::size_t>(E, (blk + 1) * kReplicaBlock);
      for (std::size_t e = blk * kReplicaBlock; e < end; ++e) {
        const std::uint64_t seed = replica_seed(c.master_seed, ExperimentKind::reduction, n, e);
        auto env = sample_environment(law, -1024, 4 * n + 4096, seed);
        auto path = build_potential(env);
        std::uint64_t retries = 0;
        const auto scan = with_growing_window(law, env, path, retries, [&](const PotentialPath& p) {
          return detect_deep_valleys(p, n, c.epsilon, kappa, true);
        });
        const auto& v = scan.valleys.front();
        const auto chain = chain_from_environment(env, path, v.a, v.d, v.a);
        for (std::size_t i = 0; i < L; ++i) {
          const double s = c.lambda_grid[i] / norm;
          left[e * L + i] = std::exp(quenched_log_laplace(env, 0, scan.e_n, s));
          factor[e * L + i] = std::exp(quenched_log_laplace(chain, v.a, v.b, v.d, s));
        }
      }
    });
    const double slack = std::pow(static_cast<double>(n), -c.epsilon / 4.0);
    const double nq = static_cast<double>(n) * q.q;
    for (std::size_t i = 0; i < L; ++i) {
      std::vector<double> l(E), f(E);
      for (std::size_t e = 0; e < E; ++e) {
        l[e] = left[e * L + i];
        f[e] = factor[e * L + i];
      }
      const auto ls = stats::mean_se(l);
      const auto fs = stats::mean_se(f);
      ReductionRow r;
      r.n = n;
      r.lambda = c.lambda_grid[i];
      r.left = ls.mean;
      r.left_se = ls.se;
      r.factor = fs.mean;
      r.factor_se = fs.se;
      r.k_low = static_cast<long>(std::floor(nq * (1.0 - slack)));
      r.k_high = static_cast<long>(std::ceil(nq * (1.0 + slack)));
      auto power = [&](long k, double* se) {
        *se = k == 0 ? 0.0 : static_cast<double>(k) * std::pow(fs.mean, static_cast<double>(k - 1)) * fs.se;
        return std::pow(fs.mean, static_cast<double>(k));
      };
      r.lower = power(r.k_high, &r.lower_se);
      r.upper = power(r.k_low, &r.upper_se);
      const double lo = r.lower - 3.0 * std::hypot(r.left_se, r.lower_se);
      const double hi = r.upper + 3.0 * std::hypot(r.left_se, r.upper_se);
      r.margin = std::min(r.left - lo, hi - r.left);
      r.contained = r.margin >= 0.0;
      rep.rows.push_back(r);
    }
  }
  return rep;
}

// ---- crossing-time bound ---------------------------------------------------

CrossingReport verify_crossing_bound(const ExperimentConfig& c, std::uint64_t simulate_envs,
                                     std::uint64_t walks_per_env) {
  validate(c);
  if (c.h_grid.size() < 2) throw ConfigError("h_grid needs at least two levels");
  const auto law = law_of(c);
  const std::size_t E = c.environments;
  const std::size_t H = c.h_grid.size();
  std::vector<double> mean(E * H, 0.0);
  std::vector<double> sim_sum(E * H, 0.0), sim_cnt(E * H, 0.0), sim_sq(E * H, 0.0), sim_cut(E * H, 0.0);
  parallel_blocks(block_count(E, kReplicaBlock), c.workers, [&](std::size_t blk) {
    const std::size_t end = std::min<std::size_t>(E, (blk + 1) * kReplicaBlock);
    for (std::size_t e = blk * kReplicaBlock; e < end; ++e) {
      const std::uint64_t seed = replica_seed(c.master_seed, ExperimentKind::crossing, 0, e);
      auto env = sample_environment(law, 0, 4095, seed);
      auto path = build_potential(env);
      std::uint64_t retries = 0;
      for (std::size_t i = 0; i < H; ++i) {
        const long t = with_growing_window(law, env, path, retries, [&](const PotentialPath& p) {
          const auto x = first_ascent(p, c.h_grid[i], 0);
          if (!x) throw WindowExhausted(WindowExhausted::Side::right, p.hi() + 1, "crossing: T_h beyond window");
          return *x;
        });
        const long m = t - 1;
        mean[e * H + i] = reflected_mean_hitting_time(env, m);
        if (e < simulate_envs && m > 0) {
          for (std::uint64_t w = 0; w < walks_per_env; ++w) {
            const auto res = simulate_walk(env, 0, 0L, WalkStop::hit(m), derive_key(seed, {0xC0, i, w})[0],
                                           c.step_cap, false, &law);
            if (res.truncated) {
              sim_cut[e * H + i] += 1.0;
              continue;
            }
            const double tau = static_cast<double>(res.tau);
            sim_sum[e * H + i] += tau;
            sim_sq[e * H + i] += tau * tau;
            sim_cnt[e * H + i] += 1.0;
          }
        }
      }
    }
  });
  CrossingReport rep;
  std::vector<double> xs, ys, sig;
  for (std::size_t i = 0; i < H; ++i) {
    CrossingRow r;
    r.h = c.h_grid[i];
    std::vector<double> col(E);
    for (std::size_t e = 0; e < E; ++e) {
      col[e] = mean[e * H + i];
      r.zero += col[e] == 0.0;
    }
    const auto ms = stats::mean_se(col);
    r.mean = ms.mean;
    r.se = ms.se;
    double s = 0, q = 0, n = 0;
    for (std::size_t e = 0; e < E; ++e) {
      s += sim_sum[e * H + i];
      q += sim_sq[e * H + i];
      n += sim_cnt[e * H + i];
      r.simulated_truncated += static_cast<std::uint64_t>(sim_cut[e * H + i]);
    }
    if (n > 1) {
      r.simulated = s / n;
      r.simulated_se = std::sqrt(std::max(0.0, q / n - r.simulated * r.simulated) / (n - 1));
    }
    rep.rows.push_back(r);
    if (r.mean > 0.0) {
      xs.push_back(r.h);
      ys.push_back(std::log(r.mean));
      sig.push_back(r.se > 0.0 ? r.se / r.mean : 1.0);
    }
  }
  if (xs.size() >= 2) rep.fit = stats::weighted_least_squares(xs, ys, sig);
  return rep;
}

// ---- output ----------------------------------------------------------------

void write_tau_report(const TauReport& r, const std::string& dir) {
  auto lap = open_out(dir, "tau_laplace.csv");
  lap << "n,lambda,empirical,se,predicted\n";
  for (const auto& l : r.laplace)
    lap << l.n << ',' << fmt(l.lambda) << ',' << fmt(l.empirical) << ',' << fmt(l.se) << ',' << fmt(l.predicted) << '\n';
  auto sum = open_out(dir, "tau_summary.csv");
  sum << "n,replicas,truncated,hill_index,hill_se,hill_k,hill_index_half_k,hill_index_double_k,ks,dkw_band,fitted_lambda\n";
  for (const auto& t : r.rows)
    sum << t.n << ',' << t.replicas << ',' << t.truncated << ',' << fmt(t.hill.index) << ',' << fmt(t.hill.se) << ','
        << t.hill.k << ',' << fmt(t.hill_sweep[0].index) << ',' << fmt(t.hill_sweep[2].index) << ',' << fmt(t.ks) << ','
        << fmt(t.dkw) << ',' << fmt(t.fitted_lambda) << '\n';
  auto txt = open_out(dir, "report.txt");
  txt << "experiment: tau\nkappa = " << fmt(r.params.kappa) << "\nlambda_star = " << fmt(r.params.lambda_scale)
      << "\ntau_prefactor = " << fmt(r.params.tau_prefactor) << "\n";
  for (const auto& t : r.rows)
    txt << "n = " << t.n << ": hill = " << fmt(t.hill.index) << " +- " << fmt(t.hill.se) << ", ks = " << fmt(t.ks)
        << " (band " << fmt(t.dkw) << "), truncated = " << t.truncated << "\n";
}

void write_position_report(const PositionReport& r, const std::string& dir) {
  auto sum = open_out(dir, "position_summary.csv");
  sum << "n,replicas,truncated,median,mean,fitted_x_scale,ks,dkw_band\n";
  for (const auto& p : r.rows)
    sum << p.n << ',' << p.replicas << ',' << p.truncated << ',' << fmt(p.median) << ',' << fmt(p.mean) << ','
        << fmt(p.fitted_x_scale) << ',' << fmt(p.ks) << ',' << fmt(p.dkw) << '\n';
  auto txt = open_out(dir, "report.txt");
  txt << "experiment: position\nkappa = " << fmt(r.params.kappa) << "\nx_scale = " << fmt(r.params.x_scale) << "\n";
}

void write_census_report(const CensusReport& r, const std::string& dir) {
  auto sum = open_out(dir, "census_summary.csv");
  sum << "n,h_n,D_n,q_hat,q_se,mean_e1,c_prime,c_double_prime,delta,ratio_mean,ratio_se,coincidence,"
         "A1,A2,A3,A4,A5,A1_A4,A1_A5,window_retries\n";
  for (const auto& c : r.rows) {
    sum << c.n << ',' << fmt(c.h_n) << ',' << fmt(c.D_n) << ',' << fmt(c.q.q) << ',' << fmt(c.q.se) << ','
        << fmt(c.mean_e1) << ',' << fmt(c.constants.c_prime) << ',' << fmt(c.constants.c_double_prime) << ','
        << fmt(c.constants.delta) << ',' << fmt(c.ratio_mean) << ',' << fmt(c.ratio_se) << ',' << fmt(c.coincidence);
    for (double f : c.freq) sum << ',' << fmt(f);
    sum << ',' << c.window_retries << '\n';
  }
  auto envs = open_out(dir, "census_envs.csv");
  envs << "n,env,e_n,K_n,K_star,coincide,A1,A2,A3,A4,A5,window_retries\n";
  auto vals = open_out(dir, "census_valleys.csv");
  vals << "n,env,j,a,b,c,d,height,width\n";
  auto tail = open_out(dir, "height_tail.csv");
  tail << "n,h,tail,scaled\n";
  for (const auto& c : r.rows) {
    for (const auto& e : c.envs)
      envs << c.n << ',' << e.env << ',' << e.e_n << ',' << e.K_n << ',' << e.K_star << ',' << e.coincide << ','
           << e.events.A1 << ',' << e.events.A2 << ',' << e.events.A3 << ',' << e.events.A4 << ',' << e.events.A5 << ','
           << e.window_retries << '\n';
    for (std::size_t e = 0; e < c.valleys.size(); ++e)
      for (std::size_t j = 0; j < std::min<std::size_t>(c.valleys[e].size(), c.envs[e].K_n); ++j) {
        const auto& v = c.valleys[e][j];
        vals << c.n << ',' << e << ',' << j + 1 << ',' << v.a << ',' << v.b << ',' << v.c << ',' << v.d << ','
             << fmt(v.height) << ',' << v.d - v.a << '\n';
      }
    for (std::size_t g = 0; g < c.height_grid.size(); ++g)
      tail << c.n << ',' << fmt(c.height_grid[g]) << ',' << fmt(c.height_tail[g]) << ',' << fmt(c.height_scaled[g]) << '\n';
  }
  auto txt = open_out(dir, "report.txt");
  txt << "experiment: census\nkappa = " << fmt(r.kappa) << "\n";
  for (const auto& c : r.rows)
    txt << "n = " << c.n << ": K_n/(n q) = " << fmt(c.ratio_mean) << " +- " << fmt(c.ratio_se)
        << ", coincidence = " << fmt(c.coincidence) << ", A1-A4 = " << fmt(c.freq[5]) << "\n";
}

void write_reduction_report(const ReductionReport& r, const std::string& dir) {
  auto out = open_out(dir, "reduction.csv");
  out << "n,lambda,left,left_se,factor,factor_se,k_low,k_high,lower,lower_se,upper,upper_se,margin,contained\n";
  for (const auto& x : r.rows)
    out << x.n << ',' << fmt(x.lambda) << ',' << fmt(x.left) << ',' << fmt(x.left_se) << ',' << fmt(x.factor) << ','
        << fmt(x.factor_se) << ',' << x.k_low << ',' << x.k_high << ',' << fmt(x.lower) << ',' << fmt(x.lower_se) << ','
        << fmt(x.upper) << ',' << fmt(x.upper_se) << ',' << fmt(x.margin) << ',' << x.contained << '\n';
  auto txt = open_out(dir, "report.txt");
  txt << "experiment: reduction\nkappa = " << fmt(r.kappa) << "\nq_hat = " << fmt(r.q.q) << " +- " << fmt(r.q.se) << "\n";
}

void write_crossing_report(const CrossingReport& r, const std::string& dir) {
  auto out = open_out(dir, "crossing.csv");
  out << "h,mean,se,log_mean,zero_envs,simulated,simulated_se,simulated_truncated\n";
  for (const auto& x : r.rows)
    out << fmt(x.h) << ',' << fmt(x.mean) << ',' << fmt(x.se) << ',' << fmt(x.mean > 0 ? std::log(x.mean) : 0.0) << ','
        << x.zero << ',' << fmt(x.simulated) << ',' << fmt(x.simulated_se) << ',' << x.simulated_truncated << '\n';
  auto txt = open_out(dir, "report.txt");
  txt << "experiment: crossing\nslope = " << fmt(r.fit.slope) << " +- " << fmt(r.fit.slope_se)
      << "\nintercept = " << fmt(r.fit.intercept) << "\n";
}

namespace {

Manifest make_manifest(ExperimentKind kind, const ExperimentConfig& c) {
  Manifest m;
  m.kind = kind;
  m.config = c;
  m.info["version"] = library_version();
#ifdef __VERSION__
  m.info["compiler"] = __VERSION__;
#endif
  m.info["kernels"] = std::string(kernels::isa_name(kernels::active_isa()));
  m.info["rng"] = "philox4x64-10";
  m.info["seed_scheme"] = "derive_key(master_seed, experiment, n, replica)";
  return m;
}

}  // namespace

void run_manifest(const Manifest& m, const std::string& dir, unsigned workers) {
  ExperimentConfig c = m.config;
  c.output_dir = dir;
  if (workers > 0) c.workers = workers;
  switch (m.kind) {
    case ExperimentKind::tau: write_tau_report(run_tau_experiment(c), dir); break;
    case ExperimentKind::position: write_position_report(run_position_experiment(c), dir); break;
    case ExperimentKind::census: write_census_report(run_valley_census(c), dir); break;
    case ExperimentKind::reduction: write_reduction_report(verify_reduction(c), dir); break;
    case ExperimentKind::crossing: write_crossing_report(verify_crossing_bound(c, 4, 200), dir); break;
  }
  Manifest out = m;
  out.config = c;
  auto f = open_out(dir, "manifest.txt");
  f << manifest_to_text(out);
}

void run_and_write(ExperimentKind kind, const ExperimentConfig& c) {
  run_manifest(make_manifest(kind, c), c.output_dir, c.workers);
}

}  // namespace rwre
