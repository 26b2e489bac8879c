// rwre: command-line front end to the library and the experiment harness.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rwre/constants.hpp"
#include "rwre/env_model.hpp"
#include "rwre/error.hpp"
#include "rwre/experiments.hpp"
#include "rwre/potential.hpp"
#include "rwre/stable.hpp"

using namespace rwre;

namespace {

struct Row {
  std::string name;
  double value;
  double se;  // NaN when exact
};

void print_table(const std::vector<Row>& rows, std::ostream& text, std::ostream* csv) {
  char buf[160];
  for (const auto& r : rows) {
    if (std::isnan(r.se))
      std::snprintf(buf, sizeof buf, "%-24s %.12g\n", r.name.c_str(), r.value);
    else
      std::snprintf(buf, sizeof buf, "%-24s %.12g  (se %.3g)\n", r.name.c_str(), r.value, r.se);
    text << buf;
  }
  if (csv) {
    *csv << "quantity,value,se\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,", r.name.c_str(), r.value);
      *csv << buf;
      if (!std::isnan(r.se)) {
        std::snprintf(buf, sizeof buf, "%.17g", r.se);
        *csv << buf;
      }
      *csv << "\n";
    }
  }
}

// Options shared by the experiment subcommands; any given flag overrides the
// config file.
struct ExperimentArgs {
  std::string config_file;
  std::string law;
  std::string n_values;
  std::string output_dir;
  std::vector<std::string> sets;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  bool seed_given = false;
};

void add_experiment_options(CLI::App* sub, ExperimentArgs& a) {
  sub->add_option("--config", a.config_file, "key = value config file");
  sub->add_option("--law", a.law, "environment law, e.g. beta:1.5,1.0");
  sub->add_option("--n", a.n_values, "comma-separated target levels");
  sub->add_option("--replicas", a.replicas, "replicas (or environments for census/reduction/crossing)");
  sub->add_option_function<std::uint64_t>(
      "--seed",
      [&a](const std::uint64_t& s) {
        a.seed = s;
        a.seed_given = true;
      },
      "master seed");
  sub->add_option("--workers", a.workers, "worker threads (0 = hardware)");
  sub->add_option("--out", a.output_dir, "output directory");
  sub->add_option("--set", a.sets, "extra key=value overrides")->take_all();
}

ExperimentConfig build_config(const ExperimentArgs& a, ExperimentKind kind) {
  ExperimentConfig c = a.config_file.empty() ? ExperimentConfig{} : load_config(a.config_file);
  if (!a.law.empty()) set_config_value(c, "law", a.law);
  if (!a.n_values.empty()) set_config_value(c, "n_values", a.n_values);
  if (a.replicas > 0) {
    if (kind == ExperimentKind::tau || kind == ExperimentKind::position)
      c.replicas = a.replicas;
    else
      c.environments = a.replicas;
  }
  if (a.seed_given) c.master_seed = a.seed;
  if (a.workers > 0) c.workers = a.workers;
  if (!a.output_dir.empty()) c.output_dir = a.output_dir;
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    set_config_value(c, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  validate(c);
  return c;
}

void print_outputs(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "report.txt");
  if (in) std::cout << in.rdbuf();
  std::cout << "outputs written to " << dir << "\n";
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "'");
    }
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Random walk in random environment: constants, simulators and verification harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  // kappa
  std::string law_text;
  std::string method = "auto";
  double tol = 1e-12;
  auto* kappa_cmd = app.add_subcommand("kappa", "solve E[rho^kappa] = 1");
  kappa_cmd->add_option("--law", law_text, "environment law")->required();
  kappa_cmd->add_option("--method", method, "auto | exact | quadrature | mc")
      ->check(CLI::IsMember({"auto", "exact", "quadrature", "mc"}));
  kappa_cmd->add_option("--tol", tol, "bisection tolerance");

  // constants
  McOptions mc;
  mc.samples = 1000000;
  std::uint64_t kesten_series = 0;
  std::string csv_file;
  auto* const_cmd = app.add_subcommand("constants", "table of limit-law constants");
  const_cmd->add_option("--law", law_text, "environment law")->required();
  const_cmd->add_option("--samples", mc.samples, "excursions for C_I / C_F");
  const_cmd->add_option("--kesten-series", kesten_series, "perpetuities for the Monte Carlo C_K (0 skips)");
  const_cmd->add_option("--seed", mc.seed, "seed");
  const_cmd->add_option("--workers", mc.workers, "worker threads");
  const_cmd->add_option("--csv", csv_file, "also write the table as CSV");

  // valleys
  long valley_n = 10000;
  double epsilon = 0.2;
  std::uint64_t env_seed = 1;
  std::string valley_out;
  auto* valley_cmd = app.add_subcommand("valleys", "deep valleys of one sampled environment");
  valley_cmd->add_option("--law", law_text, "environment law")->required();
  valley_cmd->add_option("--n", valley_n, "level n");
  valley_cmd->add_option("--epsilon", epsilon, "valley parameter");
  valley_cmd->add_option("--seed", env_seed, "environment seed");
  valley_cmd->add_option("--out", valley_out, "CSV file (default stdout)");

  // experiments
  ExperimentArgs tau_args, x_args, red_args, cross_args, census_args;
  auto* tau_cmd = app.add_subcommand("simulate-tau", "hitting times tau(n) against the stable limit");
  add_experiment_options(tau_cmd, tau_args);
  auto* x_cmd = app.add_subcommand("simulate-x", "positions X_n against the inverse-stable limit");
  add_experiment_options(x_cmd, x_args);
  auto* red_cmd = app.add_subcommand("verify-reduction", "single-valley bracket of the Laplace transform");
  add_experiment_options(red_cmd, red_args);
  auto* cross_cmd = app.add_subcommand("verify-crossing", "growth of the reflected crossing time in h");
  add_experiment_options(cross_cmd, cross_args);
  auto* census_cmd = app.add_subcommand("census", "valley census over many environments");
  add_experiment_options(census_cmd, census_args);

  // stable-sample
  StableSpec spec;
  std::uint64_t count = 1000;
  std::uint64_t stable_seed = 1;
  std::string times_text;
  double dt = 1e-3;
  double x_scale = 1.0;
  auto* stable_cmd = app.add_subcommand("stable-sample", "positive stable samples or an inverse-subordinator path");
  stable_cmd->add_option("--kappa", spec.kappa, "stable index in (0,1)")->required();
  stable_cmd->add_option("--scale", spec.scale, "scale multiplier");
  stable_cmd->add_option("--count", count, "number of samples");
  stable_cmd->add_option("--seed", stable_seed, "seed");
  stable_cmd->add_option("--path", times_text, "comma-separated times: emit t,Y,Z instead of samples");
  stable_cmd->add_option("--dt", dt, "path grid step");
  stable_cmd->add_option("--x-scale", x_scale, "multiplier applied to Z");

  // report
  std::string manifest_file;
  std::string report_dir;
  unsigned report_workers = 0;
  auto* report_cmd = app.add_subcommand("report", "rerun an experiment from its manifest");
  report_cmd->add_option("--manifest", manifest_file, "manifest.txt of an earlier run")->required();
  report_cmd->add_option("--out", report_dir, "output directory (default: beside the manifest)");
  report_cmd->add_option("--workers", report_workers, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (kappa_cmd->parsed()) {
    const auto law = EnvironmentLaw::parse(law_text);
    KappaOptions o;
    o.tol = tol;
    if (method != "auto") o.allow_closed_form = false;
    o.use_quadrature = method == "quadrature";
    o.use_monte_carlo = method == "mc";
    const auto r = kappa_solve(law, o);
    std::printf("%.15g\n", r.kappa);
    std::fprintf(stderr, "method %s, residual %.3g\n", kappa_method_name(r.method), r.residual);
    return 0;
  }

  if (const_cmd->parsed()) {
    const auto law = EnvironmentLaw::parse(law_text);
    const double kappa = kappa_solve(law).kappa;
    const double moment = moment_rho_log(law, kappa);
    const auto sample = sample_excursions(law, mc);
    const auto ig = iglehart_from_sample(sample, kappa, moment);
    const double nan = std::nan("");
    std::vector<Row> rows{{"kappa", kappa, nan},
                          {"E[rho^k log rho]", moment, nan},
                          {"E[e1]", ig.mean_e1, ig.mean_e1_se},
                          {"E[exp(kV(e1))]", ig.e_kv, ig.e_kv_se},
                          {"C_I", ig.c_i, ig.c_i_se},
                          {"C_F", feller_constant(ig.c_i, ig.e_kv), ig.c_i_se / (1.0 - ig.e_kv)}};
    double c_k = 0.0;
    if (law.is_beta()) {
      c_k = kesten_constant_beta(law.as_beta().alpha, law.as_beta().beta);
      rows.push_back({"C_K", c_k, nan});
    }
    if (kesten_series > 0) {
      KestenOptions ko;
      ko.n_series = kesten_series;
      ko.seed = mc.seed;
      ko.workers = mc.workers;
      const auto t = kesten_tail_estimate(law, kappa, ko);
      rows.push_back({"C_K (Monte Carlo)", t.constant_hat, t.constant_se});
      rows.push_back({"tail index (Hill)", t.index_hat, t.index_se});
      if (c_k == 0.0) c_k = t.constant_hat;
    }
    if (c_k > 0.0) {
      const auto p = limit_scale(kappa, c_k, moment);
      rows.push_back({"Lambda*", p.lambda_scale, nan});
      rows.push_back({"tau prefactor", p.tau_prefactor, nan});
      rows.push_back({"x_scale", p.x_scale, nan});
    }
    std::ofstream csv;
    if (!csv_file.empty()) {
      csv.open(csv_file);
      if (!csv) throw std::runtime_error("cannot write " + csv_file);
    }
    print_table(rows, std::cout, csv_file.empty() ? nullptr : &csv);
    if (sample.flagged) std::fprintf(stderr, "%llu excursions hit the length cap\n", (unsigned long long)sample.flagged);
    return 0;
  }

  if (valley_cmd->parsed()) {
    const auto law = EnvironmentLaw::parse(law_text);
    const double kappa = kappa_solve(law).kappa;
    auto env = sample_environment(law, -4096, 4 * valley_n + 4096, env_seed);
    for (int attempt = 0;; ++attempt) {
      try {
        const auto path = build_potential(env);
        const auto scan = detect_deep_valleys(path, valley_n, epsilon, kappa, false);
        std::ofstream f;
        if (!valley_out.empty()) {
          f.open(valley_out);
          if (!f) throw std::runtime_error("cannot write " + valley_out);
        }
        std::vector<DeepValley> first(scan.valleys.begin(), scan.valleys.begin() + scan.K_n);
        write_valley_census(valley_out.empty() ? std::cout : f, first);
        std::fprintf(stderr, "n %ld, e_n %ld, K_n %ld, h_n %.6g, D_n %.6g\n", valley_n, scan.e_n, scan.K_n, scan.h_n,
                     scan.D_n);
        return 0;
      } catch (const WindowExhausted& w) {
        if (attempt > 32) throw;
        if (w.side() == WindowExhausted::Side::left)
          extend_environment(law, env, 2 * env.lo(), env.hi());
        else
          extend_environment(law, env, env.lo(), 2 * env.hi());
      }
    }
  }

  const std::pair<CLI::App*, std::pair<ExperimentArgs*, ExperimentKind>> experiments[] = {
      {tau_cmd, {&tau_args, ExperimentKind::tau}},
      {x_cmd, {&x_args, ExperimentKind::position}},
      {red_cmd, {&red_args, ExperimentKind::reduction}},
      {cross_cmd, {&cross_args, ExperimentKind::crossing}},
      {census_cmd, {&census_args, ExperimentKind::census}}};
  for (const auto& [cmd, what] : experiments) {
    if (!cmd->parsed()) continue;
    const auto c = build_config(*what.first, what.second);
    run_and_write(what.second, c);
    print_outputs(c.output_dir);
    return 0;
  }

  if (stable_cmd->parsed()) {
    if (!(spec.kappa > 0.0 && spec.kappa < 1.0)) throw ConfigError("--kappa must lie in (0,1)");
    if (!times_text.empty()) {
      const auto times = parse_list(times_text);
      const auto p = inverse_subordinator_path(spec.kappa, x_scale, times, dt, stable_seed);
      std::printf("t,Y,Z\n");
      for (std::size_t i = 0; i < times.size(); ++i) {
        // Y(t) on the grid when the simulated grid reaches t; blank otherwise.
        const auto k = static_cast<std::size_t>(std::floor(times[i] / dt));
        std::printf("%.17g,", times[i]);
        if (k < p.y_values.size()) std::printf("%.17g", p.y_values[k]);
        std::printf(",%.17g\n", p.z_values[i]);
      }
      if (p.coarse) std::fprintf(stderr, "warning: some Z(t) resolved at the first grid step; reduce --dt\n");
      return 0;
    }
    const auto s = sample_positive_stable(spec, count, stable_seed);
    for (double v : s) std::printf("%.17g\n", v);
    return 0;
  }

  if (report_cmd->parsed()) {
    const auto m = load_manifest(manifest_file);
    const std::string dir =
        report_dir.empty() ? std::filesystem::path(manifest_file).parent_path().string() : report_dir;
    run_manifest(m, dir.empty() ? "." : dir, report_workers);
    print_outputs(dir.empty() ? "." : dir);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const RegimeError& e) {
    std::cerr << "regime error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
