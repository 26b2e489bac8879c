#pragma once

// Monte Carlo harness: configuration, manifests, the experiment runners and
// their CSV/text reports.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rwre/constants.hpp"
#include "rwre/quenched.hpp"
#include "rwre/stats.hpp"

namespace rwre {

struct ExperimentConfig {
  std::string law = "beta:1.5,1.0";
  std::vector<long> n_values = {1000};
  std::uint64_t replicas = 1000;
  double epsilon = 0.2;
  std::vector<double> lambda_grid = {0.5, 1.0, 2.0};
  std::uint64_t master_seed = 1;
  std::string output_dir = "rwre-out";
  // tau(n) is drawn exactly, so by default nothing is excluded; walk
  // simulations stop earlier on their own stop rules.
  std::uint64_t step_cap = 1'000'000'000'000'000'000ULL;
  unsigned workers = 1;
  // census / reduction / crossing
  std::uint64_t environments = 100;
  std::vector<double> h_grid = {3.0, 4.0, 5.0, 6.0, 7.0};
  std::uint64_t particles = 10000;  // splitting effort per level for q_n
  int q_batches = 20;
  std::uint64_t e1_samples = 100000;
  double c_prime = 0.0;  // 0 selects the default
  double c_double_prime = 0.0;
  double delta = 0.0;
  // limit law
  double c_k = 0.0;  // 0 selects the Beta closed form
  std::uint64_t limit_samples = 100000;
};

// `key = value` lines, '#' comments, lists comma-separated. Unknown keys,
// malformed values and violated invariants raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& file);
void validate(const ExperimentConfig& c);
std::string config_to_text(const ExperimentConfig& c);

// Applies one `key = value` assignment.
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value);

enum class ExperimentKind { tau, position, census, reduction, crossing };

const char* experiment_name(ExperimentKind k);
ExperimentKind experiment_from_name(const std::string& name);

// Manifest = experiment name + full config + seed scheme + versions. Written
// beside every run's outputs; `report` reruns from it.
struct Manifest {
  ExperimentKind kind = ExperimentKind::tau;
  ExperimentConfig config;
  std::map<std::string, std::string> info;  // version, compiler, kernels, seed scheme
};

std::string manifest_to_text(const Manifest& m);
Manifest parse_manifest(const std::string& text);
Manifest load_manifest(const std::string& file);

// Stream seed for (master, experiment, level, replica).
std::uint64_t replica_seed(std::uint64_t master, ExperimentKind kind, long level, std::uint64_t replica);

// ---- tau(n) ----------------------------------------------------------------

struct LaplaceRow {
  long n = 0;
  double lambda = 0.0;
  double empirical = 0.0;
  double se = 0.0;
  double predicted = 0.0;
};

struct TauRow {
  long n = 0;
  std::uint64_t replicas = 0;
  std::uint64_t truncated = 0;
  stats::HillEstimate hill;
  std::vector<stats::HillEstimate> hill_sweep;  // k/2, k, 2k
  double ks = 0.0;
  double dkw = 0.0;
  double fitted_lambda = 0.0;  // -log E[exp(-tau / n^{1/kappa})]
};

struct TauReport {
  LimitLawParams params;
  std::vector<LaplaceRow> laplace;
  std::vector<TauRow> rows;
  std::vector<std::vector<double>> scaled;  // tau / n^{1/kappa} per n, truncated excluded
};

TauReport run_tau_experiment(const ExperimentConfig& c);

// ---- X_n -------------------------------------------------------------------

struct PositionRow {
  long n = 0;
  std::uint64_t replicas = 0;
  std::uint64_t truncated = 0;
  double median = 0.0;  // of X_n / n^kappa
  double mean = 0.0;
  double fitted_x_scale = 0.0;  // mean * Gamma(1 + kappa), since E[S^{-kappa}] = 1/Gamma(1+kappa)
  double ks = 0.0;
  double dkw = 0.0;
};

struct PositionReport {
  LimitLawParams params;
  std::vector<PositionRow> rows;
};

PositionReport run_position_experiment(const ExperimentConfig& c);

// ---- valley census ---------------------------------------------------------

struct CensusEnvRow {
  std::uint64_t env = 0;
  long e_n = 0;
  long K_n = 0;
  long K_star = 0;
  bool coincide = false;
  GoodEnvironment events;
  std::uint64_t window_retries = 0;
};

struct CensusRow {
  long n = 0;
  double h_n = 0.0;
  double D_n = 0.0;
  SplittingEstimate q;
  double mean_e1 = 0.0;
  GoodEnvironmentConstants constants;
  double ratio_mean = 0.0;  // mean of K_n / ((n+1) q_hat)
  double ratio_se = 0.0;
  double coincidence = 0.0;
  double freq[7] = {};  // A1..A5, A1-A4 joint, all five
  std::uint64_t window_retries = 0;
  std::vector<double> height_grid;
  std::vector<double> height_tail;  // pooled P{H >= h} over all excursions 0..n
  std::vector<double> height_scaled;
  std::vector<CensusEnvRow> envs;
  std::vector<std::vector<DeepValley>> valleys;  // per environment
};

struct CensusReport {
  double kappa = 0.0;
  std::vector<CensusRow> rows;
};

CensusReport run_valley_census(const ExperimentConfig& c);

// ---- single-valley reduction bracket ---------------------------------------

struct ReductionRow {
  long n = 0;
  double lambda = 0.0;
  double left = 0.0;  // E[exp(-lambda_n tau(e_n))]
  double left_se = 0.0;
  double factor = 0.0;  // E[E^{b_1}_{omega,|a_1} exp(-lambda_n tau(d_1))]
  double factor_se = 0.0;
  long k_low = 0;
  long k_high = 0;
  double lower = 0.0;  // factor^{k_high}
  double upper = 0.0;  // factor^{k_low}
  double lower_se = 0.0;
  double upper_se = 0.0;
  double margin = 0.0;  // distance inside the bracket widened by 3 combined SE (negative: outside)
  bool contained = false;
};

struct ReductionReport {
  double kappa = 0.0;
  SplittingEstimate q;
  std::vector<ReductionRow> rows;
};

ReductionReport verify_reduction(const ExperimentConfig& c);

// ---- crossing-time bound ---------------------------------------------------

struct CrossingRow {
  double h = 0.0;
  double mean = 0.0;  // E_{|0}[tau(T_h - 1)]
  double se = 0.0;
  std::uint64_t zero = 0;  // environments with T_h = 1 (tau_h = 0)
  double simulated = 0.0;  // step-by-step check on the first environments
  double simulated_se = 0.0;
  std::uint64_t simulated_truncated = 0;
};

struct CrossingReport {
  std::vector<CrossingRow> rows;
  stats::LinearFit fit;  // log mean vs h
};

CrossingReport verify_crossing_bound(const ExperimentConfig& c, std::uint64_t simulate_envs = 0,
                                     std::uint64_t walks_per_env = 0);

// ---- output ----------------------------------------------------------------

void write_tau_report(const TauReport& r, const std::string& dir);
void write_position_report(const PositionReport& r, const std::string& dir);
void write_census_report(const CensusReport& r, const std::string& dir);
void write_reduction_report(const ReductionReport& r, const std::string& dir);
void write_crossing_report(const CrossingReport& r, const std::string& dir);

// Runs the experiment described by the manifest and writes the report and
// the manifest into `dir`. `workers` overrides the manifest's worker count
// (0 keeps it); outputs do not depend on it.
void run_manifest(const Manifest& m, const std::string& dir, unsigned workers = 0);

// Writes manifest + report for an experiment into c.output_dir.
void run_and_write(ExperimentKind kind, const ExperimentConfig& c);

// Library version string recorded in manifests.
const char* library_version();

}  // namespace rwre
