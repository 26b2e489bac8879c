#pragma once

// Potential V of an environment, its ladder/excursion structure, deep valleys
// and *-valleys, and the good-environment events A1..A5.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rwre/env_model.hpp"

namespace rwre {

struct PotentialPath {
  long offset = 0;        // site of v[0]
  std::vector<double> v;  // v[i] = V(offset + i)
  std::uint64_t seed = 0;
  std::string law;

  long lo() const { return offset; }
  long hi() const { return offset + static_cast<long>(v.size()) - 1; }
  bool contains(long x) const { return x >= lo() && x <= hi(); }
  double at(long x) const { return v[static_cast<std::size_t>(x - offset)]; }
};

// V(0) = 0, V(x) - V(x-1) = log rho_x. The slice must contain site 0.
PotentialPath build_potential(const EnvironmentSlice& env);

// Potential given directly by its values (fixtures).
PotentialPath potential_from_values(long offset, std::vector<double> v);

// Text fixture: one V value per line, '#' comments, optional "# offset K".
PotentialPath load_potential_fixture(const std::string& file);

struct ExcursionRecord {
  long start = 0;  // e_i
  long end = 0;    // e_{i+1}
  double height = 0.0;
  long argmax = 0;
};

// e_0 = 0 and e_i = inf{k > e_{i-1} : V(k) <= V(e_{i-1})}, up to the window
// end or until max_index epochs beyond e_0 were found.
std::vector<long> ladder_epochs(const PotentialPath& path, long max_index = -1);

// Complete excursions between consecutive ladder epochs.
std::vector<ExcursionRecord> excursions(const PotentialPath& path, long max_count = -1);

// First x >= from with V(x) - min_{from<=i<=x} V(i) >= h.
std::optional<long> first_ascent(const PotentialPath& path, double h, long from = 0);
// First x >= from with V(x) - max_{from<=i<=x} V(i) <= -h.
std::optional<long> first_descent(const PotentialPath& path, double h, long from = 0);
// First x >= from where V crosses `level` (V(x) >= level if level >= V(from),
// V(x) <= level otherwise).
std::optional<long> hit_level(const PotentialPath& path, double level, long from = 0);

// max_{x<=i<=j<=y} (V(j) - V(i)) and min_{x<=i<=j<=y} (V(j) - V(i)).
double max_increment(const PotentialPath& path, long x, long y);
double min_increment(const PotentialPath& path, long x, long y);

struct DeepValley {
  long a = 0, b = 0, c = 0, d = 0, d_bar = 0, t_up = 0;
  long sigma = 0;  // index of the excursion starting at b
  double height = 0.0;
  double h_n = 0.0, D_n = 0.0;
};

struct StarValley {
  long gamma = 0, a = 0, b = 0, t_star = 0, c = 0, d_bar = 0, d = 0;
};

double critical_height(long n, double epsilon, double kappa);  // h_n
double valley_depth(long n, double kappa);                     // D_n

struct DeepValleyScan {
  double h_n = 0.0;
  double D_n = 0.0;
  long n = 0;
  long e_n = 0;
  long K_n = 0;
  // Valleys j = 1..K_n, followed by valley K_n + 1 when has_next.
  std::vector<DeepValley> valleys;
  bool has_next = false;
};

// Deep valleys of the first n+1 excursions. With require_next the
// (K_n+1)-th valley is located too. Throws WindowExhausted when the path is
// too short for any requested point.
DeepValleyScan detect_deep_valleys(const PotentialPath& path, long n, double epsilon, double kappa,
                                   bool require_next = true);

struct StarValleyScan {
  long K_star = 0;
  std::vector<StarValley> valleys;
};

StarValleyScan detect_star_valleys(const PotentialPath& path, long n, double epsilon, double kappa);

// K_n = K*_n and the first K_n quadruplets coincide.
bool valleys_coincide(const DeepValleyScan& deep, const StarValleyScan& star);

struct GoodEnvironmentConstants {
  double c_prime = 0.0;
  double c_double_prime = 0.0;
  double delta = 0.0;
};

// C' = 2(E[e_1] + 1), C'' = 40(1 + 1/kappa), delta = 1.5 epsilon / kappa.
GoodEnvironmentConstants default_good_constants(double mean_e1, double kappa, double epsilon);

struct GoodEnvironment {
  bool A1 = false, A2 = false, A3 = false, A4 = false, A5 = false;
  bool first_four() const { return A1 && A2 && A3 && A4; }
  bool all() const { return first_four() && A5; }
};

// q_n is P{H_0 >= h_n} (or an estimate of it).
GoodEnvironment check_good_environment(const PotentialPath& path, const DeepValleyScan& scan, double epsilon,
                                       const GoodEnvironmentConstants& k, double q_n);

// CSV with columns j,a,b,c,d,height,width.
void write_valley_census(std::ostream& out, const std::vector<DeepValley>& valleys);

}  // namespace rwre
