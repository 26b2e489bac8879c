#include "rwre/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "rwre/error.hpp"
#include "rwre/kernels.hpp"

namespace rwre {
namespace {

using Side = WindowExhausted::Side;

[[noreturn]] void exhausted(Side side, long site, const char* what) {
  throw WindowExhausted(side, site,
                        std::string(what) + ": window exhausted at site " + std::to_string(site) +
                            (side == Side::left ? " (left)" : " (right)"));
}

void require_site(const PotentialPath& p, long x, const char* what) {
  if (x > p.hi()) exhausted(Side::right, x, what);
  if (x < p.lo()) exhausted(Side::left, x, what);
}

// sup{k <= b : V(k) - V(b) >= D}
long entry_point(const PotentialPath& p, long b, double D) {
  const double vb = p.at(b);
  for (long k = b; k >= p.lo(); --k)
    if (p.at(k) - vb >= D) return k;
  exhausted(Side::left, p.lo() - 1, "valley entry point a");
}

// inf{k >= from : V(k) - V(from) <= -D}
long exit_point(const PotentialPath& p, long from, double D) {
  const double v0 = p.at(from);
  for (long k = from; k <= p.hi(); ++k)
    if (p.at(k) - v0 <= -D) return k;
  exhausted(Side::right, p.hi() + 1, "valley exit point d");
}

// First index of the maximum of V on [x, y].
long first_argmax(const PotentialPath& p, long x, long y) {
  long best = x;
  for (long k = x + 1; k <= y; ++k)
    if (p.at(k) > p.at(best)) best = k;
  return best;
}

double up_or_zero(const PotentialPath& p, long x, long y) { return x < y ? max_increment(p, x, y) : 0.0; }
double down_or_zero(const PotentialPath& p, long x, long y) { return x < y ? min_increment(p, x, y) : 0.0; }

}  // namespace

PotentialPath build_potential(const EnvironmentSlice& env) {
  if (env.omegas.empty()) throw DomainError("build_potential: empty environment");
  if (!env.contains(0)) throw DomainError("build_potential: environment window must contain site 0");
  for (double w : env.omegas)
    if (!(w > 0.0 && w < 1.0)) throw DomainError("build_potential: omega outside (0,1)");
  std::vector<double> lr(env.omegas.size());
  kernels::log_rho(env.omegas, lr);

  PotentialPath p;
  p.offset = env.offset;
  p.seed = env.seed;
  p.law = env.law;
  p.v.resize(env.omegas.size());
  const std::size_t zero = static_cast<std::size_t>(-env.offset);
  p.v[zero] = 0.0;
  for (std::size_t i = zero + 1; i < p.v.size(); ++i) p.v[i] = p.v[i - 1] + lr[i];
  for (std::size_t i = zero; i > 0; --i) p.v[i - 1] = p.v[i] - lr[i];
  return p;
}

PotentialPath potential_from_values(long offset, std::vector<double> v) {
  if (v.empty()) throw DomainError("potential_from_values: empty");
  PotentialPath p;
  p.offset = offset;
  p.v = std::move(v);
  return p;
}

PotentialPath load_potential_fixture(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open fixture '" + file + "'");
  long offset = 0;
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream ss(line.substr(first + 1));
      std::string key;
      if (ss >> key && key == "offset" && !(ss >> offset)) throw ConfigError("bad offset line in '" + file + "'");
      continue;
    }
    try {
      v.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + line + "' in fixture '" + file + "'");
    }
  }
  if (v.empty()) throw ConfigError("fixture '" + file + "' has no values");
  return potential_from_values(offset, std::move(v));
}

std::vector<long> ladder_epochs(const PotentialPath& path, long max_index) {
  if (!path.contains(0)) throw DomainError("ladder_epochs: path must contain site 0");
  std::vector<long> e{0};
  double cur = path.at(0);
  for (long k = 1; k <= path.hi(); ++k) {
    if (max_index >= 0 && static_cast<long>(e.size()) > max_index) break;
    if (path.at(k) <= cur) {
      e.push_back(k);
      cur = path.at(k);
    }
  }
  return e;
}

std::vector<ExcursionRecord> excursions(const PotentialPath& path, long max_count) {
  const auto e = ladder_epochs(path, max_count);
  std::vector<ExcursionRecord> out;
  out.reserve(e.size());
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    const long c = first_argmax(path, e[i], e[i + 1]);
    out.push_back({e[i], e[i + 1], path.at(c) - path.at(e[i]), c});
  }
  return out;
}

std::optional<long> first_ascent(const PotentialPath& path, double h, long from) {
  if (!path.contains(from)) return std::nullopt;
  double m = path.at(from);
  for (long x = from; x <= path.hi(); ++x) {
    m = std::min(m, path.at(x));
    if (path.at(x) - m >= h) return x;
  }
  return std::nullopt;
}

std::optional<long> first_descent(const PotentialPath& path, double h, long from) {
  if (!path.contains(from)) return std::nullopt;
  double m = path.at(from);
  for (long x = from; x <= path.hi(); ++x) {
    m = std::max(m, path.at(x));
    if (path.at(x) - m <= -h) return x;
  }
  return std::nullopt;
}

std::optional<long> hit_level(const PotentialPath& path, double level, long from) {
  if (!path.contains(from)) return std::nullopt;
  const bool up = level >= path.at(from);
  for (long x = from; x <= path.hi(); ++x)
    if (up ? path.at(x) >= level : path.at(x) <= level) return x;
  return std::nullopt;
}

double max_increment(const PotentialPath& path, long x, long y) {
  if (!(x < y) || !path.contains(x) || !path.contains(y)) throw DomainError("max_increment: bad range");
  double lo = path.at(x);
  double best = 0.0;
  for (long j = x; j <= y; ++j) {
    lo = std::min(lo, path.at(j));
    best = std::max(best, path.at(j) - lo);
  }
  return best;
}

double min_increment(const PotentialPath& path, long x, long y) {
  if (!(x < y) || !path.contains(x) || !path.contains(y)) throw DomainError("min_increment: bad range");
  double hi = path.at(x);
  double best = 0.0;
  for (long j = x; j <= y; ++j) {
    hi = std::max(hi, path.at(j));
    best = std::min(best, path.at(j) - hi);
  }
  return best;
}

double critical_height(long n, double epsilon, double kappa) {
  return (1.0 - epsilon) / kappa * std::log(static_cast<double>(n));
}

double valley_depth(long n, double kappa) { return (1.0 + 1.0 / kappa) * std::log(static_cast<double>(n)); }

DeepValleyScan detect_deep_valleys(const PotentialPath& path, long n, double epsilon, double kappa,
                                   bool require_next) {
  if (n < 1) throw DomainError("detect_deep_valleys: n must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0 / 3.0)) throw DomainError("detect_deep_valleys: epsilon outside (0,1/3)");
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("detect_deep_valleys: kappa outside (0,1)");
  if (!path.contains(0)) throw DomainError("detect_deep_valleys: path must contain site 0");

  DeepValleyScan scan;
  scan.n = n;
  scan.h_n = critical_height(n, epsilon, kappa);
  scan.D_n = valley_depth(n, kappa);

  // Single pass over the ladder structure; only deep excursions are kept.
  long i = 0;
  long start = 0;
  double top = path.at(0);
  long argmax = 0;
  std::vector<std::pair<long, long>> deep;     // (sigma, b)
  std::vector<std::pair<long, long>> deep_cd;  // (c, d_bar)
  for (long x = 1;; ++x) {
    if (i > n && (!require_next || scan.has_next)) break;
    if (x > path.hi()) exhausted(Side::right, x, "deep valley scan");
    const double v = path.at(x);
    if (v > top) {
      top = v;
      argmax = x;
    }
    if (v <= path.at(start)) {
      if (top - path.at(start) >= scan.h_n) {
        deep.emplace_back(i, start);
        deep_cd.emplace_back(argmax, x);
        if (i > n) scan.has_next = true;
      }
      ++i;
      start = x;
      top = v;
      argmax = x;
      if (i == n) scan.e_n = start;
    }
  }
  scan.K_n = 0;
  for (auto [s, b] : deep)
    if (s <= n) ++scan.K_n;

  for (std::size_t j = 0; j < deep.size(); ++j) {
    DeepValley dv;
    dv.sigma = deep[j].first;
    dv.b = deep[j].second;
    dv.c = deep_cd[j].first;
    dv.d_bar = deep_cd[j].second;
    dv.height = path.at(dv.c) - path.at(dv.b);
    dv.h_n = scan.h_n;
    dv.D_n = scan.D_n;
    dv.a = entry_point(path, dv.b, scan.D_n);
    dv.t_up = dv.b;
    while (path.at(dv.t_up) - path.at(dv.b) < scan.h_n) ++dv.t_up;
    dv.d = exit_point(path, dv.d_bar, scan.D_n);
    scan.valleys.push_back(dv);
  }
  return scan;
}

StarValleyScan detect_star_valleys(const PotentialPath& path, long n, double epsilon, double kappa) {
  if (n < 1) throw DomainError("detect_star_valleys: n must be >= 1");
  if (!path.contains(0)) throw DomainError("detect_star_valleys: path must contain site 0");
  const double h = critical_height(n, epsilon, kappa);
  const double D = valley_depth(n, kappa);
  const auto e = ladder_epochs(path, n);
  if (static_cast<long>(e.size()) <= n) exhausted(Side::right, path.hi() + 1, "star valley scan (e_n)");
  const long e_n = e.back();

  StarValleyScan scan;
  long origin = 0;
  for (;;) {
    const double base = path.at(origin);
    long k = origin;
    while (k <= e_n && path.at(k) - base > -D) ++k;
    if (k > e_n) break;  // gamma > e_n, hence T* > e_n
    StarValley sv;
    sv.gamma = k;
    double m = path.at(k);
    while (k <= e_n) {
      m = std::min(m, path.at(k));
      if (path.at(k) - m >= h) break;
      ++k;
    }
    if (k > e_n) break;
    sv.t_star = k;
    sv.b = origin;
    for (long x = origin; x <= sv.t_star; ++x)
      if (path.at(x) <= path.at(sv.b)) sv.b = x;
    sv.a = entry_point(path, sv.b, D);
    long x = sv.t_star;
    for (;; ++x) {
      require_site(path, x, "star valley d_bar");
      if (path.at(x) <= path.at(sv.b)) break;
    }
    sv.d_bar = x;
    sv.c = first_argmax(path, sv.b, sv.d_bar);
    sv.d = exit_point(path, sv.d_bar, D);
    scan.valleys.push_back(sv);
    origin = sv.d;
  }
  scan.K_star = static_cast<long>(scan.valleys.size());
  return scan;
}

bool valleys_coincide(const DeepValleyScan& deep, const StarValleyScan& star) {
  if (deep.K_n != star.K_star) return false;
  for (long j = 0; j < deep.K_n; ++j) {
    const auto& d = deep.valleys[static_cast<std::size_t>(j)];
    const auto& s = star.valleys[static_cast<std::size_t>(j)];
    if (d.a != s.a || d.b != s.b || d.c != s.c || d.d != s.d) return false;
  }
  return true;
}

GoodEnvironmentConstants default_good_constants(double mean_e1, double kappa, double epsilon) {
  return {2.0 * (mean_e1 + 1.0), 40.0 * (1.0 + 1.0 / kappa), 1.5 * epsilon / kappa};
}

GoodEnvironment check_good_environment(const PotentialPath& path, const DeepValleyScan& scan, double epsilon,
                                       const GoodEnvironmentConstants& k, double q_n) {
  const double n = static_cast<double>(scan.n);
  const double log_n = std::log(n);
  GoodEnvironment g;
  g.A1 = static_cast<double>(scan.e_n) < k.c_prime * n;

  const double slack = std::pow(n, -epsilon / 4.0);
  const double k_lo = std::floor(n * q_n * (1.0 - slack));
  const double k_hi = std::ceil(n * q_n * (1.0 + slack));
  g.A2 = k_lo <= static_cast<double>(scan.K_n) && static_cast<double>(scan.K_n) <= k_hi;

  // Valley K_n + 1 is only checked when it was located.
  const std::size_t checked = std::min<std::size_t>(scan.valleys.size(), static_cast<std::size_t>(scan.K_n) + 1);
  const double gap = std::pow(n, 1.0 - 3.0 * epsilon);
  g.A3 = true;
  long prev = 0;
  for (std::size_t j = 0; j < checked; ++j) {
    if (static_cast<double>(scan.valleys[j].sigma - prev) < gap) g.A3 = false;
    prev = scan.valleys[j].sigma;
  }
  g.A4 = true;
  for (std::size_t j = 0; j < checked; ++j)
    if (static_cast<double>(scan.valleys[j].d - scan.valleys[j].a) > k.c_double_prime * log_n) g.A4 = false;

  g.A5 = true;
  if (!scan.valleys.empty()) {
    const auto& v = scan.valleys.front();
    const double worst = std::max({up_or_zero(path, v.a, v.b), -down_or_zero(path, v.b, v.c),
                                   up_or_zero(path, v.c, v.d)});
    g.A5 = worst <= k.delta * log_n;
  }
  return g;
}

void write_valley_census(std::ostream& out, const std::vector<DeepValley>& valleys) {
  out << "j,a,b,c,d,height,width\n";
  out.precision(17);
  for (std::size_t j = 0; j < valleys.size(); ++j) {
    const auto& v = valleys[j];
    out << j + 1 << ',' << v.a << ',' << v.b << ',' << v.c << ',' << v.d << ',' << v.height << ','
        << v.d - v.a << '\n';
  }
}

}  // namespace rwre
