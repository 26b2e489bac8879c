#include "rwre/env_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "rwre/error.hpp"
#include "rwre/kernels.hpp"
#include "rwre/special_functions.hpp"

namespace rwre {
namespace {

constexpr std::uint64_t kEnvStreamTag = 0xE1;

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos != s.size()) throw ConfigError("trailing characters in number: '" + s + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

double log_sum_exp_weighted(const DiscreteLaw& d, double t) {
  double mx = -std::numeric_limits<double>::infinity();
  for (auto [w, p] : d.atoms) mx = std::max(mx, std::log(p) + t * std::log(rho(w)));
  double s = 0.0;
  for (auto [w, p] : d.atoms) s += std::exp(std::log(p) + t * std::log(rho(w)) - mx);
  return mx + std::log(s);
}

// Increasing f with f(lo) < 0 < f(hi); bisects down to the last ulps.
double bisect_root(auto&& f, double lo, double hi, int max_iter = 200) {
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (v == 0.0) break;
    if (v < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  return mid;
}

}  // namespace

EnvironmentLaw EnvironmentLaw::beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError("beta law needs alpha > 0 and beta > 0");
  EnvironmentLaw law;
  law.kind_ = BetaLaw{alpha, beta};
  return law;
}

EnvironmentLaw EnvironmentLaw::discrete(std::vector<std::pair<double, double>> atoms) {
  if (atoms.empty()) throw DomainError("discrete law needs at least one atom");
  double total = 0.0;
  for (auto [w, p] : atoms) {
    if (!(w > 0.0 && w < 1.0)) throw DomainError("discrete atom outside (0,1): " + fmt(w));
    if (!(p > 0.0)) throw DomainError("discrete probability must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("discrete probabilities sum to " + fmt(total));
  EnvironmentLaw law;
  law.kind_ = DiscreteLaw{std::move(atoms)};
  return law;
}

EnvironmentLaw EnvironmentLaw::parse(const std::string& raw) {
  const std::string text = trim(raw);
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("law must look like beta:A,B or discrete:w@p;...");
  const std::string kind = trim(text.substr(0, colon));
  const std::string body = text.substr(colon + 1);
  try {
    if (kind == "beta") {
      const auto comma = body.find(',');
      if (comma == std::string::npos) throw ConfigError("beta law needs two parameters: beta:A,B");
      return beta(parse_number(trim(body.substr(0, comma))), parse_number(trim(body.substr(comma + 1))));
    }
    if (kind == "discrete") {
      std::vector<std::pair<double, double>> atoms;
      std::stringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto at = item.find('@');
        if (at == std::string::npos) throw ConfigError("discrete atom must be w@p, got '" + item + "'");
        atoms.emplace_back(parse_number(trim(item.substr(0, at))), parse_number(trim(item.substr(at + 1))));
      }
      return discrete(std::move(atoms));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid law '") + text + "': " + e.what());
  }
  throw ConfigError("unknown law kind '" + kind + "'");
}

std::string EnvironmentLaw::to_string() const {
  if (is_beta()) return "beta:" + fmt(as_beta().alpha) + "," + fmt(as_beta().beta);
  std::string s = "discrete:";
  bool first = true;
  for (auto [w, p] : as_discrete().atoms) {
    if (!first) s += ";";
    first = false;
    s += fmt(w) + "@" + fmt(p);
  }
  return s;
}

double EnvironmentLaw::sample(CounterRng& rng) const {
  if (is_beta()) {
    const auto [a, b] = as_beta();
    for (;;) {
      double w;
      if (b == 1.0) {
        w = std::pow(rng.uniform(), 1.0 / a);
      } else if (a == 1.0) {
        w = 1.0 - std::pow(rng.uniform(), 1.0 / b);
      } else {
        std::gamma_distribution<double> ga(a, 1.0);
        std::gamma_distribution<double> gb(b, 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        w = x / (x + y);
      }
      if (w > 0.0 && w < 1.0) return w;
    }
  }
  const auto& atoms = as_discrete().atoms;
  const double u = rng.uniform();
  double cum = 0.0;
  for (auto [w, p] : atoms) {
    cum += p;
    if (u < cum) return w;
  }
  return atoms.back().first;
}

double EnvironmentLaw::mean_log_rho() const {
  if (is_beta()) return digamma(as_beta().beta) - digamma(as_beta().alpha);
  double m = 0.0;
  for (auto [w, p] : as_discrete().atoms) m += p * std::log(rho(w));
  return m;
}

double EnvironmentLaw::moment_bound() const {
  return is_beta() ? as_beta().alpha : std::numeric_limits<double>::infinity();
}

double rho(double omega) {
  if (!(omega > 0.0 && omega < 1.0)) throw DomainError("rho: omega must lie in (0,1)");
  return (1.0 - omega) / omega;
}

EnvironmentSlice sample_environment(const EnvironmentLaw& law, long lo, long hi, std::uint64_t seed) {
  if (lo > hi) throw DomainError("sample_environment: lo > hi");
  EnvironmentSlice s;
  s.offset = lo;
  s.seed = seed;
  s.law = law.to_string();
  s.omegas.resize(static_cast<std::size_t>(hi - lo + 1));
  for (long blk = floor_div(lo, kEnvironmentBlock); blk <= floor_div(hi, kEnvironmentBlock); ++blk) {
    CounterRng rng(seed, {kEnvStreamTag, static_cast<std::uint64_t>(blk)});
    const long first = blk * kEnvironmentBlock;
    for (long x = first; x < first + kEnvironmentBlock; ++x) {
      const double w = law.sample(rng);
      if (x >= lo && x <= hi) s.omegas[static_cast<std::size_t>(x - lo)] = w;
    }
  }
  return s;
}

void extend_environment(const EnvironmentLaw& law, EnvironmentSlice& slice, long lo, long hi) {
  if (slice.omegas.empty()) {
    slice = sample_environment(law, lo, hi, slice.seed);
    return;
  }
  if (lo < slice.lo()) {
    auto left = sample_environment(law, lo, slice.lo() - 1, slice.seed);
    left.omegas.insert(left.omegas.end(), slice.omegas.begin(), slice.omegas.end());
    slice.omegas = std::move(left.omegas);
    slice.offset = lo;
  }
  if (hi > slice.hi()) {
    auto right = sample_environment(law, slice.hi() + 1, hi, slice.seed);
    slice.omegas.insert(slice.omegas.end(), right.omegas.begin(), right.omegas.end());
  }
}

double lambda_fn(const EnvironmentLaw& law, double t) {
  if (law.is_beta()) {
    const auto [a, b] = law.as_beta();
    if (!(t < a) || !(t > -b)) throw DomainError("lambda_fn: E[rho^t] diverges for this t");
    return log_beta(a - t, b + t) - log_beta(a, b);
  }
  return log_sum_exp_weighted(law.as_discrete(), t);
}

double lambda_derivative(const EnvironmentLaw& law, double t) {
  if (law.is_beta()) {
    const auto [a, b] = law.as_beta();
    if (!(t < a) || !(t > -b)) throw DomainError("lambda_derivative: E[rho^t] diverges for this t");
    return digamma(b + t) - digamma(a - t);
  }
  const auto& d = law.as_discrete();
  const double lse = log_sum_exp_weighted(d, t);
  double s = 0.0;
  for (auto [w, p] : d.atoms) {
    const double lr = std::log(rho(w));
    s += std::exp(std::log(p) + t * lr - lse) * lr;
  }
  return s;
}

double lambda_quadrature(const EnvironmentLaw& law, double t) {
  if (!law.is_beta()) return lambda_fn(law, t);
  const auto [a, b] = law.as_beta();
  if (!(t < a) || !(t > -b)) throw DomainError("lambda_quadrature: E[rho^t] diverges for this t");
  // E[rho^t] = B(a - t, b + t) / B(a, b); integrate w^{a-t-1}(1-w)^{b+t-1}
  // with w = 1 / (1 + e^{-s}), s = pi sinh(u).
  const double p = a - t;
  const double q = b + t;
  auto trapezoid = [&](double h) {
    double sum = 0.0;
    const int n = static_cast<int>(std::ceil(6.5 / h));
    for (int k = -n; k <= n; ++k) {
      const double u = k * h;
      const double s = std::numbers::pi * std::sinh(u);
      const double log_w = -(std::max(-s, 0.0) + std::log1p(std::exp(-std::abs(s))));
      const double log_1mw = -(std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))));
      sum += std::exp(p * log_w + q * log_1mw + std::log(std::numbers::pi * std::cosh(u)));
    }
    return sum * h;
  };
  double h = 0.5;
  double prev = trapezoid(h);
  for (int level = 0; level < 10; ++level) {
    h *= 0.5;
    const double cur = trapezoid(h);
    if (std::abs(cur - prev) <= 1e-15 * cur) return std::log(cur) - log_beta(a, b);
    prev = cur;
  }
  return std::log(prev) - log_beta(a, b);
}

const char* kappa_method_name(KappaMethod m) {
  switch (m) {
    case KappaMethod::closed_form: return "closed_form";
    case KappaMethod::bisection_exact: return "bisection_exact";
    case KappaMethod::bisection_quadrature: return "bisection_quadrature";
    case KappaMethod::bisection_mc: return "bisection_mc";
  }
  return "?";
}

KappaResult kappa_solve(const EnvironmentLaw& law, const KappaOptions& opts) {
  if (!(law.mean_log_rho() < 0.0))
    throw RegimeError("no_root_in_unit_interval: E[log rho] >= 0 for " + law.to_string() +
                      " (recurrent or left-transient)");

  if (law.is_beta() && opts.allow_closed_form && !opts.use_quadrature && !opts.use_monte_carlo) {
    const double k = law.as_beta().alpha - law.as_beta().beta;
    if (!(k > 0.0 && k < 1.0))
      throw RegimeError("no_root_in_unit_interval: alpha - beta = " + fmt(k) + " for " + law.to_string() +
                        " (ballistic regime)");
    return {k, std::abs(std::expm1(lambda_fn(law, k))), KappaMethod::closed_form};
  }

  KappaMethod method = KappaMethod::bisection_exact;
  std::vector<double> logs;
  if (opts.use_monte_carlo) {
    method = KappaMethod::bisection_mc;
    const auto env = sample_environment(law, 0, static_cast<long>(opts.mc_draws) - 1, opts.mc_seed);
    logs.resize(env.omegas.size());
    kernels::log_rho(env.omegas, logs);
  } else if (opts.use_quadrature && law.is_beta()) {
    method = KappaMethod::bisection_quadrature;
  }
  std::vector<double> scaled(logs.size());
  auto big_lambda = [&](double t) {
    switch (method) {
      case KappaMethod::bisection_mc: {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < logs.size(); ++i) {
          scaled[i] = t * logs[i];
          mx = std::max(mx, scaled[i]);
        }
        return mx + std::log(kernels::sum_exp(scaled, mx) / static_cast<double>(logs.size()));
      }
      case KappaMethod::bisection_quadrature: return lambda_quadrature(law, t);
      default: return lambda_fn(law, t);
    }
  };

  const double lo = 1e-6;
  const double hi = std::min(1.0 - 1e-6, law.moment_bound() - 1e-6);
  if (!(big_lambda(hi) > 0.0))
    throw RegimeError("no_root_in_unit_interval: Lambda stays negative on (0,1) for " + law.to_string() +
                      " (ballistic regime)");
  if (!(big_lambda(lo) < 0.0)) throw RegimeError("no_root_in_unit_interval: root below 1e-6");
  const double k = bisect_root(big_lambda, lo, hi);
  const double residual = std::abs(std::expm1(big_lambda(k)));
  if (residual > opts.tol && method == KappaMethod::bisection_exact)
    throw RegimeError("kappa_solve: residual " + fmt(residual) + " above tolerance");
  return {k, residual, method};
}

double moment_rho_log(const EnvironmentLaw& law, double kappa) {
  double m = 0.0;
  if (law.is_beta()) {
    m = std::exp(lambda_fn(law, kappa)) * lambda_derivative(law, kappa);
  } else {
    for (auto [w, p] : law.as_discrete().atoms) {
      const double r = rho(w);
      m += p * std::pow(r, kappa) * std::log(r);
    }
  }
  if (m < 0.0) throw DomainError("moment_rho_log: E[rho^k log rho] < 0, kappa is not the positive root");
  return m;
}

RateValue rate_function(const EnvironmentLaw& law, double x) {
  const double mean = law.mean_log_rho();
  if (x < mean) return {0.0, false, true};
  if (x == mean) return {0.0, false, false};

  if (!law.is_beta()) {
    double top = -std::numeric_limits<double>::infinity();
    for (auto [w, p] : law.as_discrete().atoms) top = std::max(top, std::log(rho(w)));
    if (x > top) return {kInfiniteRate, true, false};
    if (x == top) {
      double p_top = 0.0;
      for (auto [w, p] : law.as_discrete().atoms)
        if (std::log(rho(w)) == top) p_top += p;
      return {-std::log(p_top), false, false};
    }
  }

  // tx - Lambda(t) is concave; its maximiser solves Lambda'(t) = x.
  auto slope = [&](double t) { return lambda_derivative(law, t) - x; };
  double hi = 1.0;
  if (law.is_beta()) {
    const double a = law.as_beta().alpha;
    hi = 0.5 * a;
    while (slope(hi) < 0.0) hi = 0.5 * (hi + a);
  } else {
    while (slope(hi) < 0.0) hi *= 2.0;
  }
  const double t = bisect_root(slope, 0.0, hi);
  return {std::max(0.0, t * x - lambda_fn(law, t)), false, false};
}

}  // namespace rwre
