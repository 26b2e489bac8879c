#include "rwre/quenched.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "rwre/error.hpp"

namespace rwre {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double logaddexp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void require_range(const QuenchedChain& c, long x, long y, const char* what) {
  if (!(x < y) || !c.contains(x) || !c.contains(y)) throw DomainError(std::string(what) + ": range outside chain");
}

// log sum_k e^{P_k} and log E[(sum_k N_k)^2] for a crossing-count chain with
// E N_k = e^{P_k}, geometric offspring and N_1 = 1.
struct ProfileMoments {
  double log_first = -kInf;
  double log_second = -kInf;
};

ProfileMoments profile_moments(const std::vector<double>& P) {
  const std::size_t K = P.size();
  ProfileMoments out;
  if (K == 0) return out;
  std::vector<double> suffix(K + 1, -kInf);  // log sum_{l >= k} e^{P_l}
  for (std::size_t k = K; k-- > 0;) suffix[k] = logaddexp(suffix[k + 1], P[k]);
  double prefix = -kInf;  // log sum_{l < k} e^{-P_l}
  const double log2 = std::numbers::ln2;
  for (std::size_t k = 0; k < K; ++k) {
    const double log_sq = logaddexp(P[k], log2 + 2.0 * P[k] + prefix);
    const double cross = logaddexp(0.0, log2 + suffix[k + 1] - P[k]);
    out.log_second = logaddexp(out.log_second, log_sq + cross);
    prefix = logaddexp(prefix, -P[k]);
  }
  out.log_first = suffix[0];
  return out;
}

QuenchedChain subchain(const QuenchedChain& c, long l, long r, std::optional<long> reflect) {
  QuenchedChain s;
  s.left = l;
  s.right = r;
  s.omega.assign(c.omega.begin() + (l - c.left), c.omega.begin() + (r - c.left) + 1);
  s.v.assign(c.v.begin() + (l - c.left), c.v.begin() + (r - c.left) + 1);
  s.reflect_at = reflect;
  return s;
}

double negbin(double r, double omega, CounterRng& rng) {
  if (r <= 0.0) return 0.0;
  if (r == 1.0) return std::floor(std::log(rng.uniform()) / std::log1p(-omega));
  std::gamma_distribution<double> gamma(r, (1.0 - omega) / omega);
  const double lambda = gamma(rng);
  if (lambda <= 0.0) return 0.0;
  if (lambda > 1e15) return std::round(lambda);  // Poisson noise below double resolution
  std::poisson_distribution<long long> poisson(lambda);
  return static_cast<double>(poisson(rng));
}

void grow(EnvironmentSlice& env, long x, const EnvironmentLaw* law) {
  if (env.contains(x)) return;
  if (!law)
    throw WindowExhausted(x < env.lo() ? WindowExhausted::Side::left : WindowExhausted::Side::right, x,
                          "walk left the environment window at site " + std::to_string(x));
  const long pad = std::max<long>(1024, static_cast<long>(env.omegas.size()) / 2);
  if (x < env.lo())
    extend_environment(*law, env, x - pad, env.hi());
  else
    extend_environment(*law, env, env.lo(), x + pad);
}

}  // namespace

double QuenchedChain::omega_at(long x) const {
  if (reflect_at && *reflect_at == x) return 1.0;
  return raw_omega(x);
}

QuenchedChain make_chain(long left, std::vector<double> omegas, std::optional<long> reflect_at, double v_left) {
  if (omegas.size() < 2) throw DomainError("make_chain: need at least two sites");
  for (double w : omegas)
    if (!(w > 0.0 && w < 1.0)) throw DomainError("make_chain: omega outside (0,1)");
  QuenchedChain c;
  c.left = left;
  c.right = left + static_cast<long>(omegas.size()) - 1;
  if (reflect_at && (*reflect_at < c.left || *reflect_at >= c.right))
    throw DomainError("make_chain: reflection site outside [left, right)");
  c.reflect_at = reflect_at;
  c.v.resize(omegas.size());
  c.v[0] = v_left;
  for (std::size_t i = 1; i < omegas.size(); ++i) c.v[i] = c.v[i - 1] + (std::log(1.0 - omegas[i]) - std::log(omegas[i]));
  c.omega = std::move(omegas);
  return c;
}

QuenchedChain chain_from_environment(const EnvironmentSlice& env, const PotentialPath& path, long a, long d,
                                     std::optional<long> reflect_at) {
  if (!(a < d) || !env.contains(a) || !env.contains(d) || !path.contains(a) || !path.contains(d))
    throw DomainError("chain_from_environment: [a, d] outside the realized window");
  QuenchedChain c;
  c.left = a;
  c.right = d;
  c.reflect_at = reflect_at;
  for (long x = a; x <= d; ++x) {
    c.omega.push_back(env.at(x));
    c.v.push_back(path.at(x));
  }
  return c;
}

double exit_prob(const QuenchedChain& chain, long x, long l, long r) {
  require_range(chain, l, r, "exit_prob");
  if (x < l || x > r) throw DomainError("exit_prob: start outside [l, r]");
  double shift = -kInf;
  for (long k = l; k < r; ++k) shift = std::max(shift, chain.V(k));
  double num = 0.0;
  double den = 0.0;
  for (long k = l; k < r; ++k) {
    const double e = std::exp(chain.V(k) - shift);
    if (k < x) num += e;
    den += e;
  }
  return x == r ? 1.0 : num / den;
}

FailureProb failure_prob(const QuenchedChain& chain, long b, long d) {
  require_range(chain, b, d, "failure_prob");
  double shift = -kInf;
  for (long k = b; k < d; ++k) shift = std::max(shift, chain.V(k));
  const double eb = std::exp(chain.V(b) - shift);
  double rest = 0.0;
  for (long k = b + 1; k < d; ++k) rest += std::exp(chain.V(k) - shift);
  const double w = chain.omega_at(b);
  const double total = eb + rest;
  return {(1.0 - w) + w * (rest / total), w * (eb / total)};
}

double HTransform::increment(const QuenchedChain& chain, long x, long y) const {
  const double dv = chain.V(y) - chain.V(x);
  if (kind == HKind::failure) return dv + (corr_at(x) - corr_at(y));
  return dv - (corr_at(y) - corr_at(x));
}

HTransform h_transform(const QuenchedChain& chain, long b, long d, HKind kind) {
  require_range(chain, b, d, "h_transform");
  const std::size_t n = static_cast<std::size_t>(d - b + 1);
  HTransform t;
  t.kind = kind;
  t.b = b;
  t.d = d;
  t.omega_t.assign(n, kNaN);
  t.v_t.assign(n, kInf);
  t.correction.assign(n, kNaN);
  t.log_h.assign(n, -kInf);
  auto idx = [b](long x) { return static_cast<std::size_t>(x - b); };

  if (kind == HKind::failure) {
    // h(x) = S(x)/S(b), S(x) = sum_{k=x}^{d-1} e^{V(k)}
    std::vector<double> log_s(n, -kInf);
    for (long x = d - 1; x >= b; --x) log_s[idx(x)] = logaddexp(chain.V(x), log_s[idx(x + 1)]);
    for (long x = b; x <= d; ++x) t.log_h[idx(x)] = log_s[idx(x)] - log_s[0];
    for (long x = b; x < d; ++x) {
      t.correction[idx(x)] = t.log_h[idx(x)] + t.log_h[idx(x + 1)];
      t.omega_t[idx(x)] = chain.omega_at(x) * std::exp(t.log_h[idx(x + 1)] - t.log_h[idx(x)]);
    }
    for (long x = b; x + 2 <= d; ++x) t.v_t[idx(x)] = chain.V(x) + (t.correction[0] - t.correction[idx(x)]);
  } else {
    // g(x) = P(x)/P(d), P(x) = sum_{k=b}^{x-1} e^{V(k)}, g(d+1) := 1
    std::vector<double> log_p(n, -kInf);
    for (long x = b + 1; x <= d; ++x) log_p[idx(x)] = logaddexp(log_p[idx(x - 1)], chain.V(x - 1));
    for (long x = b; x <= d; ++x) t.log_h[idx(x)] = log_p[idx(x)] - log_p[idx(d)];
    for (long x = b; x <= d; ++x) t.correction[idx(x)] = t.log_h[idx(x)] + (x < d ? t.log_h[idx(x + 1)] : 0.0);
    for (long x = b + 1; x < d; ++x)
      t.omega_t[idx(x)] = 1.0 - (1.0 - chain.omega_at(x)) * std::exp(t.log_h[idx(x - 1)] - t.log_h[idx(x)]);
    if (b + 1 <= d) {
      const double anchor = t.correction[idx(b + 1)];
      for (long x = b + 1; x <= d; ++x) t.v_t[idx(x)] = chain.V(x) + (anchor - t.correction[idx(x)]);
    }
  }

  for (long x = b + 1; x < d; ++x) {
    const double w = chain.omega_at(x);
    const double r = w * std::exp(t.log_h[idx(x + 1)] - t.log_h[idx(x)]) +
                     (1.0 - w) * std::exp(t.log_h[idx(x - 1)] - t.log_h[idx(x)]) - 1.0;
    t.harmonic_residual = std::max(t.harmonic_residual, std::abs(r));
  }
  if (!(t.harmonic_residual <= 1e-9)) throw DomainError("h_transform: harmonic function degenerate");
  return t;
}

AttemptMoments attempt_moments(const QuenchedChain& chain, long a, long b, long d) {
  if (!(a < b && b < d) || !chain.contains(a) || !chain.contains(d))
    throw DomainError("attempt_moments: need a < b < d inside the chain");
  const QuenchedChain c = subchain(chain, a, d, a);
  const HTransform fail = h_transform(c, b, d, HKind::failure);
  const HTransform succ = h_transform(c, b, d, HKind::success);
  AttemptMoments m;

  const double w = c.omega_at(b);
  const FailureProb fp = failure_prob(c, b, d);
  const double right_w = w * std::exp(fail.log_h[1]);  // omega_b h(b+1)
  m.p_fail = fp.p;
  m.one_minus_p = fp.one_minus_p;

  // Right side: up-crossing counts of the failure h-process.
  std::vector<double> right;
  for (long k = 1; k <= d - 1 - b; ++k) right.push_back(-fail.increment(c, b, b + k - 1));
  // Left side: down-crossing counts of the walk reflected at a.
  std::vector<double> left;
  for (long k = 1; k <= b - a; ++k) left.push_back(c.V(b - 1) - c.V(b - k));
  const ProfileMoments pr = profile_moments(right);
  const ProfileMoments pl = profile_moments(left);
  m.mean_F = 2.0 / m.p_fail * (right_w * std::exp(pr.log_first) + (1.0 - w) * std::exp(pl.log_first));
  m.second_F = 4.0 / m.p_fail * (right_w * std::exp(pr.log_second) + (1.0 - w) * std::exp(pl.log_second));

  // G: one step to b+1, then the success h-process (reflecting at b+1) to d.
  double acc = 0.0;
  double inner = 0.0;
  for (long x = b + 1; x < d; ++x) {
    const double rho_bar = x == b + 1 ? 0.0 : std::exp(succ.increment(c, x - 1, x));
    inner = rho_bar * inner + 1.0 / succ.omega_at(x);
    acc += inner;
  }
  m.mean_G_exact = 1.0 + acc;
  double tail = 1.0;
  double bound = 1.0;
  for (long i = d - 1; i >= b + 1; --i) {
    tail = 1.0 + std::exp(succ.increment(c, i, i + 1)) * tail;
    bound += tail;
  }
  m.mean_G_bound = 1.0 + bound;

  for (long x = a + 1; x < b; ++x) m.m1_hat += std::exp(-(c.V(x) - c.V(b)));
  for (long x = b; x + 2 <= d; ++x) m.m1_hat += std::exp(-fail.increment(c, b, x));
  m.c = b;
  for (long x = b + 1; x <= d; ++x)
    if (c.V(x) > c.V(m.c)) m.c = x;
  for (long x = b; x < d; ++x) m.m2 += std::exp(c.V(x) - c.V(m.c));
  return m;
}

std::vector<double> linear_solve_oracle(const QuenchedChain& chain, const std::vector<long>& absorbing,
                                        OracleFunctional functional, long target) {
  const long n = chain.right - chain.left + 1;
  if (absorbing.empty()) throw DomainError("linear_solve_oracle: empty absorbing set");
  std::vector<char> absorb(static_cast<std::size_t>(n), 0);
  for (long x : absorbing) {
    if (!chain.contains(x)) throw DomainError("linear_solve_oracle: absorbing site outside chain");
    absorb[static_cast<std::size_t>(x - chain.left)] = 1;
  }
  const bool needs_target = functional != OracleFunctional::expected_time &&
                            functional != OracleFunctional::second_moment;
  if (needs_target && (!chain.contains(target) || !absorb[static_cast<std::size_t>(target - chain.left)]))
    throw DomainError("linear_solve_oracle: target must be an absorbing site");
  if (!absorb[0] && chain.omega_at(chain.left) != 1.0)
    throw DomainError("linear_solve_oracle: left end must be absorbing or reflecting");
  if (!absorb[static_cast<std::size_t>(n - 1)]) throw DomainError("linear_solve_oracle: right end must be absorbing");

  using LD = long double;
  auto solve = [&](auto&& boundary, auto&& rhs) {
    std::vector<LD> lower(static_cast<std::size_t>(n)), diag(static_cast<std::size_t>(n)),
        upper(static_cast<std::size_t>(n)), r(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (absorb[k]) {
        diag[k] = 1;
        r[k] = boundary(chain.left + i);
        continue;
      }
      const LD w = chain.omega_at(chain.left + i);
      lower[k] = -(1 - w);
      diag[k] = 1;
      upper[k] = -w;
      r[k] = rhs(chain.left + i, w);
    }
    // Thomas elimination
    for (long i = 1; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (lower[k] == 0) continue;
      const LD f = lower[k] / diag[k - 1];
      diag[k] -= f * upper[k - 1];
      r[k] -= f * r[k - 1];
    }
    std::vector<LD> x(static_cast<std::size_t>(n));
    for (long i = n - 1; i >= 0; --i) {
      const auto k = static_cast<std::size_t>(i);
      x[k] = (r[k] - (i + 1 < n ? upper[k] * x[k + 1] : 0)) / diag[k];
    }
    return x;
  };
  auto at = [&](const std::vector<LD>& f, long x) { return f[static_cast<std::size_t>(x - chain.left)]; };
  auto neighbours = [&](const std::vector<LD>& f, long x, LD w) {
    return w * at(f, x + 1) + (x > chain.left ? (1 - w) * at(f, x - 1) : LD(0));
  };
  auto zero = [](long) { return LD(0); };

  std::vector<LD> out;
  const auto hit = [&] {
    return solve([&](long x) { return LD(x == target ? 1 : 0); }, [](long, LD) { return LD(0); });
  };
  const auto time = [&] { return solve(zero, [](long, LD) { return LD(1); }); };
  switch (functional) {
    case OracleFunctional::hit_prob: out = hit(); break;
    case OracleFunctional::expected_time: out = time(); break;
    case OracleFunctional::second_moment: {
      const auto t = time();
      out = solve(zero, [&](long x, LD w) { return 1 + 2 * neighbours(t, x, w); });
      break;
    }
    case OracleFunctional::restricted_time: {
      const auto h = hit();
      out = solve(zero, [&](long x, LD w) { return neighbours(h, x, w); });
      break;
    }
    case OracleFunctional::restricted_second_moment: {
      const auto h = hit();
      const auto u = solve(zero, [&](long x, LD w) { return neighbours(h, x, w); });
      std::vector<LD> hu(h.size());
      for (std::size_t i = 0; i < h.size(); ++i) hu[i] = h[i] + 2 * u[i];
      out = solve(zero, [&](long x, LD w) { return neighbours(hu, x, w); });
      break;
    }
  }
  return std::vector<double>(out.begin(), out.end());
}

OracleAttempt oracle_attempt(const QuenchedChain& chain, long a, long b, long d) {
  if (!(a < b && b < d) || !chain.contains(a) || !chain.contains(d))
    throw DomainError("oracle_attempt: need a < b < d inside the chain");
  const QuenchedChain right = subchain(chain, b, d, std::nullopt);
  const QuenchedChain left = subchain(chain, a, b, a);
  const QuenchedChain whole = subchain(chain, a, d, a);
  auto rv = [&](const std::vector<double>& f, long x) { return f[static_cast<std::size_t>(x - b)]; };
  auto lv = [&](const std::vector<double>& f, long x) { return f[static_cast<std::size_t>(x - a)]; };

  const auto wb = linear_solve_oracle(right, {b, d}, OracleFunctional::hit_prob, b);
  const auto ub = linear_solve_oracle(right, {b, d}, OracleFunctional::restricted_time, b);
  const auto sb = linear_solve_oracle(right, {b, d}, OracleFunctional::restricted_second_moment, b);
  const auto wd = linear_solve_oracle(right, {b, d}, OracleFunctional::hit_prob, d);
  const auto ud = linear_solve_oracle(right, {b, d}, OracleFunctional::restricted_time, d);
  const auto tl = linear_solve_oracle(left, {b}, OracleFunctional::expected_time);
  const auto sl = linear_solve_oracle(left, {b}, OracleFunctional::second_moment);
  const auto tw = linear_solve_oracle(whole, {d}, OracleFunctional::expected_time);

  const double w = chain.raw_omega(b);
  const long r1 = b + 1;
  const long l1 = b - 1;
  OracleAttempt o;
  o.p_fail = w * rv(wb, r1) + (1.0 - w);
  const double first = w * (rv(wb, r1) + rv(ub, r1)) + (1.0 - w) * (1.0 + lv(tl, l1));
  const double second = w * (rv(wb, r1) + 2.0 * rv(ub, r1) + rv(sb, r1)) +
                        (1.0 - w) * (1.0 + 2.0 * lv(tl, l1) + lv(sl, l1));
  o.mean_F = first / o.p_fail;
  o.second_F = second / o.p_fail;
  o.mean_G = 1.0 + rv(ud, r1) / rv(wd, r1);
  o.total_time = lv(tw, b);
  return o;
}

WalkResult simulate_walk(EnvironmentSlice& env, long start, std::optional<long> reflect_at, WalkStop stop,
                         std::uint64_t seed, std::uint64_t step_cap, bool keep_trace, const EnvironmentLaw* law) {
  CounterRng rng(seed, {0x3A1C});
  WalkResult res;
  long x = start;
  if (keep_trace) res.trace.push_back(x);
  for (;;) {
    if (stop.kind == WalkStop::Kind::steps && res.tau == stop.steps) break;
    if (res.tau == step_cap) {
      res.truncated = true;
      break;
    }
    grow(env, x, law);
    const double w = (reflect_at && *reflect_at == x) ? 1.0 : env.at(x);
    x += rng.uniform() < w ? 1 : -1;
    ++res.tau;
    if (keep_trace) res.trace.push_back(x);
    if (stop.kind == WalkStop::Kind::hit_site && x == stop.site) break;
  }
  res.endpoint = x;
  return res;
}

double sample_hitting_time(EnvironmentSlice& env, long n, CounterRng& rng, const EnvironmentLaw* law) {
  if (n < 1) throw DomainError("sample_hitting_time: n must be >= 1");
  grow(env, 0, law);
  grow(env, n - 1, law);
  double u = 0.0;
  double total = 0.0;
  for (long x = n - 1; x >= 0; --x) {
    u = negbin(u + 1.0, env.at(x), rng);
    total += u;
  }
  for (long x = -1; u > 0.0; --x) {
    grow(env, x, law);
    u = negbin(u, env.at(x), rng);
    total += u;
  }
  return static_cast<double>(n) + 2.0 * total;
}

double quenched_log_laplace(const QuenchedChain& chain, long a, long b, long d, double s) {
  if (!(a <= b && b < d) || !chain.contains(a) || !chain.contains(d))
    throw DomainError("quenched_log_laplace: need a <= b < d inside the chain");
  if (s < 0.0) throw DomainError("quenched_log_laplace: s must be >= 0");
  const double m = -std::expm1(-s);
  const double e = std::exp(-s);
  double psi = m;
  double out = b == a ? std::log1p(-psi) : 0.0;
  for (long x = a + 1; x < d; ++x) {
    const double w = chain.omega_at(x);
    const double carry = (1.0 - w) * e * psi;
    psi = (m + carry) / (w + m * (1.0 - w) + carry);
    if (x >= b) out += std::log1p(-psi);
  }
  return out;
}

double quenched_log_laplace(const EnvironmentSlice& env, long from, long to, double s) {
  if (!(env.lo() <= from && from < to && env.contains(to)))
    throw DomainError("quenched_log_laplace: need lo <= from < to inside the window");
  const double m = -std::expm1(-s);
  const double e = std::exp(-s);
  double psi = m;
  double out = from == env.lo() ? std::log1p(-psi) : 0.0;
  for (long x = env.lo() + 1; x < to; ++x) {
    const double w = env.at(x);
    const double carry = (1.0 - w) * e * psi;
    psi = (m + carry) / (w + m * (1.0 - w) + carry);
    if (x >= from) out += std::log1p(-psi);
  }
  return out;
}

double reflected_mean_hitting_time(const EnvironmentSlice& env, long m) {
  if (m <= 0) return 0.0;
  if (!env.contains(0) || !env.contains(m - 1)) throw DomainError("reflected_mean_hitting_time: window too short");
  double inner = 1.0;  // reflection: omega_0 = 1
  double total = inner;
  for (long x = 1; x < m; ++x) {
    const double w = env.at(x);
    inner = (1.0 - w) / w * inner + 1.0 / w;
    total += inner;
  }
  return total;
}

void write_chain(std::ostream& out, const QuenchedChain& chain) {
  out.precision(17);
  if (chain.reflect_at) out << "# reflect " << *chain.reflect_at << '\n';
  for (long x = chain.left; x <= chain.right; ++x) out << x << ' ' << chain.raw_omega(x) << '\n';
}

QuenchedChain load_chain(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open chain fixture '" + file + "'");
  std::optional<long> reflect;
  std::vector<double> omegas;
  long left = 0;
  long expected = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;
    if (tok[0] == '#') {
      std::string key;
      long v = 0;
      if (tok == "#" && ss >> key && key == "reflect" && ss >> v) reflect = v;
      continue;
    }
    long site = 0;
    double w = 0.0;
    try {
      site = std::stol(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad site in chain fixture '" + file + "': " + line);
    }
    if (!(ss >> w)) throw ConfigError("missing omega in chain fixture '" + file + "': " + line);
    if (omegas.empty()) {
      left = site;
      expected = site;
    }
    if (site != expected) throw ConfigError("chain fixture sites must be consecutive: '" + file + "'");
    ++expected;
    omegas.push_back(w);
  }
  try {
    return make_chain(left, std::move(omegas), reflect);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid chain fixture '") + file + "': " + e.what());
  }
}

}  // namespace rwre
