#include "rwre/constants.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rwre/error.hpp"
#include "rwre/kernels.hpp"
#include "rwre/parallel.hpp"
#include "rwre/special_functions.hpp"
#include "rwre/stats.hpp"

namespace rwre {
namespace {

constexpr std::size_t kBlock = 4096;

double draw_log_rho(const EnvironmentLaw& law, CounterRng& rng) {
  const double w = law.sample(rng);
  return std::log(1.0 - w) - std::log(w);
}

void require_regime(double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw RegimeError("kappa outside (0,1)");
}

}  // namespace

ExcursionSample sample_excursions(const EnvironmentLaw& law, const McOptions& mc, long max_length) {
  if (!(law.mean_log_rho() < 0.0)) throw RegimeError("no_root_in_unit_interval: E[log rho] >= 0");
  const std::size_t n_blocks = block_count(mc.samples, kBlock);
  std::vector<ExcursionSample> parts(n_blocks);
  parallel_blocks(n_blocks, mc.workers, [&](std::size_t blk) {
    CounterRng rng(mc.seed, {0xC1, blk});
    ExcursionSample& out = parts[blk];
    const std::uint64_t count = std::min<std::uint64_t>(kBlock, mc.samples - blk * kBlock);
    for (std::uint64_t i = 0; i < count; ++i) {
      double v = 0.0;
      double h = 0.0;
      long k = 0;
      for (;;) {
        v += draw_log_rho(law, rng);
        ++k;
        if (v <= 0.0) break;
        h = std::max(h, v);
        if (k >= max_length) break;
      }
      if (v > 0.0) {
        ++out.flagged;
        continue;
      }
      out.length.push_back(static_cast<double>(k));
      out.end_value.push_back(v);
      out.height.push_back(h);
    }
  });
  ExcursionSample all;
  for (auto& p : parts) {
    all.length.insert(all.length.end(), p.length.begin(), p.length.end());
    all.end_value.insert(all.end_value.end(), p.end_value.begin(), p.end_value.end());
    all.height.insert(all.height.end(), p.height.begin(), p.height.end());
    all.flagged += p.flagged;
  }
  return all;
}

IglehartEstimate iglehart_from_sample(const ExcursionSample& s, double kappa, double moment) {
  require_regime(kappa);
  if (!(moment > 0.0)) throw DomainError("iglehart: E[rho^kappa log rho] must be positive");
  const std::size_t n = s.length.size();
  if (n < 2) throw DomainError("iglehart: need at least two excursions");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::exp(kappa * s.end_value[i]);
    my += s.length[i];
  }
  const double nn = static_cast<double>(n);
  mx /= nn;
  my /= nn;
  double vxx = 0.0, vyy = 0.0, vxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::exp(kappa * s.end_value[i]) - mx;
    const double dy = s.length[i] - my;
    vxx += dx * dx;
    vyy += dy * dy;
    vxy += dx * dy;
  }
  vxx /= nn - 1.0;
  vyy /= nn - 1.0;
  vxy /= nn - 1.0;
  IglehartEstimate e;
  e.n = n;
  e.flagged = s.flagged;
  e.moment = moment;
  e.e_kv = mx;
  e.e_kv_se = std::sqrt(vxx / nn);
  e.mean_e1 = my;
  e.mean_e1_se = std::sqrt(vyy / nn);
  e.c_i = (1.0 - mx) * (1.0 - mx) / (kappa * moment * my);
  const double gx = -2.0 * (1.0 - mx) / (kappa * moment * my);
  const double gy = -e.c_i / my;
  e.c_i_se = std::sqrt(std::max(0.0, (gx * gx * vxx + 2.0 * gx * gy * vxy + gy * gy * vyy) / nn));
  return e;
}

IglehartEstimate iglehart_constant(const EnvironmentLaw& law, double kappa, const McOptions& mc) {
  require_regime(kappa);
  return iglehart_from_sample(sample_excursions(law, mc), kappa, moment_rho_log(law, kappa));
}

TailCensus exponential_tail_census(const std::vector<double>& sample, double kappa, const std::vector<double>& grid) {
  if (sample.empty() || grid.empty()) throw DomainError("tail census: empty sample or grid");
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());
  TailCensus c;
  c.n = sorted.size();
  c.level_grid = grid;
  const double n = static_cast<double>(sorted.size());
  double se_sum = 0.0;
  for (double h : grid) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), h);
    const double p = static_cast<double>(sorted.end() - it) / n;
    const double scale = std::exp(kappa * h);
    c.raw_tail.push_back(p);
    c.scaled.push_back(scale * p);
    c.scaled_se.push_back(scale * std::sqrt(p * (1.0 - p) / n));
    c.constant_hat += scale * p;
    se_sum += c.scaled_se.back();
  }
  c.constant_hat /= static_cast<double>(grid.size());
  c.constant_se = se_sum / static_cast<double>(grid.size());  // fully correlated bound
  return c;
}

std::vector<double> sample_supremum(const EnvironmentLaw& law, const McOptions& mc, double gap) {
  if (!(law.mean_log_rho() < 0.0)) throw RegimeError("no_root_in_unit_interval: E[log rho] >= 0");
  const std::size_t n_blocks = block_count(mc.samples, kBlock);
  std::vector<std::vector<double>> parts(n_blocks);
  parallel_blocks(n_blocks, mc.workers, [&](std::size_t blk) {
    CounterRng rng(mc.seed, {0xC2, blk});
    const std::uint64_t count = std::min<std::uint64_t>(kBlock, mc.samples - blk * kBlock);
    for (std::uint64_t i = 0; i < count; ++i) {
      double v = 0.0;
      double s = 0.0;
      while (v > s - gap) {
        v += draw_log_rho(law, rng);
        s = std::max(s, v);
      }
      parts[blk].push_back(s);
    }
  });
  std::vector<double> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  return all;
}

double feller_constant(double c_i, double e_kv) {
  if (!(e_kv > 0.0 && e_kv < 1.0)) throw DomainError("feller_constant: E[e^{kappa V(e_1)}] outside (0,1)");
  if (!(c_i > 0.0)) throw DomainError("feller_constant: C_I must be positive");
  return c_i / (1.0 - e_kv);
}

double kesten_constant_beta(double alpha, double beta) {
  const double kappa = alpha - beta;
  if (!(alpha > 0.0 && beta > 0.0)) throw DomainError("kesten_constant_beta: parameters must be positive");
  if (!(kappa > 0.0 && kappa < 1.0)) throw RegimeError("no_root_in_unit_interval: alpha - beta outside (0,1)");
  return 1.0 / (kappa * std::exp(log_beta(alpha, beta)));
}

std::vector<double> sample_perpetuities(const EnvironmentLaw& law, const KestenOptions& opts,
                                        std::uint64_t* truncated) {
  if (!(law.mean_log_rho() < 0.0)) throw RegimeError("no_root_in_unit_interval: E[log rho] >= 0");
  const std::size_t n_blocks = block_count(opts.n_series, kBlock);
  std::vector<double> out(opts.n_series);
  std::vector<std::uint64_t> cut(n_blocks, 0);
  parallel_blocks(n_blocks, opts.workers, [&](std::size_t blk) {
    CounterRng rng(opts.seed, {0xCE, blk});
    const std::size_t first = blk * kBlock;
    const std::size_t count = std::min<std::size_t>(kBlock, opts.n_series - first);
    std::vector<double> prod(count, 1.0), total(count, 0.0), rho(count, 0.0);
    std::vector<std::size_t> id(count);
    for (std::size_t i = 0; i < count; ++i) id[i] = first + i;
    std::size_t size = count;
    for (std::uint64_t term = 0; size > 0; ++term) {
      if (term == opts.max_terms) {
        for (std::size_t i = 0; i < size; ++i)
          if (prod[i] != 0.0) {
            out[id[i]] = total[i];
            ++cut[blk];
          }
        break;
      }
      for (std::size_t i = 0; i < size; ++i)
        if (prod[i] != 0.0) {
          const double w = law.sample(rng);
          rho[i] = (1.0 - w) / w;
        }
      const std::size_t live = kernels::perpetuity_step(std::span(prod.data(), size), std::span(total.data(), size),
                                                        std::span<const double>(rho.data(), size), opts.rel_tol);
      if (live * 2 <= size) {
        std::size_t j = 0;
        for (std::size_t i = 0; i < size; ++i) {
          if (prod[i] == 0.0) {
            out[id[i]] = total[i];
            continue;
          }
          prod[j] = prod[i];
          total[j] = total[i];
          id[j] = id[i];
          ++j;
        }
        size = j;
      }
    }
  });
  if (truncated) {
    *truncated = 0;
    for (auto c : cut) *truncated += c;
  }
  return out;
}

TailEstimate fit_power_tail(std::vector<double> sample, double kappa, const KestenOptions& opts) {
  require_regime(kappa);
  const std::size_t n = sample.size();
  if (n < 2000) throw DomainError("fit_power_tail: need at least 2000 samples");
  std::sort(sample.begin(), sample.end());
  const double nn = static_cast<double>(n);
  const double lo = sample[static_cast<std::size_t>(std::floor(0.999 * nn))];
  const double hi = sample[n - 201];
  TailEstimate t;
  t.n = n;
  t.hill_k = std::min(stats::default_hill_k(n), n - 1);

  const std::size_t g = std::max<std::size_t>(opts.grid_points, 2);
  if (hi > lo) {
    for (std::size_t i = 0; i < g; ++i)
      t.level_grid.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) /
                                                         static_cast<double>(g - 1)));
  } else {
    t.level_grid.push_back(lo);
  }
  auto fit = [&](const std::vector<double>& top, double total) {
    // top: ascending values of the retained tail; the rest lie below every level.
    double c = 0.0;
    std::vector<double> tail;
    for (double x : t.level_grid) {
      const auto it = std::upper_bound(top.begin(), top.end(), x);
      const double p = static_cast<double>(top.end() - it) / total;
      tail.push_back(p);
      c += std::pow(x, kappa) * p;
    }
    c /= static_cast<double>(t.level_grid.size());
    const std::size_t k = t.hill_k;
    const double thr = std::log(top[top.size() - 1 - k]);
    double s = 0.0;
    for (std::size_t i = top.size() - k; i < top.size(); ++i) s += std::log(top[i]) - thr;
    return std::make_pair(std::make_pair(c, static_cast<double>(k) / s), tail);
  };

  const std::size_t above_lo = n - static_cast<std::size_t>(std::upper_bound(sample.begin(), sample.end(), lo) - sample.begin());
  const std::size_t m = std::min(n, std::max<std::size_t>(static_cast<std::size_t>(1.2 * static_cast<double>(t.hill_k + 1)) + 1, above_lo + 1));
  std::vector<double> top(sample.end() - static_cast<long>(m), sample.end());
  const auto base = fit(top, nn);
  t.constant_hat = base.first.first;
  t.index_hat = base.first.second;
  t.raw_tail = base.second;

  if (opts.bootstrap >= 2) {
    CounterRng rng(opts.seed, {0xB0, 0x7A});
    std::binomial_distribution<std::uint64_t> count(n, static_cast<double>(m) / nn);
    std::vector<double> cs, is;
    std::vector<double> res;
    for (std::size_t r = 0; r < opts.bootstrap; ++r) {
      const std::uint64_t mm = count(rng);
      if (mm <= t.hill_k) continue;
      res.resize(mm);
      for (auto& v : res) v = top[static_cast<std::size_t>(rng.uniform() * static_cast<double>(m))];
      std::sort(res.begin(), res.end());
      const auto f = fit(res, nn);
      cs.push_back(f.first.first);
      is.push_back(f.first.second);
    }
    const auto sc = stats::mean_se(cs);
    const auto si = stats::mean_se(is);
    t.constant_se = sc.se * std::sqrt(static_cast<double>(cs.size()));
    t.index_se = si.se * std::sqrt(static_cast<double>(is.size()));
  }
  return t;
}

TailEstimate kesten_tail_estimate(const EnvironmentLaw& law, double kappa, const KestenOptions& opts) {
  require_regime(kappa);
  std::uint64_t truncated = 0;
  auto sample = sample_perpetuities(law, opts, &truncated);
  TailEstimate t = fit_power_tail(std::move(sample), kappa, opts);
  t.truncated = truncated;
  return t;
}

double meander_moment(double c_k, double c_f) {
  if (!(c_k > 0.0 && c_f > 0.0)) throw DomainError("meander_moment: inputs must be positive");
  return c_k / c_f;
}

double c_u(double c_i, double m_moment) {
  if (!(c_i > 0.0 && m_moment > 0.0)) throw DomainError("c_u: inputs must be positive");
  return c_i * m_moment;
}

LimitLawParams limit_scale(double kappa, double c_k, double moment) {
  require_regime(kappa);
  if (!(c_k > 0.0 && moment > 0.0)) throw DomainError("limit_scale: C_K and moment must be positive");
  LimitLawParams p;
  p.kappa = kappa;
  p.c_k = c_k;
  p.moment = moment;
  p.lambda_scale = std::pow(2.0, kappa) * (std::numbers::pi * kappa * kappa / std::sin(std::numbers::pi * kappa)) *
                   c_k * c_k * moment;
  p.tau_prefactor = std::pow(p.lambda_scale, 1.0 / kappa);
  p.x_scale = 1.0 / p.lambda_scale;
  return p;
}

double beta_lambda_scale(double alpha, double beta) {
  const double kappa = alpha - beta;
  if (!(alpha > 0.0 && beta > 0.0)) throw DomainError("beta_lambda_scale: parameters must be positive");
  if (!(kappa > 0.0 && kappa < 1.0)) throw RegimeError("no_root_in_unit_interval: alpha - beta outside (0,1)");
  const double lb = log_beta(alpha, beta);
  return std::pow(2.0, kappa) * (std::numbers::pi / std::sin(std::numbers::pi * kappa)) *
         (digamma(alpha) - digamma(beta)) * std::exp(-2.0 * lb);
}

LimitLawParams limit_params_for(const EnvironmentLaw& law, double c_k_override) {
  const KappaResult k = kappa_solve(law);
  double c_k = c_k_override;
  if (!(c_k > 0.0)) {
    if (!law.is_beta()) throw ConfigError("C_K must be supplied for non-Beta laws");
    c_k = kesten_constant_beta(law.as_beta().alpha, law.as_beta().beta);
  }
  return limit_scale(k.kappa, c_k, moment_rho_log(law, k.kappa));
}

SplittingEstimate excursion_tail_splitting(const EnvironmentLaw& law, double kappa, double h, std::uint64_t particles,
                                           int batches, std::uint64_t seed) {
  require_regime(kappa);
  if (particles < 1 || batches < 2) throw DomainError("splitting: need particles >= 1 and batches >= 2");
  SplittingEstimate out;
  if (h <= 0.0) {
    out.q = 1.0;
    return out;
  }
  const double spacing = std::log(5.0) / kappa;
  const int m = std::max(1, static_cast<int>(std::ceil(h / spacing)));
  out.levels = m;
  std::vector<double> qs;
  for (int bt = 0; bt < batches; ++bt) {
    CounterRng rng(seed, {0x5B, static_cast<std::uint64_t>(bt)});
    std::vector<double> starts(1, 0.0);
    std::vector<double> hits;
    double q = 1.0;
    for (int stage = 1; stage <= m && q > 0.0; ++stage) {
      const double level = h * stage / m;
      hits.clear();
      for (std::uint64_t p = 0; p < particles; ++p) {
        double v = stage == 1 ? 0.0 : starts[static_cast<std::size_t>(rng.uniform() * static_cast<double>(starts.size()))];
        if (v >= level) {  // the previous overshoot already cleared this level
          hits.push_back(v);
          continue;
        }
        for (;;) {
          v += draw_log_rho(law, rng);
          if (v >= level) {
            hits.push_back(v);
            break;
          }
          if (v <= 0.0) break;
        }
      }
      q *= static_cast<double>(hits.size()) / static_cast<double>(particles);
      starts.swap(hits);
    }
    qs.push_back(q);
  }
  const auto ms = stats::mean_se(qs);
  out.q = ms.mean;
  out.se = ms.se;
  return out;
}

ZDiagnostic single_valley_z(const EnvironmentLaw& law, double h, double depth, std::uint64_t accepted,
                            std::uint64_t max_tries, std::uint64_t seed) {
  if (!(h > 0.0 && depth > 0.0)) throw DomainError("single_valley_z: h and depth must be positive");
  constexpr double kGap = 40.0;
  ZDiagnostic out;
  CounterRng rng(seed, {0x2D});
  std::vector<double> right;
  while (out.z.size() < accepted && out.tries < max_tries) {
    ++out.tries;
    // Right of 0: excursion to e_1 with H >= h, then on to d^+ and beyond to
    // make sure no later value exceeds H.
    right.assign(1, 0.0);
    double v = 0.0;
    double H = 0.0;
    for (;;) {
      v += draw_log_rho(law, rng);
      right.push_back(v);
      if (v <= 0.0) break;
      H = std::max(H, v);
    }
    if (H < h) continue;
    const double v_e1 = v;
    long d_plus = -1;
    bool ok = true;
    while (v > H - kGap || d_plus < 0) {
      v += draw_log_rho(law, rng);
      if (v > H) {
        ok = false;
        break;
      }
      if (d_plus < 0) {
        right.push_back(v);
        if (v - v_e1 <= -depth) d_plus = static_cast<long>(right.size()) - 1;
      }
    }
    if (!ok) continue;
    // Left of 0: V must stay >= 0; a^- is the first site with V >= depth.
    double left_sum = 0.0;
    double w = 0.0;
    bool reached = false;
    while (w < depth + kGap) {
      w -= draw_log_rho(law, rng);
      if (w < 0.0) {
        ok = false;
        break;
      }
      if (!reached) {
        left_sum += std::exp(-w);
        reached = w >= depth;
      }
    }
    if (!ok) continue;
    double m1 = left_sum;
    for (double x : right) {
      m1 += std::exp(-x);
      if (x >= h / 2) break;
    }
    double m2 = 0.0;
    for (long k = 0; k <= d_plus; ++k) m2 += std::exp(right[static_cast<std::size_t>(k)] - H);
    out.z.push_back(std::exp(H) * m1 * m2);
  }
  out.accept_rate = out.tries ? static_cast<double>(out.z.size()) / static_cast<double>(out.tries) : 0.0;
  return out;
}

}  // namespace rwre
