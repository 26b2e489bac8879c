#pragma once

// Random finite chains for the quenched-formula checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/quenched.hpp"

namespace testing_support {

struct RandomChain {
  rwre::QuenchedChain chain;
  long a = 0;
  long b = 0;
  long d = 0;
};

// Sites 0..L-1 with L in [3, max_len], Beta(1.5,1) omegas, reflection at
// a = 0, b uniform on [1, L-2], d = L-1.
inline RandomChain random_chain(std::uint64_t seed, long max_len = 50) {
  rwre::CounterRng rng(seed, {0xC4A1});
  const auto law = rwre::EnvironmentLaw::beta(1.5, 1.0);
  const long len = 3 + static_cast<long>(rng.uniform() * static_cast<double>(max_len - 2));
  std::vector<double> w(static_cast<std::size_t>(len));
  for (auto& x : w) x = law.sample(rng);
  RandomChain r;
  r.a = 0;
  r.d = len - 1;
  r.b = std::min(len - 2, 1 + static_cast<long>(rng.uniform() * static_cast<double>(len - 2)));
  r.chain = rwre::make_chain(0, std::move(w), 0L);
  return r;
}

inline double rel_err(double x, double ref) { return std::abs(x - ref) / std::max(std::abs(ref), 1e-300); }

}  // namespace testing_support
