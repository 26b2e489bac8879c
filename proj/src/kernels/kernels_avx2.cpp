// AVX2+FMA kernels. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here runs unless dispatch confirmed CPU support.

#include "rwre/kernels.hpp"

#include <immintrin.h>

#include <bit>
#include <cmath>
#include <cstdint>

namespace rwre::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const double l0 = _mm_cvtsd_f64(lo);
  const double l1 = _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
  const double h0 = _mm_cvtsd_f64(hi);
  const double h1 = _mm_cvtsd_f64(_mm_unpackhi_pd(hi, hi));
  return (l0 + l1) + (h0 + h1);
}

// int64 lanes (|v| < 2^51) to double.
inline __m256d i64_to_pd(__m256i v) {
  const __m256i magic_i = _mm256_castpd_si256(_mm256_set1_pd(6755399441055744.0));
  return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_add_epi64(v, magic_i)),
                       _mm256_set1_pd(6755399441055744.0));
}

inline __m256d pow2_i64(__m256i n) {
  return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52));
}

// exp(x): Cody-Waite reduction x = n ln2 + r, |r| <= ln2/2, degree-13 Taylor
// polynomial, and a two-factor 2^n scaling so gradual underflow is kept.
inline __m256d exp_pd(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(-745.2));
  x = _mm256_min_pd(x, _mm256_set1_pd(709.79));
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[k]));

  const __m256i ni = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  const __m256i n1 = _mm256_sub_epi64(_mm256_setzero_si256(),
                                      _mm256_srli_epi64(_mm256_sub_epi64(_mm256_setzero_si256(), ni), 1));
  const __m256i n2 = _mm256_sub_epi64(ni, n1);
  return _mm256_mul_pd(_mm256_mul_pd(p, pow2_i64(n1)), pow2_i64(n2));
}

// log(x) for positive normal x: x = 2^e m with m in [sqrt(1/2), sqrt(2)),
// log m = 2 atanh((m-1)/(m+1)) by its odd series.
inline __m256d log_pd(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  __m256i e = _mm256_sub_epi64(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(1023));
  const __m256i mbits =
      _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
                      _mm256_set1_epi64x(0x3FF0000000000000LL));
  __m256d m = _mm256_castsi256_pd(mbits);
  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(1.4142135623730951), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  e = _mm256_sub_epi64(e, _mm256_castpd_si256(big));  // mask lanes are -1

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d z = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(2.0 / 23.0);
  for (int k = 10; k >= 0; --k) p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / (2 * k + 1)));
  const __m256d logm = _mm256_mul_pd(s, p);

  const __m256d ed = i64_to_pd(e);
  return _mm256_fmadd_pd(ed, _mm256_set1_pd(6.93147180369123816490e-01),
                         _mm256_fmadd_pd(ed, _mm256_set1_pd(1.90821492927058770002e-10), logm));
}

}  // namespace

double sum_exp(std::span<const double> x, double shift) {
  const std::size_t n = x.size();
  const __m256d sh = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(&x[i]), sh)));
  double s = hsum(acc);
  for (; i < n; ++i) s += std::exp(x[i] - shift);
  return s;
}

void log_rho(std::span<const double> omega, std::span<double> out) {
  const std::size_t n = omega.size();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d w = _mm256_loadu_pd(&omega[i]);
    _mm256_storeu_pd(&out[i], _mm256_sub_pd(log_pd(_mm256_sub_pd(one, w)), log_pd(w)));
  }
  for (; i < n; ++i) out[i] = std::log(1.0 - omega[i]) - std::log(omega[i]);
}

ExpSums laplace_sums(std::span<const double> x, double lambda) {
  const std::size_t n = x.size();
  const __m256d nl = _mm256_set1_pd(-lambda);
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = exp_pd(_mm256_mul_pd(nl, _mm256_loadu_pd(&x[i])));
    s1 = _mm256_add_pd(s1, e);
    s2 = _mm256_add_pd(s2, _mm256_mul_pd(e, e));
  }
  ExpSums r{hsum(s1), hsum(s2)};
  for (; i < n; ++i) {
    const double e = std::exp(-lambda * x[i]);
    r.sum += e;
    r.sum_sq += e * e;
  }
  return r;
}

std::size_t perpetuity_step(std::span<double> prod, std::span<double> total,
                            std::span<const double> rho, double rel_tol) {
  const std::size_t n = prod.size();
  const __m256d zero = _mm256_setzero_pd();
  const __m256d tol = _mm256_set1_pd(rel_tol);
  std::size_t live = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p0 = _mm256_loadu_pd(&prod[i]);
    const __m256d alive = _mm256_cmp_pd(p0, zero, _CMP_NEQ_UQ);
    const __m256d p = _mm256_mul_pd(p0, _mm256_loadu_pd(&rho[i]));
    const __m256d t0 = _mm256_loadu_pd(&total[i]);
    const __m256d t = _mm256_add_pd(t0, p);
    const __m256d retire = _mm256_cmp_pd(p, _mm256_mul_pd(tol, t), _CMP_LE_OQ);
    const __m256d keep = _mm256_andnot_pd(retire, alive);
    _mm256_storeu_pd(&total[i], _mm256_blendv_pd(t0, t, alive));
    _mm256_storeu_pd(&prod[i], _mm256_and_pd(p, keep));
    live += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(_mm256_movemask_pd(keep))));
  }
  for (; i < n; ++i) {
    if (prod[i] == 0.0) continue;
    const double p = prod[i] * rho[i];
    const double t = total[i] + p;
    total[i] = t;
    prod[i] = (p <= rel_tol * t) ? 0.0 : p;
    live += prod[i] != 0.0;
  }
  return live;
}

std::size_t count_greater(std::span<const double> x, double threshold) {
  const std::size_t n = x.size();
  const __m256d th = _mm256_set1_pd(threshold);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(&x[i]), th, _CMP_GT_OQ));
    count += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i) count += x[i] > threshold;
  return count;
}

}  // namespace rwre::kernels::avx2
