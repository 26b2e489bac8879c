#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "rwre/constants.hpp"
#include "rwre/error.hpp"
#include "rwre/potential.hpp"

using namespace rwre;

namespace {

const double kLog3 = std::log(3.0);

// Brute-force references.
double brute_max_increment(const PotentialPath& p, long x, long y) {
  double best = 0.0;
  for (long i = x; i <= y; ++i)
    for (long j = i; j <= y; ++j) best = std::max(best, p.at(j) - p.at(i));
  return best;
}

double brute_min_increment(const PotentialPath& p, long x, long y) {
  double best = 0.0;
  for (long i = x; i <= y; ++i)
    for (long j = i; j <= y; ++j) best = std::min(best, p.at(j) - p.at(i));
  return best;
}

// Sawtooth: long descending slope with a single spike of height `spike`
// starting at site `at`.
PotentialPath sawtooth(long length, long at, double spike) {
  std::vector<double> v(static_cast<std::size_t>(length) + 1);
  double cur = 0.0;
  for (long x = 1; x <= length; ++x) {
    if (x > at && x <= at + 10)
      cur += spike / 10.0;
    else if (x > at + 10 && x <= at + 20)
      cur -= spike / 10.0 + 0.5;
    else
      cur -= 0.5;
    v[static_cast<std::size_t>(x)] = cur;
  }
  return potential_from_values(0, v);
}

}  // namespace

TEST_SUITE("potential") {
  TEST_CASE("build_potential") {
    const auto flat = build_potential(sample_environment(EnvironmentLaw::parse("discrete:0.5@1"), 0, 5, 1));
    for (double x : flat.v) CHECK(x == 0.0);
    const auto down = build_potential(sample_environment(EnvironmentLaw::parse("discrete:0.75@1"), 0, 3, 1));
    for (long x = 0; x <= 3; ++x) CHECK(down.at(x) == doctest::Approx(-kLog3 * x).epsilon(1e-14));
    EnvironmentSlice env;
    env.offset = 0;
    env.omegas = {0.5, 0.25, 0.75};
    const auto p = build_potential(env);
    CHECK(p.at(0) == 0.0);
    CHECK(p.at(1) == doctest::Approx(kLog3).epsilon(1e-15));
    CHECK(std::abs(p.at(2)) < 1e-15);
  }

  TEST_CASE("ladder epochs and excursions") {
    CHECK(ladder_epochs(potential_from_values(0, {0, 0, 0, 0})) == std::vector<long>{0, 1, 2, 3});
    const auto p = potential_from_values(0, {0, kLog3, 0});
    CHECK(ladder_epochs(p) == std::vector<long>{0, 2});
    CHECK(ladder_epochs(potential_from_values(0, {0, 1, 2, 3})) == std::vector<long>{0});
    const auto ex = excursions(p);
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].height == doctest::Approx(kLog3));
    for (const auto& e : excursions(potential_from_values(0, {0, -1, -1, -3, -3.5}))) CHECK(e.height == 0.0);
  }

  TEST_CASE("ladder invariants on a random path") {
    const auto p = build_potential(sample_environment(EnvironmentLaw::parse("beta:1.5,1.0"), 0, 200000, 4));
    const auto e = ladder_epochs(p);
    const auto ex = excursions(p);
    REQUIRE(ex.size() + 1 == e.size());
    long total = 0;
    for (std::size_t i = 0; i < ex.size(); ++i) {
      CHECK(p.at(e[i + 1]) <= p.at(e[i]));
      CHECK(ex[i].height >= 0.0);
      total += ex[i].end - ex[i].start;
    }
    CHECK(total == e.back());
  }

  TEST_CASE("first passage helpers") {
    CHECK(first_descent(potential_from_values(0, {0, -1, -2}), 1.5) == 2);
    CHECK(first_ascent(potential_from_values(0, {0, kLog3, 0}), 1.0) == 1);
    CHECK_FALSE(first_ascent(potential_from_values(0, {0, 0, 0, 0}), 0.1).has_value());
    CHECK(hit_level(potential_from_values(0, {0, 0.5, 1.2, 0.3}), 1.0) == 2);
  }

  TEST_CASE("increments match brute force") {
    CHECK(max_increment(potential_from_values(0, {0, 0, 0}), 0, 2) == 0.0);
    const auto p = potential_from_values(0, {0, kLog3, 0});
    CHECK(max_increment(p, 0, 2) == doctest::Approx(kLog3));
    CHECK(min_increment(p, 0, 2) == doctest::Approx(-kLog3));
    CHECK(max_increment(potential_from_values(0, {3, 2, 1}), 0, 2) == 0.0);
    const auto r = build_potential(sample_environment(EnvironmentLaw::parse("beta:1.5,1.0"), 0, 400, 9));
    for (long x = 0; x < 380; x += 37) {
      const long y = std::min<long>(400, x + 150);
      CHECK(max_increment(r, x, y) == doctest::Approx(brute_max_increment(r, x, y)).epsilon(1e-14));
      CHECK(min_increment(r, x, y) == doctest::Approx(brute_min_increment(r, x, y)).epsilon(1e-14));
    }
  }

  TEST_CASE("valley scales") {
    CHECK(critical_height(1000000, 0.2, 0.5) == doctest::Approx((1.0 - 0.2) / 0.5 * std::log(1e6)));
    CHECK(valley_depth(1000000, 0.5) == doctest::Approx(3.0 * std::log(1e6)));
  }

  TEST_CASE("no deep valley below the critical height") {
    const auto flat = potential_from_values(0, std::vector<double>(5000, 0.0));
    const auto scan = detect_deep_valleys(flat, 1000, 0.2, 0.5, false);
    CHECK(scan.K_n == 0);
    CHECK(scan.valleys.empty());
    const auto star = detect_star_valleys(flat, 1000, 0.2, 0.5);
    CHECK(star.K_star == 0);
    CHECK(valleys_coincide(scan, star));
  }

  TEST_CASE("sawtooth fixture: one deep valley equal to the star valley") {
    const long n = 100;
    const double h_n = critical_height(n, 0.2, 0.5);
    // a long descending run puts about 0.5 per site below the spike
    const auto p = sawtooth(4000, 50, h_n + 1.0);
    const auto scan = detect_deep_valleys(p, n, 0.2, 0.5, false);
    REQUIRE(scan.K_n == 1);
    const auto& v = scan.valleys[0];
    CHECK(v.b == 50);
    CHECK(v.c == 60);
    CHECK(v.sigma == 50);
    CHECK(v.height == doctest::Approx(h_n + 1.0));
    CHECK(p.at(v.a) - p.at(v.b) >= scan.D_n);
    CHECK(p.at(v.d) - p.at(v.d_bar) <= -scan.D_n);
    CHECK(v.a < v.b);
    CHECK(v.d > v.c);
    const auto star = detect_star_valleys(p, n, 0.2, 0.5);
    CHECK(valleys_coincide(scan, star));
  }

  TEST_CASE("deep valley invariants on random environments") {
    const auto law = EnvironmentLaw::parse("beta:1.5,1.0");
    int coincide = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      auto env = sample_environment(law, -4096, 300000, 100 + s);
      const auto p = build_potential(env);
      const auto scan = detect_deep_valleys(p, 10000, 0.2, 0.5, true);
      for (long j = 0; j < scan.K_n; ++j) {
        const auto& v = scan.valleys[static_cast<std::size_t>(j)];
        CHECK(v.height >= scan.h_n);
        CHECK(p.at(v.a) - p.at(v.b) >= scan.D_n);
        CHECK(p.at(v.d) - p.at(v.d_bar) <= -scan.D_n);
        CHECK(p.at(v.c) - p.at(v.b) == doctest::Approx(v.height));
        CHECK(v.a <= v.b);
        CHECK(v.b < v.c);
        CHECK(v.c <= v.d_bar);
        CHECK(v.d_bar <= v.d);
      }
      CHECK(scan.has_next);
      coincide += valleys_coincide(scan, detect_star_valleys(p, 10000, 0.2, 0.5));
    }
    CHECK(coincide >= 18);
  }

  TEST_CASE("window exhaustion is reported with the side") {
    const auto law = EnvironmentLaw::parse("beta:1.5,1.0");
    const auto p = build_potential(sample_environment(law, 0, 3000, 1));
    bool threw = false;
    try {
      (void)detect_deep_valleys(p, 100000, 0.2, 0.5, true);
    } catch (const WindowExhausted& w) {
      threw = true;
      CHECK(!p.contains(w.needed_site()));
    }
    CHECK(threw);
  }

  TEST_CASE("good environment on a flat potential is vacuous") {
    const auto flat = potential_from_values(0, std::vector<double>(2000, 0.0));
    const auto scan = detect_deep_valleys(flat, 1000, 0.2, 0.5, false);
    const auto g = check_good_environment(flat, scan, 0.2, default_good_constants(1.0, 0.5, 0.2), 0.0);
    CHECK(scan.e_n == 1000);
    CHECK(g.A1);
    CHECK(g.A2);
    CHECK(g.A3);
    CHECK(g.A4);
    CHECK(g.A5);
  }

  TEST_CASE("good environment on the sawtooth by hand") {
    const long n = 100;
    const double spike = critical_height(n, 0.2, 0.5) + 1.0;
    const auto p = sawtooth(4000, 50, spike);
    const auto scan = detect_deep_valleys(p, n, 0.2, 0.5, false);
    const auto k = default_good_constants(1.0, 0.5, 0.2);
    // every site is a ladder epoch except inside the spike, which ends at the
    // first descent step j with j (spike/10 + 0.5) >= spike
    const long j = static_cast<long>(std::ceil(spike / (spike / 10.0 + 0.5)));
    CHECK(scan.e_n == n + 10 + j - 1);
    // q chosen so that n q = 1 and the band [floor(1 - s), ceil(1 + s)] holds K_n = 1
    const auto g = check_good_environment(p, scan, 0.2, k, 1.0 / n);
    CHECK(g.A1);  // e_n < 4 n
    CHECK(g.A2);
    CHECK(g.A3);  // sigma_1 = 50 >= n^{0.4}
    CHECK(g.A5);  // monotone flanks: no fluctuation at all
    CHECK(g.A4);  // width well below 120 log n
    // a q that puts K_n = 1 outside the band
    CHECK_FALSE(check_good_environment(p, scan, 0.2, k, 10.0 / n).A2);
    GoodEnvironmentConstants tight = k;
    tight.c_prime = 1.0;
    CHECK_FALSE(check_good_environment(p, scan, 0.2, tight, 1.0 / n).A1);
  }

  TEST_CASE("fixture files and census CSV") {
    const char* file = "potential_fixture.txt";
    {
      std::ofstream out(file);
      out << "# offset 5\n0\n1.0986\n# comment\n0\n";
    }
    const auto p = load_potential_fixture(file);
    CHECK(p.lo() == 5);
    CHECK(p.hi() == 7);
    CHECK(p.at(6) == 1.0986);
    std::ostringstream csv;
    write_valley_census(csv, {});
    CHECK(csv.str() == "j,a,b,c,d,height,width\n");
  }
}
