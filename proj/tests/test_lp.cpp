#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "reference.hpp"
#include "telm/monotone_lp.hpp"
#include "telm/simplex.hpp"

using namespace telm;
using mono::ComplexityBucket;
using mono::Direction;

namespace {

std::vector<ref::Bucket> to_ref(const std::vector<ComplexityBucket>& b) {
  std::vector<ref::Bucket> out;
  for (const auto& x : b) out.push_back({x.weight, x.mean, x.delta});
  return out;
}

std::vector<ComplexityBucket> random_instance(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ComplexityBucket> b(static_cast<std::size_t>(k));
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    b[i].index = i + 1;
    b[i].weight = 0.05 + u(rng);
    b[i].mean = u(rng);
    b[i].delta = 0.25 * u(rng);
    total += b[i].weight;
  }
  for (auto& x : b) x.weight /= total;
  return b;
}

}  // namespace

TEST_CASE("simplex: small programs") {
  // min x s.t. x >= 3, written as -x <= -3.
  lp::LinearProgram<double> p(1, 1);
  p.cost << 1.0;
  p.add(0, 0, -1.0);
  p.rhs << -3.0;
  auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.objective == doctest::Approx(3.0));
  CHECK(s.x(0) == doctest::Approx(3.0));

  // x >= 1 and x <= 0.
  lp::LinearProgram<double> q(1, 2);
  q.cost << 1.0;
  q.add(0, 0, -1.0);
  q.rhs(0) = -1.0;
  q.add(1, 0, 1.0);
  q.rhs(1) = 0.0;
  CHECK(lp::solve(q).status == lp::Status::infeasible);

  // min -x with no upper limit.
  lp::LinearProgram<double> r(1, 1);
  r.cost << -1.0;
  r.add(0, 0, -1.0);
  r.rhs << 0.0;
  CHECK(lp::solve(r).status == lp::Status::unbounded);

  // Textbook: max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6).
  lp::LinearProgram<double> t(2, 3);
  t.cost << -3.0, -5.0;
  t.add(0, 0, 1.0);
  t.add(1, 1, 2.0);
  t.add(2, 0, 3.0);
  t.add(2, 1, 2.0);
  t.rhs << 4.0, 12.0, 18.0;
  s = lp::solve(t);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.objective == doctest::Approx(-36.0));
  CHECK(s.x(0) == doctest::Approx(2.0));
  CHECK(s.x(1) == doctest::Approx(6.0));
  CHECK(s.certificate_residual <= 1e-9);

  lp::LinearProgram<double> bad(2, 1);
  bad.cost = lp::Vector<double>::Zero(3);
  CHECK_THROWS(lp::solve(bad));
}

TEST_CASE("simplex: long double scalar") {
  lp::LinearProgram<long double> t(2, 2);
  t.cost << -1.0L, -1.0L;
  t.add(0, 0, 1.0L);
  t.add(0, 1, 2.0L);
  t.add(1, 0, 3.0L);
  t.add(1, 1, 1.0L);
  t.rhs << 4.0L, 6.0L;
  const auto s = lp::solve(t);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(static_cast<double>(s.objective) == doctest::Approx(-2.8));
}

TEST_CASE("feasibility examples") {
  std::vector<ComplexityBucket> b{{1, 0.5, 0.9, 0.0}, {2, 0.5, 0.8, 0.0}};
  CHECK(mono::check_feasibility(b).feasible);

  b = {{1, 0.5, 0.6, 0.1}, {2, 0.5, 0.9, 0.1}};
  auto f = mono::check_feasibility(b);
  CHECK_FALSE(f.feasible);
  REQUIRE(f.certificate);
  CHECK(f.certificate->first == 1);
  CHECK(f.certificate->second == 2);
  CHECK(mono::check_feasibility(b, Direction::nondecreasing).feasible);

  b = {{7, 1.0, 0.3, 0.0}};
  CHECK(mono::check_feasibility(b).feasible);

  // Lexicographically first violating pair.
  b = {{1, 0.25, 0.5, 0.0}, {2, 0.25, 0.6, 0.0}, {3, 0.25, 0.4, 0.0}, {4, 0.25, 0.9, 0.0}};
  f = mono::check_feasibility(b);
  REQUIRE(f.certificate);
  CHECK(*f.certificate == std::pair<int, int>{1, 2});
}

TEST_CASE("distance examples") {
  std::vector<ComplexityBucket> b{{1, 0.5, 0.9, 0.1}, {2, 0.5, 0.8, 0.3}};
  auto r = mono::distance_to_monotonicity(b);
  CHECK(r.feasible);
  CHECK(r.epsilon_lb == doctest::Approx(0.0));
  CHECK(r.shifts.cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  b = {{1, 0.5, 0.8, 0.05}, {2, 0.5, 0.9, 0.05}};
  r = mono::distance_to_monotonicity(b, Direction::nonincreasing);
  REQUIRE(r.feasible);
  CHECK(r.epsilon_lb == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(r.adjusted(0) == doctest::Approx(0.85));
  CHECK(r.adjusted(1) == doctest::Approx(0.85));
  CHECK(std::abs(mono::oracle_distance(b, Direction::nonincreasing, 1e-3).distance - 0.05) <= 2e-3);

  b = {{1, 0.9, 0.7, 0.02}, {2, 0.1, 0.8, 0.2}};
  r = mono::distance_to_monotonicity(b, Direction::nonincreasing);
  REQUIRE(r.feasible);
  CHECK(r.epsilon_lb == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(r.adjusted(0) == doctest::Approx(0.70));
  CHECK(r.adjusted(1) == doctest::Approx(0.70));
  CHECK(std::abs(mono::oracle_distance(b, Direction::nonincreasing, 1e-3).distance - 0.01) <= 2e-3);

  // Same LP as a plain program: objective 0.05.
  b = {{1, 0.5, 0.8, 0.05}, {2, 0.5, 0.9, 0.05}};
  const auto sol = lp::solve(mono::build_program(b, Direction::nonincreasing));
  REQUIRE(sol.status == lp::Status::optimal);
  CHECK(sol.objective == doctest::Approx(0.05));

  b = {{1, 0.5, 0.6, 0.1}, {2, 0.5, 0.9, 0.1}};
  r = mono::distance_to_monotonicity(b);
  CHECK_FALSE(r.feasible);
  CHECK(r.certificate);
  CHECK_FALSE(mono::oracle_distance(b, Direction::nonincreasing, 1e-3).feasible);

  b = {{1, 0.3, 0.9, 0.0}, {2, 0.3, 0.5, 0.0}, {3, 0.4, 0.2, 0.0}};
  CHECK(mono::oracle_distance(b, Direction::nonincreasing, 1e-3).distance == 0.0);
}

TEST_CASE("validation") {
  std::vector<ComplexityBucket> b{{1, 0.6, 0.9, 0.0}, {2, 0.6, 0.8, 0.0}};
  CHECK_THROWS(mono::validate(b));
  b = {{1, 0.5, 0.9, -0.1}, {2, 0.5, 0.8, 0.0}};
  CHECK_THROWS(mono::validate(b));
  std::vector<ComplexityBucket> six(6, {1, 1.0 / 6, 0.5, 0.1});
  CHECK_THROWS_AS(mono::oracle_distance(six, Direction::nonincreasing, 1e-3), std::length_error);
  CHECK_THROWS(mono::parse_direction("sideways"));
}

TEST_CASE("random instances against the candidate-set projection") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 400; ++t) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const auto b = random_instance(rng, k);
    const bool noninc = (t % 2) == 0;
    const auto dir = noninc ? Direction::nonincreasing : Direction::nondecreasing;
    const auto r = mono::distance_to_monotonicity(b, dir);
    const bool ref_feasible = ref::monotone_feasible(to_ref(b), noninc);
    REQUIRE(r.feasible == ref_feasible);
    CHECK(mono::check_feasibility(b, dir).feasible == ref_feasible);
    if (!ref_feasible) continue;
    CHECK(r.epsilon_lb == doctest::Approx(ref::monotone_projection(to_ref(b), noninc)).epsilon(1e-9));

    // Result invariants.
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      CHECK(std::min(r.raise(i), r.lower(i)) <= 1e-12);
      CHECK(std::abs(r.shifts(i)) <= b[i].delta + 1e-9);
      CHECK(r.adjusted(i) == doctest::Approx(b[i].mean + r.shifts(i)).epsilon(1e-12));
      if (i > 0) {
        if (noninc) CHECK(r.adjusted(i) <= r.adjusted(i - 1) + 1e-9);
        else CHECK(r.adjusted(i) >= r.adjusted(i - 1) - 1e-9);
      }
      sum += b[i].weight * std::abs(r.shifts(i));
    }
    CHECK(std::abs(sum - r.epsilon_lb) <= 1e-9);
    CHECK(r.certificate_residual <= 1e-9);
  }
}

TEST_CASE("translation and reversal invariance") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto b = random_instance(rng, 3);
    for (auto& x : b) {
      x.mean = 0.2 + 0.6 * x.mean;
      x.delta = 0.3;
    }
    const auto base = mono::distance_to_monotonicity(b);
    REQUIRE(base.feasible);
    // Shifting every mean by a constant leaves the distance unchanged.
    auto shifted = b;
    for (auto& x : shifted) x.mean += 0.125;
    CHECK(mono::distance_to_monotonicity(shifted).epsilon_lb ==
          doctest::Approx(base.epsilon_lb).epsilon(1e-9));
    // Reversing the order swaps the direction.
    auto rev = b;
    std::reverse(rev.begin(), rev.end());
    CHECK(mono::distance_to_monotonicity(rev, Direction::nondecreasing).epsilon_lb ==
          doctest::Approx(base.epsilon_lb).epsilon(1e-9));
  }
}

TEST_CASE("long chains stay exact") {
  // 38 buckets in a sawtooth; the candidate oracle is too slow here, so the
  // expected value comes from pairing: each bump of 0.01 costs 0.01 * w.
  std::vector<ComplexityBucket> b;
  const int k = 38;
  for (int i = 0; i < k; ++i) {
    const double mean = 0.9 - 0.005 * i + ((i % 2) ? 0.01 : 0.0);
    b.push_back({8 + i, 1.0 / k, mean, 0.05});
  }
  const auto r = mono::distance_to_monotonicity(b);
  REQUIRE(r.feasible);
  CHECK(r.certificate_residual <= 1e-9);
  // Pair (2j, 2j+1): the odd one sits 0.005 above its even neighbour, so one
  // of the two must move by 0.005.
  CHECK(r.epsilon_lb == doctest::Approx(19 * 0.005 / k).epsilon(1e-9));
}

TEST_CASE("csv io") {
  std::istringstream in("index,weight,mean,delta\n1,0.5,0.8,0.05\n2,0.5,0.9,0.05\n");
  const auto b = mono::read_buckets_csv(in);
  REQUIRE(b.size() == 2);
  CHECK(b[1].mean == 0.9);
  const auto r = mono::distance_to_monotonicity(b);
  std::ostringstream out;
  mono::write_solution_csv(out, b, r);
  const auto text = out.str();
  CHECK(text.rfind("index,mean,lower,upper,shifted_lower,shifted_upper,solution_point\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);

  std::istringstream noheader("3,1,0.5,0.1\n");
  CHECK(mono::read_buckets_csv(noheader).size() == 1);
  std::istringstream broken("1,0.5,zz,0.1\n");
  CHECK_THROWS(mono::read_buckets_csv(broken));
}
