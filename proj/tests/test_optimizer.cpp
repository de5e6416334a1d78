#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "karum/optimizer.hpp"
#include "karum/rng.hpp"

using namespace karum;

namespace {

// 1-D oracle for the symmetric single-pair instance with mu=0, sigma2=1 and
// pair multiplicity m: the optimum is (+t, -t) where t solves
// m * (1 - logistic(2t)) = 2t. Plain bisection, independent of the optimizer.
double bisect_symmetric_optimum(double multiplicity) {
  auto f = [&](double t) { return multiplicity * (1.0 - logistic(2.0 * t)) - 2.0 * t; };
  double lo = 0.0;
  double hi = multiplicity;  // f(hi) < 0 since the first term is below m/2
  REQUIRE(f(lo) > 0.0);
  REQUIRE(f(hi) < 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

MStepProblem single_pair_problem(double weight = 1.0) {
  MStepProblem problem;
  problem.pairs = {WeightedPair{0, 1, weight}};
  problem.mu = 0.0;
  problem.sigma2 = 1.0;
  problem.num_entities = 2;
  return problem;
}

MStepProblem random_problem(int num_entities, int num_pairs, RngStream& rng) {
  MStepProblem problem;
  problem.num_entities = num_entities;
  problem.mu = 0.5;
  problem.sigma2 = 1.3;
  for (int i = 0; i < num_pairs; ++i) {
    const int w = rng.uniform_int(num_entities);
    int l = rng.uniform_int(num_entities);
    while (l == w) l = rng.uniform_int(num_entities);
    problem.pairs.push_back(WeightedPair{w, l, static_cast<double>(1 + rng.uniform_int(5))});
  }
  return problem;
}

}  // namespace

TEST_CASE("objective closed-form values") {
  SUBCASE("all-equal beta: every pair term is log 1/2, regularizer zero") {
    MStepProblem problem;
    problem.num_entities = 3;
    problem.mu = 0.7;
    problem.sigma2 = 2.0;
    problem.pairs = {WeightedPair{0, 1, 3.0}, WeightedPair{2, 1, 4.0}};
    const RankVector beta(3, 0.7);
    CHECK(objective(beta, problem) == doctest::Approx(-7.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("no pairs at the prior mean") {
    MStepProblem problem;
    problem.num_entities = 2;
    CHECK(objective({0.0, 0.0}, problem) == 0.0);
  }
  SUBCASE("pure regularizer with coefficient 1/sigma2") {
    MStepProblem problem;
    problem.num_entities = 1;
    CHECK(objective({2.0}, problem) == doctest::Approx(-4.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient closed-form values") {
  SUBCASE("no pairs at the prior mean: zero vector") {
    MStepProblem problem;
    problem.num_entities = 3;
    problem.mu = -0.4;
    const RankVector g = gradient(RankVector(3, -0.4), problem);
    for (double gk : g) CHECK(gk == 0.0);
  }
  SUBCASE("one pair at equal beta: +1/2 on the winner, -1/2 on the loser") {
    MStepProblem problem;
    problem.num_entities = 3;
    problem.mu = 0.0;
    problem.pairs = {WeightedPair{2, 0, 1.0}};
    const RankVector g = gradient(RankVector(3, 0.0), problem);
    CHECK(g[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(g[1] == 0.0);
  }
}

TEST_CASE("gradient matches central finite differences") {
  RngStream rng(314159);
  for (int instance = 0; instance < 8; ++instance) {
    const int num_entities = 3 + rng.uniform_int(48);
    MStepProblem problem = random_problem(num_entities, 4 * num_entities, rng);
    RankVector beta(static_cast<std::size_t>(num_entities));
    for (double& b : beta) b = rng.normal(0.0, 1.0);

    const RankVector g = gradient(beta, problem);
    const double h = 1e-5;
    for (std::size_t k = 0; k < beta.size(); ++k) {
      RankVector up = beta;
      RankVector down = beta;
      up[k] += h;
      down[k] -= h;
      const double fd = (objective(up, problem) - objective(down, problem)) / (2.0 * h);
      const double rel = std::abs(g[k] - fd) / std::max(std::abs(fd), std::abs(g[k]));
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("maximize: regularizer-only optimum is the prior mean") {
  MStepProblem problem;
  problem.num_entities = 4;
  problem.mu = 1.25;
  problem.sigma2 = 0.5;
  const MaximizeResult res = maximize({-3.0, 0.0, 2.0, 10.0}, problem);
  CHECK(res.converged);
  for (double b : res.beta) CHECK(b == doctest::Approx(1.25).epsilon(1e-8));
}

TEST_CASE("maximize: single-pair optimum matches the 1-D root-finding oracle") {
  const double t = bisect_symmetric_optimum(1.0);
  CHECK(t == doctest::Approx(0.2005).epsilon(1e-3));

  const MaximizeResult res = maximize({0.0, 0.0}, single_pair_problem());
  CHECK(res.converged);
  CHECK(res.beta[0] == doctest::Approx(t).epsilon(1e-3));
  CHECK(res.beta[1] == doctest::Approx(-t).epsilon(1e-3));
  // symmetry: the pair term cancels in g_i + g_j, so the sum is pinned to 0
  CHECK(res.beta[0] + res.beta[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("maximize: doubling multiplicity widens the gap") {
  const MaximizeResult once = maximize({0.0, 0.0}, single_pair_problem(1.0));
  const MaximizeResult twice = maximize({0.0, 0.0}, single_pair_problem(2.0));
  CHECK(std::abs(twice.beta[0] - twice.beta[1]) > std::abs(once.beta[0] - once.beta[1]));
  // the doubled instance solves 2(1 - logistic(2t)) = 2t
  const double t2 = bisect_symmetric_optimum(2.0);
  CHECK(t2 == doctest::Approx(0.337416).epsilon(1e-5));
  CHECK(twice.beta[0] == doctest::Approx(t2).epsilon(1e-3));
}

TEST_CASE("maximize: concave objective, so any start reaches the same value") {
  RngStream rng(99);
  MStepProblem problem = random_problem(12, 40, rng);
  RankVector start_a(12, 0.0);
  RankVector start_b(12);
  for (double& b : start_b) b = rng.normal(0.0, 2.0);
  const MaximizeResult a = maximize(start_a, problem);
  const MaximizeResult b = maximize(start_b, problem);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-6));
}

TEST_CASE("maximize: unseen entities shrink exactly to the prior mean") {
  MStepProblem problem;
  problem.num_entities = 5;
  problem.mu = 0.3;
  problem.sigma2 = 1.0;
  problem.pairs = {WeightedPair{0, 1, 6.0}};
  const MaximizeResult res = maximize(RankVector(5, 0.3), problem);
  CHECK(res.converged);
  for (int k : {2, 3, 4}) {
    CHECK(res.beta[static_cast<std::size_t>(k)] == doctest::Approx(0.3).epsilon(1e-8));
  }
  CHECK(res.beta[0] > res.beta[1]);
}

TEST_CASE("maximize rejects a non-finite start") {
  MStepProblem problem;
  problem.num_entities = 1;
  CHECK_THROWS_AS(maximize({std::numeric_limits<double>::infinity()}, problem), NumericalError);
}
