#pragma once

// M-step: maximize the regularized pairwise-rank log-likelihood
//
//   f(beta) = sum_p m_p * log logistic(beta_w - beta_l)
//           - (1/sigma2) * sum_k (beta_k - mu)^2
//
// over the rank vector, given sampled (winner, loser) entity pairs with
// multiplicities. The objective is concave (log-logistic terms plus a
// negative quadratic), so gradient ascent with an Armijo backtracking line
// search converges from any start. Note the quadratic carries coefficient
// 1/sigma2, not 1/(2 sigma2); its gradient is therefore -(2/sigma2)(b - mu).
// Entities that appear in no pair shrink exactly to mu.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "karum/errors.hpp"
#include "karum/gibbs.hpp"
#include "karum/model.hpp"

namespace karum {

struct MStepProblem {
  std::vector<WeightedPair> pairs;  // aggregated multiplicities, fixed order
  double mu = 0.0;
  double sigma2 = 1.0;
  int num_entities = 0;
};

inline double objective(const RankVector& beta, const MStepProblem& problem) {
  double f = 0.0;
  for (const WeightedPair& p : problem.pairs) {
    f += p.weight * log_logistic(beta[static_cast<std::size_t>(p.winner)] -
                                 beta[static_cast<std::size_t>(p.loser)]);
  }
  const double inv_s2 = 1.0 / problem.sigma2;
  for (double b : beta) {
    const double d = b - problem.mu;
    f -= inv_s2 * d * d;
  }
  return f;
}

// Accumulation order is fixed (pairs in problem order, then the regularizer)
// so repeated evaluations are bit-identical.
inline RankVector gradient(const RankVector& beta, const MStepProblem& problem) {
  RankVector g(beta.size(), 0.0);
  for (const WeightedPair& p : problem.pairs) {
    const auto w = static_cast<std::size_t>(p.winner);
    const auto l = static_cast<std::size_t>(p.loser);
    const double e = p.weight * (1.0 - logistic(beta[w] - beta[l]));
    g[w] += e;
    g[l] -= e;
  }
  const double two_inv_s2 = 2.0 / problem.sigma2;
  for (std::size_t k = 0; k < beta.size(); ++k) {
    g[k] -= two_inv_s2 * (beta[k] - problem.mu);
  }
  return g;
}

struct MaximizeResult {
  RankVector beta;
  double objective = 0.0;
  int iterations = 0;
  double grad_inf_norm = 0.0;
  bool converged = false;
};

struct MaximizeOptions {
  double grad_tolerance = 1e-6;  // infinity norm
  int max_iterations = 500;
  double armijo_c = 1e-4;
  double initial_step = 1.0;
};

// Gradient ascent with halving backtracking under the Armijo condition.
// Accepted steps never decrease the objective.
inline MaximizeResult maximize(RankVector beta, const MStepProblem& problem,
                               const MaximizeOptions& options = {}) {
  MaximizeResult result;
  double fx = objective(beta, problem);
  if (!std::isfinite(fx)) {
    throw NumericalError("m-step objective is not finite at the starting point");
  }
  double step = options.initial_step;
  RankVector candidate(beta.size());

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const RankVector g = gradient(beta, problem);
    double gnorm = 0.0;
    double gsq = 0.0;
    for (double gk : g) {
      gnorm = std::max(gnorm, std::abs(gk));
      gsq += gk * gk;
    }
    result.grad_inf_norm = gnorm;
    if (gnorm < options.grad_tolerance) {
      result.converged = true;
      break;
    }

    double t = step;
    bool accepted = false;
    while (t > 1e-20) {
      for (std::size_t k = 0; k < beta.size(); ++k) {
        candidate[k] = beta[k] + t * g[k];
      }
      const double fc = objective(candidate, problem);
      if (std::isfinite(fc) && fc >= fx + options.armijo_c * t * gsq) {
        beta.swap(candidate);
        fx = fc;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Step size underflowed: fp-limited near the optimum.
      break;
    }
    step = std::min(t * 2.0, 1e4);
  }

  result.beta = std::move(beta);
  result.objective = fx;
  result.iterations = iter;
  return result;
}

}  // namespace karum
