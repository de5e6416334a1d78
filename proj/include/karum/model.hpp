#pragma once

// Model core: hyperparameters, latent assignment state, collapsed count
// statistics, the per-mention collapsed conditional, and the full collapsed
// joint log-probability.
//
// The generative story: a global categorical over K latent entities (theta,
// Dirichlet(alpha) prior), a per-entity categorical over name tokens (phi_k,
// Dirichlet(gamma) prior), a real-valued social rank beta_k per entity with
// a Normal(mu, sigma2) prior, and one logistic order observation per
// extracted pair: p(higher >= lower) = logistic(beta_hi - beta_lo). theta and
// phi are integrated out, leaving count-based conditionals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "karum/corpus.hpp"
#include "karum/errors.hpp"
#include "karum/io.hpp"

namespace karum {

using RankVector = std::vector<double>;

struct Hyperparameters {
  double alpha = 100.0;   // symmetric Dirichlet concentration over entities
  double gamma = 0.01;    // symmetric Dirichlet concentration over names per entity
  double mu = 0.0;        // prior mean of rank values
  double sigma2 = 1.0;    // prior variance of rank values
  int num_entities = 1000;
  int num_em_iters = 10;
  int num_sweeps = 300;   // Gibbs sweeps per E-step
  int burn_in = 100;
  int thin = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be > 0");
    if (!std::isfinite(mu)) throw ConfigError("mu must be finite");
    if (num_entities < 1) throw ConfigError("num_entities must be >= 1");
    if (num_em_iters < 0) throw ConfigError("num_em_iters must be >= 0");
    if (num_sweeps <= burn_in) throw ConfigError("num_sweeps must exceed burn_in");
    if (burn_in < 0) throw ConfigError("burn_in must be >= 0");
    if (thin < 1) throw ConfigError("thin must be >= 1");
  }

  // Sweeps j in 1..num_sweeps with j > burn_in and j % thin == 0.
  int retained_count() const {
    return num_sweeps / thin - burn_in / thin;
  }

  std::string fingerprint() const {
    std::string repr = fmt_double(alpha) + "|" + fmt_double(gamma) + "|" + fmt_double(mu) +
                       "|" + fmt_double(sigma2) + "|" + std::to_string(num_entities) + "|" +
                       std::to_string(num_em_iters) + "|" + std::to_string(num_sweeps) + "|" +
                       std::to_string(burn_in) + "|" + std::to_string(thin) + "|" +
                       std::to_string(seed);
    return to_hex(fnv1a(repr));
  }
};

// Entity assignment per mention, indexed by flat mention id.
struct LatentState {
  std::vector<std::int32_t> z;
};

// Collapsed sufficient statistics: per-entity mention counts and per-name
// sparse entity counts. These stand in for the integrated-out theta and phi.
class CountStats {
 public:
  CountStats(int num_entities, int vocab_size)
      : entity_counts_(static_cast<std::size_t>(num_entities), 0),
        by_name_(static_cast<std::size_t>(vocab_size)) {}

  static CountStats from_state(const LatentState& state, const CorpusIndex& corpus,
                               int num_entities) {
    CountStats counts(num_entities, corpus.vocab().size());
    for (std::int32_t m = 0; m < corpus.num_mentions(); ++m) {
      counts.add(state.z[static_cast<std::size_t>(m)],
                 corpus.mentions()[static_cast<std::size_t>(m)].name);
    }
    return counts;
  }

  void add(int entity, int name) {
    ++entity_counts_[static_cast<std::size_t>(entity)];
    ++by_name_[static_cast<std::size_t>(name)][entity];
    ++total_;
  }

  void remove(int entity, int name) {
    auto& ec = entity_counts_[static_cast<std::size_t>(entity)];
    auto& names = by_name_[static_cast<std::size_t>(name)];
    auto it = names.find(entity);
    if (ec <= 0 || it == names.end() || it->second <= 0) {
      throw InvariantError("count decrement below zero (entity " + std::to_string(entity) +
                           ", name " + std::to_string(name) + ")");
    }
    --ec;
    if (--it->second == 0) names.erase(it);
    --total_;
  }

  int entity_count(int entity) const { return entity_counts_[static_cast<std::size_t>(entity)]; }

  int name_count(int entity, int name) const {
    const auto& names = by_name_[static_cast<std::size_t>(name)];
    auto it = names.find(entity);
    return it == names.end() ? 0 : it->second;
  }

  // Entities currently using `name`, with counts; ordered by entity id.
  const std::map<int, int>& entities_with_name(int name) const {
    return by_name_[static_cast<std::size_t>(name)];
  }

  std::span<const std::int32_t> entity_counts() const { return entity_counts_; }

  std::int64_t total() const { return total_; }
  int num_entities() const { return static_cast<int>(entity_counts_.size()); }
  int vocab_size() const { return static_cast<int>(by_name_.size()); }

  // Exact invariant check: sum n_k == total, per-entity name counts sum to n_k.
  bool consistent() const {
    std::int64_t sum = 0;
    std::vector<std::int64_t> per_entity(entity_counts_.size(), 0);
    for (const auto& names : by_name_) {
      for (const auto& [k, c] : names) {
        if (c <= 0) return false;
        per_entity[static_cast<std::size_t>(k)] += c;
      }
    }
    for (std::size_t k = 0; k < entity_counts_.size(); ++k) {
      if (entity_counts_[k] < 0) return false;
      if (per_entity[k] != entity_counts_[k]) return false;
      sum += entity_counts_[k];
    }
    return sum == total_;
  }

  bool operator==(const CountStats&) const = default;

 private:
  std::vector<std::int32_t> entity_counts_;      // n_k
  std::vector<std::map<int, int>> by_name_;      // name -> (entity -> n_kv)
  std::int64_t total_ = 0;
};

// ---------------------------------------------------------------------------
// Likelihood pieces

// 1/(1+exp(-d)) without overflow for large |d|.
inline double logistic(double d) {
  if (d >= 0.0) {
    return 1.0 / (1.0 + std::exp(-d));
  }
  const double e = std::exp(d);
  return e / (1.0 + e);
}

// log logistic(d), stable on both tails.
inline double log_logistic(double d) {
  if (d >= 0.0) {
    return -std::log1p(std::exp(-d));
  }
  return d - std::log1p(std::exp(d));
}

// p(higher >= lower | z, beta) for one extracted pair.
inline double pair_likelihood(const IndexedPair& pair, const LatentState& state,
                              const RankVector& beta) {
  const double hi = beta[static_cast<std::size_t>(state.z[static_cast<std::size_t>(pair.higher)])];
  const double lo = beta[static_cast<std::size_t>(state.z[static_cast<std::size_t>(pair.lower)])];
  return logistic(hi - lo);
}

// Collapsed conditional over entities for one mention. `counts` must already
// exclude the mention (decrement-before-sample). For name token v,
//   p(k) prop. (n_k + alpha) * (n_kv + gamma)/(n_k + V*gamma)
//          * prod over incident pairs of logistic(sign * (beta_k - beta_other)),
// accumulated in log space and normalized with a max shift.
inline std::vector<double> collapsed_conditional(std::int32_t mention, const LatentState& state,
                                                 const CountStats& counts, const RankVector& beta,
                                                 const CorpusIndex& corpus,
                                                 const Hyperparameters& hyper) {
  const int K = hyper.num_entities;
  const int v = corpus.mentions()[static_cast<std::size_t>(mention)].name;
  const double vgamma = hyper.gamma * corpus.vocab().size();

  std::vector<double> score(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const double nk = counts.entity_count(k);
    const double nkv = counts.name_count(k, v);
    score[static_cast<std::size_t>(k)] = (std::log(nk + hyper.alpha) - std::log(nk + vgamma)) +
                                         std::log(nkv + hyper.gamma);
  }
  for (const IncidentPair& link : corpus.incident(mention)) {
    const double other = beta[static_cast<std::size_t>(
        state.z[static_cast<std::size_t>(link.other)])];
    for (int k = 0; k < K; ++k) {
      score[static_cast<std::size_t>(k)] +=
          log_logistic(link.sign * (beta[static_cast<std::size_t>(k)] - other));
    }
  }

  const double shift = *std::max_element(score.begin(), score.end());
  double total = 0.0;
  for (double& s : score) {
    s = std::exp(s - shift);
    total += s;
  }
  for (double& s : score) s /= total;
  return score;
}

// ---------------------------------------------------------------------------
// Collapsed joint log-probability (exact-enumeration oracle for small cases)

// log Dirichlet-multinomial over entity assignments with parameter alpha.
inline double log_entity_dirmult(const CountStats& counts, const Hyperparameters& hyper) {
  const int K = hyper.num_entities;
  const double a = hyper.alpha;
  double r = std::lgamma(K * a) - std::lgamma(static_cast<double>(counts.total()) + K * a);
  for (int k = 0; k < K; ++k) {
    r += std::lgamma(counts.entity_count(k) + a) - std::lgamma(a);
  }
  return r;
}

// Sum over entities of the log Dirichlet-multinomial over name tokens.
inline double log_name_dirmult(const CountStats& counts, const Hyperparameters& hyper) {
  const int V = counts.vocab_size();
  if (V == 0) return 0.0;
  const double g = hyper.gamma;
  const double vg = g * V;
  double r = 0.0;
  for (int k = 0; k < hyper.num_entities; ++k) {
    r += std::lgamma(vg) - std::lgamma(counts.entity_count(k) + vg);
  }
  // zero counts contribute lgamma(gamma) - lgamma(gamma) = 0
  for (int v = 0; v < V; ++v) {
    for (const auto& [k, c] : counts.entities_with_name(v)) {
      r += std::lgamma(c + g) - std::lgamma(g);
    }
  }
  return r;
}

inline double log_pair_likelihoods(const LatentState& state, const RankVector& beta,
                                   const CorpusIndex& corpus) {
  double r = 0.0;
  for (const IndexedPair& pair : corpus.pairs()) {
    const double hi =
        beta[static_cast<std::size_t>(state.z[static_cast<std::size_t>(pair.higher)])];
    const double lo =
        beta[static_cast<std::size_t>(state.z[static_cast<std::size_t>(pair.lower)])];
    r += log_logistic(hi - lo);
  }
  return r;
}

// Sum of log Normal(beta_k; mu, sigma2) densities.
inline double log_rank_prior(const RankVector& beta, const Hyperparameters& hyper) {
  constexpr double log_two_pi = 1.8378770664093454835606594728112;
  const double half_log_norm = 0.5 * (log_two_pi + std::log(hyper.sigma2));
  double r = 0.0;
  for (double b : beta) {
    const double d = b - hyper.mu;
    r += -half_log_norm - d * d / (2.0 * hyper.sigma2);
  }
  return r;
}

// Full collapsed joint: entity assignments, names, pair observations, and the
// rank prior. `counts` must be consistent with `state`.
inline double joint_log_prob(const LatentState& state, const CountStats& counts,
                             const RankVector& beta, const CorpusIndex& corpus,
                             const Hyperparameters& hyper) {
  return log_entity_dirmult(counts, hyper) + log_name_dirmult(counts, hyper) +
         log_pair_likelihoods(state, beta, corpus) + log_rank_prior(beta, hyper);
}

}  // namespace karum
