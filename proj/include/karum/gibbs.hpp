#pragma once

// Collapsed Gibbs sampling over entity assignments: full sweeps in
// deterministic corpus order, burn-in and thinning, retained snapshots.
//
// The rank vector is held fixed for the duration of an E-step, so the pair
// factor log logistic(beta_k - beta_j) is precomputed as two K x K tables
// (mention on the winning side / on the losing side). A mention's scores are
// then table lookups plus row additions: no transcendental calls in the
// inner loop except the final exponentiation.

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "karum/corpus.hpp"
#include "karum/errors.hpp"
#include "karum/model.hpp"
#include "karum/rng.hpp"

namespace karum {

// Post-burn-in assignment snapshots retained during one E-step.
struct SampleSet {
  std::vector<std::vector<std::int32_t>> snapshots;
  std::vector<int> sweep_indices;

  bool operator==(const SampleSet&) const = default;
};

class GibbsSampler {
 public:
  GibbsSampler(const CorpusIndex& corpus, const Hyperparameters& hyper)
      : corpus_(corpus), hyper_(hyper) {
    hyper_.validate();
    const auto n = static_cast<std::size_t>(corpus_.num_mentions());
    const double vgamma = hyper_.gamma * corpus_.vocab().size();
    entity_table_.resize(n + 1);
    name_table_.resize(n + 1);
    for (std::size_t c = 0; c <= n; ++c) {
      const auto cd = static_cast<double>(c);
      entity_table_[c] = std::log(cd + hyper_.alpha) - std::log(cd + vgamma);
      name_table_[c] = std::log(cd + hyper_.gamma);
    }
    const auto k = static_cast<std::size_t>(hyper_.num_entities);
    use_tables_ = k * k <= 8'000'000;  // 128 MB for the two tables
    score_.resize(k);
    set_rank_values(RankVector(k, hyper_.mu));
  }

  // Rebuilds the pairwise logistic tables; call whenever beta changes.
  void set_rank_values(RankVector beta) {
    beta_ = std::move(beta);
    if (!use_tables_) return;
    const auto k_count = static_cast<std::size_t>(hyper_.num_entities);
    win_.resize(k_count * k_count);
    lose_.resize(k_count * k_count);
    for (std::size_t j = 0; j < k_count; ++j) {
      const double bj = beta_[j];
      double* win_row = win_.data() + j * k_count;
      double* lose_row = lose_.data() + j * k_count;
      for (std::size_t k = 0; k < k_count; ++k) {
        win_row[k] = log_logistic(beta_[k] - bj);
        lose_row[k] = log_logistic(bj - beta_[k]);
      }
    }
  }

  const RankVector& rank_values() const { return beta_; }

  // One full sweep: every mention resampled exactly once in corpus order
  // (decrement counts, draw from the collapsed conditional, assign,
  // increment counts).
  void sweep(LatentState& state, CountStats& counts, RngStream& rng) {
    for (std::int32_t m = 0; m < corpus_.num_mentions(); ++m) {
      const IndexedMention& mention = corpus_.mentions()[static_cast<std::size_t>(m)];
      const auto zm = static_cast<std::size_t>(m);
      counts.remove(state.z[zm], mention.name);
      const int k = draw_conditional(m, state, counts, rng);
      state.z[zm] = k;
      counts.add(k, mention.name);
    }
  }

  // Runs num_sweeps sweeps, retaining snapshots at sweeps j with j > burn_in
  // and j % thin == 0. Returns a fresh SampleSet each call.
  SampleSet run_e_step(LatentState& state, CountStats& counts, RngStream& rng) {
    SampleSet samples;
    for (int j = 1; j <= hyper_.num_sweeps; ++j) {
      sweep(state, counts, rng);
      if (j > hyper_.burn_in && j % hyper_.thin == 0) {
        samples.snapshots.push_back(state.z);
        samples.sweep_indices.push_back(j);
      }
    }
    return samples;
  }

  // Unnormalized collapsed conditional computed with the table machinery;
  // exposed for equivalence tests against collapsed_conditional().
  std::vector<double> conditional(std::int32_t mention, const LatentState& state,
                                  const CountStats& counts) {
    fill_scores(mention, state, counts);
    std::vector<double> probs(score_.begin(), score_.end());
    double shift = probs[0];
    for (double s : probs) shift = std::max(shift, s);
    double total = 0.0;
    for (double& s : probs) {
      s = std::exp(s - shift);
      total += s;
    }
    for (double& s : probs) s /= total;
    return probs;
  }

 private:
  void fill_scores(std::int32_t mention, const LatentState& state, const CountStats& counts) {
    const int K = hyper_.num_entities;
    const IndexedMention& m = corpus_.mentions()[static_cast<std::size_t>(mention)];
    const std::int32_t* nk = counts.entity_counts().data();
    const double base = name_table_[0];
    double* s = score_.data();
    for (int k = 0; k < K; ++k) {
      s[k] = entity_table_[static_cast<std::size_t>(nk[k])] + base;
    }
    for (const auto& [k, c] : counts.entities_with_name(m.name)) {
      s[k] += name_table_[static_cast<std::size_t>(c)] - base;
    }
    const auto k_count = static_cast<std::size_t>(K);
    for (const IncidentPair& link : corpus_.incident(mention)) {
      const auto j = static_cast<std::size_t>(state.z[static_cast<std::size_t>(link.other)]);
      if (use_tables_) {
        const double* row =
            (link.sign > 0 ? win_.data() : lose_.data()) + j * k_count;
        for (int k = 0; k < K; ++k) s[k] += row[k];
      } else {
        const double bj = beta_[j];
        for (int k = 0; k < K; ++k) {
          s[k] += log_logistic(link.sign * (beta_[static_cast<std::size_t>(k)] - bj));
        }
      }
    }
  }

  int draw_conditional(std::int32_t mention, const LatentState& state, const CountStats& counts,
                       RngStream& rng) {
    const int K = hyper_.num_entities;
    fill_scores(mention, state, counts);
    double* s = score_.data();
    double shift = s[0];
    for (int k = 1; k < K; ++k) shift = std::max(shift, s[k]);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      s[k] = std::exp(s[k] - shift);
      total += s[k];
    }
    const double target = rng.uniform01() * total;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += s[k];
      if (acc > target) return k;
    }
    return K - 1;
  }

  const CorpusIndex& corpus_;
  Hyperparameters hyper_;
  RankVector beta_;
  std::vector<double> entity_table_;  // log(c + alpha) - log(c + V*gamma)
  std::vector<double> name_table_;    // log(c + gamma)
  std::vector<double> win_;           // row j: log logistic(beta_k - beta_j)
  std::vector<double> lose_;          // row j: log logistic(beta_j - beta_k)
  std::vector<double> score_;
  bool use_tables_ = true;
};

// One (winner, loser) entity pair with an aggregated multiplicity.
struct WeightedPair {
  std::int32_t winner = 0;
  std::int32_t loser = 0;
  double weight = 0.0;

  bool operator==(const WeightedPair&) const = default;
};

// Expands retained snapshots against the corpus pairs: one (z_higher,
// z_lower) instance per snapshot per pair, aggregated by multiplicity in
// deterministic (winner, loser) order. The total multiplicity equals
// |snapshots| * |pairs|.
inline std::vector<WeightedPair> sample_pairs(const SampleSet& samples,
                                              const CorpusIndex& corpus) {
  if (samples.snapshots.empty()) {
    throw ConfigError("sample set is empty; nothing to optimize against");
  }
  std::map<std::pair<std::int32_t, std::int32_t>, double> agg;
  for (const auto& snapshot : samples.snapshots) {
    for (const IndexedPair& pair : corpus.pairs()) {
      const std::int32_t w = snapshot[static_cast<std::size_t>(pair.higher)];
      const std::int32_t l = snapshot[static_cast<std::size_t>(pair.lower)];
      agg[{w, l}] += 1.0;
    }
  }
  std::vector<WeightedPair> out;
  out.reserve(agg.size());
  for (const auto& [key, weight] : agg) {
    out.push_back(WeightedPair{key.first, key.second, weight});
  }
  return out;
}

}  // namespace karum
