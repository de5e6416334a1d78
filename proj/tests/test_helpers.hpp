#pragma once

// Shared fixtures and independent oracles for the test suite.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "karum/corpus.hpp"
#include "karum/model.hpp"

namespace karum::testing {

inline Letter make_letter(std::string id, std::vector<std::string> senders,
                          std::vector<std::string> recipients,
                          FirstBlock first = FirstBlock::Senders) {
  Letter letter;
  letter.id = std::move(id);
  letter.senders = std::move(senders);
  letter.recipients = std::move(recipients);
  letter.first_block = first;
  return letter;
}

// The introductory-formula example: two senders, three recipients, senders
// written first.
inline Letter formula_example() {
  return make_letter("ex1", {"Aššur-idī", "Aššur-nādā"},
                     {"Amur-Ištar", "Alāhum", "Aššur-taklāku"});
}

// Exact per-mention marginals by brute-force enumeration of all K^M
// assignments, weighting each by exp(joint - rank prior). Feasible only for
// tiny instances; this is the ground truth the sampler is checked against.
inline std::vector<std::vector<double>> enumeration_marginals(const CorpusIndex& corpus,
                                                              const RankVector& beta,
                                                              const Hyperparameters& hyper) {
  const int K = hyper.num_entities;
  const auto n = static_cast<std::size_t>(corpus.num_mentions());
  std::vector<std::vector<double>> marginals(
      n, std::vector<double>(static_cast<std::size_t>(K), 0.0));
  LatentState state;
  state.z.assign(n, 0);
  double normalizer = 0.0;
  for (;;) {
    const CountStats counts = CountStats::from_state(state, corpus, K);
    const double w =
        std::exp(joint_log_prob(state, counts, beta, corpus, hyper) - log_rank_prior(beta, hyper));
    normalizer += w;
    for (std::size_t m = 0; m < n; ++m) {
      marginals[m][static_cast<std::size_t>(state.z[m])] += w;
    }
    std::size_t pos = 0;
    while (pos < n) {
      if (++state.z[pos] < K) break;
      state.z[pos] = 0;
      ++pos;
    }
    if (pos == n) break;
  }
  for (auto& row : marginals) {
    for (double& v : row) v /= normalizer;
  }
  return marginals;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

}  // namespace karum::testing
