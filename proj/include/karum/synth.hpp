#pragma once

// Forward-samples synthetic corpora with known ground truth from the
// generative model, for recovery experiments.
//
// Entities get rank values from the Normal prior (or a fixed descending
// spacing), a global prominence distribution theta ~ Dirichlet(alpha), and a
// name distribution phi_k over a per-entity support set. Homonyms are
// planted by pairing entities to share a single dominant name token.
//
// Two corpus modes:
//   PairsOnly - every sampled comparison becomes its own two-mention letter
//     whose direction is drawn as Bernoulli(logistic(beta_i - beta_j)); this
//     is the exact-model path used by calibration and recovery oracles.
//   Letters  - participants are arranged into sender/recipient blocks via
//     sequential noisy insertion (each comparison drawn from the same
//     logistic law) with the first-mentioned selected by a dominance-
//     weighted draw. Letter structure is a corpus convention, not part of
//     the probabilistic model.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "karum/corpus.hpp"
#include "karum/errors.hpp"
#include "karum/io.hpp"
#include "karum/model.hpp"
#include "karum/rng.hpp"

namespace karum {

struct GenConfig {
  Hyperparameters hyper;  // alpha, gamma, mu, sigma2, num_entities, seed
  int num_letters = 100;
  int min_participants = 2;
  int max_participants = 4;
  int num_names = 50;
  double homonym_rate = 0.0;  // fraction of entities sharing a name with another
  enum class Mode { PairsOnly, Letters } mode = Mode::Letters;
  // When set, rank values are fixed at mu, mu - gap, mu - 2*gap, ... instead
  // of Normal draws.
  std::optional<double> rank_gap;

  void validate() const {
    if (!(hyper.alpha > 0.0) || !(hyper.gamma > 0.0) || !(hyper.sigma2 > 0.0)) {
      throw ConfigError("alpha, gamma and sigma2 must be > 0");
    }
    if (hyper.num_entities < 1) throw ConfigError("num_entities must be >= 1");
    if (num_letters < 0) throw ConfigError("num_letters must be >= 0");
    if (min_participants < 1) throw ConfigError("min_participants must be >= 1");
    if (max_participants < min_participants) {
      throw ConfigError("max_participants must be >= min_participants");
    }
    if (max_participants > hyper.num_entities) {
      throw ConfigError("participant count exceeds the number of entities");
    }
    if (homonym_rate < 0.0 || homonym_rate > 1.0) {
      throw ConfigError("homonym_rate must be in [0, 1]");
    }
    const int pairs = num_homonym_pairs();
    if (num_names < hyper.num_entities - pairs) {
      throw ConfigError("num_names too small: " + std::to_string(hyper.num_entities) +
                        " entities with " + std::to_string(pairs) +
                        " homonym pairs need at least " +
                        std::to_string(hyper.num_entities - pairs) + " names");
    }
  }

  int num_homonym_pairs() const {
    return static_cast<int>(homonym_rate * hyper.num_entities / 2.0 + 0.5);
  }
};

struct GroundTruth {
  RankVector beta;  // true rank value per entity
  // True name distribution per entity (token -> probability).
  std::vector<std::map<std::string, double>> name_dist;
  // True entity per mention, aligned with CorpusIndex flat mention order.
  std::vector<std::int32_t> mention_entity;

  bool operator==(const GroundTruth&) const = default;
};

namespace detail {

inline std::string synth_name(int v) {
  std::string num = std::to_string(v);
  while (num.size() < 3) num.insert(num.begin(), '0');
  return "n" + num;
}

// theta-weighted sampling of `count` distinct entities.
inline std::vector<int> sample_participants(const std::vector<double>& theta, int count,
                                            RngStream& rng) {
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  std::vector<bool> used(theta.size(), false);
  while (static_cast<int>(chosen.size()) < count) {
    const double u = rng.uniform01();
    double acc = 0.0;
    int pick = static_cast<int>(theta.size()) - 1;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      acc += theta[k];
      if (acc > u) {
        pick = static_cast<int>(k);
        break;
      }
    }
    if (used[static_cast<std::size_t>(pick)]) continue;
    used[static_cast<std::size_t>(pick)] = true;
    chosen.push_back(pick);
  }
  return chosen;
}

// Orders participants best-first: each newcomer walks the current order and
// takes the place of the first incumbent it beats, with every comparison an
// independent logistic draw.
inline std::vector<int> noisy_insertion_order(const std::vector<int>& participants,
                                              const RankVector& beta, RngStream& rng) {
  std::vector<int> order;
  order.reserve(participants.size());
  for (int p : participants) {
    std::size_t insert_at = order.size();
    for (std::size_t i = 0; i < order.size(); ++i) {
      const double p_win = logistic(beta[static_cast<std::size_t>(p)] -
                                    beta[static_cast<std::size_t>(order[i])]);
      if (rng.bernoulli(p_win)) {
        insert_at = i;
        break;
      }
    }
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(insert_at), p);
  }
  return order;
}

// Draws the first-mentioned participant with weight prod_j logistic(b_f - b_j):
// the probability that f dominates everyone else.
inline std::size_t draw_first_mention(const std::vector<int>& order, const RankVector& beta,
                                      RngStream& rng) {
  std::vector<double> weight(order.size(), 1.0);
  double total = 0.0;
  for (std::size_t f = 0; f < order.size(); ++f) {
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (j == f) continue;
      weight[f] *= logistic(beta[static_cast<std::size_t>(order[f])] -
                            beta[static_cast<std::size_t>(order[j])]);
    }
    total += weight[f];
  }
  const double target = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t f = 0; f < order.size(); ++f) {
    acc += weight[f];
    if (acc > target) return f;
  }
  return order.size() - 1;
}

}  // namespace detail

inline std::pair<std::vector<Letter>, GroundTruth> generate(const GenConfig& config,
                                                            RngStream& rng) {
  config.validate();
  const int K = config.hyper.num_entities;
  const int V = config.num_names;

  GroundTruth truth;

  // Rank values.
  truth.beta.resize(static_cast<std::size_t>(K));
  if (config.rank_gap) {
    for (int k = 0; k < K; ++k) {
      truth.beta[static_cast<std::size_t>(k)] = config.hyper.mu - *config.rank_gap * k;
    }
  } else {
    const double sd = std::sqrt(config.hyper.sigma2);
    for (int k = 0; k < K; ++k) {
      truth.beta[static_cast<std::size_t>(k)] = rng.normal(config.hyper.mu, sd);
    }
  }

  // Name support: the first num_homonym_pairs() names are each shared by a
  // random pair of entities; every remaining entity gets its own name.
  const int homonym_pairs = config.num_homonym_pairs();
  std::vector<int> entity_order(static_cast<std::size_t>(K));
  std::iota(entity_order.begin(), entity_order.end(), 0);
  for (std::size_t i = entity_order.size(); i > 1; --i) {
    std::swap(entity_order[i - 1], entity_order[static_cast<std::size_t>(rng.uniform_int(
                                       static_cast<int>(i)))]);
  }
  std::vector<int> entity_name(static_cast<std::size_t>(K), -1);
  int next_name = 0;
  for (int p = 0; p < homonym_pairs; ++p) {
    entity_name[static_cast<std::size_t>(entity_order[static_cast<std::size_t>(2 * p)])] =
        next_name;
    entity_name[static_cast<std::size_t>(entity_order[static_cast<std::size_t>(2 * p + 1)])] =
        next_name;
    ++next_name;
  }
  for (int k = 0; k < K; ++k) {
    if (entity_name[static_cast<std::size_t>(k)] < 0) {
      entity_name[static_cast<std::size_t>(k)] = next_name++;
    }
  }
  (void)V;

  truth.name_dist.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    truth.name_dist[static_cast<std::size_t>(k)]
                   [detail::synth_name(entity_name[static_cast<std::size_t>(k)])] = 1.0;
  }

  // Global entity prominence.
  std::vector<double> theta(static_cast<std::size_t>(K));
  double theta_total = 0.0;
  for (double& t : theta) {
    t = rng.gamma(config.hyper.alpha);
    theta_total += t;
  }
  for (double& t : theta) t /= theta_total;

  std::vector<Letter> corpus;
  auto add_mention_truth = [&](int entity) {
    truth.mention_entity.push_back(static_cast<std::int32_t>(entity));
  };

  for (int li = 0; li < config.num_letters; ++li) {
    const int count = config.min_participants +
                      rng.uniform_int(config.max_participants - config.min_participants + 1);
    const std::vector<int> participants = detail::sample_participants(theta, count, rng);

    if (config.mode == GenConfig::Mode::PairsOnly) {
      // Each unordered pair becomes its own two-mention letter.
      int sub = 0;
      for (std::size_t i = 0; i < participants.size(); ++i) {
        for (std::size_t j = i + 1; j < participants.size(); ++j) {
          const int a = participants[i];
          const int b = participants[j];
          const double p_a_wins = logistic(truth.beta[static_cast<std::size_t>(a)] -
                                           truth.beta[static_cast<std::size_t>(b)]);
          const int winner = rng.bernoulli(p_a_wins) ? a : b;
          const int loser = winner == a ? b : a;
          Letter letter;
          letter.id = "p" + std::to_string(li) + "-" + std::to_string(sub++);
          letter.senders.push_back(
              detail::synth_name(entity_name[static_cast<std::size_t>(winner)]));
          letter.recipients.push_back(
              detail::synth_name(entity_name[static_cast<std::size_t>(loser)]));
          letter.first_block = FirstBlock::Senders;
          corpus.push_back(std::move(letter));
          add_mention_truth(winner);
          add_mention_truth(loser);
        }
      }
      continue;
    }

    // Letters mode.
    std::vector<int> order = detail::noisy_insertion_order(participants, truth.beta, rng);
    const std::size_t first = detail::draw_first_mention(order, truth.beta, rng);
    std::rotate(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first),
                order.begin() + static_cast<std::ptrdiff_t>(first) + 1);

    const int n = static_cast<int>(order.size());
    const int first_block_size = n == 1 ? 1 : 1 + rng.uniform_int(n - 1);
    const bool senders_first = rng.bernoulli(0.5);

    Letter letter;
    letter.id = "L" + std::to_string(li);
    letter.first_block = senders_first ? FirstBlock::Senders : FirstBlock::Recipients;
    auto& first_block = senders_first ? letter.senders : letter.recipients;
    auto& second_block = senders_first ? letter.recipients : letter.senders;
    for (int i = 0; i < n; ++i) {
      const int entity = order[static_cast<std::size_t>(i)];
      auto& block = i < first_block_size ? first_block : second_block;
      block.push_back(detail::synth_name(entity_name[static_cast<std::size_t>(entity)]));
    }
    // Truth entries must follow flat mention order: senders block first.
    for (int i = 0; i < n; ++i) {
      const bool in_first = i < first_block_size;
      if (in_first == senders_first) add_mention_truth(order[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < n; ++i) {
      const bool in_first = i < first_block_size;
      if (in_first != senders_first) add_mention_truth(order[static_cast<std::size_t>(i)]);
    }
    corpus.push_back(std::move(letter));
  }

  return {std::move(corpus), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Truth file round-trip: a header object followed by one record per mention.

inline void export_truth(std::ostream& out, const GroundTruth& truth,
                         const CorpusIndex& corpus) {
  if (truth.mention_entity.size() != static_cast<std::size_t>(corpus.num_mentions())) {
    throw InvariantError("ground truth does not align with the corpus");
  }
  nlohmann::ordered_json header;
  header["format_version"] = 1;
  header["beta"] = truth.beta;
  nlohmann::ordered_json names = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < truth.name_dist.size(); ++k) {
    nlohmann::ordered_json dist = nlohmann::ordered_json::object();
    for (const auto& [token, p] : truth.name_dist[k]) dist[token] = p;
    names[std::to_string(k)] = std::move(dist);
  }
  header["entity_names"] = std::move(names);
  out << header.dump() << '\n';
  for (std::int32_t m = 0; m < corpus.num_mentions(); ++m) {
    nlohmann::ordered_json rec;
    rec["mention"] = corpus.key_of(m);
    rec["entity"] = truth.mention_entity[static_cast<std::size_t>(m)];
    out << rec.dump() << '\n';
  }
}

inline void save_truth(const std::filesystem::path& path, const GroundTruth& truth,
                       const CorpusIndex& corpus) {
  std::ofstream out = open_output(path);
  export_truth(out, truth, corpus);
}

inline GroundTruth load_truth(std::istream& in, const CorpusIndex& corpus) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("truth file is empty (missing header)");
  }
  GroundTruth truth;
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    const int version = header.at("format_version").get<int>();
    if (version != 1) {
      throw ConfigError("unsupported truth format version " + std::to_string(version));
    }
    truth.beta = header.at("beta").get<RankVector>();
    truth.name_dist.resize(truth.beta.size());
    for (const auto& [key, dist] : header.at("entity_names").items()) {
      std::size_t k = 0;
      auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), k);
      if (ec != std::errc() || ptr != key.data() + key.size() || k >= truth.name_dist.size()) {
        throw ParseError("bad entity id '" + key + "' in truth header");
      }
      for (const auto& [token, p] : dist.items()) {
        truth.name_dist[k][token] = p.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed truth header: ") + e.what());
  }

  truth.mention_entity.assign(static_cast<std::size_t>(corpus.num_mentions()), -1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    try {
      nlohmann::json rec = nlohmann::json::parse(line);
      const std::string key = rec.at("mention").get<std::string>();
      const auto mention = corpus.find_mention(key);
      if (!mention) {
        throw ParseError("line " + std::to_string(line_no) + ": unknown mention '" + key + "'");
      }
      truth.mention_entity[static_cast<std::size_t>(*mention)] =
          rec.at("entity").get<std::int32_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (std::int32_t m = 0; m < corpus.num_mentions(); ++m) {
    if (truth.mention_entity[static_cast<std::size_t>(m)] < 0) {
      throw ParseError("truth file is missing mention '" + corpus.key_of(m) + "'");
    }
  }
  return truth;
}

inline GroundTruth load_truth(const std::filesystem::path& path, const CorpusIndex& corpus) {
  std::ifstream in = open_input(path);
  return load_truth(in, corpus);
}

}  // namespace karum
