#pragma once

// MCEM driver: alternates collapsed-Gibbs E-steps with rank-optimization
// M-steps, tracks the per-iteration objective, checkpoints, and assembles
// the final outputs (global entity ranking, per-mention posteriors,
// entity-name association table).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "karum/corpus.hpp"
#include "karum/errors.hpp"
#include "karum/gibbs.hpp"
#include "karum/io.hpp"
#include "karum/model.hpp"
#include "karum/optimizer.hpp"
#include "karum/rng.hpp"

namespace karum {

enum class InitMode { NameIdentity, Random };

inline const char* init_mode_name(InitMode m) {
  return m == InitMode::NameIdentity ? "name-identity" : "random";
}

inline InitMode parse_init_mode(const std::string& s) {
  if (s == "name-identity") return InitMode::NameIdentity;
  if (s == "random") return InitMode::Random;
  throw ConfigError("unknown init mode '" + s + "' (expected name-identity or random)");
}

// NameIdentity assigns every mention of the i-th distinct name to entity i
// (the one-name-one-person null hypothesis); Random assigns uniformly.
inline std::pair<LatentState, CountStats> init_state(const CorpusIndex& corpus,
                                                     const Hyperparameters& hyper, InitMode mode,
                                                     RngStream& rng) {
  hyper.validate();
  const int K = hyper.num_entities;
  if (mode == InitMode::NameIdentity && K < corpus.vocab().size()) {
    throw ConfigError("name-identity init requires num_entities >= vocabulary size (" +
                      std::to_string(K) + " < " + std::to_string(corpus.vocab().size()) + ")");
  }
  LatentState state;
  state.z.resize(static_cast<std::size_t>(corpus.num_mentions()));
  for (std::int32_t m = 0; m < corpus.num_mentions(); ++m) {
    const auto idx = static_cast<std::size_t>(m);
    state.z[idx] = mode == InitMode::NameIdentity
                       ? corpus.mentions()[idx].name
                       : static_cast<std::int32_t>(rng.uniform_int(K));
  }
  return {state, CountStats::from_state(state, corpus, K)};
}

// Rank position per entity: 1 = largest beta, ties broken by entity id.
inline std::vector<int> rank_of(const RankVector& beta) {
  std::vector<int> order(beta.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ba = beta[static_cast<std::size_t>(a)];
    const double bb = beta[static_cast<std::size_t>(b)];
    if (ba != bb) return ba > bb;
    return a < b;
  });
  std::vector<int> rank(beta.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    rank[static_cast<std::size_t>(order[i])] = static_cast<int>(i) + 1;
  }
  return rank;
}

struct RankedEntity {
  int entity = 0;
  double beta = 0.0;
  int rank = 0;
};

struct PosteriorEntry {
  int entity = 0;
  double prob = 0.0;
};

struct NameAssociation {
  std::string name;
  std::int64_t count = 0;
};

struct RunResult {
  RankVector beta;
  std::vector<RankedEntity> ranking;  // sorted by rank ascending
  // Per flat mention, entries sorted by probability descending (entity id as
  // tiebreak) and truncated to the top-m entities.
  std::vector<std::vector<PosteriorEntry>> mention_posteriors;
  // Per entity, names associated with it across retained snapshots.
  std::vector<std::vector<NameAssociation>> entity_names;
  std::vector<double> trace;  // final M-step objective per EM iteration
};

struct Checkpoint {
  int format_version = 1;
  std::string hyper_fingerprint;
  int em_iter = 0;
  RankVector beta;
  std::vector<std::int32_t> z;
  std::string rng_state;
  std::vector<double> trace;
  SampleSet samples;  // retained snapshots of the last completed E-step
};

class McemRunner {
 public:
  McemRunner(const CorpusIndex& corpus, Hyperparameters hyper, InitMode mode)
      : corpus_(corpus), hyper_(hyper), sampler_(corpus, hyper), rng_(hyper.seed) {
    hyper_.validate();
    if (corpus_.num_mentions() == 0) {
      throw ConfigError("corpus is empty; nothing to infer");
    }
    auto [state, counts] = init_state(corpus_, hyper_, mode, rng_);
    state_ = std::move(state);
    counts_ = std::move(counts);
    beta_.assign(static_cast<std::size_t>(hyper_.num_entities), hyper_.mu);
  }

  McemRunner(const CorpusIndex& corpus, Hyperparameters hyper, const Checkpoint& cp)
      : corpus_(corpus),
        hyper_(hyper),
        sampler_(corpus, hyper),
        rng_(0),
        counts_(hyper.num_entities, corpus.vocab().size()) {
    hyper_.validate();
    if (cp.hyper_fingerprint != hyper_.fingerprint()) {
      throw ConfigError("checkpoint was produced with a different configuration");
    }
    if (cp.z.size() != static_cast<std::size_t>(corpus_.num_mentions())) {
      throw ConfigError("checkpoint does not match the corpus (mention count differs)");
    }
    state_.z = cp.z;
    counts_ = CountStats::from_state(state_, corpus_, hyper_.num_entities);
    beta_ = cp.beta;
    rng_.restore(cp.rng_state);
    trace_ = cp.trace;
    samples_ = cp.samples;
    iter_ = cp.em_iter;
  }

  int iteration() const { return iter_; }
  bool done() const { return iter_ >= hyper_.num_em_iters; }
  const std::vector<double>& trace() const { return trace_; }
  const RankVector& rank_values() const { return beta_; }
  const LatentState& state() const { return state_; }

  // One EM iteration: an E-step against the current beta, then an M-step
  // warm-started from it.
  void step() {
    sampler_.set_rank_values(beta_);
    samples_ = sampler_.run_e_step(state_, counts_, rng_);
    if (samples_.snapshots.empty()) {
      throw ConfigError("retention schedule kept zero samples (sweeps " +
                        std::to_string(hyper_.num_sweeps) + ", burn-in " +
                        std::to_string(hyper_.burn_in) + ", thin " + std::to_string(hyper_.thin) +
                        ")");
    }
    MStepProblem problem;
    problem.pairs = sample_pairs(samples_, corpus_);
    problem.mu = hyper_.mu;
    problem.sigma2 = hyper_.sigma2;
    problem.num_entities = hyper_.num_entities;
    MaximizeResult res;
    try {
      res = maximize(beta_, problem);
    } catch (const NumericalError& e) {
      throw NumericalError("em iteration " + std::to_string(iter_ + 1) + ": " + e.what());
    }
    beta_ = std::move(res.beta);
    trace_.push_back(res.objective);
    ++iter_;
  }

  Checkpoint make_checkpoint() const {
    Checkpoint cp;
    cp.hyper_fingerprint = hyper_.fingerprint();
    cp.em_iter = iter_;
    cp.beta = beta_;
    cp.z = state_.z;
    cp.rng_state = rng_.serialize();
    cp.trace = trace_;
    cp.samples = samples_;
    return cp;
  }

  // Builds the final outputs from the last completed E-step's snapshots.
  // With zero EM iterations there are no samples: posteriors and name tables
  // come out empty and beta stays at the prior mean.
  RunResult finalize(int top_m = 20) const {
    RunResult result;
    result.beta = beta_;
    result.trace = trace_;

    const std::vector<int> ranks = rank_of(beta_);
    result.ranking.resize(beta_.size());
    for (std::size_t k = 0; k < beta_.size(); ++k) {
      result.ranking[static_cast<std::size_t>(ranks[k] - 1)] =
          RankedEntity{static_cast<int>(k), beta_[k], ranks[k]};
    }

    const auto n = static_cast<std::size_t>(corpus_.num_mentions());
    result.mention_posteriors.resize(n);
    result.entity_names.resize(beta_.size());
    if (samples_.snapshots.empty()) return result;

    const double denom = static_cast<double>(samples_.snapshots.size());
    std::map<std::int32_t, std::int32_t> counter;
    for (std::size_t m = 0; m < n; ++m) {
      counter.clear();
      for (const auto& snapshot : samples_.snapshots) {
        ++counter[snapshot[m]];
      }
      auto& entries = result.mention_posteriors[m];
      entries.reserve(counter.size());
      for (const auto& [entity, count] : counter) {
        entries.push_back(PosteriorEntry{entity, static_cast<double>(count) / denom});
      }
      std::sort(entries.begin(), entries.end(), [](const PosteriorEntry& a, const PosteriorEntry& b) {
        if (a.prob != b.prob) return a.prob > b.prob;
        return a.entity < b.entity;
      });
      if (static_cast<int>(entries.size()) > top_m) {
        entries.resize(static_cast<std::size_t>(top_m));
      }
    }

    std::vector<std::map<std::int32_t, std::int64_t>> name_counts(beta_.size());
    for (const auto& snapshot : samples_.snapshots) {
      for (std::size_t m = 0; m < n; ++m) {
        ++name_counts[static_cast<std::size_t>(snapshot[m])]
                     [corpus_.mentions()[m].name];
      }
    }
    for (std::size_t k = 0; k < beta_.size(); ++k) {
      auto& assoc = result.entity_names[k];
      assoc.reserve(name_counts[k].size());
      for (const auto& [name, count] : name_counts[k]) {
        assoc.push_back(NameAssociation{corpus_.vocab().token(name), count});
      }
      std::sort(assoc.begin(), assoc.end(), [](const NameAssociation& a, const NameAssociation& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.name < b.name;
      });
    }
    return result;
  }

 private:
  const CorpusIndex& corpus_;
  Hyperparameters hyper_;
  GibbsSampler sampler_;
  RngStream rng_;
  LatentState state_;
  CountStats counts_{1, 0};
  RankVector beta_;
  std::vector<double> trace_;
  SampleSet samples_;
  int iter_ = 0;
};

inline RunResult run_mcem(const CorpusIndex& corpus, const Hyperparameters& hyper, InitMode mode,
                          int top_m = 20) {
  McemRunner runner(corpus, hyper, mode);
  while (!runner.done()) runner.step();
  return runner.finalize(top_m);
}

// ---------------------------------------------------------------------------
// Posterior rank histograms

struct HistogramBin {
  int first_rank = 0;  // lowest rank position covered by the bin
  double mass = 0.0;
};

// Aggregates posterior mass per rank position across all mentions of a name
// (or only those within one letter). Mass sums to the number of aggregated
// mentions, up to top-m truncation.
inline std::vector<HistogramBin> mention_posterior_histogram(
    const RunResult& result, const CorpusIndex& corpus, const std::string& name,
    const std::optional<std::string>& letter_id = std::nullopt, int bin_width = 1) {
  if (bin_width < 1) throw ConfigError("bin width must be >= 1");
  const int name_id = corpus.vocab().id_of(name);
  if (name_id < 0) throw NotFoundError("name '" + name + "' does not occur in the corpus");
  std::optional<std::int32_t> letter;
  if (letter_id) {
    letter = corpus.find_letter(*letter_id);
    if (!letter) throw NotFoundError("letter '" + *letter_id + "' not found");
  }

  const std::vector<int> ranks = rank_of(result.beta);
  std::map<int, double> mass;
  bool any = false;
  for (std::int32_t m = 0; m < corpus.num_mentions(); ++m) {
    const IndexedMention& mention = corpus.mentions()[static_cast<std::size_t>(m)];
    if (mention.name != name_id) continue;
    if (letter && mention.letter != *letter) continue;
    any = true;
    for (const PosteriorEntry& e : result.mention_posteriors[static_cast<std::size_t>(m)]) {
      const int rank = ranks[static_cast<std::size_t>(e.entity)];
      const int bin = (rank - 1) / bin_width;
      mass[bin] += e.prob;
    }
  }
  if (!any) {
    throw NotFoundError("name '" + name + "' does not occur" +
                        (letter_id ? " in letter '" + *letter_id + "'" : ""));
  }
  std::vector<HistogramBin> out;
  out.reserve(mass.size());
  for (const auto& [bin, m] : mass) {
    out.push_back(HistogramBin{bin * bin_width + 1, m});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json checkpoint_to_json(const Checkpoint& cp) {
  nlohmann::ordered_json j;
  j["format_version"] = cp.format_version;
  j["hyper_fingerprint"] = cp.hyper_fingerprint;
  j["em_iter"] = cp.em_iter;
  j["beta"] = cp.beta;
  j["z"] = cp.z;
  j["rng"] = cp.rng_state;
  j["trace"] = cp.trace;
  j["sample_sweeps"] = cp.samples.sweep_indices;
  j["samples"] = cp.samples.snapshots;
  return j;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  std::ofstream out = open_output(path);
  out << checkpoint_to_json(cp).dump() << '\n';
  if (!out) throw IoError("failed to write checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint file " + path.string() + ": " + e.what());
  }
  Checkpoint cp;
  try {
    cp.format_version = j.at("format_version").get<int>();
    if (cp.format_version != 1) {
      throw ConfigError("unsupported checkpoint format version " +
                        std::to_string(cp.format_version));
    }
    cp.hyper_fingerprint = j.at("hyper_fingerprint").get<std::string>();
    cp.em_iter = j.at("em_iter").get<int>();
    cp.beta = j.at("beta").get<RankVector>();
    cp.z = j.at("z").get<std::vector<std::int32_t>>();
    cp.rng_state = j.at("rng").get<std::string>();
    cp.trace = j.at("trace").get<std::vector<double>>();
    cp.samples.sweep_indices = j.at("sample_sweeps").get<std::vector<int>>();
    cp.samples.snapshots = j.at("samples").get<std::vector<std::vector<std::int32_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint file " + path.string() + ": " + e.what());
  }
  return cp;
}

inline void write_ranking_csv(std::ostream& out, const RunResult& result, int max_names = 5) {
  out << "entity_id,beta,rank,top_names\n";
  for (const RankedEntity& r : result.ranking) {
    std::string names;
    const auto& assoc = result.entity_names[static_cast<std::size_t>(r.entity)];
    const auto limit = std::min<std::size_t>(assoc.size(), static_cast<std::size_t>(max_names));
    for (std::size_t i = 0; i < limit; ++i) {
      if (i > 0) names += ';';
      names += assoc[i].name + ":" + std::to_string(assoc[i].count);
    }
    out << r.entity << ',' << fmt_double(r.beta) << ',' << r.rank << ',' << csv_field(names)
        << '\n';
  }
}

inline void write_trace_csv(std::ostream& out, const RunResult& result) {
  out << "em_iter,objective\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    out << (i + 1) << ',' << fmt_double(result.trace[i]) << '\n';
  }
}

// Nested object: letter id -> mention key within the letter ("s0", "r2") ->
// posterior entries.
inline void write_posteriors_json(std::ostream& out, const RunResult& result,
                                  const CorpusIndex& corpus) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  for (std::size_t li = 0; li < corpus.letters().size(); ++li) {
    root[corpus.letters()[li].id] = nlohmann::ordered_json::object();
  }
  for (std::int32_t m = 0; m < corpus.num_mentions(); ++m) {
    const IndexedMention& mention = corpus.mentions()[static_cast<std::size_t>(m)];
    const Letter& letter = corpus.letters()[static_cast<std::size_t>(mention.letter)];
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const PosteriorEntry& e : result.mention_posteriors[static_cast<std::size_t>(m)]) {
      entries.push_back({{"entity", e.entity}, {"p", e.prob}});
    }
    root[letter.id][std::string(1, role_char(mention.role)) + std::to_string(mention.pos)] =
        std::move(entries);
  }
  out << root.dump(2) << '\n';
}

inline void write_mentions_csv(std::ostream& out, const CorpusIndex& corpus) {
  out << "letter_id,role,pos,name\n";
  for (std::int32_t m = 0; m < corpus.num_mentions(); ++m) {
    const IndexedMention& mention = corpus.mentions()[static_cast<std::size_t>(m)];
    out << csv_field(corpus.letters()[static_cast<std::size_t>(mention.letter)].id) << ','
        << role_name(mention.role) << ',' << mention.pos << ','
        << csv_field(corpus.vocab().token(mention.name)) << '\n';
  }
}

}  // namespace karum
