#pragma once

// Scoring of inference output against ground truth or expert labels, plus
// data-level consistency diagnostics (name-order cycles).

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "karum/corpus.hpp"
#include "karum/errors.hpp"
#include "karum/io.hpp"

namespace karum {

// mention key -> label. Labels may be entity ids or expert identity tags;
// the two sides of a comparison need not share a label space (see
// entity_matching).
using LabelSet = std::map<std::string, std::string>;

// Fraction of mentions, over the key intersection, with equal labels.
inline double agreement(const LabelSet& pred, const LabelSet& gold) {
  std::int64_t common = 0;
  std::int64_t equal = 0;
  for (const auto& [key, label] : pred) {
    auto it = gold.find(key);
    if (it == gold.end()) continue;
    ++common;
    if (it->second == label) ++equal;
  }
  if (common == 0) {
    throw ConfigError("label sets share no mention keys");
  }
  return static_cast<double>(equal) / static_cast<double>(common);
}

// Chance-corrected agreement: kappa = (p_o - p_e) / (1 - p_e) with p_e from
// the product of per-label marginal frequencies over the joint label space.
inline double cohens_kappa(const LabelSet& pred, const LabelSet& gold) {
  std::map<std::string, std::int64_t> pred_marginal;
  std::map<std::string, std::int64_t> gold_marginal;
  std::int64_t common = 0;
  std::int64_t equal = 0;
  for (const auto& [key, label] : pred) {
    auto it = gold.find(key);
    if (it == gold.end()) continue;
    ++common;
    if (it->second == label) ++equal;
    ++pred_marginal[label];
    ++gold_marginal[it->second];
  }
  if (common == 0) {
    throw ConfigError("label sets share no mention keys");
  }
  const double n = static_cast<double>(common);
  const double p_o = static_cast<double>(equal) / n;
  double p_e = 0.0;
  for (const auto& [label, count] : pred_marginal) {
    auto it = gold_marginal.find(label);
    if (it == gold_marginal.end()) continue;
    p_e += (static_cast<double>(count) / n) * (static_cast<double>(it->second) / n);
  }
  if (1.0 - p_e <= 0.0) {
    // Both raters constant on the same label: agreement 1 by construction.
    if (p_o == 1.0) return 0.0;
    throw NumericalError("Cohen's kappa undefined: chance agreement is 1 with disagreement");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

struct MatchResult {
  // Predicted label -> gold label, greedy maximum-overlap one-to-one.
  std::map<std::string, std::string> pred_to_gold;
  // Matched-overlap mentions / total common mentions.
  double accuracy = 0.0;
};

// Greedy one-to-one alignment between predicted and gold cluster labels over
// the key intersection. Ties are broken by (pred label, gold label) order,
// which makes the matching deterministic. Greedy matching is a lower bound
// on the optimal-assignment accuracy.
inline MatchResult entity_matching(const LabelSet& pred, const LabelSet& gold) {
  std::map<std::pair<std::string, std::string>, std::int64_t> overlap;
  std::int64_t common = 0;
  for (const auto& [key, label] : pred) {
    auto it = gold.find(key);
    if (it == gold.end()) continue;
    ++common;
    ++overlap[{label, it->second}];
  }
  MatchResult result;
  if (common == 0) return result;

  std::vector<std::tuple<std::int64_t, std::string, std::string>> edges;
  edges.reserve(overlap.size());
  for (const auto& [pair, count] : overlap) {
    edges.emplace_back(count, pair.first, pair.second);
  }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });

  std::set<std::string> used_pred;
  std::set<std::string> used_gold;
  std::int64_t matched = 0;
  for (const auto& [count, p, g] : edges) {
    if (used_pred.count(p) != 0 || used_gold.count(g) != 0) continue;
    used_pred.insert(p);
    used_gold.insert(g);
    result.pred_to_gold.emplace(p, g);
    matched += count;
  }
  result.accuracy = static_cast<double>(matched) / static_cast<double>(common);
  return result;
}

// Maps predicted labels through a matching; unmatched labels get a reserved
// tag outside the gold space so they always count as disagreement.
inline LabelSet apply_matching(const LabelSet& pred,
                               const std::map<std::string, std::string>& pred_to_gold) {
  LabelSet out;
  for (const auto& [key, label] : pred) {
    auto it = pred_to_gold.find(label);
    out.emplace(key, it == pred_to_gold.end() ? "<unmatched:" + label + ">" : it->second);
  }
  return out;
}

// Kendall rank correlation between two paired score vectors:
// (concordant - discordant) / C(n, 2); ties count as neither.
inline double kendall_tau(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) {
    throw ConfigError("kendall_tau requires paired scores of equal length");
  }
  const std::size_t n = truth.size();
  if (n < 2) {
    throw ConfigError("kendall_tau requires at least 2 entities");
  }
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dt = truth[i] - truth[j];
      const double de = estimate[i] - estimate[j];
      const double prod = dt * de;
      if (prod > 0.0) ++concordant;
      else if (prod < 0.0) ++discordant;
    }
  }
  const double total = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(concordant - discordant) / total;
}

// ---------------------------------------------------------------------------
// Cycle diagnostics

struct NameCycle {
  std::vector<std::string> names;     // members of one SCC, sorted
  std::vector<std::string> witnesses;  // letters contributing an in-SCC edge
};

struct CycleReport {
  std::vector<NameCycle> cycles;  // SCCs of size >= 2
};

// Builds the directed graph on name tokens (one edge per extracted pair,
// deduplicated) and reports every strongly connected component of size >= 2:
// names that cannot be consistently ranked under one entity per name.
inline CycleReport cycle_diagnostics(const std::vector<Letter>& corpus) {
  Vocabulary vocab = build_vocabulary(corpus);
  const int n = vocab.size();
  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  // edge -> letters witnessing it
  std::map<std::pair<int, int>, std::vector<std::string>> edge_letters;
  for (const Letter& letter : corpus) {
    for (const PairwiseOrder& p : extract_pairs(letter)) {
      const int hi = vocab.id_of(letter.token(p.higher.role, static_cast<std::size_t>(p.higher.pos)));
      const int lo = vocab.id_of(letter.token(p.lower.role, static_cast<std::size_t>(p.lower.pos)));
      if (hi == lo) continue;
      adj[static_cast<std::size_t>(hi)].insert(lo);
      auto& wits = edge_letters[{hi, lo}];
      if (wits.empty() || wits.back() != letter.id) wits.push_back(letter.id);
    }
  }

  // Tarjan, iterative to stay safe on long chains.
  std::vector<int> index(static_cast<std::size_t>(n), -1);
  std::vector<int> lowlink(static_cast<std::size_t>(n), 0);
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  std::vector<int> stack;
  std::vector<std::vector<int>> components;
  int next_index = 0;

  struct Frame {
    int node;
    std::set<int>::const_iterator it;
  };
  for (int start = 0; start < n; ++start) {
    if (index[static_cast<std::size_t>(start)] != -1) continue;
    std::vector<Frame> frames;
    index[static_cast<std::size_t>(start)] = lowlink[static_cast<std::size_t>(start)] = next_index++;
    stack.push_back(start);
    on_stack[static_cast<std::size_t>(start)] = true;
    frames.push_back({start, adj[static_cast<std::size_t>(start)].begin()});
    while (!frames.empty()) {
      Frame& frame = frames.back();
      const auto u = static_cast<std::size_t>(frame.node);
      if (frame.it != adj[u].end()) {
        const int w = *frame.it;
        ++frame.it;
        const auto wu = static_cast<std::size_t>(w);
        if (index[wu] == -1) {
          index[wu] = lowlink[wu] = next_index++;
          stack.push_back(w);
          on_stack[wu] = true;
          frames.push_back({w, adj[wu].begin()});
        } else if (on_stack[wu]) {
          lowlink[u] = std::min(lowlink[u], index[wu]);
        }
        continue;
      }
      if (lowlink[u] == index[u]) {
        std::vector<int> component;
        for (;;) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = false;
          component.push_back(w);
          if (w == frame.node) break;
        }
        components.push_back(std::move(component));
      }
      const int finished = frame.node;
      frames.pop_back();
      if (!frames.empty()) {
        const auto parent = static_cast<std::size_t>(frames.back().node);
        lowlink[parent] = std::min(lowlink[parent], lowlink[static_cast<std::size_t>(finished)]);
      }
    }
  }

  CycleReport report;
  for (const auto& component : components) {
    if (component.size() < 2) continue;
    NameCycle cycle;
    std::set<int> members(component.begin(), component.end());
    for (int v : members) cycle.names.push_back(vocab.token(v));
    std::sort(cycle.names.begin(), cycle.names.end());
    std::set<std::string> wits;
    for (const auto& [edge, letters] : edge_letters) {
      if (members.count(edge.first) != 0 && members.count(edge.second) != 0) {
        wits.insert(letters.begin(), letters.end());
      }
    }
    cycle.witnesses.assign(wits.begin(), wits.end());
    report.cycles.push_back(std::move(cycle));
  }
  std::sort(report.cycles.begin(), report.cycles.end(),
            [](const NameCycle& a, const NameCycle& b) { return a.names < b.names; });
  return report;
}

// ---------------------------------------------------------------------------
// Label file io: line-delimited {"mention": key, "label": value}.

inline LabelSet parse_labels(std::istream& in) {
  LabelSet labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    try {
      nlohmann::json rec = nlohmann::json::parse(line);
      const std::string key = rec.at("mention").get<std::string>();
      std::string label;
      const auto& raw = rec.at("label");
      if (raw.is_string()) {
        label = raw.get<std::string>();
      } else if (raw.is_number_integer()) {
        label = std::to_string(raw.get<std::int64_t>());
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": label must be string or integer");
      }
      if (!labels.emplace(key, std::move(label)).second) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate mention key '" + key +
                         "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

inline LabelSet load_labels(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return parse_labels(in);
}

inline void write_labels(std::ostream& out, const LabelSet& labels) {
  for (const auto& [key, label] : labels) {
    nlohmann::ordered_json rec;
    rec["mention"] = key;
    rec["label"] = label;
    out << rec.dump() << '\n';
  }
}

}  // namespace karum
