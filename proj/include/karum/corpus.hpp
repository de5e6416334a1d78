#pragma once

// Letter corpus: parsing and validation of epistolary-formula records, and
// extraction of the pairwise partial social orderings they encode.
//
// Each letter header lists senders and recipients in socially meaningful
// order. Two rules turn a header into order observations:
//   (a) within a block, an earlier name is socially >= every later name;
//   (b) the first-mentioned individual (first name of the block written
//       first) is socially >= every other name in the letter.
// The union is deduplicated per letter.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "karum/errors.hpp"
#include "karum/io.hpp"
#include "karum/unicode.hpp"

namespace karum {

enum class Role : std::uint8_t { Sender, Recipient };
enum class FirstBlock : std::uint8_t { Senders, Recipients };

inline char role_char(Role r) { return r == Role::Sender ? 's' : 'r'; }
inline const char* role_name(Role r) { return r == Role::Sender ? "sender" : "recipient"; }

struct Letter {
  std::string id;
  std::vector<std::string> senders;
  std::vector<std::string> recipients;
  FirstBlock first_block = FirstBlock::Senders;

  Role first_role() const {
    return first_block == FirstBlock::Senders ? Role::Sender : Role::Recipient;
  }

  const std::vector<std::string>& block(Role r) const {
    return r == Role::Sender ? senders : recipients;
  }

  std::size_t mention_count() const { return senders.size() + recipients.size(); }

  const std::string& token(Role role, std::size_t pos) const { return block(role)[pos]; }

  bool operator==(const Letter&) const = default;

  // Invariants: at least one block non-empty; the block named by first_block
  // non-empty; every token non-empty. Tokens are assumed already normalized.
  void validate() const {
    if (senders.empty() && recipients.empty()) {
      throw ValidationError("letter '" + id + "': both blocks empty");
    }
    if (block(first_role()).empty()) {
      throw ValidationError("letter '" + id + "': first_block names an empty block");
    }
    for (Role role : {Role::Sender, Role::Recipient}) {
      for (const std::string& tok : block(role)) {
        if (tok.empty()) {
          throw ValidationError("letter '" + id + "': empty name token");
        }
      }
    }
  }
};

// A mention within one letter, identified by (role, position).
struct MentionRef {
  Role role = Role::Sender;
  std::int32_t pos = 0;
  auto operator<=>(const MentionRef&) const = default;
};

struct NameMention {
  std::string letter_id;
  Role role = Role::Sender;
  std::int32_t pos = 0;
  std::string name;
};

// One "higher is socially >= lower" observation between two mentions of the
// same letter.
struct PairwiseOrder {
  std::string letter_id;
  MentionRef higher;
  MentionRef lower;
};

// Globally unique key for a mention, e.g. "TC1,33#s0".
inline std::string mention_key(const std::string& letter_id, Role role, std::int32_t pos) {
  return letter_id + "#" + role_char(role) + std::to_string(pos);
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string normalize_or_throw(const std::string& raw, std::size_t line_no) {
  std::string tok = normalize_name_token(raw);
  if (tok.empty()) {
    throw ValidationError("line " + std::to_string(line_no) +
                          ": name token empty after normalization");
  }
  return tok;
}

inline Letter parse_letter_record(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!j.is_object()) {
    throw ParseError("line " + std::to_string(line_no) + ": record is not an object");
  }
  auto require = [&](const char* field) -> const nlohmann::json& {
    auto it = j.find(field);
    if (it == j.end()) {
      throw ParseError("line " + std::to_string(line_no) + ": missing field '" +
                       field + "'");
    }
    return *it;
  };
  const auto& id = require("id");
  if (!id.is_string()) {
    throw ParseError("line " + std::to_string(line_no) + ": field 'id' must be a string");
  }
  Letter letter;
  letter.id = id.get<std::string>();

  auto read_block = [&](const char* field, std::vector<std::string>& out) {
    const auto& arr = require(field);
    if (!arr.is_array()) {
      throw ParseError("line " + std::to_string(line_no) + ": field '" + field +
                       "' must be an array of strings");
    }
    for (const auto& item : arr) {
      if (!item.is_string()) {
        throw ParseError("line " + std::to_string(line_no) + ": field '" + field +
                         "' must be an array of strings");
      }
      out.push_back(normalize_or_throw(item.get<std::string>(), line_no));
    }
  };
  read_block("senders", letter.senders);
  read_block("recipients", letter.recipients);

  const auto& fb = require("first_block");
  if (!fb.is_string()) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": field 'first_block' must be \"senders\" or \"recipients\"");
  }
  const std::string fbs = fb.get<std::string>();
  if (fbs == "senders") {
    letter.first_block = FirstBlock::Senders;
  } else if (fbs == "recipients") {
    letter.first_block = FirstBlock::Recipients;
  } else {
    throw ParseError("line " + std::to_string(line_no) +
                     ": field 'first_block' must be \"senders\" or \"recipients\"");
  }

  try {
    letter.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return letter;
}

inline bool is_blank(const std::string& line) {
  for (char c : line) {
    if (!is_ascii_space(c)) return false;
  }
  return true;
}

}  // namespace detail

// Parses UTF-8 line-delimited letter records: one object per non-blank line
// with fields id, senders, recipients, first_block. Tokens come out
// NFC-normalized and stripped. Duplicate letter ids are rejected.
inline std::vector<Letter> parse_corpus(std::istream& in) {
  std::vector<Letter> corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;
    Letter letter = detail::parse_letter_record(line, line_no);
    if (!seen_ids.insert(letter.id).second) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate letter id '" +
                       letter.id + "'");
    }
    corpus.push_back(std::move(letter));
  }
  return corpus;
}

inline std::vector<Letter> load_corpus(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return parse_corpus(in);
}

inline nlohmann::ordered_json letter_to_json(const Letter& letter) {
  nlohmann::ordered_json j;
  j["id"] = letter.id;
  j["senders"] = letter.senders;
  j["recipients"] = letter.recipients;
  j["first_block"] = letter.first_block == FirstBlock::Senders ? "senders" : "recipients";
  return j;
}

inline void write_corpus(std::ostream& out, const std::vector<Letter>& corpus) {
  for (const Letter& letter : corpus) {
    out << letter_to_json(letter).dump() << '\n';
  }
}

inline void save_corpus(const std::filesystem::path& path, const std::vector<Letter>& corpus) {
  std::ofstream out = open_output(path);
  write_corpus(out, corpus);
}

// ---------------------------------------------------------------------------
// Pair extraction

// Applies rules (a) and (b) and returns the deduplicated union. Pairs
// between two mentions of the identical name within one block are skipped
// (an entity cannot outrank itself); a warning is recorded for each such
// duplicated name. The same name across blocks is kept: the two mentions may
// be different people.
inline std::vector<PairwiseOrder> extract_pairs(const Letter& letter,
                                                std::vector<std::string>* warnings = nullptr) {
  letter.validate();
  std::vector<PairwiseOrder> out;
  std::set<std::pair<MentionRef, MentionRef>> seen;

  auto emit = [&](MentionRef hi, MentionRef lo) {
    if (hi == lo) return;
    if (hi.role == lo.role && letter.token(hi.role, static_cast<std::size_t>(hi.pos)) ==
                                  letter.token(lo.role, static_cast<std::size_t>(lo.pos))) {
      return;  // same name twice in one block
    }
    if (!seen.insert({hi, lo}).second) return;
    out.push_back(PairwiseOrder{letter.id, hi, lo});
  };

  if (warnings != nullptr) {
    for (Role role : {Role::Sender, Role::Recipient}) {
      const auto& block = letter.block(role);
      std::set<std::string> block_seen;
      std::set<std::string> warned;
      for (const std::string& tok : block) {
        if (!block_seen.insert(tok).second && warned.insert(tok).second) {
          warnings->push_back("letter '" + letter.id + "': name '" + tok +
                              "' appears more than once in the " +
                              (role == Role::Sender ? std::string("senders") : std::string("recipients")) +
                              " block; pairs between its mentions are skipped");
        }
      }
    }
  }

  // Rule (b): the first-mentioned individual dominates every other mention.
  const MentionRef first{letter.first_role(), 0};
  for (Role role : {Role::Sender, Role::Recipient}) {
    const auto& block = letter.block(role);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(block.size()); ++i) {
      emit(first, MentionRef{role, i});
    }
  }
  // Rule (a): within each block, earlier >= later.
  for (Role role : {Role::Sender, Role::Recipient}) {
    const auto& block = letter.block(role);
    const auto n = static_cast<std::int32_t>(block.size());
    for (std::int32_t i = 0; i < n; ++i) {
      for (std::int32_t j = i + 1; j < n; ++j) {
        emit(MentionRef{role, i}, MentionRef{role, j});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

// Bijective map between name tokens and dense ids, in first-appearance order.
class Vocabulary {
 public:
  int add(const std::string& token) {
    auto [it, inserted] = ids_.try_emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  // Returns -1 when the token is unknown.
  int id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? -1 : it->second;
  }

  const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }

  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
};

inline Vocabulary build_vocabulary(const std::vector<Letter>& corpus) {
  Vocabulary vocab;
  for (const Letter& letter : corpus) {
    for (Role role : {Role::Sender, Role::Recipient}) {
      for (const std::string& tok : letter.block(role)) {
        vocab.add(tok);
      }
    }
  }
  return vocab;
}

struct CorpusStats {
  std::int64_t letters = 0;
  std::int64_t mentions = 0;
  std::int64_t distinct_names = 0;
  std::int64_t pairs = 0;

  bool operator==(const CorpusStats&) const = default;
};

inline CorpusStats corpus_stats(const std::vector<Letter>& corpus) {
  CorpusStats stats;
  stats.letters = static_cast<std::int64_t>(corpus.size());
  std::unordered_set<std::string> names;
  for (const Letter& letter : corpus) {
    stats.mentions += static_cast<std::int64_t>(letter.mention_count());
    for (Role role : {Role::Sender, Role::Recipient}) {
      for (const std::string& tok : letter.block(role)) names.insert(tok);
    }
    stats.pairs += static_cast<std::int64_t>(extract_pairs(letter).size());
  }
  stats.distinct_names = static_cast<std::int64_t>(names.size());
  return stats;
}

// CSV export of extracted pairs, one row per pair.
inline void write_pairs_csv(std::ostream& out, const std::vector<Letter>& corpus) {
  out << "letter_id,higher_name,higher_role,higher_pos,lower_name,lower_role,lower_pos\n";
  for (const Letter& letter : corpus) {
    for (const PairwiseOrder& p : extract_pairs(letter)) {
      out << csv_field(letter.id) << ','
          << csv_field(letter.token(p.higher.role, static_cast<std::size_t>(p.higher.pos)))
          << ',' << role_name(p.higher.role) << ',' << p.higher.pos << ','
          << csv_field(letter.token(p.lower.role, static_cast<std::size_t>(p.lower.pos)))
          << ',' << role_name(p.lower.role) << ',' << p.lower.pos << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Indexed corpus

// Flat engine view of a parsed corpus: mentions numbered in deterministic
// sweep order (letters in input order, senders before recipients, by
// position), extracted pairs as flat mention indices, and per-mention
// incidence lists. Built once; immutable afterwards, so snapshots and
// diagnostics can share it freely across threads.
struct IndexedMention {
  std::int32_t letter = 0;
  Role role = Role::Sender;
  std::int32_t pos = 0;
  std::int32_t name = 0;  // vocabulary id
};

struct IndexedPair {
  std::int32_t letter = 0;
  std::int32_t higher = 0;  // flat mention index
  std::int32_t lower = 0;
};

struct IncidentPair {
  std::int32_t other = 0;  // the other mention of the pair
  double sign = 1.0;       // +1 when this mention is the higher side
};

class CorpusIndex {
 public:
  explicit CorpusIndex(std::vector<Letter> letters) : letters_(std::move(letters)) {
    mention_base_.reserve(letters_.size() + 1);
    mention_base_.push_back(0);
    for (std::int32_t li = 0; li < static_cast<std::int32_t>(letters_.size()); ++li) {
      const Letter& letter = letters_[static_cast<std::size_t>(li)];
      letter.validate();
      letter_index_.emplace(letter.id, li);
      for (Role role : {Role::Sender, Role::Recipient}) {
        const auto& block = letter.block(role);
        for (std::int32_t pos = 0; pos < static_cast<std::int32_t>(block.size()); ++pos) {
          IndexedMention m;
          m.letter = li;
          m.role = role;
          m.pos = pos;
          m.name = vocab_.add(block[static_cast<std::size_t>(pos)]);
          mentions_.push_back(m);
        }
      }
      mention_base_.push_back(static_cast<std::int32_t>(mentions_.size()));
    }
    if (letter_index_.size() != letters_.size()) {
      throw ValidationError("duplicate letter ids in corpus");
    }

    incident_.resize(mentions_.size());
    for (std::int32_t li = 0; li < static_cast<std::int32_t>(letters_.size()); ++li) {
      const Letter& letter = letters_[static_cast<std::size_t>(li)];
      for (const PairwiseOrder& p : extract_pairs(letter, &warnings_)) {
        IndexedPair ip;
        ip.letter = li;
        ip.higher = flat_index(li, p.higher);
        ip.lower = flat_index(li, p.lower);
        const auto pair_id = static_cast<std::int32_t>(pairs_.size());
        pairs_.push_back(ip);
        incident_[static_cast<std::size_t>(ip.higher)].push_back({ip.lower, +1.0});
        incident_[static_cast<std::size_t>(ip.lower)].push_back({ip.higher, -1.0});
        (void)pair_id;
      }
    }
  }

  const std::vector<Letter>& letters() const { return letters_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<IndexedMention>& mentions() const { return mentions_; }
  const std::vector<IndexedPair>& pairs() const { return pairs_; }
  const std::vector<IncidentPair>& incident(std::int32_t mention) const {
    return incident_[static_cast<std::size_t>(mention)];
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::int32_t num_mentions() const { return static_cast<std::int32_t>(mentions_.size()); }

  std::int32_t flat_index(std::int32_t letter, MentionRef ref) const {
    const Letter& l = letters_[static_cast<std::size_t>(letter)];
    std::int32_t offset = ref.pos;
    if (ref.role == Role::Recipient) offset += static_cast<std::int32_t>(l.senders.size());
    return mention_base_[static_cast<std::size_t>(letter)] + offset;
  }

  std::optional<std::int32_t> find_letter(const std::string& id) const {
    auto it = letter_index_.find(id);
    if (it == letter_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::int32_t> find_mention(const std::string& letter_id, Role role,
                                           std::int32_t pos) const {
    auto li = find_letter(letter_id);
    if (!li) return std::nullopt;
    const Letter& l = letters_[static_cast<std::size_t>(*li)];
    if (pos < 0 || pos >= static_cast<std::int32_t>(l.block(role).size())) return std::nullopt;
    return flat_index(*li, MentionRef{role, pos});
  }

  // Resolves a key of the form "<letter_id>#<s|r><pos>".
  std::optional<std::int32_t> find_mention(const std::string& key) const {
    const auto hash = key.rfind('#');
    if (hash == std::string::npos || hash + 2 > key.size()) return std::nullopt;
    const char rc = key[hash + 1];
    if (rc != 's' && rc != 'r') return std::nullopt;
    std::int32_t pos = 0;
    const char* first = key.data() + hash + 2;
    const char* last = key.data() + key.size();
    auto [ptr, ec] = std::from_chars(first, last, pos);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return find_mention(key.substr(0, hash), rc == 's' ? Role::Sender : Role::Recipient, pos);
  }

  std::string key_of(std::int32_t mention) const {
    const IndexedMention& m = mentions_[static_cast<std::size_t>(mention)];
    return mention_key(letters_[static_cast<std::size_t>(m.letter)].id, m.role, m.pos);
  }

  const std::string& name_of(std::int32_t mention) const {
    return vocab_.token(mentions_[static_cast<std::size_t>(mention)].name);
  }

 private:
  std::vector<Letter> letters_;
  Vocabulary vocab_;
  std::vector<IndexedMention> mentions_;
  std::vector<std::int32_t> mention_base_;  // per letter, first flat mention index
  std::vector<IndexedPair> pairs_;
  std::vector<std::vector<IncidentPair>> incident_;
  std::unordered_map<std::string, std::int32_t> letter_index_;
  std::vector<std::string> warnings_;
};

}  // namespace karum
