// Command-line surface for the karum inference engine: corpus ingestion,
// cycle diagnostics, MCEM runs, synthetic-data simulation, evaluation, and
// posterior rank histograms.
//
// Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
// Diagnostics go to stderr; data goes to files or stdout.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "karum/corpus.hpp"
#include "karum/evaluate.hpp"
#include "karum/io.hpp"
#include "karum/mcem.hpp"
#include "karum/model.hpp"
#include "karum/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using namespace karum;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) {
    std::cerr << "warning: " << w << "\n";
  }
}

// ---------------------------------------------------------------------------
// run

struct RunOptions {
  std::string letters;
  std::string out;
  Hyperparameters hyper;
  std::string init = "name-identity";
  int top_m = 20;
  bool resume = false;
};

ordered_json run_config_to_json(const RunOptions& opt) {
  ordered_json j;
  j["letters"] = opt.letters;
  j["init"] = opt.init;
  j["top_m"] = opt.top_m;
  j["alpha"] = opt.hyper.alpha;
  j["gamma"] = opt.hyper.gamma;
  j["mu"] = opt.hyper.mu;
  j["sigma2"] = opt.hyper.sigma2;
  j["entities"] = opt.hyper.num_entities;
  j["em_iters"] = opt.hyper.num_em_iters;
  j["sweeps"] = opt.hyper.num_sweeps;
  j["burn_in"] = opt.hyper.burn_in;
  j["thin"] = opt.hyper.thin;
  j["seed"] = opt.hyper.seed;
  return j;
}

void apply_run_config_json(const json& j, const fs::path& source, RunOptions& opt,
                           const std::set<std::string>& skip) {
  const std::set<std::string> known = {"letters", "init",    "top_m", "alpha",
                                       "gamma",   "mu",      "sigma2", "entities",
                                       "em_iters", "sweeps", "burn_in", "thin",
                                       "seed"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (known.count(key) == 0) {
        throw ConfigError("unknown key '" + key + "' in config file " + source.string());
      }
      if (skip.count(key) != 0) continue;
      if (key == "letters") opt.letters = value.get<std::string>();
      else if (key == "init") opt.init = value.get<std::string>();
      else if (key == "top_m") opt.top_m = value.get<int>();
      else if (key == "alpha") opt.hyper.alpha = value.get<double>();
      else if (key == "gamma") opt.hyper.gamma = value.get<double>();
      else if (key == "mu") opt.hyper.mu = value.get<double>();
      else if (key == "sigma2") opt.hyper.sigma2 = value.get<double>();
      else if (key == "entities") opt.hyper.num_entities = value.get<int>();
      else if (key == "em_iters") opt.hyper.num_em_iters = value.get<int>();
      else if (key == "sweeps") opt.hyper.num_sweeps = value.get<int>();
      else if (key == "burn_in") opt.hyper.burn_in = value.get<int>();
      else if (key == "thin") opt.hyper.thin = value.get<std::int64_t>() < 0
                                  ? throw ConfigError("thin must be positive")
                                  : value.get<int>();
      else if (key == "seed") opt.hyper.seed = value.get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad value in config file " + source.string() + ": " + e.what());
  }
}

json load_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("malformed json in " + path.string() + ": " + e.what());
  }
}

int cmd_run(const RunOptions& options) {
  RunOptions opt = options;
  const fs::path out_dir = opt.out;
  const fs::path checkpoint_path = out_dir / "checkpoint.json";
  const fs::path config_path = out_dir / "config.json";

  std::optional<Checkpoint> checkpoint;
  if (opt.resume) {
    if (!fs::exists(config_path) || !fs::exists(checkpoint_path)) {
      throw ConfigError("--resume needs an existing run directory with config.json and "
                        "checkpoint.json");
    }
    apply_run_config_json(load_json_file(config_path), config_path, opt, {});
    checkpoint = load_checkpoint(checkpoint_path);
  }

  if (opt.letters.empty()) throw ConfigError("missing --letters input");
  opt.hyper.validate();
  const InitMode init_mode = parse_init_mode(opt.init);
  if (opt.top_m < 1) throw ConfigError("--top-m must be >= 1");

  const std::string started = now_iso8601();
  const auto t0 = std::chrono::steady_clock::now();

  const CorpusIndex corpus(load_corpus(opt.letters));
  print_warnings(corpus.warnings());
  std::cerr << "corpus: " << corpus.letters().size() << " letters, " << corpus.num_mentions()
            << " mentions, " << corpus.vocab().size() << " names, " << corpus.pairs().size()
            << " pairs\n";

  fs::create_directories(out_dir);
  {
    std::ofstream out = open_output(config_path);
    out << run_config_to_json(opt).dump(2) << '\n';
  }

  McemRunner runner = checkpoint ? McemRunner(corpus, opt.hyper, *checkpoint)
                                 : McemRunner(corpus, opt.hyper, init_mode);
  while (!runner.done()) {
    runner.step();
    save_checkpoint(checkpoint_path, runner.make_checkpoint());
    std::cerr << "em iteration " << runner.iteration() << "/" << opt.hyper.num_em_iters
              << " objective=" << fmt_double(runner.trace().back()) << "\n";
  }
  if (!fs::exists(checkpoint_path)) {
    save_checkpoint(checkpoint_path, runner.make_checkpoint());
  }

  const RunResult result = runner.finalize(opt.top_m);
  {
    std::ofstream out = open_output(out_dir / "ranking.csv");
    write_ranking_csv(out, result);
  }
  {
    std::ofstream out = open_output(out_dir / "posteriors.json");
    write_posteriors_json(out, result, corpus);
  }
  {
    std::ofstream out = open_output(out_dir / "trace.csv");
    write_trace_csv(out, result);
  }
  {
    std::ofstream out = open_output(out_dir / "mentions.csv");
    write_mentions_csv(out, corpus);
  }
  {
    const auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    ordered_json meta;
    meta["started"] = started;
    meta["finished"] = now_iso8601();
    meta["duration_seconds"] = seconds.count();
    std::ofstream out = open_output(out_dir / "metadata.json");
    out << meta.dump(2) << '\n';
  }
  std::cerr << "run complete: " << out_dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ingest

int cmd_ingest(const std::string& letters_path, const std::string& out_path) {
  const std::vector<Letter> corpus = load_corpus(letters_path);
  std::vector<std::string> warnings;
  for (const Letter& letter : corpus) extract_pairs(letter, &warnings);
  print_warnings(warnings);

  const CorpusStats stats = corpus_stats(corpus);
  std::ostringstream stats_line;
  stats_line << "letters=" << stats.letters << " mentions=" << stats.mentions
             << " distinct_names=" << stats.distinct_names << " pairs=" << stats.pairs << "\n";
  if (out_path.empty()) {
    write_pairs_csv(std::cout, corpus);
    std::cerr << stats_line.str();
  } else {
    std::ofstream out = open_output(out_path);
    write_pairs_csv(out, corpus);
    std::cout << stats_line.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  GenConfig config;
  std::string out_corpus;
  std::string out_truth;
  std::string mode = "letters";
  double rank_gap = 0.0;
  bool rank_gap_set = false;
};

int cmd_simulate(SimulateOptions& opt) {
  if (opt.mode == "letters") opt.config.mode = GenConfig::Mode::Letters;
  else if (opt.mode == "pairs-only") opt.config.mode = GenConfig::Mode::PairsOnly;
  else throw ConfigError("unknown mode '" + opt.mode + "' (expected letters or pairs-only)");
  if (opt.rank_gap_set) opt.config.rank_gap = opt.rank_gap;
  opt.config.validate();

  RngStream rng(opt.config.hyper.seed);
  const auto [letters, truth] = generate(opt.config, rng);
  save_corpus(opt.out_corpus, letters);
  const CorpusIndex corpus(letters);
  save_truth(opt.out_truth, truth, corpus);

  std::cerr << "generated letters=" << letters.size() << " mentions=" << corpus.num_mentions()
            << " names=" << corpus.vocab().size() << " pairs=" << corpus.pairs().size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

// Reads the per-mention record section of a truth file as labels.
LabelSet truth_labels(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("truth file is empty (missing header)");
  LabelSet labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      labels[rec.at("mention").get<std::string>()] =
          std::to_string(rec.at("entity").get<std::int64_t>());
    } catch (const json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

RankVector truth_beta(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("truth file is empty (missing header)");
  try {
    return json::parse(line).at("beta").get<RankVector>();
  } catch (const json::exception& e) {
    throw ParseError("malformed truth header in " + path.string() + ": " + e.what());
  }
}

// Posterior-mode entity per mention, from a run directory's posteriors file.
LabelSet posterior_mode_labels(const fs::path& run_dir) {
  const json posteriors = load_json_file(run_dir / "posteriors.json");
  LabelSet labels;
  for (const auto& [letter_id, mentions] : posteriors.items()) {
    for (const auto& [mention_key, entries] : mentions.items()) {
      if (entries.empty()) continue;
      // entries are sorted by probability descending, entity id as tiebreak
      labels[letter_id + "#" + mention_key] =
          std::to_string(entries.at(0).at("entity").get<std::int64_t>());
    }
  }
  if (labels.empty()) {
    throw ConfigError("no posteriors found in " + (run_dir / "posteriors.json").string());
  }
  return labels;
}

// entity id -> beta from a run directory's ranking file.
std::map<std::int64_t, double> ranking_beta(const fs::path& run_dir) {
  std::ifstream in = open_input(run_dir / "ranking.csv");
  std::map<std::int64_t, double> beta;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv_split(line);
    if (fields.size() < 3) throw ParseError("malformed ranking.csv row: " + line);
    beta[std::stoll(fields[0])] = std::stod(fields[1]);
  }
  return beta;
}

struct EvaluateOptions {
  std::string pred;
  std::string gold;
  std::string truth;
  std::string run_dir;
  bool raw = false;
  int min_mentions = 5;
};

int cmd_evaluate(const EvaluateOptions& opt) {
  if (opt.pred.empty() == opt.run_dir.empty()) {
    throw ConfigError("provide exactly one of --pred or --run-dir");
  }
  if (opt.gold.empty() == opt.truth.empty()) {
    throw ConfigError("provide exactly one of --gold or --truth");
  }

  const LabelSet pred =
      !opt.pred.empty() ? load_labels(opt.pred) : posterior_mode_labels(opt.run_dir);
  const LabelSet gold = !opt.gold.empty() ? load_labels(opt.gold) : truth_labels(opt.truth);

  ordered_json report;
  if (opt.raw) {
    report["agreement"] = agreement(pred, gold);
    report["kappa"] = cohens_kappa(pred, gold);
  } else {
    const MatchResult match = entity_matching(pred, gold);
    if (match.pred_to_gold.empty()) {
      throw ConfigError("label sets share no mention keys");
    }
    const LabelSet mapped = apply_matching(pred, match.pred_to_gold);
    report["matched_accuracy"] = match.accuracy;
    report["agreement"] = agreement(mapped, gold);
    report["kappa"] = cohens_kappa(mapped, gold);

    // Rank recovery: true beta vs estimated beta over matched entities with
    // enough gold mentions.
    if (!opt.truth.empty() && !opt.run_dir.empty()) {
      const RankVector beta_true = truth_beta(opt.truth);
      const std::map<std::int64_t, double> beta_est = ranking_beta(opt.run_dir);
      std::map<std::string, std::int64_t> gold_sizes;
      for (const auto& [key, label] : gold) ++gold_sizes[label];
      std::vector<double> truth_scores;
      std::vector<double> est_scores;
      for (const auto& [pred_label, gold_label] : match.pred_to_gold) {
        if (gold_sizes[gold_label] < opt.min_mentions) continue;
        const auto gold_entity = static_cast<std::size_t>(std::stoll(gold_label));
        const auto pred_entity = std::stoll(pred_label);
        if (gold_entity >= beta_true.size() || beta_est.count(pred_entity) == 0) continue;
        truth_scores.push_back(beta_true[gold_entity]);
        est_scores.push_back(beta_est.at(pred_entity));
      }
      report["kendall_tau"] = kendall_tau(truth_scores, est_scores);
      report["kendall_tau_entities"] = truth_scores.size();
    }
  }
  report["common_mentions"] = [&] {
    std::int64_t common = 0;
    for (const auto& [key, label] : pred) common += gold.count(key) != 0 ? 1 : 0;
    return common;
  }();

  for (const auto& [key, value] : report.items()) {
    std::cout << key << "=" << (value.is_number_float() ? fmt_double(value.get<double>())
                                                        : value.dump())
              << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose

int cmd_diagnose(const std::string& letters_path, const std::string& out_path) {
  const std::vector<Letter> corpus = load_corpus(letters_path);
  const CycleReport report = cycle_diagnostics(corpus);

  std::ostringstream text;
  if (report.cycles.empty()) {
    text << "no cycles\n";
  } else {
    text << "cycles: " << report.cycles.size() << "\n";
    for (std::size_t i = 0; i < report.cycles.size(); ++i) {
      const NameCycle& cycle = report.cycles[i];
      text << "cycle " << (i + 1) << " (" << cycle.names.size() << " names):";
      for (const std::string& name : cycle.names) text << ' ' << name;
      text << "\n  letters:";
      for (const std::string& id : cycle.witnesses) text << ' ' << id;
      text << "\n";
    }
  }
  if (out_path.empty()) {
    std::cout << text.str();
  } else {
    std::ofstream out = open_output(out_path);
    out << text.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// histogram

struct HistogramOptions {
  std::string run_dir;
  std::string name;
  std::string letter;
  int bin_width = 1;
  std::string out;
};

int cmd_histogram(const HistogramOptions& opt) {
  if (opt.bin_width < 1) throw ConfigError("--bin-width must be >= 1");
  const fs::path run_dir = opt.run_dir;

  // entity -> rank
  std::map<std::int64_t, std::int64_t> rank;
  {
    std::ifstream in = open_input(run_dir / "ranking.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = csv_split(line);
      if (fields.size() < 3) throw ParseError("malformed ranking.csv row: " + line);
      rank[std::stoll(fields[0])] = std::stoll(fields[2]);
    }
  }

  // (letter, mention key) -> name
  std::map<std::pair<std::string, std::string>, std::string> mention_names;
  {
    std::ifstream in = open_input(run_dir / "mentions.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = csv_split(line);
      if (fields.size() != 4) throw ParseError("malformed mentions.csv row: " + line);
      const std::string key = (fields[1] == "sender" ? "s" : "r") + fields[2];
      mention_names[{fields[0], key}] = fields[3];
    }
  }

  const json posteriors = load_json_file(run_dir / "posteriors.json");
  if (!opt.letter.empty() && !posteriors.contains(opt.letter)) {
    throw NotFoundError("letter '" + opt.letter + "' not found in this run");
  }

  std::map<std::int64_t, double> mass;  // bin -> mass
  bool name_known = false;
  bool any = false;
  for (const auto& [letter_id, mentions] : posteriors.items()) {
    for (const auto& [mention_key, entries] : mentions.items()) {
      auto it = mention_names.find({letter_id, mention_key});
      if (it == mention_names.end() || it->second != opt.name) continue;
      name_known = true;
      if (!opt.letter.empty() && letter_id != opt.letter) continue;
      any = true;
      for (const auto& entry : entries) {
        const auto entity = entry.at("entity").get<std::int64_t>();
        auto rit = rank.find(entity);
        if (rit == rank.end()) throw ParseError("entity in posteriors missing from ranking.csv");
        mass[(rit->second - 1) / opt.bin_width] += entry.at("p").get<double>();
      }
    }
  }
  if (!name_known) throw NotFoundError("name '" + opt.name + "' does not occur in this run");
  if (!any) {
    throw NotFoundError("name '" + opt.name + "' does not occur in letter '" + opt.letter + "'");
  }

  std::ostringstream csv;
  csv << "rank_bin,mass\n";
  for (const auto& [bin, m] : mass) {
    csv << (bin * opt.bin_width + 1) << ',' << fmt_double(m) << '\n';
  }
  if (opt.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out = open_output(opt.out);
    out << csv.str();
  }
  return kExitOk;
}

int classify_exception(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) != nullptr ||
      dynamic_cast<const ValidationError*>(&e) != nullptr ||
      dynamic_cast<const ConfigError*>(&e) != nullptr ||
      dynamic_cast<const NotFoundError*>(&e) != nullptr) {
    return kExitUsage;
  }
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint entity resolution and social-rank inference from letter headers"};
  app.require_subcommand(1);
  app.fallthrough();

  // ingest -------------------------------------------------------------
  std::string ingest_letters;
  std::string ingest_out;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "validate a letters file, print corpus stats, export extracted pairs as CSV");
  ingest->add_option("letters", ingest_letters, "letters file (json lines)")->required();
  ingest->add_option("--out", ingest_out, "pairs CSV path (default: stdout)");

  // run ----------------------------------------------------------------
  RunOptions run_opt;
  std::string run_config_file;
  CLI::App* run = app.add_subcommand("run", "run MCEM inference into an output directory");
  run->add_option("--letters", run_opt.letters, "letters file (json lines)");
  run->add_option("--out", run_opt.out, "output directory")->required();
  run->add_option("--config", run_config_file, "json config file (flags take precedence)");
  run->add_option("--alpha", run_opt.hyper.alpha, "entity Dirichlet concentration");
  run->add_option("--gamma", run_opt.hyper.gamma, "name Dirichlet concentration");
  run->add_option("--mu", run_opt.hyper.mu, "rank prior mean");
  run->add_option("--sigma2", run_opt.hyper.sigma2, "rank prior variance");
  run->add_option("--entities", run_opt.hyper.num_entities, "number of latent entities");
  run->add_option("--em-iters", run_opt.hyper.num_em_iters, "EM iterations");
  run->add_option("--sweeps", run_opt.hyper.num_sweeps, "Gibbs sweeps per E-step");
  run->add_option("--burn-in", run_opt.hyper.burn_in, "sweeps discarded per E-step");
  run->add_option("--thin", run_opt.hyper.thin, "retain every thin-th sweep");
  run->add_option("--seed", run_opt.hyper.seed, "rng seed");
  run->add_option("--init", run_opt.init, "init mode: name-identity or random");
  run->add_option("--top-m", run_opt.top_m, "posterior entries kept per mention");
  run->add_flag("--resume", run_opt.resume, "continue from the checkpoint in --out");

  // simulate -----------------------------------------------------------
  SimulateOptions sim_opt;
  CLI::App* simulate =
      app.add_subcommand("simulate", "forward-sample a synthetic corpus with ground truth");
  simulate->add_option("--out-corpus", sim_opt.out_corpus, "letters output path")->required();
  simulate->add_option("--out-truth", sim_opt.out_truth, "ground-truth output path")->required();
  simulate->add_option("--letters", sim_opt.config.num_letters, "number of letters");
  simulate->add_option("--entities", sim_opt.config.hyper.num_entities, "number of entities");
  simulate->add_option("--names", sim_opt.config.num_names, "number of name tokens");
  simulate->add_option("--participants-min", sim_opt.config.min_participants,
                       "min participants per letter");
  simulate->add_option("--participants-max", sim_opt.config.max_participants,
                       "max participants per letter");
  simulate->add_option("--homonym-rate", sim_opt.config.homonym_rate,
                       "fraction of entities sharing a name");
  simulate->add_option("--mode", sim_opt.mode, "letters or pairs-only");
  simulate->add_option("--rank-gap", sim_opt.rank_gap,
                       "fixed descending rank-value spacing instead of Normal draws");
  simulate->add_option("--alpha", sim_opt.config.hyper.alpha, "entity Dirichlet concentration");
  simulate->add_option("--gamma", sim_opt.config.hyper.gamma, "name Dirichlet concentration");
  simulate->add_option("--mu", sim_opt.config.hyper.mu, "rank prior mean");
  simulate->add_option("--sigma2", sim_opt.config.hyper.sigma2, "rank prior variance");
  simulate->add_option("--seed", sim_opt.config.hyper.seed, "rng seed");

  // evaluate -----------------------------------------------------------
  EvaluateOptions eval_opt;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score predicted labels or a run directory against gold labels or truth");
  evaluate->add_option("--pred", eval_opt.pred, "predicted labels (json lines)");
  evaluate->add_option("--run-dir", eval_opt.run_dir,
                       "run directory; posterior-mode entities become predictions");
  evaluate->add_option("--gold", eval_opt.gold, "gold labels (json lines)");
  evaluate->add_option("--truth", eval_opt.truth, "simulation truth file");
  evaluate->add_flag("--raw", eval_opt.raw, "compare labels directly without entity matching");
  evaluate->add_option("--min-mentions", eval_opt.min_mentions,
                       "gold mentions required for rank-recovery entities");

  // diagnose -----------------------------------------------------------
  std::string diag_letters;
  std::string diag_out;
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "report name-level ordering cycles in a letters file");
  diagnose->add_option("letters", diag_letters, "letters file (json lines)")->required();
  diagnose->add_option("--out", diag_out, "report path (default: stdout)");

  // histogram ----------------------------------------------------------
  HistogramOptions hist_opt;
  CLI::App* histogram = app.add_subcommand(
      "histogram", "posterior rank histogram for a name, from a finished run directory");
  histogram->add_option("run_dir", hist_opt.run_dir, "run directory")->required();
  histogram->add_option("--name", hist_opt.name, "name token")->required();
  histogram->add_option("--letter", hist_opt.letter, "restrict to one letter id");
  histogram->add_option("--bin-width", hist_opt.bin_width, "ranks per histogram bin");
  histogram->add_option("--out", hist_opt.out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(ingest_letters, ingest_out);
    if (run->parsed()) {
      if (run_opt.resume) {
        for (const char* flag : {"--letters", "--config", "--alpha", "--gamma", "--mu",
                                 "--sigma2", "--entities", "--em-iters", "--sweeps", "--burn-in",
                                 "--thin", "--seed", "--init", "--top-m"}) {
          if (run->count(flag) > 0) {
            throw ConfigError(std::string("--resume uses the stored config; remove ") + flag);
          }
        }
      } else if (!run_config_file.empty()) {
        // flags > config file > defaults
        std::set<std::string> overridden;
        const std::map<std::string, std::string> flag_of = {
            {"letters", "--letters"}, {"init", "--init"},         {"top_m", "--top-m"},
            {"alpha", "--alpha"},     {"gamma", "--gamma"},       {"mu", "--mu"},
            {"sigma2", "--sigma2"},   {"entities", "--entities"}, {"em_iters", "--em-iters"},
            {"sweeps", "--sweeps"},   {"burn_in", "--burn-in"},   {"thin", "--thin"},
            {"seed", "--seed"}};
        for (const auto& [key, flag] : flag_of) {
          if (run->count(flag) > 0) overridden.insert(key);
        }
        apply_run_config_json(load_json_file(run_config_file), run_config_file, run_opt,
                              overridden);
      }
      return cmd_run(run_opt);
    }
    if (simulate->parsed()) {
      sim_opt.rank_gap_set = simulate->count("--rank-gap") > 0;
      return cmd_simulate(sim_opt);
    }
    if (evaluate->parsed()) return cmd_evaluate(eval_opt);
    if (diagnose->parsed()) return cmd_diagnose(diag_letters, diag_out);
    if (histogram->parsed()) return cmd_histogram(hist_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_exception(e);
  }
  return kExitUsage;
}
