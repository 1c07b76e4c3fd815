#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "dialact/error.hpp"
#include "dialact/evaluator.hpp"
#include "dialact/grammar.hpp"
#include "dialact/ngram.hpp"
#include "dialact/recognizer.hpp"
#include "dialact/synth.hpp"

namespace dialact::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

// Thrown for bad argument values detected after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ActInventory inventory_or_default(const std::string& path) {
  return path.empty() ? default_inventory() : load_inventory(path);
}

std::optional<InterpolationWeights> parse_weights(const std::string& text) {
  if (text.empty()) return std::nullopt;
  InterpolationWeights w;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> w.q1 >> c1 >> w.q2 >> c2 >> w.q3) || c1 != ',' || c2 != ',' || !(in >> std::ws).eof())
    throw UsageError("--weights expects q1,q2,q3");
  w.validate();
  return w;
}

// "INIT,B:SUGGEST,ACCEPT": an optional A:/B: prefix sets the speaker;
// unprefixed acts alternate speakers.
Dialogue parse_history(const std::string& text, const ActInventory& inventory) {
  Dialogue d;
  d.id = "history";
  Speaker next = Speaker::A;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    Speaker speaker = next;
    if (item.size() > 2 && item[1] == ':' && (item[0] == 'A' || item[0] == 'B')) {
      speaker = item[0] == 'A' ? Speaker::A : Speaker::B;
      item = item.substr(2);
    }
    d.utterances.push_back({speaker, {inventory.at(item)}, {}});
    next = speaker == Speaker::A ? Speaker::B : Speaker::A;
  }
  return d;
}

struct GrammarPaths {
  std::string grammar;
  std::string compat;
};

DialogueGrammar grammar_for(const GrammarPaths& paths, const ActInventory& inventory) {
  DialogueGrammar g = paths.grammar.empty() ? default_grammar(inventory)
                                            : load_grammar(paths.grammar, inventory);
  if (!paths.compat.empty()) return g.with_compatibility(load_compatibility(paths.compat, inventory));
  if (!paths.grammar.empty()) return g.with_compatibility(default_compatibility(inventory));
  return g;
}

void add_grammar_options(CLI::App* cmd, GrammarPaths& paths) {
  cmd->add_option("--grammar", paths.grammar, "Grammar file (default: built-in)")->check(CLI::ExistingFile);
  cmd->add_option("--compat", paths.compat, "Compatibility file (default: built-in)")
      ->check(CLI::ExistingFile);
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string inventory, corpus, out, weights;
  bool conditioned = false;
  double held_out = 0.1;
  std::uint64_t seed = kDefaultSeed;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const ActInventory inventory = inventory_or_default(a.inventory);
  const Corpus corpus = load_corpus(a.corpus, inventory);
  TrainOptions options;
  options.speaker_conditioned = a.conditioned;
  options.held_out_fraction = a.held_out;
  options.seed = a.seed;
  options.weights = parse_weights(a.weights);
  const NGramModel model = train_model(corpus, options);
  save_model(std::filesystem::path(a.out), model);

  const auto& w = model.weights();
  out << "dialogues\t" << corpus.size() << '\n'
      << "utterances\t" << corpus.utterance_count() << '\n'
      << "acts\t" << corpus.act_count() << '\n'
      << std::setprecision(6) << "q1\t" << w.q1 << '\n'
      << "q2\t" << w.q2 << '\n'
      << "q3\t" << w.q3 << '\n';
  return kOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string config, inventory, train, test, report, per_dialogue, weights;
  std::vector<std::size_t> ks{1, 2, 3};
  bool skip = false, conditioned = false;
  double held_out = 0.1;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 1;
};

ExperimentConfig config_from_json(const std::string& path) {
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
  try {
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return (base / p).lexically_normal(); };
    const ActInventory inventory =
        j.contains("inventory") ? load_inventory(resolve(j.at("inventory").get<std::string>()))
                                : default_inventory();
    ExperimentConfig c;
    c.train = load_corpus(resolve(j.at("train").get<std::string>()), inventory);
    c.test = load_corpus(resolve(j.at("test").get<std::string>()), inventory);
    c.ks = j.value("ks", std::vector<std::size_t>{1, 2, 3});
    c.held_out_fraction = j.value("held_out_fraction", 0.1);
    c.seed = j.value("seed", kDefaultSeed);
    c.threads = j.value("threads", 1u);
    if (j.contains("weights")) {
      const auto q = j.at("weights").get<std::vector<double>>();
      if (q.size() != 3) throw UsageError("config: weights needs three values");
      c.weights = InterpolationWeights{q[0], q[1], q[2]};
      c.weights->validate();
    }
    for (const auto& v : j.value("variants", nlohmann::json::array()))
      c.variants.push_back({v.at("label").get<std::string>(), v.value("skip_deviation_acts", false),
                            v.value("speaker_conditioned", false)});
    if (c.variants.empty()) c.variants.push_back({"all", false, false});
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  ExperimentConfig c;
  if (!a.config.empty()) {
    c = config_from_json(a.config);
  } else {
    if (a.train.empty() || a.test.empty()) throw UsageError("evaluate needs --config or --train and --test");
    const ActInventory inventory = inventory_or_default(a.inventory);
    c.train = load_corpus(a.train, inventory);
    c.test = load_corpus(a.test, inventory);
    c.ks = a.ks;
    c.held_out_fraction = a.held_out;
    c.seed = a.seed;
    c.threads = a.threads;
    c.weights = parse_weights(a.weights);
    std::string label = a.skip ? "skip-deviations" : "all";
    if (a.conditioned) label += "+speaker";
    c.variants.push_back({label, a.skip, a.conditioned});
  }
  for (std::size_t k : c.ks)
    if (k == 0) throw UsageError("k must be positive");

  const auto reports = run_experiment(c);
  out << format_table(reports);
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw ParseError(a.report, 0, "cannot open file for writing");
    write_report_tsv(f, reports);
  }
  if (!a.per_dialogue.empty()) {
    // Per-dialogue rates for the first variant at the smallest k.
    const ExperimentVariant& v = c.variants.front();
    TrainOptions options;
    options.speaker_conditioned = v.speaker_conditioned;
    options.held_out_fraction = c.held_out_fraction;
    options.seed = c.seed;
    options.weights = c.weights;
    const NGramModel model = train_model(c.train, options);
    std::ofstream f(a.per_dialogue);
    if (!f) throw ParseError(a.per_dialogue, 0, "cannot open file for writing");
    write_per_dialogue_tsv(
        f, per_dialogue_hit_rates(model, c.test, *std::min_element(c.ks.begin(), c.ks.end()),
                                  {v.skip_deviation_acts, c.threads}));
  }
  return kOk;
}

// --- predict / keywords -----------------------------------------------------

struct PredictArgs {
  std::string model, history, lexicon;
  std::size_t k = 3;
  std::size_t budget = 30;
  bool next_change = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  if (a.k == 0) throw UsageError("--k must be positive");
  const NGramModel model = load_model(a.model);
  const Dialogue history = parse_history(a.history, model.inventory());
  const auto tokens = encode(model.codec(), history);
  const auto predictions = predict_top_k(model, history_after(model, tokens), a.k, a.next_change);
  out << std::setprecision(6);
  for (std::size_t i = 0; i < predictions.size(); ++i)
    out << i + 1 << '\t' << model.inventory().name(predictions[i].act) << '\t'
        << predictions[i].probability << '\n';
  return kOk;
}

int cmd_keywords(const PredictArgs& a, const GrammarPaths& paths, bool speakers_known,
                 std::ostream& out) {
  if (a.k == 0) throw UsageError("--k must be positive");
  const NGramModel model = load_model(a.model);
  const ActInventory& inventory = model.inventory();
  const DialogueGrammar grammar = grammar_for(paths, inventory);
  const KeywordLexicon lexicon = a.lexicon.empty() ? default_lexicon(inventory) : load_lexicon(a.lexicon, inventory);

  RecognizerOptions options;
  options.context.speakers_known = speakers_known;
  Recognizer recognizer(grammar, model, options);
  for (const Utterance& u : parse_history(a.history, inventory).utterances) recognizer.step(u);

  out << std::setprecision(6);
  for (const auto& p : keywords_for_next(model, recognizer, lexicon, a.k, a.budget, a.next_change)) {
    out << inventory.name(p.act) << '\t' << p.probability << '\t';
    for (std::size_t i = 0; i < p.keywords.size(); ++i) out << (i ? "," : "") << p.keywords[i];
    out << '\n';
  }
  return kOk;
}

// --- track ------------------------------------------------------------------

struct TrackArgs {
  std::string model, corpus;
  bool speakers_known = false, raw = false, tree = false, events = false;
};

int cmd_track(const TrackArgs& a, const GrammarPaths& paths, std::ostream& out) {
  const NGramModel model = load_model(a.model);
  const ActInventory& inventory = model.inventory();
  const DialogueGrammar grammar = grammar_for(paths, inventory);
  const Corpus corpus = load_corpus(a.corpus, inventory);

  RecognizerOptions options;
  options.context.speakers_known = a.speakers_known;
  options.raw_frequency_bridging = a.raw;
  for (const Dialogue& d : corpus.dialogues()) {
    const RecognitionResult r = recognize(grammar, model, d, options);
    out << "== " << d.id << '\n';
    for (const auto& line : r.trace) out << line << '\n';
    if (a.events) {
      for (const auto& e : r.events) {
        out << "event\t" << repair_kind_name(e.kind) << '\t' << e.position << '\t' << inventory.name(e.act);
        if (e.reading)
          out << '\t' << (*e.attachment == Attachment::Previous ? "previous" : "current") << '\t'
              << inventory.name(*e.reading);
        out << '\n';
      }
    }
    if (a.tree) out << r.tree.format();
  }
  return kOk;
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string model, out;
  GenerateOptions options;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  if (!(a.options.deviation_rate >= 0.0 && a.options.deviation_rate < 1.0))
    throw UsageError("--rate must be in [0, 1)");
  const NGramModel model = load_model(a.model);
  const Corpus corpus = generate_corpus(model, a.options);
  std::ofstream f(a.out, std::ios::binary);
  if (!f) throw ParseError(a.out, 0, "cannot open file for writing");
  write_corpus(f, corpus);
  out << "dialogues\t" << corpus.size() << '\n' << "acts\t" << corpus.act_count() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue-act prediction, evaluation and plan-based tracking", "dialact"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train an interpolated trigram model");
  c_train->add_option("--inventory", train.inventory, "Act inventory (default: built-in)")->check(CLI::ExistingFile);
  c_train->add_option("--corpus", train.corpus, "Training corpus")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Model file to write")->required();
  c_train->add_flag("--speaker-conditioned", train.conditioned, "Condition on speaker changes");
  c_train->add_option("--held-out", train.held_out, "Held-out fraction for weight estimation")
      ->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--seed", train.seed, "Split seed");
  c_train->add_option("--weights", train.weights, "Fixed weights q1,q2,q3 (skips estimation)");

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Report top-k hit rates");
  c_eval->add_option("--config", eval.config, "JSON experiment config")->check(CLI::ExistingFile);
  c_eval->add_option("--inventory", eval.inventory, "Act inventory (default: built-in)")->check(CLI::ExistingFile);
  c_eval->add_option("--train", eval.train, "Training corpus")->check(CLI::ExistingFile);
  c_eval->add_option("--test", eval.test, "Test corpus")->check(CLI::ExistingFile);
  c_eval->add_option("--k", eval.ks, "Values of k")->delimiter(',');
  c_eval->add_flag("--skip-deviation-acts", eval.skip, "Do not score or condition on anytime acts");
  c_eval->add_flag("--speaker-conditioned", eval.conditioned, "Condition on speaker changes");
  c_eval->add_option("--held-out", eval.held_out, "Held-out fraction")->check(CLI::Range(0.0, 1.0));
  c_eval->add_option("--seed", eval.seed, "Split seed");
  c_eval->add_option("--weights", eval.weights, "Fixed weights q1,q2,q3");
  c_eval->add_option("--threads", eval.threads, "Worker threads")->check(CLI::Range(1u, 256u));
  c_eval->add_option("--report", eval.report, "Write the TSV report here");
  c_eval->add_option("--per-dialogue", eval.per_dialogue, "Write per-dialogue TSV here");

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Predict the next dialogue acts");
  c_predict->add_option("--model", predict.model, "Model file")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--history", predict.history, "Preceding acts, e.g. INIT,B:SUGGEST");
  c_predict->add_option("--k", predict.k, "Number of predictions");
  c_predict->add_flag("--next-speaker-change", predict.next_change, "The next act changes speaker");

  PredictArgs kw;
  GrammarPaths kw_paths;
  bool kw_known = false;
  auto* c_kw = app.add_subcommand("keywords", "Keywords for the predicted next acts");
  c_kw->add_option("--model", kw.model, "Model file")->required()->check(CLI::ExistingFile);
  c_kw->add_option("--lexicon", kw.lexicon, "Keyword lexicon (default: built-in)")->check(CLI::ExistingFile);
  c_kw->add_option("--history", kw.history, "Preceding acts, e.g. INIT,B:SUGGEST");
  c_kw->add_option("--k", kw.k, "Number of predicted acts");
  c_kw->add_option("--budget", kw.budget, "Cap on distinct keywords");
  c_kw->add_flag("--next-speaker-change", kw.next_change, "The next act changes speaker");
  c_kw->add_flag("--speakers-known", kw_known, "Participants know each other");
  add_grammar_options(c_kw, kw_paths);

  TrackArgs track;
  GrammarPaths track_paths;
  auto* c_track = app.add_subcommand("track", "Trace plan recognition and repair");
  c_track->add_option("--model", track.model, "Model file")->required()->check(CLI::ExistingFile);
  c_track->add_option("--corpus", track.corpus, "Dialogues to process")->required()->check(CLI::ExistingFile);
  c_track->add_flag("--speakers-known", track.speakers_known, "Participants know each other");
  c_track->add_flag("--raw-frequency", track.raw, "Score bridges with raw bigram frequencies");
  c_track->add_flag("--tree", track.tree, "Print the dialogue tree after each trace");
  c_track->add_flag("--events", track.events, "Print repair events after each trace");
  add_grammar_options(c_track, track_paths);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Sample a synthetic corpus from a model");
  c_gen->add_option("--model", gen.model, "Source model file")->required()->check(CLI::ExistingFile);
  c_gen->add_option("--out", gen.out, "Corpus file to write")->required();
  c_gen->add_option("--dialogues", gen.options.dialogues, "Number of dialogues");
  c_gen->add_option("--rate", gen.options.deviation_rate, "Anytime-act insertion rate");
  c_gen->add_option("--seed", gen.options.seed, "Sampling seed");
  c_gen->add_option("--max-length", gen.options.max_length, "Acts per dialogue cap");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*c_train) return cmd_train(train, out);
    if (*c_eval) return cmd_evaluate(eval, out);
    if (*c_predict) return cmd_predict(predict, out);
    if (*c_kw) return cmd_keywords(kw, kw_paths, kw_known, out);
    if (*c_track) return cmd_track(track, track_paths, out);
    if (*c_gen) return cmd_generate(gen, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace dialact::cli
