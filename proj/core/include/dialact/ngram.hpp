#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dialact/corpus.hpp"

namespace dialact {

/// A model symbol: an act (optionally paired with a speaker-change bit), the
/// END marker, or the BEGIN marker. BEGIN only ever appears in contexts and is
/// never predicted.
using Token = std::uint32_t;

/// Maps between acts and model tokens.
///
/// Layout for an inventory of K acts: without speaker conditioning acts are
/// tokens [0, K); with it, (no-change, act) is `act` and (change, act) is
/// `K + act`. END and BEGIN follow the act tokens.
class TokenCodec {
 public:
  TokenCodec() = default;
  TokenCodec(std::size_t act_count, bool speaker_conditioned);

  std::size_t act_count() const noexcept { return act_count_; }
  bool speaker_conditioned() const noexcept { return conditioned_; }

  /// Number of act tokens (K or 2K).
  std::size_t act_tokens() const noexcept { return conditioned_ ? 2 * act_count_ : act_count_; }
  /// Number of predictable outcomes: act tokens plus END.
  std::size_t outcome_count() const noexcept { return act_tokens() + 1; }
  /// Number of tokens that may appear in a context: act tokens, END, BEGIN.
  std::size_t symbol_count() const noexcept { return act_tokens() + 2; }

  Token end() const noexcept { return static_cast<Token>(act_tokens()); }
  Token begin() const noexcept { return static_cast<Token>(act_tokens() + 1); }

  /// The change bit is ignored by unconditioned codecs.
  Token encode(ActId act, bool speaker_change = false) const noexcept;
  bool is_act(Token t) const noexcept { return t < act_tokens(); }
  ActId act(Token t) const noexcept;
  bool speaker_change(Token t) const noexcept { return conditioned_ && t >= act_count_ && is_act(t); }

  friend bool operator==(const TokenCodec&, const TokenCodec&) = default;

 private:
  std::size_t act_count_ = 0;
  bool conditioned_ = false;
};

/// The two most recent context tokens; BEGIN-padded at dialogue start.
struct History {
  Token older;
  Token newer;

  friend bool operator==(const History&, const History&) = default;
};

/// Unigram, bigram and trigram counts over predicted positions.
///
/// Every dialogue contributes the padded sequence BEGIN BEGIN s1 .. sn END;
/// each of s1 .. sn and END is a predicted position and increments one count
/// at every order. Context counts are the totals over a context's continuations.
class CountTable {
 public:
  CountTable() = default;
  explicit CountTable(TokenCodec codec);

  const TokenCodec& codec() const noexcept { return codec_; }

  /// Records one predicted position.
  void add(History history, Token target, std::uint64_t times = 1);

  std::uint64_t unigram(Token target) const;
  std::uint64_t bigram(Token prev, Token target) const;
  std::uint64_t trigram(Token older, Token prev, Token target) const;
  /// Number of predicted positions whose immediate predecessor is `prev`.
  std::uint64_t context(Token prev) const;
  std::uint64_t context(Token older, Token prev) const;
  /// Number of predicted positions (acts plus END transitions).
  std::uint64_t total() const noexcept { return total_; }

  struct Gram {
    std::array<Token, 3> tokens;  // unused leading slots are 0
    std::uint64_t count;
  };
  /// Non-zero n-grams of the given order (1..3), sorted by token tuple.
  std::vector<Gram> grams(int order) const;

  /// Rebuilds a table from per-order n-gram lists (the inverse of grams()).
  /// Context counts are derived from the bigram and trigram lists.
  static CountTable from_grams(TokenCodec codec, std::span<const Gram> unigrams,
                               std::span<const Gram> bigrams, std::span<const Gram> trigrams);

  /// Count consistency: every trigram count is bounded by the bigram count
  /// of its suffix and by its context count; every bigram count by the
  /// unigram count of its target.
  bool consistent() const;

  friend bool operator==(const CountTable& a, const CountTable& b);

 private:
  TokenCodec codec_;
  std::vector<std::uint64_t> unigrams_;   // indexed by outcome token
  std::vector<std::uint64_t> contexts1_;  // indexed by context token
  std::unordered_map<std::uint64_t, std::uint64_t> bigrams_;
  std::unordered_map<std::uint64_t, std::uint64_t> trigrams_;
  std::unordered_map<std::uint64_t, std::uint64_t> contexts2_;
  std::uint64_t total_ = 0;
};

/// Encodes a dialogue as model tokens (without boundary markers).
std::vector<Token> encode(const TokenCodec& codec, const Dialogue& dialogue);
std::vector<Token> encode(const TokenCodec& codec, std::span<const ActElement> elements);

/// Counts every dialogue of `train`. Throws ValidationError on an empty corpus.
CountTable train_counts(const Corpus& train, bool speaker_conditioned);

/// count(history, target) / count(history) for a history of 0..2 tokens
/// (oldest first); 0 when the history was never observed.
double relative_frequency(const CountTable& counts, Token target, std::span<const Token> history);

struct InterpolationWeights {
  double q1 = 1.0 / 3.0;  // unigram
  double q2 = 1.0 / 3.0;  // bigram
  double q3 = 1.0 / 3.0;  // trigram

  /// Throws ValidationError unless each weight is in [0, 1] and they sum to
  /// 1 within 1e-12.
  void validate() const;

  friend bool operator==(const InterpolationWeights&, const InterpolationWeights&) = default;
};

/// Deleted-interpolation trigram model over dialogue acts. Immutable.
class NGramModel {
 public:
  NGramModel() = default;
  /// Throws ValidationError if the weights are invalid or the counts were
  /// produced for a different inventory size.
  NGramModel(ActInventory inventory, CountTable counts, InterpolationWeights weights);

  const ActInventory& inventory() const noexcept { return inventory_; }
  const CountTable& counts() const noexcept { return counts_; }
  const InterpolationWeights& weights() const noexcept { return weights_; }
  const TokenCodec& codec() const noexcept { return counts_.codec(); }
  bool speaker_conditioned() const noexcept { return codec().speaker_conditioned(); }

  History start() const noexcept { return {codec().begin(), codec().begin()}; }
  History advance(History h, Token next) const noexcept { return {h.newer, next}; }
  Token token(ActId act, bool speaker_change = false) const noexcept {
    return codec().encode(act, speaker_change);
  }

  /// Unigram, bigram and trigram relative frequencies of `target` after `h`.
  /// An order whose context was never observed takes the value of the order
  /// below it, so each component is a proper distribution over outcomes.
  std::array<double, 3> components(Token target, History h) const;

  /// q1 f1 + q2 f2 + q3 f3 over the components above.
  double prob(Token target, History h) const;

  /// Bigram transition probability used to score repair bridges: the
  /// unigram/bigram part of the interpolation renormalized to q1 + q2, or the
  /// raw bigram relative frequency when `raw` is set.
  double bridge_prob(Token target, Token prev, bool raw = false) const;

  friend bool operator==(const NGramModel&, const NGramModel&) = default;

 private:
  ActInventory inventory_;
  CountTable counts_;
  InterpolationWeights weights_;
};

/// Probability of `act` (with the given speaker-change bit) after `h`.
/// Throws ValidationError if `act` is outside the inventory.
double smoothed_prob(const NGramModel& model, ActId act, History h, bool speaker_change = false);

/// Natural-log probability of the dialogue including its END transition.
/// -infinity when some factor is zero.
double sequence_log_prob(const NGramModel& model, const Dialogue& dialogue);

struct PerplexityResult {
  double value = 1.0;       // +infinity when some event had probability 0
  double log_prob = 0.0;    // summed over the corpus
  std::size_t events = 0;   // acts plus END transitions
  std::size_t zero_probability_events = 0;

  bool finite() const noexcept { return zero_probability_events == 0; }
};

/// exp(-log P(test) / events). Throws ValidationError on an empty corpus.
PerplexityResult perplexity(const NGramModel& model, const Corpus& test);

struct Prediction {
  ActId act;
  double probability;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// The k most probable next acts after `h`, descending, ties by ascending act
/// id; k is capped at the inventory size. For speaker-conditioned models acts
/// are scored as (next_speaker_change, act) tokens.
std::vector<Prediction> predict_top_k(const NGramModel& model, History h, std::size_t k,
                                      bool next_speaker_change = false);

/// 0-based position `act` would take in predict_top_k's full ordering.
std::size_t prediction_rank(const NGramModel& model, History h, ActId act,
                            bool next_speaker_change = false);

/// Builds the history reached after a sequence of tokens (oldest first).
History history_after(const NGramModel& model, std::span<const Token> tokens);

struct EmOptions {
  double tolerance = 1e-6;  // nats of total held-out log-likelihood
  std::size_t max_iterations = 100;
};

struct EmResult {
  InterpolationWeights weights;
  /// Held-out log-likelihood at the initial weights and after every update.
  std::vector<double> log_likelihood;
  std::size_t iterations = 0;
  std::size_t events = 0;          // held-out positions used
  std::size_t skipped_events = 0;  // positions with probability 0 under every order
};

/// Deleted interpolation: chooses q maximizing the held-out log-likelihood by
/// expectation-maximization, starting from (1/3, 1/3, 1/3).
/// Throws EstimationError when no held-out position has non-zero probability.
EmResult estimate_weights(const CountTable& counts, const Corpus& held_out, EmOptions options = {});

struct TrainOptions {
  bool speaker_conditioned = false;
  double held_out_fraction = 0.1;
  std::uint64_t seed = 20240601;
  /// Skip estimation and use these weights.
  std::optional<InterpolationWeights> weights;
  EmOptions em;
};

/// Counts on the (1 - fraction) part, estimates q on the held-out part, then
/// recounts on the whole corpus with the estimated q.
NGramModel train_model(const Corpus& train, const TrainOptions& options = {});

/// Versioned, diffable text format.
void save_model(std::ostream& out, const NGramModel& model);
void save_model(const std::filesystem::path& path, const NGramModel& model);
NGramModel parse_model(std::string_view text, const std::string& source = "<model>");
NGramModel load_model(const std::filesystem::path& path);

/// Token spelling used by the model file: NAME, ~NAME (speaker changed),
/// <END>, <BEGIN>.
std::string token_name(const NGramModel& model, Token token);

}  // namespace dialact
