#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dialact/corpus.hpp"
#include "dialact/grammar.hpp"
#include "dialact/ngram.hpp"

namespace dialact {

struct BridgeCandidate {
  ActId act;
  std::int64_t score;  // round(p(act | prev) * 1000 * p(cur | act) * 1000)

  friend bool operator==(const BridgeCandidate&, const BridgeCandidate&) = default;
};

/// Decides whether prev -> b -> cur is acceptable for a candidate b.
using BridgeFilter = std::function<bool(ActId)>;

/// Scores every act b admitted by `admissible` as a bridge between `prev`
/// and `cur`; zero scores are dropped, the rest sorted by descending score,
/// ties by ascending act id. Transition probabilities are the model's
/// bridge_prob, marginalized over speaker-change bits for conditioned models.
std::vector<BridgeCandidate> bridge_candidates(const NGramModel& model, ActId prev, ActId cur,
                                               const BridgeFilter& admissible,
                                               bool raw_frequencies = false);

/// Stateless variant: b is admissible when the grammar lets b follow `prev`
/// and `cur` follow b somewhere in a derivation, or b is an anytime act.
std::vector<BridgeCandidate> bridge_candidates(const NGramModel& model, ActId prev, ActId cur,
                                               const DialogueGrammar& grammar,
                                               bool raw_frequencies = false);

enum class RepairKind : std::uint8_t { AnytimeInsertion, StatisticalReading, PlanFallback };

enum class Attachment : std::uint8_t { Previous, Current };

const char* repair_kind_name(RepairKind kind) noexcept;

struct RepairEvent {
  RepairKind kind = RepairKind::PlanFallback;
  std::size_t position = 0;  // utterance index
  ActId act{};               // the act that triggered the repair
  /// Statistical readings: the scored candidates that were considered
  /// (non-increasing scores). Fallbacks keep the candidates that failed.
  std::vector<BridgeCandidate> candidates;
  std::optional<Attachment> attachment;
  std::optional<ActId> reading;  // the attached additional reading

  friend bool operator==(const RepairEvent&, const RepairEvent&) = default;
};

enum class LeafKind : std::uint8_t { Expected, Anytime, Deviation };

struct TreeNode {
  enum class Kind : std::uint8_t { Goal, Operator, Leaf };

  Kind kind = Kind::Goal;
  std::string label;  // goal category, operator name or act name
  /// Operators: index into the grammar; goal node: root goal.
  std::size_t index = 0;
  bool complete = true;  // operators whose required subgoals are all consumed

  // Leaves only.
  ActId act{};
  std::size_t utterance = 0;
  LeafKind leaf = LeafKind::Expected;
  bool added_reading = false;  // attached by statistical repair

  std::vector<TreeNode> children;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DialogueTree {
  TreeNode root;

  /// Leaves in left-to-right order.
  std::vector<const TreeNode*> leaves() const;
  /// Indented one-node-per-line rendering.
  std::string format() const;
};

/// One dialogue-memory record, written when an operator carrying the
/// update-memory action completes.
struct MemoryEntry {
  std::string goal;
  std::string op;
  std::size_t first_utterance = 0;
  std::size_t last_utterance = 0;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

struct RecognizerOptions {
  DialogueContext context;
  bool raw_frequency_bridging = false;
  std::size_t max_depth = 64;   // operator nesting cap for depth-first expansion
  std::size_t max_parses = 64;  // alternative analyses kept per step
};

/// Incremental top-down, depth-first, left-to-right recognizer for one
/// dialogue. Grammar and model are borrowed and must outlive the recognizer.
///
/// Each incoming act is consumed if the grammar expects it; otherwise the
/// repair cascade runs: anytime acts become anytime leaves, then a statistical
/// bridge b is sought so that prev -> b -> cur parses and (prev, b) or (b, cur)
/// is compatible, and finally the act is attached as a deviation leaf.
class Recognizer {
 public:
  Recognizer(const DialogueGrammar& grammar, const NGramModel& model, RecognizerOptions options = {});
  Recognizer(DialogueGrammar&&, const NGramModel&, RecognizerOptions = {}) = delete;
  Recognizer(const DialogueGrammar&, NGramModel&&, RecognizerOptions = {}) = delete;
  ~Recognizer();
  Recognizer(Recognizer&&) noexcept;
  Recognizer& operator=(Recognizer&&) noexcept;

  /// Processes one utterance (each of its acts in order) and returns the
  /// repair events it caused. Acts outside the inventory throw ValidationError.
  std::vector<RepairEvent> step(const Utterance& utterance);

  /// Processed utterances with their final readings.
  std::vector<Utterance> utterances() const;
  const std::vector<RepairEvent>& events() const noexcept;
  /// Trace lines accumulated so far.
  const std::vector<std::string>& trace() const noexcept;

  /// Tree of the preferred analysis; open operators are closed where the
  /// grammar allows and marked incomplete otherwise.
  DialogueTree tree() const;
  std::vector<MemoryEntry> memory() const;

  /// Acts the grammar accepts next (ascending id).
  std::vector<ActId> expected_acts() const;
  /// Processed acts as model context, with speaker-change bits.
  std::vector<ActElement> context() const;
  /// Model history after the processed acts.
  History history() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RecognitionResult {
  DialogueTree tree;
  std::vector<RepairEvent> events;
  std::vector<std::string> trace;
  std::vector<Utterance> utterances;
  std::vector<MemoryEntry> memory;
};

RecognitionResult recognize(const DialogueGrammar& grammar, const NGramModel& model,
                            const Dialogue& dialogue, RecognizerOptions options = {});

struct KeywordPrediction {
  ActId act;
  double probability;
  std::vector<std::string> keywords;
};

/// The top-k acts predicted from the recognizer's context, each with its
/// lexicon keywords. The union of keywords is capped at `budget`, filled in
/// prediction order and then lexicon order. The next speaker-change bit is
/// used by speaker-conditioned models. Throws ValidationError if a
/// predicted act has no lexicon entry or k is 0.
std::vector<KeywordPrediction> keywords_for_next(const NGramModel& model, const Recognizer& state,
                                                 const KeywordLexicon& lexicon, std::size_t k,
                                                 std::size_t budget = 30,
                                                 bool next_speaker_change = false);

/// Same, from an explicit act context instead of a recognizer.
std::vector<KeywordPrediction> keywords_for_next(const NGramModel& model,
                                                 std::span<const ActElement> context,
                                                 const KeywordLexicon& lexicon, std::size_t k,
                                                 std::size_t budget = 30,
                                                 bool next_speaker_change = false);

}  // namespace dialact
