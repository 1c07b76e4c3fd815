#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialact/corpus.hpp"

namespace dialact {

enum class GoalId : std::uint16_t {};

constexpr std::size_t index_of(GoalId goal) noexcept { return static_cast<std::size_t>(goal); }

enum class Quantifier : std::uint8_t { One, Optional, Repeat };

/// One entry of a plan operator's ordered subgoal list: either a terminal
/// dialogue act or a goal category, optionally `?` (optional) or `*`
/// (zero or more).
struct SubgoalItem {
  enum class Kind : std::uint8_t { Act, Goal };

  Kind kind = Kind::Act;
  ActId act{};
  GoalId goal{};
  Quantifier quantifier = Quantifier::One;

  bool is_act() const noexcept { return kind == Kind::Act; }
  bool nullable_by_quantifier() const noexcept { return quantifier != Quantifier::One; }
};

/// Built-in predicates an operator may require of the dialogue context.
enum class Predicate : std::uint8_t { SpeakersKnown };

struct Constraint {
  Predicate predicate = Predicate::SpeakersKnown;
  bool negated = false;
};

/// Built-in effects fired when an operator completes.
enum class Effect : std::uint8_t { UpdateMemory };

struct DialogueContext {
  bool speakers_known = false;
};

bool holds(const Constraint& constraint, const DialogueContext& context) noexcept;

struct PlanOperator {
  std::string name;
  GoalId goal{};
  std::vector<Constraint> constraints;
  std::vector<SubgoalItem> subgoals;
  std::vector<Effect> actions;

  bool applicable(const DialogueContext& context) const noexcept;
};

/// Directional list of act pairs (first, second) that one utterance may carry
/// as consecutive readings.
class CompatibilityTable {
 public:
  CompatibilityTable() = default;

  void allow(ActId first, ActId second) { pairs_.emplace(first, second); }
  bool allows(ActId first, ActId second) const noexcept {
    return pairs_.count({first, second}) != 0;
  }
  bool empty() const noexcept { return pairs_.empty(); }
  std::size_t size() const noexcept { return pairs_.size(); }
  const std::set<std::pair<ActId, ActId>>& pairs() const noexcept { return pairs_; }

 private:
  std::set<std::pair<ActId, ActId>> pairs_;
};

CompatibilityTable parse_compatibility(std::string_view text, const ActInventory& inventory,
                                       const std::string& source = "<compatibility>");
CompatibilityTable load_compatibility(const std::filesystem::path& path,
                                      const ActInventory& inventory);

/// A validated set of plan operators: every referenced goal is produced by
/// some operator, every goal is reachable from the root, and no operator
/// lists its own goal as a subgoal.
class DialogueGrammar {
 public:
  DialogueGrammar() = default;
  /// Throws ValidationError when the invariants above do not hold.
  DialogueGrammar(ActInventory inventory, std::vector<std::string> goal_names,
                  std::vector<PlanOperator> operators, GoalId root,
                  CompatibilityTable compatibility = {});

  const ActInventory& inventory() const noexcept { return inventory_; }
  const std::vector<PlanOperator>& operators() const noexcept { return operators_; }
  const PlanOperator& op(std::size_t index) const { return operators_.at(index); }
  /// Operators producing `goal`, in declaration order.
  std::span<const std::size_t> operators_for(GoalId goal) const;

  std::size_t goal_count() const noexcept { return goal_names_.size(); }
  const std::string& goal_name(GoalId goal) const { return goal_names_.at(index_of(goal)); }
  GoalId root() const noexcept { return root_; }

  const CompatibilityTable& compatibility() const noexcept { return compatibility_; }
  DialogueGrammar with_compatibility(CompatibilityTable table) const;

  /// True when `second` can immediately follow `first` in some derivation
  /// from the root (context constraints ignored).
  bool can_follow(ActId first, ActId second) const;
  /// True when some derivation of the root starts with `act`.
  bool can_start(ActId act) const;

 private:
  void compute_follow();

  ActInventory inventory_;
  std::vector<std::string> goal_names_;
  std::vector<PlanOperator> operators_;
  std::vector<std::vector<std::size_t>> by_goal_;
  GoalId root_{};
  CompatibilityTable compatibility_;
  std::vector<bool> follow_;  // K x K
  std::vector<bool> first_of_root_;
};

/// Grammar file format: a `root <GOAL>` line and one block per operator:
///
///     operator <name>
///     goal <GOAL>
///     constraints [!]speakers-known ...      (optional)
///     subgoals <item> <item> ...
///     actions update-memory ...               (optional)
///
/// Items are ACT, [GOAL], each optionally suffixed by ? or *.
DialogueGrammar parse_grammar(std::string_view text, const ActInventory& inventory,
                              const std::string& source = "<grammar>");
DialogueGrammar load_grammar(const std::filesystem::path& path, const ActInventory& inventory);

/// Per-act keyword lists handed to a keyword spotter, in file order.
class KeywordLexicon {
 public:
  void set(ActId act, std::vector<std::string> words) { words_[act] = std::move(words); }
  bool contains(ActId act) const noexcept { return words_.count(act) != 0; }
  /// Throws ValidationError naming the act when it has no entry.
  const std::vector<std::string>& words(ActId act, const ActInventory& inventory) const;
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::map<ActId, std::vector<std::string>> words_;
};

/// Lines `<ACT>: word, word, ...`.
KeywordLexicon parse_lexicon(std::string_view text, const ActInventory& inventory,
                             const std::string& source = "<lexicon>");
KeywordLexicon load_lexicon(const std::filesystem::path& path, const ActInventory& inventory);

/// Compiled-in appointment-scheduling defaults.
ActInventory default_inventory();
/// Parsed against `inventory`, which must define every act the grammar uses.
DialogueGrammar default_grammar(const ActInventory& inventory);
CompatibilityTable default_compatibility(const ActInventory& inventory);
KeywordLexicon default_lexicon(const ActInventory& inventory);

}  // namespace dialact
