#include "dialact/grammar.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>

#include "dialact/error.hpp"
#include "text.hpp"

namespace dialact {

namespace {

bool is_goal_name(std::string_view name) {
  if (name.empty() || name.front() < 'A' || name.front() > 'Z') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::string located(const std::string& source, std::size_t line, const std::string& msg) {
  return source + ":" + std::to_string(line) + ": " + msg;
}

// Bit-set helpers for the FIRST/LAST fixed point below.
using ActSet = std::vector<bool>;

bool merge(ActSet& into, const ActSet& from) {
  bool changed = false;
  for (std::size_t i = 0; i < from.size(); ++i)
    if (from[i] && !into[i]) into[i] = changed = true;
  return changed;
}

}  // namespace

bool holds(const Constraint& constraint, const DialogueContext& context) noexcept {
  bool value = false;
  switch (constraint.predicate) {
    case Predicate::SpeakersKnown: value = context.speakers_known; break;
  }
  return value != constraint.negated;
}

bool PlanOperator::applicable(const DialogueContext& context) const noexcept {
  return std::all_of(constraints.begin(), constraints.end(),
                     [&](const Constraint& c) { return holds(c, context); });
}

DialogueGrammar::DialogueGrammar(ActInventory inventory, std::vector<std::string> goal_names,
                                 std::vector<PlanOperator> operators, GoalId root,
                                 CompatibilityTable compatibility)
    : inventory_(std::move(inventory)),
      goal_names_(std::move(goal_names)),
      operators_(std::move(operators)),
      root_(root),
      compatibility_(std::move(compatibility)) {
  if (goal_names_.empty() || index_of(root_) >= goal_names_.size())
    throw ValidationError("grammar has no root goal");
  if (operators_.empty()) throw ValidationError("grammar has no operators");

  by_goal_.assign(goal_names_.size(), {});
  for (std::size_t i = 0; i < operators_.size(); ++i) {
    const PlanOperator& op = operators_[i];
    if (index_of(op.goal) >= goal_names_.size())
      throw ValidationError("operator '" + op.name + "' has an out-of-range goal");
    if (op.subgoals.empty())
      throw ValidationError("operator '" + op.name + "' has no subgoals");
    for (const SubgoalItem& item : op.subgoals) {
      if (item.is_act()) {
        if (!inventory_.contains(item.act))
          throw ValidationError("operator '" + op.name + "' uses an act outside the inventory");
      } else {
        if (index_of(item.goal) >= goal_names_.size())
          throw ValidationError("operator '" + op.name + "' has an out-of-range subgoal");
        if (item.goal == op.goal)
          throw ValidationError("operator '" + op.name + "' lists its own goal " +
                                goal_names_[index_of(op.goal)] + " as a subgoal");
      }
    }
    by_goal_[index_of(op.goal)].push_back(i);
  }

  for (std::size_t g = 0; g < goal_names_.size(); ++g)
    if (by_goal_[g].empty())
      throw ValidationError("undefined goal '" + goal_names_[g] + "': no operator produces it");

  std::vector<bool> reached(goal_names_.size(), false);
  std::vector<std::size_t> stack{index_of(root_)};
  reached[index_of(root_)] = true;
  while (!stack.empty()) {
    const std::size_t g = stack.back();
    stack.pop_back();
    for (std::size_t op : by_goal_[g])
      for (const SubgoalItem& item : operators_[op].subgoals)
        if (!item.is_act() && !reached[index_of(item.goal)]) {
          reached[index_of(item.goal)] = true;
          stack.push_back(index_of(item.goal));
        }
  }
  for (std::size_t g = 0; g < goal_names_.size(); ++g)
    if (!reached[g])
      throw ValidationError("unreachable goal '" + goal_names_[g] + "' (not derivable from root " +
                            goal_names_[index_of(root_)] + ")");

  compute_follow();
}

std::span<const std::size_t> DialogueGrammar::operators_for(GoalId goal) const {
  return by_goal_.at(index_of(goal));
}

DialogueGrammar DialogueGrammar::with_compatibility(CompatibilityTable table) const {
  DialogueGrammar copy = *this;
  copy.compatibility_ = std::move(table);
  return copy;
}

bool DialogueGrammar::can_follow(ActId first, ActId second) const {
  const std::size_t k = inventory_.size();
  if (index_of(first) >= k || index_of(second) >= k) return false;
  return follow_[index_of(first) * k + index_of(second)];
}

bool DialogueGrammar::can_start(ActId act) const {
  return index_of(act) < first_of_root_.size() && first_of_root_[index_of(act)];
}

// Terminal-level adjacency over the context-free skeleton of the grammar:
// nullable / FIRST / LAST per goal by fixed point, then for every operator
// LAST(item i) x FIRST(item j) whenever everything between i and j can be
// empty, plus LAST(x) x FIRST(x) for repeatable items.
void DialogueGrammar::compute_follow() {
  const std::size_t k = inventory_.size();
  const std::size_t goals = goal_names_.size();
  std::vector<bool> nullable(goals, false);
  std::vector<ActSet> first(goals, ActSet(k, false));
  std::vector<ActSet> last(goals, ActSet(k, false));

  auto item_nullable = [&](const SubgoalItem& item) {
    return item.nullable_by_quantifier() || (!item.is_act() && nullable[index_of(item.goal)]);
  };
  auto item_first = [&](const SubgoalItem& item) {
    if (!item.is_act()) return first[index_of(item.goal)];
    ActSet s(k, false);
    s[index_of(item.act)] = true;
    return s;
  };
  auto item_last = [&](const SubgoalItem& item) {
    if (!item.is_act()) return last[index_of(item.goal)];
    ActSet s(k, false);
    s[index_of(item.act)] = true;
    return s;
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (const PlanOperator& op : operators_) {
      const std::size_t g = index_of(op.goal);
      if (!nullable[g] && std::all_of(op.subgoals.begin(), op.subgoals.end(), item_nullable))
        nullable[g] = changed = true;
      for (const SubgoalItem& item : op.subgoals) {
        changed |= merge(first[g], item_first(item));
        if (!item_nullable(item)) break;
      }
      for (auto it = op.subgoals.rbegin(); it != op.subgoals.rend(); ++it) {
        changed |= merge(last[g], item_last(*it));
        if (!item_nullable(*it)) break;
      }
    }
  }

  follow_.assign(k * k, false);
  auto connect = [&](const ActSet& a, const ActSet& b) {
    for (std::size_t x = 0; x < k; ++x)
      if (a[x])
        for (std::size_t y = 0; y < k; ++y)
          if (b[y]) follow_[x * k + y] = true;
  };
  for (const PlanOperator& op : operators_) {
    const auto& items = op.subgoals;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const ActSet li = item_last(items[i]);
      if (items[i].quantifier == Quantifier::Repeat) connect(li, item_first(items[i]));
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        connect(li, item_first(items[j]));
        if (!item_nullable(items[j])) break;
      }
    }
  }
  first_of_root_ = first[index_of(root_)];
}

// ---------------------------------------------------------------------------
// Grammar file

DialogueGrammar parse_grammar(std::string_view content, const ActInventory& inventory,
                              const std::string& source) {
  struct Reference {
    std::size_t line;
    std::string name;
  };
  std::vector<std::string> goal_names;
  std::unordered_map<std::string, GoalId> goal_ids;
  std::vector<Reference> references;  // every goal mention, for error reporting
  auto goal_id = [&](std::string_view name, std::size_t line) {
    const std::string key(name);
    references.push_back({line, key});
    const auto [it, inserted] = goal_ids.emplace(key, static_cast<GoalId>(goal_names.size()));
    if (inserted) goal_names.push_back(key);
    return it->second;
  };

  std::vector<PlanOperator> operators;
  std::vector<std::size_t> operator_lines;
  std::vector<bool> has_goal;
  std::optional<GoalId> root;
  std::size_t root_line = 0;

  auto fail = [&](std::size_t line, const std::string& msg) -> void {
    throw ParseError(source, line, msg);
  };

  text::for_each_line(content, [&](std::size_t no, std::string_view raw) {
    const std::string_view line = text::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    const auto fields = text::split_ws(line);
    const std::string_view key = fields.front();

    if (key == "root") {
      if (fields.size() != 2 || !is_goal_name(fields[1])) fail(no, "expected 'root <GOAL>'");
      if (root) fail(no, "duplicate root declaration");
      root = goal_id(fields[1], no);
      root_line = no;
      return;
    }
    if (key == "operator") {
      if (fields.size() != 2) fail(no, "expected 'operator <name>'");
      for (const auto& op : operators)
        if (op.name == fields[1]) fail(no, "duplicate operator '" + std::string(fields[1]) + "'");
      operators.push_back({});
      operators.back().name = std::string(fields[1]);
      operator_lines.push_back(no);
      has_goal.push_back(false);
      return;
    }
    if (operators.empty()) fail(no, "'" + std::string(key) + "' outside an operator block");
    PlanOperator& op = operators.back();

    if (key == "goal") {
      if (fields.size() != 2 || !is_goal_name(fields[1])) fail(no, "expected 'goal <GOAL>'");
      if (has_goal.back()) fail(no, "operator '" + op.name + "' declares its goal twice");
      op.goal = goal_id(fields[1], no);
      has_goal.back() = true;
    } else if (key == "constraints") {
      for (std::size_t i = 1; i < fields.size(); ++i) {
        std::string_view name = fields[i];
        Constraint c;
        if (name.starts_with('!')) {
          c.negated = true;
          name.remove_prefix(1);
        }
        if (name != "speakers-known") fail(no, "unknown constraint '" + std::string(fields[i]) + "'");
        c.predicate = Predicate::SpeakersKnown;
        op.constraints.push_back(c);
      }
    } else if (key == "actions") {
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i] != "update-memory") fail(no, "unknown action '" + std::string(fields[i]) + "'");
        op.actions.push_back(Effect::UpdateMemory);
      }
    } else if (key == "subgoals") {
      if (!op.subgoals.empty()) fail(no, "operator '" + op.name + "' declares subgoals twice");
      if (fields.size() < 2) fail(no, "operator '" + op.name + "' has no subgoals");
      for (std::size_t i = 1; i < fields.size(); ++i) {
        std::string_view item = fields[i];
        SubgoalItem sub;
        if (item.ends_with('?')) {
          sub.quantifier = Quantifier::Optional;
          item.remove_suffix(1);
        } else if (item.ends_with('*')) {
          sub.quantifier = Quantifier::Repeat;
          item.remove_suffix(1);
        }
        if (item.size() >= 2 && item.front() == '[' && item.back() == ']') {
          const std::string_view name = item.substr(1, item.size() - 2);
          if (!is_goal_name(name)) fail(no, "malformed goal '" + std::string(fields[i]) + "'");
          sub.kind = SubgoalItem::Kind::Goal;
          sub.goal = goal_id(name, no);
        } else {
          const auto act = inventory.find(item);
          if (!act) fail(no, "unknown act '" + std::string(item) + "'");
          sub.kind = SubgoalItem::Kind::Act;
          sub.act = *act;
        }
        op.subgoals.push_back(sub);
      }
    } else {
      fail(no, "unknown directive '" + std::string(key) + "'");
    }
  });

  if (!root) throw ParseError(source, 0, "missing root declaration");
  for (std::size_t i = 0; i < operators.size(); ++i) {
    if (!has_goal[i]) fail(operator_lines[i], "operator '" + operators[i].name + "' has no goal");
    if (operators[i].subgoals.empty())
      fail(operator_lines[i], "operator '" + operators[i].name + "' has no subgoals");
  }

  // Report undefined goals at their first mention, with a line number.
  std::vector<bool> produced(goal_names.size(), false);
  for (const auto& op : operators) produced[index_of(op.goal)] = true;
  for (const auto& ref : references)
    if (!produced[index_of(goal_ids.at(ref.name))])
      throw ValidationError(located(source, ref.line, "undefined goal '" + ref.name + "'"));
  (void)root_line;

  return DialogueGrammar(inventory, std::move(goal_names), std::move(operators), *root);
}

DialogueGrammar load_grammar(const std::filesystem::path& path, const ActInventory& inventory) {
  return parse_grammar(text::read_file(path), inventory, path.string());
}

// ---------------------------------------------------------------------------
// Compatibility table

CompatibilityTable parse_compatibility(std::string_view content, const ActInventory& inventory,
                                       const std::string& source) {
  CompatibilityTable table;
  text::for_each_line(content, [&](std::size_t no, std::string_view raw) {
    const std::string_view line = text::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    const auto parts = text::split_trimmed(line, '+');
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty())
      throw ParseError(source, no, "expected '<ACT> + <ACT>'");
    ActId pair[2];
    for (int i = 0; i < 2; ++i) {
      const auto act = inventory.find(parts[i]);
      if (!act) throw ParseError(source, no, "unknown act '" + std::string(parts[i]) + "'");
      pair[i] = *act;
    }
    table.allow(pair[0], pair[1]);
  });
  return table;
}

CompatibilityTable load_compatibility(const std::filesystem::path& path,
                                      const ActInventory& inventory) {
  return parse_compatibility(text::read_file(path), inventory, path.string());
}

// ---------------------------------------------------------------------------
// Keyword lexicon

const std::vector<std::string>& KeywordLexicon::words(ActId act, const ActInventory& inventory) const {
  const auto it = words_.find(act);
  if (it == words_.end()) {
    const std::string name =
        inventory.contains(act) ? inventory.name(act) : "#" + std::to_string(index_of(act));
    throw ValidationError("no lexicon entry for act " + name);
  }
  return it->second;
}

KeywordLexicon parse_lexicon(std::string_view content, const ActInventory& inventory,
                             const std::string& source) {
  KeywordLexicon lexicon;
  text::for_each_line(content, [&](std::size_t no, std::string_view raw) {
    const std::string_view line = text::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError(source, no, "expected '<ACT>: word, ...'");
    const std::string_view name = text::trim(line.substr(0, colon));
    const auto act = inventory.find(name);
    if (!act) throw ParseError(source, no, "unknown act '" + std::string(name) + "'");
    if (lexicon.contains(*act))
      throw ParseError(source, no, "duplicate lexicon entry for " + std::string(name));
    std::vector<std::string> words;
    const std::string_view rest = text::trim(line.substr(colon + 1));
    if (!rest.empty())
      for (auto w : text::split_trimmed(rest, ',')) {
        if (w.empty()) throw ParseError(source, no, "empty keyword");
        if (std::find(words.begin(), words.end(), w) == words.end()) words.emplace_back(w);
      }
    lexicon.set(*act, std::move(words));
  });
  return lexicon;
}

KeywordLexicon load_lexicon(const std::filesystem::path& path, const ActInventory& inventory) {
  return parse_lexicon(text::read_file(path), inventory, path.string());
}

}  // namespace dialact
