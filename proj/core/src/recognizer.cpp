#include "dialact/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "dialact/error.hpp"

namespace dialact {

// ---------------------------------------------------------------------------
// Bridging

std::vector<BridgeCandidate> bridge_candidates(const NGramModel& model, ActId prev, ActId cur,
                                               const BridgeFilter& admissible,
                                               bool raw_frequencies) {
  const ActInventory& inv = model.inventory();
  if (!inv.contains(prev) || !inv.contains(cur))
    throw ValidationError("bridge endpoints must belong to the model inventory");

  // p(y | x) with x taken as a same-speaker token; conditioned models sum over
  // the speaker-change bit of y.
  auto transition = [&](ActId y, ActId x) {
    const Token from = model.token(x, false);
    double p = model.bridge_prob(model.token(y, false), from, raw_frequencies);
    if (model.speaker_conditioned()) p += model.bridge_prob(model.token(y, true), from, raw_frequencies);
    return p;
  };

  std::vector<BridgeCandidate> out;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    const ActId b = act_at(i);
    const double score = transition(b, prev) * 1000.0 * transition(cur, b) * 1000.0;
    const auto rounded = static_cast<std::int64_t>(std::llround(score));
    if (rounded <= 0) continue;
    if (admissible && !admissible(b)) continue;
    out.push_back({b, rounded});
  }
  std::stable_sort(out.begin(), out.end(), [](const BridgeCandidate& a, const BridgeCandidate& b) {
    return a.score > b.score;
  });
  return out;
}

std::vector<BridgeCandidate> bridge_candidates(const NGramModel& model, ActId prev, ActId cur,
                                               const DialogueGrammar& grammar,
                                               bool raw_frequencies) {
  const ActInventory& inv = grammar.inventory();
  return bridge_candidates(
      model, prev, cur,
      [&](ActId b) {
        return inv.is_anytime(b) || (grammar.can_follow(prev, b) && grammar.can_follow(b, cur));
      },
      raw_frequencies);
}

const char* repair_kind_name(RepairKind kind) noexcept {
  switch (kind) {
    case RepairKind::AnytimeInsertion: return "anytime-insertion";
    case RepairKind::StatisticalReading: return "statistical-reading";
    case RepairKind::PlanFallback: return "plan-fallback";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tree

std::vector<const TreeNode*> DialogueTree::leaves() const {
  std::vector<const TreeNode*> out;
  std::vector<const TreeNode*> stack{&root};
  while (!stack.empty()) {
    const TreeNode* n = stack.back();
    stack.pop_back();
    if (n->kind == TreeNode::Kind::Leaf) out.push_back(n);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) stack.push_back(&*it);
  }
  return out;
}

std::string DialogueTree::format() const {
  std::ostringstream out;
  auto walk = [&](auto&& self, const TreeNode& n, int depth) -> void {
    out << std::string(2 * static_cast<std::size_t>(depth), ' ');
    switch (n.kind) {
      case TreeNode::Kind::Goal: out << n.label; break;
      case TreeNode::Kind::Operator: out << n.label; break;
      case TreeNode::Kind::Leaf:
        out << '[' << n.utterance << "] " << n.label;
        if (n.added_reading) out << " +reading";
        if (n.leaf == LeafKind::Anytime) out << " (anytime)";
        if (n.leaf == LeafKind::Deviation) out << " (deviation)";
        break;
    }
    if (n.kind != TreeNode::Kind::Leaf && !n.complete) out << " (incomplete)";
    out << '\n';
    for (const TreeNode& c : n.children) self(self, c, depth + 1);
  };
  walk(walk, root, 0);
  return out.str();
}

// ---------------------------------------------------------------------------
// Recognizer

namespace {

constexpr std::uint32_t kRootOp = std::numeric_limits<std::uint32_t>::max();

struct Frame {
  std::uint32_t op;
  std::uint32_t item;

  friend auto operator<=>(const Frame&, const Frame&) = default;
};

// Derivation steps are kept as a persistent list shared between parses.
struct LogEvent {
  enum class Kind : std::uint8_t { Push, Pop, Leaf } kind;
  std::uint32_t value;  // operator index or item index
  std::shared_ptr<const LogEvent> prev;
};
using Log = std::shared_ptr<const LogEvent>;

Log extend(Log log, LogEvent::Kind kind, std::uint32_t value) {
  return std::make_shared<const LogEvent>(LogEvent{kind, value, std::move(log)});
}

struct Parse {
  std::vector<Frame> stack;
  Log log;
};

struct Item {
  std::size_t utterance;
  ActId act;
  LeafKind kind;
  bool added;
};

// One act to (re)process during a replay.
struct Step {
  std::size_t utterance;
  ActId act;
  bool added;
  bool strict;     // must be consumed by the grammar
  LeafKind before; // how it was handled originally (non-strict steps)
};

}  // namespace

struct Recognizer::Impl {
  const DialogueGrammar* grammar;
  const NGramModel* model;
  RecognizerOptions options;
  std::vector<SubgoalItem> root_items;

  std::vector<Utterance> input;
  std::vector<Item> items;
  std::vector<std::vector<Parse>> snapshots;  // parses before each item
  std::vector<Parse> parses;
  std::vector<RepairEvent> events;
  std::vector<std::string> trace;

  Impl(const DialogueGrammar& g, const NGramModel& m, RecognizerOptions o)
      : grammar(&g), model(&m), options(o) {
    if (g.inventory().size() != m.inventory().size())
      throw ValidationError("grammar and model use inventories of different sizes");
    SubgoalItem root;
    root.kind = SubgoalItem::Kind::Goal;
    root.goal = g.root();
    root_items.push_back(root);
    parses.push_back({{Frame{kRootOp, 0}}, nullptr});
  }

  const ActInventory& inventory() const { return grammar->inventory(); }
  const std::string& name(ActId a) const { return inventory().name(a); }

  const std::vector<SubgoalItem>& subgoals(std::uint32_t op) const {
    return op == kRootOp ? root_items : grammar->op(op).subgoals;
  }

  // Depth-first, left-to-right expansion of every parse in `from`, in order.
  // `on_terminal(parse, item)` sees each reachable expected act (the parse is
  // positioned at that item); `on_accept(parse)` sees each parse that can
  // finish the root. Either returns true to stop the search.
  template <typename OnTerminal, typename OnAccept>
  void explore(const std::vector<Parse>& from, OnTerminal&& on_terminal, OnAccept&& on_accept) const {
    std::set<std::vector<Frame>> visited;
    bool stop = false;
    auto dfs = [&](auto&& self, Parse p) -> void {
      if (stop || !visited.insert(p.stack).second) return;
      const Frame top = p.stack.back();
      const auto& items = subgoals(top.op);
      if (top.item == items.size()) {
        if (p.stack.size() == 1) {
          stop = on_accept(p);
          return;
        }
        p.stack.pop_back();
        p.log = extend(std::move(p.log), LogEvent::Kind::Pop, top.op);
        self(self, std::move(p));
        return;
      }
      const SubgoalItem& item = items[top.item];
      const std::uint32_t next = item.quantifier == Quantifier::Repeat ? top.item : top.item + 1;
      if (item.is_act()) {
        if (on_terminal(p, item)) {
          stop = true;
          return;
        }
      } else if (p.stack.size() < options.max_depth) {
        for (std::size_t op : grammar->operators_for(item.goal)) {
          if (!grammar->op(op).applicable(options.context)) continue;
          Parse q = p;
          q.stack.back().item = next;
          q.stack.push_back({static_cast<std::uint32_t>(op), 0});
          q.log = extend(q.log, LogEvent::Kind::Push, static_cast<std::uint32_t>(op));
          self(self, std::move(q));
          if (stop) return;
        }
      }
      if (item.quantifier != Quantifier::One) {
        p.stack.back().item += 1;
        self(self, std::move(p));
      }
    };
    for (const Parse& p : from) {
      dfs(dfs, p);
      if (stop) return;
    }
  }

  std::vector<Parse> advance(const std::vector<Parse>& from, ActId act, std::uint32_t leaf) const {
    std::vector<Parse> out;
    std::set<std::vector<Frame>> seen;
    explore(
        from,
        [&](const Parse& p, const SubgoalItem& item) {
          if (item.act != act) return false;
          Parse q = p;
          if (item.quantifier != Quantifier::Repeat) q.stack.back().item += 1;
          if (!seen.insert(q.stack).second) return false;
          q.log = extend(q.log, LogEvent::Kind::Leaf, leaf);
          out.push_back(std::move(q));
          return out.size() >= options.max_parses;
        },
        [](const Parse&) { return false; });
    return out;
  }

  std::optional<Parse> accept(const std::vector<Parse>& from) const {
    std::optional<Parse> found;
    explore(
        from, [](const Parse&, const SubgoalItem&) { return false; },
        [&](const Parse& p) {
          found = p;
          return true;
        });
    return found;
  }

  static void mark(std::vector<Parse>& ps, std::uint32_t leaf) {
    for (Parse& p : ps) p.log = extend(p.log, LogEvent::Kind::Leaf, leaf);
  }

  // Runs `steps` starting from `start`; with `commit` the items and parses are
  // rewritten from item index `rewind` on, otherwise only feasibility is checked.
  bool replay(std::size_t rewind, const std::vector<Step>& steps, bool commit) {
    std::vector<Parse> current = rewind < snapshots.size() ? snapshots[rewind] : parses;
    std::vector<Item> new_items;
    std::vector<std::vector<Parse>> new_snapshots;
    for (const Step& s : steps) {
      const auto leaf = static_cast<std::uint32_t>(rewind + new_items.size());
      auto next = advance(current, s.act, leaf);
      LeafKind kind = LeafKind::Expected;
      if (next.empty()) {
        if (s.strict) return false;
        if (inventory().is_anytime(s.act))
          kind = LeafKind::Anytime;
        else if (s.before == LeafKind::Deviation)
          kind = LeafKind::Deviation;
        else
          return false;
        next = current;
        mark(next, leaf);
      }
      if (commit) {
        new_snapshots.push_back(std::move(current));
        new_items.push_back({s.utterance, s.act, kind, s.added});
      }
      current = std::move(next);
    }
    if (!commit) return true;
    items.resize(rewind);
    snapshots.resize(rewind);
    for (std::size_t i = 0; i < new_items.size(); ++i) {
      trace.push_back("Planner: -- Processing " + name(new_items[i].act));
      items.push_back(new_items[i]);
      snapshots.push_back(std::move(new_snapshots[i]));
    }
    parses = std::move(current);
    return true;
  }

  void append(std::size_t utterance, ActId act, LeafKind kind, std::vector<Parse> next) {
    snapshots.push_back(parses);
    items.push_back({utterance, act, kind, false});
    parses = std::move(next);
  }

  std::vector<Step> previous_steps(std::size_t prev, ActId b, std::size_t utterance, ActId cur) const {
    std::vector<Step> steps;
    steps.push_back({items[prev].utterance, items[prev].act, items[prev].added, false, items[prev].kind});
    steps.push_back({items[prev].utterance, b, true, true, LeafKind::Expected});
    for (std::size_t i = prev + 1; i < items.size(); ++i)
      steps.push_back({items[i].utterance, items[i].act, items[i].added, false, items[i].kind});
    steps.push_back({utterance, cur, false, true, LeafKind::Expected});
    return steps;
  }

  std::vector<Step> current_steps(ActId b, std::size_t utterance, ActId cur) const {
    return {{utterance, b, true, true, LeafKind::Expected},
            {utterance, cur, false, true, LeafKind::Expected}};
  }

  // Returns the event on success; on failure the candidates that were tried.
  std::optional<RepairEvent> statistical(std::size_t utterance, ActId cur,
                                         std::vector<BridgeCandidate>& tried) {
    std::optional<std::size_t> prev;
    for (std::size_t i = items.size(); i-- > 0;)
      if (!inventory().is_noise(items[i].act)) {
        prev = i;
        break;
      }
    if (!prev) return std::nullopt;
    const ActId p = items[*prev].act;

    trace.push_back("Trying to find a dialogue act to bridge " + name(p) + " and " + name(cur) + " ...");
    tried = bridge_candidates(
        *model, p, cur,
        [&](ActId b) {
          return inventory().is_anytime(b) || replay(*prev, previous_steps(*prev, b, utterance, cur), false);
        },
        options.raw_frequency_bridging);
    if (tried.empty()) {
      trace.push_back("No insertion found.");
      return std::nullopt;
    }
    trace.push_back("Possible insertions and their scores:");
    for (const auto& c : tried) trace.push_back("(" + name(c.act) + " " + std::to_string(c.score) + ")");

    const CompatibilityTable& compat = grammar->compatibility();
    for (const auto& c : tried) {
      const ActId b = c.act;
      trace.push_back("Testing " + name(b) + " for compatibility with surrounding dialogue acts...");
      RepairEvent event{RepairKind::StatisticalReading, utterance, cur, tried, std::nullopt, b};
      if (compat.allows(p, b)) {
        auto steps = previous_steps(*prev, b, utterance, cur);
        if (replay(*prev, steps, false)) {
          trace.push_back("The previous dialogue act " + name(p) + " has an additional reading of " +
                          name(b) + ":");
          trace.push_back(name(p) + " -> " + name(p) + " " + name(b) + " !");
          trace.push_back("Warning -- Repairing...");
          replay(*prev, steps, true);
          event.attachment = Attachment::Previous;
          return event;
        }
      }
      if (compat.allows(b, cur)) {
        auto steps = current_steps(b, utterance, cur);
        if (replay(items.size(), steps, false)) {
          trace.push_back("The current dialogue act " + name(cur) + " has an additional reading of " +
                          name(b) + ":");
          trace.push_back(name(cur) + " -> " + name(b) + " " + name(cur) + " !");
          trace.push_back("Warning -- Repairing...");
          replay(items.size(), steps, true);
          event.attachment = Attachment::Current;
          return event;
        }
      }
    }
    trace.push_back("No compatible insertion found.");
    return std::nullopt;
  }

  void process(std::size_t utterance, ActId act) {
    trace.push_back("Planner: -- Processing " + name(act));
    const auto leaf = static_cast<std::uint32_t>(items.size());
    auto next = advance(parses, act, leaf);
    if (!next.empty()) {
      append(utterance, act, LeafKind::Expected, std::move(next));
      return;
    }

    if (inventory().is_anytime(act)) {
      next = parses;
      mark(next, leaf);
      append(utterance, act, LeafKind::Anytime, std::move(next));
      trace.push_back("Warning -- Repairing...");
      events.push_back({RepairKind::AnytimeInsertion, utterance, act, {}, std::nullopt, std::nullopt});
      return;
    }

    std::vector<BridgeCandidate> tried;
    if (auto event = statistical(utterance, act, tried)) {
      events.push_back(std::move(*event));
      return;
    }

    next = parses;
    mark(next, leaf);
    append(utterance, act, LeafKind::Deviation, std::move(next));
    trace.push_back("Warning -- Repairing...");
    trace.push_back("Unexpected dialogue act " + name(act) + " kept as a deviation");
    events.push_back({RepairKind::PlanFallback, utterance, act, std::move(tried), std::nullopt, std::nullopt});
  }

  std::vector<Utterance> final_utterances() const {
    std::vector<Utterance> out = input;
    for (auto& u : out) u.acts.clear();
    for (const Item& it : items) out[it.utterance].acts.push_back(it.act);
    return out;
  }

  DialogueTree build_tree() const {
    std::optional<Parse> chosen = accept(parses);
    const bool accepted = chosen.has_value();
    if (!chosen) chosen = parses.front();

    std::vector<const LogEvent*> log;
    for (const LogEvent* e = chosen->log.get(); e; e = e->prev.get()) log.push_back(e);
    std::reverse(log.begin(), log.end());

    // Build in an arena, then nest.
    struct Node {
      TreeNode node;
      std::vector<std::size_t> children;
    };
    std::vector<Node> arena(1);
    arena[0].node.kind = TreeNode::Kind::Goal;
    arena[0].node.label = grammar->goal_name(grammar->root());
    arena[0].node.index = index_of(grammar->root());
    arena[0].node.complete = accepted;
    std::vector<std::size_t> open{0};

    for (const LogEvent* e : log) {
      switch (e->kind) {
        case LogEvent::Kind::Push: {
          Node n;
          n.node.kind = TreeNode::Kind::Operator;
          n.node.label = grammar->op(e->value).name;
          n.node.index = e->value;
          n.node.complete = false;
          arena.push_back(std::move(n));
          arena[open.back()].children.push_back(arena.size() - 1);
          open.push_back(arena.size() - 1);
          break;
        }
        case LogEvent::Kind::Pop:
          arena[open.back()].node.complete = true;
          open.pop_back();
          break;
        case LogEvent::Kind::Leaf: {
          const Item& it = items.at(e->value);
          Node n;
          n.node.kind = TreeNode::Kind::Leaf;
          n.node.label = name(it.act);
          n.node.act = it.act;
          n.node.utterance = it.utterance;
          n.node.leaf = it.kind;
          n.node.added_reading = it.added;
          arena.push_back(std::move(n));
          arena[open.back()].children.push_back(arena.size() - 1);
          break;
        }
      }
    }

    auto nest = [&](auto&& self, std::size_t i) -> TreeNode {
      TreeNode n = std::move(arena[i].node);
      for (std::size_t c : arena[i].children) n.children.push_back(self(self, c));
      return n;
    };
    return DialogueTree{nest(nest, 0)};
  }
};

Recognizer::Recognizer(const DialogueGrammar& grammar, const NGramModel& model, RecognizerOptions options)
    : impl_(std::make_unique<Impl>(grammar, model, options)) {}
Recognizer::~Recognizer() = default;
Recognizer::Recognizer(Recognizer&&) noexcept = default;
Recognizer& Recognizer::operator=(Recognizer&&) noexcept = default;

std::vector<RepairEvent> Recognizer::step(const Utterance& utterance) {
  for (ActId a : utterance.acts)
    if (!impl_->inventory().contains(a))
      throw ValidationError("act id " + std::to_string(index_of(a)) + " is outside the inventory");
  const std::size_t first_event = impl_->events.size();
  const std::size_t index = impl_->input.size();
  impl_->input.push_back(utterance);
  for (ActId a : utterance.acts) impl_->process(index, a);
  return {impl_->events.begin() + static_cast<std::ptrdiff_t>(first_event), impl_->events.end()};
}

std::vector<Utterance> Recognizer::utterances() const { return impl_->final_utterances(); }
const std::vector<RepairEvent>& Recognizer::events() const noexcept { return impl_->events; }
const std::vector<std::string>& Recognizer::trace() const noexcept { return impl_->trace; }
DialogueTree Recognizer::tree() const { return impl_->build_tree(); }

std::vector<MemoryEntry> Recognizer::memory() const {
  const DialogueTree t = tree();
  const DialogueGrammar& g = *impl_->grammar;
  std::vector<MemoryEntry> out;
  // Post-order: an operator's entry follows those of its sub-operators.
  auto walk = [&](auto&& self, const TreeNode& n, std::size_t& lo, std::size_t& hi, bool& any) -> void {
    if (n.kind == TreeNode::Kind::Leaf) {
      lo = any ? std::min(lo, n.utterance) : n.utterance;
      hi = any ? std::max(hi, n.utterance) : n.utterance;
      any = true;
      return;
    }
    std::size_t sub_lo = 0, sub_hi = 0;
    bool sub_any = false;
    for (const TreeNode& c : n.children) self(self, c, sub_lo, sub_hi, sub_any);
    if (sub_any) {
      lo = any ? std::min(lo, sub_lo) : sub_lo;
      hi = any ? std::max(hi, sub_hi) : sub_hi;
      any = true;
    }
    if (n.kind != TreeNode::Kind::Operator || !n.complete || !sub_any) return;
    const PlanOperator& op = g.op(n.index);
    if (std::find(op.actions.begin(), op.actions.end(), Effect::UpdateMemory) == op.actions.end()) return;
    out.push_back({g.goal_name(op.goal), op.name, sub_lo, sub_hi});
  };
  std::size_t lo = 0, hi = 0;
  bool any = false;
  walk(walk, t.root, lo, hi, any);
  return out;
}

std::vector<ActId> Recognizer::expected_acts() const {
  std::set<ActId> acts;
  impl_->explore(
      impl_->parses,
      [&](const Parse&, const SubgoalItem& item) {
        acts.insert(item.act);
        return false;
      },
      [](const Parse&) { return false; });
  return {acts.begin(), acts.end()};
}

std::vector<ActElement> Recognizer::context() const {
  return flatten(Dialogue{"", impl_->final_utterances()});
}

History Recognizer::history() const {
  const auto elements = context();
  const auto tokens = encode(impl_->model->codec(), elements);
  return history_after(*impl_->model, tokens);
}

RecognitionResult recognize(const DialogueGrammar& grammar, const NGramModel& model,
                            const Dialogue& dialogue, RecognizerOptions options) {
  Recognizer r(grammar, model, options);
  for (const Utterance& u : dialogue.utterances) r.step(u);
  return {r.tree(), r.events(), r.trace(), r.utterances(), r.memory()};
}

}  // namespace dialact
