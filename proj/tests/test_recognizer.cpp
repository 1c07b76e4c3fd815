#include <doctest.h>

#include <fstream>
#include <random>

#include "dialact/error.hpp"
#include "dialact/recognizer.hpp"
#include "support/support.hpp"

using namespace dialact;

namespace {

const ActInventory& inv() {
  static const ActInventory i = default_inventory();
  return i;
}

ActId act(const char* name) { return inv().at(name); }

const NGramModel& fixture_model() {
  static const NGramModel m = load_model(support::data_path("fixtures/repair/model.txt"));
  return m;
}

DialogueGrammar fixture_grammar() {
  return default_grammar(inv()).with_compatibility(
      load_compatibility(support::data_path("fixtures/repair/compat.txt"), inv()));
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<ActId> acts_of(const std::vector<Utterance>& us) {
  std::vector<ActId> out;
  for (const auto& u : us) out.insert(out.end(), u.acts.begin(), u.acts.end());
  return out;
}

std::vector<ActId> leaf_acts(const DialogueTree& t) {
  std::vector<ActId> out;
  for (const TreeNode* n : t.leaves()) out.push_back(n->act);
  return out;
}

// Random derivation of the grammar: picks an applicable operator per goal,
// takes optional items with probability 1/2 and repeats geometrically.
void expand(const DialogueGrammar& g, GoalId goal, const DialogueContext& ctx, std::mt19937_64& rng,
            std::vector<ActId>& out, int depth) {
  std::vector<std::size_t> ops;
  for (std::size_t i : g.operators_for(goal))
    if (g.op(i).applicable(ctx)) ops.push_back(i);
  REQUIRE_FALSE(ops.empty());
  const PlanOperator& op = g.op(ops[std::uniform_int_distribution<std::size_t>(0, ops.size() - 1)(rng)]);
  std::bernoulli_distribution coin(depth > 6 ? 0.15 : 0.5);
  for (const SubgoalItem& item : op.subgoals) {
    int times = 1;
    if (item.quantifier == Quantifier::Optional) times = coin(rng) ? 1 : 0;
    if (item.quantifier == Quantifier::Repeat) {
      times = 0;
      while (times < 4 && coin(rng)) ++times;
    }
    for (int t = 0; t < times; ++t) {
      if (item.is_act())
        out.push_back(item.act);
      else
        expand(g, item.goal, ctx, rng, out, depth + 1);
    }
  }
}

Dialogue from_acts(const std::vector<ActId>& acts) {
  Dialogue d;
  d.id = "x";
  for (std::size_t i = 0; i < acts.size(); ++i) d.utterances.push_back({i % 2 ? Speaker::B : Speaker::A, {acts[i]}, {}});
  return d;
}

}  // namespace

TEST_CASE("recognizer: expected acts produce no events") {
  const auto g = default_grammar(inv());
  Recognizer r(g, fixture_model());
  CHECK(r.step({Speaker::A, {act("INIT")}, {}}).empty());
  const auto expected = r.expected_acts();
  CHECK(std::find(expected.begin(), expected.end(), act("SUGGEST")) != expected.end());
  CHECK(std::find(expected.begin(), expected.end(), act("REJECT")) == expected.end());
  CHECK(r.step({Speaker::B, {act("SUGGEST")}, {}}).empty());
  CHECK(r.events().empty());
  CHECK(r.trace() == std::vector<std::string>{"Planner: -- Processing INIT", "Planner: -- Processing SUGGEST"});
}

TEST_CASE("recognizer: anytime act becomes an anytime leaf") {
  const auto g = default_grammar(inv());
  Recognizer r(g, fixture_model());
  r.step({Speaker::A, {act("INIT")}, {}});
  const auto ev = r.step({Speaker::B, {act("DELIBERATE")}, {}});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].kind == RepairKind::AnytimeInsertion);
  CHECK(ev[0].position == 1);
  CHECK(ev[0].act == act("DELIBERATE"));
  CHECK(r.step({Speaker::B, {act("SUGGEST")}, {}}).empty());
  const auto leaves = r.tree().leaves();
  REQUIRE(leaves.size() == 3);
  CHECK(leaves[1]->leaf == LeafKind::Anytime);
}

TEST_CASE("recognizer: statistical repair of the fixture dialogue") {
  const Corpus c = load_corpus(support::data_path("fixtures/repair/dialogue.txt"), inv());
  REQUIRE(c.size() == 1);
  const RecognitionResult r = recognize(fixture_grammar(), fixture_model(), c.dialogues()[0]);

  auto expected = read_lines(support::data_path("fixtures/repair/expected_trace.txt"));
  expected.erase(expected.begin());  // "== id" header written by the tool
  CHECK(r.trace == expected);

  REQUIRE(r.events.size() == 2);
  CHECK(r.events[0].kind == RepairKind::AnytimeInsertion);
  CHECK(r.events[0].position == 3);
  const RepairEvent& s = r.events[1];
  CHECK(s.kind == RepairKind::StatisticalReading);
  CHECK(s.position == 4);
  CHECK(s.act == act("REJECT"));
  CHECK(s.attachment == Attachment::Previous);
  CHECK(s.reading == act("SUGGEST"));
  CHECK(s.candidates == std::vector<BridgeCandidate>{
                           {act("SUGGEST"), 81326}, {act("REQUEST_COMMENT"), 37576}, {act("DELIBERATE"), 20572}});

  REQUIRE(r.utterances.size() == 5);
  CHECK(r.utterances[2].acts == std::vector<ActId>{act("INIT"), act("SUGGEST")});
  CHECK(r.utterances[4].acts == std::vector<ActId>{act("REJECT")});
  const auto leaves = r.tree.leaves();
  REQUIRE(leaves.size() == 6);
  CHECK(leaves[3]->added_reading);
  CHECK(leaves[3]->utterance == 2);
  CHECK(r.tree.format().find("[2] SUGGEST +reading") != std::string::npos);
}

TEST_CASE("recognizer: the bridge skips noise acts") {
  // Same fixture without the DELIBERATE: the bridge and its scores do not change.
  const Dialogue d = support::dialogue(inv(), "A:MOTIVATE A:REJECT A:INIT B:REJECT");
  const RecognitionResult r = recognize(fixture_grammar(), fixture_model(), d);
  REQUIRE(r.events.size() == 1);
  const Corpus c = load_corpus(support::data_path("fixtures/repair/dialogue.txt"), inv());
  const RecognitionResult with_noise = recognize(fixture_grammar(), fixture_model(), c.dialogues()[0]);
  CHECK(r.events[0].candidates == with_noise.events[1].candidates);
  CHECK(r.events[0].reading == with_noise.events[1].reading);
  CHECK(r.events[0].attachment == with_noise.events[1].attachment);
}

TEST_CASE("recognizer: reading attached to the current act") {
  CompatibilityTable compat;
  compat.allow(act("SUGGEST"), act("REJECT"));
  const DialogueGrammar g = default_grammar(inv()).with_compatibility(compat);
  const RecognitionResult r = recognize(g, fixture_model(), support::dialogue(inv(), "INIT REJECT"));
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].attachment == Attachment::Current);
  CHECK(r.events[0].reading == act("SUGGEST"));
  CHECK(r.utterances[1].acts == std::vector<ActId>{act("SUGGEST"), act("REJECT")});
  CHECK(std::find(r.trace.begin(), r.trace.end(), "REJECT -> SUGGEST REJECT !") != r.trace.end());
  CHECK(leaf_acts(r.tree) == std::vector<ActId>{act("INIT"), act("SUGGEST"), act("REJECT")});
}

TEST_CASE("recognizer: no compatible bridge falls back to a deviation") {
  const DialogueGrammar g = default_grammar(inv()).with_compatibility({});
  const RecognitionResult r = recognize(g, fixture_model(), support::dialogue(inv(), "INIT REJECT"));
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].kind == RepairKind::PlanFallback);
  CHECK(r.events[0].candidates.size() == 3);
  CHECK(r.trace.end()[-3] == "No compatible insertion found.");
  CHECK(r.trace.back() == "Unexpected dialogue act REJECT kept as a deviation");
  CHECK(r.utterances[1].acts == std::vector<ActId>{act("REJECT")});
  CHECK(r.tree.leaves()[1]->leaf == LeafKind::Deviation);
}

TEST_CASE("recognizer: deviations keep the expectation") {
  const auto g = default_grammar(inv());
  SUBCASE("single deviation, then the expected act") {
    const auto r = recognize(g, fixture_model(), support::dialogue(inv(), "INIT SUGGEST GREET REJECT"));
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == RepairKind::PlanFallback);
    CHECK(r.events[0].position == 2);
    CHECK(r.events[0].act == act("GREET"));
    const auto leaves = r.tree.leaves();
    REQUIRE(leaves.size() == 4);
    CHECK(leaves[3]->leaf == LeafKind::Expected);
  }
  SUBCASE("two deviations in a row") {
    const auto r = recognize(g, fixture_model(), support::dialogue(inv(), "INIT SUGGEST GREET GREET ACCEPT"));
    REQUIRE(r.events.size() == 2);
    CHECK(r.events[0].kind == RepairKind::PlanFallback);
    CHECK(r.events[1].kind == RepairKind::PlanFallback);
    CHECK(r.events[1].position == 3);
  }
  SUBCASE("deviation at the start") {
    const auto r = recognize(g, fixture_model(), support::dialogue(inv(), "ACCEPT INIT SUGGEST"));
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == RepairKind::PlanFallback);
    CHECK(r.events[0].position == 0);
  }
}

TEST_CASE("bridge_candidates") {
  const auto& m = fixture_model();
  const auto g = default_grammar(inv());
  const auto c = bridge_candidates(m, act("INIT"), act("REJECT"), g);
  CHECK(c == std::vector<BridgeCandidate>{
                 {act("SUGGEST"), 81326}, {act("REQUEST_COMMENT"), 37576}, {act("DELIBERATE"), 20572}});
  CHECK(bridge_candidates(m, act("INIT"), act("REJECT"), [](ActId) { return false; }).empty());
  // BYE never follows INIT in the fixture model.
  CHECK(bridge_candidates(m, act("INIT"), act("BYE"), [](ActId) { return true; }).empty());

  // Equal scores are ordered by act id.
  const ActInventory four = support::numbered_inventory(4);
  TrainOptions flat;
  flat.weights = InterpolationWeights{1, 0, 0};
  const NGramModel u = train_model(support::corpus(four, {"ACT_AA ACT_AB ACT_AC ACT_AD"}), flat);
  const auto ties = bridge_candidates(u, act_at(0), act_at(1), [](ActId) { return true; });
  REQUIRE(ties.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ties[i].act == act_at(i));
    CHECK(ties[i].score == 40000);
  }
}

TEST_CASE("recognizer: grammar derivations need no repair and keep their leaves") {
  const auto g = default_grammar(inv());
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const bool known = i % 2 == 0;
    std::vector<ActId> acts;
    expand(g, g.root(), DialogueContext{known}, rng, acts, 0);
    if (acts.empty()) continue;
    RecognizerOptions opt;
    opt.context.speakers_known = known;
    const auto r = recognize(g, fixture_model(), from_acts(acts), opt);
    CHECK(r.events.empty());
    CHECK(leaf_acts(r.tree) == acts);
    CHECK(acts_of(r.utterances) == acts);
  }
}

TEST_CASE("recognizer: arbitrary input is preserved and results are deterministic") {
  const auto g = default_grammar(inv()).with_compatibility(default_compatibility(inv()));
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, inv().size() - 1), len(1, 25);
  for (int i = 0; i < 300; ++i) {
    std::vector<ActId> acts(len(rng));
    for (auto& a : acts) a = act_at(pick(rng));
    const Dialogue d = from_acts(acts);
    const auto r = recognize(g, fixture_model(), d);
    // Removing added readings gives back the input.
    std::vector<ActId> kept;
    for (const TreeNode* n : r.tree.leaves())
      if (!n->added_reading) kept.push_back(n->act);
    CHECK(kept == acts);
    const auto again = recognize(g, fixture_model(), d);
    CHECK(again.trace == r.trace);
    CHECK(again.events == r.events);
    CHECK(again.tree.root == r.tree.root);
  }
}

TEST_CASE("recognizer: memory records completed update-memory operators") {
  const auto g = default_grammar(inv());
  const auto r = recognize(g, fixture_model(), support::dialogue(inv(), "INIT SUGGEST ACCEPT BYE"));
  bool negotiation = false, closing = false;
  for (const auto& m : r.memory) {
    if (m.op == "negotiation") {
      negotiation = true;
      CHECK(m.first_utterance == 0);
      CHECK(m.last_utterance == 2);
    }
    if (m.op == "closing") {
      closing = true;
      CHECK(m.first_utterance == 3);
    }
    CHECK(m.op != "exchange");  // no update-memory action
  }
  CHECK(negotiation);
  CHECK(closing);
  CHECK(r.memory.back().op == "dialogue");
}

TEST_CASE("recognizer: acts outside the inventory are rejected") {
  const auto g = default_grammar(inv());
  Recognizer r(g, fixture_model());
  CHECK_THROWS_AS(r.step({Speaker::A, {act_at(99)}, {}}), ValidationError);
}
