#include <doctest.h>

#include <sstream>

#include "dialact/error.hpp"
#include "dialact/evaluator.hpp"
#include "support/support.hpp"

using namespace dialact;

TEST_CASE("hit_rate: deterministic source is predicted perfectly") {
  const ActInventory inv = support::numbered_inventory(4);
  std::vector<std::string> specs(10, "ACT_AA ACT_AB ACT_AC ACT_AD ACT_AA ACT_AB ACT_AC ACT_AD");
  const Corpus c = support::corpus(inv, specs);
  TrainOptions opt;
  opt.weights = InterpolationWeights{0.0, 0.1, 0.9};
  const NGramModel m = train_model(c, opt);
  const HitRateReport r = hit_rate(m, c, 3);
  CHECK(r.row(1).percent() == 100.0);
  CHECK(r.total() == c.act_count());
  CHECK(r.rows.size() == 3);
}

TEST_CASE("hit_rate: uniform random test approaches k/K") {
  const std::size_t K = 8;
  const ActInventory inv = support::numbered_inventory(K);
  const NGramModel m = train_model(support::TrigramSource::random(K, 41).sample(inv, 60, 42));
  const Corpus test = support::TrigramSource::uniform(K, 0.01).sample(inv, 250, 43, 40, 40);
  REQUIRE(test.act_count() == 10000);
  const HitRateReport r = hit_rate(m, test, K);
  for (std::size_t k = 1; k <= K; ++k)
    CHECK(std::abs(r.row(k).percent() - 100.0 * static_cast<double>(k) / K) <= 3.0);
}

TEST_CASE("hit_rate: rows are monotone and bounded; threads do not change results") {
  const ActInventory inv = support::numbered_inventory(9, 2);
  const auto source = support::TrigramSource::random(9, 51);
  const Corpus train = source.sample(inv, 50, 52);
  const Corpus test = source.sample(inv, 30, 53, 1, 40, "t");
  const NGramModel m = train_model(train);
  for (bool skip : {false, true}) {
    const HitRateReport one = hit_rate(m, test, 9, {skip, 1});
    const HitRateReport four = hit_rate(m, test, 9, {skip, 4});
    CHECK(one == four);
    for (std::size_t i = 1; i < one.rows.size(); ++i) CHECK(one.rows[i].hits >= one.rows[i - 1].hits);
    CHECK(one.row(9).percent() == 100.0);
  }
  const std::array<std::size_t, 1> zero{0};
  CHECK_THROWS_AS(hit_rate(m, test, zero), ValidationError);
  CHECK_THROWS_AS(hit_rate(m, Corpus(inv, {}), 3), ValidationError);
}

TEST_CASE("hit_rate: skipping deviation acts leaves them out of the denominator") {
  const ActInventory inv = default_inventory();
  const Corpus test = support::corpus(inv, {"INIT DELIBERATE SUGGEST CLARIFY_QUERY CLARIFY_ANSWER ACCEPT", "INIT SUGGEST"});
  const NGramModel m = train_model(support::corpus(inv, {"INIT SUGGEST ACCEPT", "INIT SUGGEST REJECT"}));
  CHECK(hit_rate(m, test, 1, {true, 1}).total() == 5);
  CHECK(hit_rate(m, test, 1, {false, 1}).total() == 8);
}

TEST_CASE("per-dialogue rates: copies agree and the weighted mean is the aggregate") {
  const ActInventory inv = support::numbered_inventory(6);
  const auto source = support::TrigramSource::random(6, 61);
  const NGramModel m = train_model(source.sample(inv, 40, 62));
  Corpus test = source.sample(inv, 12, 63, 1, 40, "t");
  std::vector<Dialogue> ds = test.dialogues();
  Dialogue copy = ds.front();
  copy.id = "copy";
  ds.push_back(copy);
  test = Corpus(inv, ds);

  const PerDialogueReport per = per_dialogue_hit_rates(m, test, 3);
  REQUIRE(per.dialogues.size() == test.size());
  CHECK(per.dialogues.front().percent() == per.dialogues.back().percent());
  double weighted = 0, acts = 0;
  for (const auto& d : per.dialogues) {
    weighted += d.percent() * static_cast<double>(d.total);
    acts += static_cast<double>(d.total);
    CHECK(d.percent() >= 0.0);
    CHECK(d.percent() <= 100.0);
  }
  CHECK(std::abs(weighted / acts - hit_rate(m, test, 3).row(3).percent()) < 1e-9);
}

TEST_CASE("run_experiment: report shape, formats and determinism") {
  const ActInventory inv = support::numbered_inventory(6, 1);
  const auto source = support::TrigramSource::random(6, 71);
  ExperimentConfig c;
  c.train = source.sample(inv, 40, 72);
  c.test = source.sample(inv, 10, 73, 1, 40, "t");
  c.variants = {{"all", false, false}, {"main", true, false}, {"speaker", false, true}};
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  REQUIRE(a.size() == 3);
  CHECK(a == b);
  for (const auto& r : a) CHECK(r.rows.size() == 3);

  std::ostringstream ta, tb;
  write_report_tsv(ta, a);
  write_report_tsv(tb, b);
  CHECK(ta.str() == tb.str());
  std::istringstream lines(ta.str());
  std::string first;
  std::getline(lines, first);
  const auto& row = a[0].rows[0];
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.2f", row.percent());
  CHECK(first == "all\t1\t" + std::to_string(row.hits) + "\t" + std::to_string(row.total) + "\t" + pct);

  const std::string table = format_table(a);
  CHECK(table.rfind("Pred.\tall\tmain\tspeaker\n1\t", 0) == 0);
  CHECK(table.find(" %") != std::string::npos);

  ExperimentConfig none = c;
  none.variants.clear();
  CHECK_THROWS_AS(run_experiment(none), ValidationError);
}
