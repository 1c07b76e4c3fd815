#include "dialact/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <thread>

#include "dialact/error.hpp"

namespace dialact {

namespace {

std::string percent_text(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", percent);
  return buf;
}

// Prediction rank of every scored act of one dialogue.
std::vector<std::size_t> scored_ranks(const NGramModel& model, const Dialogue& dialogue, bool skip) {
  std::vector<ActElement> elements = flatten(dialogue);
  if (skip) {
    const ActInventory& inv = model.inventory();
    std::erase_if(elements, [&](const ActElement& e) { return inv.is_anytime(e.act); });
    recompute_speaker_changes(elements);
  }
  std::vector<std::size_t> ranks;
  ranks.reserve(elements.size());
  History h = model.start();
  for (const auto& e : elements) {
    ranks.push_back(prediction_rank(model, h, e.act, e.speaker_change));
    h = model.advance(h, model.token(e.act, e.speaker_change));
  }
  return ranks;
}

// rank_histogram[r] = number of scored positions whose true act had rank r.
std::vector<std::size_t> rank_histogram(const NGramModel& model, const Corpus& test, bool skip,
                                        unsigned threads) {
  const std::size_t n_acts = model.inventory().size();
  const std::size_t n = test.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<std::vector<std::size_t>> partial(threads, std::vector<std::size_t>(n_acts, 0));
  auto work = [&](unsigned worker) {
    for (std::size_t d = worker; d < n; d += threads)
      for (std::size_t r : scored_ranks(model, test.dialogues()[d], skip)) ++partial[worker][r];
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  std::vector<std::size_t> hist(n_acts, 0);
  for (const auto& p : partial)
    for (std::size_t r = 0; r < n_acts; ++r) hist[r] += p[r];
  return hist;
}

}  // namespace

double HitRateRow::percent() const noexcept {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

double DialogueHitRate::percent() const noexcept {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

const HitRateRow& HitRateReport::row(std::size_t k) const {
  for (const auto& r : rows)
    if (r.k == k) return r;
  throw ValidationError("report has no row for k = " + std::to_string(k));
}

HitRateReport hit_rate(const NGramModel& model, const Corpus& test, std::span<const std::size_t> ks,
                       const EvaluationOptions& options, std::string experiment) {
  if (test.empty()) throw ValidationError("hit-rate evaluation needs a non-empty test corpus");
  std::vector<std::size_t> sorted(ks.begin(), ks.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.empty() || sorted.front() == 0) throw ValidationError("k must be positive");

  const auto hist = rank_histogram(model, test, options.skip_deviation_acts, options.threads);
  std::size_t total = 0;
  for (auto c : hist) total += c;

  HitRateReport report{std::move(experiment), {}};
  for (std::size_t k : sorted) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, hist.size()); ++r) hits += hist[r];
    report.rows.push_back({k, hits, total});
  }
  return report;
}

HitRateReport hit_rate(const NGramModel& model, const Corpus& test, std::size_t max_k,
                       const EvaluationOptions& options, std::string experiment) {
  if (max_k == 0) throw ValidationError("k must be positive");
  std::vector<std::size_t> ks(max_k);
  for (std::size_t i = 0; i < max_k; ++i) ks[i] = i + 1;
  return hit_rate(model, test, ks, options, std::move(experiment));
}

PerDialogueReport per_dialogue_hit_rates(const NGramModel& model, const Corpus& test, std::size_t k,
                                         const EvaluationOptions& options) {
  if (test.empty()) throw ValidationError("hit-rate evaluation needs a non-empty test corpus");
  if (k == 0) throw ValidationError("k must be positive");
  PerDialogueReport report{k, {}};
  for (const auto& d : test.dialogues()) {
    DialogueHitRate entry{d.id, 0, 0};
    for (std::size_t r : scored_ranks(model, d, options.skip_deviation_acts)) {
      ++entry.total;
      if (r < k) ++entry.hits;
    }
    report.dialogues.push_back(std::move(entry));
  }
  return report;
}

std::vector<HitRateReport> run_experiment(const ExperimentConfig& config) {
  if (config.variants.empty()) throw ValidationError("experiment has no variants");
  std::vector<HitRateReport> reports;
  for (const auto& variant : config.variants) {
    TrainOptions train;
    train.speaker_conditioned = variant.speaker_conditioned;
    train.held_out_fraction = config.held_out_fraction;
    train.seed = config.seed;
    train.weights = config.weights;
    const NGramModel model = train_model(config.train, train);
    EvaluationOptions eval{variant.skip_deviation_acts, config.threads};
    reports.push_back(hit_rate(model, config.test, config.ks, eval, variant.label));
  }
  return reports;
}

void write_report_tsv(std::ostream& out, std::span<const HitRateReport> reports) {
  for (const auto& report : reports)
    for (const auto& row : report.rows)
      out << report.experiment << '\t' << row.k << '\t' << row.hits << '\t' << row.total << '\t'
          << percent_text(row.percent()) << '\n';
}

void write_per_dialogue_tsv(std::ostream& out, const PerDialogueReport& report) {
  for (const auto& d : report.dialogues)
    out << d.id << '\t' << report.k << '\t' << d.hits << '\t' << d.total << '\t'
        << percent_text(d.percent()) << '\n';
}

std::string format_table(std::span<const HitRateReport> reports) {
  std::vector<std::size_t> ks;
  for (const auto& r : reports)
    for (const auto& row : r.rows) ks.push_back(row.k);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  std::ostringstream out;
  out << "Pred.";
  for (const auto& r : reports) out << '\t' << r.experiment;
  out << '\n';
  for (std::size_t k : ks) {
    out << k;
    for (const auto& r : reports) {
      const auto it = std::find_if(r.rows.begin(), r.rows.end(),
                                   [k](const HitRateRow& row) { return row.k == k; });
      out << '\t' << (it == r.rows.end() ? std::string("-") : percent_text(it->percent()) + " %");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dialact
