#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialact/corpus.hpp"
#include "dialact/ngram.hpp"

namespace dialact {

struct HitRateRow {
  std::size_t k = 0;
  std::size_t hits = 0;
  std::size_t total = 0;

  /// 100 * hits / total; 0 for an empty row.
  double percent() const noexcept;

  friend bool operator==(const HitRateRow&, const HitRateRow&) = default;
};

/// Top-k hit rates of one experiment, one row per k (ascending).
struct HitRateReport {
  std::string experiment;
  std::vector<HitRateRow> rows;

  std::size_t total() const noexcept { return rows.empty() ? 0 : rows.front().total; }
  const HitRateRow& row(std::size_t k) const;

  friend bool operator==(const HitRateReport&, const HitRateReport&) = default;
};

struct EvaluationOptions {
  /// Anytime acts are neither scored nor entered into the context.
  bool skip_deviation_acts = false;
  /// Worker threads for evaluation; results do not depend on it.
  unsigned threads = 1;
};

/// Teacher-forced top-k evaluation: every act of every test dialogue is
/// predicted from the true preceding acts and counts as a hit for each k at
/// which it is among the top-k predictions. END transitions are not scored.
/// Speaker-conditioned models are given the true speaker-change bit of the
/// act being predicted.
HitRateReport hit_rate(const NGramModel& model, const Corpus& test, std::span<const std::size_t> ks,
                       const EvaluationOptions& options = {}, std::string experiment = {});

/// Rows for k = 1..max_k.
HitRateReport hit_rate(const NGramModel& model, const Corpus& test, std::size_t max_k,
                       const EvaluationOptions& options = {}, std::string experiment = {});

struct DialogueHitRate {
  std::string id;
  std::size_t hits = 0;
  std::size_t total = 0;

  double percent() const noexcept;
};

struct PerDialogueReport {
  std::size_t k = 0;
  std::vector<DialogueHitRate> dialogues;  // corpus order
};

PerDialogueReport per_dialogue_hit_rates(const NGramModel& model, const Corpus& test, std::size_t k,
                                         const EvaluationOptions& options = {});

struct ExperimentVariant {
  std::string label;
  bool skip_deviation_acts = false;
  bool speaker_conditioned = false;
};

struct ExperimentConfig {
  Corpus train;
  Corpus test;
  std::vector<std::size_t> ks{1, 2, 3};
  std::vector<ExperimentVariant> variants;
  double held_out_fraction = 0.1;
  std::uint64_t seed = 20240601;
  /// Fixed weights instead of estimating them on a held-out split.
  std::optional<InterpolationWeights> weights;
  unsigned threads = 1;
};

/// Trains one model per variant on `train` and reports its hit rates on `test`.
std::vector<HitRateReport> run_experiment(const ExperimentConfig& config);

/// `experiment<TAB>k<TAB>hits<TAB>total<TAB>percent`, percent to 2 decimals.
void write_report_tsv(std::ostream& out, std::span<const HitRateReport> reports);
/// `dialogue<TAB>k<TAB>hits<TAB>total<TAB>percent`.
void write_per_dialogue_tsv(std::ostream& out, const PerDialogueReport& report);
/// Human-readable table: a `Pred.` column of k values and one percentage
/// column per report.
std::string format_table(std::span<const HitRateReport> reports);

}  // namespace dialact
