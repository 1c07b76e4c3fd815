#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "dialact/corpus.hpp"
#include "dialact/ngram.hpp"

namespace dialact {

struct GenerateOptions {
  std::size_t dialogues = 100;
  /// Before every sampled act, anytime acts are inserted while a uniform
  /// draw falls below this rate, so they make up about `rate` of all acts.
  double deviation_rate = 0.0;
  std::uint64_t seed = 20240601;
  std::size_t max_length = 60;  // sampled (non-anytime) acts per dialogue
  std::string id_prefix = "gen";
};

/// Samples dialogues from `source`'s interpolated trigram distribution
/// restricted to non-anytime acts and END. Speaker-conditioned sources decide
/// speaker turns themselves; otherwise speakers alternate. Deterministic for a
/// fixed seed. Throws ValidationError on a rate outside [0, 1), zero
/// dialogues, or a rate > 0 with no anytime acts in the inventory.
Corpus generate_corpus(const NGramModel& source, const GenerateOptions& options);

}  // namespace dialact
