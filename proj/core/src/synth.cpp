#include "dialact/synth.hpp"

#include <random>
#include <vector>

#include "dialact/error.hpp"

namespace dialact {

Corpus generate_corpus(const NGramModel& source, const GenerateOptions& options) {
  const ActInventory& inv = source.inventory();
  if (!(options.deviation_rate >= 0.0 && options.deviation_rate < 1.0))
    throw ValidationError("deviation rate must be in [0, 1)");
  if (options.dialogues == 0) throw ValidationError("number of dialogues must be positive");
  if (options.max_length == 0) throw ValidationError("maximum dialogue length must be positive");
  const std::vector<ActId> anytime = inv.anytime_acts();
  if (options.deviation_rate > 0.0 && anytime.empty())
    throw ValidationError("deviation rate > 0 needs anytime acts in the inventory");

  const TokenCodec& codec = source.codec();
  std::vector<Token> outcomes;
  for (Token t = 0; t < codec.act_tokens(); ++t)
    if (!inv.is_anytime(codec.act(t))) outcomes.push_back(t);
  outcomes.push_back(codec.end());

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_anytime(0, anytime.empty() ? 0 : anytime.size() - 1);
  std::vector<double> weights(outcomes.size());

  std::vector<Dialogue> dialogues;
  dialogues.reserve(options.dialogues);
  for (std::size_t d = 0; d < options.dialogues; ++d) {
    Dialogue dialogue;
    dialogue.id = options.id_prefix + std::to_string(d + 1);
    History h = source.start();
    Speaker speaker = Speaker::A;
    for (std::size_t n = 0; n < options.max_length; ++n) {
      for (std::size_t i = 0; i < outcomes.size(); ++i) weights[i] = source.prob(outcomes[i], h);
      // Force a non-empty dialogue when END would otherwise come first.
      if (n == 0) weights.back() = 0.0;
      double total = 0.0;
      for (double w : weights) total += w;
      if (total <= 0.0) break;
      std::discrete_distribution<std::size_t> next(weights.begin(), weights.end());
      const Token t = outcomes[next(rng)];
      if (t == codec.end()) break;

      if (n > 0) {
        const bool change = codec.speaker_conditioned() ? codec.speaker_change(t) : true;
        if (change) speaker = speaker == Speaker::A ? Speaker::B : Speaker::A;
      }
      while (options.deviation_rate > 0.0 && unit(rng) < options.deviation_rate)
        dialogue.utterances.push_back({speaker, {anytime[pick_anytime(rng)]}, {}});
      dialogue.utterances.push_back({speaker, {codec.act(t)}, {}});
      h = source.advance(h, t);
    }
    if (dialogue.utterances.empty()) {
      // Degenerate source: fall back to one act so the corpus stays valid.
      dialogue.utterances.push_back({speaker, {codec.act(outcomes.front())}, {}});
    }
    dialogues.push_back(std::move(dialogue));
  }
  return Corpus(inv, std::move(dialogues));
}

}  // namespace dialact
