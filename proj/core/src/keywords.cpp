#include <algorithm>
#include <unordered_set>

#include "dialact/error.hpp"
#include "dialact/recognizer.hpp"

namespace dialact {

std::vector<KeywordPrediction> keywords_for_next(const NGramModel& model,
                                                 std::span<const ActElement> context,
                                                 const KeywordLexicon& lexicon, std::size_t k,
                                                 std::size_t budget, bool next_speaker_change) {
  if (k == 0) throw ValidationError("k must be positive");
  const auto tokens = encode(model.codec(), context);
  const auto predictions = predict_top_k(model, history_after(model, tokens), k, next_speaker_change);

  std::vector<KeywordPrediction> out;
  std::unordered_set<std::string> used;
  for (const Prediction& p : predictions) {
    const auto& words = lexicon.words(p.act, model.inventory());
    KeywordPrediction entry{p.act, p.probability, {}};
    for (const std::string& w : words) {
      // A word already handed out does not count against the budget again.
      if (used.count(w)) {
        entry.keywords.push_back(w);
      } else if (used.size() < budget) {
        used.insert(w);
        entry.keywords.push_back(w);
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<KeywordPrediction> keywords_for_next(const NGramModel& model, const Recognizer& state,
                                                 const KeywordLexicon& lexicon, std::size_t k,
                                                 std::size_t budget, bool next_speaker_change) {
  const auto context = state.context();
  return keywords_for_next(model, context, lexicon, k, budget, next_speaker_change);
}

}  // namespace dialact
