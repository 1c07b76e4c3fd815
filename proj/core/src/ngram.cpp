#include "dialact/ngram.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

#include "dialact/error.hpp"

namespace dialact {

namespace {

constexpr int kTokenBits = 20;
constexpr std::uint64_t kTokenMask = (std::uint64_t{1} << kTokenBits) - 1;

std::uint64_t pack(Token a, Token b) { return (std::uint64_t{a} << kTokenBits) | b; }
std::uint64_t pack(Token a, Token b, Token c) {
  return (std::uint64_t{a} << (2 * kTokenBits)) | (std::uint64_t{b} << kTokenBits) | c;
}

std::uint64_t lookup(const std::unordered_map<std::uint64_t, std::uint64_t>& map,
                     std::uint64_t key) {
  const auto it = map.find(key);
  return it == map.end() ? 0 : it->second;
}

}  // namespace

// ---------------------------------------------------------------------------
// TokenCodec

TokenCodec::TokenCodec(std::size_t act_count, bool speaker_conditioned)
    : act_count_(act_count), conditioned_(speaker_conditioned) {
  if (symbol_count() > kTokenMask) throw ValidationError("inventory too large for token packing");
}

Token TokenCodec::encode(ActId act, bool speaker_change) const noexcept {
  const auto a = static_cast<Token>(index_of(act));
  return conditioned_ && speaker_change ? static_cast<Token>(act_count_) + a : a;
}

ActId TokenCodec::act(Token t) const noexcept {
  assert(is_act(t));
  return act_at(t >= act_count_ ? t - act_count_ : t);
}

// ---------------------------------------------------------------------------
// CountTable

CountTable::CountTable(TokenCodec codec)
    : codec_(codec), unigrams_(codec.outcome_count(), 0), contexts1_(codec.symbol_count(), 0) {}

void CountTable::add(History h, Token target, std::uint64_t times) {
  assert(target < codec_.outcome_count());
  unigrams_[target] += times;
  contexts1_[h.newer] += times;
  bigrams_[pack(h.newer, target)] += times;
  trigrams_[pack(h.older, h.newer, target)] += times;
  contexts2_[pack(h.older, h.newer)] += times;
  total_ += times;
}

std::uint64_t CountTable::unigram(Token target) const {
  return target < unigrams_.size() ? unigrams_[target] : 0;
}

std::uint64_t CountTable::bigram(Token prev, Token target) const {
  return lookup(bigrams_, pack(prev, target));
}

std::uint64_t CountTable::trigram(Token older, Token prev, Token target) const {
  return lookup(trigrams_, pack(older, prev, target));
}

std::uint64_t CountTable::context(Token prev) const {
  return prev < contexts1_.size() ? contexts1_[prev] : 0;
}

std::uint64_t CountTable::context(Token older, Token prev) const {
  return lookup(contexts2_, pack(older, prev));
}

std::vector<CountTable::Gram> CountTable::grams(int order) const {
  std::vector<Gram> out;
  switch (order) {
    case 1:
      for (std::size_t t = 0; t < unigrams_.size(); ++t)
        if (unigrams_[t]) out.push_back({{0, 0, static_cast<Token>(t)}, unigrams_[t]});
      break;
    case 2:
      for (const auto& [key, n] : bigrams_)
        if (n)
          out.push_back({{0, static_cast<Token>(key >> kTokenBits), static_cast<Token>(key & kTokenMask)},
                         n});
      break;
    case 3:
      for (const auto& [key, n] : trigrams_)
        if (n)
          out.push_back({{static_cast<Token>(key >> (2 * kTokenBits)),
                          static_cast<Token>((key >> kTokenBits) & kTokenMask),
                          static_cast<Token>(key & kTokenMask)},
                         n});
      break;
    default:
      throw ValidationError("n-gram order must be 1, 2 or 3");
  }
  std::sort(out.begin(), out.end(),
            [](const Gram& a, const Gram& b) { return a.tokens < b.tokens; });
  return out;
}

CountTable CountTable::from_grams(TokenCodec codec, std::span<const Gram> unigrams,
                                  std::span<const Gram> bigrams, std::span<const Gram> trigrams) {
  CountTable t(codec);
  auto check = [&](Token tok) {
    if (tok >= codec.symbol_count()) throw ValidationError("token out of range");
  };
  for (const auto& g : unigrams) {
    check(g.tokens[2]);
    t.unigrams_.at(g.tokens[2]) += g.count;
    t.total_ += g.count;
  }
  for (const auto& g : bigrams) {
    check(g.tokens[1]);
    check(g.tokens[2]);
    t.bigrams_[pack(g.tokens[1], g.tokens[2])] += g.count;
    t.contexts1_[g.tokens[1]] += g.count;
  }
  for (const auto& g : trigrams) {
    for (Token tok : g.tokens) check(tok);
    t.trigrams_[pack(g.tokens[0], g.tokens[1], g.tokens[2])] += g.count;
    t.contexts2_[pack(g.tokens[0], g.tokens[1])] += g.count;
  }
  return t;
}

bool CountTable::consistent() const {
  std::uint64_t sum = 0;
  for (auto n : unigrams_) sum += n;
  if (sum != total_) return false;
  for (const auto& g : grams(3)) {
    const auto [w, x, y] = g.tokens;
    if (g.count > bigram(x, y) || g.count > context(w, x)) return false;
  }
  for (const auto& g : grams(2)) {
    if (g.count > unigram(g.tokens[2]) || g.count > context(g.tokens[1])) return false;
  }
  return true;
}

bool operator==(const CountTable& a, const CountTable& b) {
  auto same = [](const std::vector<CountTable::Gram>& x, const std::vector<CountTable::Gram>& y) {
    return std::equal(x.begin(), x.end(), y.begin(), y.end(),
                      [](const CountTable::Gram& g, const CountTable::Gram& h) {
                        return g.tokens == h.tokens && g.count == h.count;
                      });
  };
  return a.codec_ == b.codec_ && a.total_ == b.total_ && a.unigrams_ == b.unigrams_ &&
         same(a.grams(2), b.grams(2)) && same(a.grams(3), b.grams(3));
}

// ---------------------------------------------------------------------------
// Training and relative frequencies

std::vector<Token> encode(const TokenCodec& codec, std::span<const ActElement> elements) {
  std::vector<Token> out;
  out.reserve(elements.size());
  for (const auto& e : elements) out.push_back(codec.encode(e.act, e.speaker_change));
  return out;
}

std::vector<Token> encode(const TokenCodec& codec, const Dialogue& dialogue) {
  const auto elements = flatten(dialogue);
  return encode(codec, elements);
}

CountTable train_counts(const Corpus& train, bool speaker_conditioned) {
  if (train.empty()) throw ValidationError("cannot train on an empty corpus");
  const TokenCodec codec(train.inventory().size(), speaker_conditioned);
  CountTable counts(codec);
  for (const auto& dialogue : train.dialogues()) {
    History h{codec.begin(), codec.begin()};
    for (Token t : encode(codec, dialogue)) {
      counts.add(h, t);
      h = {h.newer, t};
    }
    counts.add(h, codec.end());
  }
  return counts;
}

double relative_frequency(const CountTable& counts, Token target, std::span<const Token> history) {
  std::uint64_t num = 0, den = 0;
  switch (history.size()) {
    case 0:
      num = counts.unigram(target);
      den = counts.total();
      break;
    case 1:
      num = counts.bigram(history[0], target);
      den = counts.context(history[0]);
      break;
    case 2:
      num = counts.trigram(history[0], history[1], target);
      den = counts.context(history[0], history[1]);
      break;
    default:
      throw ValidationError("history length must be 0, 1 or 2");
  }
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// ---------------------------------------------------------------------------
// Interpolated model

void InterpolationWeights::validate() const {
  for (double q : {q1, q2, q3})
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("interpolation weight outside [0, 1]");
  if (std::abs(q1 + q2 + q3 - 1.0) > 1e-12)
    throw ValidationError("interpolation weights must sum to 1");
}

NGramModel::NGramModel(ActInventory inventory, CountTable counts, InterpolationWeights weights)
    : inventory_(std::move(inventory)), counts_(std::move(counts)), weights_(weights) {
  weights_.validate();
  if (counts_.codec().act_count() != inventory_.size())
    throw ValidationError("count table does not match the inventory size");
  if (counts_.total() == 0) throw ValidationError("count table is empty");
}

std::array<double, 3> NGramModel::components(Token target, History h) const {
  const double total = static_cast<double>(counts_.total());
  const double f1 = static_cast<double>(counts_.unigram(target)) / total;

  const std::uint64_t c1 = counts_.context(h.newer);
  const double f2 =
      c1 == 0 ? f1
              : static_cast<double>(counts_.bigram(h.newer, target)) / static_cast<double>(c1);

  const std::uint64_t c2 = counts_.context(h.older, h.newer);
  const double f3 = c2 == 0 ? f2
                            : static_cast<double>(counts_.trigram(h.older, h.newer, target)) /
                                  static_cast<double>(c2);
  return {f1, f2, f3};
}

double NGramModel::prob(Token target, History h) const {
  const auto f = components(target, h);
  return weights_.q1 * f[0] + weights_.q2 * f[1] + weights_.q3 * f[2];
}

double NGramModel::bridge_prob(Token target, Token prev, bool raw) const {
  const std::uint64_t c = counts_.context(prev);
  const double f2 =
      c == 0 ? 0.0 : static_cast<double>(counts_.bigram(prev, target)) / static_cast<double>(c);
  const double lower = weights_.q1 + weights_.q2;
  if (raw || lower <= 0.0) return f2;
  const auto f = components(target, History{codec().begin(), prev});
  return (weights_.q1 * f[0] + weights_.q2 * f[1]) / lower;
}

double smoothed_prob(const NGramModel& model, ActId act, History h, bool speaker_change) {
  if (!model.inventory().contains(act)) throw ValidationError("act outside the model inventory");
  return model.prob(model.token(act, speaker_change), h);
}

double sequence_log_prob(const NGramModel& model, const Dialogue& dialogue) {
  History h = model.start();
  double lp = 0.0;
  auto factor = [&](Token t) {
    const double p = model.prob(t, h);
    lp += p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    h = model.advance(h, t);
  };
  for (Token t : encode(model.codec(), dialogue)) factor(t);
  factor(model.codec().end());
  return lp;
}

PerplexityResult perplexity(const NGramModel& model, const Corpus& test) {
  if (test.empty()) throw ValidationError("perplexity needs a non-empty test corpus");
  PerplexityResult r;
  for (const auto& d : test.dialogues()) {
    History h = model.start();
    auto tokens = encode(model.codec(), d);
    tokens.push_back(model.codec().end());
    for (Token t : tokens) {
      const double p = model.prob(t, h);
      if (p > 0.0) {
        r.log_prob += std::log(p);
      } else {
        ++r.zero_probability_events;
      }
      ++r.events;
      h = model.advance(h, t);
    }
  }
  if (!r.finite()) {
    r.log_prob = -std::numeric_limits<double>::infinity();
    r.value = std::numeric_limits<double>::infinity();
  } else {
    r.value = std::exp(-r.log_prob / static_cast<double>(r.events));
  }
  return r;
}

namespace {

// Strict weak order of predict_top_k: higher probability first, then lower id.
bool ranks_before(double pa, ActId a, double pb, ActId b) {
  return pa > pb || (pa == pb && index_of(a) < index_of(b));
}

}  // namespace

std::vector<Prediction> predict_top_k(const NGramModel& model, History h, std::size_t k,
                                      bool next_speaker_change) {
  const std::size_t n = model.inventory().size();
  std::vector<Prediction> all;
  all.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    all.push_back({act_at(i), model.prob(model.token(act_at(i), next_speaker_change), h)});
  k = std::min(k, n);
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const Prediction& a, const Prediction& b) {
                      return ranks_before(a.probability, a.act, b.probability, b.act);
                    });
  all.resize(k);
  return all;
}

std::size_t prediction_rank(const NGramModel& model, History h, ActId act, bool next_speaker_change) {
  const double p = model.prob(model.token(act, next_speaker_change), h);
  std::size_t rank = 0;
  for (std::size_t i = 0; i < model.inventory().size(); ++i) {
    if (act_at(i) == act) continue;
    const double q = model.prob(model.token(act_at(i), next_speaker_change), h);
    if (ranks_before(q, act_at(i), p, act)) ++rank;
  }
  return rank;
}

History history_after(const NGramModel& model, std::span<const Token> tokens) {
  History h = model.start();
  for (Token t : tokens) h = model.advance(h, t);
  return h;
}

// ---------------------------------------------------------------------------
// Deleted interpolation

EmResult estimate_weights(const CountTable& counts, const Corpus& held_out, EmOptions options) {
  if (held_out.empty()) throw EstimationError("held-out corpus is empty");
  if (counts.total() == 0) throw EstimationError("count table is empty");

  // The component triples do not depend on q; collect them once.
  const NGramModel probe(held_out.inventory(), counts, InterpolationWeights{});
  std::vector<std::array<double, 3>> comps;
  EmResult result;
  for (const auto& d : held_out.dialogues()) {
    History h = probe.start();
    auto tokens = encode(counts.codec(), d);
    tokens.push_back(counts.codec().end());
    for (Token t : tokens) {
      const auto f = probe.components(t, h);
      if (f[0] > 0.0 || f[1] > 0.0 || f[2] > 0.0) {
        comps.push_back(f);
      } else {
        ++result.skipped_events;
      }
      h = probe.advance(h, t);
    }
  }
  if (comps.empty())
    throw EstimationError("no held-out event has non-zero probability under the training counts");
  result.events = comps.size();

  std::array<double, 3> q{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  auto log_likelihood = [&](const std::array<double, 3>& w) {
    double ll = 0.0;
    for (const auto& f : comps) {
      const double p = w[0] * f[0] + w[1] * f[1] + w[2] * f[2];
      ll += p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
    return ll;
  };

  double ll = log_likelihood(q);
  result.log_likelihood.push_back(ll);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    std::array<double, 3> expected{0.0, 0.0, 0.0};
    for (const auto& f : comps) {
      const double p = q[0] * f[0] + q[1] * f[1] + q[2] * f[2];
      if (p <= 0.0) continue;
      for (int i = 0; i < 3; ++i) expected[i] += q[i] * f[i] / p;
    }
    const double norm = expected[0] + expected[1] + expected[2];
    std::array<double, 3> next{expected[0] / norm, expected[1] / norm, expected[2] / norm};
    // Renormalize so the stored triple sums to 1 as exactly as doubles allow.
    next[2] = std::max(0.0, 1.0 - next[0] - next[1]);

    const double next_ll = log_likelihood(next);
    q = next;
    result.log_likelihood.push_back(next_ll);
    ++result.iterations;
    const double gain = next_ll - ll;
    ll = next_ll;
    if (gain < options.tolerance) break;
  }
  result.weights = {q[0], q[1], q[2]};
  return result;
}

NGramModel train_model(const Corpus& train, const TrainOptions& options) {
  if (train.empty()) throw ValidationError("cannot train on an empty corpus");
  InterpolationWeights weights;
  if (options.weights) {
    weights = *options.weights;
  } else {
    auto [fit, held] = split_corpus(train, options.held_out_fraction, options.seed);
    const CountTable fit_counts = train_counts(fit, options.speaker_conditioned);
    weights = estimate_weights(fit_counts, held, options.em).weights;
  }
  return NGramModel(train.inventory(), train_counts(train, options.speaker_conditioned), weights);
}

}  // namespace dialact
