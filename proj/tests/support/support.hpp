#pragma once

// Test-only builders and reference implementations. The oracles here are
// written against the textbook definitions (plain maps, direct sums) and
// share no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dialact/corpus.hpp"
#include "dialact/grammar.hpp"
#include "dialact/ngram.hpp"

#ifndef DIALACT_TEST_DATA_DIR
#error "DIALACT_TEST_DATA_DIR must be defined"
#endif

namespace support {

using namespace dialact;

inline std::string data_path(const std::string& rel) { return std::string(DIALACT_TEST_DATA_DIR) + "/" + rel; }

/// Acts named ACT_AA, ACT_AB, ...; the last `anytime` of them are anytime acts.
inline ActInventory numbered_inventory(std::size_t k, std::size_t anytime = 0) {
  std::vector<ActInventory::Entry> entries;
  for (std::size_t i = 0; i < k; ++i) {
    std::string name = "ACT_";
    name += static_cast<char>('A' + i / 26);
    name += static_cast<char>('A' + i % 26);
    entries.push_back({name, i + anytime >= k, false});
  }
  return ActInventory(entries);
}

inline ActInventory appointment_inventory() { return default_inventory(); }

/// "INIT SUGGEST B:REJECT" -> one utterance per token; a leading A:/B: sets the
/// speaker, otherwise speakers alternate starting with A. "X+Y" is one
/// utterance with two readings.
inline Dialogue dialogue(const ActInventory& inv, const std::string& spec, const std::string& id = "d") {
  Dialogue d;
  d.id = id;
  std::istringstream in(spec);
  Speaker next = Speaker::A;
  for (std::string tok; in >> tok;) {
    Speaker s = next;
    if (tok.size() > 2 && tok[1] == ':') {
      s = tok[0] == 'A' ? Speaker::A : Speaker::B;
      tok = tok.substr(2);
    }
    Utterance u{s, {}, {}};
    std::size_t start = 0;
    while (true) {
      const auto plus = tok.find('+', start);
      u.acts.push_back(inv.at(tok.substr(start, plus - start)));
      if (plus == std::string::npos) break;
      start = plus + 1;
    }
    d.utterances.push_back(u);
    next = s == Speaker::A ? Speaker::B : Speaker::A;
  }
  return d;
}

inline Corpus corpus(const ActInventory& inv, const std::vector<std::string>& specs) {
  std::vector<Dialogue> ds;
  for (std::size_t i = 0; i < specs.size(); ++i) ds.push_back(dialogue(inv, specs[i], "d" + std::to_string(i + 1)));
  return Corpus(inv, ds);
}

// ---------------------------------------------------------------------------
// Reference n-gram counts and interpolation.

constexpr int kBegin = -1;
constexpr int kEnd = -2;

/// Symbols of a dialogue as (change-bit, act) codes: act + K * bit.
inline std::vector<int> symbols(const Dialogue& d, std::size_t k, bool conditioned) {
  std::vector<int> out;
  for (std::size_t i = 0; i < d.utterances.size(); ++i) {
    const auto& u = d.utterances[i];
    for (std::size_t j = 0; j < u.acts.size(); ++j) {
      const bool change = conditioned && i > 0 && j == 0 && u.speaker != d.utterances[i - 1].speaker;
      out.push_back(static_cast<int>(index_of(u.acts[j]) + (change ? k : 0)));
    }
  }
  return out;
}

struct ReferenceCounts {
  std::map<std::vector<int>, double> grams;  // key: context... + target
  std::map<std::vector<int>, double> contexts;
  double total = 0;

  void add_dialogue(const std::vector<int>& seq) {
    std::vector<int> padded{kBegin, kBegin};
    padded.insert(padded.end(), seq.begin(), seq.end());
    padded.push_back(kEnd);
    for (std::size_t i = 2; i < padded.size(); ++i) {
      const int t = padded[i];
      grams[{t}] += 1;
      grams[{padded[i - 1], t}] += 1;
      grams[{padded[i - 2], padded[i - 1], t}] += 1;
      contexts[{padded[i - 1]}] += 1;
      contexts[{padded[i - 2], padded[i - 1]}] += 1;
      total += 1;
    }
  }

  double get(const std::map<std::vector<int>, double>& m, const std::vector<int>& key) const {
    const auto it = m.find(key);
    return it == m.end() ? 0.0 : it->second;
  }

  /// Unigram, bigram, trigram components with the library's documented rule:
  /// an unseen context takes the next lower order's value.
  std::array<double, 3> components(int older, int prev, int target) const {
    const double f1 = total > 0 ? get(grams, {target}) / total : 0.0;
    const double c1 = get(contexts, {prev});
    const double f2 = c1 > 0 ? get(grams, {prev, target}) / c1 : f1;
    const double c2 = get(contexts, {older, prev});
    const double f3 = c2 > 0 ? get(grams, {older, prev, target}) / c2 : f2;
    return {f1, f2, f3};
  }

  double prob(const InterpolationWeights& q, int older, int prev, int target) const {
    const auto f = components(older, prev, target);
    return q.q1 * f[0] + q.q2 * f[1] + q.q3 * f[2];
  }
};

inline ReferenceCounts reference_counts(const Corpus& c, bool conditioned) {
  ReferenceCounts r;
  for (const auto& d : c.dialogues()) r.add_dialogue(symbols(d, c.inventory().size(), conditioned));
  return r;
}

/// Library token for a reference symbol.
inline Token to_token(const TokenCodec& codec, int sym) {
  if (sym == kBegin) return codec.begin();
  if (sym == kEnd) return codec.end();
  const std::size_t k = codec.act_count();
  return codec.encode(act_at(static_cast<std::size_t>(sym) % k), static_cast<std::size_t>(sym) >= k);
}

// ---------------------------------------------------------------------------
// Known trigram sources for oracle-based checks.

/// P(next | older, prev) over K acts plus END (index K), BEGIN = K + 1.
struct TrigramSource {
  std::size_t k = 0;
  std::vector<double> table;  // [(older * (K + 2) + prev) * (K + 1) + next]

  std::size_t ctx(std::size_t older, std::size_t prev) const { return (older * (k + 2) + prev) * (k + 1); }
  double p(std::size_t older, std::size_t prev, std::size_t next) const { return table[ctx(older, prev) + next]; }

  /// Random peaked distributions: each context favours a few acts.
  static TrigramSource random(std::size_t k, std::uint64_t seed, double end_mass = 0.08,
                              double sharpness = 3.0) {
    TrigramSource s;
    s.k = k;
    s.table.assign((k + 2) * (k + 2) * (k + 1), 0.0);
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(1.0 / sharpness, 1.0);
    for (std::size_t a = 0; a < k + 2; ++a)
      for (std::size_t b = 0; b < k + 2; ++b) {
        double sum = 0;
        std::vector<double> w(k);
        for (auto& x : w) sum += (x = gamma(rng) + 1e-6);
        for (std::size_t n = 0; n < k; ++n) s.table[s.ctx(a, b) + n] = (1 - end_mass) * w[n] / sum;
        s.table[s.ctx(a, b) + k] = end_mass;
      }
    return s;
  }

  /// Next act is (older + prev) mod K, so the previous act alone does not
  /// determine it. Opening acts are uniform; END keeps a fixed mass.
  static TrigramSource deterministic(std::size_t k, double end_mass = 0.05) {
    TrigramSource s;
    s.k = k;
    s.table.assign((k + 2) * (k + 2) * (k + 1), 0.0);
    for (std::size_t a = 0; a < k + 2; ++a)
      for (std::size_t b = 0; b < k + 2; ++b) {
        if (a >= k || b >= k) {
          for (std::size_t n = 0; n < k; ++n) s.table[s.ctx(a, b) + n] = (1 - end_mass) / static_cast<double>(k);
        } else {
          s.table[s.ctx(a, b) + (a + b) % k] = 1 - end_mass;
        }
        s.table[s.ctx(a, b) + k] = end_mass;
      }
    return s;
  }

  /// Context-free: every act equally likely everywhere.
  static TrigramSource uniform(std::size_t k, double end_mass = 0.05) {
    TrigramSource s;
    s.k = k;
    s.table.assign((k + 2) * (k + 2) * (k + 1), (1 - end_mass) / static_cast<double>(k));
    for (std::size_t a = 0; a < k + 2; ++a)
      for (std::size_t b = 0; b < k + 2; ++b) s.table[s.ctx(a, b) + k] = end_mass;
    return s;
  }

  Corpus sample(const ActInventory& inv, std::size_t dialogues, std::uint64_t seed, std::size_t min_len = 1,
                std::size_t max_len = 40, const std::string& prefix = "s") const {
    std::mt19937_64 rng(seed);
    std::vector<Dialogue> out;
    for (std::size_t d = 0; d < dialogues; ++d) {
      Dialogue dlg;
      dlg.id = prefix + std::to_string(d);
      std::size_t older = k + 1, prev = k + 1;
      while (dlg.utterances.size() < max_len) {
        std::vector<double> w(table.begin() + static_cast<std::ptrdiff_t>(ctx(older, prev)),
                              table.begin() + static_cast<std::ptrdiff_t>(ctx(older, prev) + k + 1));
        if (dlg.utterances.size() < min_len) w[k] = 0;
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        const std::size_t n = pick(rng);
        if (n == k) break;
        const Speaker s = dlg.utterances.size() % 2 ? Speaker::B : Speaker::A;
        dlg.utterances.push_back({s, {act_at(n)}, {}});
        older = prev;
        prev = n;
      }
      out.push_back(std::move(dlg));
    }
    return Corpus(inv, out);
  }

  /// Acts ranked by true probability after (older, prev), ties by id.
  std::vector<std::size_t> ranking(std::size_t older, std::size_t prev) const {
    std::vector<std::size_t> acts(k);
    for (std::size_t i = 0; i < k; ++i) acts[i] = i;
    std::stable_sort(acts.begin(), acts.end(),
                     [&](std::size_t a, std::size_t b) { return p(older, prev, a) > p(older, prev, b); });
    return acts;
  }

  /// Hit rate (percent) of the Bayes-optimal predictor on `test` at each k.
  std::vector<double> bayes_hit_rates(const Corpus& test, std::size_t max_k) const {
    std::vector<double> hits(max_k + 1, 0);
    double total = 0;
    for (const auto& d : test.dialogues()) {
      std::size_t older = k + 1, prev = k + 1;
      for (const auto& u : d.utterances) {
        const std::size_t a = index_of(u.acts.front());
        const auto r = ranking(older, prev);
        const auto pos = static_cast<std::size_t>(std::find(r.begin(), r.end(), a) - r.begin());
        for (std::size_t kk = 1; kk <= max_k; ++kk) hits[kk] += pos < kk ? 1 : 0;
        total += 1;
        older = prev;
        prev = a;
      }
    }
    for (auto& h : hits) h = 100.0 * h / total;
    return hits;
  }
};

}  // namespace support
