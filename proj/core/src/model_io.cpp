#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "dialact/error.hpp"
#include "dialact/ngram.hpp"
#include "text.hpp"

// Model file layout (version 1):
//
//   dialact-ngram 1
//   speaker-conditioned <0|1>
//   weights <q1> <q2> <q3>
//   inventory <K>
//   <ACT> [@anytime] [@noise]        K lines
//   unigrams <n>
//   <tok> <count>                    n lines
//   bigrams <n>
//   <tok> <tok> <count>
//   trigrams <n>
//   <tok> <tok> <tok> <count>
//   end
//
// Weights are written with 17 significant digits; n-grams are sorted by
// token id so identical models produce identical files.

namespace dialact {

namespace {

constexpr std::string_view kMagic = "dialact-ngram";
constexpr int kVersion = 1;

class LineReader {
 public:
  LineReader(std::string_view text, std::string source) : source_(std::move(source)) {
    text::for_each_line(text, [&](std::size_t no, std::string_view line) {
      line = text::trim(line);
      if (line.empty() || line.front() == '#') return;
      lines_.push_back({no, line});
    });
  }

  std::vector<std::string_view> next(std::string_view what) {
    if (pos_ >= lines_.size()) fail(lines_.empty() ? 0 : lines_.back().first, "unexpected end of file, expected " + std::string(what));
    current_ = lines_[pos_].first;
    return text::split_ws(lines_[pos_++].second);
  }

  std::vector<std::string_view> keyword(std::string_view key, std::size_t args) {
    auto fields = next(key);
    if (fields.front() != key || fields.size() != args + 1)
      fail(current_, "expected '" + std::string(key) + "' with " + std::to_string(args) + " argument(s)");
    return fields;
  }

  std::size_t count(std::string_view field) {
    unsigned long long n = 0;
    if (!text::parse_uint(field, n)) fail(current_, "expected a non-negative integer, got '" + std::string(field) + "'");
    return static_cast<std::size_t>(n);
  }

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw ParseError(source_, line, msg);
  }
  std::size_t line() const noexcept { return current_; }

 private:
  std::string source_;
  std::vector<std::pair<std::size_t, std::string_view>> lines_;
  std::size_t pos_ = 0;
  std::size_t current_ = 0;
};

}  // namespace

std::string token_name(const NGramModel& model, Token token) {
  const TokenCodec& codec = model.codec();
  if (token == codec.end()) return "<END>";
  if (token == codec.begin()) return "<BEGIN>";
  const std::string& name = model.inventory().name(codec.act(token));
  return codec.speaker_change(token) ? "~" + name : name;
}

void save_model(std::ostream& out, const NGramModel& model) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "speaker-conditioned " << (model.speaker_conditioned() ? 1 : 0) << '\n';
  const auto& w = model.weights();
  out << "weights " << text::format_double(w.q1) << ' ' << text::format_double(w.q2) << ' '
      << text::format_double(w.q3) << '\n';
  out << "inventory " << model.inventory().size() << '\n';
  out << format_inventory(model.inventory());

  static constexpr const char* kSection[] = {"unigrams", "bigrams", "trigrams"};
  for (int order = 1; order <= 3; ++order) {
    const auto grams = model.counts().grams(order);
    out << kSection[order - 1] << ' ' << grams.size() << '\n';
    for (const auto& g : grams) {
      for (int i = 3 - order; i < 3; ++i) out << token_name(model, g.tokens[i]) << ' ';
      out << g.count << '\n';
    }
  }
  out << "end\n";
}

void save_model(const std::filesystem::path& path, const NGramModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string(), 0, "cannot open file for writing");
  save_model(out, model);
  if (!out) throw ParseError(path.string(), 0, "write failed");
}

NGramModel parse_model(std::string_view content, const std::string& source) {
  LineReader in(content, source);

  auto magic = in.next("header");
  if (magic.size() != 2 || magic[0] != kMagic)
    in.fail(in.line(), "not a dialact model file");
  if (magic[1] != std::to_string(kVersion))
    in.fail(in.line(), "unsupported model version '" + std::string(magic[1]) + "'");

  const auto flag = in.keyword("speaker-conditioned", 1);
  if (flag[1] != "0" && flag[1] != "1") in.fail(in.line(), "speaker-conditioned must be 0 or 1");
  const bool conditioned = flag[1] == "1";

  const auto wf = in.keyword("weights", 3);
  InterpolationWeights weights;
  double* slots[] = {&weights.q1, &weights.q2, &weights.q3};
  for (int i = 0; i < 3; ++i)
    if (!text::parse_double(wf[i + 1], *slots[i])) in.fail(in.line(), "malformed weight");
  try {
    weights.validate();
  } catch (const ValidationError& e) {
    in.fail(in.line(), e.what());
  }

  const std::size_t k = in.count(in.keyword("inventory", 1)[1]);
  std::string inventory_text;
  for (std::size_t i = 0; i < k; ++i) {
    const auto fields = in.next("inventory entry");
    for (auto f : fields) {
      inventory_text += f;
      inventory_text += ' ';
    }
    inventory_text += '\n';
  }
  ActInventory inventory;
  try {
    inventory = parse_inventory(inventory_text, source);
  } catch (const Error& e) {
    in.fail(in.line(), std::string("bad inventory: ") + e.what());
  }
  if (inventory.size() != k) in.fail(in.line(), "inventory size mismatch");

  const TokenCodec codec(k, conditioned);
  std::unordered_map<std::string, Token> tokens;
  tokens.emplace("<END>", codec.end());
  tokens.emplace("<BEGIN>", codec.begin());
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& name = inventory.name(act_at(i));
    tokens.emplace(name, codec.encode(act_at(i), false));
    if (conditioned) tokens.emplace("~" + name, codec.encode(act_at(i), true));
  }
  auto token = [&](std::string_view name) {
    const auto it = tokens.find(std::string(name));
    if (it == tokens.end()) in.fail(in.line(), "unknown token '" + std::string(name) + "'");
    return it->second;
  };

  // Sections are independent so hand-written fixtures may leave higher orders
  // empty; context counts are rebuilt from the bigram and trigram sections.
  std::vector<CountTable::Gram> grams[3];
  static constexpr const char* kSection[] = {"unigrams", "bigrams", "trigrams"};
  for (int order = 1; order <= 3; ++order) {
    const std::size_t n = in.count(in.keyword(kSection[order - 1], 1)[1]);
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = in.next("n-gram entry");
      if (f.size() != static_cast<std::size_t>(order) + 1) in.fail(in.line(), "malformed n-gram entry");
      CountTable::Gram g{{0, 0, 0}, in.count(f.back())};
      for (int j = 0; j < order; ++j) g.tokens[3 - order + j] = token(f[j]);
      if (g.tokens[2] == codec.begin()) in.fail(in.line(), "<BEGIN> cannot be a predicted token");
      grams[order - 1].push_back(g);
    }
  }
  in.keyword("end", 0);

  CountTable counts = CountTable::from_grams(codec, grams[0], grams[1], grams[2]);
  if (!counts.consistent()) in.fail(in.line(), "inconsistent n-gram counts");
  try {
    return NGramModel(std::move(inventory), std::move(counts), weights);
  } catch (const ValidationError& e) {
    in.fail(in.line(), e.what());
  }
}

NGramModel load_model(const std::filesystem::path& path) {
  return parse_model(text::read_file(path), path.string());
}

}  // namespace dialact
