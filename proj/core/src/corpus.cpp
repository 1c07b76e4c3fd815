#include "dialact/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "dialact/error.hpp"
#include "text.hpp"

namespace dialact {

bool is_valid_act_name(std::string_view name) noexcept {
  if (name.empty() || name.front() < 'A' || name.front() > 'Z') return false;
  return std::all_of(name.begin(), name.end(),
                     [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; });
}

ActInventory::ActInventory(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ValidationError("act inventory is empty");
  if (entries_.size() > 0xFFFF) throw ValidationError("act inventory too large");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    if (!is_valid_act_name(e.name))
      throw ValidationError("invalid act name '" + e.name + "'");
    if (e.noise && !e.anytime)
      throw ValidationError("social-noise act '" + e.name + "' must also be an anytime act");
    if (!by_name_.emplace(e.name, act_at(i)).second)
      throw ValidationError("duplicate act name '" + e.name + "'");
  }
}

std::optional<ActId> ActInventory::find(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

ActId ActInventory::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw ValidationError("unknown dialogue act '" + std::string(name) + "'");
}

std::vector<ActId> ActInventory::anytime_acts() const {
  std::vector<ActId> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].anytime) out.push_back(act_at(i));
  return out;
}

std::vector<ActId> ActInventory::noise_acts() const {
  std::vector<ActId> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].noise) out.push_back(act_at(i));
  return out;
}

ActInventory parse_inventory(std::string_view content, const std::string& source) {
  std::vector<ActInventory::Entry> entries;
  std::unordered_set<std::string> seen;
  text::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#') return;
    const auto fields = text::split_ws(line);
    ActInventory::Entry entry;
    entry.name = std::string(fields.front());
    if (!is_valid_act_name(entry.name))
      throw ParseError(source, line_no, "invalid act name '" + entry.name + "'");
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] == "@anytime") {
        entry.anytime = true;
      } else if (fields[i] == "@noise") {
        entry.noise = true;
      } else if (fields[i].front() == '#') {
        break;
      } else {
        throw ParseError(source, line_no, "unknown tag '" + std::string(fields[i]) + "'");
      }
    }
    if (entry.noise && !entry.anytime)
      throw ParseError(source, line_no,
                       "social-noise act '" + entry.name + "' is not marked @anytime");
    if (!seen.insert(entry.name).second)
      throw ParseError(source, line_no, "duplicate act name '" + entry.name + "'");
    entries.push_back(std::move(entry));
  });
  if (entries.empty()) throw ParseError(source, 0, "no acts declared");
  return ActInventory(std::move(entries));
}

ActInventory load_inventory(const std::filesystem::path& path) {
  return parse_inventory(text::read_file(path), path.string());
}

std::string format_inventory(const ActInventory& inventory) {
  std::string out;
  for (const auto& e : inventory.entries()) {
    out += e.name;
    if (e.anytime) out += " @anytime";
    if (e.noise) out += " @noise";
    out += '\n';
  }
  return out;
}

char speaker_tag(Speaker speaker) noexcept { return speaker == Speaker::A ? 'A' : 'B'; }

std::size_t Dialogue::act_count() const noexcept {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.acts.size();
  return n;
}

Corpus::Corpus(ActInventory inventory, std::vector<Dialogue> dialogues)
    : inventory_(std::move(inventory)), dialogues_(std::move(dialogues)) {
  std::unordered_set<std::string> ids;
  for (const auto& d : dialogues_) {
    if (!ids.insert(d.id).second) throw ValidationError("duplicate dialogue id '" + d.id + "'");
    if (d.utterances.empty()) throw ValidationError("dialogue '" + d.id + "' is empty");
    for (const auto& u : d.utterances) {
      if (u.acts.empty())
        throw ValidationError("dialogue '" + d.id + "' has an utterance without acts");
      for (ActId a : u.acts)
        if (!inventory_.contains(a))
          throw ValidationError("dialogue '" + d.id + "' uses an act outside the inventory");
    }
  }
}

std::size_t Corpus::utterance_count() const noexcept {
  std::size_t n = 0;
  for (const auto& d : dialogues_) n += d.utterances.size();
  return n;
}

std::size_t Corpus::act_count() const noexcept {
  std::size_t n = 0;
  for (const auto& d : dialogues_) n += d.act_count();
  return n;
}

Corpus parse_corpus(std::string_view content, const ActInventory& inventory,
                    const std::string& source) {
  std::vector<Dialogue> dialogues;
  std::unordered_set<std::string> ids;
  std::size_t header_line = 0;

  auto close_dialogue = [&]() {
    if (!dialogues.empty() && dialogues.back().utterances.empty())
      throw ParseError(source, header_line, "dialogue '" + dialogues.back().id + "' is empty");
  };

  text::for_each_line(content, [&](std::size_t line_no, std::string_view raw) {
    const std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') return;

    if (line.starts_with("==")) {
      close_dialogue();
      const std::string id(text::trim(line.substr(2)));
      if (id.empty()) throw ParseError(source, line_no, "dialogue header without id");
      if (!ids.insert(id).second)
        throw ParseError(source, line_no, "duplicate dialogue id '" + id + "'");
      dialogues.push_back(Dialogue{id, {}});
      header_line = line_no;
      return;
    }

    if (dialogues.empty())
      throw ParseError(source, line_no, "utterance before the first '== <id>' header");
    Dialogue& dialogue = dialogues.back();

    // <A|B> TAB <ACT>[+<ACT>...] [TAB text]
    const std::string_view body = text::trim(raw);
    const std::size_t tab1 = body.find('\t');
    if (tab1 == std::string_view::npos)
      throw ParseError(source, line_no, "malformed utterance (expected '<A|B>\\t<ACT>')");
    const std::string_view tag = text::trim(body.substr(0, tab1));
    Utterance utt;
    if (tag == "A") {
      utt.speaker = Speaker::A;
    } else if (tag == "B") {
      utt.speaker = Speaker::B;
    } else {
      throw ParseError(source, line_no, "speaker must be A or B, got '" + std::string(tag) + "'");
    }
    std::string_view rest = body.substr(tab1 + 1);
    const std::size_t tab2 = rest.find('\t');
    const std::string_view acts_field =
        text::trim(tab2 == std::string_view::npos ? rest : rest.substr(0, tab2));
    if (tab2 != std::string_view::npos) utt.text = std::string(text::trim(rest.substr(tab2 + 1)));
    if (acts_field.empty()) throw ParseError(source, line_no, "utterance without act");
    for (std::string_view name : text::split_trimmed(acts_field, '+')) {
      const auto act = inventory.find(name);
      if (!act)
        throw ParseError(source, line_no,
                         "unknown act '" + std::string(name) + "' in dialogue '" + dialogue.id + "'");
      utt.acts.push_back(*act);
    }
    dialogue.utterances.push_back(std::move(utt));
  });
  close_dialogue();
  return Corpus(inventory, std::move(dialogues));
}

Corpus load_corpus(const std::filesystem::path& path, const ActInventory& inventory) {
  return parse_corpus(text::read_file(path), inventory, path.string());
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  const ActInventory& inv = corpus.inventory();
  for (const auto& d : corpus.dialogues()) {
    out << "== " << d.id << '\n';
    for (const auto& u : d.utterances) {
      out << speaker_tag(u.speaker) << '\t';
      for (std::size_t i = 0; i < u.acts.size(); ++i) {
        if (i) out << '+';
        out << inv.name(u.acts[i]);
      }
      if (!u.text.empty()) out << '\t' << u.text;
      out << '\n';
    }
  }
}

std::string format_corpus(const Corpus& corpus) {
  std::ostringstream out;
  write_corpus(out, corpus);
  return out.str();
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double held_out_fraction,
                                       std::uint64_t seed) {
  if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0))
    throw ValidationError("held-out fraction must lie strictly between 0 and 1");
  const std::size_t n = corpus.size();
  if (n < 2) throw ValidationError("corpus needs at least 2 dialogues to split");

  auto held = static_cast<std::size_t>(std::llround(held_out_fraction * static_cast<double>(n)));
  held = std::clamp<std::size_t>(held, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> in_held(n, false);
  for (std::size_t i = 0; i < held; ++i) in_held[order[i]] = true;

  std::vector<Dialogue> train, held_out;
  for (std::size_t i = 0; i < n; ++i)
    (in_held[i] ? held_out : train).push_back(corpus.dialogues()[i]);
  return {Corpus(corpus.inventory(), std::move(train)),
          Corpus(corpus.inventory(), std::move(held_out))};
}

std::vector<ActElement> flatten(const Dialogue& dialogue) {
  std::vector<ActElement> out;
  out.reserve(dialogue.act_count());
  for (std::size_t u = 0; u < dialogue.utterances.size(); ++u) {
    const Utterance& utt = dialogue.utterances[u];
    const bool change = u > 0 && dialogue.utterances[u - 1].speaker != utt.speaker;
    for (std::size_t i = 0; i < utt.acts.size(); ++i)
      out.push_back(ActElement{utt.acts[i], utt.speaker, i == 0 && change});
  }
  return out;
}

void recompute_speaker_changes(std::vector<ActElement>& elements) {
  for (std::size_t i = 0; i < elements.size(); ++i)
    elements[i].speaker_change = i > 0 && elements[i - 1].speaker != elements[i].speaker;
}

}  // namespace dialact
