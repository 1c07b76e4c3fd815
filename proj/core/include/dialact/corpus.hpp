#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dialact {

/// Index of a dialogue act within its ActInventory.
enum class ActId : std::uint16_t {};

constexpr std::size_t index_of(ActId act) noexcept { return static_cast<std::size_t>(act); }
constexpr ActId act_at(std::size_t index) noexcept { return static_cast<ActId>(index); }

/// The set of dialogue-act labels a corpus, model and grammar agree on.
///
/// Act ids are positions in declaration order. Anytime acts may appear at any
/// point of a dialogue; social-noise acts (a subset of the anytime acts) are
/// ignored when looking for an utterance's effective predecessor.
class ActInventory {
 public:
  struct Entry {
    std::string name;
    bool anytime = false;
    bool noise = false;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  ActInventory() = default;
  /// Throws ValidationError on an empty list, a duplicate or malformed name,
  /// or a noise act that is not also anytime.
  explicit ActInventory(std::vector<Entry> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const std::string& name(ActId act) const { return entries_.at(index_of(act)).name; }
  bool is_anytime(ActId act) const { return entries_.at(index_of(act)).anytime; }
  bool is_noise(ActId act) const { return entries_.at(index_of(act)).noise; }
  bool contains(ActId act) const noexcept { return index_of(act) < entries_.size(); }

  std::optional<ActId> find(std::string_view name) const;
  /// Like find(), but throws ValidationError naming the act.
  ActId at(std::string_view name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<ActId> anytime_acts() const;
  std::vector<ActId> noise_acts() const;

  friend bool operator==(const ActInventory& a, const ActInventory& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, ActId> by_name_;
};

/// True when `name` matches [A-Z][A-Z_]*.
bool is_valid_act_name(std::string_view name) noexcept;

ActInventory parse_inventory(std::string_view text, const std::string& source = "<inventory>");
ActInventory load_inventory(const std::filesystem::path& path);
std::string format_inventory(const ActInventory& inventory);

enum class Speaker : std::uint8_t { A, B };

char speaker_tag(Speaker speaker) noexcept;

struct Utterance {
  Speaker speaker = Speaker::A;
  /// Normally one act; several after an additional reading was attached.
  std::vector<ActId> acts;
  std::string text;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t act_count() const noexcept;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// A validated, immutable collection of dialogues over one inventory.
class Corpus {
 public:
  Corpus() = default;
  /// Throws ValidationError if a dialogue is empty, an id repeats, or an act
  /// does not resolve against `inventory`.
  Corpus(ActInventory inventory, std::vector<Dialogue> dialogues);

  const ActInventory& inventory() const noexcept { return inventory_; }
  const std::vector<Dialogue>& dialogues() const noexcept { return dialogues_; }
  std::size_t size() const noexcept { return dialogues_.size(); }
  bool empty() const noexcept { return dialogues_.empty(); }

  std::size_t utterance_count() const noexcept;
  std::size_t act_count() const noexcept;

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  ActInventory inventory_;
  std::vector<Dialogue> dialogues_;
};

Corpus parse_corpus(std::string_view text, const ActInventory& inventory,
                    const std::string& source = "<corpus>");
Corpus load_corpus(const std::filesystem::path& path, const ActInventory& inventory);
void write_corpus(std::ostream& out, const Corpus& corpus);
std::string format_corpus(const Corpus& corpus);

/// Partitions whole dialogues into (train, held_out). The held-out part
/// gets round(fraction * n) dialogues, clamped to [1, n - 1]; both parts keep
/// corpus order. Deterministic for a fixed seed.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double held_out_fraction,
                                       std::uint64_t seed);

/// One annotated act in dialogue order. `speaker_change` is set when the
/// utterance's speaker differs from the previous utterance's; it is false for
/// the first act and for every act after the first within an utterance.
struct ActElement {
  ActId act;
  Speaker speaker;
  bool speaker_change;

  friend bool operator==(const ActElement&, const ActElement&) = default;
};

std::vector<ActElement> flatten(const Dialogue& dialogue);

/// Recomputes speaker-change bits for an already filtered element sequence.
void recompute_speaker_changes(std::vector<ActElement>& elements);

}  // namespace dialact
