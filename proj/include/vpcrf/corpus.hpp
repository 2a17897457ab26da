#pragma once

// Sentences, IOB tag sequences, support sets and episodes, plus the domain
// file parser and the label vocabulary used to build CRF lattices.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vpcrf {

struct Sentence {
  std::optional<std::string> id;
  std::vector<std::string> tokens;

  bool operator==(const Sentence&) const = default;
};

// One tag per token: "O" or "<B|I>-<slot>".
using TagSeq = std::vector<std::string>;

struct LabeledSentence {
  Sentence sentence;
  TagSeq tags;

  bool operator==(const LabeledSentence&) const = default;
};

struct SupportSet {
  std::vector<LabeledSentence> items;

  bool operator==(const SupportSet&) const = default;
};

struct Episode {
  SupportSet support;
  std::vector<LabeledSentence> query;

  bool operator==(const Episode&) const = default;
};

struct DomainFile {
  std::string domain;
  std::vector<Episode> episodes;

  bool operator==(const DomainFile&) const = default;
};

enum class AbstractTag : std::uint8_t { O = 0, B = 1, I = 2 };

struct ParsedTag {
  AbstractTag abstract = AbstractTag::O;
  std::string_view slot;  // empty for O
};

// Returns nullopt when `tag` does not follow the O / B-x / I-x grammar.
std::optional<ParsedTag> parse_tag(std::string_view tag);

class LabelVocab {
 public:
  LabelVocab();

  // Builds the vocabulary from an arbitrary collection of valid tags.
  // Missing B-/I- partners are synthesized. Order: "O", then the rest
  // sorted lexicographically by the full tag string.
  static LabelVocab from_tags(const std::vector<std::string>& tags);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t k) const { return labels_.at(k); }
  const std::vector<std::string>& labels() const { return labels_; }
  AbstractTag abstract_of(std::size_t k) const { return abstract_.at(k); }
  // Empty string for "O".
  const std::string& slot_of(std::size_t k) const { return slots_.at(k); }
  std::optional<std::size_t> index_of(std::string_view tag) const;
  // Tags that were added as partners rather than observed.
  const std::vector<std::string>& synthesized() const { return synthesized_; }
  std::vector<std::string> slot_names() const;

  bool operator==(const LabelVocab& other) const { return labels_ == other.labels_; }

 private:
  struct Empty {};
  explicit LabelVocab(Empty) {}

  std::vector<std::string> labels_;
  std::vector<std::string> slots_;
  std::vector<AbstractTag> abstract_;
  std::vector<std::string> synthesized_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Emits a warning for every synthesized partner tag.
LabelVocab build_label_vocab(const SupportSet& support);

struct Span {
  std::string slot;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive

  auto operator<=>(const Span&) const = default;
};

// conlleval chunk semantics: B-X starts a span, so does an I-X whose
// predecessor is not B-X/I-X; a span closes before any tag that is not I-X.
std::vector<Span> extract_spans(const TagSeq& tags);

struct DatasetStats {
  double avg_support_size = 0.0;
  std::size_t n_query_sentences = 0;
  std::size_t n_labels = 0;
};

DatasetStats dataset_stats(const DomainFile& file);

// Parses and validates the JSON domain file format. Throws DataError with
// the episode/sentence location on malformed input.
DomainFile parse_domain_file(std::string_view text);
DomainFile load_domain_file(const std::filesystem::path& path);
std::string serialize_domain_file(const DomainFile& file);

// Slot names used by query tags but absent from the support set.
std::vector<std::string> unseen_query_slots(const Episode& episode);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace vpcrf
