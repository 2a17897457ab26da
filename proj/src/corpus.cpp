#include "vpcrf/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "vpcrf/error.hpp"
#include "vpcrf/log.hpp"

namespace vpcrf {
namespace {

using nlohmann::json;

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\v' ||
           ch == '\f';
  });
}

std::string partner_of(const ParsedTag& tag) {
  return std::string(tag.abstract == AbstractTag::B ? "I-" : "B-") +
         std::string(tag.slot);
}

struct Location {
  std::size_t episode;
  const char* block;
  std::size_t sentence;

  std::string str() const {
    return fmt::format("episode {}, {} sentence {}", episode, block, sentence);
  }
};

std::vector<LabeledSentence> parse_block(const json& block, std::size_t episode,
                                         const char* name) {
  if (!block.is_object()) {
    throw DataError(fmt::format("episode {}: '{}' must be an object", episode, name));
  }
  auto sentences = block.find("sentences");
  auto tags = block.find("tags");
  if (sentences == block.end() || !sentences->is_array()) {
    throw DataError(fmt::format("episode {}: '{}.sentences' missing or not an array",
                                episode, name));
  }
  if (tags == block.end() || !tags->is_array()) {
    throw DataError(
        fmt::format("episode {}: '{}.tags' missing or not an array", episode, name));
  }
  if (sentences->size() != tags->size()) {
    throw DataError(fmt::format("episode {}: '{}' has {} sentences but {} tag rows",
                                episode, name, sentences->size(), tags->size()));
  }
  const json* ids = nullptr;
  if (auto it = block.find("ids"); it != block.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != sentences->size()) {
      throw DataError(fmt::format(
          "episode {}: '{}.ids' must be an array with one id per sentence", episode,
          name));
    }
    ids = &*it;
  }

  std::vector<LabeledSentence> out;
  out.reserve(sentences->size());
  for (std::size_t s = 0; s < sentences->size(); ++s) {
    const Location loc{episode, name, s};
    const json& toks = (*sentences)[s];
    const json& tg = (*tags)[s];
    if (!toks.is_array() || !tg.is_array()) {
      throw DataError(loc.str() + ": tokens and tags must be arrays");
    }
    if (toks.empty()) throw DataError(loc.str() + ": empty sentence");
    if (toks.size() != tg.size()) {
      throw DataError(fmt::format("{}: {} tokens but {} tags", loc.str(), toks.size(),
                                  tg.size()));
    }
    LabeledSentence item;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (!toks[i].is_string()) {
        throw DataError(fmt::format("{}: token {} is not a string", loc.str(), i));
      }
      auto token = toks[i].get<std::string>();
      if (token.empty() || has_whitespace(token)) {
        throw DataError(fmt::format("{}: token {} is empty or contains whitespace",
                                    loc.str(), i));
      }
      if (!tg[i].is_string()) {
        throw DataError(fmt::format("{}: tag {} is not a string", loc.str(), i));
      }
      auto tag = tg[i].get<std::string>();
      if (!parse_tag(tag)) {
        throw DataError(fmt::format("{}: illegal tag '{}' at position {}", loc.str(),
                                    tag, i));
      }
      item.sentence.tokens.push_back(std::move(token));
      item.tags.push_back(std::move(tag));
    }
    if (ids != nullptr) {
      if (!(*ids)[s].is_string()) throw DataError(loc.str() + ": id is not a string");
      item.sentence.id = (*ids)[s].get<std::string>();
    }
    out.push_back(std::move(item));
  }
  return out;
}

json block_to_json(const std::vector<LabeledSentence>& items) {
  json sentences = json::array();
  json tags = json::array();
  json ids = json::array();
  std::size_t with_id = 0;
  for (const auto& item : items) {
    sentences.push_back(item.sentence.tokens);
    tags.push_back(item.tags);
    if (item.sentence.id) {
      ++with_id;
      ids.push_back(*item.sentence.id);
    }
  }
  json out = {{"sentences", std::move(sentences)}, {"tags", std::move(tags)}};
  if (with_id == items.size() && !items.empty()) {
    out["ids"] = std::move(ids);
  } else if (with_id != 0) {
    throw DataError("cannot serialize a block where only some sentences carry ids");
  }
  return out;
}

}  // namespace

std::optional<ParsedTag> parse_tag(std::string_view tag) {
  if (tag == "O") return ParsedTag{AbstractTag::O, {}};
  if (tag.size() < 3 || tag[1] != '-') return std::nullopt;
  ParsedTag out;
  if (tag[0] == 'B') {
    out.abstract = AbstractTag::B;
  } else if (tag[0] == 'I') {
    out.abstract = AbstractTag::I;
  } else {
    return std::nullopt;
  }
  out.slot = tag.substr(2);
  if (has_whitespace(out.slot)) return std::nullopt;
  return out;
}

LabelVocab::LabelVocab() : LabelVocab(from_tags({})) {}

LabelVocab LabelVocab::from_tags(const std::vector<std::string>& tags) {
  std::set<std::string> observed;
  for (const auto& t : tags) {
    if (t == "O") continue;
    if (!parse_tag(t)) throw DataError(fmt::format("illegal tag '{}'", t));
    observed.insert(t);
  }
  std::set<std::string> all = observed;
  for (const auto& t : observed) all.insert(partner_of(*parse_tag(t)));

  LabelVocab v{Empty{}};
  v.labels_.push_back("O");
  v.labels_.insert(v.labels_.end(), all.begin(), all.end());
  for (std::size_t k = 0; k < v.labels_.size(); ++k) {
    const auto parsed = *parse_tag(v.labels_[k]);
    v.abstract_.push_back(parsed.abstract);
    v.slots_.emplace_back(parsed.slot);
    v.index_.emplace(v.labels_[k], k);
    if (k > 0 && !observed.contains(v.labels_[k])) {
      v.synthesized_.push_back(v.labels_[k]);
    }
  }
  return v;
}

std::optional<std::size_t> LabelVocab::index_of(std::string_view tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> LabelVocab::slot_names() const {
  std::set<std::string> names(slots_.begin() + 1, slots_.end());
  return {names.begin(), names.end()};
}

LabelVocab build_label_vocab(const SupportSet& support) {
  std::vector<std::string> tags;
  for (const auto& item : support.items) {
    tags.insert(tags.end(), item.tags.begin(), item.tags.end());
  }
  auto vocab = LabelVocab::from_tags(tags);
  for (const auto& t : vocab.synthesized()) {
    warn(fmt::format("support set lacks a partner tag; synthesized '{}'", t));
  }
  return vocab;
}

std::vector<Span> extract_spans(const TagSeq& tags) {
  std::vector<Span> spans;
  std::optional<Span> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto parsed = parse_tag(tags[i]);
    if (!parsed) throw DataError(fmt::format("illegal tag '{}'", tags[i]));
    const bool continues = parsed->abstract == AbstractTag::I && open &&
                           open->slot == parsed->slot;
    if (continues) {
      open->end = i;
      continue;
    }
    if (open) {
      spans.push_back(std::move(*open));
      open.reset();
    }
    if (parsed->abstract != AbstractTag::O) {
      open = Span{std::string(parsed->slot), i, i};
    }
  }
  if (open) spans.push_back(std::move(*open));
  return spans;
}

DatasetStats dataset_stats(const DomainFile& file) {
  DatasetStats stats;
  if (file.episodes.empty()) return stats;
  std::vector<std::string> tags;
  std::size_t support_total = 0;
  for (const auto& ep : file.episodes) {
    support_total += ep.support.items.size();
    stats.n_query_sentences += ep.query.size();
    for (const auto& item : ep.support.items) {
      tags.insert(tags.end(), item.tags.begin(), item.tags.end());
    }
  }
  stats.avg_support_size =
      static_cast<double>(support_total) / static_cast<double>(file.episodes.size());
  stats.n_labels = LabelVocab::from_tags(tags).size();
  return stats;
}

std::vector<std::string> unseen_query_slots(const Episode& episode) {
  std::set<std::string> support_slots;
  for (const auto& item : episode.support.items) {
    for (const auto& t : item.tags) {
      if (auto p = parse_tag(t); p && p->abstract != AbstractTag::O) {
        support_slots.emplace(p->slot);
      }
    }
  }
  std::set<std::string> unseen;
  for (const auto& item : episode.query) {
    for (const auto& t : item.tags) {
      if (auto p = parse_tag(t); p && p->abstract != AbstractTag::O &&
                                 !support_slots.contains(std::string(p->slot))) {
        unseen.emplace(p->slot);
      }
    }
  }
  return {unseen.begin(), unseen.end()};
}

DomainFile parse_domain_file(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("malformed JSON: {}", e.what()));
  }
  if (!root.is_object()) throw DataError("domain file root must be an object");
  auto domain = root.find("domain");
  if (domain == root.end() || !domain->is_string()) {
    throw DataError("domain file needs a string 'domain' field");
  }
  auto episodes = root.find("episodes");
  if (episodes == root.end() || !episodes->is_array() || episodes->empty()) {
    throw DataError("domain file needs a non-empty 'episodes' array");
  }

  DomainFile file;
  file.domain = domain->get<std::string>();
  std::unordered_set<std::string> seen_ids;
  for (std::size_t e = 0; e < episodes->size(); ++e) {
    const json& ep = (*episodes)[e];
    if (!ep.is_object() || !ep.contains("support") || !ep.contains("query")) {
      throw DataError(fmt::format("episode {}: needs 'support' and 'query'", e));
    }
    Episode episode;
    episode.support.items = parse_block(ep.at("support"), e, "support");
    episode.query = parse_block(ep.at("query"), e, "query");
    if (episode.support.items.empty()) {
      throw DataError(fmt::format("episode {}: empty support set", e));
    }

    for (const auto* block : {&episode.support.items, &episode.query}) {
      for (const auto& item : *block) {
        if (item.sentence.id && !seen_ids.insert(*item.sentence.id).second) {
          throw DataError(fmt::format("episode {}: duplicate sentence id '{}'", e,
                                      *item.sentence.id));
        }
      }
    }
    if (build_label_vocab(episode.support).size() == 1) {
      warn(fmt::format("episode {}: support set contains no slot tags", e));
    }
    for (const auto& slot : unseen_query_slots(episode)) {
      warn(fmt::format("episode {}: query slot '{}' does not occur in the support set",
                       e, slot));
    }
    file.episodes.push_back(std::move(episode));
  }
  return file;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DomainFile load_domain_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_domain_file(text);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string serialize_domain_file(const DomainFile& file) {
  json episodes = json::array();
  for (const auto& ep : file.episodes) {
    episodes.push_back(
        {{"support", block_to_json(ep.support.items)}, {"query", block_to_json(ep.query)}});
  }
  json root = {{"domain", file.domain}, {"episodes", std::move(episodes)}};
  return root.dump() + "\n";
}

}  // namespace vpcrf
