#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "vpcrf/corpus.hpp"
#include "vpcrf/error.hpp"
#include "vpcrf/log.hpp"

namespace {

using namespace vpcrf;

std::string minimal_file(const std::string& tags_json) {
  return R"({"domain": "travel", "episodes": [{"support": {"sentences": [["book","a","flight"]],
    "tags": [)" + tags_json + R"(]}, "query": {"sentences": [["book","a","flight"]],
    "tags": [["O","O","O"]]}}]})";
}

std::string error_of(std::string_view text) {
  try {
    parse_domain_file(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

LabeledSentence labeled(std::vector<std::string> tokens, TagSeq tags) {
  return {{std::nullopt, std::move(tokens)}, std::move(tags)};
}

TEST(ParseDomainFile, MinimalFile) {
  ScopedWarningCapture quiet;
  const DomainFile f = parse_domain_file(minimal_file(R"(["O","O","O"])"));
  EXPECT_EQ(f.domain, "travel");
  ASSERT_EQ(f.episodes.size(), 1u);
  EXPECT_EQ(f.episodes[0].support.items.size(), 1u);
  EXPECT_EQ(f.episodes[0].query[0].sentence.tokens[2], "flight");
  EXPECT_TRUE(quiet.contains("no slot tags"));
}

TEST(ParseDomainFile, LengthMismatchNamesLocation) {
  const std::string msg = error_of(minimal_file(R"(["O","O"])"));
  EXPECT_NE(msg.find("episode 0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("support sentence 0"), std::string::npos) << msg;
}

TEST(ParseDomainFile, IllegalTagGrammar) {
  const std::string msg = error_of(minimal_file(R"(["O","B_city","O"])"));
  EXPECT_NE(msg.find("illegal tag 'B_city'"), std::string::npos) << msg;
  EXPECT_NE(error_of(minimal_file(R"(["O","B-","O"])")), "");
  EXPECT_NE(error_of(minimal_file(R"(["O","X-city","O"])")), "");
  EXPECT_NE(error_of(minimal_file(R"(["O","B-new york","O"])")), "");
}

TEST(ParseDomainFile, MalformedInput) {
  EXPECT_NE(error_of("{"), "");
  EXPECT_NE(error_of(R"({"domain": "x", "episodes": []})"), "");
  EXPECT_NE(error_of(R"([1, 2])"), "");
  const std::string bad_token = R"({"domain": "d", "episodes": [{"support": {"sentences": [["a b"]],
    "tags": [["O"]]}, "query": {"sentences": [], "tags": []}}]})";
  EXPECT_NE(error_of(bad_token).find("whitespace"), std::string::npos);
}

TEST(ParseDomainFile, DuplicateIdsRejected) {
  const std::string text = R"({"domain": "d", "episodes": [{"support": {"sentences": [["a"]],
    "tags": [["B-x"]], "ids": ["s1"]}, "query": {"sentences": [["b"]], "tags": [["O"]],
    "ids": ["s1"]}}]})";
  EXPECT_NE(error_of(text).find("duplicate sentence id 's1'"), std::string::npos);
}

TEST(ParseDomainFile, UnseenQuerySlotWarns) {
  const std::string text = R"({"domain": "d", "episodes": [{"support": {"sentences": [["a"]],
    "tags": [["B-x"]]}, "query": {"sentences": [["b"]], "tags": [["B-y"]]}}]})";
  ScopedWarningCapture w;
  const DomainFile f = parse_domain_file(text);
  EXPECT_TRUE(w.contains("query slot 'y'"));
  EXPECT_EQ(unseen_query_slots(f.episodes[0]), std::vector<std::string>{"y"});
}

TEST(ParseDomainFile, RoundTrip) {
  DomainFile f{"d", {}};
  Episode ep;
  ep.support.items = {labeled({"fly", "to", "rome"}, {"O", "O", "B-city"}),
                      labeled({"new", "york"}, {"B-city", "I-city"})};
  ep.query = {labeled({"paris", "now"}, {"B-city", "B-time"})};
  f.episodes = {ep, ep};
  f.episodes[1].support.items[0].sentence.id = "a";
  f.episodes[1].support.items[1].sentence.id = "b";
  ScopedWarningCapture quiet;
  const DomainFile back = parse_domain_file(serialize_domain_file(f));
  EXPECT_EQ(back, f);
  EXPECT_EQ(serialize_domain_file(back), serialize_domain_file(f));
}

TEST(LabelVocab, ObservedTags) {
  const auto v = LabelVocab::from_tags({"O", "B-city", "I-city"});
  EXPECT_EQ(v.labels(), (std::vector<std::string>{"O", "B-city", "I-city"}));
  EXPECT_TRUE(v.synthesized().empty());
  EXPECT_EQ(v.abstract_of(2), AbstractTag::I);
  EXPECT_EQ(v.slot_of(1), "city");
  EXPECT_EQ(v.slot_of(0), "");
}

TEST(LabelVocab, SynthesizesMissingPartnerWithWarning) {
  SupportSet s{{labeled({"rome"}, {"I-city"})}};
  ScopedWarningCapture w;
  const auto v = build_label_vocab(s);
  EXPECT_EQ(v.labels(), (std::vector<std::string>{"O", "B-city", "I-city"}));
  EXPECT_EQ(v.synthesized(), std::vector<std::string>{"B-city"});
  EXPECT_TRUE(w.contains("B-city"));
}

TEST(LabelVocab, LexicographicOrderOverFullTag) {
  const auto v = LabelVocab::from_tags({"I-time", "B-time", "O", "I-city", "B-city"});
  EXPECT_EQ(v.labels(),
            (std::vector<std::string>{"O", "B-city", "B-time", "I-city", "I-time"}));
  EXPECT_EQ(*v.index_of("I-city"), 3u);
  EXPECT_FALSE(v.index_of("B-date"));
}

TEST(LabelVocab, IndependentOfSupportOrder) {
  std::vector<LabeledSentence> items{labeled({"a", "b"}, {"B-x", "I-x"}),
                                     labeled({"c"}, {"B-y"}), labeled({"d"}, {"I-z"})};
  ScopedWarningCapture quiet;
  const auto ref = build_label_vocab(SupportSet{items});
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(build_label_vocab(SupportSet{items}).labels(), ref.labels());
  }
}

TEST(ExtractSpans, BeginInside) {
  EXPECT_EQ(extract_spans({"O", "B-city", "I-city", "O"}), (std::vector<Span>{{"city", 1, 2}}));
}

TEST(ExtractSpans, InsideAtSentenceStartOpensSpan) {
  EXPECT_EQ(extract_spans({"I-city"}), (std::vector<Span>{{"city", 0, 0}}));
}

TEST(ExtractSpans, RepeatedBeginsAndTypeSwitch) {
  EXPECT_EQ(extract_spans({"B-a", "B-a", "I-b"}),
            (std::vector<Span>{{"a", 0, 0}, {"a", 1, 1}, {"b", 2, 2}}));
  EXPECT_EQ(extract_spans({"B-a", "I-a", "I-b", "I-b", "O", "I-a"}),
            (std::vector<Span>{{"a", 0, 1}, {"b", 2, 3}, {"a", 5, 5}}));
}

TEST(ExtractSpans, AllOutsideIsEmpty) {
  EXPECT_TRUE(extract_spans({"O", "O", "O"}).empty());
  EXPECT_TRUE(extract_spans({}).empty());
}

TEST(ExtractSpans, SortedAndNonOverlappingOnRandomTags) {
  const std::vector<std::string> pool{"O", "B-a", "I-a", "B-b", "I-b"};
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int rep = 0; rep < 200; ++rep) {
    TagSeq tags(1 + rep % 9);
    for (auto& t : tags) t = pool[pick(rng)];
    const auto spans = extract_spans(tags);
    for (std::size_t i = 0; i < spans.size(); ++i) {
      EXPECT_LE(spans[i].start, spans[i].end);
      EXPECT_LT(spans[i].end, tags.size());
      if (i > 0) {
        EXPECT_GT(spans[i].start, spans[i - 1].end);
      }
    }
  }
}

TEST(DatasetStats, Counts) {
  DomainFile f{"d", {}};
  Episode a, b;
  a.support.items = {labeled({"x"}, {"B-city"}), labeled({"y", "z"}, {"B-city", "I-city"})};
  b.support.items = {labeled({"x"}, {"O"}), labeled({"x"}, {"O"}), labeled({"x"}, {"O"}),
                     labeled({"x"}, {"B-city"})};
  a.query.assign(5, labeled({"q"}, {"O"}));
  f.episodes = {a, b};
  const auto s = dataset_stats(f);
  EXPECT_DOUBLE_EQ(s.avg_support_size, 3.0);
  EXPECT_EQ(s.n_query_sentences, 5u);
  EXPECT_EQ(s.n_labels, 3u);
}

TEST(ParseTag, Grammar) {
  EXPECT_TRUE(parse_tag("O"));
  EXPECT_EQ(parse_tag("I-x")->abstract, AbstractTag::I);
  EXPECT_EQ(parse_tag("B-from.city")->slot, "from.city");
  EXPECT_FALSE(parse_tag("o"));
  EXPECT_FALSE(parse_tag("B"));
  EXPECT_FALSE(parse_tag(""));
}

}  // namespace
