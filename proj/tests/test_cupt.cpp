#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "mweforge/cupt.hpp"

using namespace mweforge;

namespace {

const char* kHeader = "# global.columns = ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC PARSEME:MWE\n";

std::string row(int id, const std::string& form, const std::string& mwe) {
  return std::to_string(id) + "\t" + form + "\t" + form + "\tX\t_\t_\t_\t_\t_\t_\t" + mwe + "\n";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cupt, TwoTokenMwe) {
  const auto r = parse_cupt(std::string(kHeader) + "# sent_id = s1\n" + row(1, "a", "1:VID") + row(2, "b", "1") + "\n");
  ASSERT_EQ(r.corpus.sentences.size(), 1u);
  const auto& s = r.corpus.sentences[0];
  EXPECT_EQ(s.sentence_id, "s1");
  ASSERT_EQ(s.mwes.size(), 1u);
  EXPECT_EQ(s.mwes[0], (MweInstance{1, "VID", {1, 2}}));
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(Cupt, AllStarsGiveNoMwes) {
  const auto r = parse_cupt(std::string(kHeader) + row(1, "a", "*") + row(2, "b", "*") + "\n");
  EXPECT_TRUE(r.corpus.sentences.at(0).mwes.empty());
}

TEST(Cupt, TokenInTwoMwes) {
  const auto r = parse_cupt(std::string(kHeader) + row(1, "a", "1:LVC.full;2:VID") + row(2, "b", "2") + row(3, "c", "1") + "\n");
  const auto& m = r.corpus.sentences.at(0).mwes;
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (MweInstance{1, "LVC.full", {1, 3}}));
  EXPECT_EQ(m[1], (MweInstance{2, "VID", {1, 2}}));
}

TEST(Cupt, ColumnCountErrorNamesLine) {
  try {
    parse_cupt(std::string(kHeader) + row(1, "a", "*") + "2\tb\tb\n\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Cupt, CategoryTwiceIsError) {
  EXPECT_THROW(parse_cupt(std::string(kHeader) + row(1, "a", "1:VID") + row(2, "b", "1:IRV") + "\n"), FormatError);
}

TEST(Cupt, OutOfSequenceIdIsError) {
  EXPECT_THROW(parse_cupt(std::string(kHeader) + row(1, "a", "*") + row(3, "b", "*") + "\n"), FormatError);
}

TEST(Cupt, UnknownCategoryIsDiagnosed) {
  const auto r = parse_cupt(std::string(kHeader) + row(1, "a", "1:FOO") + row(2, "b", "1") + "\n");
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].line, 2u);
  EXPECT_EQ(r.corpus.sentences[0].mwes[0].category, "FOO");
}

TEST(Cupt, DanglingContinuationOnlyInStrictMode) {
  const std::string text = std::string(kHeader) + row(1, "a", "1") + row(2, "b", "1") + "\n";
  EXPECT_TRUE(parse_cupt(text).diagnostics.empty());
  ParseOptions strict;
  strict.strict_category = true;
  const auto r = parse_cupt(text, strict);
  EXPECT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.corpus.sentences[0].mwes[0].category, "");
}

TEST(Cupt, UnderscoreIsRecordedPerToken) {
  const auto r = parse_cupt(std::string(kHeader) + row(1, "a", "_") + row(2, "b", "*") + "\n");
  const auto& t = r.corpus.sentences[0].tokens;
  EXPECT_TRUE(t[0].untagged());
  EXPECT_FALSE(t[1].untagged());
  EXPECT_EQ(write_cupt(r.corpus), std::string(kHeader) + row(1, "a", "_") + row(2, "b", "*") + "\n");
}

TEST(Cupt, DiscontinuousWrite) {
  Corpus c;
  Sentence s;
  for (int i = 1; i <= 4; ++i) s.tokens.push_back({i, "w" + std::to_string(i), "w", "X", {"_", "_", "_", "_", "_", "_"}, "*"});
  s.mwes.push_back({7, "VID", {2, 4}});
  c.sentences.push_back(s);
  const auto cells = encode_mwe_cells(s);
  EXPECT_EQ(cells, (std::vector<std::string>{"*", "1:VID", "*", "1"}));
  const auto back = parse_cupt(write_cupt(c)).corpus;
  EXPECT_EQ(back.sentences[0].mwes, (std::vector<MweInstance>{{1, "VID", {2, 4}}}));
}

TEST(Cupt, MissingPositionIsError) {
  Corpus c;
  Sentence s;
  s.tokens.push_back({1, "a", "a", "X", {"_", "_", "_", "_", "_", "_"}, "*"});
  s.mwes.push_back({1, "VID", {1, 2}});
  c.sentences.push_back(s);
  EXPECT_THROW(write_cupt(c), std::invalid_argument);
}

TEST(Cupt, EmptyCorpus) {
  EXPECT_EQ(write_cupt(Corpus{}), "");
  EXPECT_TRUE(parse_cupt("").corpus.sentences.empty());
  const auto st = corpus_stats(Corpus{});
  EXPECT_EQ(st.sentence_count, 0u);
  EXPECT_EQ(st.avg_sentence_length, 0.0);
  EXPECT_NE(format_stats(st).find("avg_length\t0.0"), std::string::npos);
}

TEST(Cupt, StatsAverage) {
  const auto r = parse_cupt(std::string(kHeader) + row(1, "a", "1:VID") + row(2, "b", "1") + row(3, "c", "*") + "\n" +
                            row(1, "a", "*") + row(2, "b", "*") + row(3, "c", "*") + row(4, "d", "1:IRV") + row(5, "e", "1") + "\n");
  const auto st = corpus_stats(r.corpus);
  EXPECT_EQ(st.sentence_count, 2u);
  EXPECT_EQ(st.token_count, 8u);
  EXPECT_DOUBLE_EQ(st.avg_sentence_length, 4.0);
  EXPECT_EQ(st.mwe_count, 2u);
  EXPECT_EQ(st.per_category_counts.at("VID"), 1u);
  EXPECT_NE(format_stats(st).find("avg_length\t4.0"), std::string::npos);
}

TEST(Cupt, RangesAndEmptyNodesStayOutOfPositions) {
  const auto r = read_cupt_file(std::string(MWEFORGE_TEST_DATA) + "/ranges.cupt");
  const auto& s = r.corpus.sentences.at(0);
  EXPECT_EQ(s.tokens.size(), 7u);
  EXPECT_EQ(s.raw_rows.size(), 2u);
  EXPECT_EQ(s.mwes.at(0), (MweInstance{1, "IRV", {2, 3, 4}}));
}

class GoldenRoundTrip : public ::testing::TestWithParam<std::string> {};

TEST_P(GoldenRoundTrip, ByteIdentical) {
  const std::string text = slurp(std::string(MWEFORGE_TEST_DATA) + "/" + GetParam());
  ASSERT_FALSE(text.empty());
  const auto r = parse_cupt(text);
  EXPECT_EQ(write_cupt(r.corpus), text);
  EXPECT_EQ(parse_cupt(write_cupt(r.corpus)).corpus, r.corpus);
}

INSTANTIATE_TEST_SUITE_P(Files, GoldenRoundTrip,
                         ::testing::Values("discontinuous.cupt", "nested.cupt", "categoryless.cupt", "ranges.cupt"));

TEST(CuptProperty, EncodeDecodeDuality) {
  std::mt19937_64 rng(3);
  const auto& cats = known_categories();
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    Sentence s;
    for (int i = 1; i <= n; ++i) s.tokens.push_back({i, "t", "t", "X", {"_", "_", "_", "_", "_", "_"}, "*"});
    const int m = static_cast<int>(rng() % 5);
    for (int k = 0; k < m; ++k) {
      std::vector<int> pos;
      for (int i = 1; i <= n; ++i)
        if (rng() % 3 == 0) pos.push_back(i);
      if (pos.empty()) pos.push_back(1 + static_cast<int>(rng() % n));
      s.mwes.push_back({static_cast<int>(rng() % 50) + 1, rng() % 5 ? cats[rng() % cats.size()] : "", pos});
    }
    Corpus c;
    c.sentences.push_back(s);
    const Sentence canonical = canonicalize(s);
    const auto back = parse_cupt(write_cupt(c)).corpus.sentences.at(0);
    ASSERT_EQ(back.mwes, canonical.mwes) << "trial " << trial;
  }
}
