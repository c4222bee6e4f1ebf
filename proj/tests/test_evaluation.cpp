#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "mweforge/evaluation.hpp"

using namespace mweforge;

namespace {

Sentence make_sentence(const std::string& id, const std::vector<std::pair<std::string, std::string>>& words,
                       std::vector<MweInstance> mwes = {}) {
  Sentence s;
  s.sentence_id = id;
  int pos = 0;
  for (const auto& [form, lemma] : words) {
    Token t;
    t.position = ++pos;
    t.form = form;
    t.lemma = lemma;
    t.other_cols = {"_", "_", "_", "_", "_", "_"};
    s.tokens.push_back(t);
  }
  s.mwes = std::move(mwes);
  return canonicalize(s);
}

MweInstance mwe(std::vector<int> positions, std::string cat = "VID") { return {0, std::move(cat), std::move(positions)}; }

// Counts matches by tabulating token-set multiplicities on both sides.
MatchCounts oracle_counts(const std::vector<MweInstance>& gold, const std::vector<MweInstance>& pred, bool category) {
  std::map<std::pair<std::vector<int>, std::string>, int> g, p;
  for (const auto& m : gold) {
    auto key = m.token_positions;
    std::sort(key.begin(), key.end());
    ++g[{key, category ? m.category : ""}];
  }
  for (const auto& m : pred) {
    auto key = m.token_positions;
    std::sort(key.begin(), key.end());
    ++p[{key, category ? m.category : ""}];
  }
  std::size_t tp = 0;
  for (const auto& [key, n] : p)
    if (auto it = g.find(key); it != g.end()) tp += static_cast<std::size_t>(std::min(n, it->second));
  return {tp, pred.size() - tp, gold.size() - tp};
}

std::vector<MweInstance> random_instances(std::mt19937_64& rng, int tokens) {
  std::vector<MweInstance> out;
  const int count = static_cast<int>(rng() % 5);
  for (int i = 0; i < count; ++i) {
    std::vector<int> pos;
    for (int t = 1; t <= tokens; ++t)
      if (rng() % 3 == 0) pos.push_back(t);
    if (pos.size() < 2) pos = {1 + static_cast<int>(rng() % (tokens - 1)), tokens};
    if (pos[0] == pos[1]) pos = {1, tokens};
    out.push_back({i + 1, rng() % 2 ? "VID" : "LVC.full", pos});
  }
  return out;
}

}  // namespace

TEST(StrictMatch, ExactTokenSetRequired) {
  const auto counts = strict_match({mwe({1, 3}), mwe({4, 5})}, {mwe({1, 3}), mwe({4, 5, 6})});
  EXPECT_EQ(counts, (MatchCounts{1, 1, 1}));
}

TEST(StrictMatch, CategoryOnlyWhenStrict) {
  const std::vector<MweInstance> gold{mwe({1, 2}, "VID")};
  const std::vector<MweInstance> pred{mwe({1, 2}, "LVC.full")};
  EXPECT_EQ(strict_match(gold, pred).tp, 1u);
  EXPECT_EQ(strict_match(gold, pred, true).tp, 0u);
}

TEST(StrictMatch, EachGoldMatchesOnce) {
  const auto counts = strict_match({mwe({1, 2})}, {mwe({1, 2}), mwe({2, 1})});
  EXPECT_EQ(counts, (MatchCounts{1, 1, 0}));
}

TEST(Prf, WorkedValues) {
  const Scores s = prf({2, 1, 2});
  EXPECT_NEAR(s.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.recall, 0.5, 1e-12);
  EXPECT_NEAR(s.f1, 4.0 / 7.0, 1e-12);
}

TEST(Prf, ZeroDenominatorsAreZero) {
  const Scores s = prf({0, 0, 0});
  EXPECT_EQ(s.precision, 0.0);
  EXPECT_EQ(s.recall, 0.0);
  EXPECT_EQ(s.f1, 0.0);
  EXPECT_EQ(prf({0, 3, 0}).recall, 0.0);
}

TEST(Unseen, InflectedOccurrenceOfTrainedExpressionIsSeen) {
  Corpus train;
  train.sentences.push_back(make_sentence("t1", {{"face", "face"}, {"o", "un"}, {"vizită", "vizită"}}, {mwe({1, 3}, "LVC.full")}));
  Corpus test;
  test.sentences.push_back(make_sentence("x1", {{"făcea", "face"}, {"vizite", "vizită"}}, {mwe({1, 2}, "LVC.full")}));
  test.sentences.push_back(make_sentence("x2", {{"dă", "da"}, {"mâna", "mână"}}, {mwe({1, 2})}));
  const Partition p = unseen_partition(test, train);
  ASSERT_EQ(p.seen.size(), 1u);
  ASSERT_EQ(p.unseen.size(), 1u);
  EXPECT_EQ(p.seen[0], (MweRef{0, 0}));
  EXPECT_EQ(p.unseen[0], (MweRef{1, 0}));
}

TEST(Unseen, LemmaMultisetIgnoresOrderAndCase) {
  Corpus train;
  train.sentences.push_back(make_sentence("t", {{"Take", "Take"}, {"part", "part"}}, {mwe({1, 2})}));
  Corpus test;
  test.sentences.push_back(make_sentence("x", {{"part", "part"}, {"took", "take"}}, {mwe({1, 2})}));
  test.sentences.push_back(make_sentence("y", {{"part", "part"}, {"part", "part"}}, {mwe({1, 2})}));
  const Partition p = unseen_partition(test, train);
  EXPECT_EQ(p.seen.size(), 1u);
  EXPECT_EQ(p.unseen.size(), 1u);
}

TEST(Unseen, DevIncludedByDefault) {
  Corpus train, dev, test;
  train.sentences.push_back(make_sentence("t", {{"a", "a"}, {"b", "b"}}));
  dev.sentences.push_back(make_sentence("d", {{"c", "c"}, {"d", "d"}}, {mwe({1, 2})}));
  test.sentences.push_back(make_sentence("x", {{"c", "c"}, {"d", "d"}}, {mwe({1, 2})}));
  EXPECT_EQ(unseen_partition(test, train, &dev).seen.size(), 1u);
  EXPECT_EQ(unseen_partition(test, train, &dev, UnseenReference::train).unseen.size(), 1u);
}

TEST(Unseen, MissingLemmaFallsBackToForm) {
  const Sentence s = make_sentence("x", {{"Kick", "_"}, {"bucket", "bucket"}}, {mwe({1, 2})});
  std::vector<Diagnostic> diags;
  const LemmaKey key = lemma_key(s, s.mwes[0], &diags);
  EXPECT_EQ(key, (LemmaKey{"bucket", "kick"}));
  EXPECT_EQ(diags.size(), 1u);
}

TEST(Evaluate, PerfectPrediction) {
  Corpus gold;
  gold.sentences.push_back(make_sentence("a", {{"a", "a"}, {"b", "b"}, {"c", "c"}}, {mwe({1, 3})}));
  gold.sentences.push_back(make_sentence("b", {{"d", "d"}, {"e", "e"}}, {mwe({1, 2})}));
  Corpus train;
  train.sentences.push_back(make_sentence("t", {{"a", "a"}, {"c", "c"}}, {mwe({1, 2})}));
  const EvalReport r = evaluate(gold, gold, train);
  EXPECT_EQ(r.global.scores.f1, 1.0);
  EXPECT_EQ(r.unseen.scores.f1, 1.0);
  EXPECT_EQ(r.gold_seen, 1u);
  EXPECT_EQ(r.gold_unseen, 1u);
}

TEST(Evaluate, EmptyPrediction) {
  Corpus gold;
  gold.sentences.push_back(make_sentence("a", {{"a", "a"}, {"b", "b"}}, {mwe({1, 2})}));
  Corpus pred = gold;
  pred.sentences[0].mwes.clear();
  const EvalReport r = evaluate(gold, pred, Corpus{});
  EXPECT_EQ(r.global.counts, (MatchCounts{0, 0, 1}));
  EXPECT_EQ(r.global.scores.precision, 0.0);
  EXPECT_EQ(r.global.scores.f1, 0.0);
}

TEST(Evaluate, MisalignmentNamesSentence) {
  Corpus gold, pred;
  gold.sentences.push_back(make_sentence("s1", {{"a", "a"}, {"b", "b"}}));
  pred.sentences.push_back(make_sentence("s1", {{"a", "a"}}));
  try {
    evaluate(gold, pred, Corpus{});
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
  }
  pred = gold;
  pred.sentences.push_back(make_sentence("s2", {{"a", "a"}}));
  EXPECT_THROW(evaluate(gold, pred, Corpus{}), AlignmentError);
}

TEST(Evaluate, AverageOfReports) {
  EvalReport a, b;
  a.global.scores = {1.0, 0.5, 2.0 / 3.0};
  b.global.scores = {0.0, 0.5, 0.0};
  a.global.counts = {1, 0, 1};
  b.global.counts = {0, 2, 1};
  const EvalReport avg = average_reports({a, b});
  EXPECT_DOUBLE_EQ(avg.global.scores.precision, 0.5);
  EXPECT_DOUBLE_EQ(avg.global.scores.f1, 1.0 / 3.0);
  EXPECT_EQ(avg.global.counts, (MatchCounts{1, 2, 2}));
}

TEST(Evaluate, ReportTableMentionsScopes) {
  EvalReport r;
  r.global.scores = {1, 1, 1};
  const std::string table = format_report_table({{"pl", "multilingual", r}});
  EXPECT_NE(table.find("pl"), std::string::npos);
  EXPECT_NE(table.find("1.000"), std::string::npos);
  const std::string csv = format_report_csv({{"pl", "multilingual", r}});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Delta, WorkedValues) {
  EXPECT_NEAR(*improvement_delta(30.07, 43.70), 45.3, 0.05);
  EXPECT_NEAR(*improvement_delta(19.54, 37.28), 90.8, 0.05);
  EXPECT_EQ(*improvement_delta(0.5, 0.5), 0.0);
  EXPECT_FALSE(improvement_delta(0.0, 0.4).has_value());
  EXPECT_EQ(format_delta(std::nullopt), "n/a");
  EXPECT_EQ(format_delta(improvement_delta(30.07, 43.70)), "+45.33%");
  EXPECT_EQ(format_delta(improvement_delta(19.54, 37.28)), "+90.79%");
  EXPECT_EQ(format_delta(improvement_delta(0.4, 0.2)), "-50.00%");
}

TEST(EvaluationProperty, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int tokens = 3 + static_cast<int>(rng() % 5);
    const auto gold = random_instances(rng, tokens);
    auto pred = random_instances(rng, tokens);
    if (!gold.empty() && rng() % 2) pred.push_back(gold[rng() % gold.size()]);
    for (bool cat : {false, true}) {
      const MatchCounts got = strict_match(gold, pred, cat);
      ASSERT_EQ(got, oracle_counts(gold, pred, cat)) << "trial " << trial;
      EXPECT_EQ(got.tp + got.fp, pred.size());
      EXPECT_EQ(got.tp + got.fn, gold.size());
    }
  }
}

TEST(EvaluationProperty, SwappingGoldAndPredictionSwapsPrecisionAndRecall) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const auto gold = random_instances(rng, 6);
    const auto pred = random_instances(rng, 6);
    const Scores a = prf(strict_match(gold, pred));
    const Scores b = prf(strict_match(pred, gold));
    EXPECT_DOUBLE_EQ(a.precision, b.recall);
    EXPECT_DOUBLE_EQ(a.recall, b.precision);
    EXPECT_DOUBLE_EQ(a.f1, b.f1);
  }
}

TEST(EvaluationProperty, AddingCorrectPredictionNeverLowersRecall) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const auto gold = random_instances(rng, 6);
    if (gold.empty()) continue;
    auto pred = random_instances(rng, 6);
    const double before = prf(strict_match(gold, pred)).recall;
    pred.push_back(gold[rng() % gold.size()]);
    EXPECT_GE(prf(strict_match(gold, pred)).recall, before);
  }
}

TEST(EvaluationProperty, PartitionCoversEveryGoldExpression) {
  std::mt19937_64 rng(14);
  const std::vector<std::string> lemmas{"a", "b", "c", "d"};
  for (int trial = 0; trial < 200; ++trial) {
    Corpus train, test;
    for (int s = 0; s < 4; ++s) {
      std::vector<std::pair<std::string, std::string>> words;
      for (int t = 0; t < 5; ++t) {
        const auto& l = lemmas[rng() % lemmas.size()];
        words.push_back({l, l});
      }
      (s < 2 ? train : test).sentences.push_back(make_sentence("s" + std::to_string(s), words, random_instances(rng, 5)));
    }
    const Partition p = unseen_partition(test, train, nullptr, UnseenReference::train);
    std::vector<MweRef> all = p.seen;
    all.insert(all.end(), p.unseen.begin(), p.unseen.end());
    std::sort(all.begin(), all.end());
    std::size_t total = 0;
    for (const auto& s : test.sentences) total += s.mwes.size();
    EXPECT_EQ(all.size(), total);
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  }
}
