#include "mweforge/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace mweforge {

namespace {

std::vector<int> position_set(const MweInstance& mwe) {
  std::vector<int> p = mwe.token_positions;
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  return p;
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double ratio(std::size_t num, std::size_t den) { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }

ScopeResult scored(const MatchCounts& counts) { return {counts, prf(counts)}; }

}  // namespace

MatchCounts strict_match(const std::vector<MweInstance>& gold, const std::vector<MweInstance>& pred, bool category_strict) {
  std::vector<std::vector<int>> gold_sets;
  for (const auto& g : gold) gold_sets.push_back(position_set(g));
  std::vector<bool> used(gold.size(), false);
  MatchCounts counts;
  for (const auto& p : pred) {
    const auto pset = position_set(p);
    bool matched = false;
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (used[g] || gold_sets[g] != pset) continue;
      if (category_strict && gold[g].category != p.category) continue;
      used[g] = true;
      matched = true;
      break;
    }
    if (matched) ++counts.tp;
    else ++counts.fp;
  }
  counts.fn = gold.size() - counts.tp;
  return counts;
}

Scores prf(const MatchCounts& c) {
  Scores s;
  s.precision = ratio(c.tp, c.tp + c.fp);
  s.recall = ratio(c.tp, c.tp + c.fn);
  s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

LemmaKey lemma_key(const Sentence& sentence, const MweInstance& mwe, std::vector<Diagnostic>* diagnostics) {
  LemmaKey key;
  for (int p : mwe.token_positions) {
    const Token& token = sentence.tokens.at(static_cast<std::size_t>(p - 1));
    if (token.lemma.empty() || token.lemma == "_") {
      if (diagnostics)
        diagnostics->push_back({0, "sentence " + sentence.sentence_id + " token " + std::to_string(p) + ": no lemma, using form"});
      key.push_back(lowercase(token.form));
    } else {
      key.push_back(lowercase(token.lemma));
    }
  }
  std::sort(key.begin(), key.end());
  return key;
}

std::set<LemmaKey> annotated_keys(const std::vector<const Corpus*>& corpora, std::vector<Diagnostic>* diagnostics) {
  std::set<LemmaKey> keys;
  for (const Corpus* corpus : corpora)
    for (const auto& sentence : corpus->sentences)
      for (const auto& mwe : sentence.mwes) keys.insert(lemma_key(sentence, mwe, diagnostics));
  return keys;
}

Partition unseen_partition(const Corpus& test, const std::set<LemmaKey>& reference, std::vector<Diagnostic>* diagnostics) {
  Partition part;
  for (std::size_t s = 0; s < test.sentences.size(); ++s) {
    const Sentence& sentence = test.sentences[s];
    for (std::size_t m = 0; m < sentence.mwes.size(); ++m) {
      const bool seen = reference.count(lemma_key(sentence, sentence.mwes[m], diagnostics)) > 0;
      (seen ? part.seen : part.unseen).push_back({s, m});
    }
  }
  return part;
}

Partition unseen_partition(const Corpus& test, const Corpus& train, const Corpus* dev, UnseenReference scope,
                           std::vector<Diagnostic>* diagnostics) {
  std::vector<const Corpus*> refs{&train};
  if (dev && scope == UnseenReference::train_dev) refs.push_back(dev);
  return unseen_partition(test, annotated_keys(refs, diagnostics), diagnostics);
}

EvalReport evaluate(const Corpus& gold, const Corpus& pred, const std::set<LemmaKey>& reference, const EvalOptions& options) {
  EvalReport report;
  const std::size_t n = std::min(gold.sentences.size(), pred.sentences.size());
  for (std::size_t s = 0; s < n; ++s) {
    const Sentence& g = gold.sentences[s];
    const Sentence& p = pred.sentences[s];
    if (g.sentence_id != p.sentence_id || g.tokens.size() != p.tokens.size())
      throw AlignmentError("sentence misalignment at '" + (g.sentence_id.empty() ? "#" + std::to_string(s + 1) : g.sentence_id) +
                           "'");
  }
  if (gold.sentences.size() != pred.sentences.size()) {
    const std::string id = n < gold.sentences.size() ? gold.sentences[n].sentence_id : pred.sentences[n].sentence_id;
    throw AlignmentError("sentence misalignment at '" + (id.empty() ? "#" + std::to_string(n + 1) : id) + "': sentence counts differ");
  }

  MatchCounts global, unseen, seen;
  for (std::size_t s = 0; s < n; ++s) {
    const Sentence& g = gold.sentences[s];
    const Sentence& p = pred.sentences[s];
    global += strict_match(g.mwes, p.mwes, options.category_strict);

    std::vector<MweInstance> gold_unseen, gold_seen, pred_unseen, pred_seen;
    for (const auto& mwe : g.mwes) {
      const bool is_seen = reference.count(lemma_key(g, mwe, &report.diagnostics)) > 0;
      (is_seen ? gold_seen : gold_unseen).push_back(mwe);
    }
    for (const auto& mwe : p.mwes) {
      const bool is_seen = reference.count(lemma_key(p, mwe, &report.diagnostics)) > 0;
      (is_seen ? pred_seen : pred_unseen).push_back(mwe);
    }
    report.gold_seen += gold_seen.size();
    report.gold_unseen += gold_unseen.size();
    unseen += strict_match(gold_unseen, pred_unseen, options.category_strict);
    seen += strict_match(gold_seen, pred_seen, options.category_strict);
  }
  report.global = scored(global);
  report.unseen = scored(unseen);
  report.seen = scored(seen);
  return report;
}

EvalReport evaluate(const Corpus& gold, const Corpus& pred, const Corpus& reference, const EvalOptions& options) {
  std::vector<Diagnostic> diagnostics;
  const auto keys = annotated_keys({&reference}, &diagnostics);
  EvalReport report = evaluate(gold, pred, keys, options);
  report.diagnostics.insert(report.diagnostics.begin(), diagnostics.begin(), diagnostics.end());
  return report;
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
  EvalReport avg;
  if (reports.empty()) return avg;
  const double n = static_cast<double>(reports.size());
  auto accumulate = [n](ScopeResult& into, const ScopeResult& from) {
    into.counts += from.counts;
    into.scores.precision += from.scores.precision / n;
    into.scores.recall += from.scores.recall / n;
    into.scores.f1 += from.scores.f1 / n;
  };
  for (const auto& r : reports) {
    accumulate(avg.global, r.global);
    accumulate(avg.unseen, r.unseen);
    accumulate(avg.seen, r.seen);
    avg.gold_seen += r.gold_seen;
    avg.gold_unseen += r.gold_unseen;
  }
  return avg;
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
  std::size_t lang_w = 8, method_w = 6;
  for (const auto& r : rows) {
    lang_w = std::max(lang_w, r.language.size());
    method_w = std::max(method_w, r.method.size());
  }
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-*s  %-23s  %-23s\n", static_cast<int>(lang_w), "", static_cast<int>(method_w), "",
                "Global MWE-Based", "Unseen MWE-Based");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-*s  %-*s  %7s %7s %7s  %7s %7s %7s\n", static_cast<int>(lang_w), "Language",
                static_cast<int>(method_w), "Method", "P", "R", "F1", "P", "R", "F1");
  os << buf;
  for (const auto& r : rows) {
    const auto& g = r.report.global.scores;
    const auto& u = r.report.unseen.scores;
    std::snprintf(buf, sizeof buf, "%-*s  %-*s  %7.3f %7.3f %7.3f  %7.3f %7.3f %7.3f\n", static_cast<int>(lang_w),
                  r.language.c_str(), static_cast<int>(method_w), r.method.c_str(), g.precision, g.recall, g.f1, u.precision,
                  u.recall, u.f1);
    os << buf;
  }
  return os.str();
}

std::string format_report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "language,method,global_tp,global_fp,global_fn,global_p,global_r,global_f1,"
        "unseen_tp,unseen_fp,unseen_fn,unseen_p,unseen_r,unseen_f1,seen_p,seen_r,seen_f1,gold_seen,gold_unseen\n";
  char buf[512];
  for (const auto& r : rows) {
    const auto& g = r.report.global;
    const auto& u = r.report.unseen;
    const auto& s = r.report.seen.scores;
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%zu,%.6f,%.6f,%.6f,%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu\n",
                  r.language.c_str(), r.method.c_str(), g.counts.tp, g.counts.fp, g.counts.fn, g.scores.precision,
                  g.scores.recall, g.scores.f1, u.counts.tp, u.counts.fp, u.counts.fn, u.scores.precision, u.scores.recall,
                  u.scores.f1, s.precision, s.recall, s.f1, r.report.gold_seen, r.report.gold_unseen);
    os << buf;
  }
  return os.str();
}

std::optional<double> improvement_delta(double baseline_f1, double new_f1) {
  if (baseline_f1 == 0.0) return std::nullopt;
  return 100.0 * (new_f1 - baseline_f1) / baseline_f1;
}

std::string format_delta(const std::optional<double>& delta) {
  if (!delta) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f%%", *delta);
  return buf;
}

}  // namespace mweforge
