#ifndef MWEFORGE_EVALUATION_HPP
#define MWEFORGE_EVALUATION_HPP

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mweforge/cupt.hpp"

namespace mweforge {

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const MatchCounts&) const = default;
};

/// A prediction is a true positive iff an unmatched gold instance has exactly its token set
/// (and category, when `category_strict`).
MatchCounts strict_match(const std::vector<MweInstance>& gold, const std::vector<MweInstance>& pred, bool category_strict = false);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and F1 with every 0/0 defined as 0.
Scores prf(const MatchCounts& counts);

/// Sorted lowercased lemmas of an expression's tokens.
using LemmaKey = std::vector<std::string>;

/// Falls back to the lowercased form when the lemma is "_" or empty, recording a diagnostic.
LemmaKey lemma_key(const Sentence& sentence, const MweInstance& mwe, std::vector<Diagnostic>* diagnostics = nullptr);

/// Every annotated lemma multiset of the given corpora.
std::set<LemmaKey> annotated_keys(const std::vector<const Corpus*>& corpora, std::vector<Diagnostic>* diagnostics = nullptr);

enum class UnseenReference { train, train_dev };

struct MweRef {
  std::size_t sentence = 0;
  std::size_t mwe = 0;
  bool operator==(const MweRef&) const = default;
  auto operator<=>(const MweRef&) const = default;
};

struct Partition {
  std::vector<MweRef> seen;
  std::vector<MweRef> unseen;
};

Partition unseen_partition(const Corpus& test, const std::set<LemmaKey>& reference, std::vector<Diagnostic>* diagnostics = nullptr);

/// Reference is train, or train + dev when `scope` says so and `dev` is given.
Partition unseen_partition(const Corpus& test, const Corpus& train, const Corpus* dev = nullptr,
                           UnseenReference scope = UnseenReference::train_dev, std::vector<Diagnostic>* diagnostics = nullptr);

class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScopeResult {
  MatchCounts counts;
  Scores scores;
};

struct EvalReport {
  ScopeResult global;
  ScopeResult unseen;
  /// Restriction to gold and predicted instances whose lemma multiset is seen.
  ScopeResult seen;
  std::size_t gold_seen = 0;
  std::size_t gold_unseen = 0;
  std::vector<Diagnostic> diagnostics;
};

struct EvalOptions {
  bool category_strict = false;
};

/// Throws AlignmentError naming the first sentence whose id or length differs.
EvalReport evaluate(const Corpus& gold, const Corpus& pred, const std::set<LemmaKey>& reference, const EvalOptions& options = {});
EvalReport evaluate(const Corpus& gold, const Corpus& pred, const Corpus& reference, const EvalOptions& options = {});

struct ReportRow {
  std::string language;
  std::string method;
  EvalReport report;
};

/// Unweighted mean of each score over rows; counts are summed.
EvalReport average_reports(const std::vector<EvalReport>& reports);

/// Aligned text table: Language, Method, then P / R / F1 for global and unseen scopes.
std::string format_report_table(const std::vector<ReportRow>& rows);
std::string format_report_csv(const std::vector<ReportRow>& rows);

/// 100 (new - baseline) / baseline; absent when baseline is 0.
std::optional<double> improvement_delta(double baseline_f1, double new_f1);
std::string format_delta(const std::optional<double>& delta);

}  // namespace mweforge

#endif  // MWEFORGE_EVALUATION_HPP
