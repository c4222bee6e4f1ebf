#ifndef MWEFORGE_CUPT_HPP
#define MWEFORGE_CUPT_HPP

#include <cstddef>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mweforge {

/// Thrown for malformed corpus input. Carries the 1-based line number (0 when unknown).
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Diagnostic {
  std::size_t line = 0;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

/// Known VMWE categories, in lexicographic order.
const std::vector<std::string>& known_categories();
bool is_known_category(std::string_view category);

struct Token {
  int position = 0;
  std::string form;
  std::string lemma;
  std::string upos;
  std::vector<std::string> other_cols;
  std::string mwe_cell = "*";

  /// "_" marks a token that was never annotated, as opposed to "*" (annotated, no MWE).
  bool untagged() const { return mwe_cell == "_"; }

  bool operator==(const Token&) const = default;
};

/// One annotated expression. An empty category means the annotation carried none.
struct MweInstance {
  int mwe_id = 0;
  std::string category;
  std::vector<int> token_positions;

  bool operator==(const MweInstance&) const = default;
};

/// A line kept verbatim that does not denote a syntactic word (ranges "3-4", empty nodes "5.1").
struct RawRow {
  std::size_t before_word = 0;
  std::string line;

  bool operator==(const RawRow&) const = default;
};

struct Sentence {
  std::string sentence_id;
  std::vector<std::string> metadata_lines;
  std::vector<Token> tokens;
  std::vector<RawRow> raw_rows;
  /// Sorted by first token position, then id.
  std::vector<MweInstance> mwes;

  bool operator==(const Sentence&) const = default;
};

/// Column positions of a cupt file; defaults follow the 11-column PARSEME layout.
struct ColumnLayout {
  std::vector<std::string> names{"ID",   "FORM", "LEMMA", "UPOS", "XPOS",       "FEATS",
                                 "HEAD", "DEPREL", "DEPS", "MISC", "PARSEME:MWE"};
  std::size_t id = 0;
  std::size_t form = 1;
  std::size_t lemma = 2;
  std::size_t upos = 3;
  std::size_t mwe = 10;

  std::size_t width() const { return names.size(); }
  bool operator==(const ColumnLayout&) const = default;
};

struct Corpus {
  /// Lines preceding the first sentence's own metadata (e.g. "# global.columns = ...").
  std::vector<std::string> header_lines;
  ColumnLayout layout;
  std::vector<Sentence> sentences;

  bool operator==(const Corpus&) const = default;
};

struct ParseOptions {
  /// Report continuations of an id that never received a category.
  bool strict_category = false;
  /// Keep the last column verbatim in Token::mwe_cell instead of decoding memberships.
  bool raw_mwe_column = false;
};

struct ParseResult {
  Corpus corpus;
  std::vector<Diagnostic> diagnostics;
};

ParseResult parse_cupt(std::istream& in, const ParseOptions& options = {});
ParseResult parse_cupt(std::string_view text, const ParseOptions& options = {});
ParseResult read_cupt_file(const std::string& path, const ParseOptions& options = {});

/// Encodes `mwes` into per-token cells with ids renumbered 1..n by first position.
/// Throws std::invalid_argument when an instance references a missing position.
std::vector<std::string> encode_mwe_cells(const Sentence& sentence);

std::string write_cupt(const Corpus& corpus);
/// Same layout, with the MWE column taken from `cells` (one string per token).
std::string write_cupt(const Corpus& corpus, const std::function<std::vector<std::string>(const Sentence&)>& cells);
void write_cupt_file(const Corpus& corpus, const std::string& path);

/// Returns a copy whose MWE ids are 1..n in first-position order and whose cells agree.
Sentence canonicalize(const Sentence& sentence);

struct CorpusStats {
  std::size_t sentence_count = 0;
  std::size_t token_count = 0;
  double avg_sentence_length = 0.0;
  std::size_t mwe_count = 0;
  std::map<std::string, std::size_t> per_category_counts;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string format_stats(const CorpusStats& stats);

}  // namespace mweforge

#endif  // MWEFORGE_CUPT_HPP
