#include "mweforge/cupt.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <utility>

namespace mweforge {

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  if (s.empty()) return std::nullopt;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::optional<std::string> metadata_value(std::string_view line, std::string_view key) {
  // "# key = value"
  if (!starts_with(line, "#")) return std::nullopt;
  auto rest = line.substr(1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (!starts_with(rest, key)) return std::nullopt;
  rest.remove_prefix(key.size());
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (!starts_with(rest, "=")) return std::nullopt;
  rest.remove_prefix(1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  return std::string(rest);
}

ColumnLayout layout_from_header(std::string_view value, std::size_t line_no) {
  ColumnLayout layout;
  layout.names.clear();
  std::istringstream ss{std::string(value)};
  for (std::string name; ss >> name;) layout.names.push_back(name);
  auto index_of = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(layout.names.begin(), layout.names.end(), name);
    if (it == layout.names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - layout.names.begin());
  };
  const auto id = index_of("ID");
  const auto form = index_of("FORM");
  const auto lemma = index_of("LEMMA");
  const auto upos = index_of("UPOS");
  if (!id || !form || !lemma || !upos) throw FormatError(line_no, "global.columns lacks ID, FORM, LEMMA or UPOS");
  layout.id = *id;
  layout.form = *form;
  layout.lemma = *lemma;
  layout.upos = *upos;
  layout.mwe = index_of("PARSEME:MWE").value_or(layout.names.size() - 1);
  return layout;
}

struct PendingMwe {
  std::optional<std::string> category;
  std::vector<int> positions;
  std::size_t first_line = 0;
};

class SentenceBuilder {
 public:
  SentenceBuilder(const ColumnLayout& layout, const ParseOptions& options, std::vector<Diagnostic>& diagnostics)
      : layout_(layout), options_(options), diagnostics_(diagnostics) {}

  bool empty() const { return sentence_.tokens.empty() && sentence_.metadata_lines.empty() && sentence_.raw_rows.empty(); }

  void add_metadata(const std::string& line) {
    if (sentence_.sentence_id.empty()) {
      if (auto v = metadata_value(line, "source_sent_id")) sentence_.sentence_id = *v;
      else if (auto w = metadata_value(line, "sent_id")) sentence_.sentence_id = *w;
    }
    sentence_.metadata_lines.push_back(line);
  }

  void add_row(const std::string& line, std::size_t line_no) {
    auto cols = split(line, '\t');
    if (cols.size() != layout_.width())
      throw FormatError(line_no, "expected " + std::to_string(layout_.width()) + " columns, found " + std::to_string(cols.size()));
    const std::string& id = cols[layout_.id];
    if (id.find_first_of("-.") != std::string::npos) {
      sentence_.raw_rows.push_back({sentence_.tokens.size(), line});
      return;
    }
    const auto position = parse_int(id);
    if (!position || *position != static_cast<int>(sentence_.tokens.size()) + 1)
      throw FormatError(line_no, "token id '" + id + "' out of sequence");
    Token token;
    token.position = *position;
    token.form = cols[layout_.form];
    token.lemma = cols[layout_.lemma];
    token.upos = cols[layout_.upos];
    token.mwe_cell = cols[layout_.mwe];
    if (token.form.empty()) throw FormatError(line_no, "empty FORM");
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c == layout_.id || c == layout_.form || c == layout_.lemma || c == layout_.upos || c == layout_.mwe) continue;
      token.other_cols.push_back(std::move(cols[c]));
    }
    if (!options_.raw_mwe_column) decode_cell(token, line_no);
    sentence_.tokens.push_back(std::move(token));
  }

  Sentence finish() {
    for (auto& [id, pending] : pending_) {
      if (!pending.category && options_.strict_category)
        diagnostics_.push_back({pending.first_line, "MWE " + std::to_string(id) + " continues without a category"});
      sentence_.mwes.push_back({id, pending.category.value_or(""), std::move(pending.positions)});
    }
    std::sort(sentence_.mwes.begin(), sentence_.mwes.end(), [](const MweInstance& a, const MweInstance& b) {
      if (a.token_positions.front() != b.token_positions.front()) return a.token_positions.front() < b.token_positions.front();
      return a.mwe_id < b.mwe_id;
    });
    pending_.clear();
    return std::exchange(sentence_, Sentence{});
  }

 private:
  void decode_cell(const Token& token, std::size_t line_no) {
    const std::string& cell = token.mwe_cell;
    if (cell == "*" || cell == "_") return;
    std::set<int> seen_here;
    for (const auto& item : split(cell, ';')) {
      const auto colon = item.find(':');
      const auto id = parse_int(std::string_view(item).substr(0, colon));
      if (!id || *id <= 0) throw FormatError(line_no, "bad MWE membership '" + item + "'");
      if (!seen_here.insert(*id).second) throw FormatError(line_no, "MWE " + std::to_string(*id) + " listed twice on one token");
      auto [it, inserted] = pending_.try_emplace(*id);
      PendingMwe& mwe = it->second;
      if (inserted) mwe.first_line = line_no;
      if (colon != std::string::npos) {
        std::string category = item.substr(colon + 1);
        if (mwe.category) throw FormatError(line_no, "MWE " + std::to_string(*id) + " given a category twice");
        if (!inserted) diagnostics_.push_back({line_no, "MWE " + std::to_string(*id) + " receives its category after its first token"});
        if (!is_known_category(category)) diagnostics_.push_back({line_no, "unknown MWE category '" + category + "'"});
        mwe.category = std::move(category);
      }
      mwe.positions.push_back(token.position);
    }
  }

  const ColumnLayout& layout_;
  const ParseOptions& options_;
  std::vector<Diagnostic>& diagnostics_;
  Sentence sentence_;
  std::map<int, PendingMwe> pending_;
};

}  // namespace

const std::vector<std::string>& known_categories() {
  static const std::vector<std::string> categories{"IAV",      "IRV",      "LS.ICV",   "LVC.cause", "LVC.full",
                                                   "MVC",      "VID",      "VPC.full", "VPC.semi"};
  return categories;
}

bool is_known_category(std::string_view category) {
  const auto& all = known_categories();
  return std::find(all.begin(), all.end(), category) != all.end();
}

ParseResult parse_cupt(std::istream& in, const ParseOptions& options) {
  ParseResult result;
  Corpus& corpus = result.corpus;
  std::optional<SentenceBuilder> builder;
  builder.emplace(corpus.layout, options, result.diagnostics);

  std::string line;
  std::size_t line_no = 0;
  bool in_preamble = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      if (!builder->empty()) corpus.sentences.push_back(builder->finish());
      in_preamble = false;
      continue;
    }
    if (line.front() == '#') {
      if (in_preamble && builder->empty()) {
        if (auto columns = metadata_value(line, "global.columns")) {
          corpus.layout = layout_from_header(*columns, line_no);
          corpus.header_lines.push_back(line);
          continue;
        }
      }
      in_preamble = false;
      builder->add_metadata(line);
      continue;
    }
    in_preamble = false;
    builder->add_row(line, line_no);
  }
  if (!builder->empty()) corpus.sentences.push_back(builder->finish());
  return result;
}

ParseResult parse_cupt(std::string_view text, const ParseOptions& options) {
  std::istringstream in{std::string(text)};
  return parse_cupt(in, options);
}

ParseResult read_cupt_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_cupt(in, options);
}

std::vector<std::string> encode_mwe_cells(const Sentence& sentence) {
  const int n = static_cast<int>(sentence.tokens.size());
  std::vector<std::string> cells(sentence.tokens.size());

  std::vector<const MweInstance*> order;
  for (const auto& mwe : sentence.mwes) {
    if (mwe.token_positions.empty()) throw std::invalid_argument("MWE " + std::to_string(mwe.mwe_id) + " has no tokens");
    for (int p : mwe.token_positions)
      if (p < 1 || p > n)
        throw std::invalid_argument("MWE " + std::to_string(mwe.mwe_id) + " references missing position " + std::to_string(p));
    order.push_back(&mwe);
  }
  std::stable_sort(order.begin(), order.end(), [](const MweInstance* a, const MweInstance* b) {
    const int fa = *std::min_element(a->token_positions.begin(), a->token_positions.end());
    const int fb = *std::min_element(b->token_positions.begin(), b->token_positions.end());
    if (fa != fb) return fa < fb;
    return a->mwe_id < b->mwe_id;
  });

  for (std::size_t k = 0; k < order.size(); ++k) {
    const MweInstance& mwe = *order[k];
    std::vector<int> positions = mwe.token_positions;
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    const std::string id = std::to_string(k + 1);
    for (std::size_t j = 0; j < positions.size(); ++j) {
      std::string& cell = cells[static_cast<std::size_t>(positions[j] - 1)];
      if (!cell.empty()) cell += ';';
      cell += id;
      if (j == 0 && !mwe.category.empty()) cell += ":" + mwe.category;
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].empty()) cells[i] = sentence.tokens[i].untagged() ? "_" : "*";
  return cells;
}

Sentence canonicalize(const Sentence& sentence) {
  Sentence out = sentence;
  const auto cells = encode_mwe_cells(sentence);
  for (std::size_t i = 0; i < cells.size(); ++i) out.tokens[i].mwe_cell = cells[i];
  for (auto& mwe : out.mwes) {
    std::sort(mwe.token_positions.begin(), mwe.token_positions.end());
    mwe.token_positions.erase(std::unique(mwe.token_positions.begin(), mwe.token_positions.end()), mwe.token_positions.end());
  }
  std::stable_sort(out.mwes.begin(), out.mwes.end(), [](const MweInstance& a, const MweInstance& b) {
    if (a.token_positions.front() != b.token_positions.front()) return a.token_positions.front() < b.token_positions.front();
    return a.mwe_id < b.mwe_id;
  });
  for (std::size_t k = 0; k < out.mwes.size(); ++k) out.mwes[k].mwe_id = static_cast<int>(k + 1);
  return out;
}

std::string write_cupt(const Corpus& corpus) { return write_cupt(corpus, encode_mwe_cells); }

std::string write_cupt(const Corpus& corpus, const std::function<std::vector<std::string>(const Sentence&)>& encode) {
  std::string out;
  for (const auto& line : corpus.header_lines) out += line + '\n';
  const ColumnLayout& layout = corpus.layout;
  for (const auto& sentence : corpus.sentences) {
    for (const auto& line : sentence.metadata_lines) out += line + '\n';
    const auto cells = encode(sentence);
    if (cells.size() != sentence.tokens.size()) throw std::invalid_argument("write_cupt: cell count differs from token count");
    std::size_t raw = 0;
    auto flush_raw = [&](std::size_t before) {
      while (raw < sentence.raw_rows.size() && sentence.raw_rows[raw].before_word <= before)
        out += sentence.raw_rows[raw++].line + '\n';
    };
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      flush_raw(i);
      const Token& token = sentence.tokens[i];
      std::size_t other = 0;
      for (std::size_t c = 0; c < layout.width(); ++c) {
        if (c) out += '\t';
        if (c == layout.id) out += std::to_string(token.position);
        else if (c == layout.form) out += token.form;
        else if (c == layout.lemma) out += token.lemma;
        else if (c == layout.upos) out += token.upos;
        else if (c == layout.mwe) out += cells[i];
        else out += other < token.other_cols.size() ? token.other_cols[other++] : "_";
      }
      out += '\n';
    }
    flush_raw(sentence.tokens.size());
    out += '\n';
  }
  return out;
}

void write_cupt_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << write_cupt(corpus);
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.sentence_count = corpus.sentences.size();
  for (const auto& sentence : corpus.sentences) {
    stats.token_count += sentence.tokens.size();
    stats.mwe_count += sentence.mwes.size();
    for (const auto& mwe : sentence.mwes) ++stats.per_category_counts[mwe.category.empty() ? "_" : mwe.category];
  }
  if (stats.sentence_count > 0)
    stats.avg_sentence_length = static_cast<double>(stats.token_count) / static_cast<double>(stats.sentence_count);
  return stats;
}

std::string format_stats(const CorpusStats& stats) {
  std::ostringstream os;
  os << "sentences\t" << stats.sentence_count << '\n'
     << "tokens\t" << stats.token_count << '\n'
     << "avg_length\t" << std::fixed << std::setprecision(1) << stats.avg_sentence_length << '\n'
     << "mwes\t" << stats.mwe_count << '\n';
  for (const auto& [category, count] : stats.per_category_counts) os << "category:" << category << '\t' << count << '\n';
  return os.str();
}

}  // namespace mweforge
