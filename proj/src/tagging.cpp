#include "mweforge/tagging.hpp"

#include <algorithm>
#include <sstream>
#include <string_view>

namespace mweforge {

namespace {

enum class LabelKind { outside, gap, begin, inside };

struct ParsedLabel {
  LabelKind kind;
  std::string category;
};

ParsedLabel parse_label(const std::string& label, std::size_t position) {
  if (label == kOutside) return {LabelKind::outside, {}};
  if (label == kGap) return {LabelKind::gap, {}};
  if (label == "B") return {LabelKind::begin, {}};
  if (label == "I") return {LabelKind::inside, {}};
  if (label.size() > 2 && label[1] == '-') {
    if (label[0] == 'B') return {LabelKind::begin, label.substr(2)};
    if (label[0] == 'I') return {LabelKind::inside, label.substr(2)};
  }
  throw TagError(position, "unknown label '" + label + "'");
}

std::vector<int> sorted_positions(const MweInstance& mwe) {
  std::vector<int> positions = mwe.token_positions;
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  return positions;
}

}  // namespace

std::string begin_label(const std::string& category) { return category.empty() ? "B" : "B-" + category; }
std::string inside_label(const std::string& category) { return category.empty() ? "I" : "I-" + category; }

std::string format_dropped(const DroppedMembership& d) {
  std::ostringstream os;
  os << d.sentence_id << '\t' << d.mwe.mwe_id << '\t' << (d.mwe.category.empty() ? "_" : d.mwe.category) << '\t';
  for (std::size_t i = 0; i < d.mwe.token_positions.size(); ++i) os << (i ? "," : "") << d.mwe.token_positions[i];
  os << '\t' << d.reason;
  return os.str();
}

std::vector<MweInstance> retained_mwes(const Sentence& sentence, std::vector<DroppedMembership>* dropped) {
  std::vector<MweInstance> candidates;
  for (const auto& mwe : sentence.mwes) {
    MweInstance copy = mwe;
    copy.token_positions = sorted_positions(mwe);
    if (!copy.token_positions.empty()) candidates.push_back(std::move(copy));
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const MweInstance& a, const MweInstance& b) {
    if (a.token_positions.front() != b.token_positions.front()) return a.token_positions.front() < b.token_positions.front();
    const int span_a = a.token_positions.back() - a.token_positions.front();
    const int span_b = b.token_positions.back() - b.token_positions.front();
    if (span_a != span_b) return span_a > span_b;
    return a.mwe_id < b.mwe_id;
  });

  std::vector<MweInstance> kept;
  for (auto& candidate : candidates) {
    const MweInstance* blocker = nullptr;
    for (const auto& k : kept) {
      if (candidate.token_positions.front() <= k.token_positions.back() &&
          k.token_positions.front() <= candidate.token_positions.back()) {
        blocker = &k;
        break;
      }
    }
    if (blocker) {
      if (dropped) dropped->push_back({sentence.sentence_id, candidate, "overlaps MWE " + std::to_string(blocker->mwe_id)});
      continue;
    }
    kept.push_back(std::move(candidate));
  }
  return kept;
}

TagSequence encode_tags(const Sentence& sentence, std::vector<DroppedMembership>* dropped) {
  TagSequence labels(sentence.tokens.size(), kOutside);
  for (const auto& mwe : retained_mwes(sentence, dropped)) {
    const auto& positions = mwe.token_positions;
    for (int p = positions.front(); p <= positions.back(); ++p) labels[static_cast<std::size_t>(p - 1)] = kGap;
    labels[static_cast<std::size_t>(positions.front() - 1)] = begin_label(mwe.category);
    for (std::size_t j = 1; j < positions.size(); ++j)
      labels[static_cast<std::size_t>(positions[j] - 1)] = inside_label(mwe.category);
  }
  return labels;
}

std::vector<MweInstance> decode_tags(const TagSequence& labels, DecodeMode mode) {
  std::vector<MweInstance> out;
  bool open = false;
  std::size_t first_gap = 0;  // 1-based position of the first unresolved gap, 0 if none

  auto close = [&] {
    if (open && first_gap != 0 && mode == DecodeMode::strict) throw TagError(first_gap, "gap label not closed by an inside label");
    open = false;
    first_gap = 0;
  };
  auto start = [&](const std::string& category, int position) {
    out.push_back({static_cast<int>(out.size() + 1), category, {position}});
    open = true;
  };

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int position = static_cast<int>(i + 1);
    const ParsedLabel parsed = parse_label(labels[i], i + 1);
    switch (parsed.kind) {
      case LabelKind::outside:
        close();
        break;
      case LabelKind::gap:
        if (!open) {
          if (mode == DecodeMode::strict) throw TagError(i + 1, "gap label outside an MWE");
        } else if (first_gap == 0) {
          first_gap = i + 1;
        }
        break;
      case LabelKind::begin:
        close();
        start(parsed.category, position);
        break;
      case LabelKind::inside:
        if (open && out.back().category == parsed.category) {
          out.back().token_positions.push_back(position);
          first_gap = 0;
        } else {
          if (mode == DecodeMode::strict) throw TagError(i + 1, "inside label without an open MWE of its category");
          close();
          start(parsed.category, position);
        }
        break;
    }
  }
  close();
  return out;
}

std::vector<std::string> label_vocabulary(const std::set<std::string>& categories) {
  std::vector<std::string> labels{kOutside, kGap};
  for (const auto& category : categories) {
    labels.push_back(begin_label(category));
    labels.push_back(inside_label(category));
  }
  return labels;
}

LabelIndex::LabelIndex(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], i);
}

std::optional<std::size_t> LabelIndex::find(const std::string& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string write_tags(const Corpus& corpus, std::vector<DroppedMembership>* dropped) {
  return write_cupt(corpus, [dropped](const Sentence& sentence) {
    TagSequence labels = encode_tags(sentence, dropped);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == kOutside && sentence.tokens[i].untagged()) labels[i] = "_";
    return labels;
  });
}

Corpus read_tags(std::string_view text, DecodeMode mode) {
  ParseOptions options;
  options.raw_mwe_column = true;
  Corpus corpus = parse_cupt(text, options).corpus;

  // line number of every syntactic-word row, in order
  std::vector<std::size_t> token_lines;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    const auto id = std::string_view(line).substr(0, tab);
    if (id.find_first_of("-.") == std::string_view::npos) token_lines.push_back(line_no);
  }

  std::size_t offset = 0;
  for (auto& sentence : corpus.sentences) {
    TagSequence labels;
    for (const auto& token : sentence.tokens) labels.push_back(token.mwe_cell == "_" ? kOutside : token.mwe_cell);
    try {
      sentence.mwes = decode_tags(labels, mode);
    } catch (const TagError& e) {
      throw FormatError(token_lines.at(offset + e.position() - 1), e.what());
    }
    for (auto& token : sentence.tokens)
      if (token.mwe_cell != "_") token.mwe_cell = "*";
    sentence = canonicalize(sentence);
    offset += sentence.tokens.size();
  }
  return corpus;
}

}  // namespace mweforge
