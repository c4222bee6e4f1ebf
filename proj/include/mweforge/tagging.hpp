#ifndef MWEFORGE_TAGGING_HPP
#define MWEFORGE_TAGGING_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mweforge/cupt.hpp"

namespace mweforge {

inline constexpr const char* kOutside = "O";
inline constexpr const char* kGap = "o-";

/// One label per syntactic word: "O", "o-", "B-<cat>", "I-<cat>". A category-less
/// expression uses the bare "B" / "I".
using TagSequence = std::vector<std::string>;

std::string begin_label(const std::string& category);
std::string inside_label(const std::string& category);

class TagError : public std::runtime_error {
 public:
  TagError(std::size_t position, const std::string& what)
      : std::runtime_error("position " + std::to_string(position) + ": " + what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Record of an MWE membership that could not be represented in a flat sequence.
struct DroppedMembership {
  std::string sentence_id;
  MweInstance mwe;
  std::string reason;
};

std::string format_dropped(const DroppedMembership& d);

/// Expressions kept by the overlap policy: earlier first token wins, ties go to the
/// longer span, and kept spans never intersect.
std::vector<MweInstance> retained_mwes(const Sentence& sentence, std::vector<DroppedMembership>* dropped = nullptr);

TagSequence encode_tags(const Sentence& sentence, std::vector<DroppedMembership>* dropped = nullptr);

enum class DecodeMode { strict, tolerant };

/// Returned instances carry ids 1..n in first-position order.
std::vector<MweInstance> decode_tags(const TagSequence& labels, DecodeMode mode = DecodeMode::tolerant);

/// "O", "o-", then B/I pairs in lexicographic category order.
std::vector<std::string> label_vocabulary(const std::set<std::string>& categories);

/// The corpus with the MWE column replaced by one label per token. Tokens that were
/// never annotated keep "_".
std::string write_tags(const Corpus& corpus, std::vector<DroppedMembership>* dropped = nullptr);

/// Inverse of write_tags. Malformed label sequences raise FormatError with the line of
/// the offending token.
Corpus read_tags(std::string_view text, DecodeMode mode = DecodeMode::strict);

/// Label -> index lookup over a fixed vocabulary.
class LabelIndex {
 public:
  LabelIndex() = default;
  explicit LabelIndex(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  std::optional<std::size_t> find(const std::string& label) const;

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace mweforge

#endif  // MWEFORGE_TAGGING_HPP
