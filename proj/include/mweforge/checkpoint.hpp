#ifndef MWEFORGE_CHECKPOINT_HPP
#define MWEFORGE_CHECKPOINT_HPP

#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mweforge/autodiff.hpp"

namespace mweforge {

/// Flat record of named tensors plus string metadata and string lists.
///
/// Text layout, one item per line:
///
///   mweforge-checkpoint 1
///   meta <key> <value...>
///   list <name> <count>        followed by <count> lines, one item each
///   tensor <name> <rows> <cols> followed by <rows> lines of hex-float values
///   end
///
/// Values are written with "%a" so reading restores every bit.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, std::vector<std::string>>> lists;
  std::vector<std::pair<std::string, ad::Matrix>> tensors;

  const std::string& meta_value(const std::string& key) const;
  const std::vector<std::string>& list(const std::string& name) const;
  const ad::Matrix& tensor(const std::string& name) const;

  bool operator==(const Checkpoint& other) const;
};

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
std::string write_checkpoint(const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mweforge

#endif  // MWEFORGE_CHECKPOINT_HPP
