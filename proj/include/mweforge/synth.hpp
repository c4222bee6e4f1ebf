#ifndef MWEFORGE_SYNTH_HPP
#define MWEFORGE_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mweforge/cupt.hpp"

namespace mweforge {

struct SynthOptions {
  int languages = 3;
  /// Sentences per language across all three splits.
  int sentences = 300;
  std::uint64_t seed = 1;
  int vocab_size = 200;
  double gap_probability = 0.3;
  /// Probability that a test expression comes from the held-out patterns.
  double unseen_rate = 0.4;
};

struct SynthLanguage {
  std::string code;
  Corpus train;
  Corpus dev;
  Corpus test;
};

/// Languages with disjoint vocabularies and implanted verbal patterns of length 2-3,
/// contiguous or with a one-token gap. A quarter of the patterns only occur in test.
std::vector<SynthLanguage> generate_synthetic(const SynthOptions& options);

/// Writes <code>_train.cupt, <code>_dev.cupt and <code>_test.cupt into `directory`;
/// returns the written paths.
std::vector<std::string> write_synthetic(const std::vector<SynthLanguage>& languages, const std::string& directory);

}  // namespace mweforge

#endif  // MWEFORGE_SYNTH_HPP
