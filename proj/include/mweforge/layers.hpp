#ifndef MWEFORGE_LAYERS_HPP
#define MWEFORGE_LAYERS_HPP

#include <cstddef>
#include <random>
#include <vector>

#include "mweforge/autodiff.hpp"

namespace mweforge {

using ad::Matrix;
using ad::PoolMode;
using ad::Tape;
using ad::Variable;

/// How the lateral-inhibition gate is evaluated in the forward direction. `hard` is the
/// Heaviside step; `smooth` replaces it by the logistic surrogate so that the forward
/// value is the function whose derivative backward computes (used for finite-difference checks).
enum class GateForward { hard, smooth };

/// Elementwise step: 1 where x > 0, else 0 (including x == 0).
Matrix heaviside(const Matrix& x);

/// Step forward; backward multiplies the upstream gradient by k s (1 - s), s = logistic(k x).
Variable heaviside(Variable x, double k);

/// Copy of a square matrix with a zero diagonal.
Matrix zero_diag(const Matrix& m);

// ---------------------------------------------------------------------------
// Lateral inhibition

struct LateralInhibitionLayer {
  Matrix weight;  // d x d
  Matrix bias;    // 1 x d
  double k = 10.0;

  Eigen::Index width() const { return weight.rows(); }

  /// weight ~ U(-0.1, 0.1), bias = +0.5.
  static LateralInhibitionLayer init(Eigen::Index d, double k, std::mt19937_64& rng);
  /// weight = 0, bias = +1: every gate open.
  static LateralInhibitionLayer all_pass(Eigen::Index d, double k = 10.0);
};

/// X * ZeroDiag(W^T) + B, B added to every row.
Variable li_preactivation(Variable x, Variable weight, Variable bias);

/// Rows of X with gated coordinates zeroed. The backward rule is the exact derivative of
/// X (.) logistic(k * pre), including the path through the gate's dependence on X.
Variable li_forward(Variable x, Variable weight, Variable bias, double k, GateForward mode = GateForward::hard);

Matrix li_forward(const Matrix& x, const LateralInhibitionLayer& layer);

// ---------------------------------------------------------------------------
// Gradient reversal

struct GradientReversal {
  double lambda = 0.01;
};

/// Identity forward; backward delivers -lambda * g.
Variable grl_apply(Variable x, double lambda);

namespace detail {
/// Identity forward, backward multiplies by `factor`. Exposed for fault-injection checks.
Variable scaled_identity(Variable x, double factor, const char* name);
}  // namespace detail

// ---------------------------------------------------------------------------
// Heads

struct LinearHead {
  Matrix weight;  // c x d
  Matrix bias;    // 1 x c

  static LinearHead zeros(Eigen::Index classes, Eigen::Index d);
};

/// x W^T + b.
Variable linear(Variable x, Variable weight, Variable bias);

/// Row-wise class probabilities, optionally passing E through lateral inhibition first.
Matrix classify_tokens(const Matrix& embeddings, const LinearHead& head, const LateralInhibitionLayer* li = nullptr);

// ---------------------------------------------------------------------------
// Toy encoder

struct ToyEncoder {
  Matrix embedding;             // |V| x d
  int radius = 1;
  std::vector<Matrix> mixers;   // 2r + 1 matrices d x d, index o + r
  PoolMode summary = PoolMode::mean;

  Eigen::Index dim() const { return embedding.cols(); }
  std::size_t vocab_size() const { return static_cast<std::size_t>(embedding.rows()); }

  static ToyEncoder init(std::size_t vocab, Eigen::Index d, int radius, PoolMode summary, std::mt19937_64& rng);
};

struct EncoderVars {
  Variable embedding;
  std::vector<Variable> mixers;
};

struct Encoded {
  Variable tokens;   // one row per token
  Variable summary;  // one row per sentence
};

/// Encodes a batch of sentences laid out back to back; `lengths` are the sentence lengths.
/// Row i is sum over o in [-r, r] of M_o emb(t_{i+o}), zero beyond sentence boundaries.
Encoded encode_batch(const EncoderVars& enc, const std::vector<std::size_t>& ids, const std::vector<std::size_t>& lengths,
                     PoolMode summary);

struct EncodedSentence {
  Matrix tokens;
  Matrix summary;  // 1 x d
};

EncodedSentence encode_sentence(const std::vector<std::size_t>& ids, const ToyEncoder& enc);

// ---------------------------------------------------------------------------
// Language discriminator

struct LanguageDiscriminator {
  Matrix hidden_weight;  // d x d
  Matrix hidden_bias;    // 1 x d
  Matrix out_weight;     // L x d
  Matrix out_bias;       // 1 x L

  std::size_t languages() const { return static_cast<std::size_t>(out_weight.rows()); }

  static LanguageDiscriminator init(std::size_t languages, Eigen::Index d, std::mt19937_64& rng);
};

struct DiscriminatorVars {
  Variable hidden_weight, hidden_bias, out_weight, out_bias;
};

/// Language logits for each summary row: logistic hidden layer on top of the reversal layer.
Variable discriminator_logits(const DiscriminatorVars& ld, Variable reversed_summary);

/// Softmax over languages computed on grl_apply(summary, lambda).
Matrix discriminate_language(const Matrix& summary, const LanguageDiscriminator& ld, double lambda);

// ---------------------------------------------------------------------------

/// Uniform(-scale, scale) matrix drawn from the 53-bit mantissa of the generator output.
Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64& rng);

}  // namespace mweforge

#endif  // MWEFORGE_LAYERS_HPP
