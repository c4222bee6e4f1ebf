#include "mweforge/layers.hpp"

#include <stdexcept>
#include <string>

namespace mweforge {

namespace {

double surrogate_slope(double x, double k) {
  const double s = ad::logistic(x, k);
  return k * s * (1.0 - s);
}

}  // namespace

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m(i) = (2.0 * u - 1.0) * scale;
  }
  return m;
}

Matrix heaviside(const Matrix& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Variable heaviside(Variable x, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("heaviside: k must be positive");
  return x.tape->record({x}, heaviside(x.value()),
                        [k](const Matrix& g, const Tape::InputValues& in, const Matrix&) {
                          Matrix d = in[0]->unaryExpr([k](double v) { return surrogate_slope(v, k); });
                          return std::vector<Matrix>{g.cwiseProduct(d)};
                        },
                        "heaviside");
}

Matrix zero_diag(const Matrix& m) {
  if (m.rows() != m.cols()) throw ad::ShapeError("zero_diag: non-square " + ad::shape_of(m));
  Matrix out = m;
  out.diagonal().setZero();
  return out;
}

// ---------------------------------------------------------------------------

LateralInhibitionLayer LateralInhibitionLayer::init(Eigen::Index d, double k, std::mt19937_64& rng) {
  return {uniform_matrix(d, d, 0.1, rng), Matrix::Constant(1, d, 0.5), k};
}

LateralInhibitionLayer LateralInhibitionLayer::all_pass(Eigen::Index d, double k) {
  return {Matrix::Zero(d, d), Matrix::Constant(1, d, 1.0), k};
}

Variable li_preactivation(Variable x, Variable weight, Variable bias) {
  if (weight.rows() != weight.cols()) throw ad::ShapeError("lateral inhibition: non-square W " + ad::shape_of(weight.value()));
  if (x.cols() != weight.rows())
    throw ad::ShapeError("lateral inhibition: input " + ad::shape_of(x.value()) + " vs W " + ad::shape_of(weight.value()));
  return ad::add_row(ad::matmul(x, ad::zero_diag(ad::transpose(weight))), bias);
}

Variable li_forward(Variable x, Variable weight, Variable bias, double k, GateForward mode) {
  if (!(k > 0.0)) throw std::invalid_argument("lateral inhibition: k must be positive");
  Variable pre = li_preactivation(x, weight, bias);
  Matrix gate = mode == GateForward::hard ? heaviside(pre.value())
                                          : Matrix(pre.value().unaryExpr([k](double v) { return ad::logistic(v, k); }));
  Matrix out = x.value().cwiseProduct(gate);
  return x.tape->record({x, pre}, std::move(out),
                        [k](const Matrix& g, const Tape::InputValues& in, const Matrix&) {
                          const Matrix& xv = *in[0];
                          const Matrix& pv = *in[1];
                          Matrix smooth = pv.unaryExpr([k](double v) { return ad::logistic(v, k); });
                          Matrix slope = pv.unaryExpr([k](double v) { return surrogate_slope(v, k); });
                          return std::vector<Matrix>{g.cwiseProduct(smooth), g.cwiseProduct(xv).cwiseProduct(slope)};
                        },
                        "lateral_inhibition");
}

Matrix li_forward(const Matrix& x, const LateralInhibitionLayer& layer) {
  Tape tape;
  return li_forward(tape.constant(x), tape.constant(layer.weight), tape.constant(layer.bias), layer.k).value();
}

// ---------------------------------------------------------------------------

namespace detail {

Variable scaled_identity(Variable x, double factor, const char* name) {
  return x.tape->record({x}, x.value(),
                        [factor](const Matrix& g, const Tape::InputValues&, const Matrix&) {
                          return std::vector<Matrix>{g * factor};
                        },
                        name);
}

}  // namespace detail

Variable grl_apply(Variable x, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("gradient reversal: lambda must be non-negative");
  return detail::scaled_identity(x, -lambda, "gradient_reversal");
}

// ---------------------------------------------------------------------------

LinearHead LinearHead::zeros(Eigen::Index classes, Eigen::Index d) {
  return {Matrix::Zero(classes, d), Matrix::Zero(1, classes)};
}

Variable linear(Variable x, Variable weight, Variable bias) {
  if (x.cols() != weight.cols())
    throw ad::ShapeError("linear: input " + ad::shape_of(x.value()) + " vs weight " + ad::shape_of(weight.value()));
  return ad::add_row(ad::matmul(x, ad::transpose(weight)), bias);
}

Matrix classify_tokens(const Matrix& embeddings, const LinearHead& head, const LateralInhibitionLayer* li) {
  Tape tape;
  Variable h = tape.constant(embeddings);
  if (li) h = li_forward(h, tape.constant(li->weight), tape.constant(li->bias), li->k);
  Variable logits = linear(h, tape.constant(head.weight), tape.constant(head.bias));
  return ad::softmax_rows(logits.value());
}

// ---------------------------------------------------------------------------

ToyEncoder ToyEncoder::init(std::size_t vocab, Eigen::Index d, int radius, PoolMode summary, std::mt19937_64& rng) {
  if (radius < 0) throw std::invalid_argument("encoder radius must be non-negative");
  ToyEncoder enc;
  enc.embedding = uniform_matrix(static_cast<Eigen::Index>(vocab), d, 0.5, rng);
  enc.radius = radius;
  enc.summary = summary;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int o = -radius; o <= radius; ++o) {
    Matrix m = uniform_matrix(d, d, scale, rng);
    if (o == 0) m += Matrix::Identity(d, d);
    enc.mixers.push_back(std::move(m));
  }
  return enc;
}

Encoded encode_batch(const EncoderVars& enc, const std::vector<std::size_t>& ids, const std::vector<std::size_t>& lengths,
                     PoolMode summary) {
  if (enc.mixers.empty() || enc.mixers.size() % 2 == 0) throw ad::ShapeError("encoder needs 2r+1 mixing matrices");
  const int radius = static_cast<int>(enc.mixers.size() / 2);
  Variable e = ad::gather_rows(enc.embedding, ids);
  Variable h;
  for (int o = -radius; o <= radius; ++o) {
    const Variable& m = enc.mixers[static_cast<std::size_t>(o + radius)];
    if (m.rows() != e.cols() || m.cols() != e.cols())
      throw ad::ShapeError("encoder mixer " + ad::shape_of(m.value()) + " vs embedding width " + std::to_string(e.cols()));
    Variable shifted = o == 0 ? e : ad::shift_rows(e, o, lengths);
    Variable term = ad::matmul(shifted, ad::transpose(m));
    h = o == -radius ? term : ad::add(h, term);
  }
  return {h, ad::segment_pool(h, lengths, summary)};
}

EncodedSentence encode_sentence(const std::vector<std::size_t>& ids, const ToyEncoder& enc) {
  if (ids.empty()) throw std::invalid_argument("encode_sentence: empty sentence");
  Tape tape;
  EncoderVars vars{tape.constant(enc.embedding), {}};
  for (const auto& m : enc.mixers) vars.mixers.push_back(tape.constant(m));
  Encoded out = encode_batch(vars, ids, {ids.size()}, enc.summary);
  return {out.tokens.value(), out.summary.value()};
}

// ---------------------------------------------------------------------------

LanguageDiscriminator LanguageDiscriminator::init(std::size_t languages, Eigen::Index d, std::mt19937_64& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  return {uniform_matrix(d, d, scale, rng), Matrix::Zero(1, d), Matrix::Zero(static_cast<Eigen::Index>(languages), d),
          Matrix::Zero(1, static_cast<Eigen::Index>(languages))};
}

Variable discriminator_logits(const DiscriminatorVars& ld, Variable reversed_summary) {
  Variable hidden = ad::sigmoid(linear(reversed_summary, ld.hidden_weight, ld.hidden_bias));
  return linear(hidden, ld.out_weight, ld.out_bias);
}

Matrix discriminate_language(const Matrix& summary, const LanguageDiscriminator& ld, double lambda) {
  Tape tape;
  DiscriminatorVars vars{tape.constant(ld.hidden_weight), tape.constant(ld.hidden_bias), tape.constant(ld.out_weight),
                         tape.constant(ld.out_bias)};
  Variable logits = discriminator_logits(vars, grl_apply(tape.constant(summary), lambda));
  return ad::softmax_rows(logits.value());
}

}  // namespace mweforge
