#ifndef MWEFORGE_TRAINING_HPP
#define MWEFORGE_TRAINING_HPP

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mweforge/checkpoint.hpp"
#include "mweforge/cupt.hpp"
#include "mweforge/layers.hpp"
#include "mweforge/tagging.hpp"

namespace mweforge {

enum class Optimizer { adam, sgd };

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 3e-5;
  int max_seq_len = 150;
  double k = 10.0;
  double lambda = 0.01;
  bool li_enabled = false;
  bool adv_enabled = false;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  Optimizer optimizer = Optimizer::adam;
  int embedding_dim = 32;
  int window_radius = 2;
  PoolMode summary_mode = PoolMode::mean;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

/// Sets one field from its textual value; throws std::invalid_argument for unknown keys or bad values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Flat "key = value" lines; blank lines and "#" comments are skipped.
TrainConfig parse_config(std::istream& in, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});
std::string format_config(const TrainConfig& config);

// ---------------------------------------------------------------------------

/// Form -> id; id 0 is reserved for unknown forms.
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> forms);

  std::size_t add(const std::string& form);
  std::size_t id(const std::string& form) const;
  std::size_t size() const { return forms_.size(); }
  const std::vector<std::string>& forms() const { return forms_; }

 private:
  std::vector<std::string> forms_;
  std::map<std::string, std::size_t> index_;
};

struct Model {
  Vocabulary vocab;
  LabelIndex labels;
  std::vector<std::string> languages;
  ToyEncoder encoder;
  LateralInhibitionLayer li;
  LinearHead head;
  LanguageDiscriminator discriminator;

  /// Parameters in a fixed order, grouped feature extractor / classifier / discriminator.
  std::vector<std::pair<std::string, Matrix*>> parameters();
  std::vector<std::pair<std::string, const Matrix*>> parameters() const;
};

enum class ParamGroup { feature_extractor, classifier, discriminator };
ParamGroup param_group(const std::string& name);

/// Encoder and LI weights drawn from the seed; the classification head starts at zero.
Model init_model(Vocabulary vocab, LabelIndex labels, std::vector<std::string> languages, const TrainConfig& config);

Checkpoint model_to_checkpoint(const Model& model, const TrainConfig& config);
Model model_from_checkpoint(const Checkpoint& checkpoint, TrainConfig* config = nullptr);

// ---------------------------------------------------------------------------

struct LanguageCorpus {
  std::string language;
  Corpus corpus;
};

struct Example {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> labels;
  std::size_t language = 0;
};

struct PrepareReport {
  std::size_t truncated_sentences = 0;
  std::vector<DroppedMembership> dropped;
};

/// Truncates to max_seq_len, drops expressions reaching past the cut, and encodes labels.
/// Labels missing from the index map to "O" and are reported.
std::vector<Example> prepare_examples(const Corpus& corpus, std::size_t language, const Model& model, int max_seq_len,
                                      PrepareReport* report = nullptr);

using IndexMatrix = Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Padded batch; positions with mask 0 are padding and never enter a loss.
struct Batch {
  IndexMatrix ids;
  IndexMatrix labels;
  IndexMatrix mask;
  std::vector<std::size_t> languages;
  std::vector<std::size_t> lengths;

  std::size_t size() const { return lengths.size(); }
};

Batch make_batch(const std::vector<Example>& examples, const std::vector<std::size_t>& members);

/// Batches in a seeded shuffled order for the given epoch.
std::vector<Batch> make_batches(const std::vector<Example>& examples, int batch_size, std::uint64_t seed, int epoch);

// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
};

/// One bias-corrected Adam update.
void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

void sgd_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, double lr);

struct ModelVars {
  EncoderVars encoder;
  Variable li_weight, li_bias;
  Variable head_weight, head_bias;
  DiscriminatorVars discriminator;

  /// Same order as Model::parameters().
  std::vector<Variable> all() const;
};

ModelVars bind(Tape& tape, const Model& model);

/// Switches used by the verification harness to isolate loss paths.
struct ForwardOptions {
  bool include_task_loss = true;
  bool include_language_loss = true;
  enum class Reversal {
    reverse,       // -lambda, the training path
    identity,      // control path of the decomposition law
    corrupt_sign,  // +lambda; fault injection for the verification harness
  };
  Reversal reversal = Reversal::reverse;
  GateForward gate = GateForward::hard;
};

struct ForwardResult {
  ModelVars vars;
  Variable loss_y;
  Variable loss_ld;
  Variable total;
  Matrix label_probs;
  Matrix language_probs;
  std::vector<std::size_t> predicted_labels;
  std::vector<std::size_t> predicted_languages;
  std::size_t token_count = 0;
};

/// Encode, optional LI, MWE classifier, language discriminator on the summary vector
/// behind the reversal layer, two cross-entropy losses.
ForwardResult forward_pass(Tape& tape, const Batch& batch, const Model& model, const TrainConfig& config,
                           const ForwardOptions& options = {});

/// Gradients of every parameter for the recorded forward pass, in Model::parameters() order.
std::vector<Matrix> compute_gradients(Tape& tape, const ForwardResult& forward);

/// Backpropagates L_y + L_ld (the reversal layer scales the path into the encoder) and
/// applies one optimizer update.
std::vector<Matrix> backward_pass(Tape& tape, const ForwardResult& forward, Model& model, AdamState& state,
                                  const TrainConfig& config);

// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double loss_y = 0.0;
  double loss_ld = 0.0;
  double discriminator_accuracy = 0.0;
};

std::string format_history(const std::vector<EpochRecord>& history);

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  std::vector<std::string> warnings;
  PrepareReport prepare;
};

/// Joint training over all given languages. Row 0 of the history measures the initial
/// model without updates; rows 1..epochs follow each epoch.
TrainResult train(const std::vector<LanguageCorpus>& corpora, const TrainConfig& config);

/// Builds the vocabulary, label set and language list from training corpora.
Model build_model(const std::vector<LanguageCorpus>& corpora, const TrainConfig& config);

/// Mean L_y, L_ld and discriminator accuracy over `examples` without updating.
EpochRecord measure(const Model& model, const std::vector<Example>& examples, const TrainConfig& config);

double tag_accuracy(const Model& model, const std::vector<Example>& examples, const TrainConfig& config);

/// Copy of `corpus` with MWE annotations replaced by the model's decoded predictions.
Corpus predict(const Model& model, const Corpus& corpus, const TrainConfig& config);

}  // namespace mweforge

#endif  // MWEFORGE_TRAINING_HPP
