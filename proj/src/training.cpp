#include "mweforge/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mweforge {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw std::invalid_argument(key + ": expected on/off, got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  T out{};
  if (!(ss >> out) || !(ss >> std::ws).eof()) throw std::invalid_argument(key + ": bad value '" + value + "'");
  return out;
}

std::size_t argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index arg = 0;
  m.row(r).maxCoeff(&arg);
  return static_cast<std::size_t>(arg);
}

std::string mixer_name(std::size_t index) { return "encoder.mixer." + std::to_string(index); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (max_seq_len < 1) throw std::invalid_argument("max_seq_len must be at least 1");
  if (!(k > 0)) throw std::invalid_argument("k must be positive");
  if (lambda < 0) throw std::invalid_argument("lambda must be non-negative");
  if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1))
    throw std::invalid_argument("adam betas must lie in (0, 1)");
  if (!(adam_epsilon > 0)) throw std::invalid_argument("adam_epsilon must be positive");
  if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be positive");
  if (window_radius < 0) throw std::invalid_argument("window_radius must be non-negative");
}

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
  else if (key == "max_seq_len") c.max_seq_len = parse_number<int>(key, value);
  else if (key == "k") c.k = parse_number<double>(key, value);
  else if (key == "lambda") c.lambda = parse_number<double>(key, value);
  else if (key == "li_enabled") c.li_enabled = parse_flag(key, value);
  else if (key == "adv_enabled") c.adv_enabled = parse_flag(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "adam_beta1") c.adam_beta1 = parse_number<double>(key, value);
  else if (key == "adam_beta2") c.adam_beta2 = parse_number<double>(key, value);
  else if (key == "adam_epsilon") c.adam_epsilon = parse_number<double>(key, value);
  else if (key == "optimizer") {
    if (value == "adam") c.optimizer = Optimizer::adam;
    else if (value == "sgd") c.optimizer = Optimizer::sgd;
    else throw std::invalid_argument("optimizer: expected adam or sgd, got '" + value + "'");
  } else if (key == "embedding_dim") c.embedding_dim = parse_number<int>(key, value);
  else if (key == "window_radius") c.window_radius = parse_number<int>(key, value);
  else if (key == "summary_mode") {
    if (value == "mean") c.summary_mode = PoolMode::mean;
    else if (value == "first") c.summary_mode = PoolMode::first;
    else throw std::invalid_argument("summary_mode: expected mean or first, got '" + value + "'");
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

TrainConfig parse_config(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(line_no) + ": missing '='");
    set_config_value(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_config(in, std::move(base));
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "epochs = " << c.epochs << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "learning_rate = " << format_double(c.learning_rate) << '\n'
     << "max_seq_len = " << c.max_seq_len << '\n'
     << "k = " << format_double(c.k) << '\n'
     << "lambda = " << format_double(c.lambda) << '\n'
     << "li_enabled = " << (c.li_enabled ? "on" : "off") << '\n'
     << "adv_enabled = " << (c.adv_enabled ? "on" : "off") << '\n'
     << "seed = " << c.seed << '\n'
     << "adam_beta1 = " << format_double(c.adam_beta1) << '\n'
     << "adam_beta2 = " << format_double(c.adam_beta2) << '\n'
     << "adam_epsilon = " << format_double(c.adam_epsilon) << '\n'
     << "optimizer = " << (c.optimizer == Optimizer::adam ? "adam" : "sgd") << '\n'
     << "embedding_dim = " << c.embedding_dim << '\n'
     << "window_radius = " << c.window_radius << '\n'
     << "summary_mode = " << (c.summary_mode == PoolMode::mean ? "mean" : "first") << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Vocabulary and model

Vocabulary::Vocabulary() { add(kUnknown); }

Vocabulary::Vocabulary(std::vector<std::string> forms) {
  if (forms.empty() || forms.front() != kUnknown) throw std::invalid_argument("vocabulary must start with " + std::string(kUnknown));
  for (const auto& f : forms) add(f);
}

std::size_t Vocabulary::add(const std::string& form) {
  const auto [it, inserted] = index_.emplace(form, forms_.size());
  if (inserted) forms_.push_back(form);
  return it->second;
}

std::size_t Vocabulary::id(const std::string& form) const {
  const auto it = index_.find(form);
  return it == index_.end() ? 0 : it->second;
}

std::vector<std::pair<std::string, Matrix*>> Model::parameters() {
  std::vector<std::pair<std::string, Matrix*>> out{{"encoder.embedding", &encoder.embedding}};
  for (std::size_t i = 0; i < encoder.mixers.size(); ++i) out.emplace_back(mixer_name(i), &encoder.mixers[i]);
  out.emplace_back("li.weight", &li.weight);
  out.emplace_back("li.bias", &li.bias);
  out.emplace_back("head.weight", &head.weight);
  out.emplace_back("head.bias", &head.bias);
  out.emplace_back("discriminator.hidden_weight", &discriminator.hidden_weight);
  out.emplace_back("discriminator.hidden_bias", &discriminator.hidden_bias);
  out.emplace_back("discriminator.out_weight", &discriminator.out_weight);
  out.emplace_back("discriminator.out_bias", &discriminator.out_bias);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> Model::parameters() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, p] : const_cast<Model*>(this)->parameters()) out.emplace_back(name, p);
  return out;
}

ParamGroup param_group(const std::string& name) {
  if (name.rfind("encoder.", 0) == 0) return ParamGroup::feature_extractor;
  if (name.rfind("discriminator.", 0) == 0) return ParamGroup::discriminator;
  return ParamGroup::classifier;
}

Model init_model(Vocabulary vocab, LabelIndex labels, std::vector<std::string> languages, const TrainConfig& config) {
  config.validate();
  if (languages.empty()) throw std::invalid_argument("model needs at least one language");
  std::mt19937_64 rng(config.seed);
  const Eigen::Index d = config.embedding_dim;
  Model model;
  model.encoder = ToyEncoder::init(vocab.size(), d, config.window_radius, config.summary_mode, rng);
  model.li = LateralInhibitionLayer::init(d, config.k, rng);
  model.head = LinearHead::zeros(static_cast<Eigen::Index>(labels.size()), d);
  model.discriminator = LanguageDiscriminator::init(languages.size(), d, rng);
  model.vocab = std::move(vocab);
  model.labels = std::move(labels);
  model.languages = std::move(languages);
  return model;
}

Model build_model(const std::vector<LanguageCorpus>& corpora, const TrainConfig& config) {
  Vocabulary vocab;
  std::set<std::string> categories;
  std::vector<std::string> languages;
  for (const auto& lc : corpora) {
    languages.push_back(lc.language);
    for (const auto& sentence : lc.corpus.sentences) {
      for (const auto& token : sentence.tokens) vocab.add(token.form);
      for (const auto& mwe : sentence.mwes) categories.insert(mwe.category);
    }
  }
  return init_model(std::move(vocab), LabelIndex(label_vocabulary(categories)), std::move(languages), config);
}

Checkpoint model_to_checkpoint(const Model& model, const TrainConfig& config) {
  Checkpoint cp;
  std::istringstream lines(format_config(config));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    cp.meta.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cp.lists.emplace_back("vocab", model.vocab.forms());
  cp.lists.emplace_back("labels", model.labels.labels());
  cp.lists.emplace_back("languages", model.languages);
  for (const auto& [name, p] : model.parameters()) cp.tensors.emplace_back(name, *p);
  return cp;
}

Model model_from_checkpoint(const Checkpoint& cp, TrainConfig* config) {
  TrainConfig c;
  for (const auto& [key, value] : cp.meta) set_config_value(c, key, value);
  if (config) *config = c;
  Model model;
  model.vocab = Vocabulary(cp.list("vocab"));
  model.labels = LabelIndex(cp.list("labels"));
  model.languages = cp.list("languages");
  model.encoder.radius = c.window_radius;
  model.encoder.summary = c.summary_mode;
  model.encoder.mixers.resize(static_cast<std::size_t>(2 * c.window_radius + 1));
  model.li.k = c.k;
  for (auto& [name, p] : model.parameters()) *p = cp.tensor(name);
  return model;
}

// ---------------------------------------------------------------------------
// Data

std::vector<Example> prepare_examples(const Corpus& corpus, std::size_t language, const Model& model, int max_seq_len,
                                      PrepareReport* report) {
  const auto limit = static_cast<std::size_t>(max_seq_len);
  std::vector<Example> out;
  out.reserve(corpus.sentences.size());
  for (const auto& original : corpus.sentences) {
    if (original.tokens.empty()) continue;
    const Sentence* sentence = &original;
    Sentence truncated;
    if (original.tokens.size() > limit) {
      truncated = original;
      truncated.tokens.resize(limit);
      truncated.mwes.clear();
      for (const auto& mwe : original.mwes) {
        const bool fits = std::all_of(mwe.token_positions.begin(), mwe.token_positions.end(),
                                      [&](int p) { return static_cast<std::size_t>(p) <= limit; });
        if (fits) truncated.mwes.push_back(mwe);
        else if (report) report->dropped.push_back({original.sentence_id, mwe, "extends past max_seq_len"});
      }
      if (report) ++report->truncated_sentences;
      sentence = &truncated;
    }
    Example ex;
    ex.language = language;
    for (const auto& token : sentence->tokens) ex.ids.push_back(model.vocab.id(token.form));
    const TagSequence tags = encode_tags(*sentence, report ? &report->dropped : nullptr);
    for (const auto& tag : tags) {
      const auto index = model.labels.find(tag);
      if (!index && report) report->dropped.push_back({sentence->sentence_id, {}, "label " + tag + " outside vocabulary"});
      ex.labels.push_back(index.value_or(0));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Batch make_batch(const std::vector<Example>& examples, const std::vector<std::size_t>& members) {
  std::size_t width = 0;
  for (std::size_t m : members) width = std::max(width, examples.at(m).ids.size());
  Batch batch;
  const auto rows = static_cast<Eigen::Index>(members.size());
  const auto cols = static_cast<Eigen::Index>(width);
  batch.ids = IndexMatrix::Zero(rows, cols);
  batch.labels = IndexMatrix::Zero(rows, cols);
  batch.mask = IndexMatrix::Zero(rows, cols);
  for (std::size_t b = 0; b < members.size(); ++b) {
    const Example& ex = examples[members[b]];
    for (std::size_t t = 0; t < ex.ids.size(); ++t) {
      const auto r = static_cast<Eigen::Index>(b);
      const auto c = static_cast<Eigen::Index>(t);
      batch.ids(r, c) = ex.ids[t];
      batch.labels(r, c) = ex.labels[t];
      batch.mask(r, c) = 1;
    }
    batch.languages.push_back(ex.language);
    batch.lengths.push_back(ex.ids.size());
  }
  return batch;
}

std::vector<Batch> make_batches(const std::vector<Example>& examples, int batch_size, std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  std::vector<Batch> out;
  const auto size = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += size) {
    std::vector<std::size_t> members(order.begin() + static_cast<long>(start),
                                     order.begin() + static_cast<long>(std::min(order.size(), start + size)));
    out.push_back(make_batch(examples, members));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
               double beta1, double beta2, double epsilon) {
  if (params.size() != grads.size()) throw ad::ShapeError("adam_step: parameter and gradient counts differ");
  if (state.first.empty()) {
    for (const Matrix* p : params) {
      state.first.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first.size() != params.size()) throw ad::ShapeError("adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols() ||
        state.first[i].rows() != params[i]->rows() || state.first[i].cols() != params[i]->cols())
      throw ad::ShapeError("adam_step: gradient " + ad::shape_of(grads[i]) + " for parameter " + ad::shape_of(*params[i]));

  ++state.step;
  const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    m = beta1 * m + (1.0 - beta1) * grads[i];
    v = beta2 * v + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    params[i]->array() -= lr * m_hat / (v_hat.sqrt() + epsilon);
  }
}

void sgd_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, double lr) {
  if (params.size() != grads.size()) throw ad::ShapeError("sgd_step: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols())
      throw ad::ShapeError("sgd_step: gradient " + ad::shape_of(grads[i]) + " for parameter " + ad::shape_of(*params[i]));
    *params[i] -= lr * grads[i];
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

std::vector<Variable> ModelVars::all() const {
  std::vector<Variable> out{encoder.embedding};
  out.insert(out.end(), encoder.mixers.begin(), encoder.mixers.end());
  out.insert(out.end(), {li_weight, li_bias, head_weight, head_bias, discriminator.hidden_weight, discriminator.hidden_bias,
                         discriminator.out_weight, discriminator.out_bias});
  return out;
}

ModelVars bind(Tape& tape, const Model& model) {
  ModelVars vars;
  vars.encoder.embedding = tape.leaf(model.encoder.embedding);
  for (const auto& m : model.encoder.mixers) vars.encoder.mixers.push_back(tape.leaf(m));
  vars.li_weight = tape.leaf(model.li.weight);
  vars.li_bias = tape.leaf(model.li.bias);
  vars.head_weight = tape.leaf(model.head.weight);
  vars.head_bias = tape.leaf(model.head.bias);
  vars.discriminator = {tape.leaf(model.discriminator.hidden_weight), tape.leaf(model.discriminator.hidden_bias),
                        tape.leaf(model.discriminator.out_weight), tape.leaf(model.discriminator.out_bias)};
  return vars;
}

ForwardResult forward_pass(Tape& tape, const Batch& batch, const Model& model, const TrainConfig& config,
                           const ForwardOptions& options) {
  if (batch.size() == 0) throw std::invalid_argument("forward_pass: empty batch");
  const std::size_t classes = model.labels.size();
  const std::size_t languages = model.languages.size();

  std::vector<std::size_t> ids, gold;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch.languages[b] >= languages)
      throw std::out_of_range("forward_pass: language index " + std::to_string(batch.languages[b]) + " >= " +
                              std::to_string(languages));
    if (batch.lengths[b] == 0) throw std::invalid_argument("forward_pass: empty sentence in batch");
    for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
      const auto r = static_cast<Eigen::Index>(b);
      const auto c = static_cast<Eigen::Index>(t);
      if (!batch.mask(r, c)) continue;
      if (batch.labels(r, c) >= classes)
        throw std::out_of_range("forward_pass: label index " + std::to_string(batch.labels(r, c)) + " >= " + std::to_string(classes));
      ids.push_back(batch.ids(r, c));
      gold.push_back(batch.labels(r, c));
    }
  }

  ForwardResult out;
  out.vars = bind(tape, model);
  out.token_count = ids.size();
  const ModelVars& v = out.vars;

  Encoded encoded = encode_batch(v.encoder, ids, batch.lengths, model.encoder.summary);
  Variable h = encoded.tokens;
  if (config.li_enabled) h = li_forward(h, v.li_weight, v.li_bias, config.k, options.gate);
  Variable logits = linear(h, v.head_weight, v.head_bias);
  auto task = ad::softmax_cross_entropy(logits, gold);

  const double lambda = config.adv_enabled ? config.lambda : 0.0;
  Variable reversed;
  switch (options.reversal) {
    case ForwardOptions::Reversal::reverse: reversed = grl_apply(encoded.summary, lambda); break;
    case ForwardOptions::Reversal::identity: reversed = detail::scaled_identity(encoded.summary, 1.0, "identity"); break;
    case ForwardOptions::Reversal::corrupt_sign: reversed = detail::scaled_identity(encoded.summary, lambda, "corrupt_reversal"); break;
  }
  Variable lang_logits = discriminator_logits(v.discriminator, reversed);
  auto lang = ad::softmax_cross_entropy(lang_logits, batch.languages);

  out.loss_y = task.loss;
  out.loss_ld = lang.loss;
  if (options.include_task_loss && options.include_language_loss) out.total = ad::add(task.loss, lang.loss);
  else if (options.include_task_loss) out.total = task.loss;
  else if (options.include_language_loss) out.total = lang.loss;
  else out.total = ad::scale(task.loss, 0.0);

  out.label_probs = std::move(task.probabilities);
  out.language_probs = std::move(lang.probabilities);
  for (Eigen::Index r = 0; r < out.label_probs.rows(); ++r) out.predicted_labels.push_back(argmax_row(out.label_probs, r));
  for (Eigen::Index r = 0; r < out.language_probs.rows(); ++r)
    out.predicted_languages.push_back(argmax_row(out.language_probs, r));
  return out;
}

std::vector<Matrix> compute_gradients(Tape& tape, const ForwardResult& forward) {
  if (forward.total.tape != &tape) throw ad::TapeError("backward_pass without a forward pass on this tape");
  tape.backward(forward.total);
  std::vector<Matrix> grads;
  for (const Variable& var : forward.vars.all()) grads.push_back(tape.grad(var));
  return grads;
}

std::vector<Matrix> backward_pass(Tape& tape, const ForwardResult& forward, Model& model, AdamState& state,
                                  const TrainConfig& config) {
  std::vector<Matrix> grads = compute_gradients(tape, forward);
  std::vector<Matrix*> params;
  for (auto& [name, p] : model.parameters()) params.push_back(p);
  if (config.optimizer == Optimizer::adam)
    adam_step(params, grads, state, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  else
    sgd_step(params, grads, config.learning_rate);
  return grads;
}

// ---------------------------------------------------------------------------
// Training loop

std::string format_history(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,L_y,L_ld,discriminator_accuracy\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9f,%.9f,%.6f\n", r.epoch, r.loss_y, r.loss_ld, r.discriminator_accuracy);
    out += buf;
  }
  return out;
}

namespace {

struct EpochAccumulator {
  double loss_y = 0, loss_ld = 0;
  std::size_t tokens = 0, sentences = 0, correct = 0;

  void add(const ForwardResult& f, const Batch& batch) {
    loss_y += f.loss_y.value()(0, 0) * static_cast<double>(f.token_count);
    loss_ld += f.loss_ld.value()(0, 0) * static_cast<double>(batch.size());
    tokens += f.token_count;
    sentences += batch.size();
    for (std::size_t b = 0; b < batch.size(); ++b) correct += f.predicted_languages[b] == batch.languages[b];
  }

  EpochRecord record(int epoch) const {
    return {epoch, tokens ? loss_y / static_cast<double>(tokens) : 0.0,
            sentences ? loss_ld / static_cast<double>(sentences) : 0.0,
            sentences ? static_cast<double>(correct) / static_cast<double>(sentences) : 0.0};
  }
};

std::vector<Batch> sequential_batches(const std::vector<Example>& examples, int batch_size) {
  std::vector<Batch> out;
  const auto size = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < examples.size(); start += size) {
    std::vector<std::size_t> members;
    for (std::size_t i = start; i < std::min(examples.size(), start + size); ++i) members.push_back(i);
    out.push_back(make_batch(examples, members));
  }
  return out;
}

}  // namespace

EpochRecord measure(const Model& model, const std::vector<Example>& examples, const TrainConfig& config) {
  EpochAccumulator acc;
  for (const Batch& batch : sequential_batches(examples, config.batch_size)) {
    Tape tape;
    acc.add(forward_pass(tape, batch, model, config), batch);
  }
  return acc.record(0);
}

double tag_accuracy(const Model& model, const std::vector<Example>& examples, const TrainConfig& config) {
  std::size_t correct = 0, total = 0;
  for (const Batch& batch : sequential_batches(examples, config.batch_size)) {
    Tape tape;
    const ForwardResult f = forward_pass(tape, batch, model, config);
    std::size_t row = 0;
    for (std::size_t b = 0; b < batch.size(); ++b)
      for (std::size_t t = 0; t < batch.lengths[b]; ++t, ++row)
        correct += f.predicted_labels[row] == batch.labels(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t));
    total += f.token_count;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

TrainResult train(const std::vector<LanguageCorpus>& corpora, const TrainConfig& config) {
  config.validate();
  if (corpora.empty()) throw std::invalid_argument("train: no languages given");
  TrainResult result{build_model(corpora, config), {}, {}, {}};
  Model& model = result.model;

  std::vector<Example> examples;
  for (std::size_t lang = 0; lang < corpora.size(); ++lang) {
    auto part = prepare_examples(corpora[lang].corpus, lang, model, config.max_seq_len, &result.prepare);
    examples.insert(examples.end(), part.begin(), part.end());
  }
  if (examples.empty()) throw std::invalid_argument("train: corpus is empty");
  if (corpora.size() == 1 && config.adv_enabled)
    result.warnings.push_back("adversarial training with a single language: language loss is degenerate");

  result.history.push_back(measure(model, examples, config));
  AdamState state;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochAccumulator acc;
    for (const Batch& batch : make_batches(examples, config.batch_size, config.seed, epoch)) {
      Tape tape;
      const ForwardResult f = forward_pass(tape, batch, model, config);
      backward_pass(tape, f, model, state, config);
      acc.add(f, batch);
    }
    result.history.push_back(acc.record(epoch));
  }
  return result;
}

Corpus predict(const Model& model, const Corpus& corpus, const TrainConfig& config) {
  Corpus out = corpus;
  const auto limit = static_cast<std::size_t>(config.max_seq_len);
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < out.sentences.size(); start += kChunk) {
    const std::size_t end = std::min(out.sentences.size(), start + kChunk);
    std::vector<std::size_t> ids, lengths, which;
    for (std::size_t s = start; s < end; ++s) {
      const auto& tokens = out.sentences[s].tokens;
      if (tokens.empty()) continue;
      const std::size_t n = std::min(tokens.size(), limit);
      for (std::size_t t = 0; t < n; ++t) ids.push_back(model.vocab.id(tokens[t].form));
      lengths.push_back(n);
      which.push_back(s);
    }
    if (which.empty()) continue;

    Tape tape;
    EncoderVars enc{tape.constant(model.encoder.embedding), {}};
    for (const auto& m : model.encoder.mixers) enc.mixers.push_back(tape.constant(m));
    Variable h = encode_batch(enc, ids, lengths, model.encoder.summary).tokens;
    if (config.li_enabled) h = li_forward(h, tape.constant(model.li.weight), tape.constant(model.li.bias), config.k);
    const Matrix logits = linear(h, tape.constant(model.head.weight), tape.constant(model.head.bias)).value();

    Eigen::Index row = 0;
    for (std::size_t k = 0; k < which.size(); ++k) {
      Sentence& sentence = out.sentences[which[k]];
      TagSequence tags(sentence.tokens.size(), kOutside);
      for (std::size_t t = 0; t < lengths[k]; ++t, ++row) tags[t] = model.labels.label(argmax_row(logits, row));
      sentence.mwes = decode_tags(tags, DecodeMode::tolerant);
      for (auto& token : sentence.tokens)
        if (!token.untagged()) token.mwe_cell = "*";
      sentence = canonicalize(sentence);
    }
  }
  return out;
}

}  // namespace mweforge
