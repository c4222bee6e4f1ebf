#include "mweforge/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mweforge/evaluation.hpp"
#include "mweforge/synth.hpp"
#include "mweforge/tagging.hpp"
#include "mweforge/verify.hpp"

namespace mweforge {

namespace fs = std::filesystem;

namespace {

struct LanguageFiles {
  std::string code;
  std::string train;
  std::string dev;
  std::string test;
};

// "code=train[,dev[,test]]"
LanguageFiles parse_language_files(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("expected CODE=PATH[,PATH[,PATH]], got '" + spec + "'");
  LanguageFiles files;
  files.code = spec.substr(0, eq);
  std::vector<std::string> paths;
  std::stringstream rest(spec.substr(eq + 1));
  for (std::string p; std::getline(rest, p, ',');) paths.push_back(p);
  if (paths.empty() || paths.size() > 3 || paths[0].empty()) throw std::invalid_argument("bad language files '" + spec + "'");
  files.train = paths[0];
  if (paths.size() > 1) files.dev = paths[1];
  if (paths.size() > 2) files.test = paths[2];
  return files;
}

// "code=path", or a bare path under the code "all"
std::pair<std::string, std::string> parse_keyed_path(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {"all", spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

Corpus load_corpus(const std::string& path, std::ostream& err) {
  ParseResult parsed = read_cupt_file(path);
  for (const auto& d : parsed.diagnostics) err << path << ": line " << d.line << ": " << d.message << '\n';
  return std::move(parsed.corpus);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_switch(const std::string& name, const std::string& value) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw std::invalid_argument(name + ": expected on or off, got '" + value + "'");
}

/// Training flags; each maps onto a config key and overrides the config file when given.
class TrainFlags {
 public:
  void attach(CLI::App* app) {
    app->add_option("--config", config_path_, "Config file of key = value lines");
    app->add_option("--method", method_, "One of: monolingual, multilingual, multilingual+LI, multilingual+Adv, multilingual+LI+Adv");
    bind(app, "--seed", "seed");
    bind(app, "--epochs", "epochs");
    bind(app, "--batch-size", "batch_size");
    bind(app, "--lr", "learning_rate");
    bind(app, "--max-len", "max_seq_len");
    bind(app, "--k", "k");
    bind(app, "--lambda", "lambda");
    bind(app, "--li", "li_enabled");
    bind(app, "--adv", "adv_enabled");
  }

  const std::string& method() const { return method_; }

  TrainConfig resolve() const {
    TrainConfig config = config_path_.empty() ? TrainConfig{} : load_config(config_path_);
    apply_method(method_, config);
    for (const auto& [key, entry] : values_) {
      if (!entry.option->count()) continue;
      if (key == "li_enabled" || key == "adv_enabled")
        set_config_value(config, key, parse_switch(entry.option->get_name(), entry.value) ? "on" : "off");
      else
        set_config_value(config, key, entry.value);
    }
    if (const char* env = std::getenv("MWEFORGE_SEED"); env && *env) set_config_value(config, "seed", env);
    config.validate();
    return config;
  }

 private:
  struct Entry {
    std::string value;
    CLI::Option* option = nullptr;
  };

  void bind(CLI::App* app, const std::string& flag, const std::string& key) {
    Entry& entry = values_[key];
    entry.option = app->add_option(flag, entry.value);
  }

  std::string config_path_;
  std::string method_ = "multilingual";
  std::map<std::string, Entry> values_;
};

struct EvalFlags {
  std::string unseen_ref = "train+dev";
  std::string category_strict = "off";

  void attach(CLI::App* app) {
    app->add_option("--unseen-ref", unseen_ref, "Reference corpus for unseen MWEs")->check(CLI::IsMember({"train", "train+dev"}));
    app->add_option("--category-strict", category_strict, "Require matching categories")->check(CLI::IsMember({"on", "off"}));
  }

  EvalOptions options() const { return {category_strict == "on"}; }
  bool with_dev() const { return unseen_ref == "train+dev"; }
};

std::vector<LanguageCorpus> load_training(const std::vector<LanguageFiles>& files, std::ostream& err) {
  std::vector<LanguageCorpus> out;
  for (const auto& f : files) out.push_back({f.code, load_corpus(f.train, err)});
  return out;
}

void check_method_languages(const std::string& method, std::size_t languages, std::ostream& err) {
  if (method == "monolingual" && languages != 1)
    throw std::invalid_argument("method monolingual needs exactly one language, got " + std::to_string(languages));
  if (method != "monolingual" && languages < 2) err << "warning: method " << method << " with a single language\n";
}

TrainResult train_and_save(const std::vector<LanguageCorpus>& corpora, const TrainConfig& config, const fs::path& dir,
                           std::ostream& out, std::ostream& err) {
  out << format_config(config);
  TrainResult result = train(corpora, config);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  fs::create_directories(dir);
  save_checkpoint(model_to_checkpoint(result.model, config), (dir / "model.ckpt").string());
  write_text(dir / "history.csv", format_history(result.history));
  write_text(dir / "config.txt", format_config(config));
  std::string dropped;
  for (const auto& d : result.prepare.dropped) dropped += format_dropped(d) + '\n';
  write_text(dir / "dropped.tsv", dropped);
  if (result.prepare.truncated_sentences)
    err << "truncated " << result.prepare.truncated_sentences << " sentences to " << config.max_seq_len << " tokens\n";
  return result;
}

EvalReport evaluate_language(const Corpus& gold, const Corpus& pred, const Corpus& train, const Corpus* dev,
                             const EvalFlags& flags, std::ostream& err) {
  std::vector<const Corpus*> refs{&train};
  if (dev && flags.with_dev()) refs.push_back(dev);
  std::vector<Diagnostic> diagnostics;
  const auto keys = annotated_keys(refs, &diagnostics);
  EvalReport report = evaluate(gold, pred, keys, flags.options());
  for (const auto& d : diagnostics) err << "reference: " << d.message << '\n';
  for (const auto& d : report.diagnostics) err << "eval: " << d.message << '\n';
  return report;
}

void write_reports(const std::vector<ReportRow>& rows, const std::string& out_dir, std::ostream& out) {
  const std::string table = format_report_table(rows);
  out << table;
  if (out_dir.empty()) return;
  write_text(fs::path(out_dir) / "report.txt", table);
  write_text(fs::path(out_dir) / "report.csv", format_report_csv(rows));
}

std::vector<ReportRow> with_average(std::vector<ReportRow> rows, const std::string& method) {
  if (rows.size() < 2) return rows;
  std::vector<EvalReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  rows.push_back({"avg", method, average_reports(reports)});
  return rows;
}

}  // namespace

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"monolingual", "multilingual", "multilingual+LI", "multilingual+Adv",
                                              "multilingual+LI+Adv"};
  return names;
}

void apply_method(const std::string& method, TrainConfig& config) {
  if (method == "monolingual" || method == "multilingual") {
    config.li_enabled = false;
    config.adv_enabled = false;
  } else if (method == "multilingual+LI") {
    config.li_enabled = true;
    config.adv_enabled = false;
  } else if (method == "multilingual+Adv") {
    config.li_enabled = false;
    config.adv_enabled = true;
  } else if (method == "multilingual+LI+Adv") {
    config.li_enabled = true;
    config.adv_enabled = true;
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiword-expression identification toolkit"};
  app.name("mweforge");
  app.require_subcommand(1);
  int status = kExitOk;

  // convert
  auto* convert = app.add_subcommand("convert", "Convert between .cupt and per-token tag files");
  std::string conv_in, conv_out, conv_to = "tags", conv_sidecar;
  convert->add_option("--in", conv_in)->required();
  convert->add_option("--out", conv_out)->required();
  convert->add_option("--to", conv_to, "Target format")->check(CLI::IsMember({"tags", "cupt"}));
  convert->add_option("--sidecar", conv_sidecar, "Dropped memberships file (default: OUT.dropped)");
  convert->callback([&] {
    if (conv_to == "tags") {
      const Corpus corpus = load_corpus(conv_in, err);
      std::vector<DroppedMembership> dropped;
      write_text(conv_out, write_tags(corpus, &dropped));
      std::string lines;
      for (const auto& d : dropped) lines += format_dropped(d) + '\n';
      write_text(conv_sidecar.empty() ? conv_out + ".dropped" : conv_sidecar, lines);
      out << "converted " << corpus.sentences.size() << " sentences, dropped " << dropped.size() << " memberships\n";
    } else {
      const Corpus corpus = read_tags(read_text(conv_in));
      write_text(conv_out, write_cupt(corpus));
      out << "converted " << corpus.sentences.size() << " sentences\n";
    }
  });

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_in;
  stats->add_option("file", stats_in)->required();
  stats->callback([&] { out << format_stats(corpus_stats(load_corpus(stats_in, err))); });

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multilingual corpus");
  SynthOptions synth_options;
  std::string synth_out;
  synth->add_option("--languages", synth_options.languages)->check(CLI::PositiveNumber);
  synth->add_option("--sentences", synth_options.sentences);
  synth->add_option("--seed", synth_options.seed);
  synth->add_option("--out", synth_out)->required();
  synth->callback([&] {
    if (const char* env = std::getenv("MWEFORGE_SEED"); env && *env) synth_options.seed = std::stoull(env);
    for (const auto& path : write_synthetic(generate_synthetic(synth_options), synth_out)) out << path << '\n';
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  TrainFlags train_flags;
  train_flags.attach(train_cmd);
  std::vector<std::string> train_specs;
  std::string train_out;
  train_cmd->add_option("--train", train_specs, "CODE=PATH, repeatable")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->callback([&] {
    std::vector<LanguageFiles> files;
    for (const auto& s : train_specs) files.push_back(parse_language_files(s));
    check_method_languages(train_flags.method(), files.size(), err);
    train_and_save(load_training(files, err), train_flags.resolve(), train_out, out, err);
  });

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Tag a corpus with a trained model");
  std::string pred_model, pred_in, pred_out;
  predict_cmd->add_option("--model", pred_model)->required();
  predict_cmd->add_option("--in", pred_in)->required();
  predict_cmd->add_option("--out", pred_out)->required();
  predict_cmd->callback([&] {
    TrainConfig config;
    const Model model = model_from_checkpoint(load_checkpoint(pred_model), &config);
    write_text(pred_out, write_cupt(predict(model, load_corpus(pred_in, err), config)));
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Strict global and unseen scores");
  EvalFlags eval_flags;
  eval_flags.attach(eval_cmd);
  std::vector<std::string> eval_gold, eval_pred, eval_train, eval_dev;
  std::string eval_method = "-", eval_out;
  eval_cmd->add_option("--gold", eval_gold, "[CODE=]PATH, repeatable")->required();
  eval_cmd->add_option("--pred", eval_pred, "[CODE=]PATH, repeatable")->required();
  eval_cmd->add_option("--train", eval_train, "[CODE=]PATH reference, repeatable")->required();
  eval_cmd->add_option("--dev", eval_dev, "[CODE=]PATH reference, repeatable");
  eval_cmd->add_option("--method", eval_method, "Method label for the report");
  eval_cmd->add_option("--out", eval_out, "Directory for report.txt and report.csv");
  eval_cmd->callback([&] {
    auto keyed = [](const std::vector<std::string>& specs) {
      std::map<std::string, std::string> m;
      for (const auto& s : specs) m.insert(parse_keyed_path(s));
      return m;
    };
    const auto gold = keyed(eval_gold), pred = keyed(eval_pred), train_ref = keyed(eval_train), dev_ref = keyed(eval_dev);
    std::vector<ReportRow> rows;
    for (const auto& [code, gold_path] : gold) {
      if (!pred.count(code)) throw std::invalid_argument("no --pred for language " + code);
      if (!train_ref.count(code)) throw std::invalid_argument("no --train for language " + code);
      const Corpus g = load_corpus(gold_path, err);
      const Corpus p = load_corpus(pred.at(code), err);
      const Corpus t = load_corpus(train_ref.at(code), err);
      std::optional<Corpus> d;
      if (dev_ref.count(code)) d = load_corpus(dev_ref.at(code), err);
      rows.push_back({code, eval_method, evaluate_language(g, p, t, d ? &*d : nullptr, eval_flags, err)});
    }
    write_reports(with_average(std::move(rows), eval_method), eval_out, out);
  });

  // run: train, predict and evaluate in one go
  auto* run_cmd = app.add_subcommand("run", "Train, predict and evaluate one method");
  TrainFlags run_flags;
  run_flags.attach(run_cmd);
  EvalFlags run_eval;
  run_eval.attach(run_cmd);
  std::vector<std::string> run_specs;
  std::string run_out;
  run_cmd->add_option("--data", run_specs, "CODE=TRAIN,DEV,TEST, repeatable")->required();
  run_cmd->add_option("--out", run_out)->required();
  run_cmd->callback([&] {
    std::vector<LanguageFiles> files;
    for (const auto& s : run_specs) {
      files.push_back(parse_language_files(s));
      if (files.back().test.empty()) throw std::invalid_argument("--data needs CODE=TRAIN,DEV,TEST");
    }
    check_method_languages(run_flags.method(), files.size(), err);
    const auto corpora = load_training(files, err);
    const TrainConfig config = run_flags.resolve();
    const TrainResult result = train_and_save(corpora, config, run_out, out, err);
    std::vector<ReportRow> rows;
    for (std::size_t i = 0; i < files.size(); ++i) {
      const Corpus gold = load_corpus(files[i].test, err);
      const Corpus pred = predict(result.model, gold, config);
      write_text(fs::path(run_out) / "pred" / (files[i].code + ".cupt"), write_cupt(pred));
      std::optional<Corpus> dev;
      if (!files[i].dev.empty()) dev = load_corpus(files[i].dev, err);
      rows.push_back({files[i].code, run_flags.method(),
                      evaluate_language(gold, pred, corpora[i].corpus, dev ? &*dev : nullptr, run_eval, err)});
    }
    write_reports(with_average(std::move(rows), run_flags.method()), run_out, out);
  });

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Gradient and invariant verification suite");
  VerifyOptions verify_options;
  gradcheck->add_flag("--corrupt-grl-sign", verify_options.corrupt_grl_sign, "Fault injection: flip the reversal sign");
  gradcheck->callback([&] {
    const auto checks = run_verification(verify_options);
    out << format_checks(checks);
    if (!all_passed(checks)) {
      for (const auto& c : checks)
        if (!c.passed) err << "failed: " << c.name << '\n';
      status = kExitRuntime;
    }
  });

  // delta
  auto* delta = app.add_subcommand("delta", "Relative improvement 100 (new - base) / base");
  std::vector<double> delta_values;
  std::vector<std::string> delta_labels;
  delta->add_option("values", delta_values, "BASE NEW [BASE NEW ...]")->required();
  delta->add_option("--label", delta_labels, "Label per pair");
  delta->callback([&] {
    if (delta_values.size() % 2) throw std::invalid_argument("delta expects BASE NEW pairs");
    for (std::size_t i = 0; i < delta_values.size(); i += 2) {
      const std::size_t pair = i / 2;
      if (pair < delta_labels.size()) out << delta_labels[pair] << '\t';
      out << format_delta(improvement_delta(delta_values[i], delta_values[i + 1])) << '\n';
    }
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return status;
}

}  // namespace mweforge
