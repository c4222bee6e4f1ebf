#include "mweforge/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <stdexcept>

namespace mweforge {

namespace {

constexpr const char* kColumnsHeader =
    "# global.columns = ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC PARSEME:MWE";

const std::vector<std::string> kCategories{"IRV", "LVC.full", "VID", "VPC.full"};

struct Lexeme {
  std::string lemma;
  std::string upos;
};

struct Pattern {
  std::size_t verb;
  std::vector<std::size_t> rest;  // particle and/or noun, in surface order
  std::string category;
};

class Generator {
 public:
  Generator(const SynthOptions& options, int language)
      : options_(options), rng_(options.seed * 1000003ULL + static_cast<std::uint64_t>(language)) {
    code_ = std::string("s") + static_cast<char>('a' + language % 26) + (language >= 26 ? std::to_string(language / 26) : "");
    build_lexicon(static_cast<char>('b' + language % 24));
    build_patterns();
  }

  SynthLanguage run() {
    SynthLanguage out;
    out.code = code_;
    const int total = options_.sentences;
    const int n_test = total / 5;
    const int n_dev = total / 10;
    const int n_train = total - n_test - n_dev;
    out.train = make_corpus("train", n_train, false);
    out.dev = make_corpus("dev", n_dev, false);
    out.test = make_corpus("test", n_test, true);
    return out;
  }

 private:
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::string fresh_word(char initial, std::set<std::string>& used) {
    static const char* consonants = "bdfgklmnprstvz";
    static const char* vowels = "aeiou";
    while (true) {
      std::string w(1, initial);
      const std::size_t syllables = 2 + pick(2);
      for (std::size_t s = 0; s < syllables; ++s) {
        w += vowels[pick(5)];
        w += consonants[pick(14)];
      }
      if (used.insert(w).second) return w;
    }
  }

  void build_lexicon(char initial) {
    std::set<std::string> used;
    const auto vocab = static_cast<std::size_t>(std::max(options_.vocab_size, 60));
    const std::size_t n_verbs = 16, n_nouns = 24, n_particles = 8;
    for (std::size_t i = 0; i < vocab; ++i) {
      std::string upos = i < n_verbs                            ? "VERB"
                         : i < n_verbs + n_nouns                ? "NOUN"
                         : i < n_verbs + n_nouns + n_particles ? "ADP"
                                                               : (i % 3 == 0 ? "ADJ" : i % 3 == 1 ? "NOUN" : "ADV");
      lexicon_.push_back({fresh_word(initial, used), upos});
    }
    for (std::size_t i = 0; i < n_verbs; ++i) verbs_.push_back(i);
    for (std::size_t i = n_verbs; i < n_verbs + n_nouns; ++i) nouns_.push_back(i);
    for (std::size_t i = n_verbs + n_nouns; i < n_verbs + n_nouns + n_particles; ++i) particles_.push_back(i);
    for (std::size_t i = n_verbs + n_nouns + n_particles; i < vocab; ++i) fillers_.push_back(i);
  }

  void build_patterns() {
    std::set<std::vector<std::size_t>> keys;
    std::vector<Pattern> all;
    while (all.size() < 40) {
      Pattern p;
      p.verb = verbs_[pick(verbs_.size())];
      p.category = kCategories[p.verb % kCategories.size()];
      if (unit() < 0.3) p.rest.push_back(particles_[pick(particles_.size())]);
      p.rest.push_back(nouns_[pick(nouns_.size())]);
      std::vector<std::size_t> key = p.rest;
      key.push_back(p.verb);
      std::sort(key.begin(), key.end());
      if (keys.insert(key).second) all.push_back(std::move(p));
    }
    seen_.assign(all.begin(), all.begin() + 30);
    unseen_.assign(all.begin() + 30, all.end());
  }

  void push_token(Sentence& s, std::size_t lexeme, bool inflect) {
    const Lexeme& lex = lexicon_[lexeme];
    Token t;
    t.position = static_cast<int>(s.tokens.size()) + 1;
    t.lemma = lex.lemma;
    t.form = inflect && unit() < 0.5 ? lex.lemma + "r" : lex.lemma;
    t.upos = lex.upos;
    t.other_cols = {"_", "_", "_", "_", "_", "_"};
    s.tokens.push_back(std::move(t));
  }

  void push_fillers(Sentence& s, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) push_token(s, fillers_[pick(fillers_.size())], false);
  }

  Sentence make_sentence(const std::string& split, int index, bool allow_unseen) {
    Sentence s;
    s.sentence_id = "synth-" + code_ + "-" + split + "-" + std::to_string(index + 1);
    s.metadata_lines.push_back("# source_sent_id = " + s.sentence_id);

    // chunk kinds: 0 = expression, 1 = literal verb
    std::vector<int> chunks;
    const double r = unit();
    const int n_mwes = r < 0.2 ? 0 : r < 0.75 ? 1 : 2;
    for (int i = 0; i < n_mwes; ++i) chunks.push_back(0);
    if (unit() < 0.35) chunks.push_back(1);
    for (std::size_t i = chunks.size(); i > 1; --i) std::swap(chunks[i - 1], chunks[pick(i)]);

    push_fillers(s, 1 + pick(3));
    int next_id = 1;
    for (int kind : chunks) {
      if (kind == 1) {
        push_token(s, verbs_[pick(verbs_.size())], true);
      } else {
        const bool from_unseen = allow_unseen && unit() < options_.unseen_rate;
        const Pattern& p = from_unseen ? unseen_[pick(unseen_.size())] : seen_[pick(seen_.size())];
        MweInstance mwe{next_id++, p.category, {}};
        push_token(s, p.verb, true);
        mwe.token_positions.push_back(static_cast<int>(s.tokens.size()));
        if (unit() < options_.gap_probability) push_fillers(s, 1);
        for (std::size_t part : p.rest) {
          push_token(s, part, false);
          mwe.token_positions.push_back(static_cast<int>(s.tokens.size()));
        }
        s.mwes.push_back(std::move(mwe));
      }
      push_fillers(s, 2 + pick(3));
    }
    if (s.tokens.size() < 8) push_fillers(s, 8 - s.tokens.size());

    std::string text;
    for (const auto& t : s.tokens) text += (text.empty() ? "" : " ") + t.form;
    s.metadata_lines.push_back("# text = " + text);
    return canonicalize(s);
  }

  Corpus make_corpus(const std::string& split, int count, bool allow_unseen) {
    Corpus c;
    c.header_lines.push_back(kColumnsHeader);
    for (int i = 0; i < count; ++i) c.sentences.push_back(make_sentence(split, i, allow_unseen));
    return c;
  }

  const SynthOptions& options_;
  std::mt19937_64 rng_;
  std::string code_;
  std::vector<Lexeme> lexicon_;
  std::vector<std::size_t> verbs_, nouns_, particles_, fillers_;
  std::vector<Pattern> seen_, unseen_;
};

}  // namespace

std::vector<SynthLanguage> generate_synthetic(const SynthOptions& options) {
  if (options.languages < 1) throw std::invalid_argument("synth: need at least one language");
  if (options.sentences < 10) throw std::invalid_argument("synth: need at least 10 sentences per language");
  std::vector<SynthLanguage> out;
  for (int lang = 0; lang < options.languages; ++lang) out.push_back(Generator(options, lang).run());
  return out;
}

std::vector<std::string> write_synthetic(const std::vector<SynthLanguage>& languages, const std::string& directory) {
  std::filesystem::create_directories(directory);
  std::vector<std::string> paths;
  for (const auto& lang : languages) {
    for (const auto& [split, corpus] : {std::pair<const char*, const Corpus*>{"train", &lang.train}, {"dev", &lang.dev},
                                        {"test", &lang.test}}) {
      const std::string path = (std::filesystem::path(directory) / (lang.code + "_" + split + ".cupt")).string();
      write_cupt_file(*corpus, path);
      paths.push_back(path);
    }
  }
  return paths;
}

}  // namespace mweforge
