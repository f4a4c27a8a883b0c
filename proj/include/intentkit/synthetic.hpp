#pragma once

// Seeded template grammar for a small game-classroom intent corpus, its
// shifted "deployment" counterpart, and a class-centroid sentence provider.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "intentkit/corpus.hpp"
#include "intentkit/featurizer.hpp"

namespace intentkit::synthetic {

struct IntentGrammar {
  std::string intent;
  std::vector<std::string> templates;  // "{n}" is a number slot, "{x}" a filler slot
  std::vector<std::string> fillers;
};

inline const std::vector<std::string>& number_words() {
  static const std::vector<std::string> words = {"one", "two",   "three", "four",   "five",     "six",     "seven",
                                                 "eight", "nine", "ten",  "eleven", "twelve", "thirteen", "fifteen"};
  return words;
}

inline const std::string& oos_label() {
  static const std::string label = "out-of-scope";
  return label;
}

/// Ten intents including out-of-scope side talk.
inline std::vector<IntentGrammar> clean_grammar() {
  return {
      {"affirm",
       {"yes", "yes {x}", "yeah {x}", "yep {x}", "sure {x}", "okay yes", "of course {x}", "yes please {x}",
        "that is right {x}", "uh huh yes"},
       {"", "", "i think so", "let's do it", "definitely", "sounds good", "i agree", "totally"}},
      {"deny",
       {"no", "no {x}", "nope {x}", "not really {x}", "no way {x}", "nah {x}", "no thank you", "i don't think so {x}"},
       {"", "", "not now", "i don't want to", "never", "no no", "that is wrong"}},
      {"counting",
       {"{n}", "there are {n} {x}", "i count {n} {x}", "{n} {x}", "i see {n} {x}", "it is {n}", "we have {n} {x}",
        "maybe {n} {x}", "i think {n}", "the answer is {n}"},
       {"flowers", "stars", "trees", "bunnies", "rocks", "apples", "birds"}},
      {"answer-flowers",
       {"the flower is {x}", "{x} flower", "it is a {x} flower", "the {x} one", "i pick the {x} flower",
        "that flower looks {x}", "{x} petals", "the flowers are {x}"},
       {"red", "yellow", "blue", "purple", "pink", "white", "orange", "tall", "small"}},
      {"greet",
       {"hello {x}", "hi {x}", "hey {x}", "good morning {x}", "hi there {x}", "hello hello", "howdy {x}"},
       {"", "friend", "robot", "everyone", "kid space", "buddy"}},
      {"goodbye",
       {"bye {x}", "goodbye {x}", "see you later {x}", "bye bye", "see you tomorrow {x}", "good night {x}",
        "i have to go {x}"},
       {"", "friend", "robot", "everyone", "now", "buddy"}},
      {"help",
       {"help {x}", "i need help {x}", "can you help me {x}", "i am stuck {x}", "i don't understand {x}",
        "what do i do {x}", "this is hard {x}", "help me please"},
       {"", "please", "with this", "now", "again", "teacher"}},
      {"repeat",
       {"say that again {x}", "repeat {x}", "what did you say {x}", "can you repeat that {x}", "one more time {x}",
        "i didn't hear you {x}", "pardon {x}"},
       {"", "please", "robot", "again", "slower"}},
      {"next-step",
       {"what is next {x}", "next {x}", "let's go to the next one {x}", "move on {x}", "what now {x}",
        "next game {x}", "i am done {x}"},
       {"", "please", "robot", "game", "level"}},
      {oos_label(),
       {"mom can i have a {x}", "he took my {x}", "where is my {x}", "i want a {x}", "stop touching my {x}",
        "look at my {x}", "give me the {x}", "my {x} is broken", "did you bring the {x}", "i like your {x}"},
       {"snack", "pencil", "shoes", "juice", "jacket", "toy", "sandwich", "crayon", "backpack", "ball"}},
  };
}

/// Same intents minus two, with unseen synonyms, shorter phrasings and new side-talk.
inline std::vector<IntentGrammar> shifted_grammar() {
  return {
      {"affirm", {"yup", "ya {x}", "alright", "ok", "mhm", "affirmative"}, {"", "cool", "fine"}},
      {"deny", {"nuh uh", "nah", "nope", "negative {x}", "no"}, {"", "thanks", "bad"}},
      {"counting", {"{n}", "{n} {x}", "like {n}", "uhh {n}"}, {"daisies", "planets", "ducks", "clouds"}},
      {"answer-flowers", {"{x}", "{x} one", "its {x}"}, {"crimson", "violet", "golden", "lilac", "teal"}},
      {"greet", {"yo", "hiya {x}", "sup", "morning"}, {"", "pal", "dude"}},
      {"goodbye", {"later", "cya {x}", "peace out", "gotta go"}, {"", "pal", "dude"}},
      {"help", {"stuck", "huh {x}", "confused", "um help"}, {"", "pls", "sir"}},
      {"repeat", {"what", "huh", "again {x}", "come again"}, {"", "pls"}},
      {oos_label(),
       {"quit it", "gimme {x}", "lets play {x}", "thats mine", "teacher look", "can we go outside", "my turn",
        "ouch", "who has the {x}", "im hungry", "you are it", "watch this"},
       {"tag", "marker", "glue", "lego", "scissors", "tablet", "blocks"}},
  };
}

inline std::string render(const std::string& tpl, const std::string& filler, const std::string& number) {
  std::string out;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl.compare(i, 3, "{n}") == 0) {
      out += number;
      i += 2;
    } else if (tpl.compare(i, 3, "{x}") == 0) {
      out += filler;
      i += 2;
    } else {
      out += tpl[i];
    }
  }
  // collapse doubled / edge spaces left by empty fillers
  std::string clean;
  for (char c : out)
    if (!(c == ' ' && (clean.empty() || clean.back() == ' '))) clean += c;
  while (!clean.empty() && clean.back() == ' ') clean.pop_back();
  return clean;
}

/// Utterances per intent drawn (with distinct texts where the grammar allows) from the grammar.
/// `per_intent_counts` overrides the count for named intents.
inline Dataset generate(const std::vector<IntentGrammar>& grammar, std::size_t per_intent, std::uint64_t seed,
                        const std::string& name, const std::map<std::string, std::size_t>& per_intent_counts = {}) {
  Rng rng(seed);
  std::vector<Utterance> out;
  const auto& numbers = number_words();
  for (const auto& g : grammar) {
    const std::size_t want = per_intent_counts.contains(g.intent) ? per_intent_counts.at(g.intent) : per_intent;
    std::set<std::string> seen;
    std::uniform_int_distribution<std::size_t> pick_t(0, g.templates.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_f(0, g.fillers.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_n(0, numbers.size() - 1);
    std::bernoulli_distribution digits(0.3), polite(0.15);
    for (std::size_t made = 0, attempts = 0; made < want; ++attempts) {
      const std::string& tpl = g.templates[pick_t(rng)];
      const std::size_t n_index = pick_n(rng);
      const std::string number = digits(rng) ? std::to_string(n_index + 1) : numbers[n_index];
      std::string utt = render(tpl, g.fillers[pick_f(rng)], number);
      if (polite(rng) && g.intent != oos_label()) utt += "!";
      if (!seen.insert(utt).second && attempts < want * 20) continue;
      Utterance u;
      u.id = name + "-" + g.intent + "-" + std::to_string(made);
      u.text = utt;
      u.intent = g.intent;
      if (const auto pos = tpl.find("{n}"); pos != std::string::npos) {
        const std::string prefix = render(tpl.substr(0, pos), g.fillers[0], number);
        const std::size_t start = text::code_point_length(prefix) + (prefix.empty() ? 0 : 1);
        const std::size_t end = start + text::code_point_length(number);
        u.entities.push_back({start, end, "number", number});
      }
      out.push_back(std::move(u));
      ++made;
    }
  }
  return Dataset(name, std::move(out));
}

/// Clean corpus: 10 intents x `per_intent` utterances.
inline Dataset clean_corpus(std::uint64_t seed, std::size_t per_intent = 60) {
  return generate(clean_grammar(), per_intent, seed, "synthetic-clean");
}

/// Shifted corpus: doubled out-of-scope share, unseen vocabulary, shorter
/// utterances, next-step absent.
inline Dataset shifted_corpus(std::uint64_t seed, std::size_t per_intent = 30) {
  const auto grammar = shifted_grammar();
  const std::size_t n_other = grammar.size() - 1;
  // clean OOS share is 1/10; target 1/5 -> oos = n_other * per_intent / 4
  const std::size_t oos = n_other * per_intent / 4;
  return generate(grammar, per_intent, seed, "synthetic-shifted", {{oos_label(), oos}});
}

/// Sentence-table provider: centroid(intent) + noise, keyed by normalized text.
/// Centroids are unit vectors scaled by `separation`; noise is N(0, sigma^2) per component.
inline DenseProvider centroid_sentence_provider(const std::vector<const Dataset*>& corpora, std::size_t dim,
                                                double separation, double sigma, std::uint64_t seed) {
  std::map<std::string, std::vector<double>> centroid;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::set<std::string> intents;
  for (const auto* ds : corpora) intents.insert(ds->intents().begin(), ds->intents().end());
  for (const auto& intent : intents) {
    std::vector<double> c(dim);
    double n2 = 0;
    for (auto& v : c) {
      v = gauss(rng);
      n2 += v * v;
    }
    for (auto& v : c) v *= separation / std::sqrt(n2);
    centroid[intent] = std::move(c);
  }
  DenseProvider::Table table;
  for (const auto* ds : corpora)
    for (const auto& u : ds->utterances()) {
      const std::string key = text::normalize_key(u.text);
      if (table.contains(key)) continue;
      Rng noise(derive_seed(seed, fnv1a64(key)));
      std::vector<float> v(dim);
      for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<float>(centroid[u.intent][i] + sigma * gauss(noise));
      table.emplace(key, std::move(v));
    }
  DenseProvider p = DenseProvider::table(DenseKind::sentence_table, dim, std::move(table));
  p.set_source("synthetic:centroid");
  return p;
}

}  // namespace intentkit::synthetic
