#include "evinf/heuristics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

namespace evinf::heur {

const DirectionLexicon& default_lexicon() {
  static const DirectionLexicon lex = {
      {
          "increase",  "increases",  "increased",  "increasing", "increment", "rise",
          "rises",     "rose",       "risen",      "rising",     "higher",
          "larger",    "elevated",   "elevation",  "improve",    "improves",  "improved",
          "improvement", "gain",     "gained",     "gains",      "enhance",   "enhanced",
          "enhancement", "exceed",   "exceeded",   "augmented",  "better",    "superior",
      },
      {
          "decrease",  "decreases",  "decreased",  "decreasing", "reduction", "reduce",
          "reduces",   "reduced",    "lower",      "lowered",    "decline",   "declines",
          "declined",  "declining",  "fell",       "fall",       "falls",     "fallen",
          "drop",      "dropped",    "drops",      "diminish",   "diminished", "fewer",
          "worse",     "shorter",    "smaller",    "inferior",   "attenuated", "suppressed",
      },
  };
  return lex;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> stop = {
      "a",   "an",  "the", "of",   "in",   "on",  "at",   "to",    "for",  "with", "and",
      "or",  "by",  "from", "as",  "is",   "are", "was",  "were",  "be",   "been", "being",
      "this", "that", "these", "those", "it", "its", "their", "his", "her", "than", "then",
      "but", "not", "no",  "vs",   "versus", "between", "among", "per", "after", "before",
      "during", "into", "over", "under", "both", "each", "any", "all",
  };
  return stop;
}

DirectionLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  DirectionLexicon lex;
  std::set<std::string>* current = nullptr;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    size_t b = line.find_first_not_of(' ');
    if (b == std::string::npos || line[b] == '#') continue;
    std::string term = line.substr(b);
    std::transform(term.begin(), term.end(), term.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (term == "[increase]") current = &lex.increase_terms;
    else if (term == "[decrease]") current = &lex.decrease_terms;
    else if (current) current->insert(term);
    else throw DataError(path + ": term before any [increase]/[decrease] section");
  }
  for (const auto& t : lex.increase_terms)
    if (lex.decrease_terms.count(t))
      throw DataError(path + ": term '" + t + "' appears in both sections");
  return lex;
}

namespace {

bool has_alnum(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c); });
}

std::set<std::string> prompt_word_set(const std::string& text,
                                      const std::set<std::string>& stopwords) {
  std::set<std::string> words;
  for (const auto& tok : prep::tokenize(text))
    if (has_alnum(tok.surface) && !stopwords.count(tok.surface)) words.insert(tok.surface);
  return words;
}

}  // namespace

size_t rank_sentences(const prep::ProcessedDocument& doc, const corpus::ICOPrompt& prompt,
                      const std::set<std::string>& stopwords) {
  std::set<std::string> prompt_words = prompt_word_set(prompt.intervention, stopwords);
  for (const auto& w : prompt_word_set(prompt.comparator, stopwords)) prompt_words.insert(w);
  for (const auto& w : prompt_word_set(prompt.outcome, stopwords)) prompt_words.insert(w);

  size_t best = 0;
  size_t best_points = 0;
  for (size_t s = 0; s < doc.sentences.size(); ++s) {
    std::set<std::string> seen;
    for (size_t t : doc.tokens_in_sentence(s)) {
      const std::string& surf = doc.tokens[t].surface;
      if (prompt_words.count(surf)) seen.insert(surf);
    }
    if (seen.size() > best_points) {
      best_points = seen.size();
      best = s;
    }
  }
  return best;
}

std::vector<PValueMatch> extract_p_values(const std::string& sentence) {
  std::vector<PValueMatch> matches;
  const size_t n = sentence.size();
  for (size_t i = 0; i < n; ++i) {
    if (sentence[i] != 'p' && sentence[i] != 'P') continue;
    if (i > 0 && std::isalnum((unsigned char)sentence[i - 1])) continue;
    size_t j = i + 1;
    while (j < n && std::isspace((unsigned char)sentence[j])) ++j;
    if (j >= n) break;
    PForm form;
    if (sentence[j] == '=') form = PForm::EQ;
    else if (sentence[j] == '>') form = PForm::GT;
    else if (sentence[j] == '<') form = PForm::LT;
    else continue;
    ++j;
    while (j < n && std::isspace((unsigned char)sentence[j])) ++j;

    // numeral: digits with optional decimal point, optional exponent
    size_t k = j;
    bool digits = false;
    while (k < n && std::isdigit((unsigned char)sentence[k])) ++k, digits = true;
    if (k < n && sentence[k] == '.') {
      ++k;
      while (k < n && std::isdigit((unsigned char)sentence[k])) ++k, digits = true;
    }
    if (digits && k < n && (sentence[k] == 'e' || sentence[k] == 'E')) {
      size_t e = k + 1;
      if (e < n && (sentence[e] == '+' || sentence[e] == '-')) ++e;
      size_t d = e;
      while (d < n && std::isdigit((unsigned char)sentence[d])) ++d;
      if (d > e) k = d;
    }
    if (!digits) continue;  // unparseable numeral, skip this match

    PValueMatch m;
    m.form = form;
    m.position = i;
    m.end = k;
    try {
      m.value = std::stod(sentence.substr(j, k - j));
    } catch (...) {
      continue;
    }
    matches.push_back(m);
    i = k - 1;
  }
  return matches;
}

PointsTally score_labels(const std::string& sentence, const std::vector<PValueMatch>& matches,
                         const corpus::ICOPrompt& prompt,
                         const std::set<std::string>& stopwords) {
  PointsTally tally;

  // midpoints of intervention/comparator mentions in the sentence
  std::set<std::string> ic_words = prompt_word_set(prompt.intervention, stopwords);
  for (const auto& w : prompt_word_set(prompt.comparator, stopwords)) ic_words.insert(w);
  std::vector<double> mention_mids;
  for (const auto& tok : prep::tokenize(sentence))
    if (ic_words.count(tok.surface)) mention_mids.push_back(0.5 * double(tok.start + tok.end));

  // when a mention exists, only the EQ match nearest to it contributes
  int chosen_eq = -1;
  if (!mention_mids.empty()) {
    double best_dist = 0.0;
    for (size_t m = 0; m < matches.size(); ++m) {
      if (matches[m].form != PForm::EQ) continue;
      const double mid = 0.5 * double(matches[m].position + matches[m].end);
      double dist = std::numeric_limits<double>::max();
      for (double mm : mention_mids) dist = std::min(dist, std::abs(mid - mm));
      if (chosen_eq < 0 || dist < best_dist) {
        chosen_eq = int(m);
        best_dist = dist;
      }
    }
  }

  for (size_t m = 0; m < matches.size(); ++m) {
    switch (matches[m].form) {
      case PForm::EQ:
        if (mention_mids.empty() || int(m) == chosen_eq) {
          if (matches[m].value < 0.05) ++tally.sig_different;
          else ++tally.no_sig_diff;  // exactly 0.05 counts as non-significant
        }
        break;
      case PForm::GT: ++tally.no_sig_diff; break;
      case PForm::LT: ++tally.sig_different; break;
    }
  }
  return tally;
}

corpus::Label infer_direction(const std::string& sentence, const DirectionLexicon& lexicon) {
  int inc = 0, dec = 0;
  for (const auto& tok : prep::tokenize(sentence)) {
    if (lexicon.increase_terms.count(tok.surface)) ++inc;
    if (lexicon.decrease_terms.count(tok.surface)) ++dec;
  }
  if (dec > inc) return corpus::Label::SigDecreased;
  return corpus::Label::SigIncreased;  // ties go to the more frequent class
}

namespace {

corpus::Label decide(const std::string& span_text, const corpus::ICOPrompt& prompt,
                     const DirectionLexicon& lexicon, const std::set<std::string>& stopwords) {
  const auto matches = extract_p_values(span_text);
  const PointsTally tally = score_labels(span_text, matches, prompt, stopwords);
  if (tally.no_sig_diff + tally.sig_different == 0)
    return infer_direction(span_text, lexicon);  // no p-value: assume significant
  if (tally.no_sig_diff >= tally.sig_different) return corpus::Label::NoSigDiff;
  return infer_direction(span_text, lexicon);
}

}  // namespace

HeuristicResult heuristic_classify(const prep::ProcessedDocument& doc,
                                   const corpus::ICOPrompt& prompt,
                                   const DirectionLexicon& lexicon,
                                   const std::set<std::string>& stopwords) {
  HeuristicResult res;
  if (doc.sentences.empty()) {
    res.label = decide("", prompt, lexicon, stopwords);
    return res;
  }
  res.sentence_index = rank_sentences(doc, prompt, stopwords);
  res.sentence_span = doc.sentences[res.sentence_index];
  const std::string text =
      doc.text.substr(res.sentence_span.start, res.sentence_span.end - res.sentence_span.start);
  res.label = decide(text, prompt, lexicon, stopwords);
  return res;
}

corpus::Label heuristic_classify_oracle(const std::string& evidence_text,
                                        const corpus::ICOPrompt& prompt,
                                        const DirectionLexicon& lexicon,
                                        const std::set<std::string>& stopwords) {
  if (evidence_text.empty())
    throw std::invalid_argument("heuristic_classify_oracle: empty evidence span");
  return decide(evidence_text, prompt, lexicon, stopwords);
}

}  // namespace evinf::heur
