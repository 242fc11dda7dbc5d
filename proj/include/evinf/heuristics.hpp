#pragma once

// Rule-based baseline: pick the sentence with the most ICO word overlap,
// extract reported p-values, score significance points, and read the effect
// direction off a static synonym lexicon. An oracle variant interprets a
// given evidence span directly.

#include <set>
#include <string>
#include <vector>

#include "evinf/corpus.hpp"
#include "evinf/preprocess.hpp"

namespace evinf::heur {

enum class PForm { EQ, GT, LT };

struct PValueMatch {
  PForm form = PForm::EQ;
  double value = 0.0;
  size_t position = 0;  // offset of the match within the sentence
  size_t end = 0;       // one past the numeral
};

struct PointsTally {
  int no_sig_diff = 0;
  int sig_different = 0;
};

struct DirectionLexicon {
  std::set<std::string> increase_terms;
  std::set<std::string> decrease_terms;  // kept disjoint from increase_terms
};

const DirectionLexicon& default_lexicon();
const std::set<std::string>& default_stopwords();

// Sections headed by [increase] / [decrease], one term per line.
DirectionLexicon load_lexicon(const std::string& path);

// Index of the sentence with the most distinct prompt words (stopwords
// removed); ties break toward the earlier sentence.
size_t rank_sentences(const prep::ProcessedDocument& doc, const corpus::ICOPrompt& prompt,
                      const std::set<std::string>& stopwords = default_stopwords());

// "p = X", "p > X", "p < X", case-insensitive, whitespace around the
// operator ignored; X may be "0.05", ".05", "5" or scientific "1e-3".
std::vector<PValueMatch> extract_p_values(const std::string& sentence);

PointsTally score_labels(const std::string& sentence, const std::vector<PValueMatch>& matches,
                         const corpus::ICOPrompt& prompt,
                         const std::set<std::string>& stopwords = default_stopwords());

corpus::Label infer_direction(const std::string& sentence,
                              const DirectionLexicon& lexicon = default_lexicon());

struct HeuristicResult {
  corpus::Label label = corpus::Label::NoSigDiff;
  size_t sentence_index = 0;
  prep::Span sentence_span;
};

HeuristicResult heuristic_classify(const prep::ProcessedDocument& doc,
                                   const corpus::ICOPrompt& prompt,
                                   const DirectionLexicon& lexicon = default_lexicon(),
                                   const std::set<std::string>& stopwords = default_stopwords());

// Stage-2 rules applied directly to a given span (no sentence selection).
corpus::Label heuristic_classify_oracle(const std::string& evidence_text,
                                        const corpus::ICOPrompt& prompt,
                                        const DirectionLexicon& lexicon = default_lexicon(),
                                        const std::set<std::string>& stopwords = default_stopwords());

}  // namespace evinf::heur
