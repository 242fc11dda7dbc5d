#pragma once

// Binary bag-of-words multinomial logistic regression over concatenated
// article + ICO segments, plus the pipelined variant: a sentence-level
// evidence tagger feeding a document classifier built from the sentences it
// selects.

#include <cstdint>
#include <string>
#include <vector>

#include "evinf/corpus.hpp"
#include "evinf/preprocess.hpp"

namespace evinf::lin {

// sparse set of active indices, binary presence semantics
struct BoWVector {
  std::vector<int> indices;  // sorted, unique
};

enum class Segment { Article = 0, Intervention = 1, Comparator = 2, Outcome = 3 };

// segment s, token t -> s * |V| + id(t); OOV tokens hit the segment's OOV slot
BoWVector featurize(const std::vector<std::string>& article_tokens,
                    const std::vector<std::string>& intervention_tokens,
                    const std::vector<std::string>& comparator_tokens,
                    const std::vector<std::string>& outcome_tokens,
                    const prep::Vocabulary& vocab);

// single-segment BoW over one token list (the sentence tagger feature space)
BoWVector featurize_single(const std::vector<std::string>& tokens, const prep::Vocabulary& vocab);

BoWVector merge(const BoWVector& a, const BoWVector& b);  // index union

struct LinearModel {
  int n_classes = 0;
  int n_features = 0;
  std::vector<double> weights;  // n_classes x n_features, row-major
  std::vector<double> bias;     // n_classes
  double l2 = 0.0;

  double& w(int cls, int feat) { return weights[size_t(cls) * n_features + feat]; }
  double w(int cls, int feat) const { return weights[size_t(cls) * n_features + feat]; }

  void save(const std::string& path) const;
  static LinearModel load(const std::string& path);
};

struct LinearExample {
  BoWVector features;
  int cls = 0;
};

struct LrConfig {
  double step = 0.1;
  int max_iters = 500;
  double grad_tol = 1e-6;
  double l2 = 1e-4;
};

// mean multinomial cross-entropy + (l2/2)*||W||^2 and its gradient
double lr_loss_and_grad(const LinearModel& model, const std::vector<LinearExample>& examples,
                        std::vector<double>& grad_w, std::vector<double>& grad_b);

// full-batch gradient descent from zero init; deterministic
LinearModel lr_train(const std::vector<LinearExample>& examples, int n_classes, int n_features,
                     const LrConfig& config = {});

struct LinearPrediction {
  int cls = 0;  // argmax, lowest class index on ties
  std::vector<double> probs;
};

LinearPrediction lr_predict(const LinearModel& model, const BoWVector& features);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct PipelineLrModel {
  LinearModel sentence_model;  // 2-class over |V| sentence BoW
  LinearModel doc_model;       // 3-class over 4|V| segments
  double evidence_threshold = 0.5;
};

struct PipelineLrResult {
  corpus::Label label = corpus::Label::NoSigDiff;
  std::vector<double> sentence_scores;  // evidence probability per sentence
  std::vector<size_t> selected;         // sentences above threshold (or top-1 fallback)
};

PipelineLrResult pipeline_lr(const prep::ProcessedDocument& doc, const corpus::ICOPrompt& prompt,
                             const PipelineLrModel& model, const prep::Vocabulary& vocab);

// Trains the sentence tagger on per-(prompt, sentence) evidence labels, then
// the document model on aggregates of the sentences the tagger selects.
PipelineLrModel train_pipeline_lr(const corpus::Dataset& ds, const prep::Vocabulary& vocab,
                                  const LrConfig& config = {});

}  // namespace evinf::lin
