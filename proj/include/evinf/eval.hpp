#pragma once

// Metrics and the experiment harness: confusion matrices, macro / per-class
// P/R/F1, rank-based token AUC, evidence mass, sentence-score propagation,
// oracle-span evaluation and prompt/article ablations over every system.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evinf/corpus.hpp"
#include "evinf/heuristics.hpp"
#include "evinf/linear.hpp"
#include "evinf/models.hpp"

namespace evinf::eval {

struct ConfusionMatrix {
  long counts[3][3] = {};  // rows = gold, cols = predicted

  void add(corpus::Label gold, corpus::Label pred) {
    ++counts[corpus::label_index(gold)][corpus::label_index(pred)];
  }
  long total() const;
};

struct ClassMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  ClassMetrics per_class[3];
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  std::optional<double> token_auc;
  std::optional<double> evidence_mass;
  long evaluated = 0;
  long excluded = 0;  // prompts without a verified generator label
};

// 0/0 precision and recall count as 0; F1 is 0 when P + R = 0
MetricsReport macro_prf(const ConfusionMatrix& confusion);

// Mann-Whitney AUC with ties counted 1/2; nullopt when the mask is
// single-class
std::optional<double> token_auc(std::span<const double> scores, const std::vector<bool>& mask);

// sum of normalized attention over evidence tokens
double evidence_mass(std::span<const double> alpha_normalized, const std::vector<bool>& mask);

// every token inherits its sentence's probability
std::vector<double> sentence_scores_to_tokens(const std::vector<double>& sentence_probs,
                                              const prep::ProcessedDocument& doc);

// token AUC achievable when forced to select a single sentence per prompt
// (mean over prompts with usable masks)
std::optional<double> sentence_ceiling_auc(const corpus::Dataset& ds, corpus::Split split);

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

struct EvalOptions {
  bool oracle_spans = false;
  bool ablate_prompt = false;
  bool ablate_article = false;
};

struct Prediction {
  corpus::Label label = corpus::Label::NoSigDiff;
  // per-token relevance aligned to the (possibly truncated) article tokens;
  // absent for systems that do not score tokens or in oracle mode
  std::optional<std::vector<double>> token_scores;
};

class System {
 public:
  virtual ~System() = default;
  virtual std::string name() const = 0;
  virtual Prediction predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                             const EvalOptions& opts) const = 0;
};

class MajoritySystem : public System {
 public:
  std::string name() const override { return "majority"; }
  Prediction predict(const corpus::Dataset&, const corpus::ICOPrompt&,
                     const EvalOptions&) const override {
    return {corpus::Label::NoSigDiff, std::nullopt};
  }
};

class HeuristicSystem : public System {
 public:
  std::string name() const override { return "heuristics"; }
  Prediction predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                     const EvalOptions& opts) const override;
};

class LinearSystem : public System {
 public:
  LinearSystem(const lin::LinearModel& model, const prep::Vocabulary& vocab)
      : model_(model), vocab_(vocab) {}
  std::string name() const override { return "logistic-regression"; }
  Prediction predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                     const EvalOptions& opts) const override;

 private:
  const lin::LinearModel& model_;
  const prep::Vocabulary& vocab_;
};

class PipelineLinearSystem : public System {
 public:
  PipelineLinearSystem(const lin::PipelineLrModel& model, const prep::Vocabulary& vocab)
      : model_(model), vocab_(vocab) {}
  std::string name() const override { return "pipeline-logistic-regression"; }
  Prediction predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                     const EvalOptions& opts) const override;

 private:
  const lin::PipelineLrModel& model_;
  const prep::Vocabulary& vocab_;
};

class NeuralSystem : public System {
 public:
  NeuralSystem(const model::InferenceModel& m, const prep::Vocabulary& vocab)
      : model_(m), vocab_(vocab) {}
  std::string name() const override;
  Prediction predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                     const EvalOptions& opts) const override;

 private:
  const model::InferenceModel& model_;
  const prep::Vocabulary& vocab_;
};

class PipelineNeuralSystem : public System {
 public:
  PipelineNeuralSystem(const model::SentenceTagger& tagger,
                       const model::FeedForwardClassifier& classifier,
                       const prep::Vocabulary& vocab, double threshold = 0.5)
      : tagger_(tagger), classifier_(classifier), vocab_(vocab), threshold_(threshold) {}
  std::string name() const override;
  Prediction predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                     const EvalOptions& opts) const override;

 private:
  const model::SentenceTagger& tagger_;
  const model::FeedForwardClassifier& classifier_;
  const prep::Vocabulary& vocab_;
  double threshold_;
};

// Evaluates every prompt of the split that has a gold label. Token AUC and
// evidence mass are unweighted means of per-prompt values where defined.
MetricsReport evaluate_model(const System& system, const corpus::Dataset& ds, corpus::Split split,
                             const EvalOptions& opts = {});

std::string format_report(const std::string& name, const MetricsReport& rep);

// shared helpers for turning text into model inputs
std::vector<int> token_ids(const prep::ProcessedDocument& doc, const prep::Vocabulary& vocab);
std::vector<int> text_token_ids(const std::string& text, const prep::Vocabulary& vocab);
std::vector<std::string> text_tokens(const std::string& text);

}  // namespace evinf::eval
