#pragma once

// Supervised training loops with early stopping, attention pretraining with
// three objectives and three selection criteria, evidence-target
// construction, and multi-seed aggregation.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "evinf/corpus.hpp"
#include "evinf/eval.hpp"
#include "evinf/models.hpp"
#include "evinf/numerics.hpp"

namespace evinf::train {

enum class PretrainObjective { TokenwiseBCE, BalancedTokenwiseBCE, EvidenceMass };
enum class TargetMode { UniformOverEvidence, BinaryOnes };
enum class SelectionCriterion { TokenAUC, Entropy, EvidenceMass };

const char* objective_name(PretrainObjective o);
const char* criterion_name(SelectionCriterion c);
std::optional<PretrainObjective> objective_from_name(const std::string& s);
std::optional<SelectionCriterion> criterion_from_name(const std::string& s);
std::optional<TargetMode> target_mode_from_name(const std::string& s);

struct TrainConfig {
  int max_epochs = 50;
  int patience = 10;
  int batch_size = 32;
  int pretrain_batch_size = 16;
  double nested_dev_fraction = 0.10;
  uint64_t seed = 0;
  PretrainObjective objective = PretrainObjective::TokenwiseBCE;
  TargetMode target_mode = TargetMode::BinaryOnes;
  SelectionCriterion criterion = SelectionCriterion::TokenAUC;
  num::AdamConfig adam;

  void validate() const;
};

struct EvidenceTarget {
  std::vector<double> targets;
  bool degenerate = false;  // all-false mask
};

EvidenceTarget make_targets(const std::vector<bool>& mask, TargetMode mode);

// ---------------------------------------------------------------------------
// Encoded examples
// ---------------------------------------------------------------------------

struct EncodedExample {
  int64_t prompt_id = 0;
  std::vector<int> article;  // truncated to the model cap
  std::vector<int> i_ids, c_ids, o_ids;
  int cls = 0;               // label index
  std::vector<bool> mask;    // evidence mask aligned to `article`
  bool has_evidence = false;
};

struct EncodedData {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> nested_dev;
  long truncated_evidence_tokens = 0;  // evidence lost to the article cap
};

// Train-split prompts with gold labels, nested 90/10 split by article
// (seeded). Evidence masks are carried when the generator record has offsets.
EncodedData encode_dataset(const corpus::Dataset& ds, const prep::Vocabulary& vocab,
                           const model::ModelConfig& mcfg, const TrainConfig& tcfg);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_value = 0.0;  // macro-F1 for end-task runs, criterion for pretraining
  std::optional<double> dev_token_auc;
  bool is_best = false;
};

struct RunSummary {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_dev_value = 0.0;
};

// Adam on cross-entropy with early stopping on nested-dev macro-F1; the best
// checkpoint is restored into the model before returning. Nested-dev token
// AUC is logged per epoch when attention weights and masks are available.
RunSummary train(model::InferenceModel& model, const EncodedData& data, const TrainConfig& cfg);

struct PretrainSummary {
  RunSummary run;
  double init_token_auc = 0.5;
  double init_evidence_mass = 0.0;
  double best_token_auc = 0.5;
  double best_evidence_mass = 0.0;
};

// Trains only encoder + attention parameters on the configured objective,
// keeping the per-epoch best weights under the selection criterion.
PretrainSummary pretrain_attention(model::InferenceModel& model, const EncodedData& data,
                                   const TrainConfig& cfg);

double selection_criterion(const std::vector<num::Vec>& alphas,
                           const std::vector<std::vector<bool>>& masks, SelectionCriterion kind);

// Balanced pretraining sampler: all of the smaller side plus an equal-size
// seeded sample of the larger; exposed for the sampler audit.
std::vector<bool> balanced_token_sample(const std::vector<bool>& mask, Rng& rng);

// ---------------------------------------------------------------------------
// Pipeline-neural training
// ---------------------------------------------------------------------------

struct PipelineNeuralModel {
  model::SentenceTagger tagger;
  model::FeedForwardClassifier classifier;
  double evidence_threshold = 0.5;
};

// Stage 1: tagger on sentence-level evidence labels (nested-dev BCE loss
// selection). Stage 2: document classifier over tagger-selected sentences.
PipelineNeuralModel train_pipeline_neural(const corpus::Dataset& ds,
                                          const prep::Vocabulary& vocab,
                                          const model::ModelConfig& mcfg, const TrainConfig& cfg,
                                          RunSummary* tagger_summary = nullptr,
                                          RunSummary* doc_summary = nullptr);

// ---------------------------------------------------------------------------
// Multi-seed aggregation
// ---------------------------------------------------------------------------

struct MetricStat {
  double mean = 0.0, min = 0.0, max = 0.0;
};

struct MultiRunReport {
  int runs = 0;
  MetricStat precision, recall, f1;
  std::optional<MetricStat> token_auc, evidence_mass;
};

MultiRunReport multi_run(const std::function<eval::MetricsReport(uint64_t seed)>& run,
                         const std::vector<uint64_t>& seeds);

std::string format_multi_run(const MultiRunReport& rep);

}  // namespace evinf::train
