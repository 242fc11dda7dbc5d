#pragma once

// Neural evidence-inference architectures. A uni-directional GRU encodes the
// article; prompt fields are mean-of-embedding vectors. Variants differ in
// how article features reach the classifier: the final GRU state directly
// (vanilla), softmax attention over hidden states, conditional attention that
// scores [h_t; i; c; o] through a tanh layer, or per-token sigmoid scores
// renormalized for the context vector. A separate GRU sentence tagger feeds
// the pipeline variant. All backward passes are exact and hand-derived; see
// grad checks in the tests.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "evinf/numerics.hpp"
#include "evinf/preprocess.hpp"

namespace evinf::model {

enum class Variant {
  Vanilla,
  Attn,
  CondAttn,
  TokenwiseAttn,
  CondTokenwiseAttn,
  PipelineNeural,
  CondPipelineNeural,
};

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

bool variant_is_conditional(Variant v);
bool variant_is_tokenwise(Variant v);
bool variant_has_attention(Variant v);

struct ModelConfig {
  Variant variant = Variant::CondAttn;
  int emb_dim = 200;
  int hidden = 32;       // GRU state size
  int attn_hidden = 32;  // conditional attention hidden layer
  // multiplier on the conditional-attention init range; larger values start
  // the tanh layer in its curved regime where prompt/article interactions
  // carry gradient
  double attn_init_scale = 12.0;
  int cls_hidden = 32;   // classifier hidden layer
  int max_tokens = 4096; // article truncation cap
  uint64_t seed = 0;
};

struct PromptEncoding {
  num::Vec i, c, o;
};

struct ArticleEncoding {
  num::Tensor2 H;    // hidden x T, column t = GRU state after token t
  num::Vec summary;  // final state
};

enum class AttentionMode { SoftmaxNormalized, PerTokenSigmoid };

struct AttentionWeights {
  AttentionMode mode = AttentionMode::SoftmaxNormalized;
  num::Vec values;      // softmax weights (sum to 1) or per-token sigmoids in (0,1)
  num::Vec normalized;  // the copy used for the context vector
};

struct ForwardCache {
  std::vector<int> article_ids;
  std::vector<int> i_ids, c_ids, o_ids;
  PromptEncoding prompt;
  bool ablate_prompt = false;
  bool ablate_article = false;

  std::vector<num::GruStepCache> steps;
  num::Tensor2 H;
  num::Vec scores;        // attention logits s_t
  num::Tensor2 attn_tanh; // conditional attention activations, attn_hidden x T
  AttentionWeights attn;
  num::Vec context;
  num::Vec features;
  num::Vec hidden_out;
  num::Vec logits;
};

struct ForwardOptions {
  bool ablate_prompt = false;
  bool ablate_article = false;
};

class InferenceModel {
 public:
  InferenceModel(const ModelConfig& cfg, int vocab_size);

  const ModelConfig& config() const { return cfg_; }
  int vocab_size() const { return emb_.vocab_size(); }
  num::Embedding& embedding() { return emb_; }
  const num::Embedding& embedding() const { return emb_; }
  num::GruParams& gru() { return gru_; }

  PromptEncoding encode_prompt(const std::vector<int>& i_ids, const std::vector<int>& c_ids,
                               const std::vector<int>& o_ids) const;
  // throws on an empty article
  ArticleEncoding encode_article(const std::vector<int>& ids) const;

  AttentionWeights attend(const num::Tensor2& H) const;                      // unconditional
  AttentionWeights attend_conditional(const num::Tensor2& H, const PromptEncoding& p) const;
  static num::Vec context_vector(const num::Tensor2& H, const num::Vec& alpha);

  // full pass through encode -> attend -> classify; article truncated to the cap
  ForwardCache forward(const std::vector<int>& article_ids, const std::vector<int>& i_ids,
                       const std::vector<int>& c_ids, const std::vector<int>& o_ids,
                       const ForwardOptions& opts = {}) const;

  // gradients of a scalar loss with the given dL/dlogits
  void backward(const ForwardCache& cache, const std::array<double, 3>& dlogits);
  // gradients entering at the attention scores (tokenwise pretraining)
  void backward_from_scores(const ForwardCache& cache, const num::Vec& dscores);
  // gradients entering at the normalized attention weights (evidence mass)
  void backward_from_normalized(const ForwardCache& cache, const num::Vec& dnormalized);

  int predict_class(const ForwardCache& cache) const;  // lowest class index on tied logits

  std::vector<num::Parameter*> parameters();            // everything incl. frozen embedding
  std::vector<num::Parameter*> encoder_attention_parameters();  // pretraining subset

  void save(const std::string& path, uint64_t vocab_hash) const;
  static InferenceModel load(const std::string& path, uint64_t expected_vocab_hash);

 private:
  void attention_scores(ForwardCache& cache) const;
  void attention_backward(const ForwardCache& cache, const num::Vec& dscores,
                          num::Tensor2& dH, PromptEncoding* dprompt);
  void encoder_backward(const ForwardCache& cache, num::Tensor2& dH);
  void prompt_backward(const std::vector<int>& ids, const num::Vec& dvec);

  ModelConfig cfg_;
  num::Embedding emb_;
  num::GruParams gru_;
  num::Parameter attn_w_, attn_b_;                       // score = w . h_t + b
  num::Parameter attn_W_, attn_bW_, attn_v_, attn_bv_;   // score = v . tanh(W [h;i;c;o] + bW) + bv
  num::Parameter cls_W1_, cls_b1_, cls_W2_, cls_b2_;
};

// ---------------------------------------------------------------------------
// Feed-forward classifier head (linear hidden layer, 3-way output)
// ---------------------------------------------------------------------------

struct FfCache {
  num::Vec features, hidden_out, logits;
};

class FeedForwardClassifier {
 public:
  FeedForwardClassifier() = default;
  FeedForwardClassifier(int feat_dim, int hidden, Rng& rng);

  FfCache forward(const num::Vec& features) const;
  num::Vec backward(const FfCache& cache, const std::array<double, 3>& dlogits);  // returns dfeatures
  int predict_class(const FfCache& cache) const;

  std::vector<num::Parameter*> parameters();

 private:
  num::Parameter W1_, b1_, W2_, b2_;
};

// ---------------------------------------------------------------------------
// Pipeline sentence tagger
// ---------------------------------------------------------------------------

struct TaggerCache {
  std::vector<int> ids;
  std::vector<num::GruStepCache> steps;
  num::Vec final_state;
  PromptEncoding prompt;
  double logit = 0.0;
  double prob = 0.0;
};

class SentenceTagger {
 public:
  // conditional taggers get [h; i; c; o], unconditional just h
  SentenceTagger(const ModelConfig& cfg, int vocab_size);

  const ModelConfig& config() const { return cfg_; }
  num::Embedding& embedding() { return emb_; }
  const num::Embedding& embedding() const { return emb_; }

  PromptEncoding encode_prompt(const std::vector<int>& i_ids, const std::vector<int>& c_ids,
                               const std::vector<int>& o_ids) const;

  // empty sentences are scored on a single PAD token
  TaggerCache forward(const std::vector<int>& sentence_ids, const PromptEncoding& prompt) const;
  void backward(const TaggerCache& cache, double dlogit);

  // document classifier features for the pipeline: mean of selected
  // sentences' final states
  num::Vec mean_state(const std::vector<TaggerCache>& selected) const;

  std::vector<num::Parameter*> parameters();

  void save(const std::string& path, uint64_t vocab_hash) const;
  static SentenceTagger load(const std::string& path, uint64_t expected_vocab_hash);

 private:
  ModelConfig cfg_;
  num::Embedding emb_;
  num::GruParams gru_;
  num::Parameter out_w_, out_b_;
};

}  // namespace evinf::model
