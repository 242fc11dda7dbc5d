#include "evinf/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace evinf::model {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "vanilla";
    case Variant::Attn: return "attn";
    case Variant::CondAttn: return "cond-attn";
    case Variant::TokenwiseAttn: return "tokenwise-attn";
    case Variant::CondTokenwiseAttn: return "cond-tokenwise-attn";
    case Variant::PipelineNeural: return "pipeline";
    case Variant::CondPipelineNeural: return "cond-pipeline";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  for (Variant v : {Variant::Vanilla, Variant::Attn, Variant::CondAttn, Variant::TokenwiseAttn,
                    Variant::CondTokenwiseAttn, Variant::PipelineNeural,
                    Variant::CondPipelineNeural})
    if (name == variant_name(v)) return v;
  return std::nullopt;
}

bool variant_is_conditional(Variant v) {
  return v == Variant::CondAttn || v == Variant::CondTokenwiseAttn ||
         v == Variant::CondPipelineNeural;
}

bool variant_is_tokenwise(Variant v) {
  return v == Variant::TokenwiseAttn || v == Variant::CondTokenwiseAttn;
}

bool variant_has_attention(Variant v) {
  return v == Variant::Attn || v == Variant::CondAttn || v == Variant::TokenwiseAttn ||
         v == Variant::CondTokenwiseAttn;
}

namespace {

num::Vec column(const num::Tensor2& m, int c) {
  num::Vec out(size_t(m.rows), 0.0);
  for (int r = 0; r < m.rows; ++r) out[size_t(r)] = m.at(r, c);
  return out;
}

void init_uniform(num::Parameter& p, Rng& rng, double k) {
  for (double& w : p.value.v) w = rng.uniform(-k, k);
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

InferenceModel::InferenceModel(const ModelConfig& cfg, int vocab_size) : cfg_(cfg) {
  if (cfg.emb_dim <= 0 || cfg.hidden <= 0 || cfg.cls_hidden <= 0 || cfg.max_tokens < 1)
    throw std::invalid_argument("InferenceModel: bad config dimensions");
  Rng rng(cfg.seed);
  emb_ = num::Embedding(vocab_size, cfg.emb_dim, rng);
  gru_ = num::GruParams(cfg.emb_dim, cfg.hidden);
  gru_.init(rng);

  const int feat_dim = cfg.hidden + 3 * cfg.emb_dim;
  if (variant_has_attention(cfg.variant)) {
    if (variant_is_conditional(cfg.variant)) {
      const int cat_dim = cfg.hidden + 3 * cfg.emb_dim;
      attn_W_ = num::Parameter("attn.W", cfg.attn_hidden, cat_dim);
      attn_bW_ = num::Parameter("attn.bW", 1, cfg.attn_hidden);
      attn_v_ = num::Parameter("attn.v", 1, cfg.attn_hidden);
      attn_bv_ = num::Parameter("attn.bv", 1, 1);
      init_uniform(attn_W_, rng, cfg.attn_init_scale / std::sqrt(double(cat_dim)));
      init_uniform(attn_v_, rng, 1.0 / std::sqrt(double(cfg.attn_hidden)));
    } else {
      attn_w_ = num::Parameter("attn.w", 1, cfg.hidden);
      attn_b_ = num::Parameter("attn.b", 1, 1);
      init_uniform(attn_w_, rng, 1.0 / std::sqrt(double(cfg.hidden)));
    }
  }
  cls_W1_ = num::Parameter("cls.W1", cfg.cls_hidden, feat_dim);
  cls_b1_ = num::Parameter("cls.b1", 1, cfg.cls_hidden);
  cls_W2_ = num::Parameter("cls.W2", 3, cfg.cls_hidden);
  cls_b2_ = num::Parameter("cls.b2", 1, 3);
  init_uniform(cls_W1_, rng, 1.0 / std::sqrt(double(feat_dim)));
  init_uniform(cls_W2_, rng, 1.0 / std::sqrt(double(cfg.cls_hidden)));
}

std::vector<num::Parameter*> InferenceModel::parameters() {
  std::vector<num::Parameter*> out{&emb_.table};
  for (num::Parameter* p : gru_.parameters()) out.push_back(p);
  if (variant_has_attention(cfg_.variant)) {
    if (variant_is_conditional(cfg_.variant)) {
      out.push_back(&attn_W_);
      out.push_back(&attn_bW_);
      out.push_back(&attn_v_);
      out.push_back(&attn_bv_);
    } else {
      out.push_back(&attn_w_);
      out.push_back(&attn_b_);
    }
  }
  out.push_back(&cls_W1_);
  out.push_back(&cls_b1_);
  out.push_back(&cls_W2_);
  out.push_back(&cls_b2_);
  return out;
}

std::vector<num::Parameter*> InferenceModel::encoder_attention_parameters() {
  std::vector<num::Parameter*> out{&emb_.table};
  for (num::Parameter* p : gru_.parameters()) out.push_back(p);
  if (variant_has_attention(cfg_.variant)) {
    if (variant_is_conditional(cfg_.variant)) {
      out.push_back(&attn_W_);
      out.push_back(&attn_bW_);
      out.push_back(&attn_v_);
      out.push_back(&attn_bv_);
    } else {
      out.push_back(&attn_w_);
      out.push_back(&attn_b_);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

PromptEncoding InferenceModel::encode_prompt(const std::vector<int>& i_ids,
                                             const std::vector<int>& c_ids,
                                             const std::vector<int>& o_ids) const {
  auto mean_of = [&](const std::vector<int>& ids) {
    num::Vec out(size_t(cfg_.emb_dim), 0.0);
    int n = 0;
    for (int id : ids) {
      if (id <= prep::Vocabulary::kOovId) continue;  // OOV carries no content
      const auto row = emb_.row(id);
      for (int d = 0; d < cfg_.emb_dim; ++d) out[size_t(d)] += row[size_t(d)];
      ++n;
    }
    if (n > 0)
      for (double& x : out) x /= double(n);
    return out;
  };
  return {mean_of(i_ids), mean_of(c_ids), mean_of(o_ids)};
}

ArticleEncoding InferenceModel::encode_article(const std::vector<int>& ids) const {
  if (ids.empty()) throw std::invalid_argument("encode_article: empty article");
  ArticleEncoding enc;
  enc.H = num::Tensor2(cfg_.hidden, int(ids.size()));
  num::Vec h(size_t(cfg_.hidden), 0.0);
  for (size_t t = 0; t < ids.size(); ++t) {
    h = num::gru_step(emb_.row(ids[t]), h, gru_);
    for (int r = 0; r < cfg_.hidden; ++r) enc.H.at(r, int(t)) = h[size_t(r)];
  }
  enc.summary = h;
  return enc;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

void InferenceModel::attention_scores(ForwardCache& cache) const {
  const int T = cache.H.cols;
  cache.scores.assign(size_t(T), 0.0);
  if (variant_is_conditional(cfg_.variant)) {
    const int cat_dim = cfg_.hidden + 3 * cfg_.emb_dim;
    cache.attn_tanh = num::Tensor2(cfg_.attn_hidden, T);
    num::Vec cat(size_t(cat_dim), 0.0);
    num::Vec act(size_t(cfg_.attn_hidden), 0.0);
    for (int t = 0; t < T; ++t) {
      for (int r = 0; r < cfg_.hidden; ++r) cat[size_t(r)] = cache.H.at(r, t);
      std::copy(cache.prompt.i.begin(), cache.prompt.i.end(), cat.begin() + cfg_.hidden);
      std::copy(cache.prompt.c.begin(), cache.prompt.c.end(),
                cat.begin() + cfg_.hidden + cfg_.emb_dim);
      std::copy(cache.prompt.o.begin(), cache.prompt.o.end(),
                cat.begin() + cfg_.hidden + 2 * cfg_.emb_dim);
      num::matvec(attn_W_.value, cat, act);
      double s = attn_bv_.value.v[0];
      for (int r = 0; r < cfg_.attn_hidden; ++r) {
        const double u = std::tanh(act[size_t(r)] + attn_bW_.value.v[size_t(r)]);
        cache.attn_tanh.at(r, t) = u;
        s += attn_v_.value.v[size_t(r)] * u;
      }
      cache.scores[size_t(t)] = s;
    }
  } else {
    for (int t = 0; t < T; ++t) {
      double s = attn_b_.value.v[0];
      for (int r = 0; r < cfg_.hidden; ++r) s += attn_w_.value.v[size_t(r)] * cache.H.at(r, t);
      cache.scores[size_t(t)] = s;
    }
  }
}

namespace {

AttentionWeights normalize_scores(const num::Vec& scores, bool tokenwise) {
  AttentionWeights w;
  if (tokenwise) {
    w.mode = AttentionMode::PerTokenSigmoid;
    w.values.resize(scores.size());
    double sum = 0.0;
    for (size_t t = 0; t < scores.size(); ++t) {
      w.values[t] = num::sigmoid(scores[t]);
      sum += w.values[t];
    }
    w.normalized.resize(scores.size());
    for (size_t t = 0; t < scores.size(); ++t) w.normalized[t] = w.values[t] / sum;
  } else {
    w.mode = AttentionMode::SoftmaxNormalized;
    w.values = num::softmax(scores);
    w.normalized = w.values;
  }
  return w;
}

}  // namespace

AttentionWeights InferenceModel::attend(const num::Tensor2& H) const {
  ForwardCache tmp;
  tmp.H = H;
  tmp.prompt = {num::Vec(size_t(cfg_.emb_dim), 0.0), num::Vec(size_t(cfg_.emb_dim), 0.0),
                num::Vec(size_t(cfg_.emb_dim), 0.0)};
  attention_scores(tmp);
  return normalize_scores(tmp.scores, variant_is_tokenwise(cfg_.variant));
}

AttentionWeights InferenceModel::attend_conditional(const num::Tensor2& H,
                                                    const PromptEncoding& p) const {
  ForwardCache tmp;
  tmp.H = H;
  tmp.prompt = p;
  attention_scores(tmp);
  return normalize_scores(tmp.scores, variant_is_tokenwise(cfg_.variant));
}

num::Vec InferenceModel::context_vector(const num::Tensor2& H, const num::Vec& alpha) {
  if (int(alpha.size()) != H.cols)
    throw std::invalid_argument("context_vector: weight/column mismatch");
  num::Vec out(size_t(H.rows), 0.0);
  for (int t = 0; t < H.cols; ++t)
    for (int r = 0; r < H.rows; ++r) out[size_t(r)] += H.at(r, t) * alpha[size_t(t)];
  return out;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

ForwardCache InferenceModel::forward(const std::vector<int>& article_ids,
                                     const std::vector<int>& i_ids, const std::vector<int>& c_ids,
                                     const std::vector<int>& o_ids,
                                     const ForwardOptions& opts) const {
  ForwardCache cache;
  cache.article_ids.assign(article_ids.begin(),
                           article_ids.begin() +
                               std::min(article_ids.size(), size_t(cfg_.max_tokens)));
  if (cache.article_ids.empty()) throw std::invalid_argument("forward: empty article");
  cache.i_ids = i_ids;
  cache.c_ids = c_ids;
  cache.o_ids = o_ids;
  cache.ablate_prompt = opts.ablate_prompt;
  cache.ablate_article = opts.ablate_article;

  if (opts.ablate_prompt) {
    const num::Vec zero(size_t(cfg_.emb_dim), 0.0);
    cache.prompt = {zero, zero, zero};
  } else {
    cache.prompt = encode_prompt(i_ids, c_ids, o_ids);
  }

  const int T = int(cache.article_ids.size());
  cache.H = num::Tensor2(cfg_.hidden, T);
  cache.steps.resize(size_t(T));
  num::Vec h(size_t(cfg_.hidden), 0.0);
  for (int t = 0; t < T; ++t) {
    h = num::gru_step(emb_.row(cache.article_ids[size_t(t)]), h, gru_, &cache.steps[size_t(t)]);
    for (int r = 0; r < cfg_.hidden; ++r) cache.H.at(r, t) = h[size_t(r)];
  }

  num::Vec article_part;
  if (variant_has_attention(cfg_.variant)) {
    attention_scores(cache);
    cache.attn = normalize_scores(cache.scores, variant_is_tokenwise(cfg_.variant));
    cache.context = context_vector(cache.H, cache.attn.normalized);
    article_part = cache.context;
  } else {
    article_part = h;
  }
  if (opts.ablate_article) article_part.assign(article_part.size(), 0.0);

  cache.features.clear();
  cache.features.reserve(size_t(cfg_.hidden + 3 * cfg_.emb_dim));
  cache.features.insert(cache.features.end(), article_part.begin(), article_part.end());
  cache.features.insert(cache.features.end(), cache.prompt.i.begin(), cache.prompt.i.end());
  cache.features.insert(cache.features.end(), cache.prompt.c.begin(), cache.prompt.c.end());
  cache.features.insert(cache.features.end(), cache.prompt.o.begin(), cache.prompt.o.end());

  cache.hidden_out.assign(size_t(cfg_.cls_hidden), 0.0);
  num::matvec(cls_W1_.value, cache.features, cache.hidden_out);
  for (int r = 0; r < cfg_.cls_hidden; ++r) cache.hidden_out[size_t(r)] += cls_b1_.value.v[size_t(r)];

  cache.logits.assign(3, 0.0);
  num::matvec(cls_W2_.value, cache.hidden_out, cache.logits);
  for (int r = 0; r < 3; ++r) cache.logits[size_t(r)] += cls_b2_.value.v[size_t(r)];
  return cache;
}

int InferenceModel::predict_class(const ForwardCache& cache) const {
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (cache.logits[size_t(c)] > cache.logits[size_t(best)]) best = c;
  return best;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void InferenceModel::prompt_backward(const std::vector<int>& ids, const num::Vec& dvec) {
  if (!emb_.table.trainable) return;
  int n = 0;
  for (int id : ids)
    if (id > prep::Vocabulary::kOovId) ++n;
  if (n == 0) return;
  const double scale = 1.0 / double(n);
  for (int id : ids) {
    if (id <= prep::Vocabulary::kOovId) continue;
    for (int d = 0; d < cfg_.emb_dim; ++d) emb_.table.grad.at(id, d) += dvec[size_t(d)] * scale;
  }
}

void InferenceModel::encoder_backward(const ForwardCache& cache, num::Tensor2& dH) {
  const int T = dH.cols;
  num::Vec carry(size_t(cfg_.hidden), 0.0);
  for (int t = T - 1; t >= 0; --t) {
    num::Vec dh(size_t(cfg_.hidden), 0.0);
    for (int r = 0; r < cfg_.hidden; ++r) dh[size_t(r)] = dH.at(r, t) + carry[size_t(r)];
    auto grads = num::gru_step_backward(cache.steps[size_t(t)], dh, gru_);
    carry = std::move(grads.dh_prev);
    if (emb_.table.trainable) {
      const int id = cache.article_ids[size_t(t)];
      for (int d = 0; d < cfg_.emb_dim; ++d) emb_.table.grad.at(id, d) += grads.dx[size_t(d)];
    }
  }
}

void InferenceModel::attention_backward(const ForwardCache& cache, const num::Vec& dscores,
                                        num::Tensor2& dH, PromptEncoding* dprompt) {
  const int T = dH.cols;
  if (variant_is_conditional(cfg_.variant)) {
    const int cat_dim = cfg_.hidden + 3 * cfg_.emb_dim;
    num::Vec cat(size_t(cat_dim), 0.0), da(size_t(cfg_.attn_hidden), 0.0), dcat(size_t(cat_dim), 0.0);
    for (int t = 0; t < T; ++t) {
      const double ds = dscores[size_t(t)];
      if (ds == 0.0) continue;
      for (int r = 0; r < cfg_.hidden; ++r) cat[size_t(r)] = cache.H.at(r, t);
      std::copy(cache.prompt.i.begin(), cache.prompt.i.end(), cat.begin() + cfg_.hidden);
      std::copy(cache.prompt.c.begin(), cache.prompt.c.end(),
                cat.begin() + cfg_.hidden + cfg_.emb_dim);
      std::copy(cache.prompt.o.begin(), cache.prompt.o.end(),
                cat.begin() + cfg_.hidden + 2 * cfg_.emb_dim);
      attn_bv_.grad.v[0] += ds;
      for (int r = 0; r < cfg_.attn_hidden; ++r) {
        const double u = cache.attn_tanh.at(r, t);
        attn_v_.grad.v[size_t(r)] += ds * u;
        da[size_t(r)] = ds * attn_v_.value.v[size_t(r)] * (1.0 - u * u);
        attn_bW_.grad.v[size_t(r)] += da[size_t(r)];
      }
      num::outer_add(attn_W_.grad, da, cat);
      std::fill(dcat.begin(), dcat.end(), 0.0);
      num::matvec_t_add(attn_W_.value, da, dcat);
      for (int r = 0; r < cfg_.hidden; ++r) dH.at(r, t) += dcat[size_t(r)];
      if (dprompt) {
        for (int d = 0; d < cfg_.emb_dim; ++d) {
          dprompt->i[size_t(d)] += dcat[size_t(cfg_.hidden + d)];
          dprompt->c[size_t(d)] += dcat[size_t(cfg_.hidden + cfg_.emb_dim + d)];
          dprompt->o[size_t(d)] += dcat[size_t(cfg_.hidden + 2 * cfg_.emb_dim + d)];
        }
      }
    }
  } else {
    for (int t = 0; t < T; ++t) {
      const double ds = dscores[size_t(t)];
      if (ds == 0.0) continue;
      attn_b_.grad.v[0] += ds;
      for (int r = 0; r < cfg_.hidden; ++r) {
        attn_w_.grad.v[size_t(r)] += ds * cache.H.at(r, t);
        dH.at(r, t) += ds * attn_w_.value.v[size_t(r)];
      }
    }
  }
}

namespace {

// gradient through the normalization used for the context vector
num::Vec normalization_backward(const AttentionWeights& attn, const num::Vec& dnormalized) {
  if (attn.mode == AttentionMode::SoftmaxNormalized)
    return num::softmax_backward(attn.normalized, dnormalized);
  double sum = 0.0;
  for (double s : attn.values) sum += s;
  double inner = 0.0;
  for (size_t t = 0; t < dnormalized.size(); ++t) inner += dnormalized[t] * attn.normalized[t];
  num::Vec ds(dnormalized.size());
  for (size_t t = 0; t < ds.size(); ++t) {
    const double dsigma = (dnormalized[t] - inner) / sum;
    ds[t] = dsigma * attn.values[t] * (1.0 - attn.values[t]);
  }
  return ds;
}

}  // namespace

void InferenceModel::backward(const ForwardCache& cache, const std::array<double, 3>& dlogits) {
  if (cache.ablate_prompt || cache.ablate_article)
    throw std::invalid_argument("backward: ablated caches are evaluation-only");

  // output layer
  num::Vec dlog(dlogits.begin(), dlogits.end());
  num::outer_add(cls_W2_.grad, dlog, cache.hidden_out);
  num::add_to(std::span<double>(cls_b2_.grad.v), dlog);
  num::Vec du(size_t(cfg_.cls_hidden), 0.0);
  num::matvec_t_add(cls_W2_.value, dlog, du);

  // hidden layer (linear)
  num::outer_add(cls_W1_.grad, du, cache.features);
  num::add_to(std::span<double>(cls_b1_.grad.v), du);
  num::Vec df(cache.features.size(), 0.0);
  num::matvec_t_add(cls_W1_.value, du, df);

  num::Vec d_article(df.begin(), df.begin() + cfg_.hidden);
  PromptEncoding dprompt{num::Vec(size_t(cfg_.emb_dim), 0.0),
                         num::Vec(size_t(cfg_.emb_dim), 0.0),
                         num::Vec(size_t(cfg_.emb_dim), 0.0)};
  for (int d = 0; d < cfg_.emb_dim; ++d) {
    dprompt.i[size_t(d)] = df[size_t(cfg_.hidden + d)];
    dprompt.c[size_t(d)] = df[size_t(cfg_.hidden + cfg_.emb_dim + d)];
    dprompt.o[size_t(d)] = df[size_t(cfg_.hidden + 2 * cfg_.emb_dim + d)];
  }

  num::Tensor2 dH(cfg_.hidden, cache.H.cols);
  if (variant_has_attention(cfg_.variant)) {
    // context = H * normalized
    num::Vec dnorm(size_t(cache.H.cols), 0.0);
    for (int t = 0; t < cache.H.cols; ++t) {
      double s = 0.0;
      for (int r = 0; r < cfg_.hidden; ++r) {
        s += cache.H.at(r, t) * d_article[size_t(r)];
        dH.at(r, t) += d_article[size_t(r)] * cache.attn.normalized[size_t(t)];
      }
      dnorm[size_t(t)] = s;
    }
    const num::Vec dscores = normalization_backward(cache.attn, dnorm);
    attention_backward(cache, dscores, dH, &dprompt);
  } else {
    for (int r = 0; r < cfg_.hidden; ++r) dH.at(r, cache.H.cols - 1) += d_article[size_t(r)];
  }

  encoder_backward(cache, dH);
  prompt_backward(cache.i_ids, dprompt.i);
  prompt_backward(cache.c_ids, dprompt.c);
  prompt_backward(cache.o_ids, dprompt.o);
}

void InferenceModel::backward_from_scores(const ForwardCache& cache, const num::Vec& dscores) {
  num::Tensor2 dH(cfg_.hidden, cache.H.cols);
  PromptEncoding dprompt{num::Vec(size_t(cfg_.emb_dim), 0.0),
                         num::Vec(size_t(cfg_.emb_dim), 0.0),
                         num::Vec(size_t(cfg_.emb_dim), 0.0)};
  attention_backward(cache, dscores, dH, &dprompt);
  encoder_backward(cache, dH);
  prompt_backward(cache.i_ids, dprompt.i);
  prompt_backward(cache.c_ids, dprompt.c);
  prompt_backward(cache.o_ids, dprompt.o);
}

void InferenceModel::backward_from_normalized(const ForwardCache& cache,
                                              const num::Vec& dnormalized) {
  backward_from_scores(cache, normalization_backward(cache.attn, dnormalized));
}

// ---------------------------------------------------------------------------
// Checkpoints: header + flat parameter arrays
// ---------------------------------------------------------------------------

namespace {

constexpr char kModelMagic[8] = {'E', 'V', 'N', 'F', '0', '0', '0', '1'};
constexpr char kTaggerMagic[8] = {'E', 'V', 'T', 'G', '0', '0', '0', '1'};

struct CheckpointHeader {
  int32_t variant = 0;
  int32_t emb_dim = 0, hidden = 0, attn_hidden = 0, cls_hidden = 0, max_tokens = 0;
  int64_t vocab_size = 0;
  uint64_t seed = 0;
  uint64_t vocab_hash = 0;
  int64_t n_params = 0;
};

void write_params(std::ofstream& out, const std::vector<num::Parameter*>& params) {
  for (const num::Parameter* p : params) {
    const int64_t dims[2] = {p->value.rows, p->value.cols};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(p->value.v.data()),
              std::streamsize(p->value.size() * 8));
  }
}

void read_params(std::ifstream& in, const std::vector<num::Parameter*>& params,
                 const std::string& path) {
  for (num::Parameter* p : params) {
    int64_t dims[2];
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in || dims[0] != p->value.rows || dims[1] != p->value.cols)
      throw DataError("checkpoint shape mismatch for " + p->name + " in " + path);
    in.read(reinterpret_cast<char*>(p->value.v.data()), std::streamsize(p->value.size() * 8));
    if (!in) throw DataError("truncated checkpoint: " + path);
  }
}

void save_checkpoint(const std::string& path, const char* magic, const ModelConfig& cfg,
                     int vocab_size, uint64_t vocab_hash,
                     const std::vector<num::Parameter*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(magic, 8);
  CheckpointHeader h;
  h.variant = int32_t(cfg.variant);
  h.emb_dim = cfg.emb_dim;
  h.hidden = cfg.hidden;
  h.attn_hidden = cfg.attn_hidden;
  h.cls_hidden = cfg.cls_hidden;
  h.max_tokens = cfg.max_tokens;
  h.vocab_size = vocab_size;
  h.seed = cfg.seed;
  h.vocab_hash = vocab_hash;
  h.n_params = int64_t(params.size());
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  write_params(out, params);
}

ModelConfig load_header(std::ifstream& in, const char* magic, const std::string& path,
                        uint64_t expected_vocab_hash, int64_t& vocab_size, int64_t& n_params) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0) throw DataError("not a checkpoint file: " + path);
  CheckpointHeader h;
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!in) throw DataError("truncated checkpoint header: " + path);
  if (expected_vocab_hash != 0 && h.vocab_hash != 0 && h.vocab_hash != expected_vocab_hash)
    throw DataError("checkpoint vocab hash mismatch: " + path);
  ModelConfig cfg;
  cfg.variant = Variant(h.variant);
  cfg.emb_dim = h.emb_dim;
  cfg.hidden = h.hidden;
  cfg.attn_hidden = h.attn_hidden;
  cfg.cls_hidden = h.cls_hidden;
  cfg.max_tokens = h.max_tokens;
  cfg.seed = h.seed;
  vocab_size = h.vocab_size;
  n_params = h.n_params;
  return cfg;
}

}  // namespace

void InferenceModel::save(const std::string& path, uint64_t vocab_hash) const {
  auto* self = const_cast<InferenceModel*>(this);
  save_checkpoint(path, kModelMagic, cfg_, vocab_size(), vocab_hash, self->parameters());
}

InferenceModel InferenceModel::load(const std::string& path, uint64_t expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  int64_t vocab_size = 0, n_params = 0;
  const ModelConfig cfg = load_header(in, kModelMagic, path, expected_vocab_hash, vocab_size,
                                      n_params);
  InferenceModel m(cfg, int(vocab_size));
  auto params = m.parameters();
  if (n_params != int64_t(params.size()))
    throw DataError("checkpoint parameter count mismatch: " + path);
  read_params(in, params, path);
  return m;
}

// ---------------------------------------------------------------------------
// Feed-forward classifier head
// ---------------------------------------------------------------------------

FeedForwardClassifier::FeedForwardClassifier(int feat_dim, int hidden, Rng& rng)
    : W1_("ff.W1", hidden, feat_dim),
      b1_("ff.b1", 1, hidden),
      W2_("ff.W2", 3, hidden),
      b2_("ff.b2", 1, 3) {
  init_uniform(W1_, rng, 1.0 / std::sqrt(double(feat_dim)));
  init_uniform(W2_, rng, 1.0 / std::sqrt(double(hidden)));
}

FfCache FeedForwardClassifier::forward(const num::Vec& features) const {
  FfCache cache;
  cache.features = features;
  cache.hidden_out.assign(size_t(W1_.value.rows), 0.0);
  num::matvec(W1_.value, features, cache.hidden_out);
  for (int r = 0; r < W1_.value.rows; ++r) cache.hidden_out[size_t(r)] += b1_.value.v[size_t(r)];
  cache.logits.assign(3, 0.0);
  num::matvec(W2_.value, cache.hidden_out, cache.logits);
  for (int r = 0; r < 3; ++r) cache.logits[size_t(r)] += b2_.value.v[size_t(r)];
  return cache;
}

num::Vec FeedForwardClassifier::backward(const FfCache& cache,
                                         const std::array<double, 3>& dlogits) {
  num::Vec dlog(dlogits.begin(), dlogits.end());
  num::outer_add(W2_.grad, dlog, cache.hidden_out);
  num::add_to(std::span<double>(b2_.grad.v), dlog);
  num::Vec du(size_t(W1_.value.rows), 0.0);
  num::matvec_t_add(W2_.value, dlog, du);
  num::outer_add(W1_.grad, du, cache.features);
  num::add_to(std::span<double>(b1_.grad.v), du);
  num::Vec df(cache.features.size(), 0.0);
  num::matvec_t_add(W1_.value, du, df);
  return df;
}

int FeedForwardClassifier::predict_class(const FfCache& cache) const {
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (cache.logits[size_t(c)] > cache.logits[size_t(best)]) best = c;
  return best;
}

std::vector<num::Parameter*> FeedForwardClassifier::parameters() {
  return {&W1_, &b1_, &W2_, &b2_};
}

// ---------------------------------------------------------------------------
// Sentence tagger
// ---------------------------------------------------------------------------

SentenceTagger::SentenceTagger(const ModelConfig& cfg, int vocab_size) : cfg_(cfg) {
  if (cfg.variant != Variant::PipelineNeural && cfg.variant != Variant::CondPipelineNeural)
    throw std::invalid_argument("SentenceTagger: not a pipeline variant");
  Rng rng(cfg.seed);
  emb_ = num::Embedding(vocab_size, cfg.emb_dim, rng);
  gru_ = num::GruParams(cfg.emb_dim, cfg.hidden);
  gru_.init(rng);
  const int feat = cfg.hidden + (variant_is_conditional(cfg.variant) ? 3 * cfg.emb_dim : 0);
  out_w_ = num::Parameter("tagger.w", 1, feat);
  out_b_ = num::Parameter("tagger.b", 1, 1);
  init_uniform(out_w_, rng, 1.0 / std::sqrt(double(feat)));
}

std::vector<num::Parameter*> SentenceTagger::parameters() {
  std::vector<num::Parameter*> out{&emb_.table};
  for (num::Parameter* p : gru_.parameters()) out.push_back(p);
  out.push_back(&out_w_);
  out.push_back(&out_b_);
  return out;
}

PromptEncoding SentenceTagger::encode_prompt(const std::vector<int>& i_ids,
                                             const std::vector<int>& c_ids,
                                             const std::vector<int>& o_ids) const {
  auto mean_of = [&](const std::vector<int>& ids) {
    num::Vec out(size_t(cfg_.emb_dim), 0.0);
    int n = 0;
    for (int id : ids) {
      if (id <= prep::Vocabulary::kOovId) continue;
      const auto row = emb_.row(id);
      for (int d = 0; d < cfg_.emb_dim; ++d) out[size_t(d)] += row[size_t(d)];
      ++n;
    }
    if (n > 0)
      for (double& x : out) x /= double(n);
    return out;
  };
  return {mean_of(i_ids), mean_of(c_ids), mean_of(o_ids)};
}

TaggerCache SentenceTagger::forward(const std::vector<int>& sentence_ids,
                                    const PromptEncoding& prompt) const {
  TaggerCache cache;
  cache.ids = sentence_ids.empty() ? std::vector<int>{prep::Vocabulary::kPadId} : sentence_ids;
  cache.prompt = prompt;
  cache.steps.resize(cache.ids.size());
  num::Vec h(size_t(cfg_.hidden), 0.0);
  for (size_t t = 0; t < cache.ids.size(); ++t)
    h = num::gru_step(emb_.row(cache.ids[t]), h, gru_, &cache.steps[t]);
  cache.final_state = h;

  double s = out_b_.value.v[0];
  for (int r = 0; r < cfg_.hidden; ++r) s += out_w_.value.v[size_t(r)] * h[size_t(r)];
  if (variant_is_conditional(cfg_.variant)) {
    const int e = cfg_.emb_dim;
    for (int d = 0; d < e; ++d) {
      s += out_w_.value.v[size_t(cfg_.hidden + d)] * prompt.i[size_t(d)];
      s += out_w_.value.v[size_t(cfg_.hidden + e + d)] * prompt.c[size_t(d)];
      s += out_w_.value.v[size_t(cfg_.hidden + 2 * e + d)] * prompt.o[size_t(d)];
    }
  }
  cache.logit = s;
  cache.prob = num::sigmoid(s);
  return cache;
}

void SentenceTagger::backward(const TaggerCache& cache, double dlogit) {
  out_b_.grad.v[0] += dlogit;
  num::Vec dh(size_t(cfg_.hidden), 0.0);
  for (int r = 0; r < cfg_.hidden; ++r) {
    out_w_.grad.v[size_t(r)] += dlogit * cache.final_state[size_t(r)];
    dh[size_t(r)] = dlogit * out_w_.value.v[size_t(r)];
  }
  if (variant_is_conditional(cfg_.variant)) {
    const int e = cfg_.emb_dim;
    for (int d = 0; d < e; ++d) {
      out_w_.grad.v[size_t(cfg_.hidden + d)] += dlogit * cache.prompt.i[size_t(d)];
      out_w_.grad.v[size_t(cfg_.hidden + e + d)] += dlogit * cache.prompt.c[size_t(d)];
      out_w_.grad.v[size_t(cfg_.hidden + 2 * e + d)] += dlogit * cache.prompt.o[size_t(d)];
    }
  }
  for (int t = int(cache.ids.size()) - 1; t >= 0; --t) {
    auto grads = num::gru_step_backward(cache.steps[size_t(t)], dh, gru_);
    dh = std::move(grads.dh_prev);
    if (emb_.table.trainable) {
      const int id = cache.ids[size_t(t)];
      for (int d = 0; d < cfg_.emb_dim; ++d) emb_.table.grad.at(id, d) += grads.dx[size_t(d)];
    }
  }
}

num::Vec SentenceTagger::mean_state(const std::vector<TaggerCache>& selected) const {
  num::Vec out(size_t(cfg_.hidden), 0.0);
  if (selected.empty()) return out;
  for (const auto& c : selected)
    for (int r = 0; r < cfg_.hidden; ++r) out[size_t(r)] += c.final_state[size_t(r)];
  for (double& x : out) x /= double(selected.size());
  return out;
}

void SentenceTagger::save(const std::string& path, uint64_t vocab_hash) const {
  auto* self = const_cast<SentenceTagger*>(this);
  save_checkpoint(path, kTaggerMagic, cfg_, emb_.vocab_size(), vocab_hash, self->parameters());
}

SentenceTagger SentenceTagger::load(const std::string& path, uint64_t expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  int64_t vocab_size = 0, n_params = 0;
  const ModelConfig cfg = load_header(in, kTaggerMagic, path, expected_vocab_hash, vocab_size,
                                      n_params);
  SentenceTagger m(cfg, int(vocab_size));
  auto params = m.parameters();
  if (n_params != int64_t(params.size()))
    throw DataError("checkpoint parameter count mismatch: " + path);
  read_params(in, params, path);
  return m;
}

}  // namespace evinf::model
