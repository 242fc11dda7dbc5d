#include "evinf/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace evinf::train {

const char* objective_name(PretrainObjective o) {
  switch (o) {
    case PretrainObjective::TokenwiseBCE: return "tokenwise";
    case PretrainObjective::BalancedTokenwiseBCE: return "balanced";
    case PretrainObjective::EvidenceMass: return "mass";
  }
  return "?";
}

const char* criterion_name(SelectionCriterion c) {
  switch (c) {
    case SelectionCriterion::TokenAUC: return "auc";
    case SelectionCriterion::Entropy: return "entropy";
    case SelectionCriterion::EvidenceMass: return "mass";
  }
  return "?";
}

std::optional<PretrainObjective> objective_from_name(const std::string& s) {
  if (s == "tokenwise") return PretrainObjective::TokenwiseBCE;
  if (s == "balanced") return PretrainObjective::BalancedTokenwiseBCE;
  if (s == "mass") return PretrainObjective::EvidenceMass;
  return std::nullopt;
}

std::optional<SelectionCriterion> criterion_from_name(const std::string& s) {
  if (s == "auc") return SelectionCriterion::TokenAUC;
  if (s == "entropy") return SelectionCriterion::Entropy;
  if (s == "mass") return SelectionCriterion::EvidenceMass;
  return std::nullopt;
}

std::optional<TargetMode> target_mode_from_name(const std::string& s) {
  if (s == "binary") return TargetMode::BinaryOnes;
  if (s == "uniform") return TargetMode::UniformOverEvidence;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (patience > max_epochs || patience < 1)
    throw std::invalid_argument("TrainConfig: need 1 <= patience <= max_epochs");
  if (batch_size < 1 || pretrain_batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch sizes must be >= 1");
  if (nested_dev_fraction < 0.0 || nested_dev_fraction >= 1.0)
    throw std::invalid_argument("TrainConfig: nested dev fraction must lie in [0, 1)");
}

EvidenceTarget make_targets(const std::vector<bool>& mask, TargetMode mode) {
  EvidenceTarget t;
  t.targets.assign(mask.size(), 0.0);
  long n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  if (n == 0) {
    t.degenerate = true;
    return t;
  }
  const double v = mode == TargetMode::UniformOverEvidence ? 1.0 / double(n) : 1.0;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) t.targets[i] = v;
  return t;
}

// ---------------------------------------------------------------------------
// Dataset encoding
// ---------------------------------------------------------------------------

EncodedData encode_dataset(const corpus::Dataset& ds, const prep::Vocabulary& vocab,
                           const model::ModelConfig& mcfg, const TrainConfig& tcfg) {
  EncodedData data;
  const auto train_prompts = ds.prompts_in(corpus::Split::Train);

  // nested 90/10 split by article, seeded
  std::vector<std::string> article_order;
  std::set<std::string> seen;
  for (const auto* p : train_prompts)
    if (seen.insert(p->article_id).second) article_order.push_back(p->article_id);
  Rng rng(tcfg.seed ^ 0x5eed5011ull);
  rng.shuffle(article_order);
  const size_t n_dev = size_t(std::floor(double(article_order.size()) * tcfg.nested_dev_fraction));
  std::set<std::string> dev_articles(article_order.begin(), article_order.begin() + n_dev);

  for (const auto* p : train_prompts) {
    const auto gold = ds.gold_label(p->prompt_id);
    const auto* doc = ds.find_article(p->article_id);
    if (!gold || !doc || doc->tokens.empty()) continue;

    EncodedExample ex;
    ex.prompt_id = p->prompt_id;
    ex.cls = corpus::label_index(*gold);
    ex.article = eval::token_ids(*doc, vocab);
    if (int(ex.article.size()) > mcfg.max_tokens) ex.article.resize(size_t(mcfg.max_tokens));
    ex.i_ids = eval::text_token_ids(p->intervention, vocab);
    ex.c_ids = eval::text_token_ids(p->comparator, vocab);
    ex.o_ids = eval::text_token_ids(p->outcome, vocab);

    if (const auto ev = ds.gold_evidence(p->prompt_id)) {
      ex.mask.assign(ev->token_mask.begin(), ev->token_mask.begin() + ex.article.size());
      for (size_t t = ex.article.size(); t < ev->token_mask.size(); ++t)
        data.truncated_evidence_tokens += ev->token_mask[t] ? 1 : 0;
      ex.has_evidence = std::any_of(ex.mask.begin(), ex.mask.end(), [](bool b) { return b; });
    }

    (dev_articles.count(p->article_id) ? data.nested_dev : data.train).push_back(std::move(ex));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace {

std::vector<num::Tensor2> snapshot(const std::vector<num::Parameter*>& params) {
  std::vector<num::Tensor2> out;
  out.reserve(params.size());
  for (const num::Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<num::Parameter*>& params, const std::vector<num::Tensor2>& snap) {
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

double dev_macro_f1(model::InferenceModel& m, const std::vector<EncodedExample>& dev) {
  eval::ConfusionMatrix cm;
  for (const auto& ex : dev) {
    const auto cache = m.forward(ex.article, ex.i_ids, ex.c_ids, ex.o_ids);
    cm.add(corpus::label_from_index(ex.cls), corpus::label_from_index(m.predict_class(cache)));
  }
  return eval::macro_prf(cm).macro_f1;
}

struct DevAttention {
  std::vector<num::Vec> alphas;
  std::vector<std::vector<bool>> masks;
};

DevAttention dev_attention(model::InferenceModel& m, const std::vector<EncodedExample>& dev) {
  DevAttention out;
  if (!model::variant_has_attention(m.config().variant)) return out;
  for (const auto& ex : dev) {
    if (!ex.has_evidence) continue;
    const auto cache = m.forward(ex.article, ex.i_ids, ex.c_ids, ex.o_ids);
    out.alphas.push_back(cache.attn.normalized);
    out.masks.push_back(ex.mask);
  }
  return out;
}

}  // namespace

double selection_criterion(const std::vector<num::Vec>& alphas,
                           const std::vector<std::vector<bool>>& masks, SelectionCriterion kind) {
  if (alphas.size() != masks.size())
    throw std::invalid_argument("selection_criterion: alpha/mask count mismatch");
  double sum = 0.0;
  long n = 0;
  for (size_t i = 0; i < alphas.size(); ++i) {
    switch (kind) {
      case SelectionCriterion::TokenAUC: {
        if (auto auc = eval::token_auc(alphas[i], masks[i])) {
          sum += *auc;
          ++n;
        }
        break;
      }
      case SelectionCriterion::Entropy: {
        double h = 0.0;
        for (double a : alphas[i])
          if (a > 0.0) h -= a * std::log(a);
        sum += h;
        ++n;
        break;
      }
      case SelectionCriterion::EvidenceMass: {
        sum += eval::evidence_mass(alphas[i], masks[i]);
        ++n;
        break;
      }
    }
  }
  return n > 0 ? sum / double(n) : 0.0;
}

std::vector<bool> balanced_token_sample(const std::vector<bool>& mask, Rng& rng) {
  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < mask.size(); ++i) (mask[i] ? pos : neg).push_back(i);
  const size_t k = std::min(pos.size(), neg.size());
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<bool> keep(mask.size(), false);
  for (size_t i = 0; i < k; ++i) {
    keep[pos[i]] = true;
    keep[neg[i]] = true;
  }
  return keep;
}

// ---------------------------------------------------------------------------
// End-task training
// ---------------------------------------------------------------------------

RunSummary train(model::InferenceModel& model, const EncodedData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("train: no training examples");
  const auto& dev = data.nested_dev.empty() ? data.train : data.nested_dev;

  auto params = model.parameters();
  num::Adam adam(params, cfg.adam);
  Rng rng(cfg.seed ^ 0x7e57a12ull);

  RunSummary summary;
  std::vector<num::Tensor2> best = snapshot(params);
  double best_f1 = -1.0;
  int best_epoch = 0, since_best = 0;

  std::vector<size_t> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    size_t b = 0;
    while (b < order.size()) {
      const size_t bend = std::min(order.size(), b + size_t(cfg.batch_size));
      for (size_t k = b; k < bend; ++k) {
        const auto& ex = data.train[order[k]];
        const auto cache = model.forward(ex.article, ex.i_ids, ex.c_ids, ex.o_ids);
        const double loss = num::cross_entropy(cache.logits, ex.cls);
        if (!std::isfinite(loss))
          throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                               ", prompt " + std::to_string(ex.prompt_id));
        loss_sum += loss;
        const auto dlogits = num::cross_entropy_backward(cache.logits, ex.cls);
        model.backward(cache, {dlogits[0], dlogits[1], dlogits[2]});
      }
      adam.step(1.0 / double(bend - b));
      b = bend;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / double(data.train.size());
    log.dev_value = dev_macro_f1(model, dev);
    const auto attn = dev_attention(model, dev);
    if (!attn.alphas.empty())
      log.dev_token_auc = selection_criterion(attn.alphas, attn.masks, SelectionCriterion::TokenAUC);

    if (log.dev_value > best_f1) {
      best_f1 = log.dev_value;
      best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
      log.is_best = true;
    } else {
      ++since_best;
    }
    summary.epochs.push_back(log);
    if (since_best >= cfg.patience) break;
  }

  restore(params, best);
  summary.best_epoch = best_epoch;
  summary.best_dev_value = best_f1;
  return summary;
}

// ---------------------------------------------------------------------------
// Attention pretraining
// ---------------------------------------------------------------------------

PretrainSummary pretrain_attention(model::InferenceModel& model, const EncodedData& data,
                                   const TrainConfig& cfg) {
  cfg.validate();
  if (!model::variant_has_attention(model.config().variant))
    throw std::invalid_argument("pretrain_attention: variant has no attention module");

  std::vector<size_t> train_idx;
  for (size_t i = 0; i < data.train.size(); ++i)
    if (data.train[i].has_evidence) train_idx.push_back(i);
  if (train_idx.empty())
    throw DataError("pretrain_attention: no evidence masks in the training data");
  const auto& dev = data.nested_dev.empty() ? data.train : data.nested_dev;

  auto params = model.encoder_attention_parameters();
  num::Adam adam(params, cfg.adam);
  Rng rng(cfg.seed ^ 0xa77e4710ull);

  const bool higher_better = cfg.criterion != SelectionCriterion::Entropy;
  PretrainSummary out;
  {
    const auto attn = dev_attention(model, dev);
    out.init_token_auc = selection_criterion(attn.alphas, attn.masks, SelectionCriterion::TokenAUC);
    out.init_evidence_mass =
        selection_criterion(attn.alphas, attn.masks, SelectionCriterion::EvidenceMass);
  }

  std::vector<num::Tensor2> best = snapshot(params);
  double best_value = higher_better ? -1e300 : 1e300;
  int best_epoch = 0, since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(train_idx);
    double loss_sum = 0.0;
    long loss_tokens = 0;
    size_t b = 0;
    while (b < train_idx.size()) {
      const size_t bend = std::min(train_idx.size(), b + size_t(cfg.pretrain_batch_size));
      long batch_tokens = 0;
      for (size_t k = b; k < bend; ++k) {
        const auto& ex = data.train[train_idx[k]];
        const auto cache = model.forward(ex.article, ex.i_ids, ex.c_ids, ex.o_ids);
        const size_t T = cache.scores.size();

        if (cfg.objective == PretrainObjective::EvidenceMass) {
          // loss = -sum of normalized attention over evidence tokens
          num::Vec dnorm(T, 0.0);
          for (size_t t = 0; t < T; ++t) {
            if (ex.mask[t]) {
              loss_sum -= cache.attn.normalized[t];
              dnorm[t] = -1.0;
            }
          }
          batch_tokens += long(T);
          model.backward_from_normalized(cache, dnorm);
        } else {
          const auto target = make_targets(ex.mask, cfg.target_mode);
          std::vector<bool> keep(T, true);
          if (cfg.objective == PretrainObjective::BalancedTokenwiseBCE)
            keep = balanced_token_sample(ex.mask, rng);
          num::Vec dscores(T, 0.0);
          for (size_t t = 0; t < T; ++t) {
            if (!keep[t]) continue;
            const double p = num::sigmoid(cache.scores[t]);
            loss_sum += num::binary_cross_entropy(p, target.targets[t]);
            dscores[t] = p - target.targets[t];
            ++batch_tokens;
          }
          model.backward_from_scores(cache, dscores);
        }
      }
      if (batch_tokens > 0) adam.step(1.0 / double(batch_tokens));
      loss_tokens += batch_tokens;
      b = bend;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_tokens > 0 ? loss_sum / double(loss_tokens) : 0.0;
    const auto attn = dev_attention(model, dev);
    log.dev_value = selection_criterion(attn.alphas, attn.masks, cfg.criterion);
    log.dev_token_auc = selection_criterion(attn.alphas, attn.masks, SelectionCriterion::TokenAUC);
    if (!std::isfinite(log.train_loss))
      throw NumericalError("pretrain_attention: non-finite loss at epoch " +
                           std::to_string(epoch));

    const bool improved = higher_better ? log.dev_value > best_value : log.dev_value < best_value;
    if (improved) {
      best_value = log.dev_value;
      best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
      log.is_best = true;
    } else {
      ++since_best;
    }
    out.run.epochs.push_back(log);
    if (since_best >= cfg.patience) break;
  }

  restore(params, best);
  out.run.best_epoch = best_epoch;
  out.run.best_dev_value = best_value;
  {
    const auto attn = dev_attention(model, dev);
    out.best_token_auc = selection_criterion(attn.alphas, attn.masks, SelectionCriterion::TokenAUC);
    out.best_evidence_mass =
        selection_criterion(attn.alphas, attn.masks, SelectionCriterion::EvidenceMass);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline-neural training
// ---------------------------------------------------------------------------

namespace {

struct TaggerExample {
  std::vector<int> ids;
  std::vector<int> i_ids, c_ids, o_ids;
  double label = 0.0;
};

std::vector<TaggerExample> tagger_examples(const corpus::Dataset& ds,
                                           const prep::Vocabulary& vocab,
                                           const std::vector<const corpus::ICOPrompt*>& prompts) {
  std::vector<TaggerExample> out;
  for (const auto* p : prompts) {
    const auto* doc = ds.find_article(p->article_id);
    const auto gold = ds.gold_evidence(p->prompt_id);
    if (!doc || !gold) continue;
    for (size_t s = 0; s < doc->sentences.size(); ++s) {
      TaggerExample ex;
      for (size_t t : doc->tokens_in_sentence(s)) ex.ids.push_back(vocab.id(doc->tokens[t].surface));
      bool evidential = false;
      for (size_t t : doc->tokens_in_sentence(s))
        if (gold->token_mask[t]) {
          evidential = true;
          break;
        }
      ex.label = evidential ? 1.0 : 0.0;
      ex.i_ids = eval::text_token_ids(p->intervention, vocab);
      ex.c_ids = eval::text_token_ids(p->comparator, vocab);
      ex.o_ids = eval::text_token_ids(p->outcome, vocab);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace

PipelineNeuralModel train_pipeline_neural(const corpus::Dataset& ds,
                                          const prep::Vocabulary& vocab,
                                          const model::ModelConfig& mcfg, const TrainConfig& cfg,
                                          RunSummary* tagger_summary, RunSummary* doc_summary) {
  cfg.validate();
  if (mcfg.variant != model::Variant::PipelineNeural &&
      mcfg.variant != model::Variant::CondPipelineNeural)
    throw std::invalid_argument("train_pipeline_neural: not a pipeline variant");

  // article-disjoint nested split over train prompts
  const auto train_prompts_all = ds.prompts_in(corpus::Split::Train);
  std::vector<std::string> article_order;
  std::set<std::string> seen;
  for (const auto* p : train_prompts_all)
    if (seen.insert(p->article_id).second) article_order.push_back(p->article_id);
  Rng split_rng(cfg.seed ^ 0x5eed5011ull);
  split_rng.shuffle(article_order);
  const size_t n_dev = size_t(std::floor(double(article_order.size()) * cfg.nested_dev_fraction));
  std::set<std::string> dev_articles(article_order.begin(), article_order.begin() + n_dev);
  std::vector<const corpus::ICOPrompt*> fit_prompts, dev_prompts;
  for (const auto* p : train_prompts_all)
    (dev_articles.count(p->article_id) ? dev_prompts : fit_prompts).push_back(p);
  if (dev_prompts.empty()) dev_prompts = fit_prompts;

  PipelineNeuralModel pm{model::SentenceTagger(mcfg, vocab.size()),
                         model::FeedForwardClassifier(), 0.5};

  // ---- stage 1: sentence tagger, BCE, best nested-dev loss
  {
    auto fit = tagger_examples(ds, vocab, fit_prompts);
    auto dev = tagger_examples(ds, vocab, dev_prompts);
    if (fit.empty()) throw DataError("train_pipeline_neural: no tagger examples");
    auto params = pm.tagger.parameters();
    num::Adam adam(params, cfg.adam);
    Rng rng(cfg.seed ^ 0x7a99e4ull);

    auto dev_loss = [&]() {
      double sum = 0.0;
      for (const auto& ex : dev) {
        const auto penc = pm.tagger.encode_prompt(ex.i_ids, ex.c_ids, ex.o_ids);
        const auto cache = pm.tagger.forward(ex.ids, penc);
        sum += num::binary_cross_entropy(cache.prob, ex.label);
      }
      return sum / double(dev.size());
    };

    std::vector<size_t> order(fit.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<num::Tensor2> best = snapshot(params);
    double best_value = 1e300;
    int best_epoch = 0, since_best = 0;
    RunSummary summary;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      rng.shuffle(order);
      double loss_sum = 0.0;
      size_t b = 0;
      while (b < order.size()) {
        const size_t bend = std::min(order.size(), b + size_t(cfg.batch_size));
        for (size_t k = b; k < bend; ++k) {
          const auto& ex = fit[order[k]];
          const auto penc = pm.tagger.encode_prompt(ex.i_ids, ex.c_ids, ex.o_ids);
          const auto cache = pm.tagger.forward(ex.ids, penc);
          loss_sum += num::binary_cross_entropy(cache.prob, ex.label);
          pm.tagger.backward(cache, cache.prob - ex.label);
        }
        adam.step(1.0 / double(bend - b));
        b = bend;
      }
      EpochLog log;
      log.epoch = epoch;
      log.train_loss = loss_sum / double(fit.size());
      log.dev_value = dev_loss();
      if (!std::isfinite(log.train_loss))
        throw NumericalError("tagger training: non-finite loss at epoch " + std::to_string(epoch));
      if (log.dev_value < best_value) {
        best_value = log.dev_value;
        best_epoch = epoch;
        best = snapshot(params);
        since_best = 0;
        log.is_best = true;
      } else {
        ++since_best;
      }
      summary.epochs.push_back(log);
      if (since_best >= cfg.patience) break;
    }
    restore(params, best);
    summary.best_epoch = best_epoch;
    summary.best_dev_value = best_value;
    if (tagger_summary) *tagger_summary = summary;
  }

  // ---- stage 2: document classifier over tagger-selected sentences
  {
    struct DocExample {
      num::Vec features;
      int cls = 0;
    };
    auto build_examples = [&](const std::vector<const corpus::ICOPrompt*>& prompts) {
      std::vector<DocExample> out;
      for (const auto* p : prompts) {
        const auto* doc = ds.find_article(p->article_id);
        const auto gold = ds.gold_label(p->prompt_id);
        if (!doc || !gold || doc->sentences.empty()) continue;
        const auto penc = pm.tagger.encode_prompt(eval::text_token_ids(p->intervention, vocab),
                                                  eval::text_token_ids(p->comparator, vocab),
                                                  eval::text_token_ids(p->outcome, vocab));
        std::vector<model::TaggerCache> caches;
        std::vector<double> probs;
        for (size_t s = 0; s < doc->sentences.size(); ++s) {
          std::vector<int> ids;
          for (size_t t : doc->tokens_in_sentence(s))
            ids.push_back(vocab.id(doc->tokens[t].surface));
          caches.push_back(pm.tagger.forward(ids, penc));
          probs.push_back(caches.back().prob);
        }
        std::vector<model::TaggerCache> picked;
        size_t top = 0;
        for (size_t s = 0; s < probs.size(); ++s) {
          if (probs[s] > probs[top]) top = s;
          if (probs[s] > pm.evidence_threshold) picked.push_back(caches[s]);
        }
        if (picked.empty()) picked.push_back(caches[top]);
        num::Vec mean = pm.tagger.mean_state(picked);
        DocExample ex;
        ex.features.insert(ex.features.end(), mean.begin(), mean.end());
        ex.features.insert(ex.features.end(), penc.i.begin(), penc.i.end());
        ex.features.insert(ex.features.end(), penc.c.begin(), penc.c.end());
        ex.features.insert(ex.features.end(), penc.o.begin(), penc.o.end());
        ex.cls = corpus::label_index(*gold);
        out.push_back(std::move(ex));
      }
      return out;
    };

    const auto fit = build_examples(fit_prompts);
    const auto dev = build_examples(dev_prompts);
    if (fit.empty()) throw DataError("train_pipeline_neural: no document examples");

    Rng init_rng(cfg.seed ^ 0xd0cc1a55ull);
    pm.classifier = model::FeedForwardClassifier(int(fit[0].features.size()), mcfg.cls_hidden,
                                                 init_rng);
    auto params = pm.classifier.parameters();
    num::Adam adam(params, cfg.adam);
    Rng rng(cfg.seed ^ 0xd0c0d0ull);

    auto dev_f1 = [&]() {
      eval::ConfusionMatrix cm;
      for (const auto& ex : dev) {
        const auto ff = pm.classifier.forward(ex.features);
        cm.add(corpus::label_from_index(ex.cls),
               corpus::label_from_index(pm.classifier.predict_class(ff)));
      }
      return eval::macro_prf(cm).macro_f1;
    };

    std::vector<size_t> order(fit.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<num::Tensor2> best = snapshot(params);
    double best_value = -1.0;
    int best_epoch = 0, since_best = 0;
    RunSummary summary;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      rng.shuffle(order);
      double loss_sum = 0.0;
      size_t b = 0;
      while (b < order.size()) {
        const size_t bend = std::min(order.size(), b + size_t(cfg.batch_size));
        for (size_t k = b; k < bend; ++k) {
          const auto& ex = fit[order[k]];
          const auto ff = pm.classifier.forward(ex.features);
          loss_sum += num::cross_entropy(ff.logits, ex.cls);
          const auto dlogits = num::cross_entropy_backward(ff.logits, ex.cls);
          pm.classifier.backward(ff, {dlogits[0], dlogits[1], dlogits[2]});
        }
        adam.step(1.0 / double(bend - b));
        b = bend;
      }
      EpochLog log;
      log.epoch = epoch;
      log.train_loss = loss_sum / double(fit.size());
      log.dev_value = dev_f1();
      if (log.dev_value > best_value) {
        best_value = log.dev_value;
        best_epoch = epoch;
        best = snapshot(params);
        since_best = 0;
        log.is_best = true;
      } else {
        ++since_best;
      }
      summary.epochs.push_back(log);
      if (since_best >= cfg.patience) break;
    }
    restore(params, best);
    summary.best_epoch = best_epoch;
    summary.best_dev_value = best_value;
    if (doc_summary) *doc_summary = summary;
  }
  return pm;
}

// ---------------------------------------------------------------------------
// Multi-seed aggregation
// ---------------------------------------------------------------------------

MultiRunReport multi_run(const std::function<eval::MetricsReport(uint64_t seed)>& run,
                         const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("multi_run: need at least one seed");
  std::vector<eval::MetricsReport> reports;
  reports.reserve(seeds.size());
  for (uint64_t s : seeds) reports.push_back(run(s));

  auto stat_of = [&](const std::function<double(const eval::MetricsReport&)>& get) {
    MetricStat st;
    st.min = 1e300;
    st.max = -1e300;
    for (const auto& r : reports) {
      const double v = get(r);
      st.mean += v / double(reports.size());
      st.min = std::min(st.min, v);
      st.max = std::max(st.max, v);
    }
    return st;
  };

  MultiRunReport rep;
  rep.runs = int(reports.size());
  rep.precision = stat_of([](const auto& r) { return r.macro_precision; });
  rep.recall = stat_of([](const auto& r) { return r.macro_recall; });
  rep.f1 = stat_of([](const auto& r) { return r.macro_f1; });
  const bool all_auc = std::all_of(reports.begin(), reports.end(),
                                   [](const auto& r) { return r.token_auc.has_value(); });
  if (all_auc) rep.token_auc = stat_of([](const auto& r) { return *r.token_auc; });
  const bool all_mass = std::all_of(reports.begin(), reports.end(),
                                    [](const auto& r) { return r.evidence_mass.has_value(); });
  if (all_mass) rep.evidence_mass = stat_of([](const auto& r) { return *r.evidence_mass; });
  return rep;
}

std::string format_multi_run(const MultiRunReport& rep) {
  std::ostringstream os;
  auto fmt = [](const MetricStat& s) {
    char b[64];
    std::snprintf(b, sizeof b, "%.3f (%.3f, %.3f)", s.mean, s.min, s.max);
    return std::string(b);
  };
  os << "runs: " << rep.runs << "\n";
  os << "precision: " << fmt(rep.precision) << "\n";
  os << "recall:    " << fmt(rep.recall) << "\n";
  os << "f1:        " << fmt(rep.f1) << "\n";
  if (rep.token_auc) os << "token AUC: " << fmt(*rep.token_auc) << "\n";
  if (rep.evidence_mass) os << "mass:      " << fmt(*rep.evidence_mass) << "\n";
  return os.str();
}

}  // namespace evinf::train
