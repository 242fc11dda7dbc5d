#include "evinf/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "evinf/numerics.hpp"

namespace evinf::lin {

namespace {

void add_segment(std::set<int>& out, const std::vector<std::string>& tokens,
                 const prep::Vocabulary& vocab, Segment segment) {
  const int base = int(segment) * vocab.size();
  for (const auto& t : tokens) out.insert(base + vocab.id(t));
}

}  // namespace

BoWVector featurize(const std::vector<std::string>& article_tokens,
                    const std::vector<std::string>& intervention_tokens,
                    const std::vector<std::string>& comparator_tokens,
                    const std::vector<std::string>& outcome_tokens,
                    const prep::Vocabulary& vocab) {
  std::set<int> idx;
  add_segment(idx, article_tokens, vocab, Segment::Article);
  add_segment(idx, intervention_tokens, vocab, Segment::Intervention);
  add_segment(idx, comparator_tokens, vocab, Segment::Comparator);
  add_segment(idx, outcome_tokens, vocab, Segment::Outcome);
  return {std::vector<int>(idx.begin(), idx.end())};
}

BoWVector featurize_single(const std::vector<std::string>& tokens, const prep::Vocabulary& vocab) {
  std::set<int> idx;
  add_segment(idx, tokens, vocab, Segment::Article);
  return {std::vector<int>(idx.begin(), idx.end())};
}

BoWVector merge(const BoWVector& a, const BoWVector& b) {
  BoWVector out;
  std::set_union(a.indices.begin(), a.indices.end(), b.indices.begin(), b.indices.end(),
                 std::back_inserter(out.indices));
  return out;
}

// ---------------------------------------------------------------------------
// Training / prediction
// ---------------------------------------------------------------------------

namespace {

std::vector<double> scores_of(const LinearModel& m, const BoWVector& x) {
  std::vector<double> s(m.bias);
  for (int c = 0; c < m.n_classes; ++c)
    for (int f : x.indices) s[c] += m.w(c, f);
  return s;
}

}  // namespace

double lr_loss_and_grad(const LinearModel& model, const std::vector<LinearExample>& examples,
                        std::vector<double>& grad_w, std::vector<double>& grad_b) {
  if (examples.empty()) throw std::invalid_argument("lr_loss_and_grad: empty training set");
  grad_w.assign(model.weights.size(), 0.0);
  grad_b.assign(model.bias.size(), 0.0);
  const double inv_n = 1.0 / double(examples.size());

  double loss = 0.0;
  for (const auto& ex : examples) {
    const auto scores = scores_of(model, ex.features);
    loss += num::cross_entropy(scores, ex.cls) * inv_n;
    const auto dscores = num::cross_entropy_backward(scores, ex.cls);
    for (int c = 0; c < model.n_classes; ++c) {
      const double d = dscores[c] * inv_n;
      grad_b[c] += d;
      for (int f : ex.features.indices) grad_w[size_t(c) * model.n_features + f] += d;
    }
  }
  for (size_t i = 0; i < model.weights.size(); ++i) {
    loss += 0.5 * model.l2 * model.weights[i] * model.weights[i];
    grad_w[i] += model.l2 * model.weights[i];
  }
  return loss;
}

LinearModel lr_train(const std::vector<LinearExample>& examples, int n_classes, int n_features,
                     const LrConfig& config) {
  if (examples.empty()) throw std::invalid_argument("lr_train: empty training set");
  for (const auto& ex : examples) {
    if (ex.cls < 0 || ex.cls >= n_classes) throw std::invalid_argument("lr_train: class out of range");
    if (!ex.features.indices.empty() &&
        (ex.features.indices.front() < 0 || ex.features.indices.back() >= n_features))
      throw std::invalid_argument("lr_train: feature index out of range");
  }

  LinearModel model;
  model.n_classes = n_classes;
  model.n_features = n_features;
  model.weights.assign(size_t(n_classes) * n_features, 0.0);
  model.bias.assign(size_t(n_classes), 0.0);
  model.l2 = config.l2;

  std::vector<double> gw, gb;
  for (int it = 0; it < config.max_iters; ++it) {
    lr_loss_and_grad(model, examples, gw, gb);
    double norm2 = 0.0;
    for (double g : gw) norm2 += g * g;
    for (double g : gb) norm2 += g * g;
    if (std::sqrt(norm2) < config.grad_tol) break;
    for (size_t i = 0; i < model.weights.size(); ++i) model.weights[i] -= config.step * gw[i];
    for (size_t i = 0; i < model.bias.size(); ++i) model.bias[i] -= config.step * gb[i];
  }
  for (double w : model.weights)
    if (!std::isfinite(w)) throw NumericalError("lr_train: non-finite weights");
  return model;
}

LinearPrediction lr_predict(const LinearModel& model, const BoWVector& features) {
  LinearPrediction out;
  out.probs = num::softmax(scores_of(model, features));
  out.cls = 0;
  for (int c = 1; c < model.n_classes; ++c)
    if (out.probs[c] > out.probs[out.cls]) out.cls = c;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: dimensions header + dense weight rows
// ---------------------------------------------------------------------------

void LinearModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  const char magic[8] = {'E', 'V', 'L', 'R', '1', 0, 0, 0};
  out.write(magic, 8);
  const int64_t dims[2] = {n_classes, n_features};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(&l2), sizeof l2);
  out.write(reinterpret_cast<const char*>(weights.data()), std::streamsize(weights.size() * 8));
  out.write(reinterpret_cast<const char*>(bias.data()), std::streamsize(bias.size() * 8));
}

LinearModel LinearModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 4) != "EVLR") throw DataError("not a linear model file: " + path);
  int64_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  LinearModel m;
  m.n_classes = int(dims[0]);
  m.n_features = int(dims[1]);
  in.read(reinterpret_cast<char*>(&m.l2), sizeof m.l2);
  m.weights.resize(size_t(m.n_classes) * m.n_features);
  m.bias.resize(size_t(m.n_classes));
  in.read(reinterpret_cast<char*>(m.weights.data()), std::streamsize(m.weights.size() * 8));
  in.read(reinterpret_cast<char*>(m.bias.data()), std::streamsize(m.bias.size() * 8));
  if (!in) throw DataError("truncated model file: " + path);
  return m;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> sentence_surfaces(const prep::ProcessedDocument& doc, size_t s) {
  std::vector<std::string> out;
  for (size_t t : doc.tokens_in_sentence(s)) out.push_back(doc.tokens[t].surface);
  return out;
}

std::vector<std::string> text_surfaces(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& t : prep::tokenize(text)) out.push_back(t.surface);
  return out;
}

}  // namespace

PipelineLrResult pipeline_lr(const prep::ProcessedDocument& doc, const corpus::ICOPrompt& prompt,
                             const PipelineLrModel& model, const prep::Vocabulary& vocab) {
  PipelineLrResult res;
  size_t top = 0;
  for (size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto feats = featurize_single(sentence_surfaces(doc, s), vocab);
    const double prob = lr_predict(model.sentence_model, feats).probs[1];
    res.sentence_scores.push_back(prob);
    if (prob > res.sentence_scores[top]) top = s;
    if (prob > model.evidence_threshold) res.selected.push_back(s);
  }
  if (res.selected.empty() && !doc.sentences.empty()) res.selected.push_back(top);

  std::vector<std::string> aggregate;
  for (size_t s : res.selected) {
    auto toks = sentence_surfaces(doc, s);
    aggregate.insert(aggregate.end(), toks.begin(), toks.end());
  }
  const auto feats = featurize(aggregate, text_surfaces(prompt.intervention),
                               text_surfaces(prompt.comparator), text_surfaces(prompt.outcome),
                               vocab);
  res.label = corpus::label_from_index(lr_predict(model.doc_model, feats).cls);
  return res;
}

PipelineLrModel train_pipeline_lr(const corpus::Dataset& ds, const prep::Vocabulary& vocab,
                                  const LrConfig& config) {
  PipelineLrModel model;

  // stage 1: sentence-level evidence labels (1 if the sentence holds any
  // evidence tokens for the prompt)
  std::vector<LinearExample> sentence_examples;
  for (const auto* p : ds.prompts_in(corpus::Split::Train)) {
    const auto* doc = ds.find_article(p->article_id);
    const auto gold = ds.gold_evidence(p->prompt_id);
    if (!doc || !gold) continue;
    for (size_t s = 0; s < doc->sentences.size(); ++s) {
      bool evidential = false;
      for (size_t t : doc->tokens_in_sentence(s))
        if (gold->token_mask[t]) {
          evidential = true;
          break;
        }
      sentence_examples.push_back(
          {featurize_single(sentence_surfaces(*doc, s), vocab), evidential ? 1 : 0});
    }
  }
  model.sentence_model = lr_train(sentence_examples, 2, vocab.size(), config);

  // stage 2: document model over aggregates of tagger-selected sentences
  std::vector<LinearExample> doc_examples;
  for (const auto* p : ds.prompts_in(corpus::Split::Train)) {
    const auto* doc = ds.find_article(p->article_id);
    const auto gold = ds.gold_label(p->prompt_id);
    if (!doc || !gold) continue;
    size_t top = 0;
    std::vector<size_t> selected;
    std::vector<double> scores;
    for (size_t s = 0; s < doc->sentences.size(); ++s) {
      const auto feats = featurize_single(sentence_surfaces(*doc, s), vocab);
      const double prob = lr_predict(model.sentence_model, feats).probs[1];
      scores.push_back(prob);
      if (prob > scores[top]) top = s;
      if (prob > model.evidence_threshold) selected.push_back(s);
    }
    if (selected.empty() && !doc->sentences.empty()) selected.push_back(top);
    std::vector<std::string> aggregate;
    for (size_t s : selected) {
      auto toks = sentence_surfaces(*doc, s);
      aggregate.insert(aggregate.end(), toks.begin(), toks.end());
    }
    doc_examples.push_back({featurize(aggregate, text_surfaces(p->intervention),
                                      text_surfaces(p->comparator), text_surfaces(p->outcome),
                                      vocab),
                            corpus::label_index(*gold)});
  }
  model.doc_model = lr_train(doc_examples, 3, 4 * vocab.size(), config);
  return model;
}

}  // namespace evinf::lin
