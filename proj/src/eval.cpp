#include "evinf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace evinf::eval {

long ConfusionMatrix::total() const {
  long t = 0;
  for (const auto& row : counts)
    for (long c : row) t += c;
  return t;
}

MetricsReport macro_prf(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::invalid_argument("macro_prf: empty confusion matrix");
  MetricsReport rep;
  for (int k = 0; k < 3; ++k) {
    long tp = cm.counts[k][k], gold = 0, pred = 0;
    for (int j = 0; j < 3; ++j) {
      gold += cm.counts[k][j];
      pred += cm.counts[j][k];
    }
    ClassMetrics& m = rep.per_class[k];
    m.precision = pred > 0 ? double(tp) / double(pred) : 0.0;
    m.recall = gold > 0 ? double(tp) / double(gold) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    rep.macro_precision += m.precision / 3.0;
    rep.macro_recall += m.recall / 3.0;
    rep.macro_f1 += m.f1 / 3.0;
  }
  rep.evaluated = cm.total();
  return rep;
}

std::optional<double> token_auc(std::span<const double> scores, const std::vector<bool>& mask) {
  if (scores.size() != mask.size())
    throw std::invalid_argument("token_auc: score/mask length mismatch");
  const size_t n = scores.size();
  size_t pos = 0;
  for (bool b : mask) pos += b ? 1 : 0;
  const size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks over tied score groups
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * double(i + 1 + j);  // ranks are 1-based
    for (size_t k = i; k < j; ++k)
      if (mask[order[k]]) pos_rank_sum += avg_rank;
    i = j;
  }
  return (pos_rank_sum - double(pos) * double(pos + 1) / 2.0) / (double(pos) * double(neg));
}

double evidence_mass(std::span<const double> alpha, const std::vector<bool>& mask) {
  if (alpha.size() != mask.size())
    throw std::invalid_argument("evidence_mass: weight/mask length mismatch");
  double m = 0.0;
  for (size_t t = 0; t < alpha.size(); ++t)
    if (mask[t]) m += alpha[t];
  return m;
}

std::vector<double> sentence_scores_to_tokens(const std::vector<double>& sentence_probs,
                                              const prep::ProcessedDocument& doc) {
  if (sentence_probs.size() != doc.sentences.size())
    throw std::invalid_argument("sentence_scores_to_tokens: probability/sentence mismatch");
  std::vector<double> out(doc.tokens.size(), 0.0);
  for (size_t s = 0; s < doc.sentences.size(); ++s)
    for (size_t t : doc.tokens_in_sentence(s)) out[t] = sentence_probs[s];
  return out;
}

std::optional<double> sentence_ceiling_auc(const corpus::Dataset& ds, corpus::Split split) {
  double sum = 0.0;
  long n = 0;
  for (const auto* p : ds.prompts_in(split)) {
    const auto* doc = ds.find_article(p->article_id);
    const auto gold = ds.gold_evidence(p->prompt_id);
    if (!doc || !gold || doc->sentences.empty()) continue;
    // oracle picks the sentence covering the most evidence tokens
    size_t best = 0, best_overlap = 0;
    for (size_t s = 0; s < doc->sentences.size(); ++s) {
      size_t overlap = 0;
      for (size_t t : doc->tokens_in_sentence(s)) overlap += gold->token_mask[t] ? 1 : 0;
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = s;
      }
    }
    std::vector<double> probs(doc->sentences.size(), 0.0);
    probs[best] = 1.0;
    const auto scores = sentence_scores_to_tokens(probs, *doc);
    if (auto auc = token_auc(scores, gold->token_mask)) {
      sum += *auc;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / double(n);
}

// ---------------------------------------------------------------------------
// Shared input helpers
// ---------------------------------------------------------------------------

std::vector<int> token_ids(const prep::ProcessedDocument& doc, const prep::Vocabulary& vocab) {
  std::vector<int> out;
  out.reserve(doc.tokens.size());
  for (const auto& t : doc.tokens) out.push_back(vocab.id(t.surface));
  return out;
}

std::vector<int> text_token_ids(const std::string& text, const prep::Vocabulary& vocab) {
  std::vector<int> out;
  for (const auto& t : prep::tokenize(text)) out.push_back(vocab.id(t.surface));
  return out;
}

std::vector<std::string> text_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& t : prep::tokenize(text)) out.push_back(t.surface);
  return out;
}

namespace {

const prep::ProcessedDocument& article_of(const corpus::Dataset& ds,
                                          const corpus::ICOPrompt& prompt) {
  const auto* doc = ds.find_article(prompt.article_id);
  if (!doc) throw DataError("prompt references unknown article " + prompt.article_id);
  return *doc;
}

corpus::EvidenceSpan gold_span_of(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt) {
  auto gold = ds.gold_evidence(prompt.prompt_id);
  if (!gold)
    throw DataError("oracle evaluation requested but prompt " +
                    std::to_string(prompt.prompt_id) + " has no evidence span");
  return *gold;
}

// sentences containing at least one gold evidence token
std::vector<size_t> gold_sentences(const prep::ProcessedDocument& doc,
                                   const corpus::EvidenceSpan& span) {
  std::vector<size_t> out;
  for (size_t s = 0; s < doc.sentences.size(); ++s)
    for (size_t t : doc.tokens_in_sentence(s))
      if (span.token_mask[t]) {
        out.push_back(s);
        break;
      }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

Prediction HeuristicSystem::predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                                    const EvalOptions& opts) const {
  const auto& doc = article_of(ds, prompt);
  corpus::ICOPrompt effective = prompt;
  if (opts.ablate_prompt) {
    effective.intervention.clear();
    effective.comparator.clear();
    effective.outcome.clear();
  }

  if (opts.oracle_spans) {
    const auto gold = gold_span_of(ds, prompt);
    const std::string span_text = doc.text.substr(gold.start, gold.end - gold.start);
    return {heur::heuristic_classify_oracle(span_text, effective), std::nullopt};
  }
  if (opts.ablate_article) {
    // without article text only the direction default remains
    return {heur::infer_direction(""), std::nullopt};
  }

  const auto res = heur::heuristic_classify(doc, effective);
  std::vector<double> scores(doc.tokens.size(), 0.0);
  for (size_t t : doc.tokens_in_sentence(res.sentence_index)) scores[t] = 1.0;
  return {res.label, std::move(scores)};
}

Prediction LinearSystem::predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                                 const EvalOptions& opts) const {
  const auto& doc = article_of(ds, prompt);
  std::vector<std::string> article_tokens;
  if (!opts.ablate_article) {
    if (opts.oracle_spans) {
      const auto gold = gold_span_of(ds, prompt);
      for (size_t t = 0; t < doc.tokens.size(); ++t)
        if (gold.token_mask[t]) article_tokens.push_back(doc.tokens[t].surface);
    } else {
      for (const auto& t : doc.tokens) article_tokens.push_back(t.surface);
    }
  }
  std::vector<std::string> i_toks, c_toks, o_toks;
  if (!opts.ablate_prompt) {
    i_toks = text_tokens(prompt.intervention);
    c_toks = text_tokens(prompt.comparator);
    o_toks = text_tokens(prompt.outcome);
  }
  const auto feats = lin::featurize(article_tokens, i_toks, c_toks, o_toks, vocab_);
  return {corpus::label_from_index(lin::lr_predict(model_, feats).cls), std::nullopt};
}

Prediction PipelineLinearSystem::predict(const corpus::Dataset& ds,
                                         const corpus::ICOPrompt& prompt,
                                         const EvalOptions& opts) const {
  const auto& doc = article_of(ds, prompt);
  corpus::ICOPrompt effective = prompt;
  if (opts.ablate_prompt) {
    effective.intervention.clear();
    effective.comparator.clear();
    effective.outcome.clear();
  }

  if (opts.oracle_spans) {
    // the document stage consumes the gold evidence sentences directly
    const auto gold = gold_span_of(ds, prompt);
    std::vector<std::string> aggregate;
    for (size_t s : gold_sentences(doc, gold))
      for (size_t t : doc.tokens_in_sentence(s)) aggregate.push_back(doc.tokens[t].surface);
    const auto feats =
        lin::featurize(aggregate, text_tokens(effective.intervention),
                       text_tokens(effective.comparator), text_tokens(effective.outcome), vocab_);
    return {corpus::label_from_index(lin::lr_predict(model_.doc_model, feats).cls), std::nullopt};
  }

  if (opts.ablate_article) {
    const auto feats = lin::featurize({}, text_tokens(effective.intervention),
                                      text_tokens(effective.comparator),
                                      text_tokens(effective.outcome), vocab_);
    return {corpus::label_from_index(lin::lr_predict(model_.doc_model, feats).cls), std::nullopt};
  }

  const auto res = lin::pipeline_lr(doc, effective, model_, vocab_);
  return {res.label, sentence_scores_to_tokens(res.sentence_scores, doc)};
}

std::string NeuralSystem::name() const {
  return std::string("nn-") + model::variant_name(model_.config().variant);
}

Prediction NeuralSystem::predict(const corpus::Dataset& ds, const corpus::ICOPrompt& prompt,
                                 const EvalOptions& opts) const {
  const auto& doc = article_of(ds, prompt);
  std::vector<int> article;
  if (opts.oracle_spans) {
    const auto gold = gold_span_of(ds, prompt);
    for (size_t t = 0; t < doc.tokens.size(); ++t)
      if (gold.token_mask[t]) article.push_back(vocab_.id(doc.tokens[t].surface));
    if (article.empty()) article.push_back(prep::Vocabulary::kPadId);
  } else {
    article = token_ids(doc, vocab_);
  }

  model::ForwardOptions fwd;
  fwd.ablate_prompt = opts.ablate_prompt;
  fwd.ablate_article = opts.ablate_article;
  const auto cache = model_.forward(article, text_token_ids(prompt.intervention, vocab_),
                                    text_token_ids(prompt.comparator, vocab_),
                                    text_token_ids(prompt.outcome, vocab_), fwd);
  Prediction pred;
  pred.label = corpus::label_from_index(model_.predict_class(cache));
  if (!opts.oracle_spans && model::variant_has_attention(model_.config().variant))
    pred.token_scores = cache.attn.normalized;
  return pred;
}

std::string PipelineNeuralSystem::name() const {
  return std::string("nn-") + model::variant_name(tagger_.config().variant);
}

Prediction PipelineNeuralSystem::predict(const corpus::Dataset& ds,
                                         const corpus::ICOPrompt& prompt,
                                         const EvalOptions& opts) const {
  const auto& doc = article_of(ds, prompt);
  model::PromptEncoding penc;
  if (opts.ablate_prompt) {
    const num::Vec zero(size_t(tagger_.config().emb_dim), 0.0);
    penc = {zero, zero, zero};
  } else {
    penc = tagger_.encode_prompt(text_token_ids(prompt.intervention, vocab_),
                                 text_token_ids(prompt.comparator, vocab_),
                                 text_token_ids(prompt.outcome, vocab_));
  }

  std::vector<model::TaggerCache> caches;
  std::vector<double> sentence_probs;
  for (size_t s = 0; s < doc.sentences.size(); ++s) {
    std::vector<int> ids;
    for (size_t t : doc.tokens_in_sentence(s)) ids.push_back(vocab_.id(doc.tokens[t].surface));
    caches.push_back(tagger_.forward(ids, penc));
    sentence_probs.push_back(caches.back().prob);
  }

  std::vector<size_t> selected;
  if (opts.oracle_spans) {
    selected = gold_sentences(doc, gold_span_of(ds, prompt));
  } else {
    size_t top = 0;
    for (size_t s = 0; s < sentence_probs.size(); ++s) {
      if (sentence_probs[s] > sentence_probs[top]) top = s;
      if (sentence_probs[s] > threshold_) selected.push_back(s);
    }
    if (selected.empty() && !sentence_probs.empty()) selected.push_back(top);
  }

  std::vector<model::TaggerCache> picked;
  for (size_t s : selected) picked.push_back(caches[s]);
  num::Vec mean = tagger_.mean_state(picked);
  if (opts.ablate_article) mean.assign(mean.size(), 0.0);

  num::Vec features;
  features.insert(features.end(), mean.begin(), mean.end());
  features.insert(features.end(), penc.i.begin(), penc.i.end());
  features.insert(features.end(), penc.c.begin(), penc.c.end());
  features.insert(features.end(), penc.o.begin(), penc.o.end());
  const auto ff = classifier_.forward(features);

  Prediction pred;
  pred.label = corpus::label_from_index(classifier_.predict_class(ff));
  if (!opts.oracle_spans) pred.token_scores = sentence_scores_to_tokens(sentence_probs, doc);
  return pred;
}

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

MetricsReport evaluate_model(const System& system, const corpus::Dataset& ds, corpus::Split split,
                             const EvalOptions& opts) {
  ConfusionMatrix cm;
  double auc_sum = 0.0, mass_sum = 0.0;
  long auc_n = 0, mass_n = 0, excluded = 0;

  for (const auto* p : ds.prompts_in(split)) {
    const auto gold = ds.gold_label(p->prompt_id);
    if (!gold) {
      ++excluded;
      continue;
    }
    const Prediction pred = system.predict(ds, *p, opts);
    cm.add(*gold, pred.label);

    if (!pred.token_scores) continue;
    const auto ev = ds.gold_evidence(p->prompt_id);
    if (!ev) continue;
    std::vector<bool> mask(ev->token_mask.begin(),
                           ev->token_mask.begin() +
                               std::min(ev->token_mask.size(), pred.token_scores->size()));
    std::span<const double> scores(pred.token_scores->data(), mask.size());
    if (auto auc = token_auc(scores, mask)) {
      auc_sum += *auc;
      ++auc_n;
    }
    double total = 0.0;
    for (double s : scores) total += s;
    if (total > 0.0) {
      std::vector<double> normalized(scores.begin(), scores.end());
      for (double& s : normalized) s /= total;
      mass_sum += evidence_mass(normalized, mask);
      ++mass_n;
    }
  }

  MetricsReport rep = macro_prf(cm);
  rep.excluded = excluded;
  if (auc_n > 0) rep.token_auc = auc_sum / double(auc_n);
  if (mass_n > 0) rep.evidence_mass = mass_sum / double(mass_n);
  return rep;
}

std::string format_report(const std::string& name, const MetricsReport& rep) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %9s %9s %9s   %s\n", "model", "precision", "recall",
                "f1", "token AUC / mass");
  os << line;
  std::string auc = rep.token_auc ? [&] {
    char b[16];
    std::snprintf(b, sizeof b, "%.3f", *rep.token_auc);
    return std::string(b);
  }() : std::string("--");
  std::string mass = rep.evidence_mass ? [&] {
    char b[16];
    std::snprintf(b, sizeof b, "%.3f", *rep.evidence_mass);
    return std::string(b);
  }() : std::string("--");
  std::snprintf(line, sizeof line, "%-28s %9.3f %9.3f %9.3f   %s / %s\n", name.c_str(),
                rep.macro_precision, rep.macro_recall, rep.macro_f1, auc.c_str(), mass.c_str());
  os << line;
  static const char* class_names[3] = {"sig. decreased", "no sig. diff", "sig. increased"};
  for (int k = 0; k < 3; ++k) {
    std::snprintf(line, sizeof line, "  %-26s %9.3f %9.3f %9.3f\n", class_names[k],
                  rep.per_class[k].precision, rep.per_class[k].recall, rep.per_class[k].f1);
    os << line;
  }
  char tail[80];
  std::snprintf(tail, sizeof tail, "  evaluated %ld prompts, excluded %ld\n", rep.evaluated,
                rep.excluded);
  os << tail;
  return os.str();
}

}  // namespace evinf::eval
