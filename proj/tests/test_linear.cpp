#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "evinf/eval.hpp"
#include "evinf/linear.hpp"
#include "test_util.hpp"

using namespace evinf;
using namespace evinf::lin;

namespace {

prep::Vocabulary small_vocab() {
  return prep::Vocabulary::build({{"alpha", "beta", "gamma", "delta", "evidence"}}, 10);
}

}  // namespace

TEST_CASE("featurize") {
  const auto vocab = small_vocab();
  SUBCASE("all-empty input gives an empty index set") {
    CHECK(featurize({}, {}, {}, {}, vocab).indices.empty());
  }
  SUBCASE("same token in two segments activates two distinct indices") {
    const auto f = featurize({"alpha"}, {"alpha"}, {}, {}, vocab);
    REQUIRE(f.indices.size() == 2);
    CHECK(f.indices[1] - f.indices[0] == vocab.size());
  }
  SUBCASE("indices stay under 4 segments x vocab size") {
    const auto f = featurize({"alpha"}, {"beta"}, {"gamma"}, {"delta", "unknown-token"}, vocab);
    for (int i : f.indices) {
      CHECK(i >= 0);
      CHECK(i < 4 * vocab.size());
    }
  }
  SUBCASE("OOV tokens land on the segment's OOV slot") {
    const auto f = featurize({}, {"unseen"}, {}, {}, vocab);
    REQUIRE(f.indices.size() == 1);
    CHECK(f.indices[0] == vocab.size() + prep::Vocabulary::kOovId);
  }
  SUBCASE("duplicates collapse and order does not matter") {
    const auto a = featurize({"alpha", "beta", "alpha"}, {}, {}, {}, vocab);
    const auto b = featurize({"beta", "alpha"}, {}, {}, {}, vocab);
    CHECK(a.indices == b.indices);
  }
}

TEST_CASE("lr_train and lr_predict") {
  SUBCASE("linearly separable toy set reaches training accuracy 1.0") {
    std::vector<LinearExample> ex;
    for (int rep = 0; rep < 3; ++rep) {
      ex.push_back({{{0}}, 0});
      ex.push_back({{{1}}, 1});
      ex.push_back({{{2}}, 2});
    }
    const auto model = lr_train(ex, 3, 3);
    for (const auto& e : ex) CHECK(lr_predict(model, e.features).cls == e.cls);
  }
  SUBCASE("huge L2 drives weights to zero and predictions to the prior argmax") {
    std::vector<LinearExample> ex;
    ex.push_back({{{0}}, 0});
    ex.push_back({{{1}}, 1});
    ex.push_back({{{1}}, 1});
    ex.push_back({{{2}}, 1});
    ex.push_back({{{2}}, 2});
    LrConfig cfg;
    cfg.l2 = 10.0;  // large enough to dominate, small enough for the fixed step
    const auto model = lr_train(ex, 3, 3, cfg);
    for (double w : model.weights) CHECK(std::abs(w) < 0.05);
    for (const auto& e : ex) CHECK(lr_predict(model, e.features).cls == 1);
  }
  SUBCASE("empty training set is rejected") {
    CHECK_THROWS_AS(lr_train({}, 3, 3), std::invalid_argument);
  }
  SUBCASE("gradient at initialization matches finite differences") {
    std::vector<LinearExample> ex;
    ex.push_back({{{0, 2}}, 0});
    ex.push_back({{{1}}, 1});
    ex.push_back({{{1, 2}}, 2});
    LinearModel m;
    m.n_classes = 3;
    m.n_features = 3;
    m.weights.assign(9, 0.0);
    m.bias.assign(3, 0.0);
    m.l2 = 0.01;
    Rng rng(4);
    for (double& w : m.weights) w = rng.uniform(-0.2, 0.2);

    std::vector<double> gw, gb;
    lr_loss_and_grad(m, ex, gw, gb);
    const double h = 1e-6;
    auto loss_at = [&]() {
      std::vector<double> tw, tb;
      return lr_loss_and_grad(m, ex, tw, tb);
    };
    for (size_t i = 0; i < m.weights.size(); ++i) {
      const double saved = m.weights[i];
      m.weights[i] = saved + h;
      const double lp = loss_at();
      m.weights[i] = saved - h;
      const double lm = loss_at();
      m.weights[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      if (std::abs(gw[i]) < 1e-9 && std::abs(numeric) < 1e-9) continue;
      CHECK(std::abs(gw[i] - numeric) / (std::abs(gw[i]) + std::abs(numeric)) < 1e-4);
    }
  }
  SUBCASE("loss is non-increasing across fixed-step iterations") {
    std::vector<LinearExample> ex;
    ex.push_back({{{0, 1}}, 0});
    ex.push_back({{{1, 2}}, 1});
    ex.push_back({{{0, 2}}, 2});
    ex.push_back({{{2}}, 1});
    LinearModel m;
    m.n_classes = 3;
    m.n_features = 3;
    m.weights.assign(9, 0.0);
    m.bias.assign(3, 0.0);
    m.l2 = 1e-4;
    std::vector<double> gw, gb;
    double prev = 1e300;
    for (int it = 0; it < 50; ++it) {
      const double loss = lr_loss_and_grad(m, ex, gw, gb);
      CHECK(loss <= prev + 1e-12);
      prev = loss;
      for (size_t i = 0; i < m.weights.size(); ++i) m.weights[i] -= 0.1 * gw[i];
      for (size_t i = 0; i < m.bias.size(); ++i) m.bias[i] -= 0.1 * gb[i];
    }
  }
  SUBCASE("prediction on the zero model is uniform") {
    LinearModel m;
    m.n_classes = 3;
    m.n_features = 2;
    m.weights.assign(6, 0.0);
    m.bias.assign(3, 0.0);
    const auto pred = lr_predict(m, {{0}});
    for (double p : pred.probs) CHECK(p == doctest::Approx(1.0 / 3.0));
    CHECK(pred.cls == 0);  // lowest class code on ties
  }
  SUBCASE("dominant bias wins with probability near one") {
    LinearModel m;
    m.n_classes = 3;
    m.n_features = 2;
    m.weights.assign(6, 0.0);
    m.bias = {0.0, 10.0, 0.0};
    const auto pred = lr_predict(m, {{}});
    CHECK(pred.cls == 1);
    CHECK(pred.probs[1] > 0.9999);
  }
  SUBCASE("probabilities always sum to one") {
    Rng rng(9);
    LinearModel m;
    m.n_classes = 3;
    m.n_features = 4;
    m.weights = testutil::random_vec(12, rng, 3.0);
    m.bias = testutil::random_vec(3, rng, 3.0);
    for (int rep = 0; rep < 20; ++rep) {
      BoWVector f;
      for (int i = 0; i < 4; ++i)
        if (rng.uniform() < 0.5) f.indices.push_back(i);
      const auto pred = lr_predict(m, f);
      double sum = 0.0;
      for (double p : pred.probs) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("model serialization round trip") {
  Rng rng(13);
  LinearModel m;
  m.n_classes = 3;
  m.n_features = 5;
  m.weights = testutil::random_vec(15, rng);
  m.bias = testutil::random_vec(3, rng);
  m.l2 = 0.25;
  const auto dir = testutil::scratch_dir("linmodel");
  m.save(dir + "/m.bin");
  const auto loaded = LinearModel::load(dir + "/m.bin");
  CHECK(loaded.n_classes == m.n_classes);
  CHECK(loaded.n_features == m.n_features);
  CHECK(loaded.weights == m.weights);
  CHECK(loaded.bias == m.bias);
  CHECK(loaded.l2 == m.l2);
}

TEST_CASE("pipeline_lr mechanics") {
  const auto vocab = small_vocab();
  const auto doc = prep::process_text("Alpha beta here. Evidence gamma there. Delta closes out.");
  const corpus::ICOPrompt prompt{1, "A1", "alpha", "beta", "gamma"};

  PipelineLrModel pm;
  pm.sentence_model.n_classes = 2;
  pm.sentence_model.n_features = vocab.size();
  pm.sentence_model.weights.assign(size_t(2) * vocab.size(), 0.0);
  pm.sentence_model.bias = {2.0, 0.0};  // everything scores low by default
  pm.sentence_model.w(1, vocab.id("evidence")) = 8.0;
  pm.doc_model.n_classes = 3;
  pm.doc_model.n_features = 4 * vocab.size();
  pm.doc_model.weights.assign(size_t(3) * 4 * vocab.size(), 0.0);
  pm.doc_model.bias.assign(3, 0.0);
  Rng rng(5);
  for (double& w : pm.doc_model.weights) w = rng.uniform(-1.0, 1.0);

  SUBCASE("exactly one evidential sentence: document prediction equals direct lr_predict") {
    const auto res = pipeline_lr(doc, prompt, pm, vocab);
    REQUIRE(res.selected == std::vector<size_t>{1});
    std::vector<std::string> sent_tokens;
    for (size_t t : doc.tokens_in_sentence(1)) sent_tokens.push_back(doc.tokens[t].surface);
    const auto feats = featurize(sent_tokens, {"alpha"}, {"beta"}, {"gamma"}, vocab);
    CHECK(int(corpus::label_index(res.label)) == lr_predict(pm.doc_model, feats).cls);
  }

  SUBCASE("no sentence above threshold falls back to the top-1 sentence") {
    PipelineLrModel flat = pm;
    flat.sentence_model.w(1, vocab.id("evidence")) = 1.0;  // stays below 0.5 against bias 2
    const auto res = pipeline_lr(doc, prompt, flat, vocab);
    REQUIRE(res.selected.size() == 1);
    CHECK(res.selected[0] == 1);  // still the best-scoring sentence
    CHECK(res.sentence_scores[1] < 0.5);
  }

  SUBCASE("sentence scores ignore the prompt entirely") {
    const corpus::ICOPrompt other{2, "A1", "delta", "gamma", "alpha"};
    const auto a = pipeline_lr(doc, prompt, pm, vocab);
    const auto b = pipeline_lr(doc, other, pm, vocab);
    CHECK(a.sentence_scores == b.sentence_scores);
  }
}

TEST_CASE("trained pipeline tagger separates planted evidence on synthetic data") {
  corpus::SynthConfig cfg;
  cfg.articles = 40;
  cfg.prompts_per_article = 2;
  cfg.filler_sentences = 12;
  cfg.seed = 5;
  const auto ds = corpus::generate_synthetic(cfg);

  std::vector<std::vector<std::string>> streams;
  for (const auto* p : ds.prompts_in(corpus::Split::Train)) {
    const auto* doc = ds.find_article(p->article_id);
    std::vector<std::string> toks;
    for (const auto& t : doc->tokens) toks.push_back(t.surface);
    streams.push_back(std::move(toks));
  }
  const auto vocab = prep::Vocabulary::build(streams, 20000);
  const auto pm = train_pipeline_lr(ds, vocab);

  // token-propagated AUC against the gold masks
  double auc_sum = 0.0;
  long n = 0;
  for (corpus::Split split : {corpus::Split::Dev, corpus::Split::Test}) {
    for (const auto* p : ds.prompts_in(split)) {
      const auto* doc = ds.find_article(p->article_id);
      const auto gold = ds.gold_evidence(p->prompt_id);
      REQUIRE(gold.has_value());
      const auto res = pipeline_lr(*doc, *p, pm, vocab);
      const auto token_scores = eval::sentence_scores_to_tokens(res.sentence_scores, *doc);
      if (auto auc = eval::token_auc(token_scores, gold->token_mask)) {
        auc_sum += *auc;
        ++n;
      }
    }
  }
  REQUIRE(n > 0);
  CHECK(auc_sum / double(n) > 0.9);
}
