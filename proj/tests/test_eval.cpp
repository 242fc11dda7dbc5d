#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "evinf/eval.hpp"
#include "evinf/training.hpp"
#include "test_util.hpp"

using namespace evinf;
using namespace evinf::eval;
using corpus::Label;

namespace {

// exhaustive positive/negative pair counting
double auc_oracle(const std::vector<double>& scores, const std::vector<bool>& mask) {
  double wins = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!mask[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (mask[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

}  // namespace

TEST_CASE("macro_prf") {
  SUBCASE("majority predictions on the published test label counts") {
    ConfusionMatrix cm;
    cm.counts[0][1] = 215;  // gold -1, predicted 0
    cm.counts[1][1] = 403;
    cm.counts[2][1] = 347;
    const auto rep = macro_prf(cm);
    // closed form: P = (403/965)/3, R = 1/3, F1 = (2p/(1+p))/3 with p = 403/965
    const double p = 403.0 / 965.0;
    CHECK(rep.macro_precision == doctest::Approx(p / 3.0).epsilon(1e-12));
    CHECK(rep.macro_recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rep.macro_f1 == doctest::Approx(2.0 * p / (1.0 + p) / 3.0).epsilon(1e-12));
    // reproduces the reported row within half a point of the third decimal
    CHECK(std::abs(rep.macro_precision - 0.138) < 0.005);
    CHECK(std::abs(rep.macro_recall - 0.333) < 0.005);
    CHECK(std::abs(rep.macro_f1 - 0.195) < 0.005);
  }
  SUBCASE("perfect predictions score 1.0 everywhere") {
    ConfusionMatrix cm;
    cm.counts[0][0] = 10;
    cm.counts[1][1] = 20;
    cm.counts[2][2] = 30;
    const auto rep = macro_prf(cm);
    CHECK(rep.macro_precision == doctest::Approx(1.0));
    CHECK(rep.macro_recall == doctest::Approx(1.0));
    CHECK(rep.macro_f1 == doctest::Approx(1.0));
  }
  SUBCASE("empty diagonal scores zero everywhere") {
    ConfusionMatrix cm;
    cm.counts[0][1] = 5;
    cm.counts[1][2] = 5;
    cm.counts[2][0] = 5;
    const auto rep = macro_prf(cm);
    CHECK(rep.macro_precision == doctest::Approx(0.0));
    CHECK(rep.macro_recall == doctest::Approx(0.0));
    CHECK(rep.macro_f1 == doctest::Approx(0.0));
  }
  SUBCASE("empty matrix is an error") {
    ConfusionMatrix cm;
    CHECK_THROWS_AS(macro_prf(cm), std::invalid_argument);
  }
  SUBCASE("invariant under simultaneous class permutation") {
    ConfusionMatrix cm;
    Rng rng(3);
    for (int g = 0; g < 3; ++g)
      for (int q = 0; q < 3; ++q) cm.counts[g][q] = long(1 + rng.index(20));
    ConfusionMatrix permuted;  // cycle classes by +1
    for (int g = 0; g < 3; ++g)
      for (int q = 0; q < 3; ++q) permuted.counts[(g + 1) % 3][(q + 1) % 3] = cm.counts[g][q];
    const auto a = macro_prf(cm);
    const auto b = macro_prf(permuted);
    CHECK(a.macro_precision == doctest::Approx(b.macro_precision).epsilon(1e-12));
    CHECK(a.macro_recall == doctest::Approx(b.macro_recall).epsilon(1e-12));
    CHECK(a.macro_f1 == doctest::Approx(b.macro_f1).epsilon(1e-12));
  }
}

TEST_CASE("token_auc") {
  SUBCASE("perfect separation scores 1.0") {
    CHECK(*token_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2},
                     std::vector<bool>{true, true, false, false}) == doctest::Approx(1.0));
  }
  SUBCASE("all-equal scores give 0.5") {
    CHECK(*token_auc(std::vector<double>{0.3, 0.3, 0.3},
                     std::vector<bool>{true, false, false}) == doctest::Approx(0.5));
  }
  SUBCASE("spec example matches exhaustive pair counting") {
    const std::vector<double> scores{0.9, 0.4, 0.7, 0.1};
    const std::vector<bool> mask{true, false, true, false};
    CHECK(*token_auc(scores, mask) == doctest::Approx(auc_oracle(scores, mask)).epsilon(1e-12));
  }
  SUBCASE("single-class masks are undefined") {
    CHECK_FALSE(token_auc(std::vector<double>{1.0, 2.0}, std::vector<bool>{true, true}));
    CHECK_FALSE(token_auc(std::vector<double>{1.0, 2.0}, std::vector<bool>{false, false}));
  }
  SUBCASE("random instances match the oracle") {
    Rng rng(8);
    for (int rep = 0; rep < 40; ++rep) {
      const size_t n = 4 + rng.index(20);
      std::vector<double> scores(n);
      std::vector<bool> mask(n);
      for (size_t i = 0; i < n; ++i) {
        scores[i] = double(rng.index(6)) / 5.0;  // coarse grid forces ties
        mask[i] = rng.uniform() < 0.5;
      }
      mask[0] = true;
      mask[1] = false;
      CHECK(*token_auc(scores, mask) == doctest::Approx(auc_oracle(scores, mask)).epsilon(1e-12));
    }
  }
  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng(12);
    std::vector<double> scores = testutil::random_vec(12, rng, 2.0);
    std::vector<bool> mask(12);
    for (size_t i = 0; i < 12; ++i) mask[i] = i % 3 == 0;
    std::vector<double> transformed(scores);
    for (double& s : transformed) s = std::exp(2.0 * s) + 7.0;
    CHECK(*token_auc(scores, mask) == doctest::Approx(*token_auc(transformed, mask)));
  }
}

TEST_CASE("evidence_mass") {
  const std::vector<double> alpha{0.5, 0.25, 0.125, 0.125};
  SUBCASE("all mass on evidence gives 1.0") {
    CHECK(evidence_mass(alpha, {true, true, true, true}) == doctest::Approx(1.0));
  }
  SUBCASE("uniform weights give the evidence fraction") {
    CHECK(evidence_mass(std::vector<double>{0.25, 0.25, 0.25, 0.25},
                        {true, false, true, false}) == doctest::Approx(0.5));
  }
  SUBCASE("mass of the complement is one minus the mass") {
    const std::vector<bool> mask{true, false, false, true};
    std::vector<bool> complement(mask);
    complement.flip();
    CHECK(evidence_mass(alpha, mask) + evidence_mass(alpha, complement) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("sentence_scores_to_tokens") {
  const auto doc = prep::process_text("Alpha beta. Gamma delta epsilon.");
  const auto scores = sentence_scores_to_tokens({0.9, 0.1}, doc);
  REQUIRE(scores.size() == doc.tokens.size());
  for (size_t t : doc.tokens_in_sentence(0)) CHECK(scores[t] == doctest::Approx(0.9));
  for (size_t t : doc.tokens_in_sentence(1)) CHECK(scores[t] == doctest::Approx(0.1));
}

// ---------------------------------------------------------------------------
// Harness over synthetic data
// ---------------------------------------------------------------------------

namespace {

struct Fixture {
  corpus::Dataset ds;
  prep::Vocabulary vocab;

  Fixture() {
    corpus::SynthConfig cfg;
    cfg.articles = 20;
    cfg.prompts_per_article = 2;
    cfg.seed = 77;
    ds = corpus::generate_synthetic(cfg);
    std::vector<std::vector<std::string>> streams;
    for (const auto* p : ds.prompts_in(corpus::Split::Train)) {
      const auto* doc = ds.find_article(p->article_id);
      std::vector<std::string> toks;
      for (const auto& t : doc->tokens) toks.push_back(t.surface);
      streams.push_back(std::move(toks));
    }
    vocab = prep::Vocabulary::build(streams, 20000);
  }
};

}  // namespace

TEST_CASE("evaluate_model") {
  static Fixture fx;

  SUBCASE("majority system recalls exactly one class") {
    const auto rep = evaluate_model(MajoritySystem(), fx.ds, corpus::Split::Train);
    CHECK(rep.macro_recall == doctest::Approx(1.0 / 3.0));
    CHECK(rep.evaluated > 0);
    CHECK(rep.excluded == 0);
  }

  SUBCASE("heuristics dominate the synthetic corpus and report token scores") {
    const auto rep = evaluate_model(HeuristicSystem(), fx.ds, corpus::Split::Train);
    CHECK(rep.macro_f1 > 0.95);
    REQUIRE(rep.token_auc.has_value());
    CHECK(*rep.token_auc > 0.9);
    REQUIRE(rep.evidence_mass.has_value());
  }

  SUBCASE("oracle spans never hurt the heuristics") {
    const auto plain = evaluate_model(HeuristicSystem(), fx.ds, corpus::Split::Train);
    EvalOptions oracle;
    oracle.oracle_spans = true;
    const auto cheat = evaluate_model(HeuristicSystem(), fx.ds, corpus::Split::Train, oracle);
    CHECK(cheat.macro_f1 >= plain.macro_f1 - 1e-12);
  }

  SUBCASE("double ablation forces a constant prediction and macro recall 1/3") {
    EvalOptions opts;
    opts.ablate_prompt = true;
    opts.ablate_article = true;
    // neural system: with both inputs zeroed the logits are a constant bias
    model::ModelConfig mcfg;
    mcfg.variant = model::Variant::CondAttn;
    mcfg.emb_dim = 8;
    mcfg.hidden = 8;
    mcfg.attn_hidden = 8;
    mcfg.cls_hidden = 8;
    mcfg.seed = 5;
    model::InferenceModel m(mcfg, fx.vocab.size());
    const auto rep = evaluate_model(NeuralSystem(m, fx.vocab), fx.ds, corpus::Split::Train, opts);
    CHECK(rep.macro_recall == doctest::Approx(1.0 / 3.0));
  }

  SUBCASE("no-flag options equal default evaluation bit for bit") {
    const auto a = evaluate_model(HeuristicSystem(), fx.ds, corpus::Split::Train);
    const auto b = evaluate_model(HeuristicSystem(), fx.ds, corpus::Split::Train, EvalOptions{});
    CHECK(a.macro_precision == b.macro_precision);
    CHECK(a.macro_recall == b.macro_recall);
    CHECK(a.macro_f1 == b.macro_f1);
    CHECK(a.token_auc == b.token_auc);
    CHECK(a.evidence_mass == b.evidence_mass);
  }

  SUBCASE("per-class rows are populated") {
    const auto rep = evaluate_model(HeuristicSystem(), fx.ds, corpus::Split::Train);
    const auto text = format_report("heuristics", rep);
    CHECK(text.find("sig. decreased") != std::string::npos);
    CHECK(text.find("no sig. diff") != std::string::npos);
    CHECK(text.find("sig. increased") != std::string::npos);
  }

  SUBCASE("oracle without masks errors") {
    corpus::Dataset stripped = fx.ds;
    for (auto& r : stripped.records) {
      r.evidence_start.reset();
      r.evidence_end.reset();
    }
    EvalOptions oracle;
    oracle.oracle_spans = true;
    CHECK_THROWS_AS(evaluate_model(HeuristicSystem(), stripped, corpus::Split::Train, oracle),
                    DataError);
  }
}

TEST_CASE("sentence ceiling on planted evidence is exactly 1.0") {
  static Fixture fx;
  // synthetic evidence is whole sentences, so picking the right sentence is perfect
  const auto ceiling = sentence_ceiling_auc(fx.ds, corpus::Split::Train);
  REQUIRE(ceiling.has_value());
  CHECK(*ceiling == doctest::Approx(1.0));
}

TEST_CASE("neural attention evaluation is prompt-independent only for plain attention") {
  static Fixture fx;
  model::ModelConfig mcfg;
  mcfg.variant = model::Variant::Attn;
  mcfg.emb_dim = 8;
  mcfg.hidden = 8;
  mcfg.attn_hidden = 8;
  mcfg.cls_hidden = 8;
  mcfg.seed = 6;
  model::InferenceModel m(mcfg, fx.vocab.size());
  NeuralSystem sys(m, fx.vocab);

  const auto* article = fx.ds.prompts_in(corpus::Split::Train)[0];
  corpus::ICOPrompt other = *article;
  other.intervention = "totallydifferent";
  other.outcome = "alsodifferent";
  const auto a = sys.predict(fx.ds, *article, {});
  const auto b = sys.predict(fx.ds, other, {});
  REQUIRE(a.token_scores.has_value());
  REQUIRE(b.token_scores.has_value());
  CHECK(*a.token_scores == *b.token_scores);  // bit-identical
}
