#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "evinf/heuristics.hpp"
#include "golden_heuristics.hpp"
#include "test_util.hpp"

using namespace evinf;
using namespace evinf::heur;
using corpus::Label;

namespace {

corpus::ICOPrompt prompt_of(const char* i, const char* c, const char* o) {
  return {1, "A1", i, c, o};
}

}  // namespace

TEST_CASE("rank_sentences") {
  const auto doc = prep::process_text(
      "Placebo was given to controls. Dalvexor improved glycemia markedly. The weather was mild.");
  SUBCASE("most distinct prompt words wins") {
    CHECK(rank_sentences(doc, prompt_of("dalvexor", "placebo", "glycemia")) == 1);
  }
  SUBCASE("ties break toward the earlier sentence") {
    CHECK(rank_sentences(doc, prompt_of("placebo", "weather", "unrelated")) == 0);
  }
  SUBCASE("zero overlap everywhere returns index 0") {
    CHECK(rank_sentences(doc, prompt_of("xyzzy", "qwerty", "asdf")) == 0);
  }
  SUBCASE("distinct words count once each") {
    const auto d2 = prep::process_text(
        "Glycemia glycemia glycemia here. Dalvexor placebo appeared together.");
    // sentence 0 repeats one prompt word; sentence 1 has two distinct ones
    CHECK(rank_sentences(d2, prompt_of("dalvexor", "placebo", "glycemia")) == 1);
  }
  SUBCASE("stopwords are ignored") {
    const auto d3 = prep::process_text("The of and with. Dalvexor appeared.");
    CHECK(rank_sentences(d3, prompt_of("dalvexor", "the of", "and with")) == 1);
  }
}

TEST_CASE("extract_p_values") {
  SUBCASE("mixed forms in order") {
    const auto m = extract_p_values("no change (p=0.42) but improved (P < 0.01)");
    REQUIRE(m.size() == 2);
    CHECK(m[0].form == PForm::EQ);
    CHECK(m[0].value == doctest::Approx(0.42));
    CHECK(m[1].form == PForm::LT);
    CHECK(m[1].value == doctest::Approx(0.01));
    CHECK(m[0].position < m[1].position);
  }
  SUBCASE("interior whitespace is ignored") {
    const auto m = extract_p_values("p  =  0.05");
    REQUIRE(m.size() == 1);
    CHECK(m[0].form == PForm::EQ);
    CHECK(m[0].value == doctest::Approx(0.05));
  }
  SUBCASE("'prior to 2005' is not a p-value") {
    CHECK(extract_p_values("prior to 2005").empty());
  }
  SUBCASE("unparseable numeral is skipped") {
    CHECK(extract_p_values("p = n.s. throughout").empty());
  }
  SUBCASE("scientific and bare forms parse") {
    const auto m = extract_p_values("p < 1e-3, p = .2, p > 1");
    REQUIRE(m.size() == 3);
    CHECK(m[0].value == doctest::Approx(0.001));
    CHECK(m[1].value == doctest::Approx(0.2));
    CHECK(m[2].value == doctest::Approx(1.0));
  }
  SUBCASE("positions strictly increase") {
    const auto m = extract_p_values("p=0.1 p=0.2 p=0.3 p=0.4");
    REQUIRE(m.size() == 4);
    for (size_t i = 1; i < m.size(); ++i) CHECK(m[i].position > m[i - 1].position);
  }
  SUBCASE("letters before p block the match") {
    CHECK(extract_p_values("bp = 90 over group = 5").empty());
  }
}

TEST_CASE("score_labels") {
  const auto p = prompt_of("dalvexor", "placebo", "scores");
  SUBCASE("EQ below threshold near a mention is significant") {
    const std::string s = "dalvexor shifted scores (p = 0.03)";
    const auto tally = score_labels(s, extract_p_values(s), p);
    CHECK(tally.sig_different == 1);
    CHECK(tally.no_sig_diff == 0);
  }
  SUBCASE("GT adds a non-significant point") {
    const std::string s = "flat result (p > 0.05)";
    const auto tally = score_labels(s, extract_p_values(s), p);
    CHECK(tally.no_sig_diff == 1);
    CHECK(tally.sig_different == 0);
  }
  SUBCASE("without a mention every EQ contributes") {
    const std::string s = "effects (p = 0.2) and (p = 0.01) were noted";
    const auto tally = score_labels(s, extract_p_values(s), p);
    CHECK(tally.no_sig_diff == 1);
    CHECK(tally.sig_different == 1);
  }
  SUBCASE("with a mention only the nearest EQ contributes") {
    const std::string s =
        "dalvexor acted (p = 0.01) though remote checks in other panels stayed flat (p = 0.9)";
    const auto tally = score_labels(s, extract_p_values(s), p);
    CHECK(tally.sig_different == 1);
    CHECK(tally.no_sig_diff == 0);
  }
}

TEST_CASE("infer_direction") {
  CHECK(infer_direction("significantly increased") == Label::SigIncreased);
  CHECK(infer_direction("reduced") == Label::SigDecreased);
  CHECK(infer_direction("no polarity words at all") == Label::SigIncreased);
  CHECK(infer_direction("it declined and dropped despite one gain") == Label::SigDecreased);
  CHECK(infer_direction("rose and fell") == Label::SigIncreased);  // tie
}

TEST_CASE("heuristic_classify composes the stages") {
  SUBCASE("planted evidence sentence is selected and interpreted") {
    const auto doc = prep::process_text(
        "Enrollment data were stable. Dalvexor significantly increased glycemia vs placebo for "
        "week twelve (p = 0.01). Funding was disclosed.");
    const auto res = heuristic_classify(doc, prompt_of("dalvexor", "placebo", "glycemia"));
    CHECK(res.sentence_index == 1);
    CHECK(res.label == Label::SigIncreased);
  }
  SUBCASE("tie between sig and no-sig returns the majority class") {
    const auto doc = prep::process_text(
        "Dalvexor moved scores (p < 0.01) although placebo was similar overall (p > 0.5).");
    const auto res = heuristic_classify(doc, prompt_of("dalvexor", "placebo", "scores"));
    CHECK(res.label == Label::NoSigDiff);
  }
  SUBCASE("no p-value falls back to the direction rule") {
    const auto doc = prep::process_text("Dalvexor decreased scores through week six.");
    const auto res = heuristic_classify(doc, prompt_of("dalvexor", "placebo", "scores"));
    CHECK(res.label == Label::SigDecreased);
  }
}

TEST_CASE("heuristic_classify_oracle") {
  const auto p = prompt_of("dalvexor", "placebo", "scores");
  CHECK(heuristic_classify_oracle("(p > 0.05)", p) == Label::NoSigDiff);
  CHECK(heuristic_classify_oracle("greater reduction (p < 0.001)", p) == Label::SigDecreased);
  CHECK_THROWS_AS(heuristic_classify_oracle("", p), std::invalid_argument);
}

TEST_CASE("golden suite passes exactly") {
  for (const auto& c : golden::cases()) {
    CAPTURE(c.branch);
    CAPTURE(c.sentence);
    const auto got = heuristic_classify_oracle(
        c.sentence, prompt_of(c.intervention, c.comparator, c.outcome));
    CHECK(got == c.expected);
  }
  CHECK(golden::cases().size() >= 40);
}

TEST_CASE("lexicon file loading") {
  const auto dir = testutil::scratch_dir("lexicon");
  {
    std::ofstream out(dir + "/lex.txt");
    out << "# direction terms\n[increase]\nboosted\nsoared\n[decrease]\nsank\n";
  }
  const auto lex = load_lexicon(dir + "/lex.txt");
  CHECK(lex.increase_terms.count("boosted") == 1);
  CHECK(lex.decrease_terms.count("sank") == 1);
  CHECK(infer_direction("it sank", lex) == Label::SigDecreased);

  SUBCASE("overlapping sections are rejected") {
    std::ofstream out(dir + "/bad.txt");
    out << "[increase]\nup\n[decrease]\nup\n";
    out.close();
    CHECK_THROWS_AS(load_lexicon(dir + "/bad.txt"), DataError);
  }
}

TEST_CASE("determinism and purity") {
  const auto doc = prep::process_text(
      "Alpha beta gamma. Dalvexor raised scores against placebo (p = 0.02). Closing note.");
  const auto p = prompt_of("dalvexor", "placebo", "scores");
  const auto a = heuristic_classify(doc, p);
  const auto b = heuristic_classify(doc, p);
  CHECK(a.label == b.label);
  CHECK(a.sentence_index == b.sentence_index);
}
