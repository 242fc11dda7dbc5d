#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "evinf/preprocess.hpp"
#include "test_util.hpp"

using namespace evinf;
using namespace evinf::prep;

TEST_CASE("strip_xml") {
  SUBCASE("tags removed, section text in order") {
    CHECK(strip_xml("<sec><title>A</title><p>b c</p></sec>") == "A b c");
  }
  SUBCASE("empty input gives empty output") { CHECK(strip_xml("") == ""); }
  SUBCASE("stray literal <p> from escaped markup is removed") {
    CHECK(strip_xml("<sec>before &lt;p&gt; after</sec>") == "before after");
    CHECK(strip_xml("x &lt;/p&gt; y") == "x y");
  }
  SUBCASE("nested sub-sections follow their parent's leading text") {
    const std::string xml =
        "<sec><title>Methods</title><p>outer text</p>"
        "<sec><title>Design</title><p>inner text</p></sec><p>tail</p></sec>";
    CHECK(strip_xml(xml) == "Methods outer text Design inner text tail");
  }
  SUBCASE("entities decode and comparisons survive") {
    CHECK(strip_xml("<p>p &lt; 0.05 &amp; n &gt; 30</p>") == "p < 0.05 & n > 30");
  }
  SUBCASE("comments and processing instructions vanish") {
    CHECK(strip_xml("<?xml version=\"1.0\"?><!-- note --><p>kept</p>") == "kept");
  }
  SUBCASE("never emits '<' adjacent to an ASCII letter") {
    const std::vector<std::string> inputs = {
        "<sec><p>a&lt;b&gt;c</p></sec>",
        "broken <p unclosed",
        "text &lt;p&gt; more &lt;sec id=\"1\"&gt; tail",
        "< p> spaced <p >x</p>",
        "a &lt; b and p&lt;0.01",
    };
    for (const auto& in : inputs) {
      const std::string out = strip_xml(in);
      for (size_t i = 0; i + 1 < out.size(); ++i) {
        const bool bad = out[i] == '<' && std::isalpha((unsigned char)out[i + 1]);
        CHECK_FALSE(bad);
      }
    }
  }
  SUBCASE("whitespace collapses to single spaces") {
    CHECK(strip_xml("<p>a\n\n  b\tc</p>") == "a b c");
  }
}

namespace {

// hand-segmented fixture: each entry is one sentence
const std::vector<std::string>& fixture_sentences() {
  static const std::vector<std::string> s = {
      "The trial enrolled 240 adults with type 2 diabetes.",
      "Mean dose was 0.5 mg.",
      "Next visits occurred weekly.",
      "The difference was significant (p = 0.03).",
      "No adverse events were attributed to treatment!",
      "Was the effect durable?",
      "Baseline glycemia averaged 7.4 mmol per liter.",
      "10 patients withdrew consent.",
      "Dalvexor vs. placebo showed no change in weight.",
      "Results are summarized (see Fig. 2) for both arms.",
      "Smith et al. reported similar findings.",
      "Blood pressure fell by 12.5 mm Hg.",
      "A total of 98 percent completed follow up.",
      "The primary outcome improved (p < 0.001).",
      "Secondary outcomes were unchanged (p > 0.2).",
      "Treatment lasted 26 weeks.",
      "The committee approved the protocol in 2015.",
      "Randomization used a 1:1 ratio.",
      "Adherence exceeded 90 percent in both groups.",
      "Serum levels peaked at 3.8 ng per ml.",
      "Hospitalizations decreased by half.",
      "The hazard ratio was 0.82.",
      "Confidence intervals excluded unity.",
      "Pain scores dropped 2.1 points on average.",
      "Nausea was the most common complaint.",
      "Dosing began at 1.8 mg daily.",
      "Two sites failed the audit.",
      "Enrollment closed early for efficacy.",
      "The placebo arm received saline.",
      "Costs averaged 410.75 dollars per patient.",
      "Renal function remained stable.",
      "3 serious events required review.",
      "Mortality did not differ (p = 0.44).",
      "Quality of life improved modestly.",
      "The trial was registered prospectively.",
      "Samples were assayed in duplicate.",
      "Mean age was 57.3 years.",
      "Women comprised 48 percent of participants.",
      "The washout period lasted 14 days.",
      "Investigators remained blinded throughout.",
      "One site deviated from protocol.",
      "Sensitivity analyses confirmed the result.",
      "Missing data were imputed conservatively.",
      "The number needed to treat was 9.",
      "Follow up reached 97.5 percent.",
      "Biomarkers correlated with response.",
      "Headache resolved without intervention.",
      "The data safety board met quarterly.",
      "Final analysis used intention to treat.",
      "Conclusions were tempered by small samples.",
  };
  return s;
}

}  // namespace

TEST_CASE("split_sentences") {
  SUBCASE("simple two-sentence split") {
    const auto spans = split_sentences("A b. C d.");
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].start == 0);
    CHECK(spans[0].end == 4);
    CHECK(spans[1].start == 5);
    CHECK(spans[1].end == 9);
  }
  SUBCASE("decimal guard keeps 0.5 intact") {
    const std::string text = "mean 0.5 mg. Next point.";
    const auto spans = split_sentences(text);
    REQUIRE(spans.size() == 2);
    CHECK(text.substr(spans[0].start, spans[0].end - spans[0].start) == "mean 0.5 mg.");
  }
  SUBCASE("parenthesized statistic stays inside its sentence") {
    const std::string text = "difference (p = 0.03). Next one.";
    const auto spans = split_sentences(text);
    REQUIRE(spans.size() == 2);
    CHECK(text.substr(spans[0].start, spans[0].end - spans[0].start) ==
          "difference (p = 0.03).");
  }
  SUBCASE("abbreviations do not split") {
    const auto spans = split_sentences("Dalvexor vs. Placebo improved. Smith et al. Reported it.");
    REQUIRE(spans.size() == 2);
  }
  SUBCASE("no terminator yields one sentence") {
    const auto spans = split_sentences("no stop here");
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].end == 12);
  }
  SUBCASE("fifty-sentence fixture segments exactly") {
    std::string text;
    std::vector<Span> expected;
    for (const auto& s : fixture_sentences()) {
      if (!text.empty()) text += ' ';
      expected.push_back({text.size(), text.size() + s.size()});
      text += s;
    }
    const auto spans = split_sentences(text);
    REQUIRE(spans.size() == expected.size());
    for (size_t i = 0; i < spans.size(); ++i) {
      CHECK(spans[i].start == expected[i].start);
      CHECK(spans[i].end == expected[i].end);
    }
  }
}

TEST_CASE("tokenize") {
  SUBCASE("comparator expressions split correctly") {
    const auto toks = tokenize("P<0.001");
    REQUIRE(toks.size() == 3);
    CHECK(toks[0].surface == "p");
    CHECK(toks[1].surface == "<");
    CHECK(toks[2].surface == "0.001");
  }
  SUBCASE("drug dosage") {
    const auto toks = tokenize("Liraglutide (1.8 mg)");
    REQUIRE(toks.size() == 5);
    CHECK(toks[0].surface == "liraglutide");
    CHECK(toks[1].surface == "(");
    CHECK(toks[2].surface == "1.8");
    CHECK(toks[3].surface == "mg");
    CHECK(toks[4].surface == ")");
  }
  SUBCASE("empty text") { CHECK(tokenize("").empty()); }
  SUBCASE("spans reconstruct surfaces") {
    const std::string text = "Aspirin reduced risk by 12.5% (p = 0.004).";
    for (const auto& t : tokenize(text)) {
      std::string sub = text.substr(t.start, t.end - t.start);
      std::transform(sub.begin(), sub.end(), sub.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      CHECK(sub == t.surface);
    }
  }
  SUBCASE("idempotent over its own lowercased join") {
    const std::string text = "Mean 0.5 mg, twice daily (n = 34); see Fig. 2!";
    const auto once = tokenize(text);
    std::string joined;
    for (const auto& t : once) {
      if (!joined.empty()) joined += ' ';
      joined += t.surface;
    }
    const auto twice = tokenize(joined);
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i) CHECK(once[i].surface == twice[i].surface);
  }
}

TEST_CASE("processed document invariants") {
  std::string text;
  for (const auto& s : fixture_sentences()) {
    if (!text.empty()) text += ' ';
    text += s;
  }
  const auto doc = process_text(text);

  SUBCASE("sentences are ordered, disjoint, in range") {
    for (size_t i = 0; i < doc.sentences.size(); ++i) {
      CHECK(doc.sentences[i].start < doc.sentences[i].end);
      CHECK(doc.sentences[i].end <= doc.text.size());
      if (i > 0) CHECK(doc.sentences[i].start >= doc.sentences[i - 1].end);
    }
  }
  SUBCASE("every token lies inside exactly one sentence") {
    for (const auto& tok : doc.tokens) {
      int containing = 0;
      for (const auto& s : doc.sentences)
        if (tok.start >= s.start && tok.end <= s.end) ++containing;
      CHECK(containing == 1);
    }
  }
}

TEST_CASE("vocabulary") {
  SUBCASE("cap of one keeps only the winner") {
    const auto v = Vocabulary::build({{"a", "a", "b"}}, 1);
    CHECK(v.size() == 3);  // pad, oov, a
    CHECK(v.id("a") == 2);
    CHECK(v.id("b") == Vocabulary::kOovId);
  }
  SUBCASE("unseen tokens map to OOV") {
    const auto v = Vocabulary::build({{"a", "a", "b"}}, 2);
    CHECK(v.id("zzz") == Vocabulary::kOovId);
    CHECK(v.size() == 4);  // pad, oov, a, b
  }
  SUBCASE("non-positive cap is rejected") {
    CHECK_THROWS_AS(Vocabulary::build({{"a"}}, 0), std::invalid_argument);
  }
  SUBCASE("frequency ties break lexicographically") {
    // x and y tie at the cap boundary; x is admitted
    const auto v = Vocabulary::build({{"top", "top", "top", "y", "x"}}, 2);
    CHECK(v.size() == 4);
    CHECK(v.id("top") == 2);
    CHECK(v.id("x") == 3);
    CHECK(v.id("y") == Vocabulary::kOovId);
  }
  SUBCASE("save and load round-trip") {
    const auto v = Vocabulary::build({{"alpha", "beta", "alpha"}}, 10);
    const auto dir = testutil::scratch_dir("vocab");
    v.save(dir + "/vocab.txt");
    const auto loaded = Vocabulary::load(dir + "/vocab.txt");
    CHECK(loaded.size() == v.size());
    CHECK(loaded.id("alpha") == v.id("alpha"));
    CHECK(loaded.hash() == v.hash());
  }
}
