#pragma once

// Golden cases for the rule-based baseline, hand-traced through the scoring
// rules. Each case is a single evidence span interpreted against an ICO
// prompt. Shared by the unit suite and the acceptance suite.

#include <string>
#include <vector>

#include "evinf/corpus.hpp"

namespace golden {

struct Case {
  const char* sentence;
  const char* intervention;
  const char* comparator;
  const char* outcome;
  evinf::corpus::Label expected;
  const char* branch;  // which rule the case pins down
};

inline const std::vector<Case>& cases() {
  using L = evinf::corpus::Label;
  static const std::vector<Case> all = {
      // --- EQ form, mention present, significant -> direction ---
      {"Dalvexor significantly increased glycemia vs placebo (p = 0.01).",
       "dalvexor", "placebo", "glycemia", L::SigIncreased, "eq-sig-increase"},
      {"Dalvexor significantly decreased mortality compared with placebo (p = 0.003).",
       "dalvexor", "placebo", "mortality", L::SigDecreased, "eq-sig-decrease"},
      {"Treatment with dalvexor improved recovery scores (p = 0.021).",
       "dalvexor", "placebo", "recovery", L::SigIncreased, "eq-sig-improve"},
      {"Dalvexor lowered systolic pressure relative to usual care (p = 0.004).",
       "dalvexor", "usual care", "systolic pressure", L::SigDecreased, "eq-sig-lower"},

      // --- EQ form, mention present, non-significant ---
      {"Dalvexor changed composite scores (p = 0.41).",
       "dalvexor", "placebo", "composite scores", L::NoSigDiff, "eq-nonsig"},
      {"Dalvexor changed scores (p = 0.05).",
       "dalvexor", "placebo", "scores", L::NoSigDiff, "eq-exactly-0.05"},
      {"Placebo performed similarly on fatigue (p = 0.77).",
       "dalvexor", "placebo", "fatigue", L::NoSigDiff, "eq-nonsig-comparator-mention"},

      // --- EQ form, no mention: every p-value contributes ---
      {"No change was observed in the composite endpoint (p = 0.42).",
       "dalvexor", "placebo", "composite endpoint", L::NoSigDiff, "eq-no-mention-nonsig"},
      {"Overall symptom burden rose across arms (p = 0.02, p = 0.03).",
       "dalvexor", "placebo", "symptoms", L::SigIncreased, "eq-no-mention-two-sig"},
      {"Heterogeneous effects emerged (p = 0.2) and persisted (p = 0.01) after correction.",
       "dalvexor", "placebo", "effects", L::NoSigDiff, "eq-no-mention-tie"},

      // --- nearest-mention rule: only the closest EQ counts ---
      {"Dalvexor reduced pain (p = 0.02) and other outcomes were inconclusive in the remaining "
       "panels (p = 0.75).",
       "dalvexor", "placebo", "pain", L::SigDecreased, "nearest-eq-first"},
      {"Results were mixed overall (p = 0.60) across many sites and measures, yet placebo "
       "lagged noticeably (p = 0.01).",
       "dalvexor", "placebo", "results", L::SigIncreased, "nearest-eq-second"},
      {"Dalvexor raised response rates (p = 0.44) though subgroup shifts were seen elsewhere "
       "(p = 0.001).",
       "dalvexor", "placebo", "response", L::NoSigDiff, "nearest-eq-nonsig-wins"},

      // --- GT form ---
      {"Differences were not apparent between groups (p > 0.05).",
       "dalvexor", "placebo", "differences", L::NoSigDiff, "gt-single"},
      {"Neither fatigue (p > 0.3) nor nausea (p > 0.6) separated the arms.",
       "dalvexor", "placebo", "fatigue", L::NoSigDiff, "gt-double"},
      {"Dalvexor gave higher readings but this was unreliable (p > 0.9).",
       "dalvexor", "placebo", "readings", L::NoSigDiff, "gt-with-mention"},

      // --- LT form ---
      {"Mortality fell sharply under treatment (p < 0.001).",
       "dalvexor", "placebo", "mortality", L::SigDecreased, "lt-decrease"},
      {"Recovery scores improved under dalvexor (p < 0.05).",
       "dalvexor", "placebo", "recovery", L::SigIncreased, "lt-increase"},
      {"Both pain (p < 0.01) and nausea (p < 0.05) declined on treatment.",
       "dalvexor", "placebo", "pain", L::SigDecreased, "lt-double"},
      {"Hemoglobin was elevated at follow up (P < 0.01).",
       "dalvexor", "placebo", "hemoglobin", L::SigIncreased, "lt-uppercase-p"},

      // --- significant/non-significant tie goes to the majority class ---
      {"Alpha rose markedly (p < 0.01) but beta stayed flat (p > 0.5).",
       "dalvexor", "placebo", "alpha", L::NoSigDiff, "tie-lt-gt"},
      {"Pain decreased (p = 0.01) while appetite was steady (p = 0.30) this quarter.",
       "dalvexor", "placebo", "pain", L::NoSigDiff, "tie-two-eq-no-mention"},
      {"Dalvexor helped (p = 0.01) yet the pooled check was null (p > 0.2).",
       "dalvexor", "placebo", "scores", L::NoSigDiff, "tie-eq-gt-mention"},

      // --- no p-value at all: assume significant, use direction ---
      {"Dalvexor decreased headache frequency over twelve weeks.",
       "dalvexor", "placebo", "headache", L::SigDecreased, "no-p-decrease"},
      {"Dalvexor increased remission rates in the intention to treat set.",
       "dalvexor", "placebo", "remission", L::SigIncreased, "no-p-increase"},
      {"Dalvexor was administered once daily with breakfast.",
       "dalvexor", "placebo", "adherence", L::SigIncreased, "no-p-no-terms-default"},
      {"Scores increased early and then decreased by week six.",
       "dalvexor", "placebo", "scores", L::SigIncreased, "no-p-equal-terms-tie"},
      {"Enrollment improved prior to 2005.",
       "dalvexor", "placebo", "enrollment", L::SigIncreased, "no-p-prior-is-not-p"},
      {"Grip strength gained ground; twice the gain of controls.",
       "dalvexor", "placebo", "grip strength", L::SigIncreased, "no-p-gain"},
      {"Serum markers worsened, with worse profiles and fewer remissions.",
       "dalvexor", "placebo", "serum markers", L::SigDecreased, "no-p-decrease-majority"},

      // --- numeral forms ---
      {"The contrast was clear (p = .03) under dalvexor.",
       "dalvexor", "placebo", "contrast", L::SigIncreased, "numeral-leading-dot"},
      {"The contrast held (p = 1e-3) for dalvexor on retest.",
       "dalvexor", "placebo", "contrast", L::SigIncreased, "numeral-scientific"},
      {"An exact null came back (p = 0) for the dalvexor arm.",
       "dalvexor", "placebo", "null", L::SigIncreased, "numeral-zero"},
      {"Whitespace held up: p  =  0.05 for the dalvexor contrast.",
       "dalvexor", "placebo", "contrast", L::NoSigDiff, "numeral-spaced-operator"},
      {"Compact form p=0.004 appeared for dalvexor.",
       "dalvexor", "placebo", "form", L::SigIncreased, "numeral-compact"},
      {"A malformed value (p = n.s.) was reported alongside improved adherence.",
       "dalvexor", "placebo", "value", L::SigIncreased, "numeral-unparseable-skipped"},

      // --- direction lexicon coverage ---
      {"Readings were higher at week eight (p < 0.05).",
       "dalvexor", "placebo", "readings", L::SigIncreased, "dir-higher"},
      {"Levels were elevated beyond baseline (p < 0.01).",
       "dalvexor", "placebo", "levels", L::SigIncreased, "dir-elevated"},
      {"The index declined steadily (p < 0.02).",
       "dalvexor", "placebo", "index", L::SigDecreased, "dir-declined"},
      {"Episodes dropped by half (p < 0.001).",
       "dalvexor", "placebo", "episodes", L::SigDecreased, "dir-dropped"},
      {"Greater reduction was achieved on treatment (p < 0.001).",
       "dalvexor", "placebo", "reduction", L::SigDecreased, "dir-greater-reduction"},
      {"Visits were fewer and shorter (p < 0.04).",
       "dalvexor", "placebo", "visits", L::SigDecreased, "dir-fewer-shorter"},
      {"Function was better preserved with a superior profile (p < 0.05).",
       "dalvexor", "placebo", "function", L::SigIncreased, "dir-better-superior"},
      {"The span (p > 0.05) read as a plain null.",
       "dalvexor", "placebo", "span", L::NoSigDiff, "oracle-span-gt"},
      {"Rates diminished despite an improvement in adherence and a rise in visits (p < 0.01).",
       "dalvexor", "placebo", "rates", L::SigIncreased, "dir-majority-increase"},
  };
  return all;
}

}  // namespace golden
