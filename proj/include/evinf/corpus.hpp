#pragma once

// Corpus data model and tooling: ingestion from record files + article store,
// validity filtering, fuzzy rationale alignment, inter-annotator agreement,
// split-count verification, and the seeded synthetic corpus generator.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evinf/common.hpp"
#include "evinf/preprocess.hpp"

namespace evinf::corpus {

// integer codes follow the -1 / 0 / +1 convention
enum class Label : int {
  SigDecreased = -1,
  NoSigDiff = 0,
  SigIncreased = 1,
};

// dense index used for logits and confusion matrices
inline int label_index(Label l) { return int(l) + 1; }
inline Label label_from_index(int idx) { return Label(idx - 1); }
std::optional<Label> label_from_code(int code);
const char* label_name(Label l);

enum class Split { Train, Dev, Test };
const char* split_name(Split s);
std::optional<Split> split_from_name(const std::string& name);

struct ICOPrompt {
  int64_t prompt_id = 0;
  std::string article_id;
  std::string intervention;
  std::string comparator;
  std::string outcome;

  bool operator==(const ICOPrompt&) const = default;
};

struct AnnotationRecord {
  int64_t prompt_id = 0;
  int user_id = 0;                   // 0 = prompt generator, >0 = annotator
  std::optional<Label> label;        // nullopt = marked invalid by the worker
  std::string rationale;
  std::optional<size_t> evidence_start;
  std::optional<size_t> evidence_end;
  bool label_valid = true;           // verifier flags
  bool rationale_valid = true;

  bool operator==(const AnnotationRecord&) const = default;
};

struct EvidenceSpan {
  size_t start = 0;
  size_t end = 0;
  std::vector<bool> token_mask;  // aligned to the article tokenization
};

// token_mask marks tokens whose character span intersects [start, end)
EvidenceSpan make_evidence_span(const prep::ProcessedDocument& doc, size_t start, size_t end);

struct Dataset {
  std::map<std::string, prep::ProcessedDocument> articles;
  std::vector<ICOPrompt> prompts;
  std::vector<AnnotationRecord> records;
  std::map<std::string, Split> split;  // per article

  const ICOPrompt* find_prompt(int64_t prompt_id) const;
  const prep::ProcessedDocument* find_article(const std::string& article_id) const;
  std::vector<const AnnotationRecord*> records_for(int64_t prompt_id) const;

  // the verified prompt-generator label (user 0 with label_valid), if any;
  // this is the gold label used for training and evaluation
  std::optional<Label> gold_label(int64_t prompt_id) const;
  // gold evidence span from the generator record's offsets, if present
  std::optional<EvidenceSpan> gold_evidence(int64_t prompt_id) const;

  std::vector<const ICOPrompt*> prompts_in(Split s) const;

  bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestError {
  size_t row = 0;  // 1-based data row
  std::string message;
};

struct IngestResult {
  Dataset dataset;
  std::vector<IngestError> errors;
  std::vector<int64_t> degenerate_prompts;  // prompts with < 2 records
};

// One row per record; prompt fields repeat across a prompt's rows.
struct RecordRow {
  int64_t prompt_id = 0;
  std::string article_id;
  std::string intervention, comparator, outcome;
  std::string label_code;  // "-1" / "0" / "1" / "invalid"
  int user_id = 0;
  std::string rationale;
  std::optional<size_t> evidence_start, evidence_end;
  bool label_valid = true;
  bool rationale_valid = true;
};

IngestResult ingest(const std::vector<RecordRow>& rows,
                    const std::map<std::string, std::string>& article_texts,
                    const std::map<std::string, Split>& splits = {});

// Directory layout: articles/<id>.txt|.xml, records.jsonl or records.csv,
// prompts.jsonl, splits.jsonl (optional; articles default to Train).
IngestResult ingest_dir(const std::string& dir);

std::vector<RecordRow> read_record_rows_jsonl(const std::string& records_path,
                                              const std::string& prompts_path);
std::vector<RecordRow> read_record_rows_csv(const std::string& path);

void serialize(const Dataset& ds, const std::string& dir);
void write_records_csv(const Dataset& ds, const std::string& path);

// Removes prompts marked invalid (a verified record with an invalid-label
// marker), prompts whose records were all label-rejected or all
// rationale-rejected by the verifier, and individual records with
// label_valid = false. Idempotent.
Dataset filter_valid(const Dataset& ds);

// ---------------------------------------------------------------------------
// Fuzzy rationale alignment
// ---------------------------------------------------------------------------

struct AlignResult {
  bool aligned = false;  // false when best score < threshold
  size_t start = 0;
  size_t end = 0;
  double score = 0.0;  // 1 - levenshtein / max-length
};

// Best window of article_text under normalized edit similarity, searching
// window lengths within +-20% of the rationale length. Exact substrings
// short-circuit to score 1.0 at their first occurrence.
AlignResult locate_rationale(const std::string& article_text, const std::string& rationale,
                             double threshold = 0.75, double length_tolerance = 0.20);

size_t levenshtein(const std::string& a, const std::string& b);

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

// Nominal Krippendorff's alpha over units with >= 2 labels each (units with
// fewer are ignored). Throws NumericalError when expected disagreement is
// zero (all labels identical).
double krippendorff_alpha(const std::vector<std::vector<int>>& units);

// units = prompts, labels = all valid record labels
double dataset_agreement(const Dataset& ds);

// ---------------------------------------------------------------------------
// Split counts
// ---------------------------------------------------------------------------

struct SplitCounts {
  long prompts = 0;
  long articles = 0;
  long labels[3] = {0, 0, 0};  // indexed by label_index of the gold label
};

struct SplitExpectation {
  std::optional<long> prompts, articles;
  std::optional<long> labels[3];
};

struct SplitReport {
  SplitCounts counts[3];  // Train, Dev, Test
  bool checked = false;
  bool pass = true;
  std::vector<std::string> failures;
};

SplitReport verify_split_counts(const Dataset& ds,
                                const std::map<Split, SplitExpectation>& expected = {});

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct SynthConfig {
  int articles = 10;
  int prompts_per_article = 4;       // > 5 is an error
  double conflict_fraction = 0.67;   // articles whose prompts carry differing labels
  int filler_sentences = 8;
  uint64_t seed = 1;
  // entity / filler pools; defaults supplied when empty
  std::vector<std::string> interventions, comparators, outcomes, filler_words;
};

// Deterministic templated articles with one planted evidence sentence per
// prompt; emits gold labels, rationales, exact offsets and splits (80/10/10
// by article).
Dataset generate_synthetic(const SynthConfig& config);

}  // namespace evinf::corpus
