#include "evinf/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace evinf::corpus {

std::optional<Label> label_from_code(int code) {
  switch (code) {
    case -1: return Label::SigDecreased;
    case 0: return Label::NoSigDiff;
    case 1: return Label::SigIncreased;
    default: return std::nullopt;
  }
}

const char* label_name(Label l) {
  switch (l) {
    case Label::SigDecreased: return "significantly decreased";
    case Label::NoSigDiff: return "no significant difference";
    case Label::SigIncreased: return "significantly increased";
  }
  return "?";
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "dev" || name == "val" || name == "validation") return Split::Dev;
  if (name == "test") return Split::Test;
  return std::nullopt;
}

EvidenceSpan make_evidence_span(const prep::ProcessedDocument& doc, size_t start, size_t end) {
  EvidenceSpan span;
  span.start = start;
  span.end = end;
  span.token_mask.resize(doc.tokens.size(), false);
  for (size_t t = 0; t < doc.tokens.size(); ++t)
    span.token_mask[t] = doc.tokens[t].start < end && doc.tokens[t].end > start;
  return span;
}

const ICOPrompt* Dataset::find_prompt(int64_t prompt_id) const {
  for (const auto& p : prompts)
    if (p.prompt_id == prompt_id) return &p;
  return nullptr;
}

const prep::ProcessedDocument* Dataset::find_article(const std::string& article_id) const {
  auto it = articles.find(article_id);
  return it == articles.end() ? nullptr : &it->second;
}

std::vector<const AnnotationRecord*> Dataset::records_for(int64_t prompt_id) const {
  std::vector<const AnnotationRecord*> out;
  for (const auto& r : records)
    if (r.prompt_id == prompt_id) out.push_back(&r);
  return out;
}

std::optional<Label> Dataset::gold_label(int64_t prompt_id) const {
  for (const auto& r : records)
    if (r.prompt_id == prompt_id && r.user_id == 0 && r.label_valid && r.label)
      return r.label;
  return std::nullopt;
}

std::optional<EvidenceSpan> Dataset::gold_evidence(int64_t prompt_id) const {
  const ICOPrompt* p = find_prompt(prompt_id);
  if (!p) return std::nullopt;
  const prep::ProcessedDocument* doc = find_article(p->article_id);
  if (!doc) return std::nullopt;
  for (const auto& r : records)
    if (r.prompt_id == prompt_id && r.user_id == 0 && r.evidence_start && r.evidence_end)
      return make_evidence_span(*doc, *r.evidence_start, *r.evidence_end);
  return std::nullopt;
}

std::vector<const ICOPrompt*> Dataset::prompts_in(Split s) const {
  std::vector<const ICOPrompt*> out;
  for (const auto& p : prompts) {
    auto it = split.find(p.article_id);
    if (it != split.end() && it->second == s) out.push_back(&p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

static IngestResult ingest_impl(const std::vector<RecordRow>& rows,
                                const std::map<std::string, std::string>& article_texts,
                                const std::map<std::string, Split>& splits,
                                const std::vector<ICOPrompt>* predefined_prompts) {
  IngestResult res;
  Dataset& ds = res.dataset;

  std::set<int64_t> known_prompts;
  if (predefined_prompts) {
    for (const auto& p : *predefined_prompts) {
      if (p.intervention.empty() || p.comparator.empty() || p.outcome.empty())
        throw DataError("prompt " + std::to_string(p.prompt_id) + " has empty ICO text");
      if (!known_prompts.insert(p.prompt_id).second)
        throw DataError("duplicate prompt_id " + std::to_string(p.prompt_id));
      ds.prompts.push_back(p);
    }
  }

  auto ensure_article = [&](const std::string& id) -> bool {
    if (ds.articles.count(id)) return true;
    auto it = article_texts.find(id);
    if (it == article_texts.end()) return false;
    ds.articles.emplace(id, prep::process_text(it->second));
    return true;
  };
  if (predefined_prompts) {
    for (const auto& p : *predefined_prompts)
      if (!ensure_article(p.article_id))
        throw DataError("prompt " + std::to_string(p.prompt_id) + " references unknown article " +
                        p.article_id);
  }

  size_t row_no = 0;
  for (const RecordRow& row : rows) {
    ++row_no;
    auto fail = [&](const std::string& msg) { res.errors.push_back({row_no, msg}); };

    if (row.user_id < 0) {
      fail("negative user_id");
      continue;
    }

    std::optional<Label> label;
    {
      std::string code = row.label_code;
      std::transform(code.begin(), code.end(), code.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (code.empty() || code == "invalid" || code == "null") {
        label = std::nullopt;
      } else {
        try {
          size_t used = 0;
          const int v = std::stoi(code, &used);
          if (used != code.size()) throw std::invalid_argument(code);
          label = label_from_code(v);
          if (!label) throw std::invalid_argument(code);
        } catch (...) {
          fail("unparseable label code '" + row.label_code + "'");
          continue;
        }
      }
    }

    if (!known_prompts.count(row.prompt_id)) {
      if (row.intervention.empty() || row.comparator.empty() || row.outcome.empty()) {
        fail("no prompt metadata for prompt_id " + std::to_string(row.prompt_id));
        continue;
      }
      if (!ensure_article(row.article_id)) {
        fail("unknown article '" + row.article_id + "'");
        continue;
      }
      ds.prompts.push_back({row.prompt_id, row.article_id, row.intervention, row.comparator,
                            row.outcome});
      known_prompts.insert(row.prompt_id);
    }

    const ICOPrompt* prompt = ds.find_prompt(row.prompt_id);
    const auto& doc = ds.articles.at(prompt->article_id);
    AnnotationRecord rec;
    rec.prompt_id = row.prompt_id;
    rec.user_id = row.user_id;
    rec.label = label;
    rec.rationale = row.rationale;
    rec.label_valid = row.label_valid;
    rec.rationale_valid = row.rationale_valid;
    if (row.evidence_start && row.evidence_end) {
      if (!(*row.evidence_start < *row.evidence_end && *row.evidence_end <= doc.text.size())) {
        fail("evidence offsets out of range");
        continue;
      }
      rec.evidence_start = row.evidence_start;
      rec.evidence_end = row.evidence_end;
    }
    ds.records.push_back(std::move(rec));
  }

  for (const auto& [id, doc] : ds.articles) {
    auto it = splits.find(id);
    ds.split[id] = it == splits.end() ? Split::Train : it->second;
  }

  std::map<int64_t, int> counts;
  for (const auto& r : ds.records) ++counts[r.prompt_id];
  for (const auto& p : ds.prompts)
    if (counts[p.prompt_id] < 2) res.degenerate_prompts.push_back(p.prompt_id);
  return res;
}

IngestResult ingest(const std::vector<RecordRow>& rows,
                    const std::map<std::string, std::string>& article_texts,
                    const std::map<std::string, Split>& splits) {
  return ingest_impl(rows, article_texts, splits, nullptr);
}

// ---------------------------------------------------------------------------
// JSONL / CSV / directory IO
// ---------------------------------------------------------------------------

namespace {

json parse_json_line(const std::string& line, const std::string& path, size_t line_no) {
  try {
    return json::parse(line);
  } catch (const std::exception& e) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<json> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_json_line(line, path, line_no));
  }
  return out;
}

std::string label_code_from_json(const json& j) {
  if (!j.contains("label") || j["label"].is_null()) return "invalid";
  if (j["label"].is_number_integer()) return std::to_string(j["label"].get<int>());
  return j["label"].get<std::string>();
}

}  // namespace

std::vector<RecordRow> read_record_rows_jsonl(const std::string& records_path,
                                              const std::string& prompts_path) {
  std::map<int64_t, ICOPrompt> prompts;
  for (const json& j : read_jsonl(prompts_path)) {
    ICOPrompt p{j.at("prompt_id").get<int64_t>(), j.at("article_id").get<std::string>(),
                j.at("intervention").get<std::string>(), j.at("comparator").get<std::string>(),
                j.at("outcome").get<std::string>()};
    prompts[p.prompt_id] = p;
  }
  std::vector<RecordRow> rows;
  for (const json& j : read_jsonl(records_path)) {
    RecordRow r;
    r.prompt_id = j.at("prompt_id").get<int64_t>();
    r.user_id = j.at("user_id").get<int>();
    r.label_code = label_code_from_json(j);
    r.rationale = j.value("rationale", std::string());
    if (j.contains("evidence_start") && !j["evidence_start"].is_null()) {
      r.evidence_start = j["evidence_start"].get<size_t>();
      r.evidence_end = j.at("evidence_end").get<size_t>();
    }
    r.label_valid = j.value("label_valid", true);
    r.rationale_valid = j.value("rationale_valid", true);
    if (auto it = prompts.find(r.prompt_id); it != prompts.end()) {
      r.article_id = it->second.article_id;
      r.intervention = it->second.intervention;
      r.comparator = it->second.comparator;
      r.outcome = it->second.outcome;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  size_t i = 0;
  const size_t n = content.size();
  auto end_field = [&]() { row.push_back(std::move(field)); field.clear(); };
  auto end_row = [&]() {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(row);
    row.clear();
  };
  while (i < n) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
    } else {
      field += c;
    }
    ++i;
  }
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

bool parse_bool(const std::string& s, bool fallback) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  return fallback;
}

}  // namespace

std::vector<RecordRow> read_record_rows_csv(const std::string& path) {
  const auto rows = parse_csv(path);
  if (rows.empty()) return {};
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (const char* required : {"prompt_id", "article_id", "intervention", "comparator",
                               "outcome", "user_id", "label"})
    if (!col.count(required)) throw DataError(path + ": missing CSV column '" + required + "'");

  auto get = [&](const std::vector<std::string>& r, const char* name) -> std::string {
    auto it = col.find(name);
    if (it == col.end() || it->second >= r.size()) return {};
    return r[it->second];
  };

  std::vector<RecordRow> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    RecordRow row;
    try {
      row.prompt_id = std::stoll(get(r, "prompt_id"));
      row.user_id = std::stoi(get(r, "user_id"));
    } catch (...) {
      throw DataError(path + ": bad numeric field in row " + std::to_string(i + 1));
    }
    row.article_id = get(r, "article_id");
    row.intervention = get(r, "intervention");
    row.comparator = get(r, "comparator");
    row.outcome = get(r, "outcome");
    row.label_code = get(r, "label");
    row.rationale = get(r, "rationale");
    const std::string es = get(r, "evidence_start"), ee = get(r, "evidence_end");
    if (!es.empty() && !ee.empty()) {
      try {
        row.evidence_start = std::stoull(es);
        row.evidence_end = std::stoull(ee);
      } catch (...) {
        // left unset; ingest reports offsets only if both parse
      }
    }
    row.label_valid = parse_bool(get(r, "label_valid"), true);
    row.rationale_valid = parse_bool(get(r, "rationale_valid"), true);
    out.push_back(std::move(row));
  }
  return out;
}

IngestResult ingest_dir(const std::string& dir) {
  const fs::path root(dir);
  const fs::path articles_dir = root / "articles";
  if (!fs::is_directory(articles_dir)) throw DataError("no articles/ directory under " + dir);

  std::map<std::string, std::string> texts;
  for (const auto& entry : fs::directory_iterator(articles_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path p = entry.path();
    std::ifstream in(p, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (p.extension() == ".xml" || p.extension() == ".nxml")
      content = prep::strip_xml(content);
    texts[p.stem().string()] = std::move(content);
  }

  std::map<std::string, Split> splits;
  if (fs::exists(root / "splits.jsonl")) {
    for (const json& j : read_jsonl((root / "splits.jsonl").string())) {
      auto s = split_from_name(j.at("split").get<std::string>());
      if (!s) throw DataError("unknown split name in splits.jsonl");
      splits[j.at("article_id").get<std::string>()] = *s;
    }
  }

  std::vector<RecordRow> rows;
  std::vector<ICOPrompt> prompts;
  bool have_prompts_file = fs::exists(root / "prompts.jsonl");
  if (fs::exists(root / "records.jsonl")) {
    if (!have_prompts_file) throw DataError("records.jsonl without prompts.jsonl under " + dir);
    for (const json& j : read_jsonl((root / "prompts.jsonl").string()))
      prompts.push_back({j.at("prompt_id").get<int64_t>(), j.at("article_id").get<std::string>(),
                         j.at("intervention").get<std::string>(),
                         j.at("comparator").get<std::string>(),
                         j.at("outcome").get<std::string>()});
    rows = read_record_rows_jsonl((root / "records.jsonl").string(),
                                  (root / "prompts.jsonl").string());
    return ingest_impl(rows, texts, splits, &prompts);
  }
  if (fs::exists(root / "records.csv")) {
    rows = read_record_rows_csv((root / "records.csv").string());
    return ingest_impl(rows, texts, splits, nullptr);
  }
  throw DataError("no records.jsonl or records.csv under " + dir);
}

void serialize(const Dataset& ds, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "articles");

  for (const auto& [id, doc] : ds.articles) {
    std::ofstream out(root / "articles" / (id + ".txt"), std::ios::binary);
    if (!out) throw DataError("cannot write article file for " + id);
    out << doc.text;
  }

  std::ofstream pf(root / "prompts.jsonl");
  for (const auto& p : ds.prompts) {
    json j{{"prompt_id", p.prompt_id},
           {"article_id", p.article_id},
           {"intervention", p.intervention},
           {"comparator", p.comparator},
           {"outcome", p.outcome}};
    pf << j.dump() << "\n";
  }

  std::ofstream rf(root / "records.jsonl");
  for (const auto& r : ds.records) {
    json j{{"prompt_id", r.prompt_id},
           {"user_id", r.user_id},
           {"rationale", r.rationale},
           {"label_valid", r.label_valid},
           {"rationale_valid", r.rationale_valid}};
    if (r.label) j["label"] = int(*r.label);
    else j["label"] = nullptr;
    if (r.evidence_start) {
      j["evidence_start"] = *r.evidence_start;
      j["evidence_end"] = *r.evidence_end;
    }
    rf << j.dump() << "\n";
  }

  std::ofstream sf(root / "splits.jsonl");
  for (const auto& [id, s] : ds.split) {
    json j{{"article_id", id}, {"split", split_name(s)}};
    sf << j.dump() << "\n";
  }
}

void write_records_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "prompt_id,article_id,intervention,comparator,outcome,user_id,label,rationale,"
         "evidence_start,evidence_end,label_valid,rationale_valid\n";
  for (const auto& r : ds.records) {
    const ICOPrompt* p = ds.find_prompt(r.prompt_id);
    if (!p) continue;
    out << r.prompt_id << ',' << csv_escape(p->article_id) << ','
        << csv_escape(p->intervention) << ',' << csv_escape(p->comparator) << ','
        << csv_escape(p->outcome) << ',' << r.user_id << ','
        << (r.label ? std::to_string(int(*r.label)) : std::string("invalid")) << ','
        << csv_escape(r.rationale) << ','
        << (r.evidence_start ? std::to_string(*r.evidence_start) : std::string()) << ','
        << (r.evidence_end ? std::to_string(*r.evidence_end) : std::string()) << ','
        << (r.label_valid ? "true" : "false") << ','
        << (r.rationale_valid ? "true" : "false") << "\n";
  }
}

// ---------------------------------------------------------------------------
// Validity filtering
// ---------------------------------------------------------------------------

Dataset filter_valid(const Dataset& ds) {
  std::set<int64_t> drop;
  std::map<int64_t, bool> any_label_ok, any_rationale_ok, has_records;
  for (const auto& r : ds.records) {
    has_records[r.prompt_id] = true;
    // a verified invalid-prompt marker removes the prompt outright
    if (!r.label && r.label_valid) drop.insert(r.prompt_id);
    if (r.label_valid && r.label) any_label_ok[r.prompt_id] = true;
    if (r.rationale_valid) any_rationale_ok[r.prompt_id] = true;
  }
  for (const auto& [pid, _] : has_records) {
    if (!any_label_ok[pid]) drop.insert(pid);        // verifier rejected all answers
    if (!any_rationale_ok[pid]) drop.insert(pid);    // ... or all rationales
  }

  Dataset out;
  for (const auto& p : ds.prompts)
    if (!drop.count(p.prompt_id) && has_records.count(p.prompt_id)) out.prompts.push_back(p);
  for (const auto& r : ds.records)
    if (!drop.count(r.prompt_id) && r.label_valid && r.label) out.records.push_back(r);

  std::set<std::string> used;
  for (const auto& p : out.prompts) used.insert(p.article_id);
  for (const auto& [id, doc] : ds.articles)
    if (used.count(id)) out.articles.emplace(id, doc);
  for (const auto& [id, s] : ds.split)
    if (used.count(id)) out.split[id] = s;
  return out;
}

// ---------------------------------------------------------------------------
// Fuzzy alignment
// ---------------------------------------------------------------------------

size_t levenshtein(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

AlignResult locate_rationale(const std::string& text, const std::string& rationale,
                             double threshold, double length_tolerance) {
  if (rationale.empty()) throw std::invalid_argument("locate_rationale: empty rationale");

  if (const size_t pos = text.find(rationale); pos != std::string::npos)
    return {true, pos, pos + rationale.size(), 1.0};

  const size_t lr = rationale.size();
  const size_t lo = std::max<size_t>(1, size_t(std::ceil(double(lr) * (1.0 - length_tolerance))));
  const size_t hi = std::max(lo, size_t(std::floor(double(lr) * (1.0 + length_tolerance))));

  AlignResult best;
  best.score = -1.0;
  if (text.empty()) return {false, 0, 0, 0.0};

  // One DP per offset gives the edit distance between the rationale and every
  // window prefix; the final row holds distances for all candidate lengths.
  std::vector<int> prev(hi + 1), cur(hi + 1);
  for (size_t off = 0; off + lo <= text.size(); ++off) {
    const size_t wmax = std::min(hi, text.size() - off);
    for (size_t k = 0; k <= wmax; ++k) prev[k] = int(k);
    for (size_t i = 1; i <= lr; ++i) {
      cur[0] = int(i);
      const char ra = rationale[i - 1];
      for (size_t k = 1; k <= wmax; ++k) {
        const int sub = prev[k - 1] + (ra == text[off + k - 1] ? 0 : 1);
        cur[k] = std::min({prev[k] + 1, cur[k - 1] + 1, sub});
      }
      std::swap(prev, cur);
    }
    for (size_t k = lo; k <= wmax; ++k) {
      const double sim = 1.0 - double(prev[k]) / double(std::max(k, lr));
      if (sim > best.score) {
        best.score = sim;
        best.start = off;
        best.end = off + k;
      }
    }
  }
  if (best.score < 0.0) return {false, 0, 0, 0.0};
  best.aligned = best.score >= threshold;
  return best;
}

// ---------------------------------------------------------------------------
// Krippendorff's alpha (nominal)
// ---------------------------------------------------------------------------

double krippendorff_alpha(const std::vector<std::vector<int>>& units) {
  std::map<int, int> value_index;
  size_t pairable_units = 0;
  for (const auto& u : units) {
    if (u.size() >= 2) ++pairable_units;
    for (int v : u) value_index.emplace(v, int(value_index.size()));
  }
  if (units.size() < 2 || pairable_units == 0)
    throw std::invalid_argument("krippendorff_alpha: need >= 2 units and a unit with >= 2 labels");

  const size_t k = value_index.size();
  std::vector<double> coincidence(k * k, 0.0);
  for (const auto& u : units) {
    const size_t m = u.size();
    if (m < 2) continue;
    const double w = 1.0 / double(m - 1);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < m; ++j)
        if (i != j) coincidence[value_index[u[i]] * k + value_index[u[j]]] += w;
  }

  std::vector<double> margin(k, 0.0);
  double n = 0.0, observed_disagreement = 0.0;
  for (size_t c = 0; c < k; ++c)
    for (size_t d = 0; d < k; ++d) {
      margin[c] += coincidence[c * k + d];
      if (c != d) observed_disagreement += coincidence[c * k + d];
    }
  for (double m : margin) n += m;

  double expected = 0.0;
  for (size_t c = 0; c < k; ++c)
    for (size_t d = 0; d < k; ++d)
      if (c != d) expected += margin[c] * margin[d];
  if (expected <= 0.0) throw NumericalError("degenerate agreement data: all labels identical");
  return 1.0 - (n - 1.0) * observed_disagreement / expected;
}

double dataset_agreement(const Dataset& ds) {
  std::map<int64_t, std::vector<int>> units;
  for (const auto& r : ds.records)
    if (r.label) units[r.prompt_id].push_back(int(*r.label));
  std::vector<std::vector<int>> u;
  u.reserve(units.size());
  for (auto& [_, labels] : units) u.push_back(std::move(labels));
  return krippendorff_alpha(u);
}

// ---------------------------------------------------------------------------
// Split counts
// ---------------------------------------------------------------------------

SplitReport verify_split_counts(const Dataset& ds,
                                const std::map<Split, SplitExpectation>& expected) {
  SplitReport rep;
  std::set<std::string> seen_articles[3];
  for (const auto& p : ds.prompts) {
    auto it = ds.split.find(p.article_id);
    if (it == ds.split.end()) continue;
    const int s = int(it->second);
    ++rep.counts[s].prompts;
    seen_articles[s].insert(p.article_id);
    if (auto gold = ds.gold_label(p.prompt_id)) ++rep.counts[s].labels[label_index(*gold)];
  }
  for (int s = 0; s < 3; ++s) rep.counts[s].articles = long(seen_articles[s].size());

  if (expected.empty()) return rep;
  rep.checked = true;
  auto check = [&](const std::string& what, long got, std::optional<long> want) {
    if (want && got != *want) {
      rep.pass = false;
      rep.failures.push_back(what + ": expected " + std::to_string(*want) + ", got " +
                             std::to_string(got));
    }
  };
  for (const auto& [s, exp] : expected) {
    const auto& c = rep.counts[int(s)];
    const std::string base = split_name(s);
    check(base + " prompts", c.prompts, exp.prompts);
    check(base + " articles", c.articles, exp.articles);
    for (int i = 0; i < 3; ++i)
      check(base + " label " + std::to_string(i - 1), c.labels[i], exp.labels[i]);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& default_interventions() {
  static const std::vector<std::string> v = {
      "dalvexor", "prenatol", "miradol",  "veltrazine", "octreptin", "lansofen",
      "curtazol", "beprodine", "xantrelin", "fosamine",  "degralin",  "teprovast"};
  return v;
}
const std::vector<std::string>& default_comparators() {
  static const std::vector<std::string> v = {
      "placebo",  "salinate", "metrofen", "usodone",  "glipristat", "controlex",
      "basodrine", "nalvetol", "peridral", "simvactin", "dorbazine",  "ethralin"};
  return v;
}
const std::vector<std::string>& default_outcomes() {
  static const std::vector<std::string> v = {
      "glycemia", "mortality", "nausea",  "fatigue",   "headache", "insomnia",
      "dyspnea",  "pruritus",  "anemia",  "dizziness", "edema",    "cough"};
  return v;
}
const std::vector<std::string>& default_filler_words() {
  static const std::vector<std::string> v = {
      "patients", "study",    "trial",    "baseline",  "week",      "visit",    "cohort",
      "group",    "protocol", "clinic",   "followup",  "screening", "consent",  "center",
      "nurse",    "record",   "sample",   "dose",      "tablet",    "capsule",  "morning",
      "evening",  "daily",    "schedule", "review",    "committee", "monitor",  "report",
      "site",     "enrollment", "criteria", "history",  "exam",      "laboratory", "panel",
      "routine",  "staff",    "session",  "interval",  "registry"};
  return v;
}

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = char(std::toupper((unsigned char)s[0]));
  return s;
}

std::string format_p(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

template <typename T>
std::vector<T> sample_without_replacement(const std::vector<T>& pool, size_t n, Rng& rng) {
  std::vector<size_t> idx(pool.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<T> out;
  for (size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  return out;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  if (config.prompts_per_article > 5)
    throw std::invalid_argument("generate_synthetic: at most 5 prompts per article");
  if (config.prompts_per_article < 1 || config.articles < 1)
    throw std::invalid_argument("generate_synthetic: need >= 1 article and prompt");

  const auto& ipool = config.interventions.empty() ? default_interventions() : config.interventions;
  const auto& cpool = config.comparators.empty() ? default_comparators() : config.comparators;
  const auto& opool = config.outcomes.empty() ? default_outcomes() : config.outcomes;
  const auto& fillers = config.filler_words.empty() ? default_filler_words() : config.filler_words;
  const size_t ppa = size_t(config.prompts_per_article);
  if (ipool.size() < ppa || cpool.size() < ppa || opool.size() < ppa)
    throw std::invalid_argument("generate_synthetic: entity pools smaller than prompts per article");

  Rng rng(config.seed);
  Dataset ds;
  int64_t next_prompt_id = 1;

  for (int a = 0; a < config.articles; ++a) {
    const std::string article_id = "PMC" + std::to_string(9000000 + a);

    const auto ivs = sample_without_replacement(ipool, ppa, rng);
    const auto cps = sample_without_replacement(cpool, ppa, rng);
    const auto ocs = sample_without_replacement(opool, ppa, rng);

    std::vector<int> labels(ppa);
    const bool conflicting = ppa >= 2 && rng.uniform() < config.conflict_fraction;
    if (conflicting) {
      for (auto& l : labels) l = int(rng.index(3)) - 1;
      if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; }))
        labels[1] = labels[0] == 1 ? -1 : labels[0] + 1;
    } else {
      const int l = int(rng.index(3)) - 1;
      std::fill(labels.begin(), labels.end(), l);
    }

    // build sentences: planted evidence interleaved among fillers
    struct Sentence {
      std::string text;
      int prompt_slot = -1;  // -1 for filler
    };
    std::vector<Sentence> sentences;
    for (int f = 0; f < config.filler_sentences; ++f) {
      const size_t len = 8 + rng.index(5);
      std::string s;
      for (size_t w = 0; w < len; ++w) {
        std::string word = fillers[rng.index(fillers.size())];
        if (w == 0) word = capitalized(word);
        s += word;
        s += ' ';
      }
      s += '.';
      sentences.push_back({s, -1});
    }
    for (size_t p = 0; p < ppa; ++p) {
      std::string verb;
      double pv;
      if (labels[p] == 1) {
        verb = "significantly increased";
        pv = double(1 + rng.index(49)) / 1000.0;
      } else if (labels[p] == -1) {
        verb = "significantly decreased";
        pv = double(1 + rng.index(49)) / 1000.0;
      } else {
        verb = "showed no difference";
        pv = double(60 + rng.index(891)) / 1000.0;
      }
      std::string s = capitalized(ivs[p]) + " " + verb + " vs " + cps[p] + " for " + ocs[p] +
                      " (p = " + format_p(pv) + ").";
      sentences.push_back({s, int(p)});
    }
    rng.shuffle(sentences);

    std::string text;
    std::vector<std::pair<size_t, size_t>> evidence(ppa);  // per prompt slot
    for (size_t s = 0; s < sentences.size(); ++s) {
      if (s) text += ' ';
      const size_t start = text.size();
      text += sentences[s].text;
      if (sentences[s].prompt_slot >= 0)
        evidence[size_t(sentences[s].prompt_slot)] = {start, text.size()};
    }

    ds.articles.emplace(article_id, prep::process_text(text));
    for (size_t p = 0; p < ppa; ++p) {
      const int64_t pid = next_prompt_id++;
      ds.prompts.push_back({pid, article_id, ivs[p], cps[p], ocs[p]});
      const auto [estart, eend] = evidence[p];
      const std::string rationale = text.substr(estart, eend - estart);
      const Label gold = *label_from_code(labels[p]);
      AnnotationRecord generator{pid, 0, gold, rationale, estart, eend, true, true};
      AnnotationRecord annotator{pid, 1 + int(rng.index(3)), gold, rationale, estart, eend,
                                 true, true};
      ds.records.push_back(std::move(generator));
      ds.records.push_back(std::move(annotator));
    }
  }

  // 80/10/10 split by article, seed-deterministic
  std::vector<std::string> ids;
  ids.reserve(ds.articles.size());
  for (const auto& [id, _] : ds.articles) ids.push_back(id);
  rng.shuffle(ids);
  const size_t n = ids.size();
  const size_t n_dev = n / 10, n_test = n / 10;
  for (size_t i = 0; i < n; ++i) {
    Split s = Split::Train;
    if (i < n_dev) s = Split::Dev;
    else if (i < n_dev + n_test) s = Split::Test;
    ds.split[ids[i]] = s;
  }
  return ds;
}

}  // namespace evinf::corpus
