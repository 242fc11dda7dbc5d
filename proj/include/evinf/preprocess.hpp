#pragma once

// Article text preparation: XML stripping, rule-based sentence splitting with
// decimal/abbreviation guards, lowercasing tokenizer, and the capped
// frequency vocabulary.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "evinf/common.hpp"

namespace evinf::prep {

struct Span {
  size_t start = 0;
  size_t end = 0;  // exclusive
};

struct Token {
  size_t start = 0;
  size_t end = 0;
  std::string surface;  // lowercased
};

struct ProcessedDocument {
  std::string text;
  std::vector<Span> sentences;
  std::vector<Token> tokens;

  // index of the sentence containing character position pos, if any
  std::optional<size_t> sentence_at(size_t pos) const;
  // token indices whose span lies inside sentence s
  std::vector<size_t> tokens_in_sentence(size_t s) const;

  bool operator==(const ProcessedDocument&) const = default;
};

bool operator==(const Span&, const Span&);
bool operator==(const Token&, const Token&);

// Removes all markup in document order, decodes common entities, scrubs any
// stray tag-like fragments that survive decoding (malformed docs leave
// literal "<p>" behind), and collapses whitespace runs to single spaces.
std::string strip_xml(const std::string& xml);

// Splits at {. ! ?} followed by whitespace and an uppercase letter or digit,
// except inside decimal numbers or after a known abbreviation.
std::vector<Span> split_sentences(const std::string& text,
                                  const std::set<std::string>& abbreviations);
std::vector<Span> split_sentences(const std::string& text);

// Lowercased tokens; splits on whitespace and punctuation; decimals like
// "0.05" stay single tokens; punctuation becomes its own token.
std::vector<Token> tokenize(const std::string& text);

// sentence split + tokenize over already-clean text
ProcessedDocument process_text(const std::string& text);
ProcessedDocument process_text(const std::string& text, const std::set<std::string>& abbreviations);

const std::set<std::string>& default_abbreviations();
std::set<std::string> load_term_file(const std::string& path);  // one term per line, '#' comments

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kOovId = 1;

  Vocabulary() = default;

  int id(const std::string& token) const;   // OOV id for unseen tokens
  int size() const { return int(id_to_token_.size()); }  // includes PAD/OOV
  const std::string& token(int id) const { return id_to_token_[size_t(id)]; }
  uint64_t hash() const;  // order-sensitive content hash for checkpoints

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  // top-`cap` tokens by frequency, ties broken lexicographically
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_streams, int cap);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  void push(const std::string& tok);
};

}  // namespace evinf::prep
