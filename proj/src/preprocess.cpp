#include "evinf/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace evinf::prep {

bool operator==(const Span& a, const Span& b) { return a.start == b.start && a.end == b.end; }
bool operator==(const Token& a, const Token& b) {
  return a.start == b.start && a.end == b.end && a.surface == b.surface;
}

std::optional<size_t> ProcessedDocument::sentence_at(size_t pos) const {
  for (size_t s = 0; s < sentences.size(); ++s)
    if (pos >= sentences[s].start && pos < sentences[s].end) return s;
  return std::nullopt;
}

std::vector<size_t> ProcessedDocument::tokens_in_sentence(size_t s) const {
  std::vector<size_t> out;
  const Span sp = sentences.at(s);
  for (size_t t = 0; t < tokens.size(); ++t)
    if (tokens[t].start >= sp.start && tokens[t].end <= sp.end) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// XML stripping
// ---------------------------------------------------------------------------

namespace {

bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

// decodes the entity starting at s[i] (s[i] == '&'); returns decoded string
// and advances i past it, or returns nullopt leaving i untouched
std::optional<std::string> decode_entity(const std::string& s, size_t& i) {
  const size_t semi = s.find(';', i + 1);
  if (semi == std::string::npos || semi - i > 10) return std::nullopt;
  const std::string name = s.substr(i + 1, semi - i - 1);
  std::string out;
  if (name == "lt") out = "<";
  else if (name == "gt") out = ">";
  else if (name == "amp") out = "&";
  else if (name == "quot") out = "\"";
  else if (name == "apos") out = "'";
  else if (!name.empty() && name[0] == '#') {
    long code = 0;
    try {
      code = (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                 ? std::stol(name.substr(2), nullptr, 16)
                 : std::stol(name.substr(1));
    } catch (...) {
      return std::nullopt;
    }
    if (code <= 0 || code > 0x10FFFF) return std::nullopt;
    // encode as UTF-8
    unsigned long cp = (unsigned long)code;
    if (cp < 0x80) out += char(cp);
    else if (cp < 0x800) {
      out += char(0xC0 | (cp >> 6));
      out += char(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += char(0xE0 | (cp >> 12));
      out += char(0x80 | ((cp >> 6) & 0x3F));
      out += char(0x80 | (cp & 0x3F));
    } else {
      out += char(0xF0 | (cp >> 18));
      out += char(0x80 | ((cp >> 12) & 0x3F));
      out += char(0x80 | ((cp >> 6) & 0x3F));
      out += char(0x80 | (cp & 0x3F));
    }
  } else {
    return std::nullopt;
  }
  i = semi + 1;
  return out;
}

// true if s[i..] starts a tag-like sequence: '<' then letter, '/', '!' or '?'
bool looks_like_tag(const std::string& s, size_t i) {
  if (i + 1 >= s.size()) return false;
  const char c = s[i + 1];
  return is_ascii_letter(c) || c == '/' || c == '!' || c == '?';
}

void append_collapsed(std::string& out, const std::string& piece) {
  for (char c : piece) {
    if (std::isspace((unsigned char)c)) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    } else {
      out += c;
    }
  }
}

// removes remaining "<p>"-style fragments that entity decoding reintroduced
std::string scrub_stray_tags(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<' && i + 1 < s.size() &&
        (is_ascii_letter(s[i + 1]) || (s[i + 1] == '/' && i + 2 < s.size() && is_ascii_letter(s[i + 2])))) {
      const size_t close = s.find('>', i + 1);
      bool taggy = close != std::string::npos && close - i <= 64;
      if (taggy) {
        for (size_t k = i + 1; k < close && taggy; ++k) {
          const char c = s[k];
          taggy = is_ascii_letter(c) || std::isdigit((unsigned char)c) || c == ' ' ||
                  c == '/' || c == '=' || c == '"' || c == '\'' || c == '-' || c == '_' || c == ':';
        }
      }
      if (taggy) {
        i = close + 1;
        if (!out.empty() && out.back() != ' ') out += ' ';
        continue;
      }
      ++i;  // drop the lone '<' so no '<' ever touches a letter
      continue;
    }
    out += s[i++];
  }
  return out;
}

std::string collapse_ws(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  append_collapsed(out, s);
  while (!out.empty() && out.back() == ' ') out.pop_back();
  size_t b = 0;
  while (b < out.size() && out[b] == ' ') ++b;
  return out.substr(b);
}

}  // namespace

std::string strip_xml(const std::string& xml) {
  std::string text;
  text.reserve(xml.size());
  size_t i = 0;
  const size_t n = xml.size();
  while (i < n) {
    const char c = xml[i];
    if (c == '<' && looks_like_tag(xml, i)) {
      if (xml.compare(i, 4, "<!--") == 0) {
        const size_t end = xml.find("-->", i + 4);
        i = end == std::string::npos ? n : end + 3;
      } else if (xml.compare(i, 9, "<![CDATA[") == 0) {
        const size_t end = xml.find("]]>", i + 9);
        const size_t stop = end == std::string::npos ? n : end;
        append_collapsed(text, xml.substr(i + 9, stop - (i + 9)));
        i = end == std::string::npos ? n : end + 3;
      } else {
        const size_t end = xml.find('>', i + 1);
        i = end == std::string::npos ? n : end + 1;
      }
      // tag boundaries separate text segments
      if (!text.empty() && text.back() != ' ') text += ' ';
    } else if (c == '&') {
      size_t j = i;
      if (auto decoded = decode_entity(xml, j)) {
        append_collapsed(text, *decoded);
        i = j;
      } else {
        text += c;
        ++i;
      }
    } else {
      if (std::isspace((unsigned char)c)) {
        if (!text.empty() && text.back() != ' ') text += ' ';
      } else {
        text += c;
      }
      ++i;
    }
  }
  return collapse_ws(scrub_stray_tags(text));
}

// ---------------------------------------------------------------------------
// Sentence splitting
// ---------------------------------------------------------------------------

const std::set<std::string>& default_abbreviations() {
  static const std::set<std::string> abbrevs = {
      "vs.", "e.g.", "i.e.", "fig.", "figs.", "al.", "et al.", "dr.", "prof.",
      "no.", "nos.", "ref.", "refs.", "approx.", "ca.", "cf.", "resp.",
      "tab.", "eq.", "eqs.", "sec.", "min.", "max.", "std.", "vol.",
  };
  return abbrevs;
}

std::set<std::string> load_term_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open term file: " + path);
  std::set<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    size_t b = line.find_first_not_of(' ');
    if (b == std::string::npos || line[b] == '#') continue;
    std::string term = line.substr(b);
    std::transform(term.begin(), term.end(), term.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    terms.insert(term);
  }
  return terms;
}

namespace {

// word (letters and interior dots) ending just before position i of the '.'
bool ends_with_abbreviation(const std::string& text, size_t dot,
                            const std::set<std::string>& abbrevs) {
  size_t b = dot;
  while (b > 0) {
    const char c = text[b - 1];
    if (is_ascii_letter(c) || c == '.') --b;
    else break;
  }
  if (b == dot) return false;
  std::string word = text.substr(b, dot - b) + ".";
  std::transform(word.begin(), word.end(), word.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (abbrevs.count(word)) return true;
  // also try with the preceding word attached ("et al.")
  if (b >= 2 && text[b - 1] == ' ') {
    size_t b2 = b - 1;
    while (b2 > 0 && is_ascii_letter(text[b2 - 1])) --b2;
    if (b2 < b - 1) {
      std::string two = text.substr(b2, dot - b2) + ".";
      std::transform(two.begin(), two.end(), two.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      if (abbrevs.count(two)) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<Span> split_sentences(const std::string& text,
                                  const std::set<std::string>& abbrevs) {
  std::vector<Span> spans;
  const size_t n = text.size();
  size_t start = 0;
  while (start < n && std::isspace((unsigned char)text[start])) ++start;
  if (start >= n) return spans;

  for (size_t i = start; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 >= n || !std::isspace((unsigned char)text[i + 1])) continue;
    size_t k = i + 1;
    while (k < n && std::isspace((unsigned char)text[k])) ++k;
    if (k >= n) break;  // trailing terminator, handled by the final span
    const unsigned char next = (unsigned char)text[k];
    if (!(std::isupper(next) || std::isdigit(next))) continue;
    if (c == '.' && ends_with_abbreviation(text, i, abbrevs)) continue;
    spans.push_back({start, i + 1});
    start = k;
    i = k - 1;
  }
  size_t end = n;
  while (end > start && std::isspace((unsigned char)text[end - 1])) --end;
  if (end > start) spans.push_back({start, end});
  return spans;
}

std::vector<Span> split_sentences(const std::string& text) {
  return split_sentences(text, default_abbreviations());
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

namespace {

// non-ASCII bytes count as word characters so UTF-8 sequences stay intact
bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  const size_t n = text.size();
  size_t i = 0;
  while (i < n) {
    const unsigned char c = (unsigned char)text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    size_t j = i;
    if (is_word_char(c)) {
      while (j < n) {
        const unsigned char cj = (unsigned char)text[j];
        if (is_word_char(cj)) {
          ++j;
        } else if (cj == '.' && j > i && std::isdigit((unsigned char)text[j - 1]) &&
                   j + 1 < n && std::isdigit((unsigned char)text[j + 1])) {
          ++j;  // decimal point inside a numeral
        } else {
          break;
        }
      }
    } else {
      j = i + 1;  // punctuation, one char per token
    }
    std::string surface = text.substr(i, j - i);
    std::transform(surface.begin(), surface.end(), surface.begin(), [](unsigned char ch) {
      return ch < 0x80 ? char(std::tolower(ch)) : char(ch);
    });
    tokens.push_back({i, j, std::move(surface)});
    i = j;
  }
  return tokens;
}

ProcessedDocument process_text(const std::string& text, const std::set<std::string>& abbrevs) {
  ProcessedDocument doc;
  doc.text = text;
  doc.sentences = split_sentences(text, abbrevs);
  doc.tokens = tokenize(text);
  return doc;
}

ProcessedDocument process_text(const std::string& text) {
  return process_text(text, default_abbreviations());
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

void Vocabulary::push(const std::string& tok) {
  token_to_id_.emplace(tok, int(id_to_token_.size()));
  id_to_token_.push_back(tok);
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kOovId : it->second;
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& t : id_to_token_) {
    h = fnv1a(t.data(), t.size(), h);
    h = fnv1a("\n", 1, h);
  }
  return h;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_streams, int cap) {
  if (cap < 1) throw std::invalid_argument("Vocabulary::build: cap must be >= 1");
  std::map<std::string, long> freq;
  for (const auto& stream : token_streams)
    for (const std::string& t : stream) ++freq[t];

  std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.push("<pad>");
  v.push("<oov>");
  const size_t take = std::min(items.size(), size_t(cap));
  for (size_t i = 0; i < take; ++i) v.push(items[i].first);
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  out << id_to_token_.size() << "\n";
  for (const std::string& t : id_to_token_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  size_t count = 0;
  in >> count;
  std::string line;
  std::getline(in, line);
  Vocabulary v;
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw DataError("truncated vocabulary file: " + path);
    v.push(line);
  }
  return v;
}

}  // namespace evinf::prep
