#pragma once

// Data model for chunk-tagged corpora: tokens, sentences, IOB tag schemes,
// chunk spans, and the two column file formats (flat chunk tags and nested
// NP brackets).

#include <algorithm>
#include <compare>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chunkvote/error.hpp"

namespace chunkvote {

using Tags = std::vector<std::string>;

enum class TagScheme { IOB1, IOB2 };

inline std::string_view to_string(TagScheme s) { return s == TagScheme::IOB1 ? "iob1" : "iob2"; }

inline TagScheme parse_scheme(std::string_view name) {
  if (name == "iob1" || name == "IOB1") return TagScheme::IOB1;
  if (name == "iob2" || name == "IOB2") return TagScheme::IOB2;
  throw ConfigError("unknown tag scheme '" + std::string(name) + "' (expected iob1 or iob2)");
}

struct Token {
  std::string word;
  std::string pos;
  std::optional<std::string> chunk_tag;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;

  Tags tags() const {
    Tags out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.chunk_tag.value_or("O"));
    return out;
  }

  void set_tags(const Tags& tags) {
    if (tags.size() != tokens.size()) throw ContractError("tag count does not match sentence length");
    for (std::size_t i = 0; i < tags.size(); ++i) tokens[i].chunk_tag = tags[i];
  }

  bool labeled() const {
    return !tokens.empty() && std::all_of(tokens.begin(), tokens.end(),
                                          [](const Token& t) { return t.chunk_tag.has_value(); });
  }
};

struct Corpus {
  std::vector<Sentence> sentences;
  TagScheme scheme = TagScheme::IOB2;

  bool operator==(const Corpus&) const = default;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }
};

/// Half-open token interval [begin, end) carrying a chunk type.
struct ChunkSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string label;

  auto operator<=>(const ChunkSpan&) const = default;
  bool operator==(const ChunkSpan&) const = default;
};

struct NestedSentence {
  std::vector<Token> tokens;
  std::vector<ChunkSpan> spans;

  bool operator==(const NestedSentence&) const = default;
};

// ---------------------------------------------------------------------------
// Tags

struct TagParts {
  char prefix = 'O';  // 'O', 'B' or 'I'
  std::string_view type;
};

inline bool is_chunk_type(std::string_view type) {
  return !type.empty() && std::all_of(type.begin(), type.end(), [](unsigned char c) {
           return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
         });
}

inline std::optional<TagParts> split_tag(std::string_view tag) {
  if (tag == "O") return TagParts{'O', {}};
  if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) return std::nullopt;
  auto type = tag.substr(2);
  if (!is_chunk_type(type)) return std::nullopt;
  return TagParts{tag[0], type};
}

inline TagParts tag_parts(std::string_view tag) {
  auto parts = split_tag(tag);
  if (!parts) throw ParseError("malformed chunk tag '" + std::string(tag) + "'");
  return *parts;
}

/// Index of the first token violating `scheme`, if any. Throws ParseError on tag syntax errors.
inline std::optional<std::size_t> first_violation(const Tags& tags, TagScheme scheme) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto cur = tag_parts(tags[i]);
    if (cur.prefix == 'O') continue;
    std::optional<TagParts> prev;
    if (i > 0) prev = tag_parts(tags[i - 1]);
    bool prev_same = prev && prev->prefix != 'O' && prev->type == cur.type;
    if (scheme == TagScheme::IOB2) {
      if (cur.prefix == 'I' && !prev_same) return i;
    } else {
      if (cur.prefix == 'B' && !prev_same) return i;
    }
  }
  return std::nullopt;
}

inline bool valid_under(const Tags& tags, TagScheme scheme) { return !first_violation(tags, scheme); }

/// Chunk spans encoded by a tag sequence, sorted by begin.
///
/// Reading is lenient: an I-X that cannot continue an open X chunk opens a new
/// one, so predicted sequences with illegal transitions never fail. The scheme
/// does not change the result because B-X always opens a chunk.
inline std::vector<ChunkSpan> extract_chunks(const Tags& tags, TagScheme /*scheme*/ = TagScheme::IOB2) {
  std::vector<ChunkSpan> spans;
  std::optional<ChunkSpan> open;
  auto close = [&](std::size_t at) {
    if (open) {
      open->end = at;
      spans.push_back(std::move(*open));
      open.reset();
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto parts = tag_parts(tags[i]);
    if (parts.prefix == 'O') {
      close(i);
    } else if (parts.prefix == 'B' || !open || open->label != parts.type) {
      close(i);
      open = ChunkSpan{i, 0, std::string(parts.type)};
    }
  }
  close(tags.size());
  return spans;
}

/// Encodes non-overlapping spans as tags of length `length` under `scheme`.
inline Tags spans_to_tags(const std::vector<ChunkSpan>& spans, std::size_t length, TagScheme scheme) {
  Tags tags(length, "O");
  std::vector<ChunkSpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  std::size_t prev_end = 0;
  const std::string* prev_label = nullptr;
  for (const auto& s : sorted) {
    if (s.begin >= s.end || s.end > length) throw ContractError("span out of range");
    if (s.begin < prev_end) throw ContractError("overlapping spans cannot be encoded as IOB tags");
    bool adjacent_same = prev_label && prev_end == s.begin && *prev_label == s.label;
    bool use_b = scheme == TagScheme::IOB2 || adjacent_same;
    tags[s.begin] = (use_b ? "B-" : "I-") + s.label;
    for (std::size_t i = s.begin + 1; i < s.end; ++i) tags[i] = "I-" + s.label;
    prev_end = s.end;
    prev_label = &s.label;
  }
  return tags;
}

/// Rewrites tags valid under `from` into the equivalent sequence under `to`.
inline Tags convert_scheme(const Tags& tags, TagScheme from, TagScheme to) {
  if (auto bad = first_violation(tags, from)) {
    throw ValidationError("tag sequence invalid under " + std::string(to_string(from)) + " at token " +
                          std::to_string(*bad));
  }
  if (from == to) return tags;
  return spans_to_tags(extract_chunks(tags, from), tags.size(), to);
}

/// Canonical IOB2 form of an arbitrary (possibly illegal) tag sequence.
inline Tags repair_tags(const Tags& tags) { return spans_to_tags(extract_chunks(tags), tags.size(), TagScheme::IOB2); }

// ---------------------------------------------------------------------------
// Column format

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Calls fn(line, line_number) for each line; line numbers are 1-based.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, ++line_no);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

}  // namespace detail

inline void validate_sentence(const Sentence& s, TagScheme scheme, std::size_t sentence_index) {
  if (s.tokens.empty()) throw ValidationError("sentence " + std::to_string(sentence_index) + " is empty");
  if (!s.labeled()) return;
  if (auto bad = first_violation(s.tags(), scheme)) {
    throw ValidationError("sentence " + std::to_string(sentence_index) + ", token " + std::to_string(*bad) +
                          ": tag '" + *s.tokens[*bad].chunk_tag + "' violates " +
                          std::string(to_string(scheme)));
  }
}

inline void validate(const Corpus& c) {
  for (std::size_t i = 0; i < c.sentences.size(); ++i) validate_sentence(c.sentences[i], c.scheme, i);
}

/// Parses the `word pos [chunk_tag]` column format.
///
/// With `strict` off, tag sequences are only syntax-checked, which is what
/// system output needs: learners may emit transitions the scheme forbids.
inline Corpus parse_conll(std::string_view text, TagScheme scheme, int columns, bool strict = true) {
  if (columns != 2 && columns != 3) throw ConfigError("column count must be 2 or 3");
  Corpus corpus;
  corpus.scheme = scheme;
  Sentence current;
  auto flush = [&] {
    if (!current.tokens.empty()) corpus.sentences.push_back(std::move(current));
    current = Sentence{};
  };
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto fields = detail::split_fields(line);
    if (fields.empty()) {
      flush();
      return;
    }
    if (fields.size() != static_cast<std::size_t>(columns)) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                       " columns, found " + std::to_string(fields.size()));
    }
    Token tok{std::string(fields[0]), std::string(fields[1]), std::nullopt};
    if (columns == 3) {
      if (!split_tag(fields[2])) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed chunk tag '" + std::string(fields[2]) +
                         "'");
      }
      tok.chunk_tag = std::string(fields[2]);
    }
    current.tokens.push_back(std::move(tok));
  });
  flush();
  if (strict) validate(corpus);
  return corpus;
}

inline std::string write_conll(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) {
      out += t.word;
      out += ' ';
      out += t.pos;
      if (t.chunk_tag) {
        out += ' ';
        out += *t.chunk_tag;
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nested bracket format: `word pos bracket`, bracket = ("(" TYPE)* "*" ")"*

inline bool properly_nested(const std::vector<ChunkSpan>& spans) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      const auto& a = spans[i];
      const auto& b = spans[j];
      bool disjoint = a.end <= b.begin || b.end <= a.begin;
      bool a_in_b = b.begin <= a.begin && a.end <= b.end;
      bool b_in_a = a.begin <= b.begin && b.end <= a.end;
      if (!disjoint && !a_in_b && !b_in_a) return false;
    }
  }
  return true;
}

/// Outermost first: begin ascending, then longer spans first.
inline void sort_nested(std::vector<ChunkSpan>& spans) {
  std::sort(spans.begin(), spans.end(), [](const ChunkSpan& a, const ChunkSpan& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    if (a.end != b.end) return a.end > b.end;
    return a.label < b.label;
  });
}

inline std::vector<NestedSentence> parse_nested(std::string_view text) {
  std::vector<NestedSentence> out;
  NestedSentence current;
  std::vector<std::pair<std::size_t, std::string>> stack;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    if (!stack.empty()) {
      throw ParseError("sentence " + std::to_string(out.size()) + ": " + std::to_string(stack.size()) +
                       " unclosed bracket(s)");
    }
    sort_nested(current.spans);
    out.push_back(std::move(current));
    current = NestedSentence{};
  };

  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto fields = detail::split_fields(line);
    if (fields.empty()) {
      flush();
      return;
    }
    if (fields.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 columns, found " +
                       std::to_string(fields.size()));
    }
    std::string_view br = fields[2];
    std::size_t token_index = current.tokens.size();
    std::size_t star = br.find('*');
    if (star == std::string_view::npos || br.find('*', star + 1) != std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": bracket column needs exactly one '*'");
    }
    std::string_view openers = br.substr(0, star);
    while (!openers.empty()) {
      if (openers.front() != '(') throw ParseError("line " + std::to_string(line_no) + ": malformed opener");
      std::size_t next = openers.find('(', 1);
      std::string_view label = openers.substr(1, next == std::string_view::npos ? openers.npos : next - 1);
      if (!is_chunk_type(label)) throw ParseError("line " + std::to_string(line_no) + ": bad bracket label");
      stack.emplace_back(token_index, std::string(label));
      openers = next == std::string_view::npos ? std::string_view{} : openers.substr(next);
    }
    for (char c : br.substr(star + 1)) {
      if (c != ')') throw ParseError("line " + std::to_string(line_no) + ": malformed closer");
      if (stack.empty()) {
        throw ParseError("sentence " + std::to_string(out.size()) + ": closing bracket without opener at line " +
                         std::to_string(line_no));
      }
      current.spans.push_back(ChunkSpan{stack.back().first, token_index + 1, stack.back().second});
      stack.pop_back();
    }
    current.tokens.push_back(Token{std::string(fields[0]), std::string(fields[1]), std::nullopt});
  });
  flush();
  return out;
}

inline std::string write_nested(const std::vector<NestedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    std::vector<ChunkSpan> spans = s.spans;
    sort_nested(spans);
    if (!properly_nested(spans)) throw ContractError("spans are not properly nested");
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i].word;
      out += ' ';
      out += s.tokens[i].pos;
      out += ' ';
      for (const auto& sp : spans) {
        if (sp.begin == i) out += "(" + sp.label;
      }
      out += '*';
      for (const auto& sp : spans) {
        if (sp.end == i + 1) out += ')';
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << content;
}

}  // namespace chunkvote
