#include "deid/corpus.hpp"

#include <algorithm>
#include <set>

#include "deid/error.hpp"
#include "deid/text.hpp"

namespace deid {

std::optional<int> LabelSet::type_index(std::string_view phi_type) {
  for (int k = 0; k < num_types(); ++k)
    if (kTypes[k] == phi_type) return k;
  return std::nullopt;
}

std::string LabelSet::tag_name(int tag) {
  if (tag == kOutside) return "O";
  return std::string(is_begin(tag) ? "B-" : "I-") + std::string(kTypes[type_of(tag)]);
}

namespace {

std::vector<Token> raw_tokens(std::u32string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (is_punct(c)) {
      tokens.push_back({i, i + 1, std::u32string(1, c)});
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j]) && !is_punct(text[j])) ++j;
      tokens.push_back({i, j, std::u32string(text.substr(i, j - i))});
      i = j;
    }
  }
  return tokens;
}

bool ends_abbreviation(std::u32string_view text, std::size_t period) {
  for (auto abbr : kAbbreviations) {
    std::size_t len = abbr.size();
    if (period + 1 < len) continue;
    std::size_t from = period + 1 - len;
    if (text.substr(from, len) != abbr) continue;
    if (from == 0 || !is_alnum(text[from - 1])) return true;
  }
  return false;
}

bool is_break(std::u32string_view text, const Token& cur, const Token& next) {
  for (std::size_t p = cur.end; p < next.start; ++p)
    if (text[p] == U'\n') return true;
  if (cur.end == next.start) return false;
  if (cur.surface != U"." && cur.surface != U"!" && cur.surface != U"?") return false;
  if (!is_upper(next.surface.front())) return false;
  if (cur.surface == U"." && ends_abbreviation(text, cur.start)) return false;
  return true;
}

std::vector<Sentence> group(std::u32string_view text, const std::vector<Token>& tokens,
                            const std::vector<Annotation>& protect) {
  std::vector<Sentence> sentences;
  if (tokens.empty()) return sentences;
  Sentence current;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    current.tokens.push_back(tokens[i]);
    if (i + 1 == tokens.size()) break;
    const Token& next = tokens[i + 1];
    if (!is_break(text, tokens[i], next)) continue;
    bool straddled = std::any_of(protect.begin(), protect.end(), [&](const Annotation& a) {
      return a.start < tokens[i].end && a.end > next.start;
    });
    if (straddled) continue;
    sentences.push_back(std::move(current));
    current = Sentence{};
  }
  sentences.push_back(std::move(current));
  return sentences;
}

} // namespace

std::vector<Sentence> tokenize(std::u32string_view text) { return group(text, raw_tokens(text), {}); }

std::vector<Sentence> segment(const Document& doc) {
  std::set<std::size_t> cuts;
  for (const auto& a : doc.annotations) {
    cuts.insert(a.start);
    cuts.insert(a.end);
  }
  std::vector<Token> tokens;
  for (const auto& tok : raw_tokens(doc.text)) {
    std::size_t from = tok.start;
    for (auto it = cuts.upper_bound(tok.start); it != cuts.end() && *it < tok.end; ++it) {
      tokens.push_back({from, *it, doc.text.substr(from, *it - from)});
      from = *it;
    }
    tokens.push_back({from, tok.end, doc.text.substr(from, tok.end - from)});
  }
  auto sentences = group(doc.text, tokens, doc.annotations);
  for (auto& s : sentences) {
    s.domain_id = doc.domain_id;
    s.doc_id = doc.id;
  }
  return sentences;
}

std::vector<Annotation> annotations_in(const Sentence& sentence, const std::vector<Annotation>& annotations) {
  std::vector<Annotation> out;
  if (sentence.tokens.empty()) return out;
  std::size_t lo = sentence.begin(), hi = sentence.end();
  for (const auto& a : annotations) {
    if (a.end <= lo || a.start >= hi) continue;
    if (a.start < lo || a.end > hi)
      throw Error("annotation crosses sentence boundary in document " + sentence.doc_id + " at offset " +
                  std::to_string(a.start));
    out.push_back(a);
  }
  return out;
}

std::vector<int> encode_bio(const Sentence& sentence, const std::vector<Annotation>& annotations) {
  const auto& tokens = sentence.tokens;
  std::vector<int> tags(tokens.size(), LabelSet::kOutside);
  for (const auto& a : annotations_in(sentence, annotations)) {
    auto type = LabelSet::type_index(a.phi_type);
    if (!type) throw Error("unknown label '" + a.phi_type + "' in document " + sentence.doc_id);
    auto first = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) { return t.start == a.start; });
    auto last = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) { return t.end == a.end; });
    if (first == tokens.end() || last == tokens.end() || last < first) {
      std::size_t at = first == tokens.end() ? a.start : a.end;
      throw Error("misaligned annotation in document " + sentence.doc_id + " at offset " + std::to_string(at));
    }
    for (auto it = first; it <= last; ++it) {
      auto idx = static_cast<std::size_t>(it - tokens.begin());
      if (tags[idx] != LabelSet::kOutside)
        throw Error("overlapping annotations in document " + sentence.doc_id + " at offset " +
                    std::to_string(it->start));
      tags[idx] = it == first ? LabelSet::begin_tag(*type) : LabelSet::inside_tag(*type);
    }
  }
  return tags;
}

std::vector<Annotation> decode_bio(const std::vector<int>& tags, const Sentence& sentence,
                                   std::u32string_view doc_text) {
  if (tags.size() != sentence.tokens.size()) throw Error("tag count does not match token count");
  std::vector<Annotation> out;
  int open_type = -1;
  auto close = [&](std::size_t last) {
    if (open_type < 0) return;
    out.back().end = sentence.tokens[last].end;
    open_type = -1;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    int tag = tags[i];
    if (tag == LabelSet::kOutside) {
      if (open_type >= 0) close(i - 1);
      continue;
    }
    int type = LabelSet::type_of(tag);
    if (LabelSet::is_inside(tag) && type == open_type) continue;
    if (open_type >= 0) close(i - 1);
    out.push_back({sentence.tokens[i].start, sentence.tokens[i].end, std::string(LabelSet::kTypes[type]), {}});
    open_type = type;
  }
  if (open_type >= 0) close(tags.size() - 1);
  if (!doc_text.empty())
    for (auto& a : out) a.text = std::u32string(doc_text.substr(a.start, a.end - a.start));
  return out;
}

void validate_annotations(Document& doc) {
  std::stable_sort(doc.annotations.begin(), doc.annotations.end(), [](const Annotation& a, const Annotation& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  for (std::size_t i = 0; i < doc.annotations.size(); ++i) {
    auto& a = doc.annotations[i];
    if (a.start >= a.end || a.end > doc.text.size())
      throw Error("annotation out of range in document " + doc.id + " at offset " + std::to_string(a.start));
    if (i > 0 && a.start < doc.annotations[i - 1].end)
      throw Error("overlapping annotations in document " + doc.id + " at offset " + std::to_string(a.start));
    a.text = doc.text.substr(a.start, a.end - a.start);
  }
}

} // namespace deid
