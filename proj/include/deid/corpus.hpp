#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deid {

// A typed PHI span over [start, end) in scalar-value offsets.
struct Annotation {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string phi_type;
  std::u32string text;

  bool operator==(const Annotation&) const = default;
};

struct Token {
  std::size_t start = 0;
  std::size_t end = 0;
  std::u32string surface;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;
  int domain_id = 0;
  std::string doc_id;

  std::size_t begin() const { return tokens.front().start; }
  std::size_t end() const { return tokens.back().end; }
};

struct Document {
  std::string id;
  std::string note_type;
  std::string domain;
  int domain_id = 0;
  std::u32string text;
  std::vector<Annotation> annotations;

  bool operator==(const Document&) const = default;
};

// The eight harmonized PHI types with a BIO tag scheme.
//   tag 0          O
//   tag 1 + 2k     B-<type k>
//   tag 2 + 2k     I-<type k>
class LabelSet {
public:
  static constexpr std::array<std::string_view, 8> kTypes = {
      "Patient", "Doctor", "Hospital", "ID", "Date", "Location", "Phone", "Age"};

  static constexpr int kOutside = 0;

  static constexpr int num_types() { return static_cast<int>(kTypes.size()); }
  static constexpr int num_tags() { return 2 * num_types() + 1; }

  static std::optional<int> type_index(std::string_view phi_type);
  static int begin_tag(int type) { return 1 + 2 * type; }
  static int inside_tag(int type) { return 2 + 2 * type; }
  static bool is_begin(int tag) { return tag > 0 && tag % 2 == 1; }
  static bool is_inside(int tag) { return tag > 0 && tag % 2 == 0; }
  static int type_of(int tag) { return (tag - 1) / 2; }
  static std::string tag_name(int tag);
};

// Abbreviations that never end a sentence.
inline constexpr std::array<std::u32string_view, 8> kAbbreviations = {
    U"Dr.", U"Mr.", U"Mrs.", U"Ms.", U"M.D.", U"vs.", U"e.g.", U"i.e."};

// Splits text into sentences of whitespace/punctuation tokens. Every
// punctuation character is its own token.
std::vector<Sentence> tokenize(std::u32string_view text);

// Tokenizes a document, splitting any token an annotation boundary falls
// inside and suppressing sentence breaks inside annotations.
std::vector<Sentence> segment(const Document& doc);

// Annotations fully inside the sentence's character range; throws if one
// straddles the sentence edge.
std::vector<Annotation> annotations_in(const Sentence& sentence, const std::vector<Annotation>& annotations);

std::vector<int> encode_bio(const Sentence& sentence, const std::vector<Annotation>& annotations);

// Maximal B/I runs of one type become spans; a stray I- opens a new entity.
// Annotation::text is filled from doc_text when it is given.
std::vector<Annotation> decode_bio(const std::vector<int>& tags, const Sentence& sentence,
                                   std::u32string_view doc_text = {});

// Fills Annotation::text from doc.text and checks ordering/overlap/range.
// Throws naming the document id on the first violation.
void validate_annotations(Document& doc);

} // namespace deid
