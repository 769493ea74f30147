#include <doctest.h>

#include "deid/corpus.hpp"
#include "deid/error.hpp"
#include "helpers.hpp"

using namespace deid;
using testing::make_doc;
using testing::u8;

namespace {

std::vector<std::string> surfaces(const Sentence& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) out.push_back(u8(t.surface));
  return out;
}

} // namespace

TEST_CASE("utf8 round trip and offsets count scalar values") {
  const std::string text = "Zoë met José at 10:30.";
  const auto u = utf8_decode(text);
  CHECK(u.size() == 22);
  CHECK(utf8_encode(u) == text);
  CHECK_THROWS_AS(utf8_decode("\xC3"), Error);
  CHECK_THROWS_AS(utf8_decode("\xFF"), Error);
  CHECK(ascii_shadow(u).size() == u.size());
}

TEST_CASE("tokenizer splits punctuation and sentences") {
  auto sents = tokenize(U"Seen by Dr. Smith today. Follow up 01/02.\nNo distress.");
  REQUIRE(sents.size() == 3);
  CHECK(surfaces(sents[0]) == std::vector<std::string>{"Seen", "by", "Dr", ".", "Smith", "today", "."});
  CHECK(surfaces(sents[1]) == std::vector<std::string>{"Follow", "up", "01", "/", "02", "."});
  CHECK(surfaces(sents[2]) == std::vector<std::string>{"No", "distress", "."});
  CHECK(sents[0].tokens[4].start == 12);
  CHECK(sents[0].tokens[4].end == 17);
}

TEST_CASE("lower-case word after a period does not start a sentence") {
  CHECK(tokenize(U"Dose was 2.5 mg. then stopped.").size() == 1);
  CHECK(tokenize(U"Signed by Jane Doe, M.D. Then left.").size() == 1);
}

TEST_CASE("segment splits tokens at annotation boundaries") {
  auto d = make_doc("d1", "MRN:12345 noted", {{"12345", "ID"}});
  auto sents = segment(d);
  REQUIRE(sents.size() == 1);
  CHECK(surfaces(sents[0]) == std::vector<std::string>{"MRN", ":", "12345", "noted"});
  d = make_doc("d2", "Ref AB12345x", {{"AB12345", "ID"}});
  CHECK(surfaces(segment(d)[0]) == std::vector<std::string>{"Ref", "AB12345", "x"});
}

TEST_CASE("no sentence break inside an annotation") {
  auto d = make_doc("d", "Went to St. Mary Hospital. Fine.", {{"St. Mary Hospital", "Hospital"}});
  auto sents = segment(d);
  REQUIRE(sents.size() == 2);
  CHECK(sents[0].doc_id == "d");
}

TEST_CASE("BIO encode and decode round trip") {
  auto d = make_doc("d", "Jane Doe saw Dr. Smith on 01/02.",
                    {{"Jane Doe", "Patient"}, {"Smith", "Doctor"}, {"01/02", "Date"}});
  auto s = segment(d).at(0);
  auto tags = encode_bio(s, d.annotations);
  const int P = *LabelSet::type_index("Patient"), Dr = *LabelSet::type_index("Doctor"),
            Da = *LabelSet::type_index("Date");
  CHECK(tags == std::vector<int>{LabelSet::begin_tag(P), LabelSet::inside_tag(P), 0, 0, 0, LabelSet::begin_tag(Dr), 0,
                                 LabelSet::begin_tag(Da), LabelSet::inside_tag(Da), LabelSet::inside_tag(Da), 0});
  auto back = decode_bio(tags, s, d.text);
  CHECK(back == d.annotations);
}

TEST_CASE("stray inside tag starts a new entity") {
  auto s = tokenize(U"a b c").at(0);
  const int ID = *LabelSet::type_index("ID");
  auto spans = decode_bio({0, LabelSet::inside_tag(ID), LabelSet::inside_tag(ID)}, s);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].start == 2);
  CHECK(spans[0].end == 5);
  spans = decode_bio({LabelSet::begin_tag(ID), LabelSet::inside_tag(0), 0}, s);
  CHECK(spans.size() == 2);
}

TEST_CASE("label set layout") {
  CHECK(LabelSet::num_tags() == 17);
  CHECK(LabelSet::tag_name(0) == "O");
  CHECK(LabelSet::tag_name(1) == "B-Patient");
  CHECK(LabelSet::tag_name(16) == "I-Age");
  CHECK_FALSE(LabelSet::type_index("Fax").has_value());
}

TEST_CASE("validation errors name the document") {
  auto d = make_doc("doc-7", "abc def");
  d.annotations = {{0, 5, "ID", {}}, {4, 7, "ID", {}}};
  try {
    validate_annotations(d);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("doc-7") != std::string::npos);
  }
  d.annotations = {{5, 99, "ID", {}}};
  CHECK_THROWS_AS(validate_annotations(d), Error);
  d.annotations = {{4, 7, "ID", {}}, {0, 3, "Date", {}}};
  validate_annotations(d);
  CHECK(d.annotations[0].start == 0);
  CHECK(u8(d.annotations[1].text) == "def");
}
