#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "deid/corpus.hpp"
#include "deid/network.hpp"
#include "deid/text.hpp"

namespace testing {

using deid::Annotation;
using deid::Document;

// Builds a document whose annotations cover the given (substring, type)
// pairs, each at its first occurrence after the previous one.
inline Document make_doc(const std::string& id, const std::string& text,
                         const std::vector<std::pair<std::string, std::string>>& spans = {},
                         const std::string& note_type = "note") {
  Document d;
  d.id = id;
  d.note_type = note_type;
  d.domain = "test";
  d.text = deid::utf8_decode(text);
  std::size_t from = 0;
  for (const auto& [surface, type] : spans) {
    const auto s = deid::utf8_decode(surface);
    const auto at = d.text.find(s, from);
    if (at == std::u32string::npos) throw std::runtime_error("span not found: " + surface);
    d.annotations.push_back({at, at + s.size(), type, s});
    from = at + s.size();
  }
  return d;
}

inline deid::TrainingConfig tiny_config() {
  deid::TrainingConfig c;
  c.char_emb_dim = 4;
  c.char_hidden = 4;
  c.word_emb_dim = 6;
  c.token_hidden = 6;
  c.dropout = 0.0;
  return c;
}

// Replaces every free parameter with uniform(-1, 1) draws so gradients are
// well away from zero. Pinned CRF transitions keep their constant.
inline void scramble(deid::Tagger& t, std::uint64_t seed) {
  deid::Rng rng(seed);
  auto& store = t.params();
  for (auto& p : store)
    if (p.name != "crf.transitions")
      for (auto& v : p.value) v = rng.uniform(-1.0, 1.0);
  auto trans = store.get("crf.transitions").mat();
  for (int a = 0; a < int(trans.rows()); ++a)
    for (int b = 0; b < int(trans.cols()); ++b)
      if (!t.pinned_transition(a, b)) trans(a, b) = rng.uniform(-1.0, 1.0);
}

// Three-token sentence over a model with 6 chars, 7 words, 3 tags.
inline deid::EncodedSentence tiny_sentence(int domain = 0) {
  deid::EncodedSentence s;
  s.words = {2, 3, 4};
  s.chars = {{2, 3}, {4}, {5, 2, 3}};
  s.tags = {1, 2, 0};
  s.domain = domain;
  return s;
}

inline std::string u8(const std::u32string& s) { return deid::utf8_encode(s); }

} // namespace testing
