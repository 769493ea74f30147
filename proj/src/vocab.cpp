#include "deid/vocab.hpp"

#include "deid/error.hpp"
#include "deid/text.hpp"

namespace deid {

Vocabulary::Vocabulary() {
  add(U"<pad>");
  add(U"<unk>");
  counts_[kPad] = 0;
  counts_[kUnk] = 0;
}

int Vocabulary::add(std::u32string_view entry) {
  std::u32string key(entry);
  auto it = index_.find(key);
  if (it != index_.end()) {
    ++counts_[static_cast<std::size_t>(it->second)];
    return it->second;
  }
  int id = static_cast<int>(entries_.size());
  entries_.push_back(key);
  counts_.push_back(1);
  index_.emplace(std::move(key), id);
  return id;
}

int Vocabulary::lookup(std::u32string_view entry) const {
  auto it = index_.find(std::u32string(entry));
  return it == index_.end() ? kUnk : it->second;
}

void Vocabularies::add(const Sentence& sentence) {
  for (const auto& tok : sentence.tokens) {
    words.add(to_lower(tok.surface));
    for (char32_t c : tok.surface) chars.add(std::u32string(1, c));
  }
}

EncodedSentence Vocabularies::encode(const Sentence& sentence, const std::vector<Annotation>* annotations) const {
  EncodedSentence enc;
  enc.domain = sentence.domain_id;
  enc.words.reserve(sentence.tokens.size());
  enc.chars.reserve(sentence.tokens.size());
  for (const auto& tok : sentence.tokens) {
    enc.words.push_back(words.lookup(to_lower(tok.surface)));
    std::vector<int> cs;
    cs.reserve(tok.surface.size());
    for (char32_t c : tok.surface) cs.push_back(chars.lookup(std::u32string(1, c)));
    enc.chars.push_back(std::move(cs));
  }
  if (annotations) enc.tags = encode_bio(sentence, *annotations);
  return enc;
}

Vocabularies build_vocab(const std::vector<const std::vector<Document>*>& corpora) {
  Vocabularies v;
  bool any = false;
  for (const auto* docs : corpora) {
    if (docs->empty()) throw Error("cannot build vocabulary from an empty corpus");
    for (const auto& doc : *docs)
      for (const auto& s : segment(doc)) {
        v.add(s);
        any = true;
      }
  }
  if (!any) throw Error("cannot build vocabulary: corpora contain no tokens");
  return v;
}

} // namespace deid
