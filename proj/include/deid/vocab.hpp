#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

// Insertion-ordered string -> id table with reserved pad/OOV rows.
class Vocabulary {
public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  int add(std::u32string_view entry);
  int lookup(std::u32string_view entry) const;
  bool contains(std::u32string_view entry) const { return index_.count(std::u32string(entry)) != 0; }
  std::size_t size() const { return entries_.size(); }
  const std::u32string& entry(int id) const { return entries_[static_cast<std::size_t>(id)]; }
  int count(int id) const { return counts_[static_cast<std::size_t>(id)]; }
  void set_count(int id, int count) { counts_[static_cast<std::size_t>(id)] = count; }
  const std::vector<std::u32string>& entries() const { return entries_; }

private:
  std::vector<std::u32string> entries_;
  std::vector<int> counts_;
  std::unordered_map<std::u32string, int> index_;
};

struct EncodedSentence {
  std::vector<int> words;
  std::vector<std::vector<int>> chars;
  std::vector<int> tags;
  int domain = 0;

  std::size_t size() const { return words.size(); }
};

// Words are looked up lower-cased; characters keep their case.
struct Vocabularies {
  Vocabulary words;
  Vocabulary chars;

  void add(const Sentence& sentence);
  // Tags are filled from annotations when given, else left empty.
  EncodedSentence encode(const Sentence& sentence, const std::vector<Annotation>* annotations = nullptr) const;
};

// Vocabularies over every token of every document, first occurrence first.
Vocabularies build_vocab(const std::vector<const std::vector<Document>*>& corpora);

} // namespace deid
