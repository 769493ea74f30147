#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

// Source-label -> adjusted-label mapping plus the date-year and age filters
// that bring corpora annotated under different guidelines onto one label set.
struct HarmonizationRules {
  std::map<std::string, std::string> type_map;
  std::set<std::string> dropped_types;
  int age_threshold = 90;
  // ECMAScript regexes; capture group 1 marks the year digits to excise.
  std::vector<std::string> year_patterns;

  static HarmonizationRules defaults();
  // Every source label appears once across type_map and dropped_types and
  // every target is one of the harmonized types.
  void validate() const;
};

struct HarmonizationChange {
  std::string doc_id;
  std::string action;  // relabel | drop_type | drop_age | strip_year
  Annotation before;
  std::vector<Annotation> after;
};

// Maps labels, drops unused types and young ages, and excises year digits
// from dates. Appends one entry to report for every annotation it alters.
Document harmonize(const Document& doc, const HarmonizationRules& rules,
                   std::vector<HarmonizationChange>* report = nullptr);

// The leading integer of an age surface, if any.
std::optional<long> parse_age(std::u32string_view surface);

} // namespace deid
