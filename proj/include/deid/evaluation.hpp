#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

struct Entity {
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string phi_type;

  auto operator<=>(const Entity&) const = default;
};

using EntitySet = std::set<Entity>;

EntitySet entities_of(const Document& doc);
EntitySet entities_of(const std::vector<Document>& docs);

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
  double f1() const;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

// Micro-averaged exact-span scores with per-type and per-note-type splits.
struct MetricsReport {
  Counts overall;
  std::map<std::string, Counts> by_type;
  std::map<std::string, Counts> by_note_type;
};

// Exact match on (document, start, end, type). note_types maps document id
// to its note type for the note-type breakdown.
MetricsReport entity_prf(const EntitySet& gold, const EntitySet& pred,
                         const std::map<std::string, std::string>& note_types = {});

// Scores predicted documents against gold documents with the same ids.
MetricsReport evaluate(const std::vector<Document>& gold, const std::vector<Document>& pred);

void write_report_table(std::ostream& out, const MetricsReport& report);
// Columns: scope, key, tp, fp, fn, P, R, F1.
void write_report_csv(std::ostream& out, const MetricsReport& report);

struct SignificanceResult {
  double observed_delta = 0.0;  // F1(A) - F1(B)
  std::size_t n_shuffles = 0;
  std::size_t at_least_as_extreme = 0;
  double p_value = 1.0;
  std::uint64_t seed = 0;
};

// Gold and both systems' entities for one document.
struct PairedDocument {
  std::string id;
  EntitySet gold;
  EntitySet a;
  EntitySet b;
};

std::vector<PairedDocument> pair_documents(const std::vector<Document>& gold, const std::vector<Document>& pred_a,
                                           const std::vector<Document>& pred_b);

// Two-sided approximate randomization on the micro F1 difference. Each
// shuffle swaps the two systems' outputs per document with probability 1/2
// using a generator seeded from (seed, shuffle index), so the result does not
// depend on `jobs`.
SignificanceResult approx_randomization(const std::vector<PairedDocument>& docs, std::size_t n_shuffles,
                                        std::uint64_t seed, unsigned jobs = 1);

} // namespace deid
