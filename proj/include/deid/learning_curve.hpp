#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "deid/training.hpp"

namespace deid {

struct CurvePoint {
  std::string strategy;   // "fine_tuned" or "baseline"
  int size = 0;           // training documents
  std::uint64_t seed = 0;
  std::string note_type;  // "all" for the overall score
  double f1 = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

// Per-increment subsets of `pool`, sampled evenly per note type and nested:
// each subset contains the previous one. Types are visited in sorted order
// and the first (size mod #types) of them get one extra document.
std::vector<std::vector<Document>> nested_samples(const std::vector<Document>& pool, const std::vector<int>& sizes,
                                                  std::uint64_t seed);

struct CurveSettings {
  std::vector<int> sizes;
  std::vector<std::uint64_t> seeds;
  std::string target_name = "target";
  bool baseline = true;
};

// For each seed and size: fine-tunes a copy of `pretrained` on the sample
// (size 0 means no training) and, if requested, trains a fresh plain model
// on the same sample with the pretrained vocabulary. Scores on `test`.
std::vector<CurvePoint> learning_curve(const Model& pretrained, const std::vector<Document>& pool,
                                       const std::vector<Document>& test, const CurveSettings& settings,
                                       const TrainOptions& options = {});

// Columns: strategy, size, seed, note_type, F1.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points);

} // namespace deid
