#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deid/config_json.hpp"
#include "deid/corpus.hpp"

namespace deid {

// Parameters of a generated multi-domain corpus. Each domain draws names,
// hospitals and locations mostly from its own vocabulary partition, uses its
// own surface formats for dates/IDs/phones, and its own sentence templates.
struct SyntheticSpec {
  int n_domains = 3;
  int notes_per_domain = 100;
  // Expected entities per token, keyed by harmonized type.
  std::map<std::string, double> phi_density = default_density();
  // Probability that a surrogate is drawn from the domain-private partition
  // instead of the shared one.
  double vocab_skew = 0.8;
  int template_inventory = 0;
  std::uint64_t seed = 42;
  int tokens_per_note = 60;
  int note_types_per_domain = 2;
  // Emit source-style labels (City, Fax, MedicalRecord, ...), dates with years
  // and ages of any value, as a harmonization input.
  bool raw_labels = false;

  static std::map<std::string, double> default_density();
  void validate() const;
};

// Longest carrier sentence, in tokens. Bounds the achievable PHI density.
inline constexpr int kMaxCarrierTokens = 20;

std::vector<Document> generate_synthetic(const SyntheticSpec& spec);

// Keys mirror the struct fields; missing keys keep their defaults.
SyntheticSpec spec_from_json(const ojson& j);
ojson to_json(const SyntheticSpec& spec);

} // namespace deid
