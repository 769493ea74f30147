#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deid/config_json.hpp"
#include "deid/network.hpp"
#include "deid/vocab.hpp"

namespace deid {

// Everything needed to tag new text: vocabularies, domain names (index =
// domain id), the tagger, and free-form training metadata.
struct Model {
  Vocabularies vocab;
  std::vector<std::string> domains;
  std::optional<Tagger> tagger;
  ojson info = ojson::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "DEIDCKPT", u32 version, u64 header length, JSON header, then each
// parameter array's values as little-endian float64 in header order.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

} // namespace deid
