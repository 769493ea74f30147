#pragma once

#include <string>

#include <json.hpp>

#include "deid/heads.hpp"
#include "deid/numerics.hpp"

namespace deid {

using ojson = nlohmann::ordered_json;

ojson to_json(const TrainingConfig& config);
ojson to_json(const HeadConfig& head);

// Merge the given keys into an existing config; unknown keys and values of
// the wrong type are errors.
void apply_json(TrainingConfig& config, const ojson& j);
void apply_json(HeadConfig& head, const ojson& j);

// "training.lr=0.01", "head.kind=csd". The value is parsed as JSON when
// possible, else taken as a string.
void apply_override(TrainingConfig& config, HeadConfig& head, const std::string& assignment);

// {"training": {...}, "head": {...}}
void apply_config_json(TrainingConfig& config, HeadConfig& head, const ojson& j);

ojson read_json_file(const std::string& path);

} // namespace deid
