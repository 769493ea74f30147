#include "deid/config_json.hpp"

#include <fstream>

#include "deid/error.hpp"

namespace deid {

namespace {

template <class T>
void read_into(T& out, const ojson& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw Error("");
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) throw Error("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw Error("");
    }
    out = v.get<T>();
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' has a value of the wrong type: " + v.dump());
  }
}

} // namespace

ojson to_json(const TrainingConfig& c) {
  return ojson{{"char_emb_dim", c.char_emb_dim}, {"word_emb_dim", c.word_emb_dim}, {"char_hidden", c.char_hidden},
               {"token_hidden", c.token_hidden}, {"dropout", c.dropout},           {"lr", c.lr},
               {"max_epochs", c.max_epochs},     {"patience", c.patience},         {"dev_fraction", c.dev_fraction},
               {"clip_norm", c.clip_norm},       {"unk_replace", c.unk_replace},   {"seed", c.seed}};
}

ojson to_json(const HeadConfig& h) {
  return ojson{{"kind", to_string(h.kind)},
               {"csd_rank", h.csd_rank},
               {"csd_alpha", h.csd_alpha},
               {"csd_lambda", h.csd_lambda},
               {"jdl_rho", h.jdl_rho}};
}

void apply_json(TrainingConfig& c, const ojson& j) {
  if (!j.is_object()) throw Error("training config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "char_emb_dim") read_into(c.char_emb_dim, v, key);
    else if (key == "word_emb_dim") read_into(c.word_emb_dim, v, key);
    else if (key == "char_hidden") read_into(c.char_hidden, v, key);
    else if (key == "token_hidden") read_into(c.token_hidden, v, key);
    else if (key == "dropout") read_into(c.dropout, v, key);
    else if (key == "lr") read_into(c.lr, v, key);
    else if (key == "max_epochs") read_into(c.max_epochs, v, key);
    else if (key == "patience") read_into(c.patience, v, key);
    else if (key == "dev_fraction") read_into(c.dev_fraction, v, key);
    else if (key == "clip_norm") read_into(c.clip_norm, v, key);
    else if (key == "unk_replace") read_into(c.unk_replace, v, key);
    else if (key == "seed") read_into(c.seed, v, key);
    else throw Error("unknown training config key '" + key + "'");
  }
}

void apply_json(HeadConfig& h, const ojson& j) {
  if (!j.is_object()) throw Error("head config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") {
      if (!v.is_string()) throw Error("config key 'kind' must be a string");
      h.kind = parse_head(v.get<std::string>());
    } else if (key == "csd_rank") read_into(h.csd_rank, v, key);
    else if (key == "csd_alpha") read_into(h.csd_alpha, v, key);
    else if (key == "csd_lambda") read_into(h.csd_lambda, v, key);
    else if (key == "jdl_rho") read_into(h.jdl_rho, v, key);
    else throw Error("unknown head config key '" + key + "'");
  }
}

void apply_override(TrainingConfig& config, HeadConfig& head, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("override '" + assignment + "' is not of the form section.key=value");
  const std::string path = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  const auto dot = path.find('.');
  if (dot == std::string::npos) throw Error("override key '" + path + "' must be training.<key> or head.<key>");
  const std::string section = path.substr(0, dot), key = path.substr(dot + 1);
  ojson value = ojson::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  if (section == "training") apply_json(config, ojson{{key, value}});
  else if (section == "head") apply_json(head, ojson{{key, value}});
  else throw Error("unknown config section '" + section + "'");
}

void apply_config_json(TrainingConfig& config, HeadConfig& head, const ojson& j) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "training") apply_json(config, v);
    else if (key == "head") apply_json(head, v);
    else throw Error("unknown config section '" + key + "'");
  }
}

ojson read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open");
  try {
    return ojson::parse(in);
  } catch (const ojson::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
}

} // namespace deid
