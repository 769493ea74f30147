#include "deid/corpus_io.hpp"

#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "deid/error.hpp"
#include "deid/text.hpp"

namespace deid {

using ojson = nlohmann::ordered_json;

namespace {

const ojson& field(const ojson& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw Error("line " + std::to_string(line) + ": missing field '" + name + "'");
  return *it;
}

std::string string_field(const ojson& obj, const char* name, std::size_t line) {
  const auto& v = field(obj, name, line);
  if (!v.is_string()) throw Error("line " + std::to_string(line) + ": field '" + name + "' must be a string");
  return v.get<std::string>();
}

} // namespace

std::vector<Document> read_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::map<std::string, int> domains;
  std::set<std::string> ids;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson rec;
    try {
      rec = ojson::parse(raw);
    } catch (const ojson::parse_error& e) {
      throw Error("line " + std::to_string(line) + ": malformed record: " + e.what());
    }
    if (!rec.is_object()) throw Error("line " + std::to_string(line) + ": record is not an object");

    Document doc;
    doc.id = string_field(rec, "id", line);
    doc.note_type = string_field(rec, "note_type", line);
    doc.domain = string_field(rec, "domain", line);
    try {
      doc.text = utf8_decode(string_field(rec, "text", line));
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line) + ": " + e.what());
    }
    const auto& anns = field(rec, "annotations", line);
    if (!anns.is_array()) throw Error("line " + std::to_string(line) + ": 'annotations' must be an array");
    for (const auto& a : anns) {
      if (!a.is_object() || !a.contains("start") || !a.contains("end") || !a.contains("type") ||
          !a["start"].is_number_integer() || !a["end"].is_number_integer() || !a["type"].is_string())
        throw Error("line " + std::to_string(line) + ": malformed annotation");
      auto start = a["start"].get<long long>();
      auto end = a["end"].get<long long>();
      if (start < 0 || end < 0)
        throw Error("line " + std::to_string(line) + ": negative annotation offset in document " + doc.id);
      doc.annotations.push_back(
          {static_cast<std::size_t>(start), static_cast<std::size_t>(end), a["type"].get<std::string>(), {}});
    }
    if (!ids.insert(doc.id).second) throw Error("line " + std::to_string(line) + ": duplicate document id " + doc.id);
    auto [it, fresh] = domains.emplace(doc.domain, static_cast<int>(domains.size()));
    doc.domain_id = it->second;
    validate_annotations(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_corpus(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& doc : docs) {
    ojson rec;
    rec["id"] = doc.id;
    rec["note_type"] = doc.note_type;
    rec["domain"] = doc.domain;
    rec["text"] = utf8_encode(doc.text);
    rec["annotations"] = ojson::array();
    for (const auto& a : doc.annotations) {
      ojson j;
      j["start"] = a.start;
      j["end"] = a.end;
      j["type"] = a.phi_type;
      rec["annotations"].push_back(std::move(j));
    }
    out << rec.dump() << '\n';
  }
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  try {
    return read_corpus(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus " + path.string());
  write_corpus(out, docs);
}

HarmonizationRules load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rules file " + path.string());
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const ojson::parse_error& e) {
    throw Error("malformed rules file " + path.string() + ": " + e.what());
  }
  HarmonizationRules r;
  try {
    for (const auto& [adjusted, sources] : j.at("type_map").items())
      for (const auto& src : sources) {
        auto name = src.get<std::string>();
        if (!r.type_map.emplace(name, adjusted).second)
          throw Error("label '" + name + "' appears twice in rules file");
      }
    for (const auto& d : j.at("dropped_types")) {
      auto name = d.get<std::string>();
      if (!r.dropped_types.insert(name).second) throw Error("label '" + name + "' appears twice in rules file");
    }
    r.age_threshold = j.value("age_threshold", 90);
    r.year_patterns = j.at("year_patterns").get<std::vector<std::string>>();
  } catch (const ojson::exception& e) {
    throw Error("malformed rules file " + path.string() + ": " + e.what());
  }
  r.validate();
  return r;
}

void save_rules(const HarmonizationRules& rules, const std::filesystem::path& path) {
  ojson j;
  ojson map = ojson::object();
  for (auto type : LabelSet::kTypes) {
    ojson sources = ojson::array();
    for (const auto& [from, to] : rules.type_map)
      if (to == type) sources.push_back(from);
    map[std::string(type)] = std::move(sources);
  }
  j["type_map"] = std::move(map);
  j["dropped_types"] = rules.dropped_types;
  j["age_threshold"] = rules.age_threshold;
  j["year_patterns"] = rules.year_patterns;
  std::ofstream out(path);
  if (!out) throw Error("cannot write rules file " + path.string());
  out << j.dump(2) << '\n';
}

void write_harmonization_report(std::ostream& out, const std::vector<HarmonizationChange>& changes) {
  for (const auto& c : changes) {
    ojson j;
    j["doc_id"] = c.doc_id;
    j["action"] = c.action;
    j["before"] = {{"start", c.before.start},
                   {"end", c.before.end},
                   {"type", c.before.phi_type},
                   {"text", utf8_encode(c.before.text)}};
    j["after"] = ojson::array();
    for (const auto& a : c.after)
      j["after"].push_back(
          {{"start", a.start}, {"end", a.end}, {"type", a.phi_type}, {"text", utf8_encode(a.text)}});
    out << j.dump() << '\n';
  }
}

} // namespace deid
