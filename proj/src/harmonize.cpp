#include "deid/harmonize.hpp"

#include <regex>

#include "deid/error.hpp"
#include "deid/text.hpp"

namespace deid {

HarmonizationRules HarmonizationRules::defaults() {
  HarmonizationRules r;
  for (const char* same : {"Patient", "Doctor", "Hospital", "Date", "Age"}) r.type_map[same] = same;
  for (const char* id : {"ID", "MedicalRecord", "Device", "HealthPlan", "License", "BioID", "IDNUM", "Username"})
    r.type_map[id] = "ID";
  for (const char* loc : {"Location", "Street", "City", "State", "Zip", "Country", "Location-Other"})
    r.type_map[loc] = "Location";
  for (const char* phone : {"Phone", "Fax"}) r.type_map[phone] = "Phone";
  r.dropped_types = {"Email", "URL", "Organization", "Profession"};
  r.age_threshold = 90;
  r.year_patterns = {
      R"((?:^|[^0-9])([0-9]{4})(?![0-9]))",
      R"((?:^|[^0-9])[0-9]{1,2}[/.\-][0-9]{1,2}[/.\-]([0-9]{2})(?![0-9]))",
  };
  return r;
}

void HarmonizationRules::validate() const {
  for (const auto& [from, to] : type_map) {
    if (dropped_types.count(from)) throw Error("label '" + from + "' is both mapped and dropped");
    if (!LabelSet::type_index(to)) throw Error("label '" + from + "' maps to unknown type '" + to + "'");
  }
  if (age_threshold < 0) throw Error("age_threshold must be non-negative");
  for (const auto& p : year_patterns) {
    try {
      std::regex re(p);
      if (re.mark_count() < 1) throw Error("year pattern needs a capture group: " + p);
    } catch (const std::regex_error&) {
      throw Error("invalid year pattern: " + p);
    }
  }
}

std::optional<long> parse_age(std::u32string_view surface) {
  std::size_t i = 0;
  while (i < surface.size() && !is_digit(surface[i])) ++i;
  if (i == surface.size()) return std::nullopt;
  long value = 0;
  for (; i < surface.size() && is_digit(surface[i]); ++i) {
    value = value * 10 + static_cast<long>(surface[i] - U'0');
    if (value > 1'000'000) break;
  }
  return value;
}

namespace {

// Pieces of a date annotation that remain once every year match is cut out.
std::vector<Annotation> strip_years(const Annotation& a, const std::vector<std::regex>& patterns) {
  std::string shadow = ascii_shadow(a.text);
  std::vector<bool> removed(a.text.size(), false);
  bool any = false;
  for (const auto& re : patterns) {
    for (auto it = std::sregex_iterator(shadow.begin(), shadow.end(), re); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      if (!m[1].matched) continue;
      auto from = static_cast<std::size_t>(m.position(1));
      for (std::size_t k = 0; k < static_cast<std::size_t>(m.length(1)); ++k) removed[from + k] = true;
      any = true;
    }
  }
  if (!any) return {a};

  std::vector<Annotation> pieces;
  std::size_t i = 0;
  while (i < a.text.size()) {
    if (removed[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < a.text.size() && !removed[j]) ++j;
    std::size_t lo = i, hi = j;
    while (lo < hi && !is_alnum(a.text[lo])) ++lo;
    while (hi > lo && !is_alnum(a.text[hi - 1])) --hi;
    if (lo < hi) pieces.push_back({a.start + lo, a.start + hi, a.phi_type, a.text.substr(lo, hi - lo)});
    i = j;
  }
  return pieces;
}

} // namespace

Document harmonize(const Document& doc, const HarmonizationRules& rules, std::vector<HarmonizationChange>* report) {
  std::vector<std::regex> patterns;
  for (const auto& p : rules.year_patterns) patterns.emplace_back(p);

  auto note = [&](const char* action, const Annotation& before, std::vector<Annotation> after) {
    if (report) report->push_back({doc.id, action, before, std::move(after)});
  };

  Document out = doc;
  out.annotations.clear();
  for (auto raw : doc.annotations) {
    if (raw.start >= raw.end || raw.end > doc.text.size())
      throw Error("annotation out of range in document " + doc.id + " at offset " + std::to_string(raw.start));
    raw.text = doc.text.substr(raw.start, raw.end - raw.start);
    if (rules.dropped_types.count(raw.phi_type)) {
      note("drop_type", raw, {});
      continue;
    }
    auto mapped = rules.type_map.find(raw.phi_type);
    if (mapped == rules.type_map.end())
      throw Error("unknown PHI label '" + raw.phi_type + "' in document " + doc.id);

    Annotation a = raw;
    a.phi_type = mapped->second;
    if (a.phi_type != raw.phi_type) note("relabel", raw, {a});

    if (a.phi_type == "Age") {
      auto age = parse_age(a.text);
      if (age && *age < rules.age_threshold) {
        note("drop_age", a, {});
        continue;
      }
    }
    if (a.phi_type == "Date") {
      auto pieces = strip_years(a, patterns);
      if (pieces.size() != 1 || !(pieces.front() == a)) note("strip_year", a, pieces);
      for (auto& p : pieces) out.annotations.push_back(std::move(p));
      continue;
    }
    out.annotations.push_back(std::move(a));
  }
  return out;
}

} // namespace deid
