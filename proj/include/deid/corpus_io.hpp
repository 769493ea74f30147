#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "deid/corpus.hpp"
#include "deid/harmonize.hpp"

namespace deid {

// JSON-lines corpus: one {id, note_type, domain, text, annotations} object
// per line. Domain ids are assigned in order of first appearance.
std::vector<Document> read_corpus(std::istream& in);
void write_corpus(std::ostream& out, const std::vector<Document>& docs);

std::vector<Document> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path);

HarmonizationRules load_rules(const std::filesystem::path& path);
void save_rules(const HarmonizationRules& rules, const std::filesystem::path& path);

void write_harmonization_report(std::ostream& out, const std::vector<HarmonizationChange>& changes);

} // namespace deid
