#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxometer/taxonomy.hpp"

namespace taxometer {

enum class TaxonomyFormat { json, tsv_edges };

inline TaxonomyFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = detail::to_lower(path.extension().string());
  if (ext == ".tsv" || ext == ".txt" || ext == ".taxo") return TaxonomyFormat::tsv_edges;
  return TaxonomyFormat::json;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parses {"concepts": [{"id", "name", "description", "parents": [...]}]}.
inline Taxonomy parse_taxonomy_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid taxonomy JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("concepts") || !doc["concepts"].is_array())
    throw ParseError("taxonomy JSON needs a top-level \"concepts\" array");

  std::vector<Concept> concepts;
  std::vector<IdEdge> edges;
  try {
    for (const auto& entry : doc["concepts"]) {
      Concept c;
      c.id = entry.at("id").get<std::string>();
      c.name = entry.value("name", c.id);
      c.description = entry.value("description", std::string{});
      if (entry.contains("parents"))
        for (const auto& p : entry["parents"]) edges.emplace_back(p.get<std::string>(), c.id);
      concepts.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed concept entry: ") + e.what());
  }
  std::map<std::string, bool, std::less<>> known;
  for (const auto& c : concepts) known[c.id] = true;
  for (const auto& [parent, child] : edges)
    if (!known.count(parent))
      throw ParseError("concept '" + child + "' names unknown parent '" + parent + "'");
  return Taxonomy::build(std::move(concepts), edges);
}

/// Parses `child<TAB>parent` lines plus optional `id<TAB>name<TAB>description`
/// glosses. Concepts are ordered by first appearance (edges first, then
/// glosses-only concepts).
inline Taxonomy parse_taxonomy_tsv(const std::string& edge_text, const std::string& gloss_text = {}) {
  std::vector<Concept> concepts;
  std::map<std::string, std::size_t, std::less<>> slot;
  auto touch = [&](const std::string& id) {
    if (slot.emplace(id, concepts.size()).second) concepts.push_back({id, id, "", false});
  };

  std::vector<IdEdge> edges;
  std::istringstream in(edge_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty())
      throw ParseError("edge line " + std::to_string(line_no) + ": expected child<TAB>parent");
    touch(cols[0]);
    touch(cols[1]);
    edges.emplace_back(cols[1], cols[0]);
  }

  std::istringstream gin(gloss_text);
  line_no = 0;
  while (std::getline(gin, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.empty() || cols.size() > 3 || cols[0].empty())
      throw ParseError("gloss line " + std::to_string(line_no) + ": expected id<TAB>name<TAB>description");
    touch(cols[0]);
    auto& c = concepts[slot[cols[0]]];
    if (cols.size() > 1 && !cols[1].empty()) c.name = cols[1];
    if (cols.size() > 2) c.description = cols[2];
  }
  return Taxonomy::build(std::move(concepts), edges);
}

/// Loads a taxonomy from disk. For TSV edges a companion gloss file may be
/// given explicitly; otherwise `<stem>.glosses.tsv` next to the edge file is
/// used when it exists.
inline Taxonomy load_taxonomy(const std::filesystem::path& source,
                              std::optional<TaxonomyFormat> format = std::nullopt,
                              std::optional<std::filesystem::path> glosses = std::nullopt) {
  const auto fmt = format.value_or(format_from_path(source));
  if (fmt == TaxonomyFormat::json) return parse_taxonomy_json(read_file(source));
  if (!glosses) {
    auto candidate = source;
    candidate.replace_extension(".glosses.tsv");
    if (std::filesystem::exists(candidate)) glosses = candidate;
  }
  return parse_taxonomy_tsv(read_file(source), glosses ? read_file(*glosses) : std::string{});
}

inline nlohmann::json taxonomy_to_json(const Taxonomy& t) {
  nlohmann::json concepts = nlohmann::json::array();
  for (ConceptIndex i = 2; i < t.size(); ++i) {
    const auto& c = t.concept_at(i);
    nlohmann::json parents = nlohmann::json::array();
    for (ConceptIndex p : t.parents(i))
      if (!Taxonomy::is_pseudo(p)) parents.push_back(t.id(p));
    concepts.push_back({{"id", c.id}, {"name", c.name}, {"description", c.description}, {"parents", parents}});
  }
  return {{"concepts", concepts}};
}

inline void save_taxonomy_json(const Taxonomy& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << taxonomy_to_json(t).dump(2) << '\n';
}

}  // namespace taxometer
