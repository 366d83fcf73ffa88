#pragma once

// Test-only generators and brute-force oracles. The oracles deliberately walk
// the graph differently from the library (downward DFS, explicit path pairs,
// quadratic pair counting) so they can check it independently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "taxometer/gateway.hpp"
#include "taxometer/taxonomy.hpp"

namespace taxometer::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(TAXOMETER_FIXTURE_DIR) / name;
}

inline std::filesystem::path sample_taxonomy_path() {
  return std::filesystem::path(TAXOMETER_DATA_DIR) / "sample_taxonomy.json";
}

/// Builds a taxonomy from "parent>child" style edge pairs over named concepts.
inline Taxonomy make_taxonomy(const std::vector<std::string>& ids, const std::vector<IdEdge>& edges) {
  std::vector<Concept> concepts;
  for (const auto& id : ids) concepts.push_back({id, id, "", false});
  return Taxonomy::build(std::move(concepts), edges);
}

/// Random forest/DAG: concept i attaches under earlier concepts. With
/// `extra_parent_p` > 0 some concepts get a second parent.
inline Taxonomy random_taxonomy(std::mt19937_64& rng, std::size_t n, double extra_parent_p = 0.0,
                                double new_root_p = 0.05) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Concept> concepts;
  std::vector<IdEdge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "c" + std::to_string(i);
    concepts.push_back({id, "concept " + std::to_string(i), "", false});
    if (i == 0 || unit(rng) < new_root_p) continue;
    const std::size_t p = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    edges.emplace_back("c" + std::to_string(p), id);
    if (i > 1 && unit(rng) < extra_parent_p) {
      const std::size_t q = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      if (q != p) edges.emplace_back("c" + std::to_string(q), id);
    }
  }
  return Taxonomy::build(std::move(concepts), edges);
}

/// Root paths by downward DFS from the pseudo-root.
inline std::vector<std::vector<ConceptIndex>> oracle_root_paths(const Taxonomy& t, ConceptIndex target) {
  std::vector<std::vector<ConceptIndex>> out;
  std::vector<ConceptIndex> trail{Taxonomy::kRoot};
  auto dfs = [&](auto&& self, ConceptIndex x) -> void {
    if (x == target) {
      out.push_back(trail);
      return;
    }
    for (ConceptIndex c : t.children(x)) {
      trail.push_back(c);
      self(self, c);
      trail.pop_back();
    }
  };
  dfs(dfs, Taxonomy::kRoot);
  return out;
}

/// Wu-Palmer by enumerating every pair of root paths: 2·L / (|pa| + |pb|)
/// with L the shared-prefix length, maximized over pairs.
inline double oracle_wu_palmer(const Taxonomy& t, ConceptIndex a, ConceptIndex b) {
  const auto pa = oracle_root_paths(t, a);
  const auto pb = oracle_root_paths(t, b);
  double best = 0.0;
  for (const auto& x : pa)
    for (const auto& y : pb) {
      std::size_t shared = 0;
      while (shared < x.size() && shared < y.size() && x[shared] == y[shared]) ++shared;
      best = std::max(best, 2.0 * static_cast<double>(shared) / static_cast<double>(x.size() + y.size()));
    }
  return best;
}

struct OracleKendall {
  std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, tied_xy = 0, n0 = 0;
  double tau_b() const {
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(n0 - tied_x) * static_cast<double>(n0 - tied_y));
  }
};

/// O(n²) concordance counting.
inline OracleKendall oracle_kendall(const std::vector<double>& xs, const std::vector<double>& ys) {
  OracleKendall k;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      ++k.n0;
      const double dx = xs[i] - xs[j], dy = ys[i] - ys[j];
      if (dx == 0) ++k.tied_x;
      if (dy == 0) ++k.tied_y;
      if (dx == 0 && dy == 0) ++k.tied_xy;
      if (dx * dy > 0) ++k.concordant;
      if (dx * dy < 0) ++k.discordant;
    }
  return k;
}

/// Complete tree: every internal node has `branching` children, all leaves
/// at the same depth. Descriptions are empty.
inline Taxonomy balanced_tree(std::size_t branching, std::size_t levels, std::size_t roots = 1) {
  std::vector<Concept> concepts;
  std::vector<IdEdge> edges;
  std::vector<std::string> frontier;
  for (std::size_t r = 0; r < roots; ++r) {
    frontier.push_back("n" + std::to_string(concepts.size()));
    concepts.push_back({frontier.back(), frontier.back(), "", false});
  }
  for (std::size_t level = 1; level < levels; ++level) {
    std::vector<std::string> next;
    for (const auto& p : frontier)
      for (std::size_t b = 0; b < branching; ++b) {
        const std::string id = "n" + std::to_string(concepts.size());
        concepts.push_back({id, id, "", false});
        edges.emplace_back(p, id);
        next.push_back(id);
      }
    frontier = std::move(next);
  }
  return Taxonomy::build(std::move(concepts), edges);
}

/// Pins the mock's pairwise similarity to the Wu-Palmer similarity of `t`,
/// keyed by representation text (texts must be distinct).
inline void script_wu_palmer(MockSimilarityProvider& provider, const Taxonomy& t) {
  const WuPalmerIndex wps(t);
  for (ConceptIndex a = 2; a < t.size(); ++a)
    for (ConceptIndex b = a + 1; b < t.size(); ++b)
      provider.script_similarity(representation_text(t.concept_at(a)), representation_text(t.concept_at(b)), wps(a, b));
}

}  // namespace taxometer::testing
