#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "taxometer/detail/util.hpp"
#include "taxometer/error.hpp"

namespace taxometer {

using ConceptIndex = std::uint32_t;

struct Concept {
  std::string id;
  std::string name;
  std::string description;
  bool is_pseudo = false;

  friend bool operator==(const Concept&, const Concept&) = default;
};

/// Text used to represent a concept for embedding: the gloss when present,
/// otherwise the name.
inline const std::string& representation_text(const Concept& c) {
  return c.description.empty() ? c.name : c.description;
}

/// Placement of a query concept between one of its parents and one of its
/// children.
struct Triplet {
  std::string parent_id;
  std::string query_id;
  std::string child_id;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct RootPath {
  std::vector<std::string> node_ids;

  std::size_t length() const { return node_ids.size(); }
  friend auto operator<=>(const RootPath&, const RootPath&) = default;
};

struct TaxonomyStats {
  std::size_t concepts = 0;  // non-pseudo
  std::size_t edges = 0;     // edges between non-pseudo concepts
  std::size_t depth = 0;     // deepest concept, in natural levels
  std::size_t leaves = 0;
  double leaf_ratio = 0.0;
  double branching = 0.0;    // edges per non-leaf concept
  std::size_t duplicate_edges = 0;
};

using IdEdge = std::pair<std::string, std::string>;  // (parent, child)
using IndexEdge = std::pair<ConceptIndex, ConceptIndex>;

class TaxonomyEditor;

/// A validated hypernym DAG augmented with a pseudo-root above every natural
/// root and a pseudo-leaf below every natural leaf.
///
/// Index 0 is the pseudo-root and index 1 the pseudo-leaf; natural concepts
/// follow in input order. Adjacency lists are kept sorted. Instances are
/// immutable and safe to share across threads; edits go through
/// TaxonomyEditor on a copy.
class Taxonomy {
 public:
  static constexpr ConceptIndex kRoot = 0;
  static constexpr ConceptIndex kLeaf = 1;
  static constexpr std::string_view kPseudoRootId = "<pseudo-root>";
  static constexpr std::string_view kPseudoLeafId = "<pseudo-leaf>";

  /// Builds a taxonomy from natural concepts and (parent, child) edges.
  /// Edges touching a pseudo id are dropped and regenerated, so feeding the
  /// output of edges() back in reproduces the same taxonomy. Duplicate edges
  /// are removed and counted in stats().
  static Taxonomy build(std::vector<Concept> concepts, const std::vector<IdEdge>& edges) {
    Taxonomy t;
    t.concepts_.push_back({std::string(kPseudoRootId), std::string(kPseudoRootId), "", true});
    t.concepts_.push_back({std::string(kPseudoLeafId), std::string(kPseudoLeafId), "", true});
    t.index_.emplace(kPseudoRootId, kRoot);
    t.index_.emplace(kPseudoLeafId, kLeaf);
    for (auto& c : concepts) {
      if (c.id == kPseudoRootId || c.id == kPseudoLeafId) {
        if (c.is_pseudo) continue;
        throw DuplicateIdError("concept id '" + c.id + "' is reserved for pseudo nodes");
      }
      c.is_pseudo = false;
      const auto idx = static_cast<ConceptIndex>(t.concepts_.size());
      if (!t.index_.emplace(c.id, idx).second) {
        throw DuplicateIdError("duplicate concept id '" + c.id + "'");
      }
      t.concepts_.push_back(std::move(c));
    }
    t.parents_.assign(t.concepts_.size(), {});
    t.children_.assign(t.concepts_.size(), {});

    for (const auto& [parent, child] : edges) {
      const ConceptIndex p = t.index_of(parent);
      const ConceptIndex c = t.index_of(child);
      if (p < 2 || c < 2) continue;
      if (p == c) throw CycleError("self-edge on concept '" + parent + "'");
      t.children_[p].push_back(c);
      t.parents_[c].push_back(p);
    }
    for (ConceptIndex i = 2; i < t.size(); ++i) {
      t.duplicate_edges_ += sort_unique(t.children_[i]);
      sort_unique(t.parents_[i]);
    }
    t.check_acyclic();
    for (ConceptIndex i = 2; i < t.size(); ++i) t.repair_pseudo(i);
    t.check_reachable();
    return t;
  }

  std::size_t size() const { return concepts_.size(); }
  std::size_t concept_count() const { return concepts_.size() - 2; }

  const Concept& concept_at(ConceptIndex i) const { return concepts_.at(i); }
  const Concept& concept_at(std::string_view id) const { return concepts_[index_of(id)]; }
  const std::string& id(ConceptIndex i) const { return concepts_.at(i).id; }

  std::optional<ConceptIndex> find(std::string_view id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view id) const { return index_.find(id) != index_.end(); }
  ConceptIndex index_of(std::string_view id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw UnknownConceptError("unknown concept '" + std::string(id) + "'");
    return it->second;
  }

  static constexpr bool is_pseudo(ConceptIndex i) { return i < 2; }

  std::span<const ConceptIndex> parents(ConceptIndex i) const { return parents_.at(i); }
  std::span<const ConceptIndex> children(ConceptIndex i) const { return children_.at(i); }

  bool has_edge(ConceptIndex parent, ConceptIndex child) const {
    const auto& ch = children_.at(parent);
    return std::binary_search(ch.begin(), ch.end(), child);
  }

  /// True for natural concepts whose only child is the pseudo-leaf.
  bool is_leaf(ConceptIndex i) const {
    return !is_pseudo(i) && children_[i].size() == 1 && children_[i][0] == kLeaf;
  }
  /// True for natural concepts whose only parent is the pseudo-root.
  bool is_natural_root(ConceptIndex i) const {
    return !is_pseudo(i) && parents_[i].size() == 1 && parents_[i][0] == kRoot;
  }

  /// Non-pseudo concept indices in index order.
  std::vector<ConceptIndex> natural_concepts() const {
    std::vector<ConceptIndex> out(concept_count());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<ConceptIndex>(k + 2);
    return out;
  }

  /// Every edge including pseudo edges, ordered by (parent, child) index.
  std::vector<IndexEdge> edges() const {
    std::vector<IndexEdge> out;
    for (ConceptIndex p = 0; p < size(); ++p)
      for (ConceptIndex c : children_[p]) out.emplace_back(p, c);
    return out;
  }

  /// Edges whose endpoints are both natural concepts.
  std::vector<IndexEdge> natural_edges() const {
    std::vector<IndexEdge> out;
    for (ConceptIndex p = 2; p < size(); ++p)
      for (ConceptIndex c : children_[p])
        if (!is_pseudo(c)) out.emplace_back(p, c);
    return out;
  }

  std::vector<IdEdge> id_edges() const {
    std::vector<IdEdge> out;
    for (auto [p, c] : edges()) out.emplace_back(id(p), id(c));
    return out;
  }

  /// Natural concepts in input order (pseudo nodes excluded).
  std::vector<Concept> natural_concept_list() const {
    return {concepts_.begin() + 2, concepts_.end()};
  }

  /// True when `ancestor` is reachable from `node` by following parents
  /// (a node is not its own ancestor).
  bool is_ancestor(ConceptIndex ancestor, ConceptIndex node) const {
    if (ancestor == node) return false;
    if (ancestor == kRoot) return node != kRoot;
    std::vector<char> seen(size(), 0);
    std::vector<ConceptIndex> stack(parents_[node].begin(), parents_[node].end());
    while (!stack.empty()) {
      const ConceptIndex x = stack.back();
      stack.pop_back();
      if (x == ancestor) return true;
      if (seen[x]) continue;
      seen[x] = 1;
      for (ConceptIndex p : parents_[x]) stack.push_back(p);
    }
    return false;
  }

  bool related(ConceptIndex a, ConceptIndex b) const {
    return a == b || is_ancestor(a, b) || is_ancestor(b, a);
  }

  /// Shortest distance in edges from every ancestor of `node` (and the node
  /// itself, at distance 0) down to `node`, sorted by ancestor index.
  std::vector<std::pair<ConceptIndex, std::uint32_t>> ancestor_distances(ConceptIndex node) const {
    std::vector<std::uint32_t> dist(size(), kUnreached);
    std::deque<ConceptIndex> queue{node};
    dist[node] = 0;
    std::vector<std::pair<ConceptIndex, std::uint32_t>> out;
    while (!queue.empty()) {
      const ConceptIndex x = queue.front();
      queue.pop_front();
      out.emplace_back(x, dist[x]);
      for (ConceptIndex p : parents_[x]) {
        if (dist[p] == kUnreached) {
          dist[p] = dist[x] + 1;
          queue.push_back(p);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  TaxonomyStats stats() const {
    TaxonomyStats s;
    s.concepts = concept_count();
    s.edges = natural_edges().size();
    s.duplicate_edges = duplicate_edges_;
    const auto depths = shortest_depths();
    for (ConceptIndex i = 2; i < size(); ++i) {
      s.depth = std::max<std::size_t>(s.depth, depths[i] - 1);
      if (is_leaf(i)) ++s.leaves;
    }
    if (s.concepts > 0) s.leaf_ratio = static_cast<double>(s.leaves) / static_cast<double>(s.concepts);
    if (s.concepts > s.leaves)
      s.branching = static_cast<double>(s.edges) / static_cast<double>(s.concepts - s.leaves);
    return s;
  }

  /// Shortest root-path length in nodes for every concept (pseudo-root = 1).
  std::vector<std::uint32_t> shortest_depths() const {
    std::vector<std::uint32_t> depth(size(), kUnreached);
    std::deque<ConceptIndex> queue{kRoot};
    depth[kRoot] = 1;
    while (!queue.empty()) {
      const ConceptIndex x = queue.front();
      queue.pop_front();
      for (ConceptIndex c : children_[x]) {
        if (depth[c] == kUnreached) {
          depth[c] = depth[x] + 1;
          queue.push_back(c);
        }
      }
    }
    return depth;
  }

  /// Longest root-path length in nodes for every concept (pseudo-root = 1).
  std::vector<std::uint32_t> longest_depths() const {
    std::vector<std::uint32_t> depth(size(), 0);
    depth[kRoot] = 1;
    for (ConceptIndex x : topological_order())
      for (ConceptIndex c : children_[x]) depth[c] = std::max(depth[c], depth[x] + 1);
    return depth;
  }

  /// Parents-before-children order over all nodes, ties broken by index.
  std::vector<ConceptIndex> topological_order() const {
    std::vector<std::uint32_t> indegree(size(), 0);
    for (ConceptIndex i = 0; i < size(); ++i)
      indegree[i] = static_cast<std::uint32_t>(parents_[i].size());
    std::vector<ConceptIndex> order;
    order.reserve(size());
    std::vector<ConceptIndex> ready;
    for (ConceptIndex i = size(); i-- > 0;)
      if (indegree[i] == 0) ready.push_back(i);
    while (!ready.empty()) {
      const ConceptIndex x = ready.back();
      ready.pop_back();
      order.push_back(x);
      for (auto it = children_[x].rbegin(); it != children_[x].rend(); ++it)
        if (--indegree[*it] == 0) ready.push_back(*it);
    }
    return order;
  }

  /// Stable hash of the concept ids and edge structure.
  std::uint64_t fingerprint() const {
    std::uint64_t h = detail::fnv1a("taxonomy");
    for (const auto& c : concepts_) h = detail::fnv1a(c.id, detail::fnv1a("\x1f", h));
    for (auto [p, c] : edges()) {
      h = detail::fnv1a(id(p), detail::fnv1a("\x1e", h));
      h = detail::fnv1a(id(c), detail::fnv1a("\x1d", h));
    }
    return h;
  }

  friend bool operator==(const Taxonomy& a, const Taxonomy& b) {
    return a.concepts_ == b.concepts_ && a.parents_ == b.parents_ && a.children_ == b.children_;
  }

 private:
  friend class TaxonomyEditor;
  static constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

  Taxonomy() = default;

  static std::size_t sort_unique(std::vector<ConceptIndex>& v) {
    std::sort(v.begin(), v.end());
    const auto before = v.size();
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return before - v.size();
  }

  static void insert_sorted(std::vector<ConceptIndex>& v, ConceptIndex x) {
    const auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  }
  static void erase_sorted(std::vector<ConceptIndex>& v, ConceptIndex x) {
    const auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it != v.end() && *it == x) v.erase(it);
  }

  // Restores pseudo edges around a natural concept after its natural edges
  // changed.
  void repair_pseudo(ConceptIndex i) {
    const bool has_natural_parent =
        std::any_of(parents_[i].begin(), parents_[i].end(), [](ConceptIndex p) { return p >= 2; });
    if (has_natural_parent) {
      erase_sorted(parents_[i], kRoot);
      erase_sorted(children_[kRoot], i);
    } else {
      insert_sorted(parents_[i], kRoot);
      insert_sorted(children_[kRoot], i);
    }
    const bool has_natural_child =
        std::any_of(children_[i].begin(), children_[i].end(), [](ConceptIndex c) { return c >= 2; });
    if (has_natural_child) {
      erase_sorted(children_[i], kLeaf);
      erase_sorted(parents_[kLeaf], i);
    } else {
      insert_sorted(children_[i], kLeaf);
      insert_sorted(parents_[kLeaf], i);
    }
  }

  void check_acyclic() const {
    std::vector<std::uint32_t> indegree(size(), 0);
    for (ConceptIndex i = 2; i < size(); ++i)
      indegree[i] = static_cast<std::uint32_t>(parents_[i].size());
    std::vector<ConceptIndex> ready;
    for (ConceptIndex i = 2; i < size(); ++i)
      if (indegree[i] == 0) ready.push_back(i);
    std::size_t visited = 0;
    while (!ready.empty()) {
      const ConceptIndex x = ready.back();
      ready.pop_back();
      ++visited;
      for (ConceptIndex c : children_[x])
        if (c >= 2 && --indegree[c] == 0) ready.push_back(c);
    }
    if (visited == concept_count()) return;
    for (ConceptIndex i = 2; i < size(); ++i)
      if (indegree[i] != 0) throw CycleError("directed cycle through concept '" + id(i) + "'");
  }

  void check_reachable() const {
    const auto depth = shortest_depths();
    for (ConceptIndex i = 1; i < size(); ++i)
      if (depth[i] == kUnreached)
        throw OrphanError("concept '" + id(i) + "' is unreachable from the pseudo-root");
  }

  std::vector<Concept> concepts_;
  std::map<std::string, ConceptIndex, std::less<>> index_;
  std::vector<std::vector<ConceptIndex>> parents_;
  std::vector<std::vector<ConceptIndex>> children_;
  std::size_t duplicate_edges_ = 0;
};

/// Every simple directed path from the pseudo-root to `id`, in lexicographic
/// order of the id sequences.
inline std::vector<RootPath> root_paths(const Taxonomy& t, std::string_view id) {
  const ConceptIndex target = t.index_of(id);
  std::vector<RootPath> out;
  std::vector<ConceptIndex> trail{target};
  // Walk upwards; every upward walk in a DAG terminates at the pseudo-root.
  auto walk = [&](auto&& self, ConceptIndex x) -> void {
    if (x == Taxonomy::kRoot) {
      RootPath path;
      for (auto it = trail.rbegin(); it != trail.rend(); ++it) path.node_ids.push_back(t.id(*it));
      out.push_back(std::move(path));
      return;
    }
    for (ConceptIndex p : t.parents(x)) {
      trail.push_back(p);
      self(self, p);
      trail.pop_back();
    }
  };
  walk(walk, target);
  std::sort(out.begin(), out.end());
  return out;
}

/// Length in nodes of the shortest root path to `id`; the pseudo-root has
/// depth 1.
inline std::size_t depth(const Taxonomy& t, std::string_view id) {
  const ConceptIndex target = t.index_of(id);
  for (auto [node, dist] : t.ancestor_distances(target))
    if (node == Taxonomy::kRoot) return dist + 1;
  return 1;  // target is the pseudo-root
}

/// Wu-Palmer similarity over root paths.
///
/// For a pair of root paths the similarity is 2·L / (|p(a)| + |p(b)|) with L
/// the length of their shared prefix; the result is the maximum over all path
/// pairs. On trees this is the textbook 2·depth(lca) / (depth(a) + depth(b)).
/// The maximum is reached at some common ancestor x taking the longest path
/// down to x and the shortest continuations to a and b, which is what this
/// index evaluates in O(|anc(a)| + |anc(b)|) per query.
class WuPalmerIndex {
 public:
  explicit WuPalmerIndex(const Taxonomy& t) : ancestors_(t.size()), longest_(t.longest_depths()) {
    for (ConceptIndex i = 0; i < t.size(); ++i)
      if (i != Taxonomy::kLeaf) ancestors_[i] = t.ancestor_distances(i);
  }

  double operator()(ConceptIndex a, ConceptIndex b) const {
    if (a == Taxonomy::kLeaf || b == Taxonomy::kLeaf)
      throw PseudoLeafError("Wu-Palmer similarity is undefined for the pseudo-leaf");
    if (a == b) return 1.0;
    const auto& xa = ancestors_.at(a);
    const auto& xb = ancestors_.at(b);
    double best = 0.0;
    auto ia = xa.begin();
    auto ib = xb.begin();
    while (ia != xa.end() && ib != xb.end()) {
      if (ia->first < ib->first) {
        ++ia;
      } else if (ib->first < ia->first) {
        ++ib;
      } else {
        const double shared = 2.0 * longest_[ia->first];
        best = std::max(best, shared / (shared + ia->second + ib->second));
        ++ia;
        ++ib;
      }
    }
    return best;
  }

 private:
  std::vector<std::vector<std::pair<ConceptIndex, std::uint32_t>>> ancestors_;
  std::vector<std::uint32_t> longest_;
};

/// One-off Wu-Palmer query; build a WuPalmerIndex for bulk use.
inline double wu_palmer(const Taxonomy& t, std::string_view a, std::string_view b) {
  const ConceptIndex ia = t.index_of(a);
  const ConceptIndex ib = t.index_of(b);
  if (ia == Taxonomy::kLeaf || ib == Taxonomy::kLeaf)
    throw PseudoLeafError("Wu-Palmer similarity is undefined for the pseudo-leaf");
  if (ia == ib) return 1.0;
  const auto longest = t.longest_depths();
  const auto xa = t.ancestor_distances(ia);
  const auto xb = t.ancestor_distances(ib);
  double best = 0.0;
  for (auto [node, da] : xa) {
    const auto it = std::lower_bound(xb.begin(), xb.end(), std::make_pair(node, std::uint32_t{0}));
    if (it == xb.end() || it->first != node) continue;
    const double shared = 2.0 * longest[node];
    best = std::max(best, shared / (shared + da + it->second));
  }
  return best;
}

using IndexTriplet = std::array<ConceptIndex, 3>;

/// Triplets as index triples, sorted and unique.
inline std::vector<IndexTriplet> triplet_indices(const Taxonomy& t) {
  std::vector<IndexTriplet> out;
  for (ConceptIndex q = 2; q < t.size(); ++q)
    for (ConceptIndex p : t.parents(q))
      for (ConceptIndex c : t.children(q)) out.push_back({p, q, c});
  std::sort(out.begin(), out.end());
  return out;
}

/// One triplet per (parent, child) combination of every natural concept,
/// pseudo nodes standing in for missing parents or children.
inline std::vector<Triplet> triplets(const Taxonomy& t) {
  std::vector<Triplet> out;
  for (const auto& [p, q, c] : triplet_indices(t)) out.push_back({t.id(p), t.id(q), t.id(c)});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace taxometer
