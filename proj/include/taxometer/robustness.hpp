#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "taxometer/gateway.hpp"
#include "taxometer/kendall.hpp"
#include "taxometer/taxonomy.hpp"

namespace taxometer {

struct PairPolicy {
  enum class Kind { automatic, exhaustive, sampled };
  Kind kind = Kind::automatic;
  std::size_t count = 2'000'000;
  std::uint64_t seed = 0;
  std::size_t exhaustive_limit = 2000;  // automatic: exhaustive up to this many concepts

  static PairPolicy exhaustive() { return {Kind::exhaustive}; }
  static PairPolicy sampled(std::size_t count, std::uint64_t seed) { return {Kind::sampled, count, seed}; }
};

/// Unordered pairs of distinct natural concepts, sorted, no repeats.
struct PairSample {
  std::vector<IndexEdge> pairs;
  bool exhaustive = true;
};

inline PairSample make_pair_sample(const Taxonomy& t, const PairPolicy& policy = {}) {
  const std::uint64_t n = t.concept_count();
  const std::uint64_t total = n < 2 ? 0 : n * (n - 1) / 2;
  const bool exhaustive = policy.kind == PairPolicy::Kind::exhaustive ||
                          (policy.kind == PairPolicy::Kind::automatic && n <= policy.exhaustive_limit) ||
                          policy.count >= total;
  PairSample s;
  s.exhaustive = exhaustive;
  if (exhaustive) {
    s.pairs.reserve(total);
    for (ConceptIndex a = 2; a < t.size(); ++a)
      for (ConceptIndex b = a + 1; b < t.size(); ++b) s.pairs.emplace_back(a, b);
    return s;
  }
  // Floyd's sampling without replacement over linear pair ranks.
  detail::Rng rng(policy.seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(policy.count * 2);
  for (std::uint64_t j = total - policy.count; j < total; ++j) {
    const std::uint64_t r = detail::uniform_below(rng, j + 1);
    if (!chosen.insert(r).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> ranks(chosen.begin(), chosen.end());
  std::sort(ranks.begin(), ranks.end());
  // Rank k enumerates (i, j), i < j, row by row: row i starts at i*n - i(i+1)/2.
  auto row_start = [n](std::uint64_t i) { return i * n - i * (i + 1) / 2; };
  s.pairs.reserve(ranks.size());
  std::uint64_t i = 0;
  for (std::uint64_t k : ranks) {
    while (row_start(i + 1) <= k) ++i;
    const std::uint64_t j = k - row_start(i) + i + 1;
    s.pairs.emplace_back(static_cast<ConceptIndex>(i + 2), static_cast<ConceptIndex>(j + 2));
  }
  return s;
}

/// Pairwise semantic similarities over the representation texts of a
/// taxonomy's natural concepts. Depends only on the concept list, so one
/// instance serves every edge-edited copy of the taxonomy.
class SimilarityMatrix {
 public:
  static constexpr std::size_t kDenseLimit = 2048;

  SimilarityMatrix(const Taxonomy& t, SimilarityProvider& provider) : provider_(&provider), size_(t.size()) {
    texts_.resize(t.size());
    std::vector<std::string> unique;
    std::map<std::string, std::size_t, std::less<>> slot;
    std::vector<std::size_t> text_slot(t.size(), 0);
    for (ConceptIndex i = 2; i < t.size(); ++i) {
      texts_[i] = representation_text(t.concept_at(i));
      if (texts_[i].empty()) throw MissingEmbeddingError("concept '" + t.id(i) + "' has no representation text");
      const auto [it, fresh] = slot.emplace(texts_[i], unique.size());
      if (fresh) unique.push_back(texts_[i]);
      text_slot[i] = it->second;
    }
    ids_hash_ = ids_hash(t);
    const auto vectors = unique.empty() ? std::vector<Embedding>{} : provider.embed(unique);
    if (vectors.size() != unique.size()) throw MalformedResponseError("provider returned a wrong number of vectors");
    embeddings_.resize(t.size());
    for (ConceptIndex i = 2; i < t.size(); ++i) embeddings_[i] = vectors[text_slot[i]];

    if (t.size() <= kDenseLimit) {
      dense_.assign(t.size() * t.size(), 0.0);
      for (ConceptIndex a = 2; a < t.size(); ++a) {
        dense_[a * size_ + a] = 1.0;
        for (ConceptIndex b = a + 1; b < t.size(); ++b) dense_[a * size_ + b] = dense_[b * size_ + a] = compute(a, b);
      }
    }
  }

  double operator()(ConceptIndex a, ConceptIndex b) const {
    if (Taxonomy::is_pseudo(a) || Taxonomy::is_pseudo(b))
      throw PseudoConceptError("pseudo nodes have no semantic representation");
    if (!dense_.empty()) return dense_[a * size_ + b];
    return a == b ? 1.0 : compute(a, b);
  }

  /// True when `t` has the concept list this matrix was built for.
  bool compatible(const Taxonomy& t) const { return t.size() == size_ && ids_hash(t) == ids_hash_; }

  const Embedding& embedding(ConceptIndex i) const { return embeddings_.at(i); }

 private:
  static std::uint64_t ids_hash(const Taxonomy& t) {
    std::uint64_t h = detail::fnv1a("ids");
    for (ConceptIndex i = 2; i < t.size(); ++i) h = detail::fnv1a(t.id(i), detail::fnv1a("\x1f", h));
    return h;
  }

  double compute(ConceptIndex a, ConceptIndex b) const {
    if (const auto s = provider_->scripted_similarity(texts_[a], texts_[b])) return *s;
    return cosine(embeddings_[a], embeddings_[b]);
  }

  const SimilarityProvider* provider_;
  std::size_t size_;
  std::uint64_t ids_hash_ = 0;
  std::vector<std::string> texts_;
  std::vector<Embedding> embeddings_;
  std::vector<double> dense_;
};

/// Taxonomic vs semantic similarity series over a pair sample, in pair order.
struct SimilaritySeries {
  std::vector<double> taxonomic;
  std::vector<double> semantic;
};

inline SimilaritySeries similarity_series(const Taxonomy& t, const SimilarityMatrix& sim, const PairSample& sample,
                                          unsigned workers = 1) {
  if (!sim.compatible(t)) throw MissingEmbeddingError("similarity matrix was built for another concept list");
  const WuPalmerIndex wps(t);
  SimilaritySeries s;
  s.taxonomic.resize(sample.pairs.size());
  s.semantic.resize(sample.pairs.size());
  detail::parallel_for(sample.pairs.size(), workers, [&](std::size_t k) {
    const auto [a, b] = sample.pairs[k];
    s.taxonomic[k] = wps(a, b);
    s.semantic[k] = sim(a, b);
  });
  return s;
}

/// Robustness score: Kendall tau-b between Wu-Palmer similarity and semantic
/// similarity over concept pairs. Higher is better.
inline CorrelationResult csc(const Taxonomy& t, const SimilarityMatrix& sim, const PairSample& sample,
                             unsigned workers = 1) {
  const auto series = similarity_series(t, sim, sample, workers);
  return kendall_tau_b(series.taxonomic, series.semantic);
}

inline CorrelationResult csc(const Taxonomy& t, SimilarityProvider& provider, const PairPolicy& policy = {},
                             unsigned workers = 1) {
  const SimilarityMatrix sim(t, provider);
  return csc(t, sim, make_pair_sample(t, policy), workers);
}

struct SemanticProximity {
  std::optional<double> ratio;  // empty when no sibling-leaf group qualifies
  std::size_t groups = 0;
};

/// Groups of at least two natural leaves sharing a natural parent, sorted.
inline std::vector<std::vector<ConceptIndex>> leaf_sibling_groups(const Taxonomy& t) {
  std::vector<std::vector<ConceptIndex>> groups;
  for (ConceptIndex p = 2; p < t.size(); ++p) {
    std::vector<ConceptIndex> g;
    for (ConceptIndex c : t.children(p))
      if (t.is_leaf(c)) g.push_back(c);
    if (g.size() >= 2) groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end());
  return groups;
}

/// Baseline robustness: share of sibling-leaf groups whose least similar
/// member pair is still more similar than the group's least similar outside
/// concept.
inline SemanticProximity semantic_proximity(const Taxonomy& t, const SimilarityMatrix& sim) {
  if (!sim.compatible(t)) throw MissingEmbeddingError("similarity matrix was built for another concept list");
  SemanticProximity out;
  std::size_t hits = 0;
  std::vector<char> in_group(t.size(), 0);
  for (const auto& g : leaf_sibling_groups(t)) {
    double intra = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < g.size(); ++x)
      for (std::size_t y = x + 1; y < g.size(); ++y) intra = std::min(intra, sim(g[x], g[y]));
    for (ConceptIndex c : g) in_group[c] = 1;
    double extra = std::numeric_limits<double>::infinity();
    for (ConceptIndex i : g)
      for (ConceptIndex k = 2; k < t.size(); ++k)
        if (!in_group[k]) extra = std::min(extra, sim(i, k));
    for (ConceptIndex c : g) in_group[c] = 0;
    if (std::isinf(extra)) continue;  // the group is the whole taxonomy
    ++out.groups;
    if (intra > extra) ++hits;
  }
  if (out.groups > 0) out.ratio = static_cast<double>(hits) / static_cast<double>(out.groups);
  return out;
}

inline SemanticProximity semantic_proximity(const Taxonomy& t, SimilarityProvider& provider) {
  const SimilarityMatrix sim(t, provider);
  return semantic_proximity(t, sim);
}

}  // namespace taxometer
