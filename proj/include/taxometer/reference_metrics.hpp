#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxometer/taxonomy.hpp"

namespace taxometer {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  static PRF from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    PRF r{0.0, 0.0, 0.0, tp, fp, fn};
    if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
  }
};

inline nlohmann::json to_json(const PRF& r) {
  return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
          {"tp", r.tp},               {"fp", r.fp},         {"fn", r.fn}};
}

/// Triplet precision/recall/F1 of `predicted` against `gold`. A position is
/// correct only when both its parent and its child match.
inline PRF triplet_prf(const Taxonomy& predicted, const Taxonomy& gold) {
  if (predicted.concept_count() != gold.concept_count())
    throw ConceptSetMismatchError("taxonomies cover different concept sets");
  // Map predicted indices into the gold index space.
  std::vector<ConceptIndex> to_gold(predicted.size());
  to_gold[Taxonomy::kRoot] = Taxonomy::kRoot;
  to_gold[Taxonomy::kLeaf] = Taxonomy::kLeaf;
  for (ConceptIndex i = 2; i < predicted.size(); ++i) {
    const auto g = gold.find(predicted.id(i));
    if (!g) throw ConceptSetMismatchError("concept '" + predicted.id(i) + "' missing from gold taxonomy");
    to_gold[i] = *g;
  }
  auto mapped = triplet_indices(predicted);
  for (auto& tr : mapped)
    for (auto& x : tr) x = to_gold[x];
  std::sort(mapped.begin(), mapped.end());
  const auto reference = triplet_indices(gold);

  std::vector<IndexTriplet> common;
  std::set_intersection(mapped.begin(), mapped.end(), reference.begin(), reference.end(),
                        std::back_inserter(common));
  const std::size_t tp = common.size();
  return PRF::from_counts(tp, mapped.size() - tp, reference.size() - tp);
}

}  // namespace taxometer
