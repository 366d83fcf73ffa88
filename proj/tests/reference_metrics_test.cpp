#include <gtest/gtest.h>

#include <algorithm>
#include <iterator>
#include <random>
#include <set>

#include "support.hpp"
#include "taxometer/io.hpp"
#include "taxometer/mutation.hpp"
#include "taxometer/reference_metrics.hpp"

namespace tx = taxometer;
using tx::testing::make_taxonomy;

namespace {

// Set arithmetic over string triplets, independent of the index mapping.
tx::PRF oracle_prf(const tx::Taxonomy& predicted, const tx::Taxonomy& gold) {
  const auto p = tx::triplets(predicted);
  const auto g = tx::triplets(gold);
  const std::set<tx::Triplet> ps(p.begin(), p.end()), gs(g.begin(), g.end());
  std::size_t tp = 0;
  for (const auto& t : ps) tp += gs.count(t);
  return tx::PRF::from_counts(tp, ps.size() - tp, gs.size() - tp);
}

}  // namespace

TEST(TripletPrf, IdentityOnFixtures) {
  for (const char* name : {"food_small.tsv", "science_small.tsv", "diamond.json"}) {
    const auto t = tx::load_taxonomy(tx::testing::fixture(name));
    const auto r = tx::triplet_prf(t, t);
    EXPECT_EQ(r.precision, 1.0) << name;
    EXPECT_EQ(r.recall, 1.0) << name;
    EXPECT_EQ(r.f1, 1.0) << name;
    EXPECT_EQ(r.fp, 0u);
    EXPECT_EQ(r.fn, 0u);
  }
}

TEST(TripletPrf, StarLeafMove) {
  const auto star = make_taxonomy({"R", "a", "b", "c"}, {{"R", "a"}, {"R", "b"}, {"R", "c"}});
  const auto [moved, op] = tx::reparent(star, "a", "b");
  const auto r = tx::triplet_prf(moved, star);
  EXPECT_EQ(r.tp, 3u);  // (root,R,b) (root,R,c) (R,c,leaf)
  EXPECT_EQ(r.fp, 2u);  // (b,a,leaf) (R,b,a)
  EXPECT_EQ(r.fn, 3u);  // (root,R,a) (R,a,leaf) (R,b,leaf)
  EXPECT_DOUBLE_EQ(r.precision, 0.6);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 6.0 / 11.0);
}

TEST(TripletPrf, ChainVersusFlattened) {
  const auto gold = make_taxonomy({"R", "A", "B"}, {{"R", "A"}, {"A", "B"}});
  const auto predicted = make_taxonomy({"R", "A", "B"}, {{"R", "A"}, {"R", "B"}});
  const auto r = tx::triplet_prf(predicted, gold);
  const auto o = oracle_prf(predicted, gold);
  EXPECT_EQ(r.tp, o.tp);
  EXPECT_EQ(r.fp, o.fp);
  EXPECT_EQ(r.fn, o.fn);
  EXPECT_EQ(r.tp, 1u);  // only (root,R,A) survives
}

TEST(TripletPrf, DisjointPlacementsScoreZero) {
  const auto gold = make_taxonomy({"a", "b"}, {{"a", "b"}});
  const auto predicted = make_taxonomy({"a", "b"}, {{"b", "a"}});
  const auto r = tx::triplet_prf(predicted, gold);
  EXPECT_EQ(r.tp, 0u);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
}

TEST(TripletPrf, MatchesSetOracleAndIsSymmetric) {
  std::mt19937_64 gen(3);
  for (int round = 0; round < 30; ++round) {
    const auto gold = tx::testing::random_taxonomy(gen, 25, 0.2);
    tx::detail::Rng rng(round);
    tx::TaxonomyEditor editor(gold);
    for (int k = 0; k < 1 + round % 6; ++k) editor.mutate(tx::MutationKind::any, rng);
    const auto& predicted = editor.taxonomy();
    const auto r = tx::triplet_prf(predicted, gold);
    const auto o = oracle_prf(predicted, gold);
    EXPECT_EQ(r.tp, o.tp);
    EXPECT_EQ(r.fp, o.fp);
    EXPECT_EQ(r.fn, o.fn);
    const auto back = tx::triplet_prf(gold, predicted);
    EXPECT_EQ(back.tp, r.tp);
    EXPECT_DOUBLE_EQ(back.precision, r.recall);
    EXPECT_DOUBLE_EQ(back.recall, r.precision);
    EXPECT_LT(r.f1, 1.0);
  }
}

TEST(TripletPrf, IndependentOfInputOrder) {
  const auto a = make_taxonomy({"x", "y", "z"}, {{"x", "y"}, {"x", "z"}});
  const auto b = make_taxonomy({"z", "y", "x"}, {{"x", "z"}, {"x", "y"}});
  EXPECT_EQ(tx::triplet_prf(a, b).f1, 1.0);
  EXPECT_EQ(tx::triplets(a), tx::triplets(b));
}

TEST(TripletPrf, RejectsDifferentConceptSets) {
  const auto a = make_taxonomy({"x", "y"}, {});
  const auto b = make_taxonomy({"x", "z"}, {});
  const auto c = make_taxonomy({"x"}, {});
  EXPECT_THROW(tx::triplet_prf(a, b), tx::ConceptSetMismatchError);
  EXPECT_THROW(tx::triplet_prf(a, c), tx::ConceptSetMismatchError);
}
