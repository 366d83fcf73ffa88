#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxometer/detail/util.hpp"
#include "taxometer/taxonomy.hpp"

namespace taxometer {

enum class MutationKind { leaf, non_leaf, any };

inline std::string to_string(MutationKind k) {
  switch (k) {
    case MutationKind::leaf: return "leaf";
    case MutationKind::non_leaf: return "non-leaf";
    case MutationKind::any: return "any";
  }
  return "any";
}

inline MutationKind parse_mutation_kind(std::string_view s) {
  if (s == "leaf") return MutationKind::leaf;
  if (s == "non-leaf" || s == "non_leaf") return MutationKind::non_leaf;
  if (s == "any" || s == "all") return MutationKind::any;
  throw ParseError("unknown mutation kind '" + std::string(s) + "' (expected any|leaf|non-leaf)");
}

/// One relocation: `moved_id` loses all its parents and hangs under
/// `new_parent_id`, taking its descendants along.
struct MutationOp {
  MutationKind kind = MutationKind::any;
  std::string moved_id;
  std::vector<std::string> old_parent_ids;  // natural parents only
  std::string new_parent_id;

  friend bool operator==(const MutationOp&, const MutationOp&) = default;
};

inline nlohmann::json to_json(const MutationOp& op) {
  return {{"kind", to_string(op.kind)},
          {"moved", op.moved_id},
          {"old_parents", op.old_parent_ids},
          {"new_parent", op.new_parent_id}};
}

inline MutationOp mutation_op_from_json(const nlohmann::json& j) {
  MutationOp op;
  op.kind = parse_mutation_kind(j.at("kind").get<std::string>());
  op.moved_id = j.at("moved").get<std::string>();
  op.old_parent_ids = j.at("old_parents").get<std::vector<std::string>>();
  op.new_parent_id = j.at("new_parent").get<std::string>();
  return op;
}

/// In-place editing of a taxonomy copy. Every edit keeps the DAG and pseudo
/// invariants intact.
class TaxonomyEditor {
 public:
  explicit TaxonomyEditor(Taxonomy t) : t_(std::move(t)) {}

  const Taxonomy& taxonomy() const { return t_; }
  Taxonomy release() && { return std::move(t_); }

  static bool eligible_mover(const Taxonomy& t, ConceptIndex c, MutationKind kind) {
    if (Taxonomy::is_pseudo(c)) return false;
    switch (kind) {
      case MutationKind::leaf: return t.is_leaf(c);
      case MutationKind::non_leaf: return !t.is_leaf(c);
      case MutationKind::any: return true;
    }
    return false;
  }

  /// Mover and new parent must be distinct natural concepts, neither an
  /// ancestor of the other.
  static bool eligible_pair(const Taxonomy& t, ConceptIndex moved, ConceptIndex new_parent) {
    return !Taxonomy::is_pseudo(moved) && !Taxonomy::is_pseudo(new_parent) && !t.related(moved, new_parent);
  }

  MutationOp reparent(ConceptIndex moved, ConceptIndex new_parent, MutationKind kind = MutationKind::any) {
    if (!eligible_pair(t_, moved, new_parent))
      throw NoEligiblePairError("cannot move '" + t_.id(moved) + "' under related or pseudo concept '" +
                                t_.id(new_parent) + "'");
    MutationOp op{kind, t_.id(moved), {}, t_.id(new_parent)};
    const std::vector<ConceptIndex> old_parents(t_.parents_[moved].begin(), t_.parents_[moved].end());
    for (ConceptIndex p : old_parents) {
      Taxonomy::erase_sorted(t_.children_[p], moved);
      if (!Taxonomy::is_pseudo(p)) op.old_parent_ids.push_back(t_.id(p));
    }
    t_.parents_[moved].clear();
    Taxonomy::insert_sorted(t_.parents_[moved], new_parent);
    Taxonomy::insert_sorted(t_.children_[new_parent], moved);
    for (ConceptIndex p : old_parents)
      if (!Taxonomy::is_pseudo(p)) t_.repair_pseudo(p);
    t_.repair_pseudo(new_parent);
    t_.repair_pseudo(moved);
    return op;
  }

  /// Replays a recorded op by ids.
  MutationOp apply(const MutationOp& op) {
    return reparent(t_.index_of(op.moved_id), t_.index_of(op.new_parent_id), op.kind);
  }

  /// Samples an eligible (mover, new parent) pair uniformly and applies it.
  /// Movers are drawn from the concepts of the requested kind in the current
  /// taxonomy and new parents from all natural concepts; related pairs are
  /// rejected. After 10·|V| rejections the eligible pairs are enumerated.
  MutationOp mutate(MutationKind kind, detail::Rng& rng) {
    std::vector<ConceptIndex> movers;
    for (ConceptIndex c = 2; c < t_.size(); ++c)
      if (eligible_mover(t_, c, kind)) movers.push_back(c);
    const std::uint64_t n = t_.concept_count();
    if (!movers.empty() && n >= 2) {
      for (std::uint64_t attempt = 0; attempt < 10 * n; ++attempt) {
        const ConceptIndex m = movers[detail::uniform_below(rng, movers.size())];
        const auto p = static_cast<ConceptIndex>(2 + detail::uniform_below(rng, n));
        if (eligible_pair(t_, m, p)) return reparent(m, p, kind);
      }
      std::vector<IndexEdge> pairs;
      for (ConceptIndex m : movers)
        for (ConceptIndex p = 2; p < t_.size(); ++p)
          if (eligible_pair(t_, m, p)) pairs.emplace_back(m, p);
      if (!pairs.empty()) {
        const auto [m, p] = pairs[detail::uniform_below(rng, pairs.size())];
        return reparent(m, p, kind);
      }
    }
    throw NoEligiblePairError("no eligible " + to_string(kind) + " mutation in this taxonomy");
  }

 private:
  Taxonomy t_;
};

inline std::pair<Taxonomy, MutationOp> mutate(const Taxonomy& t, MutationKind kind, detail::Rng& rng) {
  TaxonomyEditor editor(t);
  auto op = editor.mutate(kind, rng);
  return {std::move(editor).release(), std::move(op)};
}

inline std::pair<Taxonomy, MutationOp> reparent(const Taxonomy& t, std::string_view moved_id,
                                                std::string_view new_parent_id) {
  TaxonomyEditor editor(t);
  auto op = editor.reparent(t.index_of(moved_id), t.index_of(new_parent_id));
  return {std::move(editor).release(), std::move(op)};
}

inline const std::vector<std::size_t>& default_schedule() {
  static const std::vector<std::size_t> schedule{1, 8, 64, 512, 4096};
  return schedule;
}

struct DegradationTrace {
  std::uint64_t seed = 0;
  MutationKind kind = MutationKind::any;
  std::vector<std::size_t> schedule;
  std::vector<std::size_t> checkpoints;  // schedule entries actually reached
  std::vector<MutationOp> ops;
  bool truncated = false;
  std::string taxonomy_fingerprint;
};

inline void check_schedule(const std::vector<std::size_t>& schedule) {
  for (std::size_t i = 0; i < schedule.size(); ++i)
    if (schedule[i] == 0 || (i > 0 && schedule[i] <= schedule[i - 1]))
      throw ParseError("schedule must be strictly increasing positive integers");
}

using CheckpointCallback = std::function<void(std::size_t mutations, const Taxonomy& snapshot)>;

/// Applies seeded mutations cumulatively and reports each checkpoint of the
/// schedule. Running out of eligible pairs truncates the trace at the last
/// reached checkpoint.
inline DegradationTrace degrade(const Taxonomy& t, const std::vector<std::size_t>& schedule, MutationKind kind,
                                std::uint64_t seed, const CheckpointCallback& on_checkpoint = {}) {
  check_schedule(schedule);
  DegradationTrace trace;
  trace.seed = seed;
  trace.kind = kind;
  trace.schedule = schedule;
  trace.taxonomy_fingerprint = detail::hex64(t.fingerprint());
  detail::Rng rng(seed);
  TaxonomyEditor editor(t);
  for (std::size_t target : schedule) {
    try {
      while (trace.ops.size() < target) trace.ops.push_back(editor.mutate(kind, rng));
    } catch (const NoEligiblePairError&) {
      trace.truncated = true;
      const std::size_t keep = trace.checkpoints.empty() ? 0 : trace.checkpoints.back();
      trace.ops.resize(keep);
      break;
    }
    trace.checkpoints.push_back(target);
    if (on_checkpoint) on_checkpoint(target, editor.taxonomy());
  }
  return trace;
}

/// Replays the first `mutations` ops of a trace on the original taxonomy.
inline Taxonomy materialize(const Taxonomy& original, const DegradationTrace& trace, std::size_t mutations) {
  if (mutations > trace.ops.size()) throw ParseError("trace holds fewer mutations than requested");
  TaxonomyEditor editor(original);
  for (std::size_t i = 0; i < mutations; ++i) editor.apply(trace.ops[i]);
  return std::move(editor).release();
}

inline void write_trace(const DegradationTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  nlohmann::json header = {{"seed", trace.seed},
                           {"kind", to_string(trace.kind)},
                           {"schedule", trace.schedule},
                           {"checkpoints", trace.checkpoints},
                           {"truncated", trace.truncated},
                           {"taxonomy_fingerprint", trace.taxonomy_fingerprint}};
  out << header.dump() << '\n';
  for (const auto& op : trace.ops) out << to_json(op).dump() << '\n';
}

inline DegradationTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  DegradationTrace trace;
  std::string line;
  bool header = true;
  try {
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (header) {
        trace.seed = j.at("seed").get<std::uint64_t>();
        trace.kind = parse_mutation_kind(j.at("kind").get<std::string>());
        trace.schedule = j.at("schedule").get<std::vector<std::size_t>>();
        trace.checkpoints = j.value("checkpoints", std::vector<std::size_t>{});
        trace.truncated = j.value("truncated", false);
        trace.taxonomy_fingerprint = j.at("taxonomy_fingerprint").get<std::string>();
        header = false;
      } else {
        trace.ops.push_back(mutation_op_from_json(j));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed trace '" + path.string() + "': " + e.what());
  }
  if (header) throw ParseError("trace '" + path.string() + "' has no header");
  return trace;
}

}  // namespace taxometer
