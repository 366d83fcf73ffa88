#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxometer/gateway.hpp"
#include "taxometer/taxonomy.hpp"

namespace taxometer {

enum class AdequacyMode { strong, weak };

inline std::string to_string(AdequacyMode m) { return m == AdequacyMode::strong ? "strong" : "weak"; }

/// Surface lemma of a concept name: lowercased, '_' and '-' read as spaces,
/// trailing parenthetical qualifiers dropped, whitespace collapsed.
inline std::string lemma(std::string_view name) {
  std::string s = detail::to_lower(detail::trim(name));
  while (!s.empty() && s.back() == ')') {
    const auto open = s.rfind('(');
    if (open == std::string::npos) break;
    s.erase(open);
    s = std::string(detail::trim(s));
  }
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == '_' || c == '-' || std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

struct RelationPrompt {
  std::string premise;
  std::string hypothesis;
  std::string parent_id;
  std::string child_id;
};

/// NLI input for a parent-child edge. The premise states the child's gloss
/// ("<child> is <gloss>", or "<child> is a <child>" without a gloss); the
/// hypothesis is "<child> is a kind of <parent>".
inline RelationPrompt relation_prompt(const Concept& parent, const Concept& child) {
  if (parent.is_pseudo || child.is_pseudo) throw PseudoConceptError("pseudo nodes have no relation prompt");
  const std::string child_lemma = lemma(child.name);
  const std::string_view gloss = detail::trim(child.description);
  RelationPrompt p;
  p.premise = gloss.empty() ? child_lemma + " is a " + child_lemma : child_lemma + " is " + std::string(gloss);
  p.hypothesis = child_lemma + " is a kind of " + lemma(parent.name);
  p.parent_id = parent.id;
  p.child_id = child.id;
  return p;
}

/// Adequacy probability of one relation: entailment (strong) or
/// non-contradiction (weak).
inline double relation_probability(const RelationJudgment& j, AdequacyMode mode) {
  return mode == AdequacyMode::strong ? j.p_entails : 1.0 - j.p_contradicts;
}

struct ClassificationProbability {
  double joint = 0.0;
  double normalized = 0.0;
};

/// Joint adequacy of a classification walk and its geometric-mean
/// normalization. Accumulates in log space; any zero makes both zero.
inline ClassificationProbability classification_probability(std::span<const double> probs) {
  if (probs.empty()) throw EmptyClassificationError("classification has no scored relation");
  double log_sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidProbabilityError("relation probability outside [0,1]");
    if (p == 0.0) return {0.0, 0.0};
    log_sum += std::log(p);
  }
  const double k = static_cast<double>(probs.size());
  return {std::exp(log_sum), std::exp(log_sum / k)};
}

/// Reciprocal geometric mean of a probability sequence; +inf if any is 0.
inline double perplexity(std::span<const double> probs) {
  if (probs.empty()) throw EmptyClassificationError("perplexity of an empty sequence");
  double log_sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidProbabilityError("probability outside [0,1]");
    if (p == 0.0) return std::numeric_limits<double>::infinity();
    log_sum += std::log(p);
  }
  return std::exp(-log_sum / static_cast<double>(probs.size()));
}

/// Persistent per-edge judgment cache: one JSON record per line with
/// parent_id, child_id, p_contradicts, p_neutral, p_entails and
/// provider_fingerprint. New records are appended as they are learned.
class EdgeCache {
 public:
  EdgeCache() = default;
  explicit EdgeCache(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(file_);
    std::string line;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        continue;  // torn trailing write
      }
      RelationJudgment j{rec.value("p_contradicts", -1.0), rec.value("p_neutral", -1.0), rec.value("p_entails", -1.0)};
      if (!j.valid()) continue;
      entries_[{rec.value("parent_id", ""), rec.value("child_id", ""), rec.value("provider_fingerprint", "")}] = j;
    }
  }

  std::optional<RelationJudgment> find(const std::string& parent, const std::string& child,
                                       const std::string& fingerprint) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find({parent, child, fingerprint});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const std::string& parent, const std::string& child, const std::string& fingerprint,
              const RelationJudgment& j) {
    std::lock_guard lock(mutex_);
    if (!entries_.emplace(Key{parent, child, fingerprint}, j).second) return;
    if (file_.empty()) return;
    std::ofstream out(file_, std::ios::app | std::ios::binary);
    nlohmann::json rec = {{"parent_id", parent},         {"child_id", child},
                          {"p_contradicts", j.p_contradicts}, {"p_neutral", j.p_neutral},
                          {"p_entails", j.p_entails},     {"provider_fingerprint", fingerprint}};
    out << rec.dump() << '\n';
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::map<Key, RelationJudgment> entries_;
};

struct NlivOptions {
  unsigned workers = 1;
  std::size_t batch = 32;
  EdgeCache* cache = nullptr;
};

struct NlivResult {
  double score = 0.0;
  std::size_t scored_concepts = 0;
  std::size_t scored_edges = 0;
  std::size_t cache_hits = 0;
};

inline nlohmann::json to_json(const NlivResult& r) {
  return {{"score", r.score},
          {"scored_concepts", r.scored_concepts},
          {"scored_edges", r.scored_edges},
          {"cache_hits", r.cache_hits}};
}

/// Judgments for every natural edge of `t`, in natural_edges() order. Each
/// edge reaches the provider at most once.
inline std::vector<RelationJudgment> judge_edges(const Taxonomy& t, NliProvider& nli, const NlivOptions& opt,
                                                 std::size_t* cache_hits = nullptr) {
  const auto edges = t.natural_edges();
  std::vector<RelationJudgment> judgments(edges.size());
  const std::string fingerprint = nli.fingerprint();
  std::vector<std::size_t> misses;
  std::size_t hits = 0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (opt.cache) {
      if (auto j = opt.cache->find(t.id(edges[e].first), t.id(edges[e].second), fingerprint)) {
        judgments[e] = *j;
        ++hits;
        continue;
      }
    }
    misses.push_back(e);
  }
  if (cache_hits) *cache_hits = hits;

  const std::size_t batch = std::max<std::size_t>(1, opt.batch);
  const std::size_t chunks = (misses.size() + batch - 1) / batch;
  std::vector<std::exception_ptr> failures(chunks);
  detail::parallel_for(chunks, opt.workers, [&](std::size_t chunk) {
    const std::size_t begin = chunk * batch;
    const std::size_t end = std::min(misses.size(), begin + batch);
    std::vector<NliPair> pairs;
    for (std::size_t m = begin; m < end; ++m) {
      const auto [p, c] = edges[misses[m]];
      auto prompt = relation_prompt(t.concept_at(p), t.concept_at(c));
      pairs.push_back({std::move(prompt.premise), std::move(prompt.hypothesis)});
    }
    try {
      const auto results = nli.nli_batch(pairs);
      if (results.size() != pairs.size()) throw MalformedResponseError("provider returned a wrong number of judgments");
      for (std::size_t m = begin; m < end; ++m) {
        const auto& j = results[m - begin];
        if (!j.valid()) throw MalformedResponseError("judgment is not a probability distribution");
        judgments[misses[m]] = j;
      }
    } catch (...) {
      failures[chunk] = std::current_exception();
    }
  });
  for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
    if (!failures[chunk]) continue;
    const auto [p, c] = edges[misses[chunk * batch]];
    try {
      std::rethrow_exception(failures[chunk]);
    } catch (const std::exception& e) {
      throw BackendUnavailableError("scoring edge " + t.id(p) + " -> " + t.id(c) + " (batch of " +
                                    std::to_string(std::min(batch, misses.size() - chunk * batch)) +
                                    "): " + e.what());
    }
  }
  if (opt.cache)
    for (std::size_t e : misses) opt.cache->insert(t.id(edges[e].first), t.id(edges[e].second), fingerprint, judgments[e]);
  return judgments;
}

/// Per-concept normalized adequacy, averaged over the concept's root paths
/// (pseudo edges are not scored). Natural roots have no entry.
inline std::vector<std::optional<double>> concept_adequacy(const Taxonomy& t, std::span<const IndexEdge> edges,
                                                           std::span<const double> edge_probs) {
  std::map<IndexEdge, double> prob;
  for (std::size_t e = 0; e < edges.size(); ++e) prob[edges[e]] = edge_probs[e];

  // For every node, the (log-sum, length, has-zero) of each natural path
  // ending at it, built parents first.
  struct Walk {
    double log_sum;
    std::uint32_t length;
    bool zero;
  };
  std::vector<std::vector<Walk>> walks(t.size());
  std::vector<std::optional<double>> out(t.size());
  for (ConceptIndex x : t.topological_order()) {
    if (Taxonomy::is_pseudo(x)) continue;
    auto& mine = walks[x];
    for (ConceptIndex p : t.parents(x)) {
      if (Taxonomy::is_pseudo(p)) {
        mine.push_back({0.0, 0, false});
        continue;
      }
      const double q = prob.at({p, x});
      for (const Walk& w : walks[p])
        mine.push_back({q > 0.0 ? w.log_sum + std::log(q) : w.log_sum, w.length + 1, w.zero || q == 0.0});
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (const Walk& w : mine) {
      if (w.length == 0) continue;
      sum += w.zero ? 0.0 : std::exp(w.log_sum / w.length);
      ++count;
    }
    if (count > 0) out[x] = sum / static_cast<double>(count);
  }
  return out;
}

/// Logical adequacy score: mean over non-root concepts of the
/// geometric-mean-normalized adequacy of their classification walks.
inline NlivResult nliv(const Taxonomy& t, NliProvider& provider, AdequacyMode mode, const NlivOptions& opt = {}) {
  NlivResult r;
  const auto edges = t.natural_edges();
  const auto judgments = judge_edges(t, provider, opt, &r.cache_hits);
  std::vector<double> probs(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) probs[e] = relation_probability(judgments[e], mode);
  r.scored_edges = edges.size();

  const auto per_concept = concept_adequacy(t, edges, probs);
  double sum = 0.0;
  for (ConceptIndex c = 2; c < t.size(); ++c) {
    if (!per_concept[c]) continue;
    sum += *per_concept[c];
    ++r.scored_concepts;
  }
  if (r.scored_concepts == 0) throw EmptyClassificationError("taxonomy has no non-root concept to classify");
  r.score = sum / static_cast<double>(r.scored_concepts);
  return r;
}

}  // namespace taxometer
