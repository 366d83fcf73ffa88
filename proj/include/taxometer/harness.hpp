#pragma once

// Degradation studies: score every metric along seeded mutation traces,
// correlate each metric with F1, verify NLI relation judgments and compute
// the masked-LM RaTE baseline.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxometer/adequacy.hpp"
#include "taxometer/gateway.hpp"
#include "taxometer/io.hpp"
#include "taxometer/kendall.hpp"
#include "taxometer/mutation.hpp"
#include "taxometer/reference_metrics.hpp"
#include "taxometer/robustness.hpp"

namespace taxometer {

inline constexpr double kNA = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------- RaTE

/// Masked-LM baseline: share of natural edges whose parent lemma appears
/// among the top-k fillers of "<child> is a kind of [MASK].". Empty when the
/// provider is unavailable or there is no edge.
inline std::optional<double> rate_score(const Taxonomy& t, FillMaskProvider& mlm, std::size_t k) {
  const auto edges = t.natural_edges();
  if (edges.empty()) return std::nullopt;
  std::size_t hits = 0;
  try {
    for (const auto& [p, c] : edges) {
      const std::string prompt = lemma(t.concept_at(c).name) + " is a kind of " + std::string(kMaskToken) + ".";
      const std::string parent = lemma(t.concept_at(p).name);
      for (const auto& cand : mlm.fill_mask(prompt, k)) {
        if (lemma(cand.token) == parent) {
          ++hits;
          break;
        }
      }
    }
  } catch (const BackendUnavailableError&) {
    return std::nullopt;
  }
  return static_cast<double>(hits) / static_cast<double>(edges.size());
}

// ---------------------------------------------------------------- NLI verification

struct WindowPRF {
  double lower = 0.0;  // window is (lower, upper]
  double upper = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::optional<double> precision, recall, f1;
};

inline nlohmann::json to_json(const WindowPRF& w) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json("NA"); };
  return {{"window", {w.lower, w.upper}}, {"positives", w.positives}, {"negatives", w.negatives},
          {"tp", w.tp}, {"fp", w.fp}, {"fn", w.fn},
          {"precision", opt(w.precision)}, {"recall", opt(w.recall)}, {"f1", opt(w.f1)}};
}

struct NliVerificationOptions {
  AdequacyMode mode = AdequacyMode::strong;
  double window = 0.1;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

/// Up to `count` distinct ordered (parent, child) pairs of unrelated natural
/// concepts, sampled uniformly.
inline std::vector<IndexEdge> sample_negative_pairs(const Taxonomy& t, std::size_t count, std::uint64_t seed) {
  std::set<IndexEdge> chosen;
  const std::uint64_t n = t.concept_count();
  if (n < 2) return {};
  detail::Rng rng(seed);
  std::vector<IndexEdge> out;
  for (std::uint64_t attempt = 0; out.size() < count && attempt < 20 * n + 20 * count; ++attempt) {
    const auto a = static_cast<ConceptIndex>(2 + detail::uniform_below(rng, n));
    const auto b = static_cast<ConceptIndex>(2 + detail::uniform_below(rng, n));
    if (t.related(a, b) || !chosen.insert({a, b}).second) continue;
    out.emplace_back(a, b);
  }
  if (out.size() < count) {
    std::vector<IndexEdge> rest;
    for (ConceptIndex a = 2; a < t.size(); ++a)
      for (ConceptIndex b = 2; b < t.size(); ++b)
        if (!t.related(a, b) && !chosen.count({a, b})) rest.emplace_back(a, b);
    while (out.size() < count && !rest.empty()) {
      const auto i = detail::uniform_below(rng, rest.size());
      out.push_back(rest[i]);
      rest[i] = rest.back();
      rest.pop_back();
    }
  }
  return out;
}

/// Binary precision/recall of thresholded relation probabilities, reported
/// per disjoint Wu-Palmer window. True edges are positives; |E| sampled
/// unrelated pairs are negatives.
inline std::vector<WindowPRF> nli_verification(const Taxonomy& t, NliProvider& nli,
                                               const NliVerificationOptions& opt = {}) {
  if (!(opt.window > 0.0 && opt.window <= 1.0)) throw ParseError("window width must be in (0, 1]");
  const auto positives = t.natural_edges();
  const auto negatives = sample_negative_pairs(t, positives.size(), opt.seed);
  const WuPalmerIndex wps(t);
  const auto windows = static_cast<std::size_t>(std::ceil(1.0 / opt.window - 1e-9));
  std::vector<WindowPRF> out(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    out[w].lower = static_cast<double>(w) * opt.window;
    out[w].upper = std::min(1.0, static_cast<double>(w + 1) * opt.window);
  }

  std::vector<NliPair> pairs;
  for (const auto* set : {&positives, &negatives})
    for (const auto& [p, c] : *set) {
      auto prompt = relation_prompt(t.concept_at(p), t.concept_at(c));
      pairs.push_back({std::move(prompt.premise), std::move(prompt.hypothesis)});
    }
  const auto judgments = pairs.empty() ? std::vector<RelationJudgment>{} : nli.nli_batch(pairs);

  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const bool positive = k < positives.size();
    const auto [p, c] = positive ? positives[k] : negatives[k - positives.size()];
    const double sim = wps(p, c);
    auto w = static_cast<std::size_t>(std::ceil(sim / opt.window - 1e-12));
    w = std::clamp<std::size_t>(w, 1, windows) - 1;
    auto& win = out[w];
    const bool predicted = relation_probability(judgments[k], opt.mode) >= opt.threshold;
    if (positive) {
      ++win.positives;
      predicted ? ++win.tp : ++win.fn;
    } else {
      ++win.negatives;
      if (predicted) ++win.fp;
    }
  }
  for (auto& win : out) {
    if (win.positives + win.negatives == 0) continue;
    if (win.tp + win.fp > 0) win.precision = static_cast<double>(win.tp) / static_cast<double>(win.tp + win.fp);
    if (win.tp + win.fn > 0) win.recall = static_cast<double>(win.tp) / static_cast<double>(win.tp + win.fn);
    if (win.precision && win.recall)
      win.f1 = *win.precision + *win.recall > 0.0
                   ? 2.0 * *win.precision * *win.recall / (*win.precision + *win.recall)
                   : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------- records

struct StudyRecord {
  std::string dataset;
  std::uint64_t seed = 0;
  MutationKind kind = MutationKind::any;
  std::size_t mutations = 0;
  double f1 = kNA;
  double csc = kNA;
  double csc_p = kNA;
  double nliv_s = kNA;
  double nliv_w = kNA;
  double sp = kNA;
  double rate = kNA;

  auto key() const { return std::make_tuple(dataset, seed, mutations); }
};

inline constexpr std::string_view kRecordHeader = "dataset,seed,kind,mutations,f1,csc,csc_p,nliv_s,nliv_w,sp,rate";

inline std::string to_csv_line(const StudyRecord& r) {
  std::string line = r.dataset + "," + std::to_string(r.seed) + "," + to_string(r.kind) + "," +
                     std::to_string(r.mutations);
  for (double v : {r.f1, r.csc, r.csc_p, r.nliv_s, r.nliv_w, r.sp, r.rate}) line += "," + detail::format_double(v);
  return line;
}

inline double parse_cell(const std::string& s) {
  if (s == "NA" || s.empty()) return kNA;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ParseError("bad numeric cell '" + s + "'");
  }
}

inline StudyRecord parse_csv_line(const std::string& line) {
  const auto cols = detail::split(line, ',');
  if (cols.size() != 11) throw ParseError("record line has " + std::to_string(cols.size()) + " columns, expected 11");
  StudyRecord r;
  r.dataset = cols[0];
  try {
    r.seed = std::stoull(cols[1]);
    r.mutations = std::stoull(cols[3]);
  } catch (const std::exception&) {
    throw ParseError("bad record line '" + line + "'");
  }
  r.kind = parse_mutation_kind(cols[2]);
  r.f1 = parse_cell(cols[4]);
  r.csc = parse_cell(cols[5]);
  r.csc_p = parse_cell(cols[6]);
  r.nliv_s = parse_cell(cols[7]);
  r.nliv_w = parse_cell(cols[8]);
  r.sp = parse_cell(cols[9]);
  r.rate = parse_cell(cols[10]);
  return r;
}

/// Reads a record CSV, ignoring a torn trailing line (no final newline).
inline std::vector<StudyRecord> read_records(const std::filesystem::path& path, bool* torn_tail = nullptr) {
  std::vector<StudyRecord> out;
  if (torn_tail) *torn_tail = false;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string::npos) {
      if (torn_tail) *torn_tail = true;
      break;
    }
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (header) {
      if (line != kRecordHeader) throw ParseError("unexpected record header in '" + path.string() + "'");
      header = false;
      continue;
    }
    if (!line.empty()) out.push_back(parse_csv_line(line));
  }
  return out;
}

inline void write_records(const std::filesystem::path& path, const std::vector<StudyRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << kRecordHeader << '\n';
  for (const auto& r : records) out << to_csv_line(r) << '\n';
}

// ---------------------------------------------------------------- study

struct DatasetSpec {
  std::string id;
  std::filesystem::path path;
  std::optional<std::filesystem::path> glosses;
  std::size_t degradations = 0;  // 0: pick from dataset size
};

struct StudyConfig {
  std::vector<DatasetSpec> datasets;
  std::vector<MutationKind> kinds{MutationKind::any, MutationKind::non_leaf};
  std::vector<std::size_t> schedule = default_schedule();
  std::uint64_t seed = 0;
  ProviderOptions providers;
  PairPolicy pairs;
  bool rate = true;
  std::size_t rate_k = 10;
  unsigned workers = 1;
  std::filesystem::path records = "records.csv";
  std::filesystem::path edge_cache;  // empty: in-memory only
};

/// Degradations per kind: 100 for taxonomies up to 5000 concepts, 50 above.
inline std::size_t default_degradations(std::size_t concepts) { return concepts <= 5000 ? 100 : 50; }

inline StudyConfig study_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  StudyConfig cfg;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    for (const auto& d : j.at("datasets")) {
      DatasetSpec spec;
      spec.id = d.at("id").get<std::string>();
      if (spec.id.empty() || spec.id.find(',') != std::string::npos || spec.id.find('\n') != std::string::npos)
        throw ParseError("dataset id '" + spec.id + "' must be non-empty and free of commas");
      spec.path = resolve(d.at("path").get<std::string>());
      if (d.contains("glosses")) spec.glosses = resolve(d["glosses"].get<std::string>());
      spec.degradations = d.value("degradations", std::size_t{0});
      cfg.datasets.push_back(std::move(spec));
    }
    if (j.contains("kinds")) {
      cfg.kinds.clear();
      for (const auto& k : j["kinds"]) cfg.kinds.push_back(parse_mutation_kind(k.get<std::string>()));
    }
    cfg.schedule = j.value("schedule", cfg.schedule);
    check_schedule(cfg.schedule);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.rate = j.value("rate", cfg.rate);
    cfg.rate_k = j.value("rate_k", cfg.rate_k);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("records")) cfg.records = resolve(j["records"].get<std::string>());
    if (j.contains("edge_cache")) cfg.edge_cache = resolve(j["edge_cache"].get<std::string>());
    if (j.contains("pairs")) {
      const auto& p = j["pairs"];
      const auto kind = p.value("policy", std::string("auto"));
      if (kind == "exhaustive") cfg.pairs = PairPolicy::exhaustive();
      else if (kind == "sampled") cfg.pairs = PairPolicy::sampled(p.value("count", std::size_t{2'000'000}), p.value("seed", std::uint64_t{0}));
      else if (kind != "auto") throw ParseError("unknown pair policy '" + kind + "'");
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      cfg.providers.kind = parse_provider_kind(p.value("kind", std::string("mock")));
      cfg.providers.seed = p.value("seed", std::uint64_t{0});
      if (p.contains("embeddings")) cfg.providers.embeddings = resolve(p["embeddings"].get<std::string>());
      if (p.contains("nli_scores")) cfg.providers.nli_scores = resolve(p["nli_scores"].get<std::string>());
      if (p.contains("mask_scores")) cfg.providers.mask_scores = resolve(p["mask_scores"].get<std::string>());
      if (p.contains("endpoint")) cfg.providers.http.endpoint = p["endpoint"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed study config: ") + e.what());
  }
  if (cfg.datasets.empty()) throw ParseError("study config lists no datasets");
  if (cfg.kinds.empty()) throw ParseError("study config lists no mutation kinds");
  return cfg;
}

/// Seed of the i-th degradation of (dataset, kind) under a base seed.
inline std::uint64_t degradation_seed(std::uint64_t base, const std::string& dataset, MutationKind kind,
                                      std::size_t i) {
  std::uint64_t s = detail::mix_seed(base, detail::fnv1a(dataset));
  s = detail::mix_seed(s, static_cast<std::uint64_t>(kind) + 1);
  return detail::mix_seed(s, i);
}

/// Scores one taxonomy against its original on every metric. A failing
/// metric is logged and left NA.
class CheckpointScorer {
 public:
  CheckpointScorer(const Taxonomy& original, const ProviderSet& providers, const StudyConfig& cfg,
                   EdgeCache* cache, std::ostream& log)
      : original_(original), providers_(providers), cfg_(cfg), cache_(cache), log_(log) {
    if (providers_.similarity) {
      try {
        sim_.emplace(original, *providers_.similarity);
        sample_ = make_pair_sample(original, cfg.pairs);
      } catch (const std::exception& e) {
        log_ << "warning: similarity unavailable: " << e.what() << '\n';
      }
    }
  }

  void score(const Taxonomy& t, StudyRecord& r) const {
    guard("f1", [&] { r.f1 = triplet_prf(t, original_).f1; });
    if (sim_) {
      guard("csc", [&] {
        const auto c = csc(t, *sim_, sample_, cfg_.workers);
        r.csc = c.tau;
        r.csc_p = c.p_value;
      });
      guard("sp", [&] {
        if (const auto s = semantic_proximity(t, *sim_).ratio) r.sp = *s;
      });
    }
    if (providers_.nli) {
      guard("nliv", [&] {
        NlivOptions opt;
        opt.workers = cfg_.workers;
        opt.cache = cache_;
        r.nliv_s = nliv(t, *providers_.nli, AdequacyMode::strong, opt).score;
        r.nliv_w = nliv(t, *providers_.nli, AdequacyMode::weak, opt).score;
      });
    }
    if (cfg_.rate && providers_.fill_mask) {
      guard("rate", [&] {
        if (const auto s = rate_score(t, *providers_.fill_mask, cfg_.rate_k)) r.rate = *s;
      });
    }
  }

 private:
  template <typename Fn>
  void guard(const char* metric, Fn&& fn) const {
    try {
      fn();
    } catch (const std::exception& e) {
      log_ << "warning: " << metric << " failed: " << e.what() << '\n';
    }
  }

  const Taxonomy& original_;
  const ProviderSet& providers_;
  const StudyConfig& cfg_;
  EdgeCache* cache_;
  std::ostream& log_;
  std::optional<SimilarityMatrix> sim_;
  PairSample sample_;
};

struct StudyControl {
  /// Stops after this many newly written records (simulates an interrupted
  /// run); 0 means no limit.
  std::size_t stop_after = 0;
  std::ostream* log = &std::cerr;
};

/// Runs (or resumes) a degradation study and returns the full record set.
/// Records are appended to cfg.records in a fixed order, so an interrupted
/// and resumed run produces the same file as an uninterrupted one.
inline std::vector<StudyRecord> run_study(const StudyConfig& cfg, const ProviderSet& providers,
                                          const StudyControl& control = {}) {
  std::ostream& log = control.log ? *control.log : std::cerr;
  bool torn = false;
  auto records = read_records(cfg.records, &torn);
  if (torn || !std::filesystem::exists(cfg.records)) write_records(cfg.records, records);
  std::set<std::tuple<std::string, std::uint64_t, std::size_t>> done;
  for (const auto& r : records) done.insert(r.key());

  std::optional<EdgeCache> cache;
  if (!cfg.edge_cache.empty()) cache.emplace(cfg.edge_cache);
  else cache.emplace();

  std::ofstream out(cfg.records, std::ios::binary | std::ios::app);
  std::size_t written = 0;
  struct Stop {};
  try {
    for (const auto& ds : cfg.datasets) {
      const Taxonomy original = load_taxonomy(ds.path, std::nullopt, ds.glosses);
      const std::size_t count = ds.degradations ? ds.degradations : default_degradations(original.concept_count());
      std::optional<CheckpointScorer> scorer;
      for (MutationKind kind : cfg.kinds) {
        for (std::size_t i = 0; i < count; ++i) {
          const std::uint64_t seed = degradation_seed(cfg.seed, ds.id, kind, i);
          const bool complete = std::all_of(cfg.schedule.begin(), cfg.schedule.end(), [&](std::size_t m) {
            return done.count({ds.id, seed, m}) > 0;
          });
          if (complete) continue;
          if (!scorer) scorer.emplace(original, providers, cfg, &*cache, log);
          try {
            degrade(original, cfg.schedule, kind, seed, [&](std::size_t mutations, const Taxonomy& snapshot) {
              if (done.count({ds.id, seed, mutations})) return;
              StudyRecord r;
              r.dataset = ds.id;
              r.seed = seed;
              r.kind = kind;
              r.mutations = mutations;
              scorer->score(snapshot, r);
              out << to_csv_line(r) << '\n';
              out.flush();
              done.insert(r.key());
              records.push_back(r);
              if (control.stop_after && ++written >= control.stop_after) throw Stop{};
            });
          } catch (const NoEligiblePairError& e) {
            log << "warning: " << ds.id << " seed " << seed << ": " << e.what() << '\n';
          }
        }
      }
    }
  } catch (const Stop&) {
  }
  return records;
}

// ---------------------------------------------------------------- correlation

enum class MetricColumn { f1, csc, nliv_s, nliv_w, sp, rate };

inline const std::vector<std::pair<std::string, MetricColumn>>& metric_columns() {
  static const std::vector<std::pair<std::string, MetricColumn>> cols{
      {"csc", MetricColumn::csc}, {"nliv_s", MetricColumn::nliv_s}, {"nliv_w", MetricColumn::nliv_w},
      {"sp", MetricColumn::sp},   {"rate", MetricColumn::rate}};
  return cols;
}

inline MetricColumn parse_metric_column(std::string_view s) {
  if (s == "f1") return MetricColumn::f1;
  for (const auto& [name, col] : metric_columns())
    if (name == s) return col;
  throw ParseError("unknown metric column '" + std::string(s) + "'");
}

inline double column_value(const StudyRecord& r, MetricColumn c) {
  switch (c) {
    case MetricColumn::f1: return r.f1;
    case MetricColumn::csc: return r.csc;
    case MetricColumn::nliv_s: return r.nliv_s;
    case MetricColumn::nliv_w: return r.nliv_w;
    case MetricColumn::sp: return r.sp;
    case MetricColumn::rate: return r.rate;
  }
  return kNA;
}

struct Correlation {
  std::optional<CorrelationResult> result;  // empty: NA
  std::size_t n = 0;                        // pairs used
  std::size_t dropped = 0;                  // pairs with an NA side
};

inline nlohmann::json to_json(const Correlation& c) {
  if (!c.result) return {{"tau", "NA"}, {"p", "NA"}, {"stars", ""}, {"n", c.n}, {"dropped", c.dropped}};
  auto j = to_json(*c.result);
  j["dropped"] = c.dropped;
  return j;
}

/// Kendall tau-b between F1 and a metric over records, NA pairs dropped.
inline Correlation correlate_records(const std::vector<const StudyRecord*>& records, MetricColumn metric) {
  Correlation c;
  std::vector<double> f1, m;
  for (const auto* r : records) {
    const double x = r->f1, y = column_value(*r, metric);
    if (std::isnan(x) || std::isnan(y)) {
      ++c.dropped;
      continue;
    }
    f1.push_back(x);
    m.push_back(y);
  }
  c.n = f1.size();
  try {
    c.result = kendall_tau_b(f1, m);
  } catch (const DegenerateInputError&) {
    c.result.reset();
  }
  return c;
}

/// Per-dataset correlation of a metric with F1, pooling all checkpoints,
/// seeds and kinds.
inline std::map<std::string, Correlation> correlate(const std::vector<StudyRecord>& records, MetricColumn metric) {
  std::map<std::string, std::vector<const StudyRecord*>> by_dataset;
  for (const auto& r : records) by_dataset[r.dataset].push_back(&r);
  std::map<std::string, Correlation> out;
  for (const auto& [ds, rs] : by_dataset) out[ds] = correlate_records(rs, metric);
  return out;
}

/// {dataset: {metric: {tau, p, stars, n, dropped}}} plus a per-kind and a
/// per-checkpoint breakdown under "stratified".
inline nlohmann::json correlation_report(const std::vector<StudyRecord>& records) {
  nlohmann::json report = nlohmann::json::object();
  for (const auto& [name, col] : metric_columns())
    for (const auto& [ds, c] : correlate(records, col)) report[ds][name] = to_json(c);

  std::map<std::tuple<std::string, std::string, std::size_t>, std::vector<const StudyRecord*>> strata;
  std::map<std::pair<std::string, std::string>, std::vector<const StudyRecord*>> by_kind;
  for (const auto& r : records) {
    strata[{r.dataset, to_string(r.kind), r.mutations}].push_back(&r);
    by_kind[{r.dataset, to_string(r.kind)}].push_back(&r);
  }
  nlohmann::json kinds = nlohmann::json::object();
  for (const auto& [key, rs] : by_kind)
    for (const auto& [name, col] : metric_columns()) kinds[key.first][key.second][name] = to_json(correlate_records(rs, col));
  nlohmann::json stratified = nlohmann::json::object();
  for (const auto& [key, rs] : strata) {
    const auto& [ds, kind, mutations] = key;
    for (const auto& [name, col] : metric_columns())
      stratified[ds][kind][std::to_string(mutations)][name] = to_json(correlate_records(rs, col));
  }
  return {{"pooled", report}, {"by_kind", kinds}, {"stratified", stratified}};
}

/// Long-format plot data: mean score per (metric, mutation count), min-max
/// normalized across mutation counts within each metric.
inline std::string plot_data_csv(const std::vector<StudyRecord>& records) {
  std::vector<std::pair<std::string, MetricColumn>> cols{{"f1", MetricColumn::f1}};
  cols.insert(cols.end(), metric_columns().begin(), metric_columns().end());
  std::string out = "metric,mutations,normalized_score\n";
  for (const auto& [name, col] : cols) {
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (const auto& r : records) {
      const double v = column_value(r, col);
      if (std::isnan(v)) continue;
      auto& a = acc[r.mutations];
      a.first += v;
      ++a.second;
    }
    if (acc.empty()) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::map<std::size_t, double> mean;
    for (const auto& [m, a] : acc) {
      mean[m] = a.first / static_cast<double>(a.second);
      lo = std::min(lo, mean[m]);
      hi = std::max(hi, mean[m]);
    }
    for (const auto& [m, v] : mean) {
      const double norm = hi > lo ? (v - lo) / (hi - lo) : kNA;
      out += name + "," + std::to_string(m) + "," + detail::format_double(norm) + "\n";
    }
  }
  return out;
}

}  // namespace taxometer
