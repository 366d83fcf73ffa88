// taxometer command line: scoring, degradation, statistics and studies.
// Results go to stdout as JSON; errors go to stderr with a non-zero exit.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taxometer/taxometer.hpp"

namespace tx = taxometer;
namespace fs = std::filesystem;

namespace {

struct ProviderArgs {
  std::string kind = "mock";
  std::uint64_t seed = 0;
  std::string embeddings, nli_scores, mask_scores, endpoint;

  void attach(CLI::App* cmd) {
    cmd->add_option("--provider", kind, "mock, files or http")->check(CLI::IsMember({"mock", "files", "http"}));
    cmd->add_option("--seed", seed, "seed for mock providers and sampling");
    cmd->add_option("--embeddings", embeddings, "embedding store (files provider)");
    cmd->add_option("--nli-scores", nli_scores, "NLI score table (files provider)");
    cmd->add_option("--mask-scores", mask_scores, "fill-mask table (files provider)");
    cmd->add_option("--endpoint", endpoint, "sidecar URL (http provider)");
  }

  tx::ProviderSet build() const {
    tx::ProviderOptions o;
    o.kind = tx::parse_provider_kind(kind);
    o.seed = seed;
    o.embeddings = embeddings;
    o.nli_scores = nli_scores;
    o.mask_scores = mask_scores;
    if (!endpoint.empty()) o.http.endpoint = endpoint;
    return tx::make_providers(o);
  }
};

tx::Taxonomy load(const std::string& path, const std::string& glosses) {
  return tx::load_taxonomy(path, std::nullopt,
                           glosses.empty() ? std::nullopt : std::optional<fs::path>(glosses));
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<std::size_t> parse_schedule(const std::string& text) {
  if (text.empty()) return tx::default_schedule();
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw tx::ParseError("bad schedule entry '" + item + "'");
    }
  }
  tx::check_schedule(out);
  return out;
}

std::vector<tx::StudyRecord> must_read_records(const std::string& path) {
  if (!fs::exists(path)) throw tx::ParseError("no records at '" + path + "'");
  return tx::read_records(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taxonomy quality metrics and degradation studies"};
  app.require_subcommand(1);

  // score
  auto* score = app.add_subcommand("score", "score a taxonomy");
  std::string metric = "f1", predicted, gold, taxonomy, glosses;
  std::size_t rate_k = 10;
  unsigned workers = 1;
  ProviderArgs score_providers;
  score->add_option("--metric", metric, "f1, csc, sp, nliv-s, nliv-w or rate")
      ->check(CLI::IsMember({"f1", "csc", "sp", "nliv-s", "nliv-w", "rate"}));
  score->add_option("--predicted", predicted, "predicted taxonomy (f1)");
  score->add_option("--gold", gold, "gold taxonomy (f1)");
  score->add_option("--taxonomy", taxonomy, "taxonomy to score");
  score->add_option("--glosses", glosses, "gloss TSV for edge-list input");
  score->add_option("--k", rate_k, "fill-mask candidates (rate)");
  score->add_option("--workers", workers, "worker threads");
  score_providers.attach(score);

  // degrade
  auto* degrade = app.add_subcommand("degrade", "apply seeded mutations and save checkpoints");
  std::string kind = "any", schedule_text, out_dir;
  std::uint64_t degrade_seed = 0;
  degrade->add_option("--taxonomy", taxonomy, "taxonomy to degrade")->required();
  degrade->add_option("--glosses", glosses, "gloss TSV for edge-list input");
  degrade->add_option("--kind", kind, "leaf, non-leaf or any");
  degrade->add_option("--seed", degrade_seed, "mutation seed");
  degrade->add_option("--schedule", schedule_text, "comma-separated checkpoints");
  degrade->add_option("--out", out_dir, "output directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "structural statistics");
  stats->add_option("--taxonomy", taxonomy, "taxonomy")->required();
  stats->add_option("--glosses", glosses, "gloss TSV for edge-list input");

  // study
  auto* study = app.add_subcommand("study", "degradation studies");
  study->require_subcommand(1);
  std::string config_path, records_path, records_override, plot_out;
  std::size_t stop_after = 0;
  auto* run = study->add_subcommand("run", "run or resume a study");
  run->add_option("--config", config_path, "study JSON")->required();
  run->add_option("--records", records_override, "override the records file");
  run->add_option("--stop-after", stop_after, "stop after this many new records");
  auto* correlate = study->add_subcommand("correlate", "Kendall correlation of each metric with F1");
  correlate->add_option("--records", records_path, "records CSV")->required();
  auto* plot = study->add_subcommand("plot-data", "normalized mean scores per checkpoint");
  plot->add_option("--records", records_path, "records CSV")->required();
  plot->add_option("--out", plot_out, "write CSV here instead of stdout");
  auto* verify = study->add_subcommand("verify-nli", "precision/recall of NLI judgments per similarity window");
  double window = 0.1, threshold = 0.5;
  std::string mode = "strong";
  ProviderArgs verify_providers;
  verify->add_option("--taxonomy", taxonomy, "taxonomy")->required();
  verify->add_option("--glosses", glosses, "gloss TSV for edge-list input");
  verify->add_option("--window", window, "window width");
  verify->add_option("--threshold", threshold, "decision threshold");
  verify->add_option("--mode", mode, "strong or weak")->check(CLI::IsMember({"strong", "weak"}));
  verify_providers.attach(verify);

  CLI11_PARSE(app, argc, argv);

  try {
    if (score->parsed()) {
      if (metric == "f1") {
        if (predicted.empty() || gold.empty()) throw tx::ParseError("f1 needs --predicted and --gold");
        print(tx::to_json(tx::triplet_prf(load(predicted, glosses), load(gold, {}))));
        return 0;
      }
      if (taxonomy.empty()) throw tx::ParseError(metric + " needs --taxonomy");
      const auto t = load(taxonomy, glosses);
      const auto providers = score_providers.build();
      if (metric == "csc") {
        if (!providers.similarity) throw tx::ParseError("csc needs an embedding provider");
        print(tx::to_json(tx::csc(t, *providers.similarity, tx::PairPolicy{}, workers)));
      } else if (metric == "sp") {
        if (!providers.similarity) throw tx::ParseError("sp needs an embedding provider");
        const auto sp = tx::semantic_proximity(t, *providers.similarity);
        print({{"ratio", sp.ratio ? nlohmann::json(*sp.ratio) : nlohmann::json("NA")}, {"groups", sp.groups}});
      } else if (metric == "rate") {
        if (!providers.fill_mask) throw tx::ParseError("rate needs a fill-mask provider");
        const auto r = tx::rate_score(t, *providers.fill_mask, rate_k);
        print({{"score", r ? nlohmann::json(*r) : nlohmann::json("NA")}, {"k", rate_k}});
      } else {
        if (!providers.nli) throw tx::ParseError(metric + " needs an NLI provider");
        tx::NlivOptions opt;
        opt.workers = workers;
        std::optional<tx::EdgeCache> cache;
        if (const auto dir = tx::cache_dir_from_env(); !dir.empty()) {
          fs::create_directories(dir);
          opt.cache = &cache.emplace(dir / "edges.jsonl");
        }
        const auto m = metric == "nliv-s" ? tx::AdequacyMode::strong : tx::AdequacyMode::weak;
        auto j = tx::to_json(tx::nliv(t, *providers.nli, m, opt));
        j["mode"] = tx::to_string(m);
        print(j);
      }
    } else if (degrade->parsed()) {
      const auto t = load(taxonomy, glosses);
      const auto schedule = parse_schedule(schedule_text);
      fs::create_directories(out_dir);
      nlohmann::json files = nlohmann::json::array();
      const auto trace = tx::degrade(t, schedule, tx::parse_mutation_kind(kind), degrade_seed,
                                     [&](std::size_t m, const tx::Taxonomy& snapshot) {
                                       const auto file = fs::path(out_dir) / ("mutations_" + std::to_string(m) + ".json");
                                       tx::save_taxonomy_json(snapshot, file);
                                       files.push_back(file.string());
                                     });
      const auto trace_file = fs::path(out_dir) / "trace.jsonl";
      tx::write_trace(trace, trace_file);
      print({{"checkpoints", trace.checkpoints},
             {"truncated", trace.truncated},
             {"mutations", trace.ops.size()},
             {"trace", trace_file.string()},
             {"snapshots", files}});
    } else if (stats->parsed()) {
      const auto s = load(taxonomy, glosses).stats();
      print({{"concepts", s.concepts},
             {"edges", s.edges},
             {"depth", s.depth},
             {"leaves", s.leaves},
             {"leaf_ratio", s.leaf_ratio},
             {"branching", s.branching},
             {"duplicate_edges", s.duplicate_edges}});
    } else if (run->parsed()) {
      const fs::path cfg_file(config_path);
      auto cfg = tx::study_config_from_json(nlohmann::json::parse(tx::read_file(cfg_file)), cfg_file.parent_path());
      if (!records_override.empty()) cfg.records = records_override;
      if (const auto dir = tx::cache_dir_from_env(); cfg.edge_cache.empty() && !dir.empty()) {
        fs::create_directories(dir);
        cfg.edge_cache = dir / "edges.jsonl";
      }
      const auto records = tx::run_study(cfg, tx::make_providers(cfg.providers), {stop_after, &std::cerr});
      print({{"records", records.size()}, {"file", cfg.records.string()}});
    } else if (correlate->parsed()) {
      print(tx::correlation_report(must_read_records(records_path)));
    } else if (plot->parsed()) {
      const auto csv = tx::plot_data_csv(must_read_records(records_path));
      if (plot_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(plot_out, std::ios::binary) << csv;
      }
    } else if (verify->parsed()) {
      const auto t = load(taxonomy, glosses);
      const auto providers = verify_providers.build();
      if (!providers.nli) throw tx::ParseError("verify-nli needs an NLI provider");
      tx::NliVerificationOptions opt;
      opt.mode = mode == "strong" ? tx::AdequacyMode::strong : tx::AdequacyMode::weak;
      opt.window = window;
      opt.threshold = threshold;
      opt.seed = verify_providers.seed;
      nlohmann::json out = nlohmann::json::array();
      for (const auto& w : tx::nli_verification(t, *providers.nli, opt)) out.push_back(tx::to_json(w));
      print(out);
    }
  } catch (const std::exception& e) {
    std::cerr << "taxometer: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
