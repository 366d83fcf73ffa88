#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "taxometer/harness.hpp"

namespace tx = taxometer;
using tx::testing::make_taxonomy;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "taxometer_harness_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

tx::StudyRecord record(double f1, double csc) {
  tx::StudyRecord r;
  r.dataset = "d";
  r.f1 = f1;
  r.csc = csc;
  return r;
}

tx::StudyConfig small_study(const std::filesystem::path& dir) {
  tx::StudyConfig cfg;
  cfg.datasets.push_back({"food", tx::testing::fixture("food_small.tsv"), std::nullopt, 2});
  cfg.schedule = {1, 2, 4};
  cfg.seed = 42;
  cfg.records = dir / "records.csv";
  return cfg;
}

}  // namespace

TEST(Records, CsvRoundTripWithNA) {
  tx::StudyRecord r;
  r.dataset = "food";
  r.seed = 18446744073709551615ull;
  r.kind = tx::MutationKind::non_leaf;
  r.mutations = 64;
  r.f1 = 0.1;
  r.csc = -0.25;
  r.csc_p = 1e-300;
  r.nliv_s = 1.0 / 3.0;
  const auto line = tx::to_csv_line(r);
  EXPECT_EQ(line, "food,18446744073709551615,non-leaf,64,0.1,-0.25,1e-300,0.3333333333333333,NA,NA,NA");
  const auto back = tx::parse_csv_line(line);
  EXPECT_EQ(back.dataset, r.dataset);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.kind, r.kind);
  EXPECT_EQ(back.mutations, r.mutations);
  EXPECT_EQ(back.nliv_s, r.nliv_s);
  EXPECT_EQ(back.csc_p, r.csc_p);
  EXPECT_TRUE(std::isnan(back.sp));
  EXPECT_THROW(tx::parse_csv_line("a,b"), tx::ParseError);
  EXPECT_THROW(tx::parse_csv_line("d,x,any,1,NA,NA,NA,NA,NA,NA,NA"), tx::ParseError);
}

TEST(Records, TornTailIsIgnored) {
  const auto dir = scratch("torn");
  const auto file = dir / "r.csv";
  std::ofstream(file, std::ios::binary) << tx::kRecordHeader << "\n"
                                        << "d,1,any,1,1,NA,NA,NA,NA,NA,NA\n"
                                        << "d,1,any,8,0.5,NA";
  bool torn = false;
  const auto records = tx::read_records(file, &torn);
  EXPECT_TRUE(torn);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].mutations, 1u);
  EXPECT_TRUE(tx::read_records(dir / "absent.csv").empty());
}

TEST(RateScore, HitsMissesAndMonotoneInK) {
  const auto t = make_taxonomy({"food", "fruit", "apple"}, {{"food", "fruit"}, {"fruit", "apple"}});
  tx::MockFillMaskProvider oracle;
  oracle.script("fruit is a kind of [MASK].", {{"food", 0.9}});
  oracle.script("apple is a kind of [MASK].", {{"Fruit", 0.9}});
  EXPECT_EQ(tx::rate_score(t, oracle, 1), 1.0);

  tx::MockFillMaskProvider unrelated({{"car", 0.5}, {"boat", 0.4}});
  EXPECT_EQ(tx::rate_score(t, unrelated, 10), 0.0);

  std::mt19937_64 gen(3);
  const std::vector<std::string> words{"food", "fruit", "thing", "plant", "object"};
  for (int round = 0; round < 20; ++round) {
    std::vector<tx::MaskCandidate> vocab;
    for (const auto& w : words) vocab.push_back({w, std::uniform_real_distribution<double>(0, 1)(gen)});
    tx::MockFillMaskProvider mlm(vocab);
    double last = 0.0;
    for (std::size_t k = 1; k <= words.size(); ++k) {
      const double s = *tx::rate_score(t, mlm, k);
      EXPECT_GE(s, last);
      last = s;
    }
  }
  EXPECT_FALSE(tx::rate_score(make_taxonomy({"a"}, {}), oracle, 3));
}

TEST(RateScore, OneProviderCallPerEdge) {
  const auto t = tx::testing::balanced_tree(3, 3);
  auto backend = std::make_shared<tx::MockFillMaskProvider>();
  tx::CachingFillMaskProvider cached(backend);
  tx::rate_score(t, cached, 5);
  tx::rate_score(t, cached, 5);
  EXPECT_EQ(backend->calls(), t.natural_edges().size());
}

TEST(NliVerification, ThresholdExtremesAndPerfectOracle) {
  const auto t = tx::testing::balanced_tree(3, 3, 2);
  tx::MockNliProvider uniform;
  tx::NliVerificationOptions opt;
  opt.threshold = 0.0;
  for (const auto& w : tx::nli_verification(t, uniform, opt)) {
    if (w.positives > 0) {
      EXPECT_EQ(w.recall, 1.0);
    }
  }
  opt.threshold = 1.0 + 1e-9;
  for (const auto& w : tx::nli_verification(t, uniform, opt)) {
    if (w.positives > 0) {
      EXPECT_EQ(w.recall, 0.0);
    }
    EXPECT_FALSE(w.precision);
  }

  tx::MockNliProvider perfect(tx::MockNliProvider::Fallback::uniform);
  for (auto [p, c] : t.natural_edges()) {
    const auto prompt = tx::relation_prompt(t.concept_at(p), t.concept_at(c));
    perfect.script(prompt.premise, prompt.hypothesis, {0.0, 0.0, 1.0});
  }
  // Unscripted negatives get 1/3 entailment, below the 0.5 threshold.
  std::size_t positives = 0, negatives = 0;
  for (const auto& w : tx::nli_verification(t, perfect, {})) {
    positives += w.positives;
    negatives += w.negatives;
    if (w.positives == 0) continue;
    EXPECT_EQ(w.precision, 1.0);
    EXPECT_EQ(w.recall, 1.0);
    EXPECT_EQ(w.f1, 1.0);
  }
  EXPECT_EQ(positives, t.natural_edges().size());
  EXPECT_EQ(negatives, t.natural_edges().size());
}

TEST(NegativePairs, UnrelatedAndDistinct) {
  const auto t = tx::testing::balanced_tree(2, 4);
  const auto pairs = tx::sample_negative_pairs(t, 20, 1);
  EXPECT_EQ(pairs.size(), 20u);
  const std::set<tx::IndexEdge> unique(pairs.begin(), pairs.end());
  EXPECT_EQ(unique.size(), 20u);
  for (auto [a, b] : pairs) EXPECT_FALSE(t.related(a, b));
}

TEST(Correlate, IdentityReversalAndConstant) {
  std::vector<tx::StudyRecord> same, reversed, constant;
  for (int i = 0; i < 10; ++i) {
    same.push_back(record(i * 0.1, i * 0.1));
    reversed.push_back(record(i * 0.1, -i * 0.1));
    constant.push_back(record(i * 0.1, 0.5));
  }
  EXPECT_DOUBLE_EQ(tx::correlate(same, tx::MetricColumn::csc)["d"].result->tau, 1.0);
  EXPECT_DOUBLE_EQ(tx::correlate(reversed, tx::MetricColumn::csc)["d"].result->tau, -1.0);
  EXPECT_FALSE(tx::correlate(constant, tx::MetricColumn::csc)["d"].result);
  EXPECT_EQ(tx::to_json(tx::correlate(constant, tx::MetricColumn::csc)["d"])["tau"], "NA");
}

TEST(Correlate, DropsNAPairs) {
  std::vector<tx::StudyRecord> records;
  for (int i = 0; i < 10; ++i) records.push_back(record(i, i % 3 == 0 ? tx::kNA : i));
  const auto c = tx::correlate(records, tx::MetricColumn::csc)["d"];
  EXPECT_EQ(c.dropped, 4u);
  EXPECT_EQ(c.n + c.dropped, records.size());
  EXPECT_EQ(c.result->n, 6u);
  EXPECT_FALSE(tx::correlate(records, tx::MetricColumn::sp)["d"].result);
}

TEST(StudyConfig, ParsesJson) {
  const auto j = nlohmann::json::parse(R"({
    "datasets": [{"id": "food", "path": "food.tsv", "degradations": 3}],
    "kinds": ["leaf", "non-leaf"],
    "schedule": [1, 8],
    "seed": 7,
    "pairs": {"policy": "sampled", "count": 100, "seed": 2},
    "provider": {"kind": "mock", "seed": 4},
    "records": "out/records.csv"
  })");
  const auto cfg = tx::study_config_from_json(j, "/base");
  ASSERT_EQ(cfg.datasets.size(), 1u);
  EXPECT_EQ(cfg.datasets[0].path, std::filesystem::path("/base/food.tsv"));
  EXPECT_EQ(cfg.datasets[0].degradations, 3u);
  EXPECT_EQ(cfg.kinds, (std::vector<tx::MutationKind>{tx::MutationKind::leaf, tx::MutationKind::non_leaf}));
  EXPECT_EQ(cfg.schedule, (std::vector<std::size_t>{1, 8}));
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.pairs.kind, tx::PairPolicy::Kind::sampled);
  EXPECT_EQ(cfg.pairs.count, 100u);
  EXPECT_EQ(cfg.providers.seed, 4u);
  EXPECT_EQ(cfg.records, std::filesystem::path("/base/out/records.csv"));

  EXPECT_THROW(tx::study_config_from_json(nlohmann::json::parse(R"({"datasets": []})")), tx::ParseError);
  EXPECT_THROW(tx::study_config_from_json(nlohmann::json::parse(R"({"datasets": [{"id": "a,b", "path": "x"}]})")),
               tx::ParseError);
  EXPECT_THROW(
      tx::study_config_from_json(nlohmann::json::parse(R"({"datasets": [{"id": "a", "path": "x"}], "schedule": [2, 1]})")),
      tx::ParseError);
}

TEST(StudyConfig, DefaultDegradationsFollowDatasetSize) {
  EXPECT_EQ(tx::default_degradations(1486), 100u);
  EXPECT_EQ(tx::default_degradations(5000), 100u);
  EXPECT_EQ(tx::default_degradations(9710), 50u);
}

TEST(Study, RecordCardinalityAndColumns) {
  const auto dir = scratch("cardinality");
  auto cfg = small_study(dir);
  cfg.kinds = {tx::MutationKind::any};
  std::ostringstream log;
  const auto records = tx::run_study(cfg, tx::make_providers(cfg.providers), {0, &log});
  ASSERT_EQ(records.size(), 2u * 3u);
  for (const auto& r : records) {
    EXPECT_EQ(r.dataset, "food");
    EXPECT_FALSE(std::isnan(r.f1));
    EXPECT_LT(r.f1, 1.0);
    EXPECT_FALSE(std::isnan(r.csc));
    EXPECT_FALSE(std::isnan(r.nliv_s));
    EXPECT_FALSE(std::isnan(r.nliv_w));
    EXPECT_FALSE(std::isnan(r.sp));
  }
  EXPECT_EQ(tx::read_records(cfg.records).size(), records.size());
}

TEST(Study, DeterministicAndResumable) {
  const auto a = scratch("run_a"), b = scratch("run_b"), c = scratch("run_c");
  std::ostringstream log;
  auto cfg = small_study(a);
  tx::run_study(cfg, tx::make_providers(cfg.providers), {0, &log});
  cfg.records = b / "records.csv";
  tx::run_study(cfg, tx::make_providers(cfg.providers), {0, &log});
  EXPECT_EQ(slurp(a / "records.csv"), slurp(b / "records.csv"));

  // Interrupt twice, then let it finish.
  cfg.records = c / "records.csv";
  tx::run_study(cfg, tx::make_providers(cfg.providers), {4, &log});
  EXPECT_EQ(tx::read_records(cfg.records).size(), 4u);
  tx::run_study(cfg, tx::make_providers(cfg.providers), {3, &log});
  const auto done = tx::run_study(cfg, tx::make_providers(cfg.providers), {0, &log});
  EXPECT_EQ(done.size(), 12u);
  EXPECT_EQ(slurp(a / "records.csv"), slurp(c / "records.csv"));
}

TEST(Study, ResumesAfterTornWrite) {
  const auto a = scratch("torn_a"), b = scratch("torn_b");
  std::ostringstream log;
  auto cfg = small_study(a);
  tx::run_study(cfg, tx::make_providers(cfg.providers), {0, &log});
  const auto full = slurp(a / "records.csv");

  cfg.records = b / "records.csv";
  tx::run_study(cfg, tx::make_providers(cfg.providers), {5, &log});
  {
    std::ofstream(cfg.records, std::ios::binary | std::ios::app) << "food,123,any,4,0.";
  }
  tx::run_study(cfg, tx::make_providers(cfg.providers), {0, &log});
  EXPECT_EQ(slurp(cfg.records), full);
}

TEST(Study, FailingMetricIsNA) {
  const auto dir = scratch("failing");
  auto cfg = small_study(dir);
  cfg.kinds = {tx::MutationKind::any};
  auto providers = tx::make_providers(cfg.providers);
  tx::HttpOptions dead;
  dead.endpoint = "http://127.0.0.1:1";
  dead.max_attempts = 1;
  dead.timeout = std::chrono::seconds(1);
  providers.nli = std::make_shared<tx::HttpNliProvider>(dead);
  std::ostringstream log;
  const auto records = tx::run_study(cfg, providers, {0, &log});
  ASSERT_EQ(records.size(), 6u);
  for (const auto& r : records) {
    EXPECT_TRUE(std::isnan(r.nliv_s));
    EXPECT_FALSE(std::isnan(r.f1));
  }
  EXPECT_NE(log.str().find("nliv failed"), std::string::npos);
}

TEST(Report, PooledByKindAndStratified) {
  const auto dir = scratch("report");
  auto cfg = small_study(dir);
  std::ostringstream log;
  const auto records = tx::run_study(cfg, tx::make_providers(cfg.providers), {0, &log});
  const auto report = tx::correlation_report(records);
  ASSERT_TRUE(report["pooled"].contains("food"));
  for (const char* m : {"csc", "nliv_s", "nliv_w", "sp", "rate"}) EXPECT_TRUE(report["pooled"]["food"].contains(m));
  EXPECT_TRUE(report["by_kind"]["food"].contains("non-leaf"));
  EXPECT_TRUE(report["stratified"]["food"]["any"].contains("4"));

  const auto csv = tx::plot_data_csv(records);
  EXPECT_EQ(csv.rfind("metric,mutations,normalized_score\n", 0), 0u);
  EXPECT_NE(csv.find("f1,1,"), std::string::npos);
}
