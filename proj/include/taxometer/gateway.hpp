#pragma once

// Model gateway: embeddings, NLI judgments and fill-mask candidates behind
// interchangeable mock, file-backed and HTTP providers.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "taxometer/detail/util.hpp"
#include "taxometer/error.hpp"

namespace taxometer {

using Embedding = std::vector<double>;

inline void normalize(Embedding& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw MalformedResponseError("zero-length embedding");
  for (double& x : v) x /= norm;
}

/// Cosine similarity; exactly 1 for identical vectors.
inline double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw MalformedResponseError("embedding dimensions differ");
  if (a == b) return 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

struct RelationJudgment {
  double p_contradicts = 1.0 / 3.0;
  double p_neutral = 1.0 / 3.0;
  double p_entails = 1.0 / 3.0;

  bool valid() const {
    for (double p : {p_contradicts, p_neutral, p_entails})
      if (!(p >= 0.0 && p <= 1.0)) return false;
    return std::fabs(p_contradicts + p_neutral + p_entails - 1.0) <= 1e-4;
  }
  friend bool operator==(const RelationJudgment&, const RelationJudgment&) = default;
};

struct NliPair {
  std::string premise;
  std::string hypothesis;
  friend auto operator<=>(const NliPair&, const NliPair&) = default;
};

/// Single-string form of an NLI input: "<premise>. <hypothesis>".
inline std::string compose_nli_text(std::string_view premise, std::string_view hypothesis) {
  while (!premise.empty() && (premise.back() == '.' || premise.back() == ' ')) premise.remove_suffix(1);
  std::string out(premise);
  out += ". ";
  out += hypothesis;
  return out;
}

struct MaskCandidate {
  std::string token;
  double score = 0.0;
};

inline constexpr std::string_view kMaskToken = "[MASK]";

inline void require_single_mask(std::string_view prompt) {
  const auto first = prompt.find(kMaskToken);
  if (first == std::string_view::npos) throw NoMaskError("prompt has no " + std::string(kMaskToken) + " slot");
  if (prompt.find(kMaskToken, first + 1) != std::string_view::npos)
    throw NoMaskError("prompt has more than one " + std::string(kMaskToken) + " slot");
}

/// Sorts by descending score, drops case-insensitive duplicates, keeps k.
inline std::vector<MaskCandidate> finalize_candidates(std::vector<MaskCandidate> in, std::size_t k) {
  std::stable_sort(in.begin(), in.end(),
                   [](const MaskCandidate& a, const MaskCandidate& b) { return a.score > b.score; });
  std::vector<MaskCandidate> out;
  std::map<std::string, bool, std::less<>> seen;
  for (auto& c : in) {
    if (out.size() >= k) break;
    auto key = detail::to_lower(detail::trim(c.token));
    if (key.empty() || !seen.emplace(key, true).second) continue;
    out.push_back({std::move(key), c.score});
  }
  return out;
}

class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  /// One unit-norm vector per text, in input order.
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
  /// Scripted similarity that overrides the embedding cosine for a pair.
  virtual std::optional<double> scripted_similarity(const std::string&, const std::string&) const {
    return std::nullopt;
  }
  virtual std::string fingerprint() const = 0;
};

class NliProvider {
 public:
  virtual ~NliProvider() = default;
  virtual std::vector<RelationJudgment> nli_batch(std::span<const NliPair> pairs) = 0;
  virtual std::string fingerprint() const = 0;

  RelationJudgment nli(const std::string& premise, const std::string& hypothesis) {
    const NliPair pair{premise, hypothesis};
    return nli_batch(std::span<const NliPair>(&pair, 1)).at(0);
  }
};

class FillMaskProvider {
 public:
  virtual ~FillMaskProvider() = default;
  /// Up to k candidates, lowercased and deduplicated, best first.
  virtual std::vector<MaskCandidate> fill_mask(const std::string& prompt, std::size_t k) = 0;
  virtual std::string fingerprint() const = 0;
};

// ---------------------------------------------------------------- mock

/// Deterministic embeddings from feature hashing: every lowercase word adds a
/// seeded pseudo-random direction, plus a small whole-text component so that
/// distinct texts never collide. Texts sharing words are similar.
class MockSimilarityProvider : public SimilarityProvider {
 public:
  explicit MockSimilarityProvider(std::uint64_t seed = 0, std::size_t dim = 64) : seed_(seed), dim_(dim) {}

  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  /// Pins sim(a, b) = sim(b, a) = value regardless of embeddings.
  void script_similarity(const std::string& a, const std::string& b, double value) {
    scripted_[key(a, b)] = value;
  }

  std::optional<double> scripted_similarity(const std::string& a, const std::string& b) const override {
    if (scripted_.empty()) return std::nullopt;
    const auto it = scripted_.find(key(a, b));
    if (it == scripted_.end()) return std::nullopt;
    return it->second;
  }

  std::string fingerprint() const override {
    std::uint64_t h = detail::fnv1a("mock-embed");
    h = detail::mix_seed(h, seed_);
    h = detail::mix_seed(h, dim_);
    for (const auto& [k, v] : scripted_) {
      h = detail::fnv1a(k.first, h);
      h = detail::fnv1a(k.second, h);
      h = detail::fnv1a(detail::format_double(v), h);
    }
    return "mock:" + detail::hex64(h);
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  static std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  void add_direction(Embedding& v, std::uint64_t state, double weight) const {
    for (std::size_t i = 0; i < dim_; ++i) {
      // Two uniforms per coordinate via Box-Muller.
      const double u1 = (static_cast<double>(detail::splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
      const double u2 = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
      v[i] += weight * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
  }

  Embedding embed_one(const std::string& text) const {
    Embedding v(dim_, 0.0);
    std::string word;
    auto flush = [&] {
      if (!word.empty()) add_direction(v, detail::fnv1a(word, detail::mix_seed(seed_, 1)), 1.0);
      word.clear();
    };
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        word.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush();
      }
    }
    flush();
    add_direction(v, detail::fnv1a(text, detail::mix_seed(seed_, 2)), 0.25);
    normalize(v);
    return v;
  }

  std::uint64_t seed_;
  std::size_t dim_;
  std::map<std::pair<std::string, std::string>, double> scripted_;
  mutable std::atomic<std::size_t> calls_{0};
};

/// Scripted NLI. Unscripted pairs get the uniform distribution, or with
/// Fallback::hashed a pseudo-random distribution determined by (seed, pair).
class MockNliProvider : public NliProvider {
 public:
  enum class Fallback { uniform, hashed };

  explicit MockNliProvider(Fallback fallback = Fallback::uniform, std::uint64_t seed = 0)
      : fallback_(fallback), seed_(seed) {}

  void script(const std::string& premise, const std::string& hypothesis, RelationJudgment j) {
    if (!j.valid()) throw InvalidProbabilityError("scripted judgment is not a distribution");
    table_[{premise, hypothesis}] = j;
  }

  std::vector<RelationJudgment> nli_batch(std::span<const NliPair> pairs) override {
    calls_.fetch_add(pairs.size(), std::memory_order_relaxed);
    std::vector<RelationJudgment> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
      if (p.premise.empty() || p.hypothesis.empty()) throw MalformedResponseError("empty NLI input");
      const auto it = table_.find(p);
      out.push_back(it != table_.end() ? it->second : fallback(p));
    }
    return out;
  }

  std::string fingerprint() const override {
    std::uint64_t h = detail::mix_seed(detail::fnv1a("mock-nli"), seed_);
    h = detail::mix_seed(h, static_cast<std::uint64_t>(fallback_));
    for (const auto& [k, v] : table_) {
      h = detail::fnv1a(compose_nli_text(k.premise, k.hypothesis), h);
      for (double x : {v.p_contradicts, v.p_neutral, v.p_entails}) h = detail::fnv1a(detail::format_double(x), h);
    }
    return "mock:" + detail::hex64(h);
  }

  /// Number of pair judgments requested from this backend.
  std::size_t calls() const { return calls_.load(); }

 private:
  RelationJudgment fallback(const NliPair& p) const {
    if (fallback_ == Fallback::uniform) return {};
    std::uint64_t state = detail::fnv1a(compose_nli_text(p.premise, p.hypothesis), detail::mix_seed(seed_, 3));
    double w[3];
    for (double& x : w) x = 0.05 + static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
    const double sum = w[0] + w[1] + w[2];
    return {w[0] / sum, w[1] / sum, 1.0 - w[0] / sum - w[1] / sum};
  }

  Fallback fallback_;
  std::uint64_t seed_;
  std::map<NliPair, RelationJudgment> table_;
  std::atomic<std::size_t> calls_{0};
};

/// Fill-mask over a fixed scored vocabulary, optionally overridden per prompt.
class MockFillMaskProvider : public FillMaskProvider {
 public:
  explicit MockFillMaskProvider(std::vector<MaskCandidate> vocabulary = {}) : vocabulary_(std::move(vocabulary)) {}

  void script(const std::string& prompt, std::vector<MaskCandidate> candidates) {
    scripted_[prompt] = std::move(candidates);
  }

  std::vector<MaskCandidate> fill_mask(const std::string& prompt, std::size_t k) override {
    require_single_mask(prompt);
    calls_.fetch_add(1, std::memory_order_relaxed);
    const auto it = scripted_.find(prompt);
    return finalize_candidates(it != scripted_.end() ? it->second : vocabulary_, k);
  }

  std::string fingerprint() const override {
    std::uint64_t h = detail::fnv1a("mock-fill-mask");
    for (const auto& c : vocabulary_) h = detail::fnv1a(c.token + "=" + detail::format_double(c.score), h);
    for (const auto& [prompt, cands] : scripted_) {
      h = detail::fnv1a(prompt, h);
      for (const auto& c : cands) h = detail::fnv1a(c.token + "=" + detail::format_double(c.score), h);
    }
    return "mock:" + detail::hex64(h);
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<MaskCandidate> vocabulary_;
  std::map<std::string, std::vector<MaskCandidate>, std::less<>> scripted_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------- files

namespace detail {

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendUnavailableError("cannot open score file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::string file_fingerprint(std::string_view kind, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = fnv1a(kind);
  std::string chunk(1 << 16, '\0');
  while (in) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    h = fnv1a(std::string_view(chunk.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return "files:" + hex64(h);
}

}  // namespace detail

/// Line-delimited JSON store: {"text_hash", "text", "vector": [...]}.
inline void write_embedding_store(const std::filesystem::path& path, std::span<const std::string> texts,
                                  std::span<const Embedding> vectors) {
  if (texts.size() != vectors.size()) throw MalformedResponseError("texts and vectors differ in count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BackendUnavailableError("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    nlohmann::json rec = {{"text_hash", detail::hex64(detail::fnv1a(texts[i]))},
                          {"text", texts[i]},
                          {"vector", vectors[i]}};
    out << rec.dump() << '\n';
  }
}

class FilesSimilarityProvider : public SimilarityProvider {
 public:
  explicit FilesSimilarityProvider(const std::filesystem::path& store)
      : fingerprint_(detail::file_fingerprint("embed", store)) {
    detail::for_each_jsonl(store, [&](const nlohmann::json& rec) {
      vectors_[rec.at("text").get<std::string>()] = rec.at("vector").get<Embedding>();
    });
  }

  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      const auto it = vectors_.find(t);
      if (it == vectors_.end()) throw MissingEmbeddingError("no stored embedding for text '" + t + "'");
      out.push_back(it->second);
    }
    return out;
  }

  std::string fingerprint() const override { return fingerprint_; }

 private:
  std::map<std::string, Embedding, std::less<>> vectors_;
  std::string fingerprint_;
};

/// Precomputed judgments keyed by the composed "<premise>. <hypothesis>"
/// string: {"text", "contradicts", "neutral", "entails"} per line.
class FilesNliProvider : public NliProvider {
 public:
  explicit FilesNliProvider(const std::filesystem::path& scores)
      : fingerprint_(detail::file_fingerprint("nli", scores)) {
    detail::for_each_jsonl(scores, [&](const nlohmann::json& rec) {
      RelationJudgment j{rec.at("contradicts").get<double>(), rec.at("neutral").get<double>(),
                         rec.at("entails").get<double>()};
      if (!j.valid()) throw MalformedResponseError("judgment does not sum to 1");
      table_[rec.at("text").get<std::string>()] = j;
    });
  }

  std::vector<RelationJudgment> nli_batch(std::span<const NliPair> pairs) override {
    std::vector<RelationJudgment> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
      const auto text = compose_nli_text(p.premise, p.hypothesis);
      const auto it = table_.find(text);
      if (it == table_.end()) throw MalformedResponseError("no stored judgment for '" + text + "'");
      out.push_back(it->second);
    }
    return out;
  }

  std::string fingerprint() const override { return fingerprint_; }

 private:
  std::map<std::string, RelationJudgment, std::less<>> table_;
  std::string fingerprint_;
};

/// {"prompt", "candidates": [{"token", "score"}]} per line.
class FilesFillMaskProvider : public FillMaskProvider {
 public:
  explicit FilesFillMaskProvider(const std::filesystem::path& scores)
      : fingerprint_(detail::file_fingerprint("fill-mask", scores)) {
    detail::for_each_jsonl(scores, [&](const nlohmann::json& rec) {
      std::vector<MaskCandidate> cands;
      for (const auto& c : rec.at("candidates"))
        cands.push_back({c.at("token").get<std::string>(), c.at("score").get<double>()});
      table_[rec.at("prompt").get<std::string>()] = std::move(cands);
    });
  }

  std::vector<MaskCandidate> fill_mask(const std::string& prompt, std::size_t k) override {
    require_single_mask(prompt);
    const auto it = table_.find(prompt);
    if (it == table_.end()) return {};
    return finalize_candidates(it->second, k);
  }

  std::string fingerprint() const override { return fingerprint_; }

 private:
  std::map<std::string, std::vector<MaskCandidate>, std::less<>> table_;
  std::string fingerprint_;
};

// ---------------------------------------------------------------- http

struct HttpOptions {
  std::string endpoint = "http://127.0.0.1:8000";
  std::size_t embed_batch = 64;
  std::size_t nli_batch = 32;
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{120};

  /// Endpoint from TAXOMETER_SIDECAR_URL when set.
  static HttpOptions from_env() {
    HttpOptions o;
    if (const char* url = std::getenv("TAXOMETER_SIDECAR_URL"); url && *url) o.endpoint = url;
    return o;
  }
};

/// JSON-over-HTTP client for the inference sidecar. Transport failures and
/// 5xx responses are retried with exponential backoff; other non-200 statuses
/// fail immediately.
class SidecarClient {
 public:
  explicit SidecarClient(HttpOptions options) : options_(std::move(options)) {}

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    return request(path, &body);
  }
  nlohmann::json get(const std::string& path) const { return request(path, nullptr); }

  /// Model identity reported by /v1/health, fetched once.
  std::string model_identity() const {
    std::call_once(identity_once_, [&] {
      const auto health = get("/v1/health");
      identity_ = health.value("models", nlohmann::json::object()).dump() + "|" +
                  health.value("versions", nlohmann::json::object()).dump();
    });
    return identity_;
  }

  const HttpOptions& options() const { return options_; }

 private:
  nlohmann::json request(const std::string& path, const nlohmann::json* body) const {
    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client client(options_.endpoint);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      auto res = body ? client.Post(path, body->dump(), "application/json") : client.Get(path);
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw MalformedResponseError(path + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw MalformedResponseError(path + " returned invalid JSON: " + e.what());
      }
    }
    throw BackendUnavailableError("sidecar " + options_.endpoint + path + " unavailable: " + last_error);
  }

  HttpOptions options_;
  mutable std::once_flag identity_once_;
  mutable std::string identity_;
};

class HttpSimilarityProvider : public SimilarityProvider {
 public:
  explicit HttpSimilarityProvider(HttpOptions options = HttpOptions::from_env()) : client_(std::move(options)) {}

  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    const std::size_t batch = std::max<std::size_t>(1, client_.options().embed_batch);
    for (std::size_t start = 0; start < texts.size(); start += batch) {
      const auto part = texts.subspan(start, std::min(batch, texts.size() - start));
      const auto res = client_.post("/v1/embed", {{"texts", std::vector<std::string>(part.begin(), part.end())}});
      if (!res.contains("vectors") || !res["vectors"].is_array() || res["vectors"].size() != part.size())
        throw MalformedResponseError("/v1/embed returned a wrong number of vectors");
      for (const auto& v : res["vectors"]) {
        auto e = v.get<Embedding>();
        normalize(e);
        out.push_back(std::move(e));
      }
    }
    return out;
  }

  std::string fingerprint() const override {
    return "http:" + detail::hex64(detail::fnv1a("embed|" + client_.model_identity()));
  }

 private:
  SidecarClient client_;
};

class HttpNliProvider : public NliProvider {
 public:
  explicit HttpNliProvider(HttpOptions options = HttpOptions::from_env()) : client_(std::move(options)) {}

  std::vector<RelationJudgment> nli_batch(std::span<const NliPair> pairs) override {
    std::vector<RelationJudgment> out;
    out.reserve(pairs.size());
    const std::size_t batch = std::max<std::size_t>(1, client_.options().nli_batch);
    for (std::size_t start = 0; start < pairs.size(); start += batch) {
      const auto part = pairs.subspan(start, std::min(batch, pairs.size() - start));
      nlohmann::json body = {{"pairs", nlohmann::json::array()}};
      for (const auto& p : part) body["pairs"].push_back({{"premise", p.premise}, {"hypothesis", p.hypothesis}});
      const auto res = client_.post("/v1/nli", body);
      if (!res.contains("judgments") || !res["judgments"].is_array() || res["judgments"].size() != part.size())
        throw MalformedResponseError("/v1/nli returned a wrong number of judgments");
      std::vector<RelationJudgment> chunk;
      for (const auto& j : res["judgments"]) {
        if (!j.contains("contradicts") || !j.contains("neutral") || !j.contains("entails"))
          throw MalformedResponseError("/v1/nli judgment lacks a class probability");
        RelationJudgment r{j["contradicts"].get<double>(), j["neutral"].get<double>(), j["entails"].get<double>()};
        if (!r.valid()) throw MalformedResponseError("/v1/nli judgment does not sum to 1");
        chunk.push_back(r);
      }
      out.insert(out.end(), chunk.begin(), chunk.end());
    }
    return out;
  }

  std::string fingerprint() const override {
    return "http:" + detail::hex64(detail::fnv1a("nli|" + client_.model_identity()));
  }

 private:
  SidecarClient client_;
};

class HttpFillMaskProvider : public FillMaskProvider {
 public:
  explicit HttpFillMaskProvider(HttpOptions options = HttpOptions::from_env()) : client_(std::move(options)) {}

  std::vector<MaskCandidate> fill_mask(const std::string& prompt, std::size_t k) override {
    require_single_mask(prompt);
    const auto res = client_.post("/v1/fill_mask", {{"prompt", prompt}, {"k", k}});
    if (!res.contains("candidates") || !res["candidates"].is_array())
      throw MalformedResponseError("/v1/fill_mask response lacks candidates");
    std::vector<MaskCandidate> cands;
    for (const auto& c : res["candidates"])
      cands.push_back({c.at("token").get<std::string>(), c.at("score").get<double>()});
    return finalize_candidates(std::move(cands), k);
  }

  std::string fingerprint() const override {
    return "http:" + detail::hex64(detail::fnv1a("fill-mask|" + client_.model_identity()));
  }

 private:
  SidecarClient client_;
};

// ---------------------------------------------------------------- caching

/// Memoizing NLI front. Concurrent requests for the same pair share one
/// backend call; distinct misses in a batch go to the backend together.
class CachingNliProvider : public NliProvider {
 public:
  explicit CachingNliProvider(std::shared_ptr<NliProvider> backend) : backend_(std::move(backend)) {}

  std::vector<RelationJudgment> nli_batch(std::span<const NliPair> pairs) override {
    std::vector<std::shared_future<RelationJudgment>> slots(pairs.size());
    std::vector<NliPair> misses;
    std::vector<std::promise<RelationJudgment>> promises;
    {
      std::lock_guard lock(mutex_);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto it = entries_.find(pairs[i]);
        if (it != entries_.end()) {
          slots[i] = it->second;
          continue;
        }
        promises.emplace_back();
        auto fut = promises.back().get_future().share();
        entries_.emplace(pairs[i], fut);
        slots[i] = fut;
        misses.push_back(pairs[i]);
      }
    }
    if (!misses.empty()) {
      try {
        const auto results = backend_->nli_batch(misses);
        for (std::size_t i = 0; i < misses.size(); ++i) promises[i].set_value(results.at(i));
      } catch (...) {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < misses.size(); ++i) {
          entries_.erase(misses[i]);
          promises[i].set_exception(std::current_exception());
        }
        throw;
      }
    }
    std::vector<RelationJudgment> out;
    out.reserve(pairs.size());
    for (auto& s : slots) out.push_back(s.get());
    return out;
  }

  std::string fingerprint() const override { return backend_->fingerprint(); }

 private:
  std::shared_ptr<NliProvider> backend_;
  std::mutex mutex_;
  std::map<NliPair, std::shared_future<RelationJudgment>> entries_;
};

/// Memoizing fill-mask front keyed by (prompt, k).
class CachingFillMaskProvider : public FillMaskProvider {
 public:
  explicit CachingFillMaskProvider(std::shared_ptr<FillMaskProvider> backend) : backend_(std::move(backend)) {}

  std::vector<MaskCandidate> fill_mask(const std::string& prompt, std::size_t k) override {
    {
      std::lock_guard lock(mutex_);
      const auto it = entries_.find({prompt, k});
      if (it != entries_.end()) return it->second;
    }
    auto result = backend_->fill_mask(prompt, k);
    std::lock_guard lock(mutex_);
    return entries_.emplace(std::make_pair(prompt, k), std::move(result)).first->second;
  }

  std::string fingerprint() const override { return backend_->fingerprint(); }

 private:
  std::shared_ptr<FillMaskProvider> backend_;
  std::mutex mutex_;
  std::map<std::pair<std::string, std::size_t>, std::vector<MaskCandidate>> entries_;
};

// ---------------------------------------------------------------- selection

enum class ProviderKind { mock, files, http };

inline ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "mock") return ProviderKind::mock;
  if (s == "files") return ProviderKind::files;
  if (s == "http") return ProviderKind::http;
  throw ParseError("unknown provider '" + std::string(s) + "' (expected mock|files|http)");
}

struct ProviderOptions {
  ProviderKind kind = ProviderKind::mock;
  std::uint64_t seed = 0;
  std::filesystem::path embeddings;   // files backend
  std::filesystem::path nli_scores;   // files backend
  std::filesystem::path mask_scores;  // files backend, optional
  HttpOptions http = HttpOptions::from_env();
};

struct ProviderSet {
  std::shared_ptr<SimilarityProvider> similarity;
  std::shared_ptr<NliProvider> nli;          // cached
  std::shared_ptr<FillMaskProvider> fill_mask;  // cached; null when unavailable
};

/// Builds the three providers for one backend. The mock NLI uses hashed
/// fallbacks so that scores vary across edges.
inline ProviderSet make_providers(const ProviderOptions& o) {
  ProviderSet set;
  std::shared_ptr<NliProvider> nli;
  std::shared_ptr<FillMaskProvider> mlm;
  switch (o.kind) {
    case ProviderKind::mock:
      set.similarity = std::make_shared<MockSimilarityProvider>(o.seed);
      nli = std::make_shared<MockNliProvider>(MockNliProvider::Fallback::hashed, o.seed);
      mlm = std::make_shared<MockFillMaskProvider>();
      break;
    case ProviderKind::files:
      if (!o.embeddings.empty()) set.similarity = std::make_shared<FilesSimilarityProvider>(o.embeddings);
      if (!o.nli_scores.empty()) nli = std::make_shared<FilesNliProvider>(o.nli_scores);
      if (!o.mask_scores.empty()) mlm = std::make_shared<FilesFillMaskProvider>(o.mask_scores);
      break;
    case ProviderKind::http:
      set.similarity = std::make_shared<HttpSimilarityProvider>(o.http);
      nli = std::make_shared<HttpNliProvider>(o.http);
      mlm = std::make_shared<HttpFillMaskProvider>(o.http);
      break;
  }
  if (nli) set.nli = std::make_shared<CachingNliProvider>(nli);
  if (mlm) set.fill_mask = std::make_shared<CachingFillMaskProvider>(mlm);
  return set;
}

/// Cache directory from TAXOMETER_CACHE_DIR, empty when unset.
inline std::filesystem::path cache_dir_from_env() {
  if (const char* dir = std::getenv("TAXOMETER_CACHE_DIR"); dir && *dir) return dir;
  return {};
}

}  // namespace taxometer
