#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shockcast/embedding.hpp"
#include "shockcast/error.hpp"
#include "shockcast/linalg.hpp"
#include "shockcast/text_io.hpp"

namespace shockcast {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct NewsSummary {
  int year = 0;
  std::vector<std::string> commodities;
  std::string summary;
  bool verified = false;
  int retries = 0;
  std::string backend_id;
  std::string created_at;

  friend bool operator==(const NewsSummary&, const NewsSummary&) = default;
};

struct Verdict {
  int value = 0;  // 1 = accepted
  std::optional<std::string> rationale;
};

enum class FallbackPolicy { skip, placeholder };

inline FallbackPolicy parse_fallback_policy(std::string_view s) {
  if (s == "skip") return FallbackPolicy::skip;
  if (s == "placeholder") return FallbackPolicy::placeholder;
  throw ConfigError("unknown fallback policy '" + std::string(s) + "'");
}

// Prompt templates. Placeholders: {year}, {commodities}, {summary}. The
// canonical copies live under prompts/<version>/ and are loaded at runtime
// with load_prompts(); the built-in defaults mirror prompts/v1.
struct PromptSet {
  std::string version = "v1";
  std::string generate =
      "You are a news specialist covering global commodity markets.\n"
      "Write a concise, factual summary of the major economic, geopolitical, and market-related developments "
      "that affected commodity prices in {year}.\n"
      "Commodities of interest: {commodities}.\n"
      "Mention each commodity you discuss by name. Do not speculate about later years.\n";
  std::string verify =
      "You are a fact-checker for historical economic news.\n"
      "Check the following summary of commodity-market developments in {year} against the historical record.\n"
      "Summary:\n"
      "{summary}\n"
      "Answer on the first line with exactly \"VERDICT: 1\" if every claim is consistent with the historical "
      "record, or \"VERDICT: 0\" otherwise. Give a one-sentence rationale on the second line.\n";
};

inline PromptSet load_prompts(const std::filesystem::path& dir) {
  PromptSet p;
  p.version = dir.filename().string();
  p.generate = text::read_file(dir / "generate.txt");
  p.verify = text::read_file(dir / "verify.txt");
  return p;
}

inline std::string render_prompt(std::string tmpl, const std::map<std::string, std::string>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string token = "{" + key + "}";
    for (std::size_t pos = tmpl.find(token); pos != std::string::npos; pos = tmpl.find(token, pos + value.size())) {
      tmpl.replace(pos, token.size(), value);
    }
  }
  return tmpl;
}

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct AgentConfig {
  int first_year = 1960;
  int last_year = 2023;
  int max_retries = 5;  // generate attempts per year
  std::size_t in_flight_limit = 1;
  FallbackPolicy fallback = FallbackPolicy::skip;
  std::vector<std::string> commodities;
  PromptSet prompts;
  // Source of created_at stamps; replace with a constant for reproducible stores.
  std::function<std::string()> clock = utc_now_iso8601;

  void validate() const {
    if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
    if (first_year > last_year) throw ConfigError("year range is empty");
    if (in_flight_limit < 1) throw ConfigError("in_flight_limit must be >= 1");
  }
  bool covers(int year) const noexcept { return year >= first_year && year <= last_year; }
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct GenerationRequest {
  int year = 0;
  int attempt = 0;  // 0-based attempt index within the retry loop
  std::vector<std::string> commodities;
  std::string prompt;
};

struct FactCheckRequest {
  int year = 0;
  int attempt = 0;
  std::string summary;
  std::string prompt;
};

// Text generation, verification and embedding. Implementations must be safe
// to call concurrently for different years, and embed() must return a
// constant dimension.
class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(const GenerationRequest& request) = 0;
  virtual Verdict verify(const FactCheckRequest& request) = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class MockVerdicts { accept_all, reject_all, accept_on_attempt, scripted, random };

struct MockOptions {
  std::uint64_t seed = 0;
  std::size_t dim = 64;
  MockVerdicts verdicts = MockVerdicts::accept_all;
  int accept_on_attempt = 1;                 // 1-based, for accept_on_attempt
  std::map<int, std::vector<int>> script;    // year -> verdict per attempt; last value repeats
  double accept_probability = 0.8;           // for random
  std::map<int, int> transport_failures;     // year -> number of leading generate calls that fail
  std::set<int> empty_generation_years;      // years whose drafts come back empty
};

// Deterministic, seeded stand-in for a language-model service. Text is
// assembled from a fixed vocabulary keyed by (seed, year, attempt); embeddings
// are hashed bag-of-words features plus a whole-text hash component.
class MockBackend final : public TextBackend {
 public:
  explicit MockBackend(MockOptions options = {}) : opt_(std::move(options)) {}

  std::string id() const override { return "mock-seed" + std::to_string(opt_.seed); }

  std::string generate(const GenerationRequest& req) override {
    {
      std::lock_guard lock(mu_);
      const int call = generate_calls_[req.year]++;
      auto f = opt_.transport_failures.find(req.year);
      if (f != opt_.transport_failures.end() && call < f->second) {
        throw BackendError("mock transport timeout for " + std::to_string(req.year), true);
      }
    }
    if (opt_.empty_generation_years.count(req.year)) return "";
    return compose(req);
  }

  Verdict verify(const FactCheckRequest& req) override {
    int v = 1;
    switch (opt_.verdicts) {
      case MockVerdicts::accept_all: v = 1; break;
      case MockVerdicts::reject_all: v = 0; break;
      case MockVerdicts::accept_on_attempt: v = req.attempt + 1 >= opt_.accept_on_attempt ? 1 : 0; break;
      case MockVerdicts::scripted: {
        auto it = opt_.script.find(req.year);
        if (it == opt_.script.end() || it->second.empty()) {
          v = 1;
        } else {
          const auto idx = std::min<std::size_t>(static_cast<std::size_t>(req.attempt), it->second.size() - 1);
          v = it->second[idx];
        }
        break;
      }
      case MockVerdicts::random: {
        const double u = static_cast<double>(splitmix64(fnv1a64(req.summary) ^ opt_.seed) >> 11) * 0x1.0p-53;
        v = u < opt_.accept_probability ? 1 : 0;
        break;
      }
    }
    std::lock_guard lock(mu_);
    verify_log_.emplace_back(req.summary, v);
    return {v, v == 1 ? "consistent with mock record" : "mock rejection"};
  }

  std::vector<double> embed(const std::string& text) override {
    std::vector<double> e(opt_.dim, 0.0);
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
      if (std::isalnum(static_cast<unsigned char>(ch))) {
        cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
      } else if (!cur.empty()) {
        tokens.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    auto add = [&](std::uint64_t h) {
      h = splitmix64(h ^ opt_.seed);
      e[h % opt_.dim] += (h >> 63) ? 1.0 : -1.0;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      add(fnv1a64(tokens[i]));
      if (i + 1 < tokens.size()) add(fnv1a64(tokens[i + 1], fnv1a64(tokens[i])));
    }
    const std::uint64_t whole = fnv1a64(text);
    for (std::size_t j = 0; j < opt_.dim; ++j) {
      e[j] += 0.05 * (static_cast<double>(splitmix64(whole + j) >> 11) * 0x1.0p-53 - 0.5);
    }
    double norm = 0.0;
    for (double x : e) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& x : e) x /= norm;
    return e;
  }

  int generate_calls(int year) const {
    std::lock_guard lock(mu_);
    auto it = generate_calls_.find(year);
    return it == generate_calls_.end() ? 0 : it->second;
  }

  std::vector<std::pair<std::string, int>> verify_log() const {
    std::lock_guard lock(mu_);
    return verify_log_;
  }

 private:
  std::string compose(const GenerationRequest& req) const {
    static constexpr std::string_view kMovements[] = {"rose sharply", "eased", "were volatile", "fell",
                                                      "stabilized", "climbed steadily", "collapsed"};
    static constexpr std::string_view kDrivers[] = {
        "OPEC production decisions",  "drought in major growing regions", "a strong US dollar",
        "global recession fears",     "supply chain disruptions",         "geopolitical tensions in the Middle East",
        "record harvests",            "monetary tightening",              "industrial demand from Asia",
        "currency devaluations",      "export restrictions",              "inventory drawdowns"};
    std::vector<std::string> pool = req.commodities;
    if (pool.empty()) pool = {"crude oil", "wheat", "copper"};
    std::uint64_t h = splitmix64(opt_.seed ^ splitmix64(static_cast<std::uint64_t>(req.year) * 1315423911ULL +
                                                        static_cast<std::uint64_t>(req.attempt)));
    auto next = [&h](std::size_t mod) {
      h = splitmix64(h);
      return static_cast<std::size_t>(h % mod);
    };
    std::string out = "In " + std::to_string(req.year) + ", commodity markets were shaped by " +
                      std::string(kDrivers[next(std::size(kDrivers))]) + ".";
    const std::size_t sentences = 2 + next(2);
    for (std::size_t s = 0; s < sentences; ++s) {
      out += " " + pool[next(pool.size())] + " prices " + std::string(kMovements[next(std::size(kMovements))]) +
             " amid " + std::string(kDrivers[next(std::size(kDrivers))]) + ".";
    }
    out += " (draft " + std::to_string(req.attempt + 1) + ")";
    return out;
  }

  MockOptions opt_;
  mutable std::mutex mu_;
  std::map<int, int> generate_calls_;
  std::vector<std::pair<std::string, int>> verify_log_;
};

// ---------------------------------------------------------------------------
// Stores
// ---------------------------------------------------------------------------

inline std::string summary_to_json_line(const NewsSummary& s) {
  nlohmann::ordered_json j;
  j["year"] = s.year;
  j["commodities"] = s.commodities;
  j["summary"] = s.summary;
  j["verified"] = s.verified;
  j["retries"] = s.retries;
  j["backend_id"] = s.backend_id;
  j["created_at"] = s.created_at;
  return j.dump() + "\n";
}

inline NewsSummary summary_from_json_line(std::string_view line, std::size_t line_no) {
  try {
    const auto j = nlohmann::json::parse(line);
    NewsSummary s;
    s.year = j.at("year").get<int>();
    s.commodities = j.at("commodities").get<std::vector<std::string>>();
    s.summary = j.at("summary").get<std::string>();
    s.verified = j.at("verified").get<bool>();
    s.retries = j.at("retries").get<int>();
    s.backend_id = j.at("backend_id").get<std::string>();
    s.created_at = j.at("created_at").get<std::string>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, std::string("malformed summary record: ") + e.what());
  }
}

// Append-only JSON-lines file of summaries, one record per year. Appends are
// serialized; the latest record for a year wins when reading.
class SummaryStore {
 public:
  explicit SummaryStore(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    const auto lines = text::split_lines(text::read_file(path_));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (text::trim(lines[i]).empty()) continue;
      auto s = summary_from_json_line(lines[i], i + 1);
      records_[s.year] = std::move(s);
    }
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  // A year is final once it holds a verified summary or a fallback placeholder.
  bool has_final(int year) const {
    std::lock_guard lock(mu_);
    return records_.count(year) > 0;
  }

  std::optional<NewsSummary> get(int year) const {
    std::lock_guard lock(mu_);
    auto it = records_.find(year);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  void append(const NewsSummary& s) {
    std::lock_guard lock(mu_);
    if (path_.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path_.parent_path(), ec);
      if (ec) throw StoreError("cannot create store directory: " + ec.message());
    }
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw StoreError("cannot open summary store " + path_.string());
    const std::string line = summary_to_json_line(s);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw StoreError("write to summary store " + path_.string() + " failed");
    records_[s.year] = s;
  }

  std::vector<NewsSummary> all() const {
    std::lock_guard lock(mu_);
    std::vector<NewsSummary> out;
    for (const auto& [_, s] : records_) out.push_back(s);
    return out;
  }

  std::vector<NewsSummary> verified() const {
    std::vector<NewsSummary> out;
    for (auto& s : all())
      if (s.verified) out.push_back(std::move(s));
    return out;
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<int, NewsSummary> records_;
};

inline std::string embeddings_to_jsonl(const std::vector<EmbeddingVector>& vectors) {
  std::string out;
  for (const auto& e : vectors) {
    nlohmann::ordered_json j;
    j["year"] = e.year;
    j["dim"] = e.dim();
    j["values"] = e.values;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<EmbeddingVector> embeddings_from_jsonl(std::string_view content) {
  std::vector<EmbeddingVector> out;
  const auto lines = text::split_lines(content);
  std::size_t dim = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    EmbeddingVector e;
    std::size_t declared = 0;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      e.year = j.at("year").get<int>();
      declared = j.at("dim").get<std::size_t>();
      e.values = j.at("values").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(i + 1, std::string("malformed embedding record: ") + ex.what());
    }
    if (declared != e.dim()) throw ParseError(i + 1, "embedding dim field does not match its values");
    if (dim == 0) dim = declared;
    if (declared != dim) throw ContractError("embedding store mixes dimensions " + std::to_string(dim) + " and " + std::to_string(declared));
    validate_embedding(e);
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agent operations
// ---------------------------------------------------------------------------

inline std::vector<std::string> referenced_commodities(std::string_view text, const std::vector<std::string>& names) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::vector<std::string> out;
  for (const auto& n : names) {
    std::string ln = n;
    std::transform(ln.begin(), ln.end(), ln.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!ln.empty() && lower.find(ln) != std::string::npos) out.push_back(n);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& xs, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

// Asks the news specialist for a draft of `year`. The draft is unverified.
inline NewsSummary generate_summary(int year, TextBackend& backend, const AgentConfig& cfg, int attempt = 0) {
  if (!cfg.covers(year)) {
    throw ValidationError("year " + std::to_string(year) + " is outside the configured range " +
                          std::to_string(cfg.first_year) + "-" + std::to_string(cfg.last_year));
  }
  GenerationRequest req;
  req.year = year;
  req.attempt = attempt;
  req.commodities = cfg.commodities;
  req.prompt = render_prompt(cfg.prompts.generate,
                             {{"year", std::to_string(year)},
                              {"commodities", cfg.commodities.empty() ? "all major commodities" : join(cfg.commodities, ", ")}});
  std::string text(text::trim(backend.generate(req)));
  if (text.empty()) throw InvalidDraftError("empty draft for " + std::to_string(year));
  NewsSummary s;
  s.year = year;
  s.commodities = referenced_commodities(text, cfg.commodities);
  s.summary = std::move(text);
  s.verified = false;
  s.retries = attempt;
  s.backend_id = backend.id();
  s.created_at = cfg.clock ? cfg.clock() : std::string();
  return s;
}

inline Verdict fact_check(const NewsSummary& draft, TextBackend& backend, const AgentConfig& cfg, int attempt = 0) {
  if (text::trim(draft.summary).empty()) throw PreconditionError("fact_check: draft is empty");
  FactCheckRequest req;
  req.year = draft.year;
  req.attempt = attempt;
  req.summary = draft.summary;
  req.prompt = render_prompt(cfg.prompts.verify, {{"year", std::to_string(draft.year)}, {"summary", draft.summary}});
  Verdict v = backend.verify(req);
  if (v.value != 0 && v.value != 1) throw BackendError("fact-checker returned a non-binary verdict", false);
  return v;
}

enum class YearOutcome { verified, skipped, placeholder, cached };

inline const char* to_string(YearOutcome o) {
  switch (o) {
    case YearOutcome::verified: return "verified";
    case YearOutcome::skipped: return "skipped";
    case YearOutcome::placeholder: return "placeholder";
    case YearOutcome::cached: return "cached";
  }
  return "?";
}

struct YearLog {
  int year = 0;
  int attempts = 0;  // generate calls made this run
  YearOutcome outcome = YearOutcome::skipped;
  std::vector<std::string> errors;
};

struct OrchestrationResult {
  std::map<int, NewsSummary> summaries;  // every final record for the configured years
  std::vector<YearLog> log;
  std::vector<std::string> warnings;
};

namespace detail {

struct YearRun {
  YearLog log;
  std::optional<NewsSummary> record;
};

inline YearRun run_year(int year, TextBackend& backend, const AgentConfig& cfg) {
  YearRun r;
  r.log.year = year;
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    ++r.log.attempts;
    try {
      NewsSummary draft = generate_summary(year, backend, cfg, attempt);
      const Verdict v = fact_check(draft, backend, cfg, attempt);
      if (v.value == 1) {
        draft.verified = true;
        draft.retries = attempt;
        r.log.outcome = YearOutcome::verified;
        r.record = std::move(draft);
        return r;
      }
      r.log.errors.push_back("attempt " + std::to_string(attempt + 1) + ": rejected" +
                             (v.rationale ? " (" + *v.rationale + ")" : std::string()));
    } catch (const BackendError& e) {
      if (!e.retryable()) throw;
      r.log.errors.push_back("attempt " + std::to_string(attempt + 1) + ": " + e.what());
    }
  }
  if (cfg.fallback == FallbackPolicy::placeholder) {
    NewsSummary s;
    s.year = year;
    s.summary = "No verified summary is available for " + std::to_string(year) + ".";
    s.verified = false;
    s.retries = cfg.max_retries;
    s.backend_id = backend.id();
    s.created_at = cfg.clock ? cfg.clock() : std::string();
    r.record = std::move(s);
    r.log.outcome = YearOutcome::placeholder;
  } else {
    r.log.outcome = YearOutcome::skipped;
  }
  return r;
}

}  // namespace detail

// Manager loop: for each configured year not already final in the store,
// generate and fact-check up to max_retries drafts. Accepted summaries are
// appended to the store once, in year order. Retryable backend failures count
// as failed attempts.
inline OrchestrationResult orchestrate(const AgentConfig& cfg, TextBackend& backend, SummaryStore& store) {
  cfg.validate();
  OrchestrationResult result;
  std::vector<int> pending;
  for (int y = cfg.first_year; y <= cfg.last_year; ++y) {
    if (store.has_final(y)) {
      result.log.push_back({y, 0, YearOutcome::cached, {}});
    } else {
      pending.push_back(y);
    }
  }

  for (std::size_t start = 0; start < pending.size(); start += cfg.in_flight_limit) {
    const std::size_t end = std::min(pending.size(), start + cfg.in_flight_limit);
    std::vector<detail::YearRun> runs;
    if (end - start == 1) {
      runs.push_back(detail::run_year(pending[start], backend, cfg));
    } else {
      std::vector<std::future<detail::YearRun>> futures;
      for (std::size_t i = start; i < end; ++i) {
        futures.push_back(std::async(std::launch::async, detail::run_year, pending[i], std::ref(backend), std::cref(cfg)));
      }
      for (auto& f : futures) f.wait();
      for (auto& f : futures) runs.push_back(f.get());
    }
    for (auto& run : runs) {
      if (run.record) store.append(*run.record);
      if (run.log.outcome != YearOutcome::verified) {
        result.warnings.push_back("year " + std::to_string(run.log.year) + ": maximum retries exceeded after " +
                                  std::to_string(run.log.attempts) + " attempts (" + to_string(run.log.outcome) + ")");
      }
      result.log.push_back(std::move(run.log));
    }
  }
  std::sort(result.log.begin(), result.log.end(), [](const YearLog& a, const YearLog& b) { return a.year < b.year; });

  for (int y = cfg.first_year; y <= cfg.last_year; ++y)
    if (auto s = store.get(y)) result.summaries.emplace(y, std::move(*s));
  const bool any_verified = std::any_of(result.summaries.begin(), result.summaries.end(),
                                        [](const auto& kv) { return kv.second.verified; });
  if (!any_verified) result.warnings.push_back("no verified summaries were produced");
  return result;
}

// One embedding per summary. Unverified summaries are rejected unless
// `include_placeholders` is set.
inline std::vector<EmbeddingVector> embed_summaries(const std::vector<NewsSummary>& summaries, TextBackend& backend,
                                                    bool include_placeholders = false) {
  std::vector<EmbeddingVector> out;
  std::size_t dim = 0;
  for (const auto& s : summaries) {
    if (!s.verified && !include_placeholders) {
      throw PreconditionError("summary for " + std::to_string(s.year) + " is not verified");
    }
    EmbeddingVector e{s.year, backend.embed(s.summary)};
    if (e.values.empty() || !all_finite(e.values)) {
      throw ContractError("backend returned an empty or non-finite embedding for " + std::to_string(s.year));
    }
    if (dim == 0) dim = e.dim();
    if (e.dim() != dim) {
      throw ContractError("backend contract violated: embedding dim " + std::to_string(e.dim()) + " for " +
                          std::to_string(s.year) + ", expected " + std::to_string(dim));
    }
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.year < b.year; });
  return out;
}

}  // namespace shockcast
