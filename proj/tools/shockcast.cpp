// shockcast: command-line driver for the ingest -> label -> distill -> embed ->
// reduce -> train -> eval -> ablate -> report pipeline.
//
// Exit status: 0 success, 1 validation or usage error, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "shockcast/http_backend.hpp"
#include "shockcast/shockcast.hpp"

namespace fs = std::filesystem;
using namespace shockcast;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";
// Stamp written into mock-backend stores so that repeated runs are byte-identical.
constexpr const char* kFixedClock = "1970-01-01T00:00:00Z";

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw RuntimeFailure("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string utc_stamp(const char* fmt) {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), fmt, &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    auto t = std::string(text::trim(cur));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// Options shared by every subcommand.
struct Common {
  std::uint64_t seed = 42;
  std::string config;
  std::string out = "run";
  bool force = false;
};

// One invocation: resolves the output directory, records inputs and outputs,
// and writes manifest.json at the end.
class Run {
 public:
  Run(std::string command, const Common& common, CLI::App* sub) : command_(std::move(command)), common_(common), sub_(sub) {
    started_ = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
    dir_ = common.out;
    if (fs::exists(dir_ / "manifest.json") && !common.force) {
      const fs::path base = dir_ / utc_stamp("%Y%m%dT%H%M%SZ");
      fs::path candidate = base;
      for (int i = 2; fs::exists(candidate); ++i) candidate = base.string() + "-" + std::to_string(i);
      dir_ = candidate;
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw StoreError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  const fs::path& dir() const { return dir_; }

  std::string input(const std::string& path) {
    std::string content = text::read_file(path);
    inputs_[path] = sha256_hex(content);
    return content;
  }

  void output(const std::string& name, const std::string& content) {
    text::write_file(dir_ / name, content);
    outputs_.push_back(name);
  }

  void note_output(const std::string& name) { outputs_.push_back(name); }
  void warn(const std::string& w) {
    std::cerr << "warning: " << w << "\n";
    warnings_.push_back(w);
  }

  void finish() {
    ojson m;
    m["tool"] = "shockcast";
    m["version"] = kToolVersion;
    m["command"] = command_;
    m["seed"] = common_.seed;
    ojson cfg = ojson::object();
    for (const CLI::Option* opt : sub_->get_options()) {
      const std::string name = opt->get_lnames().empty() ? "" : opt->get_lnames().front();
      if (name.empty() || name == "help" || name == "config") continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        cfg[name] = r.size() == 1 ? r.front() : [&] {
          std::string s;
          for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
          return s;
        }();
      } else {
        cfg[name] = opt->get_default_str();
      }
    }
    m["config"] = std::move(cfg);
    if (!common_.config.empty()) m["config_file"] = common_.config;
    ojson in = ojson::object();
    for (const auto& [path, digest] : inputs_) in[path] = "sha256:" + digest;
    m["inputs"] = std::move(in);
    m["outputs"] = outputs_;
    m["warnings"] = warnings_;
    m["started_at"] = started_;
    m["finished_at"] = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
    text::write_file(dir_ / "manifest.json", m.dump(2) + "\n");
    std::cout << "wrote " << dir_.string() << "\n";
  }

 private:
  std::string command_;
  Common common_;
  CLI::App* sub_;
  fs::path dir_;
  std::string started_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::vector<std::string> warnings_;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--config", c.config, "Flat key = value configuration file; flags override it");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_flag("--force", c.force, "Write into --out even if it already holds a run");
}

struct ModelFlags {
  TrainConfig train;
  std::string variant = "full";
};

void add_model_flags(CLI::App* sub, ModelFlags& f) {
  auto& t = f.train;
  sub->add_option("--window", t.model.window, "Sliding window length k");
  sub->add_option("--dprime", t.model.d_prime, "Reduced news dimension d'");
  sub->add_option("--hidden", t.model.hidden, "LSTM hidden size h");
  sub->add_option("--attn", t.model.attn, "Attention size h_a");
  sub->add_option("--head-hidden", t.model.head_hidden, "Dense layer width");
  sub->add_option("--dropout", t.model.dropout, "Dropout rate");
  sub->add_option("--lr", t.learning_rate, "Adam learning rate");
  sub->add_option("--batch", t.batch_size, "Mini-batch size");
  sub->add_option("--epochs", t.epochs, "Maximum epochs");
  sub->add_option("--patience", t.patience, "Early-stopping patience");
  sub->add_option("--l2", t.l2, "L2 penalty on dense-layer weights");
  sub->add_option("--val-fraction", t.validation_fraction, "Chronological validation tail");
  sub->add_option("--clip", t.clip_norm, "Global gradient-norm clip (<= 0 disables)");
  sub->add_option("--pos-weight", t.positive_weight, "BCE weight of the spike class");
}

std::vector<WindowedSample> load_samples(Run& run, const std::string& labels_path, const std::string& emb_path,
                                         std::size_t window) {
  const SpikeLabelSet labels = labels_from_csv(run.input(labels_path));
  const auto embeddings = embeddings_from_jsonl(run.input(emb_path));
  PriceSeries prices{"avg_price", labels.years, {}, SeriesKind::raw};
  for (double p : labels.avg_price) prices.values.emplace_back(p);
  const AlignedDataset data = align_dataset(prices, labels, embeddings);
  auto samples = make_windows(data, window);
  if (samples.empty()) throw InsufficientDataError("no contiguous windows of length " + std::to_string(window));
  return samples;
}

std::string table_to_csv(const PriceTable& t) {
  std::string out = "year";
  for (const auto& c : t.commodities) out += "," + text::csv_escape(c);
  out += "\n";
  for (std::size_t r = 0; r < t.years.size(); ++r) {
    out += std::to_string(t.years[r]);
    for (const auto& v : t.values[r]) out += "," + (v ? text::format_double(*v) : std::string());
    out += "\n";
  }
  return out;
}

std::pair<int, int> parse_years(const std::string& s) {
  const auto colon = s.find(':');
  const auto a = text::parse_int(s.substr(0, colon));
  const auto b = colon == std::string::npos ? a : text::parse_int(s.substr(colon + 1));
  if (!a || !b || *a > *b) throw ConfigError("--years must look like 1960:2023");
  return {static_cast<int>(*a), static_cast<int>(*b)};
}

struct BackendFlags {
  std::string backend = "mock";
  std::size_t dim = 64;
  double mock_accept = 0.8;
  std::string base_url = "https://api.openai.com";
  std::string chat_model = "gpt-4o-mini";
  std::string embedding_model = "text-embedding-3-small";
  std::string key_env = "NEWS_BACKEND_KEY";
};

void add_backend_flags(CLI::App* sub, BackendFlags& b) {
  sub->add_option("--backend", b.backend, "mock | openai")->check(CLI::IsMember({"mock", "openai"}));
  sub->add_option("--dim", b.dim, "Mock embedding dimension");
  sub->add_option("--mock-accept", b.mock_accept, "Mock fact-checker acceptance probability");
  sub->add_option("--base-url", b.base_url, "OpenAI-compatible endpoint");
  sub->add_option("--chat-model", b.chat_model, "Chat model name");
  sub->add_option("--embedding-model", b.embedding_model, "Embedding model name");
  sub->add_option("--key-env", b.key_env, "Environment variable holding the API key");
}

std::unique_ptr<TextBackend> make_backend(const BackendFlags& b, std::uint64_t seed) {
  if (b.backend == "mock") {
    MockOptions o;
    o.seed = seed;
    o.dim = b.dim;
    if (b.mock_accept >= 1.0) {
      o.verdicts = MockVerdicts::accept_all;
    } else {
      o.verdicts = MockVerdicts::random;
      o.accept_probability = b.mock_accept;
    }
    return std::make_unique<MockBackend>(o);
  }
  HttpBackendConfig c;
  c.base_url = b.base_url;
  c.chat_model = b.chat_model;
  c.embedding_model = b.embedding_model;
  c.key_env = b.key_env;
  return std::make_unique<HttpBackend>(c);
}

// Appends `--key=value` for every config-file entry that names an option of the
// chosen subcommand and is not already on the command line. Entries may be
// top-level or in a [<subcommand>] section.
std::vector<std::string> merge_config(CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  CLI::App* sub = nullptr;
  for (auto* s : app.get_subcommands({})) {
    if (s->get_name() == args.front()) sub = s;
  }
  if (!sub) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path);
  const auto items = CLI::ConfigTOML().from_config(in);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && item.parents.front() != sub->get_name()) continue;
    if (item.name == "config" || !sub->get_option_no_throw("--" + item.name)) continue;
    const std::string flag = "--" + item.name;
    bool given = false;
    for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (given) continue;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    args.push_back(flag + "=" + value);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Commodity price-spike forecasting pipeline"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kToolVersion);
  app.failure_message(CLI::FailureMessage::help);

  Common common;

  // ingest
  std::string ingest_in;
  auto* ingest = app.add_subcommand("ingest", "Normalize a raw price table");
  add_common(ingest, common);
  ingest->add_option("--in", ingest_in, "Raw prices CSV (year,<commodity>...)")->required();

  // label
  std::string label_in, label_commodity;
  double threshold = 25.0;
  auto* label = app.add_subcommand("label", "Compute spike labels");
  add_common(label, common);
  label->add_option("--in", label_in, "Raw prices CSV")->required();
  label->add_option("--threshold", threshold, "Spike threshold in percent");
  label->add_option("--commodity", label_commodity, "Single commodity column (default: cross-commodity average)");

  // distill
  std::string years = "1960:2023", distill_commodities, distill_prices, store_path, fallback = "skip", prompts_dir;
  int max_retries = 5;
  std::size_t in_flight = 1;
  BackendFlags distill_backend;
  auto* distill = app.add_subcommand("distill", "Generate and fact-check yearly news summaries");
  add_common(distill, common);
  add_backend_flags(distill, distill_backend);
  distill->add_option("--years", years, "Year range A:B");
  distill->add_option("--commodities", distill_commodities, "Comma-separated commodity names");
  distill->add_option("--prices", distill_prices, "Take commodity names from this price table header");
  distill->add_option("--store", store_path, "Existing summary store to resume (default: <out>/summaries.jsonl)");
  distill->add_option("--max-retries", max_retries, "Generate attempts per year");
  distill->add_option("--fallback", fallback, "skip | placeholder")->check(CLI::IsMember({"skip", "placeholder"}));
  distill->add_option("--in-flight", in_flight, "Years processed concurrently");
  distill->add_option("--prompts", prompts_dir, "Prompt template directory (default: built-in v1)");

  // embed
  std::string embed_summaries_path;
  bool include_placeholders = false;
  BackendFlags embed_backend;
  auto* embed = app.add_subcommand("embed", "Embed verified summaries");
  add_common(embed, common);
  add_backend_flags(embed, embed_backend);
  embed->add_option("--summaries", embed_summaries_path, "Summary store (JSON lines)")->required();
  embed->add_flag("--include-placeholders", include_placeholders, "Also embed unverified fallback records");

  // reduce
  std::string reduce_embeddings;
  std::size_t reduce_dprime = 16;
  int train_until = 0;
  auto* reduce = app.add_subcommand("reduce", "Fit PCA on embeddings and project them");
  add_common(reduce, common);
  reduce->add_option("--embeddings", reduce_embeddings, "Embedding store (JSON lines)")->required();
  reduce->add_option("--dprime", reduce_dprime, "Number of components");
  reduce->add_option("--train-until", train_until, "Fit on years <= this (0 = all)");

  // train
  std::string train_labels, train_embeddings;
  double holdout = 0.2;
  ModelFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train on the hold-out training part");
  add_common(train_cmd, common);
  add_model_flags(train_cmd, train_flags);
  train_cmd->add_option("--labels", train_labels, "labels.csv")->required();
  train_cmd->add_option("--embeddings", train_embeddings, "Embedding store")->required();
  train_cmd->add_option("--variant", train_flags.variant, "full | no_attention | no_pca | no_news");
  train_cmd->add_option("--holdout", holdout, "Hold-out test fraction");

  // eval
  std::string eval_checkpoint, eval_labels, eval_embeddings;
  double eval_threshold = 0.5;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on its hold-out test part");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint.json")->required();
  eval_cmd->add_option("--labels", eval_labels, "labels.csv")->required();
  eval_cmd->add_option("--embeddings", eval_embeddings, "Embedding store")->required();
  eval_cmd->add_option("--threshold", eval_threshold, "Decision threshold");

  // ablate
  std::string ablate_labels, ablate_embeddings, variants = "full,no_attention,no_pca,no_news,logreg";
  std::size_t folds = 5;
  double ablate_threshold = 0.5;
  bool parallel = false;
  ModelFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "Expanding-window CV over model variants");
  add_common(ablate, common);
  add_model_flags(ablate, ablate_flags);
  ablate->add_option("--labels", ablate_labels, "labels.csv")->required();
  ablate->add_option("--embeddings", ablate_embeddings, "Embedding store")->required();
  ablate->add_option("--variants", variants, "Comma-separated variants (full,no_attention,no_pca,no_news,logreg)");
  ablate->add_option("--folds", folds, "Number of CV folds");
  ablate->add_option("--threshold", ablate_threshold, "Decision threshold");
  ablate->add_flag("--parallel", parallel, "Run folds concurrently");

  // report
  std::string report_labels, report_summaries, report_cv;
  auto* report = app.add_subcommand("report", "Merge stores into plot-ready CSVs");
  add_common(report, common);
  report->add_option("--labels", report_labels, "labels.csv")->required();
  report->add_option("--summaries", report_summaries, "Summary store");
  report->add_option("--cv-summary", report_cv, "cv_summary.json from ablate");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*ingest) {
      Run run("ingest", common, ingest);
      const PriceTable table = parse_price_table(run.input(ingest_in));
      std::vector<NormStats> stats;
      const PriceTable norm = normalize_table(table, &stats);
      run.output("normalized.csv", table_to_csv(norm));
      const PriceSeries comp = composite_average(norm);
      std::string c = "year,composite\n";
      for (std::size_t i = 0; i < comp.years.size(); ++i)
        c += std::to_string(comp.years[i]) + "," + text::format_double(*comp.values[i]) + "\n";
      run.output("composite.csv", c);
      std::string s = "commodity,mean,stddev\n";
      for (std::size_t i = 0; i < stats.size(); ++i)
        s += text::csv_escape(table.commodities[i]) + "," + text::format_double(stats[i].mean) + "," +
             text::format_double(stats[i].stddev) + "\n";
      run.output("stats.csv", s);
      run.finish();
    } else if (*label) {
      Run run("label", common, label);
      const PriceTable table = parse_price_table(run.input(label_in));
      const PriceSeries series = label_commodity.empty() ? composite_average(table) : column_series(table, label_commodity);
      const SpikeLabelSet labels = label_spikes(series, threshold);
      run.output("labels.csv", labels_to_csv(labels));
      run.finish();
    } else if (*distill) {
      Run run("distill", common, distill);
      AgentConfig cfg;
      std::tie(cfg.first_year, cfg.last_year) = parse_years(years);
      cfg.max_retries = max_retries;
      cfg.in_flight_limit = in_flight;
      cfg.fallback = parse_fallback_policy(fallback);
      cfg.commodities = split_list(distill_commodities);
      if (!distill_prices.empty()) {
        const PriceTable t = parse_price_table(run.input(distill_prices));
        cfg.commodities.insert(cfg.commodities.end(), t.commodities.begin(), t.commodities.end());
      }
      if (!prompts_dir.empty()) cfg.prompts = load_prompts(prompts_dir);
      if (distill_backend.backend == "mock") cfg.clock = [] { return std::string(kFixedClock); };
      auto backend = make_backend(distill_backend, common.seed);
      const fs::path store_file = store_path.empty() ? run.dir() / "summaries.jsonl" : fs::path(store_path);
      if (!store_path.empty() && fs::exists(store_file)) run.input(store_path);
      SummaryStore store(store_file);
      const auto result = orchestrate(cfg, *backend, store);
      for (const auto& w : result.warnings) run.warn(w);
      std::string log = "year,attempts,outcome\n";
      for (const auto& l : result.log)
        log += std::to_string(l.year) + "," + std::to_string(l.attempts) + "," + to_string(l.outcome) + "\n";
      run.output("distill_log.csv", log);
      run.note_output(store_file.string());
      run.finish();
    } else if (*embed) {
      Run run("embed", common, embed);
      std::vector<NewsSummary> summaries;
      const auto lines = text::split_lines(run.input(embed_summaries_path));
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        auto s = summary_from_json_line(lines[i], i + 1);
        if (!s.verified && !include_placeholders) {
          run.warn("skipping unverified record for " + std::to_string(s.year));
          continue;
        }
        summaries.push_back(std::move(s));
      }
      auto backend = make_backend(embed_backend, common.seed);
      run.output("embeddings.jsonl", embeddings_to_jsonl(embed_summaries(summaries, *backend, include_placeholders)));
      run.finish();
    } else if (*reduce) {
      Run run("reduce", common, reduce);
      const auto embeddings = embeddings_from_jsonl(run.input(reduce_embeddings));
      std::vector<std::vector<double>> fit_rows;
      for (const auto& e : embeddings)
        if (train_until == 0 || e.year <= train_until) fit_rows.push_back(e.values);
      std::size_t dp = reduce_dprime;
      if (fit_rows.size() >= 2 && dp > fit_rows.size() - 1) {
        dp = fit_rows.size() - 1;
        run.warn("d' capped at " + std::to_string(dp) + " (fit rows - 1)");
      }
      const PcaBasis basis = fit_pca(std::span<const std::vector<double>>(fit_rows), dp);
      std::vector<EmbeddingVector> reduced;
      for (const auto& e : embeddings) reduced.push_back({e.year, transform(basis, e.values)});
      run.output("reduced.jsonl", embeddings_to_jsonl(reduced));
      double total = 0.0;
      const Matrix cov = covariance(fit_rows, basis.mean);
      for (std::size_t i = 0; i < cov.rows(); ++i) total += cov(i, i);
      std::string ev = "component,eigenvalue,ratio\n";
      for (std::size_t i = 0; i < basis.explained_variance.size(); ++i)
        ev += std::to_string(i + 1) + "," + text::format_double(basis.explained_variance[i]) + "," +
              text::format_double(basis.explained_variance[i] / total) + "\n";
      run.output("explained_variance.csv", ev);
      run.finish();
    } else if (*train_cmd) {
      Run run("train", common, train_cmd);
      TrainConfig tc = train_flags.train;
      tc.seed = tc.model.seed = common.seed;
      tc.model.variant = parse_variant(train_flags.variant);
      const auto samples = load_samples(run, train_labels, train_embeddings, tc.model.window);
      const HoldoutSplit split = holdout_split(samples, holdout);
      TrainResult tr = train(split.train, tc);
      for (const auto& w : tr.warnings) run.warn(w);
      tr.params.metadata = {{"holdout_fraction", text::format_double(holdout)},
                            {"train_samples", std::to_string(split.train.size())},
                            {"last_train_anchor", std::to_string(split.train.back().anchor_year)},
                            {"best_epoch", std::to_string(tr.best_epoch)},
                            {"tool_version", kToolVersion}};
      run.output("checkpoint.json", checkpoint_to_string(tr.params));
      run.output("history.csv", history_to_csv(tr.history));
      run.finish();
    } else if (*eval_cmd) {
      Run run("eval", common, eval_cmd);
      ModelParams p = checkpoint_from_string(run.input(eval_checkpoint));
      double fraction = 0.2;
      for (const auto& [k, v] : p.metadata)
        if (k == "holdout_fraction")
          if (auto f = text::parse_double(v)) fraction = *f;
      const auto samples = load_samples(run, eval_labels, eval_embeddings, p.hyper.window);
      const HoldoutSplit split = holdout_split(samples, fraction);
      const auto scores = predict(p, split.test);
      std::vector<int> labels;
      for (const auto& s : split.test) labels.push_back(s.target);
      const ClassificationMetrics m = classification_metrics(scores, labels, eval_threshold);
      ojson j;
      j["variant"] = to_string(p.hyper.variant);
      j["protocol"] = "holdout";
      j["holdout_fraction"] = fraction;
      j["test_samples"] = split.test.size();
      j["first_test_anchor"] = split.test.front().anchor_year;
      try {
        j["auc"] = roc_auc(scores, labels);
        run.output("roc.csv", roc_csv(roc_curve(scores, labels)));
      } catch (const UndefinedMetricError& e) {
        j["auc"] = nullptr;
        run.warn(e.what());
      }
      j["accuracy"] = m.accuracy;
      j["precision_w"] = m.precision_weighted;
      j["recall_w"] = m.recall_weighted;
      j["f1_w"] = m.f1_weighted;
      j["threshold"] = m.threshold;
      j["confusion"] = {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}, {"tn", m.confusion.tn}};
      run.output("eval_report.json", j.dump(2) + "\n");
      std::string pred = "anchor_year,target_year,score,label\n";
      for (std::size_t i = 0; i < scores.size(); ++i)
        pred += std::to_string(split.test[i].anchor_year) + "," + std::to_string(split.test[i].anchor_year + 1) + "," +
                text::format_double(scores[i]) + "," + std::to_string(labels[i]) + "\n";
      run.output("predictions.csv", pred);
      run.finish();
    } else if (*ablate) {
      Run run("ablate", common, ablate);
      CvConfig cv;
      cv.n_folds = folds;
      cv.threshold = ablate_threshold;
      cv.parallel = parallel;
      cv.train = ablate_flags.train;
      cv.train.seed = cv.train.model.seed = common.seed;
      const auto samples = load_samples(run, ablate_labels, ablate_embeddings, cv.train.model.window);
      std::vector<EvalReport> reports;
      for (const auto& v : split_list(variants)) {
        EvalReport r = v == "logreg" ? baseline_logreg(samples, cv) : run_cv(samples, parse_variant(v), cv);
        for (const auto& w : r.warnings) run.warn(v + ": " + w);
        for (const auto& problem : audit_leakage(r, samples, cv.train.model)) {
          throw ValidationError("leakage audit failed: " + problem);
        }
        reports.push_back(std::move(r));
      }
      if (reports.empty()) throw ConfigError("--variants is empty");
      run.output("cv_report.csv", cv_report_csv(reports));
      run.output("cv_summary.json", report_summary_json(reports).dump(2) + "\n");
      for (const auto& r : reports) {
        auto [scores, labels] = pooled_scores(r);
        try {
          run.output("roc_" + r.variant + ".csv", roc_csv(roc_curve(scores, labels)));
        } catch (const UndefinedMetricError& e) {
          run.warn(r.variant + ": " + e.what());
        }
      }
      run.finish();
    } else if (*report) {
      Run run("report", common, report);
      const SpikeLabelSet labels = labels_from_csv(run.input(report_labels));
      std::map<int, NewsSummary> summaries;
      if (!report_summaries.empty()) {
        const auto lines = text::split_lines(run.input(report_summaries));
        for (std::size_t i = 0; i < lines.size(); ++i) {
          if (text::trim(lines[i]).empty()) continue;
          auto s = summary_from_json_line(lines[i], i + 1);
          summaries[s.year] = std::move(s);
        }
      }
      std::string d = "year,avg_price,pct_change,spike,summary_status,summary_retries\n";
      for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = summaries.find(labels.years[i]);
        const std::string status = it == summaries.end() ? "missing" : it->second.verified ? "verified" : "placeholder";
        const std::string retries = it == summaries.end() ? "" : std::to_string(it->second.retries);
        d += std::to_string(labels.years[i]) + "," + text::format_double(labels.avg_price[i]) + "," +
             text::format_double(labels.pct_change[i]) + "," + std::to_string(labels.labels[i]) + "," + status + "," +
             retries + "\n";
      }
      run.output("dataset.csv", d);
      if (!report_cv.empty()) {
        ojson cvj;
        try {
          cvj = ojson::parse(run.input(report_cv));
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(1, std::string("cv summary: ") + e.what());
        }
        auto cell = [](const ojson& j) { return j.is_number() ? text::format_double(j.get<double>()) : std::string(); };
        std::string a = "variant,auc_mean,auc_std,auc_folds,auc_folds_excluded,accuracy_mean,precision_w_mean,recall_w_mean,f1_w_mean,f1_w_std\n";
        for (const auto& [variant, v] : cvj.items()) {
          a += variant + "," + cell(v["auc"]["mean"]) + "," + cell(v["auc"]["std"]) + "," +
               std::to_string(v["auc"]["folds"].get<int>()) + "," + std::to_string(v["auc"]["folds_excluded"].get<int>()) +
               "," + cell(v["accuracy"]["mean"]) + "," + cell(v["precision_w"]["mean"]) + "," +
               cell(v["recall_w"]["mean"]) + "," + cell(v["f1_w"]["mean"]) + "," + cell(v["f1_w"]["std"]) + "\n";
        }
        run.output("ablation_summary.csv", a);
      }
      run.finish();
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
