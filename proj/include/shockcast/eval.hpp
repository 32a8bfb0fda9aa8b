#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "shockcast/error.hpp"
#include "shockcast/model.hpp"
#include "shockcast/text_io.hpp"

namespace shockcast {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct Fold {
  IndexRange train;
  IndexRange test;
  friend bool operator==(const Fold&, const Fold&) = default;
};

struct FoldPlan {
  std::vector<Fold> folds;
  std::size_t n_folds = 0;
};

// Expanding-window split: test blocks of floor(n / (folds + 1)) follow a
// training prefix that grows by one block per fold.
inline FoldPlan time_series_split(std::size_t n, std::size_t n_folds) {
  if (n_folds < 1) throw ConfigError("n_folds must be >= 1");
  if (n < n_folds + 1) {
    throw ConfigError("time_series_split needs n >= n_folds + 1 (n = " + std::to_string(n) +
                      ", folds = " + std::to_string(n_folds) + ")");
  }
  const std::size_t test_size = n / (n_folds + 1);
  FoldPlan plan;
  plan.n_folds = n_folds;
  for (std::size_t j = 1; j <= n_folds; ++j) {
    const std::size_t train_end = n - (n_folds - j + 1) * test_size;
    plan.folds.push_back({{0, train_end}, {train_end, train_end + test_size}});
  }
  return plan;
}

struct HoldoutSplit {
  std::vector<WindowedSample> train;
  std::vector<WindowedSample> test;
};

// The chronologically last ceil(fraction * n) samples form the test set.
inline HoldoutSplit holdout_split(std::span<const WindowedSample> samples, double fraction = 0.2) {
  if (!(fraction > 0.0 && fraction <= 0.5)) throw ConfigError("hold-out fraction must be in (0, 0.5]");
  const std::size_t n = samples.size();
  if (n < 5) throw InsufficientDataError("hold-out split needs at least 5 samples, got " + std::to_string(n));
  std::vector<WindowedSample> sorted(samples.begin(), samples.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const WindowedSample& a, const WindowedSample& b) { return a.anchor_year < b.anchor_year; });
  // Subtract a small epsilon so that exact products (0.2 * 10) are not pushed up by rounding.
  const auto n_test = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  HoldoutSplit out;
  out.train.assign(sorted.begin(), sorted.end() - static_cast<std::ptrdiff_t>(n_test));
  out.test.assign(sorted.end() - static_cast<std::ptrdiff_t>(n_test), sorted.end());
  return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline void check_scored(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  for (int y : labels)
    if (y != 0 && y != 1) throw ContractError("labels must be 0 or 1");
}

// Mann-Whitney AUC: (concordant + 0.5 * tied) / (positives * negatives).
// Counts are accumulated as integers over score-sorted tie groups.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_scored(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t pos = 0, neg = 0, twice_numerator = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t gp = 0, gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? gp : gn) += 1;
      ++j;
    }
    twice_numerator += 2 * gp * neg_below + gp * gn;
    neg_below += gn;
    pos += gp;
    neg += gn;
    i = j;
  }
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC is undefined when only one class is present");
  return static_cast<double>(twice_numerator) / static_cast<double>(2 * pos * neg);
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// ROC vertices for descending thresholds; tied scores move diagonally.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_scored(scores, labels);
  std::size_t pos = 0;
  for (int y : labels) pos += static_cast<std::size_t>(y);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("ROC is undefined when only one class is present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  return pts;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  Confusion confusion;
  double threshold = 0.5;
};

inline ClassificationMetrics metrics_from_confusion(const Confusion& c, double threshold) {
  const double n = static_cast<double>(c.total());
  if (c.total() == 0) throw InsufficientDataError("classification metrics need at least one sample");
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  // Class 1 is the spike class; class 0 swaps the roles.
  const double p1 = ratio(c.tp, c.tp + c.fp), r1 = ratio(c.tp, c.tp + c.fn);
  const double p0 = ratio(c.tn, c.tn + c.fn), r0 = ratio(c.tn, c.tn + c.fp);
  auto f1 = [](double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); };
  const double w1 = static_cast<double>(c.tp + c.fn) / n;
  const double w0 = static_cast<double>(c.tn + c.fp) / n;
  ClassificationMetrics m;
  m.confusion = c;
  m.threshold = threshold;
  m.accuracy = static_cast<double>(c.tp + c.tn) / n;
  m.precision_weighted = w0 * p0 + w1 * p1;
  m.recall_weighted = w0 * r0 + w1 * r1;
  m.f1_weighted = w0 * f1(p0, r0) + w1 * f1(p1, r1);
  return m;
}

// Predictions are score > threshold. Per-class metrics with a zero
// denominator count as 0 before support weighting.
inline ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                                    double threshold = 0.5) {
  check_scored(scores, labels);
  if (scores.empty()) throw InsufficientDataError("classification metrics need at least one sample");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (labels[i] == 1) (pred ? c.tp : c.fn) += 1;
    else (pred ? c.fp : c.tn) += 1;
  }
  return metrics_from_confusion(c, threshold);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = std::nan("");
  double stddev = std::nan("");  // population
  std::size_t count = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  r.count = xs.size();
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

struct FoldRecord {
  std::size_t fold = 0;  // 1-based
  IndexRange train;
  IndexRange test;
  int max_train_anchor = 0;
  int min_test_anchor = 0;
  std::optional<double> auc;  // absent when the test block has one class
  ClassificationMetrics metrics;
  std::vector<int> preprocessing_years;  // rows PCA and price scaling were fitted on
  PcaBasis pca;
  std::vector<int> test_anchor_years;
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t best_epoch = 0;
};

struct EvalReport {
  std::string variant;
  std::vector<FoldRecord> folds;
  MeanStd auc, accuracy, precision_weighted, recall_weighted, f1_weighted;
  std::size_t auc_excluded = 0;
  Confusion confusion;  // summed over folds
  double threshold = 0.5;
  std::vector<std::string> warnings;
};

inline void summarize(EvalReport& r) {
  std::vector<double> auc, acc, p, rec, f1;
  r.confusion = {};
  r.auc_excluded = 0;
  for (const auto& f : r.folds) {
    if (f.auc) auc.push_back(*f.auc);
    else ++r.auc_excluded;
    acc.push_back(f.metrics.accuracy);
    p.push_back(f.metrics.precision_weighted);
    rec.push_back(f.metrics.recall_weighted);
    f1.push_back(f.metrics.f1_weighted);
    r.confusion += f.metrics.confusion;
  }
  r.auc = mean_std(auc);
  r.accuracy = mean_std(acc);
  r.precision_weighted = mean_std(p);
  r.recall_weighted = mean_std(rec);
  r.f1_weighted = mean_std(f1);
}

inline FoldRecord score_fold(std::size_t fold_no, const Fold& fold, std::span<const WindowedSample> samples,
                             std::vector<double> scores, double threshold, std::vector<std::string>& warnings) {
  FoldRecord rec;
  rec.fold = fold_no;
  rec.train = fold.train;
  rec.test = fold.test;
  rec.max_train_anchor = samples[fold.train.end - 1].anchor_year;
  rec.min_test_anchor = samples[fold.test.begin].anchor_year;
  for (std::size_t i = fold.train.begin; i < fold.train.end; ++i)
    rec.max_train_anchor = std::max(rec.max_train_anchor, samples[i].anchor_year);
  for (std::size_t i = fold.test.begin; i < fold.test.end; ++i) {
    rec.min_test_anchor = std::min(rec.min_test_anchor, samples[i].anchor_year);
    rec.test_anchor_years.push_back(samples[i].anchor_year);
    rec.labels.push_back(samples[i].target);
  }
  if (!(rec.max_train_anchor < rec.min_test_anchor)) {
    throw ValidationError("fold " + std::to_string(fold_no) + " leaks: train anchors reach " +
                          std::to_string(rec.max_train_anchor) + ", test starts at " +
                          std::to_string(rec.min_test_anchor));
  }
  rec.scores = std::move(scores);
  try {
    rec.auc = roc_auc(rec.scores, rec.labels);
  } catch (const UndefinedMetricError&) {
    warnings.push_back("fold " + std::to_string(fold_no) + ": test block has a single class; AUC excluded");
  }
  rec.metrics = classification_metrics(rec.scores, rec.labels, threshold);
  return rec;
}

struct CvConfig {
  std::size_t n_folds = 5;
  double threshold = 0.5;
  bool parallel = false;
  TrainConfig train;
};

inline void check_chronological(std::span<const WindowedSample> samples) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].anchor_year <= samples[i - 1].anchor_year) {
      throw ValidationError("samples must be sorted by strictly increasing anchor year");
    }
  }
}

// Expanding-window cross-validation of one model variant. Every fold fits its
// own PCA basis and price scaling on its training rows only.
inline EvalReport run_cv(std::span<const WindowedSample> samples, Variant variant, const CvConfig& cfg) {
  check_chronological(samples);
  const FoldPlan plan = time_series_split(samples.size(), cfg.n_folds);
  EvalReport report;
  report.variant = to_string(variant);
  report.threshold = cfg.threshold;

  auto run_fold = [&](std::size_t j) {
    const Fold& fold = plan.folds[j];
    TrainConfig tc = cfg.train;
    tc.model.variant = variant;
    TrainResult tr = train(samples.subspan(fold.train.begin, fold.train.size()), tc);
    const auto scores = predict(tr.params, samples.subspan(fold.test.begin, fold.test.size()));
    std::vector<std::string> warnings;
    for (auto& w : tr.warnings) warnings.push_back("fold " + std::to_string(j + 1) + ": " + w);
    FoldRecord rec = score_fold(j + 1, fold, samples, scores, cfg.threshold, warnings);
    rec.preprocessing_years = std::move(tr.preprocessing_years);
    rec.pca = std::move(tr.params.pca);
    rec.best_epoch = tr.best_epoch;
    return std::make_pair(std::move(rec), std::move(warnings));
  };

  std::vector<std::pair<FoldRecord, std::vector<std::string>>> results;
  if (cfg.parallel) {
    std::vector<std::future<std::pair<FoldRecord, std::vector<std::string>>>> futures;
    for (std::size_t j = 0; j < plan.folds.size(); ++j) futures.push_back(std::async(std::launch::async, run_fold, j));
    for (auto& f : futures) results.push_back(f.get());
  } else {
    for (std::size_t j = 0; j < plan.folds.size(); ++j) results.push_back(run_fold(j));
  }
  for (auto& [rec, warnings] : results) {
    report.folds.push_back(std::move(rec));
    report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
  }
  summarize(report);
  return report;
}

// Trains on the hold-out training part and scores the untouched test part.
struct HoldoutResult {
  TrainResult training;
  EvalReport report;
};

inline HoldoutResult run_holdout(std::span<const WindowedSample> samples, Variant variant, const TrainConfig& cfg,
                                 double fraction = 0.2, double threshold = 0.5) {
  const HoldoutSplit split = holdout_split(samples, fraction);
  TrainConfig tc = cfg;
  tc.model.variant = variant;
  HoldoutResult out;
  out.training = train(split.train, tc);
  std::vector<WindowedSample> all(split.train);
  all.insert(all.end(), split.test.begin(), split.test.end());
  const Fold fold{{0, split.train.size()}, {split.train.size(), all.size()}};
  out.report.variant = to_string(variant);
  out.report.threshold = threshold;
  FoldRecord rec = score_fold(1, fold, all, predict(out.training.params, split.test), threshold, out.report.warnings);
  rec.preprocessing_years = out.training.preprocessing_years;
  rec.pca = out.training.params.pca;
  rec.best_epoch = out.training.best_epoch;
  out.report.folds.push_back(std::move(rec));
  summarize(out.report);
  return out;
}

// ---------------------------------------------------------------------------
// Logistic-regression baseline
// ---------------------------------------------------------------------------

struct LogisticModel {
  Vector weights;
  double bias = 0.0;
};

struct LogisticConfig {
  double learning_rate = 0.1;
  std::size_t iterations = 1000;
  double l2 = 1e-3;
};

struct LogisticLoss {
  double loss = 0.0;
  Vector grad_weights;
  double grad_bias = 0.0;
};

// Mean log-loss plus (l2 / 2) * |w|^2, with its gradient.
inline LogisticLoss logistic_loss(const LogisticModel& m, const std::vector<Vector>& x, std::span<const int> y, double l2) {
  if (x.size() != y.size() || x.empty()) throw ContractError("logistic_loss: feature/label mismatch");
  LogisticLoss r;
  r.grad_weights.assign(m.weights.size(), 0.0);
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = dot(m.weights, x[i]) + m.bias;
    // log(1 + e^z) - y z, computed stably
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    r.loss += (softplus - y[i] * z) / n;
    const double g = (sigmoid(z) - y[i]) / n;
    for (std::size_t j = 0; j < x[i].size(); ++j) r.grad_weights[j] += g * x[i][j];
    r.grad_bias += g;
  }
  for (std::size_t j = 0; j < m.weights.size(); ++j) {
    r.loss += 0.5 * l2 * m.weights[j] * m.weights[j];
    r.grad_weights[j] += l2 * m.weights[j];
  }
  return r;
}

inline LogisticModel fit_logistic(const std::vector<Vector>& x, std::span<const int> y, const LogisticConfig& cfg) {
  if (x.empty()) throw InsufficientDataError("logistic regression needs samples");
  LogisticModel m{Vector(x.front().size(), 0.0), 0.0};
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto g = logistic_loss(m, x, y, cfg.l2);
    for (std::size_t j = 0; j < m.weights.size(); ++j) m.weights[j] -= cfg.learning_rate * g.grad_weights[j];
    m.bias -= cfg.learning_rate * g.grad_bias;
  }
  return m;
}

inline double logistic_predict(const LogisticModel& m, std::span<const double> x) {
  return sigmoid(dot(m.weights, x) + m.bias);
}

// [normalized price window ; window mean of the reduced embeddings]
inline Vector logistic_features(const ModelParams& prep, const WindowedSample& s) {
  Vector f;
  for (std::size_t r = 0; r < s.window(); ++r) f.push_back((s.prices(r, 0) - prep.price_norm.mean) / prep.price_norm.stddev);
  Vector mean(prep.pca.output_dim(), 0.0);
  for (std::size_t r = 0; r < s.window(); ++r) {
    const Vector red = transform(prep.pca, s.news.row(r));
    for (std::size_t j = 0; j < red.size(); ++j) mean[j] += red[j] / static_cast<double>(s.window());
  }
  f.insert(f.end(), mean.begin(), mean.end());
  return f;
}

// Same fold plan and metrics as run_cv; PCA and price scaling are fitted per
// fold exactly as for the neural model.
inline EvalReport baseline_logreg(std::span<const WindowedSample> samples, const CvConfig& cfg,
                                  const LogisticConfig& lr = {}) {
  check_chronological(samples);
  const FoldPlan plan = time_series_split(samples.size(), cfg.n_folds);
  EvalReport report;
  report.variant = "logreg";
  report.threshold = cfg.threshold;
  for (std::size_t j = 0; j < plan.folds.size(); ++j) {
    const Fold& fold = plan.folds[j];
    const auto train_part = samples.subspan(fold.train.begin, fold.train.size());
    ModelHyper hyper = cfg.train.model;
    hyper.variant = Variant::full;
    std::vector<std::string> prep_warnings;
    std::vector<int> years;
    const ModelParams prep = prepare_model(train_part, hyper, &prep_warnings, &years);
    for (auto& w : prep_warnings) report.warnings.push_back("fold " + std::to_string(j + 1) + ": " + w);

    std::vector<Vector> x;
    std::vector<int> y;
    for (const auto& s : train_part) {
      x.push_back(logistic_features(prep, s));
      y.push_back(s.target);
    }
    const LogisticModel model = fit_logistic(x, y, lr);
    std::vector<double> scores;
    for (std::size_t i = fold.test.begin; i < fold.test.end; ++i) {
      scores.push_back(logistic_predict(model, logistic_features(prep, samples[i])));
    }
    FoldRecord rec = score_fold(j + 1, fold, samples, std::move(scores), cfg.threshold, report.warnings);
    rec.preprocessing_years = std::move(years);
    rec.pca = prep.pca;
    report.folds.push_back(std::move(rec));
  }
  summarize(report);
  return report;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

// `variant,fold,auc,accuracy,precision_w,recall_w,f1_w`; undefined AUC is an empty cell.
inline std::string cv_report_csv(std::span<const EvalReport> reports) {
  std::string out = "variant,fold,auc,accuracy,precision_w,recall_w,f1_w\n";
  for (const auto& r : reports) {
    for (const auto& f : r.folds) {
      out += r.variant + "," + std::to_string(f.fold) + "," + (f.auc ? text::format_double(*f.auc) : "") + "," +
             text::format_double(f.metrics.accuracy) + "," + text::format_double(f.metrics.precision_weighted) + "," +
             text::format_double(f.metrics.recall_weighted) + "," + text::format_double(f.metrics.f1_weighted) + "\n";
    }
  }
  return out;
}

inline nlohmann::ordered_json report_summary_json(std::span<const EvalReport> reports) {
  using nlohmann::ordered_json;
  auto ms = [](const MeanStd& m) {
    ordered_json j;
    j["mean"] = std::isnan(m.mean) ? ordered_json(nullptr) : ordered_json(m.mean);
    j["std"] = std::isnan(m.stddev) ? ordered_json(nullptr) : ordered_json(m.stddev);
    j["folds"] = m.count;
    return j;
  };
  ordered_json out = ordered_json::object();
  for (const auto& r : reports) {
    ordered_json v;
    v["auc"] = ms(r.auc);
    v["auc"]["folds_excluded"] = r.auc_excluded;
    v["accuracy"] = ms(r.accuracy);
    v["precision_w"] = ms(r.precision_weighted);
    v["recall_w"] = ms(r.recall_weighted);
    v["f1_w"] = ms(r.f1_weighted);
    v["threshold"] = r.threshold;
    v["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}};
    ordered_json folds = ordered_json::array();
    for (const auto& f : r.folds) {
      folds.push_back({{"fold", f.fold},
                       {"train", {f.train.begin, f.train.end}},
                       {"test", {f.test.begin, f.test.end}},
                       {"max_train_anchor", f.max_train_anchor},
                       {"min_test_anchor", f.min_test_anchor},
                       {"auc", f.auc ? ordered_json(*f.auc) : ordered_json(nullptr)},
                       {"best_epoch", f.best_epoch}});
    }
    v["per_fold"] = std::move(folds);
    out[r.variant] = std::move(v);
  }
  return out;
}

// `fpr,tpr`
inline std::string roc_csv(const std::vector<RocPoint>& pts) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : pts) out += text::format_double(p.fpr) + "," + text::format_double(p.tpr) + "\n";
  return out;
}

// Out-of-fold scores of every fold, concatenated.
inline std::pair<std::vector<double>, std::vector<int>> pooled_scores(const EvalReport& r) {
  std::pair<std::vector<double>, std::vector<int>> out;
  for (const auto& f : r.folds) {
    out.first.insert(out.first.end(), f.scores.begin(), f.scores.end());
    out.second.insert(out.second.end(), f.labels.begin(), f.labels.end());
  }
  return out;
}

// Re-derives each fold's preprocessing from its training samples alone and
// checks anchor ordering. Returns human-readable violations (empty = clean).
inline std::vector<std::string> audit_leakage(const EvalReport& report, std::span<const WindowedSample> samples,
                                              const ModelHyper& hyper) {
  std::vector<std::string> problems;
  for (const auto& f : report.folds) {
    const std::string tag = report.variant + " fold " + std::to_string(f.fold) + ": ";
    int max_train = samples[f.train.begin].anchor_year;
    int min_test = samples[f.test.begin].anchor_year;
    for (std::size_t i = f.train.begin; i < f.train.end; ++i) max_train = std::max(max_train, samples[i].anchor_year);
    for (std::size_t i = f.test.begin; i < f.test.end; ++i) min_test = std::min(min_test, samples[i].anchor_year);
    if (!(max_train < min_test)) problems.push_back(tag + "train anchors overlap test anchors");
    if (max_train != f.max_train_anchor || min_test != f.min_test_anchor) problems.push_back(tag + "recorded anchors differ");
    for (int y : f.preprocessing_years)
      if (y > max_train) problems.push_back(tag + "preprocessing used year " + std::to_string(y) + " after training range");

    ModelHyper h = hyper;
    h.variant = report.variant == "logreg" ? Variant::full : parse_variant(report.variant);
    if (!uses_pca(h.variant)) continue;
    const ModelParams recomputed = prepare_model(samples.subspan(f.train.begin, f.train.size()), h);
    if (!(recomputed.pca == f.pca)) problems.push_back(tag + "stored PCA basis differs from a train-only refit");
  }
  return problems;
}

}  // namespace shockcast
