#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shockcast/data_ingest.hpp"
#include "shockcast/error.hpp"
#include "shockcast/linalg.hpp"
#include "shockcast/nn_core.hpp"
#include "shockcast/reduce.hpp"

namespace shockcast {

enum class Variant { full, no_attention, no_pca, no_news };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_attention: return "no_attention";
    case Variant::no_pca: return "no_pca";
    case Variant::no_news: return "no_news";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "full") return Variant::full;
  if (s == "no_attention") return Variant::no_attention;
  if (s == "no_pca") return Variant::no_pca;
  if (s == "no_news") return Variant::no_news;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

inline bool uses_news(Variant v) { return v != Variant::no_news; }
inline bool uses_pca(Variant v) { return v == Variant::full || v == Variant::no_attention; }
inline bool uses_attention(Variant v) { return v == Variant::full || v == Variant::no_pca; }

struct ModelHyper {
  std::size_t window = 5;       // k
  std::size_t d_prime = 16;     // reduced news dimension
  std::size_t hidden = 32;      // h, both LSTMs
  std::size_t attn = 32;        // h_a
  std::size_t head_hidden = 32; // units in the dense layer
  double dropout = 0.3;
  std::uint64_t seed = 42;
  Variant variant = Variant::full;

  friend bool operator==(const ModelHyper&, const ModelHyper&) = default;
};

// One training example: the k-step price and news windows ending at
// anchor_year, and the spike label of the following year.
struct WindowedSample {
  Matrix prices;  // k x 1
  Matrix news;    // k x d (raw embeddings; the model applies its PCA basis)
  int target = 0;
  int anchor_year = 0;

  std::size_t window() const noexcept { return prices.rows(); }
  std::size_t embedding_dim() const noexcept { return news.cols(); }
  int first_year() const noexcept { return anchor_year - static_cast<int>(window()) + 1; }
};

// Slides a k-row window over the aligned rows. The sample anchored at row t
// covers rows t-k+1..t and predicts the label of row t+1. Windows that would
// span a gap in the calendar are not emitted.
inline std::vector<WindowedSample> make_windows(const AlignedDataset& data, std::size_t k) {
  if (k == 0) throw ConfigError("window size must be positive");
  const std::size_t n = data.size();
  if (n <= k) {
    throw InsufficientDataError("need more than k = " + std::to_string(k) + " aligned years, got " +
                                std::to_string(n));
  }
  const std::size_t d = data.embedding_dim();
  std::vector<WindowedSample> out;
  out.reserve(n - k);
  for (std::size_t t = k - 1; t + 1 < n; ++t) {
    const std::size_t first = t + 1 - k;
    if (data.years[t + 1] - data.years[first] != static_cast<int>(k)) continue;
    WindowedSample s{Matrix(k, 1), Matrix(k, d), data.labels[t + 1], data.years[t]};
    for (std::size_t r = 0; r < k; ++r) {
      s.prices(r, 0) = data.prices[first + r];
      std::copy(data.embeddings[first + r].begin(), data.embeddings[first + r].end(), s.news.row(r).begin());
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct Network {
  LstmParams price_lstm;
  LstmParams news_lstm;
  AttentionParams attention;
  HeadParams head;

  friend bool operator==(const Network&, const Network&) = default;
};

// Visits every trainable tensor in a fixed order. The bool marks dense-layer
// weights, which receive L2 regularization.
template <typename Net, typename F>
void for_each_tensor(Net& net, F&& f) {
  f("price_lstm.w_input", net.price_lstm.w_input, false);
  f("price_lstm.w_hidden", net.price_lstm.w_hidden, false);
  f("price_lstm.bias", net.price_lstm.bias, false);
  f("news_lstm.w_input", net.news_lstm.w_input, false);
  f("news_lstm.w_hidden", net.news_lstm.w_hidden, false);
  f("news_lstm.bias", net.news_lstm.bias, false);
  f("attention.w_query", net.attention.w_query, false);
  f("attention.w_key", net.attention.w_key, false);
  f("attention.w_value", net.attention.w_value, false);
  f("head.w1", net.head.w1, true);
  f("head.b1", net.head.b1, false);
  f("head.w2", net.head.w2, true);
  f("head.b2", net.head.b2, false);
}

struct ModelParams {
  ModelHyper hyper;
  std::size_t embedding_dim = 0;  // d of the raw news embeddings
  PcaBasis pca;                   // empty unless the variant uses PCA
  NormStats price_norm;           // applied to the price window
  Network net;
  std::vector<std::pair<std::string, std::string>> metadata;

  std::size_t news_input_dim() const {
    return uses_pca(hyper.variant) ? pca.output_dim() : embedding_dim;
  }
  std::size_t fused_dim() const {
    if (!uses_news(hyper.variant)) return hyper.hidden;
    return hyper.hidden + (uses_attention(hyper.variant) ? hyper.attn : hyper.hidden);
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Network tensors shaped for `params` (hyper, embedding_dim, pca already set).
inline Network zero_network(const ModelParams& params) {
  const auto& hp = params.hyper;
  Network net;
  net.price_lstm = LstmParams::zeros(1, hp.hidden);
  if (uses_news(hp.variant)) {
    net.news_lstm = LstmParams::zeros(params.news_input_dim(), hp.hidden);
    if (uses_attention(hp.variant)) net.attention = AttentionParams::zeros(hp.hidden, hp.attn);
  }
  net.head = HeadParams::zeros(params.fused_dim(), hp.head_hidden, hp.dropout);
  return net;
}

inline Network init_network(const ModelParams& params, Rng& rng) {
  const auto& hp = params.hyper;
  Network net = zero_network(params);
  net.price_lstm = LstmParams::init(1, hp.hidden, rng);
  if (uses_news(hp.variant)) {
    net.news_lstm = LstmParams::init(params.news_input_dim(), hp.hidden, rng);
    if (uses_attention(hp.variant)) net.attention = AttentionParams::init(hp.hidden, hp.attn, rng);
  }
  net.head = HeadParams::init(params.fused_dim(), hp.head_hidden, hp.dropout, rng);
  return net;
}

inline std::vector<ParamSlot> param_slots(Network& values, const Network& grads) {
  std::vector<ParamSlot> slots;
  std::vector<std::pair<const Matrix*, bool>> g;
  for_each_tensor(grads, [&](const char*, const Matrix& m, bool) { g.emplace_back(&m, false); });
  std::size_t i = 0;
  for_each_tensor(values, [&](const char*, Matrix& m, bool l2) {
    slots.push_back({std::span<double>(m.data()), std::span<const double>(g[i].first->data()), l2});
    ++i;
  });
  return slots;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct ForwardCache {
  LstmCache price;
  LstmCache news;
  AttentionCache attention;
  HeadCache head;
  double prob = 0.5;
};

namespace detail {

inline void check_stage(std::span<const double> xs, const char* stage) {
  if (!all_finite(xs)) throw NumericError(std::string("non-finite values after stage '") + stage + "'");
}

inline Matrix prepare_prices(const ModelParams& p, const WindowedSample& s) {
  Matrix x(s.window(), 1);
  for (std::size_t r = 0; r < s.window(); ++r) x(r, 0) = (s.prices(r, 0) - p.price_norm.mean) / p.price_norm.stddev;
  return x;
}

inline Matrix prepare_news(const ModelParams& p, const WindowedSample& s) {
  if (!uses_pca(p.hyper.variant)) return s.news;
  Matrix x(s.window(), p.pca.output_dim());
  for (std::size_t r = 0; r < s.window(); ++r) {
    const Vector red = transform(p.pca, s.news.row(r));
    std::copy(red.begin(), red.end(), x.row(r).begin());
  }
  return x;
}

}  // namespace detail

inline void check_sample_shape(const ModelParams& p, const WindowedSample& s) {
  if (s.window() != p.hyper.window || s.prices.cols() != 1) {
    throw ContractError("sample window " + std::to_string(s.window()) + " does not match model window " +
                        std::to_string(p.hyper.window));
  }
  if (uses_news(p.hyper.variant) && s.embedding_dim() != p.embedding_dim) {
    throw ContractError("sample embedding dim " + std::to_string(s.embedding_dim()) +
                        " does not match model embedding dim " + std::to_string(p.embedding_dim));
  }
}

inline ForwardCache forward_cached(const ModelParams& p, const WindowedSample& s, Mode mode, Rng* rng) {
  check_sample_shape(p, s);
  ForwardCache c;
  const Matrix price_in = detail::prepare_prices(p, s);
  detail::check_stage(price_in.data(), "price normalization");
  auto price = lstm_forward(price_in, p.net.price_lstm);
  detail::check_stage(price.final, "price LSTM");
  Vector fused = price.final;
  c.price = std::move(price.cache);

  if (uses_news(p.hyper.variant)) {
    const Matrix news_in = detail::prepare_news(p, s);
    detail::check_stage(news_in.data(), "news reduction");
    auto news = lstm_forward(news_in, p.net.news_lstm);
    detail::check_stage(news.hidden.data(), "news LSTM");
    if (uses_attention(p.hyper.variant)) {
      auto att = attention_forward(news.hidden, p.net.attention);
      detail::check_stage(att.context, "attention");
      fused.insert(fused.end(), att.context.begin(), att.context.end());
      c.attention = std::move(att.cache);
    } else {
      const std::size_t k = news.hidden.rows();
      for (std::size_t j = 0; j < news.hidden.cols(); ++j) {
        double m = 0.0;
        for (std::size_t t = 0; t < k; ++t) m += news.hidden(t, j);
        fused.push_back(m / static_cast<double>(k));
      }
    }
    c.news = std::move(news.cache);
  }

  auto head = head_forward(fused, p.net.head, mode, rng);
  c.prob = head.prob;
  c.head = std::move(head.cache);
  return c;
}

// Probability of a spike in the year after the window (inference mode).
inline double forward(const WindowedSample& s, const ModelParams& p) {
  return forward_cached(p, s, Mode::infer, nullptr).prob;
}

// Accumulates dL/dTheta into `grads` given dL/dlogit of the head.
inline void backward(const ModelParams& p, const ForwardCache& c, double d_logit, Network& grads) {
  Vector d_fused;
  head_backward(p.net.head, c.head, d_logit, grads.head, d_fused);
  const std::size_t h = p.hyper.hidden;
  const std::size_t k = c.price.hidden.rows();

  Matrix d_price(k, h);
  for (std::size_t j = 0; j < h; ++j) d_price(k - 1, j) = d_fused[j];
  lstm_backward(p.net.price_lstm, c.price, d_price, grads.price_lstm);

  if (!uses_news(p.hyper.variant)) return;
  const std::span<const double> d_news(d_fused.data() + h, d_fused.size() - h);
  Matrix d_states;
  if (uses_attention(p.hyper.variant)) {
    attention_backward(p.net.attention, c.attention, d_news, grads.attention, d_states);
  } else {
    const std::size_t kn = c.news.hidden.rows();
    d_states = Matrix(kn, h);
    for (std::size_t t = 0; t < kn; ++t)
      for (std::size_t j = 0; j < h; ++j) d_states(t, j) = d_news[j] / static_cast<double>(kn);
  }
  lstm_backward(p.net.news_lstm, c.news, d_states, grads.news_lstm);
}

inline std::vector<double> predict(const ModelParams& p, std::span<const WindowedSample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(forward(s, p));
  return out;
}

// Mean BCE of the inference-mode predictions.
inline double evaluate_loss(const ModelParams& p, std::span<const WindowedSample> samples, double positive_weight = 1.0) {
  std::vector<double> preds = predict(p, samples);
  std::vector<int> targets;
  targets.reserve(samples.size());
  for (const auto& s : samples) targets.push_back(s.target);
  return bce_loss(preds, targets, positive_weight).loss;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  double l2 = 1e-4;
  std::uint64_t seed = 42;
  double validation_fraction = 0.15;
  double clip_norm = 5.0;        // global gradient norm; <= 0 disables
  double positive_weight = 1.0;  // BCE weight on spike samples
  ModelHyper model;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 0.5)) {
      throw ConfigError("validation_fraction must be in (0, 0.5)");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
    if (model.hidden == 0 || model.attn == 0 || model.head_hidden == 0) throw ConfigError("layer sizes must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;  // running minimum up to this epoch
};

struct TrainResult {
  ModelParams params;  // weights of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
  std::vector<int> preprocessing_years;  // rows used to fit PCA and price normalization
  std::vector<std::string> warnings;
};

// Distinct (year -> embedding, price) rows covered by the sample windows.
struct WindowRows {
  std::vector<int> years;
  std::vector<std::vector<double>> embeddings;
  std::vector<double> prices;
};

inline WindowRows collect_window_rows(std::span<const WindowedSample> samples) {
  std::map<int, std::pair<std::vector<double>, double>> rows;
  for (const auto& s : samples) {
    for (std::size_t r = 0; r < s.window(); ++r) {
      const int year = s.first_year() + static_cast<int>(r);
      auto row = s.news.row(r);
      rows.try_emplace(year, std::vector<double>(row.begin(), row.end()), s.prices(r, 0));
    }
  }
  WindowRows out;
  for (auto& [year, v] : rows) {
    out.years.push_back(year);
    out.embeddings.push_back(std::move(v.first));
    out.prices.push_back(v.second);
  }
  return out;
}

// Fits the non-trainable stages (price normalization, PCA) on the rows the
// samples cover. The effective d' is capped at rows-1 with a warning.
inline ModelParams prepare_model(std::span<const WindowedSample> samples, const ModelHyper& hyper,
                                 std::vector<std::string>* warnings = nullptr, std::vector<int>* years_out = nullptr) {
  if (samples.empty()) throw InsufficientDataError("no samples");
  ModelParams p;
  p.hyper = hyper;
  p.hyper.window = samples.front().window();
  p.embedding_dim = samples.front().embedding_dim();
  for (const auto& s : samples) {
    if (s.window() != p.hyper.window || s.embedding_dim() != p.embedding_dim) {
      throw ContractError("samples have inconsistent window or embedding shape");
    }
  }
  const WindowRows rows = collect_window_rows(samples);
  if (years_out) *years_out = rows.years;

  std::vector<MaybePrice> prices(rows.prices.begin(), rows.prices.end());
  try {
    p.price_norm = fit_norm_stats(prices);
  } catch (const ValidationError& e) {
    double mean = 0.0;
    for (double x : rows.prices) mean += x;
    p.price_norm = {mean / static_cast<double>(rows.prices.size()), 1.0};
    if (warnings) warnings->push_back(std::string("price normalization fallback to unit scale: ") + e.what());
  }

  if (uses_pca(hyper.variant)) {
    std::size_t dp = std::min(hyper.d_prime, p.embedding_dim);
    if (rows.embeddings.size() < 2) throw InsufficientDataError("PCA needs at least 2 distinct years");
    if (dp > rows.embeddings.size() - 1) {
      dp = rows.embeddings.size() - 1;
      if (warnings) {
        warnings->push_back("d' reduced from " + std::to_string(hyper.d_prime) + " to " + std::to_string(dp) +
                            " (only " + std::to_string(rows.embeddings.size()) + " training rows)");
      }
    }
    p.pca = fit_pca(std::span<const std::vector<double>>(rows.embeddings), dp);
  }
  return p;
}

inline double global_norm(const Network& g) {
  double s = 0.0;
  for_each_tensor(g, [&](const char*, const Matrix& m, bool) {
    for (double x : m.data()) s += x * x;
  });
  return std::sqrt(s);
}

inline void scale_network(Network& g, double factor) {
  for_each_tensor(g, [&](const char*, Matrix& m, bool) {
    for (double& x : m.data()) x *= factor;
  });
}

// Mini-batch Adam on BCE with a chronological validation tail and early
// stopping. Returns the weights of the best validation epoch.
inline TrainResult train(std::span<const WindowedSample> input, const TrainConfig& cfg) {
  cfg.validate();
  if (input.size() < 2) throw InsufficientDataError("training needs at least 2 samples");
  std::vector<WindowedSample> samples(input.begin(), input.end());
  std::stable_sort(samples.begin(), samples.end(),
                   [](const WindowedSample& a, const WindowedSample& b) { return a.anchor_year < b.anchor_year; });

  const std::size_t n = samples.size();
  std::size_t n_val = static_cast<std::size_t>(std::ceil(cfg.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  const std::size_t n_train = n - n_val;
  const std::span<const WindowedSample> train_part(samples.data(), n_train);
  const std::span<const WindowedSample> val_part(samples.data() + n_train, n_val);

  TrainResult result;
  result.train_count = n_train;
  result.validation_count = n_val;
  ModelParams params = prepare_model(samples, cfg.model, &result.warnings, &result.preprocessing_years);
  params.hyper.seed = cfg.seed;

  {
    std::size_t positives = 0;
    for (const auto& s : train_part) positives += static_cast<std::size_t>(s.target);
    if (positives == 0 || positives == n_train) {
      result.warnings.push_back("training partition contains a single class (" +
                                std::string(positives == 0 ? "no spikes" : "all spikes") + ")");
    }
  }

  Rng rng(cfg.seed);
  params.net = init_network(params, rng);
  AdamState adam;
  adam.config = {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.l2};

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t end = std::min(n_train, start + cfg.batch_size);
      std::vector<ForwardCache> caches;
      std::vector<double> preds;
      std::vector<int> targets;
      for (std::size_t b = start; b < end; ++b) {
        const auto& s = train_part[order[b]];
        caches.push_back(forward_cached(params, s, Mode::train, &rng));
        preds.push_back(caches.back().prob);
        targets.push_back(s.target);
      }
      const BceResult bce = bce_loss(preds, targets, cfg.positive_weight);
      loss_sum += bce.loss * static_cast<double>(end - start);

      Network grads = zero_network(params);
      for (std::size_t b = 0; b < caches.size(); ++b) {
        const double p = caches[b].prob;
        backward(params, caches[b], bce.d_pred[b] * p * (1.0 - p), grads);
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = global_norm(grads);
        if (norm > cfg.clip_norm) scale_network(grads, cfg.clip_norm / norm);
      }
      const auto slots = param_slots(params.net, grads);
      adam_step(slots, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_train);
    rec.val_loss = evaluate_loss(params, val_part, cfg.positive_weight);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    rec.best_val_loss = best_val;
    result.history.push_back(rec);
    if (since_best >= cfg.patience) {
      result.stopped_early = epoch < cfg.epochs;
      break;
    }
  }

  result.params = std::move(best);
  result.best_val_loss = best_val;
  return result;
}

// `epoch,train_loss,val_loss`
inline std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + text::format_double(r.train_loss) + "," +
           text::format_double(r.val_loss) + "\n";
  }
  return out;
}

}  // namespace shockcast
