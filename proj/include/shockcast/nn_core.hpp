#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shockcast/error.hpp"
#include "shockcast/linalg.hpp"

namespace shockcast {

using Rng = std::mt19937_64;

// Uniform in [0, 1). Built from raw engine bits so results do not depend on
// the standard library's distribution implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline double standard_normal(Rng& rng) {
  // Box-Muller; the second variate is discarded to keep the stream simple.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline void init_uniform(Matrix& m, Rng& rng, std::size_t fan_in) {
  const double bound = fan_in == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : m.data()) x = uniform(rng, -bound, bound);
}

enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

// Gate rows are stacked in the order input, forget, cell, output.
struct LstmParams {
  Matrix w_input;   // 4h x m
  Matrix w_hidden;  // 4h x h
  Matrix bias;      // 4h x 1

  static LstmParams zeros(std::size_t input_size, std::size_t hidden) {
    return {Matrix(4 * hidden, input_size), Matrix(4 * hidden, hidden), Matrix(4 * hidden, 1)};
  }

  static LstmParams init(std::size_t input_size, std::size_t hidden, Rng& rng) {
    auto p = zeros(input_size, hidden);
    init_uniform(p.w_input, rng, input_size);
    init_uniform(p.w_hidden, rng, hidden);
    for (std::size_t j = 0; j < hidden; ++j) p.bias(hidden + j, 0) = 1.0;  // forget gate
    return p;
  }

  std::size_t hidden_size() const noexcept { return w_hidden.cols(); }
  std::size_t input_size() const noexcept { return w_input.cols(); }

  void validate() const {
    const std::size_t h = hidden_size();
    if (w_hidden.rows() != 4 * h || w_input.rows() != 4 * h || bias.rows() != 4 * h || bias.cols() != 1) {
      throw ContractError("inconsistent LSTM parameter shapes");
    }
  }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

struct LstmCache {
  Matrix inputs;  // k x m
  Matrix in_gate, forget_gate, cell_gate, out_gate;  // k x h (post-activation)
  Matrix cells;   // k x h
  Matrix hidden;  // k x h
};

struct LstmOutput {
  Matrix hidden;  // k x h, every step
  Vector final;   // h, last step
  LstmCache cache;
};

inline LstmOutput lstm_forward(const Matrix& sequence, const LstmParams& p) {
  p.validate();
  if (sequence.cols() != p.input_size()) {
    throw ContractError("LSTM input width " + std::to_string(sequence.cols()) + " != declared " +
                        std::to_string(p.input_size()));
  }
  if (sequence.rows() == 0) throw ContractError("LSTM sequence is empty");
  if (!all_finite(sequence.data())) throw NumericError("LSTM input contains non-finite values");

  const std::size_t k = sequence.rows();
  const std::size_t h = p.hidden_size();
  LstmCache c{sequence, Matrix(k, h), Matrix(k, h), Matrix(k, h), Matrix(k, h), Matrix(k, h), Matrix(k, h)};
  Vector h_prev(h, 0.0), c_prev(h, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    Vector z = matvec(p.w_input, sequence.row(t));
    const Vector zh = matvec(p.w_hidden, h_prev);
    for (std::size_t r = 0; r < 4 * h; ++r) z[r] += zh[r] + p.bias(r, 0);
    for (std::size_t j = 0; j < h; ++j) {
      const double i = sigmoid(z[j]);
      const double f = sigmoid(z[h + j]);
      const double g = std::tanh(z[2 * h + j]);
      const double o = sigmoid(z[3 * h + j]);
      const double cell = f * c_prev[j] + i * g;
      c.in_gate(t, j) = i;
      c.forget_gate(t, j) = f;
      c.cell_gate(t, j) = g;
      c.out_gate(t, j) = o;
      c.cells(t, j) = cell;
      c.hidden(t, j) = o * std::tanh(cell);
    }
    auto hr = c.hidden.row(t);
    auto cr = c.cells.row(t);
    h_prev.assign(hr.begin(), hr.end());
    c_prev.assign(cr.begin(), cr.end());
  }
  LstmOutput out;
  out.hidden = c.hidden;
  out.final = h_prev;
  out.cache = std::move(c);
  return out;
}

// Backpropagation through time. `d_hidden` is dL/dh_t for every step (k x h);
// gradients are accumulated into `grads`. Optionally returns dL/dx (k x m).
inline void lstm_backward(const LstmParams& p, const LstmCache& c, const Matrix& d_hidden, LstmParams& grads,
                          Matrix* d_inputs = nullptr) {
  const std::size_t k = c.hidden.rows();
  const std::size_t h = p.hidden_size();
  if (d_hidden.rows() != k || d_hidden.cols() != h) throw ContractError("LSTM d_hidden shape mismatch");
  if (d_inputs) *d_inputs = Matrix(k, p.input_size());

  Vector dh_next(h, 0.0), dc_next(h, 0.0), dz(4 * h);
  for (std::size_t step = k; step-- > 0;) {
    for (std::size_t j = 0; j < h; ++j) {
      const double dh = d_hidden(step, j) + dh_next[j];
      const double i = c.in_gate(step, j), f = c.forget_gate(step, j);
      const double g = c.cell_gate(step, j), o = c.out_gate(step, j);
      const double tc = std::tanh(c.cells(step, j));
      const double c_prev = step > 0 ? c.cells(step - 1, j) : 0.0;
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
      dz[j] = dc * g * i * (1.0 - i);
      dz[h + j] = dc * c_prev * f * (1.0 - f);
      dz[2 * h + j] = dc * i * (1.0 - g * g);
      dz[3 * h + j] = dh * tc * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    add_outer(grads.w_input, dz, c.inputs.row(step));
    if (step > 0) add_outer(grads.w_hidden, dz, c.hidden.row(step - 1));
    for (std::size_t r = 0; r < 4 * h; ++r) grads.bias(r, 0) += dz[r];
    dh_next = matvec_t(p.w_hidden, dz);
    if (d_inputs) {
      const Vector dx = matvec_t(p.w_input, dz);
      std::copy(dx.begin(), dx.end(), d_inputs->row(step).begin());
    }
  }
}

// ---------------------------------------------------------------------------
// Scaled dot-product attention (single head)
// ---------------------------------------------------------------------------

struct AttentionParams {
  Matrix w_query;  // h x h_a
  Matrix w_key;    // h x h_a
  Matrix w_value;  // h x h_a

  static AttentionParams zeros(std::size_t hidden, std::size_t attn) {
    return {Matrix(hidden, attn), Matrix(hidden, attn), Matrix(hidden, attn)};
  }

  static AttentionParams init(std::size_t hidden, std::size_t attn, Rng& rng) {
    auto p = zeros(hidden, attn);
    init_uniform(p.w_query, rng, hidden);
    init_uniform(p.w_key, rng, hidden);
    init_uniform(p.w_value, rng, hidden);
    return p;
  }

  std::size_t input_size() const noexcept { return w_query.rows(); }
  std::size_t attn_size() const noexcept { return w_query.cols(); }

  void validate() const {
    if (!w_query.same_shape(w_key) || !w_query.same_shape(w_value)) {
      throw ContractError("attention projections must share shape h x h_a");
    }
  }

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
  if (!all_finite(logits.data())) throw NumericError("attention logits are not finite");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      out(i, j) = std::exp(row[j] - mx);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < row.size(); ++j) out(i, j) /= sum;
  }
  return out;
}

struct AttentionCache {
  Matrix states;   // H, k x h
  Matrix query, key, value;  // k x h_a
  Matrix weights;  // A, k x k
};

struct AttentionOutput {
  Vector context;  // h_a
  Matrix weights;  // k x k
  AttentionCache cache;
};

// A = softmax(Q K^T / sqrt(h_a)); context = (1/k) sum_i sum_j A_ij V_j.
inline AttentionOutput attention_forward(const Matrix& states, const AttentionParams& p) {
  p.validate();
  if (states.rows() == 0) throw ContractError("attention needs at least one time step");
  if (states.cols() != p.input_size()) throw ContractError("attention input width mismatch");
  const std::size_t k = states.rows();
  const std::size_t ha = p.attn_size();

  AttentionCache c;
  c.states = states;
  c.query = matmul(states, p.w_query);
  c.key = matmul(states, p.w_key);
  c.value = matmul(states, p.w_value);
  Matrix logits = matmul_nt(c.query, c.key);
  const double scale = 1.0 / std::sqrt(static_cast<double>(ha));
  for (double& x : logits.data()) x *= scale;
  c.weights = softmax_rows(logits);

  Vector context(ha, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double a = c.weights(i, j);
      for (std::size_t q = 0; q < ha; ++q) context[q] += a * c.value(j, q);
    }
  for (double& x : context) x /= static_cast<double>(k);

  AttentionOutput out;
  out.context = std::move(context);
  out.weights = c.weights;
  out.cache = std::move(c);
  return out;
}

// Accumulates projection gradients into `grads`; writes dL/dH into `d_states`.
inline void attention_backward(const AttentionParams& p, const AttentionCache& c, std::span<const double> d_context,
                               AttentionParams& grads, Matrix& d_states) {
  const std::size_t k = c.states.rows();
  const std::size_t ha = p.attn_size();
  if (d_context.size() != ha) throw ContractError("attention d_context size mismatch");
  const double inv_k = 1.0 / static_cast<double>(k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(ha));

  // dV_j = (1/k) (sum_i A_ij) dc
  Matrix d_value(k, ha);
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < k; ++i) col += c.weights(i, j);
    for (std::size_t q = 0; q < ha; ++q) d_value(j, q) = inv_k * col * d_context[q];
  }
  // dA_ij = (1/k) V_j . dc, then through the row softmax.
  Vector v_dot(k);
  for (std::size_t j = 0; j < k; ++j) v_dot[j] = inv_k * dot(c.value.row(j), d_context);
  Matrix d_logits(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += c.weights(i, j) * v_dot[j];
    for (std::size_t j = 0; j < k; ++j) d_logits(i, j) = c.weights(i, j) * (v_dot[j] - s) * scale;
  }
  const Matrix d_query = matmul(d_logits, c.key);
  const Matrix d_key = matmul_tn(d_logits, c.query);

  const Matrix gq = matmul_tn(c.states, d_query);
  const Matrix gk = matmul_tn(c.states, d_key);
  const Matrix gv = matmul_tn(c.states, d_value);
  for (std::size_t i = 0; i < gq.size(); ++i) {
    grads.w_query.data()[i] += gq.data()[i];
    grads.w_key.data()[i] += gk.data()[i];
    grads.w_value.data()[i] += gv.data()[i];
  }
  d_states = matmul_nt(d_query, p.w_query);
  const Matrix dk = matmul_nt(d_key, p.w_key);
  const Matrix dv = matmul_nt(d_value, p.w_value);
  for (std::size_t i = 0; i < d_states.size(); ++i) d_states.data()[i] += dk.data()[i] + dv.data()[i];
}

// ---------------------------------------------------------------------------
// Classification head: Dropout(ReLU(W1 x + b1)) -> sigmoid(w2 . z + b2)
// ---------------------------------------------------------------------------

struct HeadParams {
  Matrix w1;  // hidden x in
  Matrix b1;  // hidden x 1
  Matrix w2;  // 1 x hidden
  Matrix b2;  // 1 x 1
  double dropout = 0.0;

  static HeadParams zeros(std::size_t in, std::size_t hidden, double dropout) {
    return {Matrix(hidden, in), Matrix(hidden, 1), Matrix(1, hidden), Matrix(1, 1), dropout};
  }

  static HeadParams init(std::size_t in, std::size_t hidden, double dropout, Rng& rng) {
    auto p = zeros(in, hidden, dropout);
    init_uniform(p.w1, rng, in);
    init_uniform(p.w2, rng, hidden);
    return p;
  }

  std::size_t input_size() const noexcept { return w1.cols(); }
  std::size_t hidden_size() const noexcept { return w1.rows(); }

  void validate() const {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
    const std::size_t u = hidden_size();
    if (b1.rows() != u || b1.cols() != 1 || w2.rows() != 1 || w2.cols() != u || b2.rows() != 1 || b2.cols() != 1) {
      throw ContractError("inconsistent head parameter shapes");
    }
  }

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct HeadCache {
  Vector input;
  Vector pre;   // W1 x + b1
  Vector mask;  // 0 or 1/(1-p) per unit; all ones in infer mode
  Vector z;
  double logit = 0.0;
  double prob = 0.5;
};

struct HeadOutput {
  double prob = 0.5;
  HeadCache cache;
};

inline HeadOutput head_forward(std::span<const double> fused, const HeadParams& p, Mode mode, Rng* rng) {
  p.validate();
  if (fused.size() != p.input_size()) {
    throw ContractError("head input length " + std::to_string(fused.size()) + " != " +
                        std::to_string(p.input_size()));
  }
  HeadCache c;
  c.input.assign(fused.begin(), fused.end());
  c.pre = matvec(p.w1, fused);
  const std::size_t u = p.hidden_size();
  c.mask.assign(u, 1.0);
  if (mode == Mode::train && p.dropout > 0.0) {
    if (!rng) throw ConfigError("train-mode dropout needs an rng");
    const double keep_scale = 1.0 / (1.0 - p.dropout);
    for (double& m : c.mask) m = uniform01(*rng) < p.dropout ? 0.0 : keep_scale;
  }
  c.z.resize(u);
  for (std::size_t j = 0; j < u; ++j) {
    c.pre[j] += p.b1(j, 0);
    c.z[j] = std::max(0.0, c.pre[j]) * c.mask[j];
  }
  c.logit = dot(p.w2.row(0), c.z) + p.b2(0, 0);
  if (!std::isfinite(c.logit)) throw NumericError("head logit is not finite");
  c.prob = sigmoid(c.logit);
  return {c.prob, std::move(c)};
}

// `d_logit` is dL/d(w2 . z + b2).
inline void head_backward(const HeadParams& p, const HeadCache& c, double d_logit, HeadParams& grads,
                          Vector& d_input) {
  const std::size_t u = p.hidden_size();
  Vector d_pre(u);
  for (std::size_t j = 0; j < u; ++j) {
    grads.w2(0, j) += d_logit * c.z[j];
    d_pre[j] = c.pre[j] > 0.0 ? d_logit * p.w2(0, j) * c.mask[j] : 0.0;
    grads.b1(j, 0) += d_pre[j];
  }
  grads.b2(0, 0) += d_logit;
  add_outer(grads.w1, d_pre, c.input);
  d_input = matvec_t(p.w1, d_pre);
}

// ---------------------------------------------------------------------------
// Binary cross-entropy
// ---------------------------------------------------------------------------

inline constexpr double kBceClamp = 1e-7;

struct BceResult {
  double loss = 0.0;
  Vector d_pred;  // dL/d y_hat per sample
};

// L = -(1/N) sum [w y log p + (1-y) log(1-p)], p clamped to [1e-7, 1-1e-7].
// `positive_weight` = 1 gives the plain loss.
inline BceResult bce_loss(std::span<const double> preds, std::span<const int> targets, double positive_weight = 1.0) {
  if (preds.size() != targets.size()) throw ContractError("bce_loss: predictions and targets differ in length");
  if (preds.empty()) throw ContractError("bce_loss: empty batch");
  const double n = static_cast<double>(preds.size());
  BceResult r;
  r.d_pred.resize(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (targets[i] != 0 && targets[i] != 1) throw ContractError("bce_loss: targets must be 0 or 1");
    const double p = std::clamp(preds[i], kBceClamp, 1.0 - kBceClamp);
    if (targets[i] == 1) {
      r.loss -= positive_weight * std::log(p);
      r.d_pred[i] = -positive_weight / (p * n);
    } else {
      r.loss -= std::log(1.0 - p);
      r.d_pred[i] = 1.0 / ((1.0 - p) * n);
    }
  }
  r.loss /= n;
  return r;
}

// ---------------------------------------------------------------------------
// Adam with bias correction and L2 on flagged (dense) parameters
// ---------------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;  // L2 coefficient, applied as lambda * theta
};

struct AdamState {
  AdamConfig config;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::int64_t step = 0;
};

// One trainable tensor: its values, its gradient, and whether L2 applies.
struct ParamSlot {
  std::span<double> value;
  std::span<const double> grad;
  bool l2 = false;
};

inline void adam_step(std::span<const ParamSlot> slots, AdamState& state) {
  for (const auto& s : slots) {
    if (s.value.size() != s.grad.size()) throw ContractError("adam_step: gradient shape mismatch");
    if (!all_finite(s.grad)) throw NumericError("adam_step: non-finite gradient, step refused");
  }
  if (state.first_moment.empty()) {
    for (const auto& s : slots) {
      state.first_moment.emplace_back(s.value.size(), 0.0);
      state.second_moment.emplace_back(s.value.size(), 0.0);
    }
  }
  if (state.first_moment.size() != slots.size()) throw ContractError("adam_step: state/parameter count mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (state.first_moment[i].size() != slots[i].value.size()) {
      throw ContractError("adam_step: state/parameter shape mismatch");
    }
  }

  const auto& cfg = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& s = slots[i];
    for (std::size_t j = 0; j < s.value.size(); ++j) {
      const double g = s.grad[j] + (s.l2 ? cfg.weight_decay * s.value[j] : 0.0);
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      s.value[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------

struct GradCheckOptions {
  double step = 1e-5;
  // Bundles larger than this are checked on a random subsample of this many
  // coordinates (at least 200).
  std::size_t max_coordinates = 5000;
  std::uint64_t seed = 0;
  // Denominator floor so that near-zero gradients compare absolutely.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_slot = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares the analytic gradients in `slots` against central differences of
// `loss` (which must read the current parameter values and be deterministic).
inline GradCheckResult grad_check(const std::function<double()>& loss, std::span<const ParamSlot> slots,
                                  const GradCheckOptions& opt = {}) {
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t s = 0; s < slots.size(); ++s)
    for (std::size_t j = 0; j < slots[s].value.size(); ++j) coords.emplace_back(s, j);
  const std::size_t limit = std::max<std::size_t>(opt.max_coordinates, 200);
  if (coords.size() > limit) {
    Rng rng(opt.seed);
    for (std::size_t i = 0; i < limit; ++i) {
      const std::size_t pick = i + static_cast<std::size_t>(rng() % (coords.size() - i));
      std::swap(coords[i], coords[pick]);
    }
    coords.resize(limit);
  }

  GradCheckResult r;
  for (const auto& [s, j] : coords) {
    double& x = slots[s].value[j];
    const double saved = x;
    x = saved + opt.step;
    const double plus = loss();
    x = saved - opt.step;
    const double minus = loss();
    x = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) throw NumericError("grad_check: loss is not finite");
    const double numeric = (plus - minus) / (2.0 * opt.step);
    const double analytic = slots[s].grad[j];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++r.coordinates_checked;
    if (rel > r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst_slot = s;
      r.worst_index = j;
      r.worst_analytic = analytic;
      r.worst_numeric = numeric;
    }
  }
  return r;
}

}  // namespace shockcast
