#pragma once

// Planted-signal datasets: the spike label of year t+1 is a function of the
// news embedding of year t only, while prices are an unrelated random walk.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shockcast/data_ingest.hpp"
#include "shockcast/error.hpp"
#include "shockcast/nn_core.hpp"
#include "shockcast/text_io.hpp"

namespace shockcast {

enum class PlantedRule {
  threshold,  // y = [e[0] > 0]
  xor_sign,   // y = [sign(e[0]) != sign(e[1])]
};

struct SyntheticConfig {
  std::size_t steps = 64;
  std::size_t dim = 16;
  int start_year = 1960;
  double planted_scale = 3.0;  // std of the planted coordinates; the rest have std 1
  PlantedRule rule = PlantedRule::threshold;
  std::uint64_t seed = 7;
};

inline AlignedDataset planted_news_dataset(const SyntheticConfig& cfg) {
  const std::size_t planted = cfg.rule == PlantedRule::xor_sign ? 2 : 1;
  if (cfg.steps < 2) throw ConfigError("synthetic dataset needs at least 2 steps");
  if (cfg.dim < planted) throw ConfigError("synthetic embedding dim too small for the planted rule");
  Rng rng(cfg.seed);
  AlignedDataset d;
  double price = 100.0;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    d.years.push_back(cfg.start_year + static_cast<int>(t));
    price *= 1.0 + 0.1 * standard_normal(rng);
    if (price < 1.0) price = 1.0;
    d.prices.push_back(price);
    std::vector<double> e(cfg.dim);
    for (std::size_t j = 0; j < cfg.dim; ++j) e[j] = standard_normal(rng) * (j < planted ? cfg.planted_scale : 1.0);
    d.embeddings.push_back(std::move(e));
  }
  auto rule = [&](const std::vector<double>& e) {
    if (cfg.rule == PlantedRule::threshold) return e[0] > 0.0 ? 1 : 0;
    return (e[0] > 0.0) != (e[1] > 0.0) ? 1 : 0;
  };
  d.labels.assign(cfg.steps, 0);
  for (std::size_t t = 0; t + 1 < cfg.steps; ++t) d.labels[t + 1] = rule(d.embeddings[t]);
  return d;
}

// A raw price table with a handful of correlated commodity random walks, used
// as a fixture for the command-line pipeline.
inline std::string synthetic_price_csv(int first_year, int last_year, std::uint64_t seed) {
  static const char* kNames[] = {"crude_oil", "wheat", "copper", "gold", "coffee"};
  Rng rng(seed);
  std::vector<double> level = {3.0, 60.0, 700.0, 35.0, 40.0};
  std::string out = "year";
  for (const char* n : kNames) out += std::string(",") + n;
  out += "\n";
  for (int y = first_year; y <= last_year; ++y) {
    const double common = 0.12 * standard_normal(rng);
    const bool shock = uniform01(rng) < 0.12;
    out += std::to_string(y);
    for (double& v : level) {
      double step = common + 0.08 * standard_normal(rng) + (shock ? 0.3 : 0.0);
      v = std::max(0.01, v * (1.0 + step));
      out += "," + text::format_fixed(v, 2);
    }
    out += "\n";
  }
  return out;
}

}  // namespace shockcast
