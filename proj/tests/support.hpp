#pragma once

// Test-side oracles and helpers. Everything here is written independently of
// the library code it checks.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>

#include "shockcast/shockcast.hpp"

namespace testing_support {

using Rng = std::mt19937_64;

// Brute-force spike rule: label year i iff it directly follows a present,
// positive year and the percentage change is strictly above the threshold.
struct OracleLabel {
  int year;
  int label;
};

inline std::vector<OracleLabel> brute_force_labels(const std::vector<int>& years, const std::vector<double>& prices,
                                                   double threshold) {
  std::vector<OracleLabel> out;
  for (std::size_t i = 0; i < years.size(); ++i) {
    for (std::size_t j = 0; j < years.size(); ++j) {
      if (years[j] + 1 != years[i] || prices[j] <= 0.0) continue;
      const double pct = 100.0 * (prices[i] - prices[j]) / prices[j];
      out.push_back({years[i], pct > threshold ? 1 : 0});
    }
  }
  return out;
}

// All-pairs AUC as an exact rational; returns numerator/denominator in double.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  long long wins2 = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins2 += 2;
      else if (scores[i] == scores[j]) wins2 += 1;
    }
  }
  return static_cast<double>(wins2) / static_cast<double>(2 * pairs);
}

// Covariance eigendecomposition through Eigen, the independent PCA oracle.
struct OraclePca {
  Eigen::VectorXd mean;
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // columns, matching eigenvalues
};

inline OraclePca oracle_pca(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  OraclePca o;
  o.mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - o.mean.transpose();
  const Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  o.eigenvalues = es.eigenvalues().reverse();
  o.eigenvectors = es.eigenvectors().rowwise().reverse();
  return o;
}

inline Eigen::MatrixXd to_eigen(const shockcast::Matrix& m) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  return e;
}

inline std::vector<std::vector<double>> random_rows(Rng& rng, std::size_t n, std::size_t d,
                                                    const std::vector<double>& scales = {}) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) r[j] = g(rng) * (j < scales.size() ? scales[j] : 1.0);
  return rows;
}

// Randomly initialized model with the given shape, PCA fitted on random rows.
inline shockcast::ModelParams random_model(std::uint64_t seed, shockcast::Variant variant, std::size_t k,
                                           std::size_t d, std::size_t d_prime, std::size_t h, std::size_t ha,
                                           std::size_t head) {
  using namespace shockcast;
  ModelParams p;
  p.hyper.window = k;
  p.hyper.d_prime = d_prime;
  p.hyper.hidden = h;
  p.hyper.attn = ha;
  p.hyper.head_hidden = head;
  p.hyper.dropout = 0.0;
  p.hyper.seed = seed;
  p.hyper.variant = variant;
  p.embedding_dim = d;
  p.price_norm = {1.0, 2.0};
  Rng rng(seed);
  if (uses_pca(variant)) p.pca = fit_pca(random_rows(rng, d + 4, d), d_prime);
  shockcast::Rng init(seed);
  p.net = init_network(p, init);
  // Scale weights up so that gates leave their linear regime.
  for_each_tensor(p.net, [](const char*, Matrix& m, bool) {
    for (double& x : m.data()) x *= 2.0;
  });
  return p;
}

inline shockcast::WindowedSample random_sample(Rng& rng, std::size_t k, std::size_t d, int anchor = 2000) {
  std::normal_distribution<double> g(0.0, 1.0);
  shockcast::WindowedSample s{shockcast::Matrix(k, 1), shockcast::Matrix(k, d), 0, anchor};
  for (double& x : s.prices.data()) x = 1.0 + g(rng);
  for (double& x : s.news.data()) x = g(rng);
  s.target = static_cast<int>(rng() % 2);
  return s;
}

inline shockcast::MockOptions mock_options(shockcast::MockVerdicts verdicts, std::uint64_t seed = 0) {
  shockcast::MockOptions o;
  o.verdicts = verdicts;
  o.seed = seed;
  return o;
}

// Runs a shell command and returns its exit status.
inline int run_command(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("shockcast_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
