#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "shockcast/embedding.hpp"
#include "shockcast/error.hpp"
#include "shockcast/linalg.hpp"

namespace shockcast {

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // columns are unit eigenvectors, ordered like `values`
};

// Cyclic Jacobi rotations on a symmetric matrix. Converges quadratically; the
// matrices here are at most a few hundred wide.
inline SymmetricEigen jacobi_eigen(Matrix a, double tol = 1e-14, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ContractError("jacobi_eigen needs a square matrix, got " + shape_string(a));
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.data()) scale += x * x;
  scale = std::sqrt(scale);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * std::max(scale, 1e-300)) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

// Top principal directions of the training embeddings.
struct PcaBasis {
  Vector mean;                 // d
  Matrix components;           // d x d', orthonormal columns
  Vector explained_variance;   // d', non-increasing
  std::size_t fitted_on = 0;

  std::size_t input_dim() const noexcept { return mean.size(); }
  std::size_t output_dim() const noexcept { return components.cols(); }
  bool fitted() const noexcept { return !mean.empty(); }

  friend bool operator==(const PcaBasis&, const PcaBasis&) = default;
};

// Sample covariance (1/(n-1)) of the row vectors.
inline Matrix covariance(std::span<const std::vector<double>> rows, const Vector& mean) {
  const std::size_t d = mean.size();
  Matrix cov(d, d);
  Vector centered(d);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = r[j] - mean[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += ci * centered[j];
    }
  }
  const double denom = static_cast<double>(rows.size() - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= denom;
      cov(j, i) = cov(i, j);
    }
  return cov;
}

// Flips each column so that its largest-magnitude entry is positive (first
// such entry on ties).
inline void canonicalize_signs(Matrix& components) {
  for (std::size_t c = 0; c < components.cols(); ++c) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < components.rows(); ++r) {
      const double m = std::abs(components(r, c));
      if (m > best) {
        best = m;
        arg = r;
      }
    }
    if (components(arg, c) < 0.0)
      for (std::size_t r = 0; r < components.rows(); ++r) components(r, c) = -components(r, c);
  }
}

inline PcaBasis fit_pca(std::span<const std::vector<double>> rows, std::size_t d_prime) {
  if (rows.size() < 2) throw InsufficientDataError("PCA needs at least 2 rows, got " + std::to_string(rows.size()));
  const std::size_t d = rows.front().size();
  if (d == 0) throw ContractError("PCA input has dimension 0");
  for (const auto& r : rows) {
    if (r.size() != d) throw ContractError("PCA rows have non-uniform dimension");
    if (!all_finite(r)) throw ContractError("PCA input contains non-finite values");
  }
  if (d_prime == 0 || d_prime > std::min(d, rows.size() - 1)) {
    throw RankError("d' = " + std::to_string(d_prime) + " exceeds min(d, rows-1) = " +
                    std::to_string(std::min(d, rows.size() - 1)));
  }

  Vector mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (double& m : mean) m /= static_cast<double>(rows.size());

  const Matrix cov = covariance(rows, mean);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
  if (!(trace > 0.0)) throw RankError("embeddings have zero covariance");

  auto eig = jacobi_eigen(cov);
  if (!(eig.values[d_prime - 1] > 1e-12 * trace)) {
    throw RankError("covariance rank is below d' = " + std::to_string(d_prime));
  }

  PcaBasis basis;
  basis.mean = std::move(mean);
  basis.components = Matrix(d, d_prime);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d_prime; ++c) basis.components(r, c) = eig.vectors(r, c);
  canonicalize_signs(basis.components);
  basis.explained_variance.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(d_prime));
  basis.fitted_on = rows.size();
  return basis;
}

inline PcaBasis fit_pca(const std::vector<EmbeddingVector>& train, std::size_t d_prime) {
  std::vector<std::vector<double>> rows;
  rows.reserve(train.size());
  for (const auto& e : train) rows.push_back(e.values);
  return fit_pca(std::span<const std::vector<double>>(rows), d_prime);
}

// W^T (e - mean)
inline Vector transform(const PcaBasis& basis, std::span<const double> e) {
  if (e.size() != basis.input_dim()) {
    throw ContractError("embedding dim " + std::to_string(e.size()) + " does not match PCA input dim " +
                        std::to_string(basis.input_dim()));
  }
  Vector centered(e.begin(), e.end());
  for (std::size_t j = 0; j < centered.size(); ++j) centered[j] -= basis.mean[j];
  return matvec_t(basis.components, centered);
}

inline std::vector<Vector> transform_rows(const PcaBasis& basis, std::span<const std::vector<double>> rows) {
  std::vector<Vector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(transform(basis, r));
  return out;
}

}  // namespace shockcast
