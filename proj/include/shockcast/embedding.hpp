#pragma once

#include <string>
#include <vector>

#include "shockcast/error.hpp"
#include "shockcast/linalg.hpp"

namespace shockcast {

// Dense vector representation of one year's verified news summary.
struct EmbeddingVector {
  int year = 0;
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

inline void validate_embedding(const EmbeddingVector& e) {
  if (e.values.empty()) throw ContractError("embedding for " + std::to_string(e.year) + " has dim 0");
  if (!all_finite(e.values)) {
    throw ContractError("embedding for " + std::to_string(e.year) + " has non-finite values");
  }
}

}  // namespace shockcast
