#pragma once

#include "vcm/numcore.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vcm {

/// Observations (X_i, u_i, y_i) of a varying-coefficient model.
struct Dataset {
  Matrix X;  ///< n x p predictors
  Vector u;  ///< conditioner (often time)
  Vector y;  ///< response
  /// Optional longitudinal grouping; empty when rows are independent.
  std::vector<std::int64_t> individual_id;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }

  /// Throws InvalidInput on inconsistent lengths, p == 0 or non-finite values.
  void validate() const;

  /// Single-predictor view (x_j, u, response).
  Dataset column(std::size_t j, const Vector& response) const;
};

}  // namespace vcm
