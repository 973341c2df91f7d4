#include "vcm/dataset.hpp"

namespace vcm {

void Dataset::validate() const {
  if (X.cols() < 1) throw InvalidInput("dataset needs at least one predictor");
  if (X.rows() != y.size() || u.size() != y.size())
    throw InvalidInput("dataset: X, u and y lengths differ");
  if (!individual_id.empty() && individual_id.size() != n())
    throw InvalidInput("dataset: individual_id length differs from n");
  require_finite(X, "predictors");
  require_finite(u, "conditioner");
  require_finite(y, "response");
}

Dataset Dataset::column(std::size_t j, const Vector& response) const {
  Dataset out;
  out.X = X.col(static_cast<Eigen::Index>(j));
  out.u = u;
  out.y = response;
  out.individual_id = individual_id;
  return out;
}

}  // namespace vcm
