#include "bdwd/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bdwd/error.hpp"

namespace bdwd {

std::size_t Dataset::count_labeled() const {
  return static_cast<std::size_t>(std::count_if(y.begin(), y.end(), is_labeled));
}

bool Dataset::has_both_classes() const {
  const bool neg = std::find(y.begin(), y.end(), Label::negative) != y.end();
  const bool pos = std::find(y.begin(), y.end(), Label::positive) != y.end();
  return neg && pos;
}

void Dataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1)
    throw InvalidArgument("dataset must have d >= 1 features and n >= 1 samples");
  if (static_cast<Eigen::Index>(y.size()) != X.cols())
    throw InvalidArgument("label vector length " + std::to_string(y.size()) +
                          " does not match sample count " + std::to_string(X.cols()));
  if (!X.allFinite()) throw InvalidArgument("feature matrix contains non-finite values");
  if (!(P1 > 0.0 && P1 < 1.0)) throw InvalidArgument("P1 must lie strictly inside (0,1)");
}

void Dataset::validate_supervised() const {
  validate();
  if (!fully_labeled())
    throw InvalidArgument("operation requires fully labeled data; " +
                          std::to_string(count_unlabeled()) + " samples are unlabeled");
  if (!has_both_classes())
    throw InvalidArgument("labels must contain at least one -1 and one +1");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& indices) const {
  Dataset out;
  out.P1 = P1;
  out.X.resize(X.rows(), static_cast<Eigen::Index>(indices.size()));
  out.y.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.X.col(static_cast<Eigen::Index>(k)) = X.col(indices[k]);
    out.y.push_back(y[static_cast<std::size_t>(indices[k])]);
  }
  return out;
}

Dataset Dataset::labeled_part() const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (is_labeled(y[i])) idx.push_back(static_cast<Eigen::Index>(i));
  return subset(idx);
}

Dataset Dataset::without_labels() const {
  Dataset out = *this;
  std::fill(out.y.begin(), out.y.end(), Label::unlabeled);
  return out;
}

bool ModelState::finite() const {
  return beta.allFinite() && std::isfinite(beta0) && std::isfinite(lambda);
}

}  // namespace bdwd
