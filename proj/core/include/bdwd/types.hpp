#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace bdwd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Label : std::int8_t { negative = -1, unlabeled = 0, positive = 1 };

inline double sign_of(Label y) { return static_cast<double>(static_cast<std::int8_t>(y)); }
inline bool is_labeled(Label y) { return y != Label::unlabeled; }

/// Training or test data. Samples are stored column-wise: X is d x n.
struct Dataset {
  Matrix X;
  std::vector<Label> y;
  double P1 = 0.5;

  Eigen::Index dim() const { return X.rows(); }
  Eigen::Index size() const { return X.cols(); }

  std::size_t count_labeled() const;
  std::size_t count_unlabeled() const { return y.size() - count_labeled(); }
  bool fully_labeled() const { return count_labeled() == y.size(); }
  bool has_both_classes() const;

  /// Throws InvalidArgument unless shapes agree, X is finite and P1 is in (0,1).
  void validate() const;
  /// validate() plus: no unlabeled entries and both classes present.
  void validate_supervised() const;

  /// Copy restricted to the given sample indices, in that order.
  Dataset subset(const std::vector<Eigen::Index>& indices) const;
  /// Copy holding only the labeled samples.
  Dataset labeled_part() const;
  /// Copy with every label erased.
  Dataset without_labels() const;
};

/// (beta, beta0, lambda): the parameter triple every density is evaluated at.
struct ModelState {
  Vector beta;
  double beta0 = 0.0;
  double lambda = 1.0;

  static ModelState zeros(Eigen::Index d, double lambda = 1.0) {
    return ModelState{Vector::Zero(d), 0.0, lambda};
  }
  bool finite() const;
};

/// u_i = beta0 + x_i^T beta, and y_i * u_i for labeled samples (0 when unlabeled).
struct Scores {
  Vector u;
  Vector signed_u;
};

}  // namespace bdwd
