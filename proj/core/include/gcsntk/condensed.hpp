#pragma once

#include <optional>
#include <vector>

#include "gcsntk/types.hpp"

namespace gcsntk {

/// The synthetic graph being learned: M feature rows (learnable), fixed
/// one-hot labels, and optionally an unconstrained symmetric adjacency
/// parameter matrix that materializes to edge weights in (0,1) through a
/// logistic squashing (see condenser.hpp).
struct CondensedGraph {
  Matrix x_s;                       // [M x d], learnable
  Matrix y_s;                       // [M x C], fixed exact one-hot rows
  std::optional<Matrix> adj_param;  // [M x M] symmetric, learnable

  Index size() const { return x_s.rows(); }
  Index feature_dim() const { return x_s.cols(); }
  Index num_classes() const { return y_s.cols(); }

  std::vector<int> labels() const;

  void validate() const;
};

}  // namespace gcsntk
