#pragma once

#include <utility>
#include <vector>

#include "gcsntk/errors.hpp"
#include "gcsntk/types.hpp"

namespace gcsntk {

/// Named index sets into [0, n). Pairwise disjoint.
struct SplitSpec {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;

  void validate(Index n) const;
};

/// A node-classification graph: dense features, sparse symmetric 0/1
/// adjacency without self-loops, one integer class per node, named splits.
class Graph {
 public:
  Graph() = default;

  /// Builds from an undirected edge list. Symmetry is enforced by unioning
  /// with the transpose; duplicate edges collapse; self-loops are rejected.
  Graph(Matrix features, const std::vector<std::pair<Index, Index>>& edges,
        std::vector<int> labels, SplitSpec splits, int num_classes);

  /// Takes an already-built adjacency (validated).
  Graph(Matrix features, SparseMatrix adjacency, std::vector<int> labels,
        SplitSpec splits, int num_classes);

  Index num_nodes() const { return features_.rows(); }
  Index feature_dim() const { return features_.cols(); }
  int num_classes() const { return num_classes_; }
  Index num_edges() const { return adjacency_.nonZeros() / 2; }

  const Matrix& features() const { return features_; }
  const SparseMatrix& adjacency() const { return adjacency_; }
  const std::vector<int>& labels() const { return labels_; }
  const SplitSpec& splits() const { return splits_; }

  void set_features(Matrix x) { features_ = std::move(x); }

  void validate() const;

 private:
  Matrix features_;
  SparseMatrix adjacency_;
  std::vector<int> labels_;
  SplitSpec splits_;
  int num_classes_ = 0;
};

/// Returns the self-looped adjacency A + I. Input must be square with a
/// zero diagonal; it is left unchanged.
SparseMatrix add_self_loops(const SparseMatrix& adjacency);

/// Symmetric degree normalization D^{-1/2} A_hat D^{-1/2} with D the row
/// sums of the self-looped input. Throws DegenerateDegreeError on a zero
/// row sum.
SparseMatrix sym_normalize(const SparseMatrix& self_looped);

/// Applies `rounds` rounds of graph convolution: returns A_norm^r X.
/// rounds = 0 returns the features unchanged.
Matrix graph_convolve(const Matrix& features, const SparseMatrix& norm_adjacency,
                      int rounds);

/// One-hot encodes integer labels into an [n x C] matrix.
Matrix one_hot(const std::vector<int>& labels, int num_classes);

/// Row-wise argmax with ties broken toward the lowest class index.
std::vector<int> argmax_rows(const Matrix& m);

/// Transductive preprocessing: replaces features by A_norm^r X where
/// A_norm = sym_normalize(add_self_loops(A)). The adjacency is untouched.
Graph preprocess(const Graph& g, int rounds);

}  // namespace gcsntk
