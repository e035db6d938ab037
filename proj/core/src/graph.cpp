#include "gcsntk/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "gcsntk/condensed.hpp"

namespace gcsntk {

void SplitSpec::validate(Index n) const {
  std::set<Index> seen;
  for (const auto* part : {&train, &val, &test}) {
    for (Index i : *part) {
      if (i < 0 || i >= n)
        throw RangeError("split index " + std::to_string(i) + " out of [0, " +
                         std::to_string(n) + ")");
      if (!seen.insert(i).second)
        throw RangeError("split index " + std::to_string(i) +
                         " appears in more than one split");
    }
  }
}

namespace {

SparseMatrix build_symmetric(Index n,
                             const std::vector<std::pair<Index, Index>>& edges) {
  std::vector<Triplet> trip;
  trip.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw RangeError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") references a node outside [0, " + std::to_string(n) + ")");
    if (u == v)
      throw RangeError("self-loop on node " + std::to_string(u) + " not allowed");
    trip.emplace_back(u, v, 1.0);
    trip.emplace_back(v, u, 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());  // duplicates sum up
  // Collapse duplicate edges back to 0/1.
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) it.valueRef() = 1.0;
  return a;
}

}  // namespace

Graph::Graph(Matrix features, const std::vector<std::pair<Index, Index>>& edges,
             std::vector<int> labels, SplitSpec splits, int num_classes)
    : features_(std::move(features)),
      adjacency_(build_symmetric(features_.rows(), edges)),
      labels_(std::move(labels)),
      splits_(std::move(splits)),
      num_classes_(num_classes) {
  validate();
}

Graph::Graph(Matrix features, SparseMatrix adjacency, std::vector<int> labels,
             SplitSpec splits, int num_classes)
    : features_(std::move(features)),
      adjacency_(std::move(adjacency)),
      labels_(std::move(labels)),
      splits_(std::move(splits)),
      num_classes_(num_classes) {
  validate();
}

void Graph::validate() const {
  const Index n = features_.rows();
  if (n <= 0 || features_.cols() <= 0)
    throw DimensionError("graph needs n > 0 and d > 0");
  if (adjacency_.rows() != n || adjacency_.cols() != n)
    throw DimensionError("adjacency must be [n x n]");
  if (static_cast<Index>(labels_.size()) != n)
    throw DimensionError("labels size must equal n");
  for (Index i = 0; i < n; ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_)
      throw RangeError("label " + std::to_string(labels_[i]) + " at node " +
                       std::to_string(i) + " outside [0, " +
                       std::to_string(num_classes_) + ")");
  }
  for (Index k = 0; k < adjacency_.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(adjacency_, k); it; ++it) {
      if (it.row() == it.col())
        throw RangeError("adjacency has a self-loop at node " +
                         std::to_string(it.row()));
      if (adjacency_.coeff(it.col(), it.row()) != it.value())
        throw RangeError("adjacency is not symmetric at (" +
                         std::to_string(it.row()) + "," +
                         std::to_string(it.col()) + ")");
    }
  }
  splits_.validate(n);
}

SparseMatrix add_self_loops(const SparseMatrix& adjacency) {
  if (adjacency.rows() != adjacency.cols())
    throw DimensionError("add_self_loops: input must be square");
  SparseMatrix eye(adjacency.rows(), adjacency.cols());
  eye.setIdentity();
  SparseMatrix out = adjacency + eye;
  out.makeCompressed();
  return out;
}

SparseMatrix sym_normalize(const SparseMatrix& self_looped) {
  if (self_looped.rows() != self_looped.cols())
    throw DimensionError("sym_normalize: input must be square");
  const Index n = self_looped.rows();
  Vector deg = self_looped * Vector::Ones(n);
  Vector inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    if (deg[i] <= 0.0)
      throw DegenerateDegreeError("zero row sum at node " + std::to_string(i));
    inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
  }
  SparseMatrix out = self_looped;
  for (Index k = 0; k < out.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(out, k); it; ++it)
      it.valueRef() *= inv_sqrt[it.row()] * inv_sqrt[it.col()];
  return out;
}

Matrix graph_convolve(const Matrix& features, const SparseMatrix& norm_adjacency,
                      int rounds) {
  if (rounds < 0) throw RangeError("graph_convolve: rounds must be >= 0");
  if (rounds == 0) return features;
  if (norm_adjacency.cols() != features.rows())
    throw DimensionError("graph_convolve: adjacency/features shape mismatch");
  Matrix out = features;
  for (int r = 0; r < rounds; ++r) out = norm_adjacency * out;
  return out;
}

Matrix one_hot(const std::vector<int>& labels, int num_classes) {
  Matrix out = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (Index i = 0; i < out.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= num_classes)
      throw RangeError("label " + std::to_string(c) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    out(i, c) = 1.0;
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    int best = 0;
    for (Index j = 1; j < m.cols(); ++j)
      if (m(i, j) > m(i, best)) best = static_cast<int>(j);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

Graph preprocess(const Graph& g, int rounds) {
  if (rounds == 0) return g;
  SparseMatrix norm = sym_normalize(add_self_loops(g.adjacency()));
  Graph out = g;
  out.set_features(graph_convolve(g.features(), norm, rounds));
  return out;
}

std::vector<int> CondensedGraph::labels() const { return argmax_rows(y_s); }

void CondensedGraph::validate() const {
  if (x_s.rows() < 1) throw DimensionError("condensed graph needs M >= 1");
  if (y_s.rows() != x_s.rows())
    throw DimensionError("x_s and y_s row counts differ");
  for (Index i = 0; i < y_s.rows(); ++i) {
    int ones = 0;
    for (Index j = 0; j < y_s.cols(); ++j) {
      if (y_s(i, j) == 1.0)
        ++ones;
      else if (y_s(i, j) != 0.0)
        throw RangeError("y_s row " + std::to_string(i) + " is not exact one-hot");
    }
    if (ones != 1)
      throw RangeError("y_s row " + std::to_string(i) + " is not exact one-hot");
  }
  if (adj_param) {
    if (adj_param->rows() != x_s.rows() || adj_param->cols() != x_s.rows())
      throw DimensionError("adj_param must be [M x M]");
    if (!adj_param->isApprox(adj_param->transpose()))
      throw RangeError("adj_param must be symmetric");
  }
}

}  // namespace gcsntk
