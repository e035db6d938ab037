#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace gcsntk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Adjacency matrices are stored row-major (CSR): kernel aggregation is
// dominated by sparse-left x dense-right products, which want row access.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

using Index = Eigen::Index;

}  // namespace gcsntk
