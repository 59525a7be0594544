#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

namespace mpx {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using SparseMatrixX = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using Vector = VectorX<double>;
using DenseMatrix = Eigen::MatrixXd;
// Compressed row storage; columns are kept sorted and unique by Eigen after
// makeCompressed()/setFromTriplets().
using SparseMatrix = SparseMatrixX<double>;
using Triplet = Eigen::Triplet<double>;
using Point3 = Eigen::Vector3d;

}  // namespace mpx
