#pragma once

#include <Eigen/Dense>

namespace twostream {

using Index = Eigen::Index;

#ifdef TWOSTREAM_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Library-wide dense types. Activations are stored one sample per row.
using Mat = RowMatrix<Real>;
using Vec = ColVector<Real>;
using MatRef = Eigen::Ref<const Mat>;

}  // namespace twostream
