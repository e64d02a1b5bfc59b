#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace lsat {

// Row-major, 64-bit real, dynamically sized. Carrier for problem data A, B,
// solutions theta and all gradients.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

[[noreturn]] void throw_non_finite(std::string_view what);

// Throws NonFiniteInput naming `what` if any entry is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view what) {
  if (!m.allFinite()) throw_non_finite(what);
}

// Throws DimensionMismatch unless m is rows x cols.
void require_shape(const Eigen::Ref<const DenseMatrix>& m, Eigen::Index rows, Eigen::Index cols,
                   std::string_view what);

}  // namespace lsat
