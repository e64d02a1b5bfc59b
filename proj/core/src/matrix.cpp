#include "lsat/matrix.hpp"

#include <string>

#include "lsat/errors.hpp"

namespace lsat {

void throw_non_finite(std::string_view what) { throw NonFiniteInput(std::string(what) + " contains NaN or Inf"); }

void require_shape(const Eigen::Ref<const DenseMatrix>& m, Eigen::Index rows, Eigen::Index cols,
                   std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionMismatch(std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                            "x" + std::to_string(cols));
  }
}

}  // namespace lsat
