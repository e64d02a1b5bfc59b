#include "lsat/errors.hpp"

#include <cstdio>
#include <sstream>

namespace lsat {

namespace {

std::string rank_message(std::size_t index, double pivot, double threshold) {
  std::ostringstream os;
  os << "rank deficient: Cholesky pivot " << index << " = " << pivot
     << " is not above threshold " << threshold;
  return os.str();
}

std::string columns_message(const std::vector<std::size_t>& columns) {
  std::ostringstream os;
  os << "iterative solve did not converge on column(s)";
  for (auto c : columns) os << ' ' << c;
  return os.str();
}

std::string hex(unsigned v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

RankDeficient::RankDeficient(std::size_t pivot_index, double pivot, double threshold)
    : NumericalError(rank_message(pivot_index, pivot, threshold)),
      pivot_index_(pivot_index),
      pivot_(pivot) {}

NoConvergence::NoConvergence(std::vector<std::size_t> columns)
    : NumericalError(columns_message(columns)), columns_(std::move(columns)) {}

AdjointInconsistent::AdjointInconsistent(double lhs, double rhs)
    : NumericalError("operator apply/apply_transpose are not adjoint: <Au,v> = " +
                     std::to_string(lhs) + ", <u,A'v> = " + std::to_string(rhs)) {}

BadMagic::BadMagic(const std::string& path, unsigned expected, unsigned found)
    : DataError(path + ": bad magic number " + hex(found) + " (expected " + hex(expected) + ")") {}

}  // namespace lsat
