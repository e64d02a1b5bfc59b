#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lsat/matrix.hpp"

namespace lsat::check {

// Central differences of a scalar function at x with step h.
Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h);

// max_i |a_i - b_i| / max(|b_i|, 1e-3 * max_j |b_j|): relative error with a
// floor so that entries near zero are compared on the scale of the vector.
double max_relative_error(const Eigen::Ref<const Vector>& analytic, const Eigen::Ref<const Vector>& reference);

struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  int cases = 0;

  bool passed() const noexcept { return max_rel_error <= tolerance; }
};

// Finite-difference checks of every differentiated map in the library on
// small random problems drawn from `seed`.
std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace lsat::check
