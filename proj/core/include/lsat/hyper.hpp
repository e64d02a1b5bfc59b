#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lsat/matrix.hpp"

namespace lsat {

// Named contiguous range of a hyper-parameter vector.
struct Segment {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
};

// Hyper-parameter vector omega with named segments that partition [0, p)
// in order. All values are finite.
class HyperVector {
 public:
  HyperVector() = default;
  // One segment named "all" covering every entry.
  explicit HyperVector(Vector values);
  // Throws std::invalid_argument unless the segments tile [0, values.size())
  // in order, NonFiniteInput for NaN/Inf values.
  HyperVector(Vector values, std::vector<Segment> segments);

  // Segments "feat", "data", "reg" of the given lengths, all zero.
  static HyperVector zeros(Eigen::Index feat, Eigen::Index data, Eigen::Index reg);

  const Vector& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  // nullptr if there is no segment called `name`.
  const Segment* find(std::string_view name) const noexcept;
  // Values of a segment; empty if the segment is absent.
  Vector segment(std::string_view name) const;

  // Same layout, new values (validated).
  HyperVector with_values(Vector values) const;

 private:
  Vector values_;
  std::vector<Segment> segments_;
};

}  // namespace lsat
