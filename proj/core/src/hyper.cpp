#include "lsat/hyper.hpp"

#include <stdexcept>

#include "lsat/errors.hpp"

namespace lsat {

HyperVector::HyperVector(Vector values)
    : HyperVector(values, {Segment{"all", 0, values.size()}}) {}

HyperVector::HyperVector(Vector values, std::vector<Segment> segments)
    : values_(std::move(values)), segments_(std::move(segments)) {
  Eigen::Index next = 0;
  for (const auto& s : segments_) {
    if (s.offset != next || s.length < 0) {
      throw std::invalid_argument("hyper-parameter segment '" + s.name + "' does not continue the partition");
    }
    next += s.length;
  }
  if (next != values_.size()) {
    throw std::invalid_argument("hyper-parameter segments cover " + std::to_string(next) + " of " +
                                std::to_string(values_.size()) + " entries");
  }
  require_finite(values_, "hyper-parameter vector");
}

HyperVector HyperVector::zeros(Eigen::Index feat, Eigen::Index data, Eigen::Index reg) {
  return HyperVector(Vector::Zero(feat + data + reg),
                     {Segment{"feat", 0, feat}, Segment{"data", feat, data}, Segment{"reg", feat + data, reg}});
}

const Segment* HyperVector::find(std::string_view name) const noexcept {
  for (const auto& s : segments_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

Vector HyperVector::segment(std::string_view name) const {
  const Segment* s = find(name);
  if (s == nullptr) return Vector();
  return values_.segment(s->offset, s->length);
}

HyperVector HyperVector::with_values(Vector values) const {
  if (values.size() != values_.size()) {
    throw DimensionMismatch("hyper-parameter vector has " + std::to_string(values.size()) +
                            " entries, layout needs " + std::to_string(values_.size()));
  }
  return HyperVector(std::move(values), segments_);
}

}  // namespace lsat
