#include "lsat/featurize.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "lsat/errors.hpp"

namespace lsat::feat {

namespace {

void check_call(const Featurizer& f, const Eigen::Ref<const DenseMatrix>& inputs,
                const Eigen::Ref<const Vector>& params) {
  if (inputs.cols() != f.input_dim()) {
    throw DimensionMismatch("featurizer expects inputs of dimension " + std::to_string(f.input_dim()) +
                            ", got " + std::to_string(inputs.cols()));
  }
  if (params.size() != f.param_count()) {
    throw DimensionMismatch("featurizer expects " + std::to_string(f.param_count()) + " parameters, got " +
                            std::to_string(params.size()));
  }
}

void check_cotangent(const Featurizer& f, const Eigen::Ref<const DenseMatrix>& inputs,
                     const Eigen::Ref<const DenseMatrix>& cotangent) {
  require_shape(cotangent, inputs.rows(), f.output_dim(), "featurizer cotangent");
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Vector Featurizer::map_one(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& params) const {
  const DenseMatrix row = u.transpose();
  return map(row, params).row(0).transpose();
}

Vector Featurizer::pullback_one(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& params,
                                const Eigen::Ref<const Vector>& cotangent) const {
  const DenseMatrix row = u.transpose();
  const DenseMatrix cot = cotangent.transpose();
  return pullback(row, params, cot, nullptr);
}

// --- Identity / Constant ----------------------------------------------------

DenseMatrix Identity::map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  return inputs;
}

Vector Identity::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                          const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);
  if (d_inputs) *d_inputs = cotangent;
  return Vector();
}

DenseMatrix Constant::map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  return DenseMatrix::Constant(inputs.rows(), 1, value_);
}

Vector Constant::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                          const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);
  if (d_inputs) *d_inputs = DenseMatrix::Zero(inputs.rows(), inputs.cols());
  return Vector();
}

// --- AffineScale --------------------------------------------------------------

Vector affine_scale(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& a,
                    const Eigen::Ref<const Vector>& b) {
  if (a.size() != x.size() || b.size() != x.size()) throw DimensionMismatch("affine_scale operands differ in length");
  return (a.array() * x.array() + b.array()).matrix();
}

DenseMatrix AffineScale::map(const Eigen::Ref<const DenseMatrix>& inputs,
                             const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  const auto a = params.head(dim_).transpose().array();
  const auto b = params.tail(dim_).transpose().array();
  DenseMatrix out = inputs;
  out.array().rowwise() *= a;
  out.array().rowwise() += b;
  return out;
}

Vector AffineScale::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                             const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);
  Vector grad(2 * dim_);
  grad.head(dim_) = (cotangent.array() * inputs.array()).colwise().sum().transpose();
  grad.tail(dim_) = cotangent.colwise().sum().transpose();
  if (d_inputs) {
    *d_inputs = cotangent;
    d_inputs->array().rowwise() *= params.head(dim_).transpose().array();
  }
  return grad;
}

// --- PowerTransform ------------------------------------------------------------

double power_transform(double x, double center, double gamma) {
  const double diff = x - center;
  if (diff == 0.0) return 0.0;
  const double mag = std::pow(std::abs(diff), gamma);
  return diff > 0.0 ? mag : -mag;
}

PowerPartials power_transform_partials(double x, double center, double gamma) {
  PowerPartials p;
  p.value = power_transform(x, center, gamma);
  const double diff = x - center;
  const double mag = std::abs(diff);
  if (mag < kPowerSingularity) return p;
  const double slope = gamma * std::pow(mag, gamma - 1.0);
  p.d_x = slope;
  p.d_center = -slope;
  p.d_gamma = p.value * std::log(mag);
  return p;
}

DenseMatrix PowerTransform::map(const Eigen::Ref<const DenseMatrix>& inputs,
                                const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  DenseMatrix out(inputs.rows(), dim_);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < dim_; ++j) out(i, j) = power_transform(inputs(i, j), params[j], params[dim_ + j]);
  }
  return out;
}

Vector PowerTransform::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                                const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);
  Vector grad = Vector::Zero(2 * dim_);
  if (d_inputs) d_inputs->resize(inputs.rows(), dim_);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < dim_; ++j) {
      const PowerPartials p = power_transform_partials(inputs(i, j), params[j], params[dim_ + j]);
      grad[j] += cotangent(i, j) * p.d_center;
      grad[dim_ + j] += cotangent(i, j) * p.d_gamma;
      if (d_inputs) (*d_inputs)(i, j) = cotangent(i, j) * p.d_x;
    }
  }
  return grad;
}

// --- LowRank -------------------------------------------------------------------

Vector low_rank(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const DenseMatrix>& t) {
  if (t.cols() != x.size()) throw DimensionMismatch("low_rank: T has " + std::to_string(t.cols()) + " columns");
  if (t.rows() >= t.cols()) throw DimensionMismatch("low_rank: rank must be below the input dimension");
  return t * x;
}

LowRank::LowRank(Eigen::Index dim, Eigen::Index rank) : dim_(dim), rank_(rank) {
  if (rank < 0 || rank >= dim) throw DimensionMismatch("low rank map needs rank < input dimension");
}

DenseMatrix LowRank::map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  const Eigen::Map<const DenseMatrix> t(params.data(), rank_, dim_);
  return inputs * t.transpose();
}

Vector LowRank::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                         const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);
  const Eigen::Map<const DenseMatrix> t(params.data(), rank_, dim_);
  DenseMatrix dt = cotangent.transpose() * inputs;
  if (d_inputs) *d_inputs = cotangent * t;
  return Eigen::Map<const Vector>(dt.data(), dt.size());
}

// --- softmax / archetypes --------------------------------------------------------

Vector softmax(const Eigen::Ref<const Vector>& z) {
  if (z.size() == 0) return Vector();
  Vector e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Vector softmax_pullback(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& cotangent) {
  if (s.size() != cotangent.size()) throw DimensionMismatch("softmax_pullback operands differ in length");
  return (s.array() * (cotangent.array() - s.dot(cotangent))).matrix();
}

ArchetypeSoftmax::ArchetypeSoftmax(ArchetypeSet archetypes) : archetypes_(std::move(archetypes)) {
  require_finite(archetypes_.centers, "archetype centers");
  if (archetypes_.centers.rows() == 0) throw std::invalid_argument("archetype set is empty");
  center_sq_norms_ = archetypes_.centers.rowwise().squaredNorm();
}

DenseMatrix ArchetypeSoftmax::distances(const Eigen::Ref<const DenseMatrix>& inputs) const {
  DenseMatrix d2 = -2.0 * inputs * archetypes_.centers.transpose();
  d2.colwise() += inputs.rowwise().squaredNorm();
  d2.rowwise() += center_sq_norms_.transpose();
  return d2.cwiseMax(0.0).cwiseSqrt();
}

DenseMatrix ArchetypeSoftmax::map(const Eigen::Ref<const DenseMatrix>& inputs,
                                  const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  DenseMatrix z = distances(inputs) * -std::exp(-params[0]);
  for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) = softmax(z.row(i).transpose()).transpose();
  return z;
}

Vector ArchetypeSoftmax::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);
  const double inv_temp = std::exp(-params[0]);
  const DenseMatrix dist = distances(inputs);

  // z = -d / e^sigma, so dz/dsigma = d / e^sigma and dz/dd = -1 / e^sigma.
  DenseMatrix cz(dist.rows(), dist.cols());
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    const Vector s = softmax((dist.row(i) * -inv_temp).transpose());
    cz.row(i) = softmax_pullback(s, cotangent.row(i).transpose()).transpose();
  }
  Vector grad(1);
  grad[0] = (cz.array() * dist.array()).sum() * inv_temp;

  if (d_inputs) {
    // d||x - a_j|| / dx = (x - a_j) / ||x - a_j||, taken as 0 at x = a_j.
    DenseMatrix w = DenseMatrix::Zero(dist.rows(), dist.cols());
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
      for (Eigen::Index j = 0; j < dist.cols(); ++j) {
        if (dist(i, j) > 0.0) w(i, j) = cz(i, j) / dist(i, j);
      }
    }
    DenseMatrix dx = inputs;
    dx.array().colwise() *= w.rowwise().sum().array();
    dx.noalias() -= w * archetypes_.centers;
    *d_inputs = -inv_temp * dx;
  }
  return grad;
}

Vector archetype_features(const Eigen::Ref<const Vector>& x, const ArchetypeSet& archetypes, double sigma) {
  if (x.size() != archetypes.centers.cols()) throw DimensionMismatch("input and archetype dimensions differ");
  Vector d(archetypes.centers.rows());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = (x.transpose() - archetypes.centers.row(i)).norm();
  return softmax(-d / std::exp(sigma));
}

// --- Concat / Compose ---------------------------------------------------------

Concat::Concat(std::vector<FeaturizerPtr> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw std::invalid_argument("Concat needs at least one part");
  input_dim_ = parts_.front()->input_dim();
  for (const auto& p : parts_) {
    if (p->input_dim() != input_dim_) throw DimensionMismatch("Concat parts disagree on input dimension");
    output_dim_ += p->output_dim();
    param_count_ += p->param_count();
  }
}

DenseMatrix Concat::map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  DenseMatrix out(inputs.rows(), output_dim_);
  Eigen::Index col = 0, off = 0;
  for (const auto& p : parts_) {
    out.middleCols(col, p->output_dim()) = p->map(inputs, params.segment(off, p->param_count()));
    col += p->output_dim();
    off += p->param_count();
  }
  return out;
}

Vector Concat::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                        const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);
  Vector grad(param_count_);
  if (d_inputs) *d_inputs = DenseMatrix::Zero(inputs.rows(), inputs.cols());
  Eigen::Index col = 0, off = 0;
  DenseMatrix part_dx;
  for (const auto& p : parts_) {
    grad.segment(off, p->param_count()) =
        p->pullback(inputs, params.segment(off, p->param_count()), cotangent.middleCols(col, p->output_dim()),
                    d_inputs ? &part_dx : nullptr);
    if (d_inputs) *d_inputs += part_dx;
    col += p->output_dim();
    off += p->param_count();
  }
  return grad;
}

Compose::Compose(std::vector<FeaturizerPtr> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) throw std::invalid_argument("Compose needs at least one stage");
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (i > 0 && stages_[i]->input_dim() != stages_[i - 1]->output_dim()) {
      throw DimensionMismatch("Compose stage " + std::to_string(i) + " does not accept the previous output");
    }
    param_count_ += stages_[i]->param_count();
  }
}

DenseMatrix Compose::map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const {
  check_call(*this, inputs, params);
  DenseMatrix x = inputs;
  Eigen::Index off = 0;
  for (const auto& s : stages_) {
    x = s->map(x, params.segment(off, s->param_count()));
    off += s->param_count();
  }
  return x;
}

Vector Compose::pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                         const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const {
  check_call(*this, inputs, params);
  check_cotangent(*this, inputs, cotangent);

  std::vector<DenseMatrix> stage_inputs;
  std::vector<Eigen::Index> offsets;
  stage_inputs.reserve(stages_.size());
  DenseMatrix x = inputs;
  Eigen::Index off = 0;
  for (const auto& s : stages_) {
    offsets.push_back(off);
    DenseMatrix next = s->map(x, params.segment(off, s->param_count()));
    stage_inputs.push_back(std::move(x));
    x = std::move(next);
    off += s->param_count();
  }

  Vector grad(param_count_);
  DenseMatrix cot = cotangent;
  for (std::size_t i = stages_.size(); i-- > 0;) {
    const auto& s = stages_[i];
    const bool need_dx = i > 0 || d_inputs != nullptr;
    DenseMatrix dx;
    grad.segment(offsets[i], s->param_count()) =
        s->pullback(stage_inputs[i], params.segment(offsets[i], s->param_count()), cot, need_dx ? &dx : nullptr);
    if (need_dx) cot = std::move(dx);
  }
  if (d_inputs) *d_inputs = std::move(cot);
  return grad;
}

// --- k-means ---------------------------------------------------------------------

namespace {

struct Assignment {
  std::vector<std::size_t> labels;
  std::vector<double> sq_dist;
  double objective = 0.0;
};

Assignment assign_nearest(const Eigen::Ref<const DenseMatrix>& points, const DenseMatrix& centers) {
  Assignment a;
  const auto n = static_cast<std::size_t>(points.rows());
  a.labels.resize(n);
  a.sq_dist.resize(n);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double d = (points.row(i) - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        best_c = static_cast<std::size_t>(c);
      }
    }
    a.labels[static_cast<std::size_t>(i)] = best_c;
    a.sq_dist[static_cast<std::size_t>(i)] = best;
    a.objective += best;
  }
  return a;
}

DenseMatrix seed_plus_plus(const Eigen::Ref<const DenseMatrix>& points, std::size_t k, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  DenseMatrix centers(static_cast<Eigen::Index>(k), points.cols());
  std::vector<bool> chosen(n, false);

  std::size_t first = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  centers.row(0) = points.row(static_cast<Eigen::Index>(first));
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points.row(static_cast<Eigen::Index>(i)) - centers.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a center: take the first unused one.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = true;
    centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c)))
                                  .squaredNorm());
    }
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Eigen::Ref<const DenseMatrix>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter) {
  if (k == 0 || k > static_cast<std::size_t>(points.rows())) {
    throw std::invalid_argument("kmeans needs 1 <= k <= number of points");
  }
  require_finite(points, "k-means points");

  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centers = seed_plus_plus(points, k, rng);
  Assignment current = assign_nearest(points, result.centers);
  result.objective_history.push_back(current.objective);

  const auto kk = static_cast<Eigen::Index>(k);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    DenseMatrix sums = DenseMatrix::Zero(kk, points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const std::size_t c = current.labels[static_cast<std::size_t>(i)];
      sums.row(static_cast<Eigen::Index>(c)) += points.row(i);
      ++counts[c];
    }
    std::vector<double> dist = current.sq_dist;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        result.centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
      } else {
        std::size_t far = 0;
        for (std::size_t i = 1; i < dist.size(); ++i) {
          if (dist[i] > dist[far]) far = i;
        }
        result.centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
        dist[far] = 0.0;
      }
    }

    Assignment next = assign_nearest(points, result.centers);
    result.objective_history.push_back(next.objective);
    result.iterations = it;
    const bool fixed_point = next.labels == current.labels;
    current = std::move(next);
    if (fixed_point) break;
  }
  result.assignment = std::move(current.labels);
  return result;
}

ArchetypeSet build_archetypes(const Eigen::Ref<const DenseMatrix>& points, std::span<const int> labels,
                              int classes, std::size_t k_per_class, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows()) {
    throw DimensionMismatch("label count differs from point count");
  }
  ArchetypeSet set;
  set.k_per_class = k_per_class;
  set.centers.resize(static_cast<Eigen::Index>(k_per_class) * classes, points.cols());
  for (int c = 0; c < classes; ++c) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (rows.size() < k_per_class) {
      throw std::invalid_argument("class " + std::to_string(c) + " has fewer points than k");
    }
    DenseMatrix class_points(static_cast<Eigen::Index>(rows.size()), points.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) class_points.row(static_cast<Eigen::Index>(i)) = points.row(rows[i]);
    const std::uint64_t class_seed = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(c + 1);
    const KMeansResult km = kmeans(class_points, k_per_class, class_seed);
    set.centers.middleRows(static_cast<Eigen::Index>(k_per_class) * c, static_cast<Eigen::Index>(k_per_class)) =
        km.centers;
  }
  return set;
}

// --- grid incidence ------------------------------------------------------------------

DenseMatrix grid_incidence(Eigen::Index height, Eigen::Index width) {
  if (height < 1 || width < 1) throw std::invalid_argument("grid dimensions must be positive");
  const Eigen::Index edges = height * (width - 1) + width * (height - 1);
  DenseMatrix inc = DenseMatrix::Zero(edges, height * width);
  Eigen::Index e = 0;
  for (Eigen::Index r = 0; r < height; ++r) {
    for (Eigen::Index c = 0; c + 1 < width; ++c, ++e) {
      inc(e, r * width + c) = 1.0;
      inc(e, r * width + c + 1) = -1.0;
    }
  }
  for (Eigen::Index r = 0; r + 1 < height; ++r) {
    for (Eigen::Index c = 0; c < width; ++c, ++e) {
      inc(e, r * width + c) = 1.0;
      inc(e, (r + 1) * width + c) = -1.0;
    }
  }
  return inc;
}

}  // namespace lsat::feat
