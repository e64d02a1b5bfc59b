#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "lsat/matrix.hpp"

namespace lsat::feat {

// Differentiable featurizer phi(u, params) applied row-wise: each row of the
// input matrix is one raw input u, each row of the output its feature vector.
class Featurizer {
 public:
  virtual ~Featurizer() = default;

  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Eigen::Index param_count() const = 0;

  virtual DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs,
                          const Eigen::Ref<const Vector>& params) const = 0;

  // Adjoint of the Jacobian of map(): given a cotangent on every output row,
  // returns the summed gradient with respect to params. When d_inputs is not
  // null it receives the cotangent on the inputs (same shape as inputs).
  virtual Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                          const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const = 0;

  // Single-input conveniences.
  Vector map_one(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& params) const;
  Vector pullback_one(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& params,
                      const Eigen::Ref<const Vector>& cotangent) const;
};

using FeaturizerPtr = std::shared_ptr<const Featurizer>;

// phi(x) = x.
class Identity final : public Featurizer {
 public:
  explicit Identity(Eigen::Index dim) : dim_(dim) {}
  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }
  Eigen::Index param_count() const override { return 0; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

 private:
  Eigen::Index dim_;
};

// phi(x) = 1 (a single constant feature, no parameters).
class Constant final : public Featurizer {
 public:
  explicit Constant(Eigen::Index input_dim, double value = 1.0) : dim_(input_dim), value_(value) {}
  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return 1; }
  Eigen::Index param_count() const override { return 0; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

 private:
  Eigen::Index dim_;
  double value_;
};

// Elementwise a*x + b, params = (a, b).
class AffineScale final : public Featurizer {
 public:
  explicit AffineScale(Eigen::Index dim) : dim_(dim) {}
  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }
  Eigen::Index param_count() const override { return 2 * dim_; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

 private:
  Eigen::Index dim_;
};

// Elementwise sgn(x - c)|x - c|^gamma, params = (c, gamma).
class PowerTransform final : public Featurizer {
 public:
  explicit PowerTransform(Eigen::Index dim) : dim_(dim) {}
  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }
  Eigen::Index param_count() const override { return 2 * dim_; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

 private:
  Eigen::Index dim_;
};

// phi(x) = T x with T (rank x dim) stored row-major in params.
class LowRank final : public Featurizer {
 public:
  // Throws DimensionMismatch unless rank < dim.
  LowRank(Eigen::Index dim, Eigen::Index rank);
  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return rank_; }
  Eigen::Index param_count() const override { return rank_ * dim_; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

 private:
  Eigen::Index dim_;
  Eigen::Index rank_;
};

// k-means cluster centers of each class; rows are grouped by class.
struct ArchetypeSet {
  DenseMatrix centers;  // (k_per_class * classes) x input_dim
  std::size_t k_per_class = 0;
};

// phi(x) = softmax(-d(x) / exp(sigma)), d(x)_i = ||x - a_i||_2; params = (sigma).
class ArchetypeSoftmax final : public Featurizer {
 public:
  explicit ArchetypeSoftmax(ArchetypeSet archetypes);
  Eigen::Index input_dim() const override { return archetypes_.centers.cols(); }
  Eigen::Index output_dim() const override { return archetypes_.centers.rows(); }
  Eigen::Index param_count() const override { return 1; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

  const ArchetypeSet& archetypes() const noexcept { return archetypes_; }

 private:
  DenseMatrix distances(const Eigen::Ref<const DenseMatrix>& inputs) const;

  ArchetypeSet archetypes_;
  Vector center_sq_norms_;
};

// Applies every part to the same input and concatenates the outputs;
// parameters are the parts' parameters concatenated in order.
class Concat final : public Featurizer {
 public:
  // Throws DimensionMismatch if the parts disagree on input_dim.
  explicit Concat(std::vector<FeaturizerPtr> parts);
  Eigen::Index input_dim() const override { return input_dim_; }
  Eigen::Index output_dim() const override { return output_dim_; }
  Eigen::Index param_count() const override { return param_count_; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

 private:
  std::vector<FeaturizerPtr> parts_;
  Eigen::Index input_dim_ = 0, output_dim_ = 0, param_count_ = 0;
};

// Feature generation chain phi = stages.back() o ... o stages.front();
// parameters are the stages' parameters concatenated front to back.
class Compose final : public Featurizer {
 public:
  // Throws DimensionMismatch if consecutive stages do not connect.
  explicit Compose(std::vector<FeaturizerPtr> stages);
  Eigen::Index input_dim() const override { return stages_.front()->input_dim(); }
  Eigen::Index output_dim() const override { return stages_.back()->output_dim(); }
  Eigen::Index param_count() const override { return param_count_; }
  DenseMatrix map(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params) const override;
  Vector pullback(const Eigen::Ref<const DenseMatrix>& inputs, const Eigen::Ref<const Vector>& params,
                  const Eigen::Ref<const DenseMatrix>& cotangent, DenseMatrix* d_inputs) const override;

 private:
  std::vector<FeaturizerPtr> stages_;
  Eigen::Index param_count_ = 0;
};

// --- scalar / vector building blocks -------------------------------------

Vector affine_scale(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& a,
                    const Eigen::Ref<const Vector>& b);

struct PowerPartials {
  double value = 0.0;
  double d_x = 0.0;
  double d_center = 0.0;
  double d_gamma = 0.0;
};

// Partials are clamped to zero where |x - c| < kPowerSingularity.
inline constexpr double kPowerSingularity = 1e-12;
double power_transform(double x, double center, double gamma);
PowerPartials power_transform_partials(double x, double center, double gamma);

Vector low_rank(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const DenseMatrix>& t);

// Max-stabilized softmax.
Vector softmax(const Eigen::Ref<const Vector>& z);
// Cotangent on z given the softmax output s and a cotangent on s.
Vector softmax_pullback(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& cotangent);

Vector archetype_features(const Eigen::Ref<const Vector>& x, const ArchetypeSet& archetypes, double sigma);

struct KMeansResult {
  DenseMatrix centers;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
  // Sum of squared distances to the nearest center after seeding and after
  // each Lloyd iteration.
  std::vector<double> objective_history;
};

// Lloyd's algorithm from a k-means++ seeding. Deterministic for a fixed seed.
// Empty clusters are re-seeded with the point farthest from its center.
// Throws std::invalid_argument unless 1 <= k <= points.rows().
KMeansResult kmeans(const Eigen::Ref<const DenseMatrix>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 100);

// k-means with k_per_class centers on the points of each label 0..classes-1.
ArchetypeSet build_archetypes(const Eigen::Ref<const DenseMatrix>& points, std::span<const int> labels,
                              int classes, std::size_t k_per_class, std::uint64_t seed);

// Edge-node incidence matrix of the 4-neighbour grid graph on a height x
// width image (nodes in row-major order). Row for edge (u, v), u < v, has
// +1 at u and -1 at v. Horizontal edges come first, then vertical ones,
// each in row-major order of u.
DenseMatrix grid_incidence(Eigen::Index height, Eigen::Index width);

}  // namespace lsat::feat
