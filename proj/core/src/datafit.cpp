#include "lsat/datafit.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lsat/dense_ls.hpp"
#include "lsat/errors.hpp"

namespace lsat::fit {

void Dataset::validate() const {
  if (targets.rows() != inputs.rows()) {
    throw DimensionMismatch("dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                            std::to_string(targets.rows()) + " targets");
  }
  require_finite(inputs, "dataset inputs");
  require_finite(targets, "dataset targets");
}

void Dataset::require_one_hot() const {
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    const auto row = targets.row(i);
    if ((row.array() == 0.0).count() != row.size() - 1 || row.sum() != 1.0) {
      throw std::invalid_argument("target row " + std::to_string(i) + " is not one-hot");
    }
  }
}

void Penalty::validate() const {
  if ((kind == Kind::huber || kind == Kind::bisquare) && !(std::isfinite(m) && m > 0.0)) {
    throw std::invalid_argument("penalty knee M must be finite and positive");
  }
}

const char* to_string(Penalty::Kind kind) noexcept {
  switch (kind) {
    case Penalty::Kind::square: return "square";
    case Penalty::Kind::huber: return "huber";
    case Penalty::Kind::bisquare: return "bisquare";
    case Penalty::Kind::cross_entropy: return "cross_entropy";
  }
  return "unknown";
}

namespace {

double log_sum_exp(const Eigen::Ref<const Vector>& z) {
  const double mx = z.maxCoeff();
  return mx + std::log((z.array() - mx).exp().sum());
}

void check_pair(const Eigen::Ref<const Vector>& yhat, const Eigen::Ref<const Vector>& y) {
  if (yhat.size() != y.size()) throw DimensionMismatch("prediction and target lengths differ");
}

}  // namespace

double penalty_value(const Penalty& pen, const Eigen::Ref<const Vector>& yhat, const Eigen::Ref<const Vector>& y) {
  check_pair(yhat, y);
  const double m = pen.m;
  switch (pen.kind) {
    case Penalty::Kind::square:
      return (yhat - y).squaredNorm();
    case Penalty::Kind::huber: {
      const double norm = (yhat - y).norm();
      return norm <= m ? norm * norm : m * (2.0 * norm - m);
    }
    case Penalty::Kind::bisquare: {
      const double sq = (yhat - y).squaredNorm();
      if (sq > m * m) return m * m / 6.0;
      const double u = 1.0 - sq / (m * m);
      return m * m / 6.0 * (1.0 - u * u * u);
    }
    case Penalty::Kind::cross_entropy:
      return log_sum_exp(yhat) - y.dot(yhat);
  }
  return 0.0;
}

Vector penalty_grad(const Penalty& pen, const Eigen::Ref<const Vector>& yhat, const Eigen::Ref<const Vector>& y) {
  check_pair(yhat, y);
  const double m = pen.m;
  const Vector r = yhat - y;
  switch (pen.kind) {
    case Penalty::Kind::square:
      return 2.0 * r;
    case Penalty::Kind::huber: {
      const double norm = r.norm();
      return norm <= m ? Vector(2.0 * r) : Vector(2.0 * m / norm * r);
    }
    case Penalty::Kind::bisquare: {
      const double sq = r.squaredNorm();
      if (sq > m * m) return Vector::Zero(r.size());
      const double u = 1.0 - sq / (m * m);
      return u * u * r;
    }
    case Penalty::Kind::cross_entropy:
      return feat::softmax(yhat) - y;
  }
  return Vector::Zero(r.size());
}

void FitProblem::validate() const {
  if (!featurizer) throw std::invalid_argument("fit problem has no featurizer");
  train.validate();
  val.validate();
  penalty.validate();
  if (train.inputs.cols() != featurizer->input_dim() || val.inputs.cols() != featurizer->input_dim()) {
    throw DimensionMismatch("featurizer input dimension differs from the data");
  }
  if (val.targets.cols() != train.targets.cols()) throw DimensionMismatch("train and validation target widths differ");
  for (const auto& r : reg_terms) {
    if (r.matrix.cols() != featurizer->output_dim()) {
      throw DimensionMismatch("regularizer '" + r.label + "' has " + std::to_string(r.matrix.cols()) +
                              " columns, features have " + std::to_string(featurizer->output_dim()));
    }
  }
}

HyperVector layout(const FitProblem& p) {
  return HyperVector::zeros(p.featurizer->param_count(), p.tune_data_weights ? p.train.rows() : 0,
                            p.tune_reg_weights ? static_cast<Eigen::Index>(p.reg_terms.size()) : 0);
}

namespace {

struct Weights {
  Vector feat;
  Vector data;  // one per training row
  Vector reg;   // one per term
};

Weights unpack(const FitProblem& p, const HyperVector& omega) {
  const HyperVector expected = layout(p);
  if (omega.segments().size() != expected.segments().size()) {
    throw DimensionMismatch("hyper-parameter layout does not match the fit problem");
  }
  for (std::size_t i = 0; i < expected.segments().size(); ++i) {
    const Segment& a = omega.segments()[i];
    const Segment& b = expected.segments()[i];
    if (a.name != b.name || a.length != b.length) {
      throw DimensionMismatch("hyper-parameter segment '" + a.name + "' does not match the fit problem");
    }
  }
  Weights w;
  w.feat = omega.segment("feat");
  w.data = p.tune_data_weights ? Vector(omega.segment("data").array().exp()) : Vector::Ones(p.train.rows());
  w.reg = p.tune_reg_weights ? Vector(omega.segment("reg").array().exp())
                             : Vector::Ones(static_cast<Eigen::Index>(p.reg_terms.size()));
  return w;
}

Eigen::Index reg_rows(const FitProblem& p) {
  Eigen::Index rows = 0;
  for (const auto& r : p.reg_terms) rows += r.matrix.rows();
  return rows;
}

Assembly assemble_weighted(const FitProblem& p, const Weights& w) {
  const Eigen::Index n_train = p.train.rows();
  const Eigen::Index n = p.featurizer->output_dim();
  const Eigen::Index m = p.train.targets.cols();
  Assembly out;
  out.a.resize(n_train + reg_rows(p), n);
  out.b = DenseMatrix::Zero(out.a.rows(), m);

  out.a.topRows(n_train) = p.featurizer->map(p.train.inputs, w.feat);
  out.a.topRows(n_train).array().colwise() *= w.data.array();
  out.b.topRows(n_train) = p.train.targets;
  out.b.topRows(n_train).array().colwise() *= w.data.array();

  Eigen::Index row = n_train;
  for (std::size_t j = 0; j < p.reg_terms.size(); ++j) {
    const DenseMatrix& r = p.reg_terms[j].matrix;
    out.a.middleRows(row, r.rows()) = w.reg[static_cast<Eigen::Index>(j)] * r;
    row += r.rows();
  }
  return out;
}

}  // namespace

Assembly assemble(const FitProblem& p, const HyperVector& omega) {
  p.validate();
  return assemble_weighted(p, unpack(p, omega));
}

DenseMatrix fit_theta(const FitProblem& p, const HyperVector& omega) {
  Assembly sys = assemble(p, omega);
  return dense::solve(std::move(sys.a), std::move(sys.b)).theta();
}

FitEvaluation objective_and_gradient(const FitProblem& p, const HyperVector& omega) {
  p.validate();
  const Weights w = unpack(p, omega);
  Assembly sys = assemble_weighted(p, w);
  const dense::LsFactorization f = dense::solve(std::move(sys.a), std::move(sys.b));

  FitEvaluation ev;
  ev.theta = f.theta();

  // Validation loss and its cotangent L on the predictions.
  const Eigen::Index n_val = p.val.rows();
  const DenseMatrix phi_val = p.featurizer->map(p.val.inputs, w.feat);
  const DenseMatrix yhat = phi_val * ev.theta;
  DenseMatrix l_cot(n_val, yhat.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n_val; ++i) {
    const Vector yh = yhat.row(i).transpose();
    const Vector y = p.val.targets.row(i).transpose();
    total += penalty_value(p.penalty, yh, y);
    l_cot.row(i) = penalty_grad(p.penalty, yh, y).transpose() / static_cast<double>(n_val);
  }
  ev.psi = total / static_cast<double>(n_val);

  const DenseMatrix d_theta = phi_val.transpose() * l_cot;
  const dense::LsGradients grads = dense::backward(f, d_theta);

  const HyperVector lay = layout(p);
  ev.gradient = Vector::Zero(lay.size());
  const Eigen::Index n_train = p.train.rows();
  const DenseMatrix& a = f.a();
  const DenseMatrix& b = f.b();

  if (const Segment* s = lay.find("data"); s && s->length > 0) {
    for (Eigen::Index i = 0; i < n_train; ++i) {
      ev.gradient[s->offset + i] = grads.d_a.row(i).dot(a.row(i)) + grads.d_b.row(i).dot(b.row(i));
    }
  }
  if (const Segment* s = lay.find("reg"); s && s->length > 0) {
    Eigen::Index row = n_train;
    for (std::size_t j = 0; j < p.reg_terms.size(); ++j) {
      const Eigen::Index r = p.reg_terms[j].matrix.rows();
      ev.gradient[s->offset + static_cast<Eigen::Index>(j)] =
          (grads.d_a.middleRows(row, r).array() * a.middleRows(row, r).array()).sum();
      row += r;
    }
  }
  if (const Segment* s = lay.find("feat"); s && s->length > 0) {
    DenseMatrix train_cot = grads.d_a.topRows(n_train);
    train_cot.array().colwise() *= w.data.array();
    const DenseMatrix val_cot = l_cot * ev.theta.transpose();
    ev.gradient.segment(s->offset, s->length) =
        p.featurizer->pullback(p.train.inputs, w.feat, train_cot, nullptr) +
        p.featurizer->pullback(p.val.inputs, w.feat, val_cot, nullptr);
  }
  return ev;
}

double mean_loss(const Penalty& pen, const DenseMatrix& theta, const feat::Featurizer& featurizer,
                 const Eigen::Ref<const Vector>& omega_feat, const Dataset& data) {
  if (data.rows() == 0) return 0.0;
  const DenseMatrix yhat = featurizer.map(data.inputs, omega_feat) * theta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    total += penalty_value(pen, yhat.row(i).transpose(), data.targets.row(i).transpose());
  }
  return total / static_cast<double>(data.rows());
}

Eigen::Index argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double test_error(const DenseMatrix& theta, const feat::Featurizer& featurizer,
                  const Eigen::Ref<const Vector>& omega_feat, const Dataset& test) {
  if (test.rows() == 0) return 0.0;
  const DenseMatrix yhat = featurizer.map(test.inputs, omega_feat) * theta;
  if (yhat.cols() != test.targets.cols()) throw DimensionMismatch("prediction and target widths differ");
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    if (argmax(yhat.row(i).transpose()) != argmax(test.targets.row(i).transpose())) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.rows());
}

}  // namespace lsat::fit
