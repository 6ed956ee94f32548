#include "icr/elm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "icr/errors.hpp"

namespace icr {
namespace {

// Fixed row-block size for the parallel hidden-matrix kernel. Blocks depend
// only on the row count, so every worker count yields the same floating-point
// evaluation order.
constexpr Eigen::Index kRowBlock = 64;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_layer_input(const HiddenLayer& layer, const Matrix& x) {
  if (x.cols() != layer.features()) {
    throw DimensionMismatch("input has " + std::to_string(x.cols()) + " features, layer expects " +
                            std::to_string(layer.features()));
  }
}

Matrix solve_spd(const Matrix& kmat, const Matrix& rhs) {
  Eigen::LLT<Matrix> llt(kmat);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("Gram matrix is not positive definite; use a positive ridge");
  }
  // A numerically rank-deficient design can still pass LLT with a tiny pivot.
  const auto diag = llt.matrixLLT().diagonal();
  const double max_diag = kmat.diagonal().maxCoeff();
  const double min_pivot = diag.minCoeff();
  if (!(min_pivot * min_pivot > static_cast<double>(kmat.rows()) *
                                    std::numeric_limits<double>::epsilon() * max_diag)) {
    throw SingularSystem("Gram matrix is numerically singular; use a positive ridge");
  }
  return llt.solve(rhs);
}

Matrix gram(const Matrix& h) {
  Matrix g = Matrix::Zero(h.cols(), h.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(h.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

}  // namespace

HiddenLayer init_hidden_layer(Eigen::Index n_features, Eigen::Index k_nodes, std::uint64_t seed) {
  if (n_features < 1 || k_nodes < 1) {
    throw InvalidArgument("hidden layer needs n_features >= 1 and k_nodes >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  HiddenLayer layer;
  layer.weights.resize(k_nodes, n_features);
  layer.biases.resize(k_nodes);
  for (Eigen::Index k = 0; k < k_nodes; ++k) {
    for (Eigen::Index j = 0; j < n_features; ++j) layer.weights(k, j) = uniform(rng);
  }
  for (Eigen::Index k = 0; k < k_nodes; ++k) layer.biases(k) = uniform(rng);
  return layer;
}

Matrix hidden_matrix(const HiddenLayer& layer, const Matrix& x) {
  check_layer_input(layer, x);
  const Eigen::Index n = x.rows();
  Matrix h(n, layer.nodes());
  const Eigen::Index blocks = (n + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index begin = blk * kRowBlock;
    const Eigen::Index rows = std::min(kRowBlock, n - begin);
    Matrix z = x.middleRows(begin, rows) * layer.weights.transpose();
    z.rowwise() += layer.biases.transpose();
    h.middleRows(begin, rows) = z.unaryExpr([](double v) { return sigmoid(v); });
  }
  return h;
}

Matrix hidden_matrix_reference(const HiddenLayer& layer, const Matrix& x) {
  check_layer_input(layer, x);
  Matrix h(x.rows(), layer.nodes());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < layer.nodes(); ++k) {
      double z = layer.biases(k);
      for (Eigen::Index j = 0; j < x.cols(); ++j) z += layer.weights(k, j) * x(i, j);
      h(i, k) = sigmoid(z);
    }
  }
  return h;
}

ElmModel batch_train_hidden(const HiddenLayer& layer, const Matrix& h, const Matrix& y, double ridge) {
  if (h.rows() < 1) throw InvalidArgument("batch_train needs at least one row");
  if (h.rows() != y.rows()) throw DimensionMismatch("design and target row counts differ");
  if (h.cols() != layer.nodes()) throw DimensionMismatch("hidden matrix width differs from node count");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidArgument("ridge must be finite and >= 0");
  if (!h.allFinite() || !y.allFinite()) throw InvalidArgument("non-finite training data");

  ElmModel model;
  model.layer = layer;
  model.ridge = ridge;
  model.kmat = gram(h);
  model.kmat.diagonal().array() += ridge;
  model.beta = solve_spd(model.kmat, h.transpose() * y);
  model.samples_seen = static_cast<std::uint64_t>(h.rows());
  return model;
}

ElmModel batch_train(const HiddenLayer& layer, const Matrix& x, const Matrix& y, double ridge) {
  if (x.rows() != y.rows()) throw DimensionMismatch("input and target row counts differ");
  return batch_train_hidden(layer, hidden_matrix(layer, x), y, ridge);
}

ElmModel incremental_update_hidden(const ElmModel& model, const Matrix& h_new, const Matrix& y_new) {
  if (h_new.rows() != y_new.rows()) throw DimensionMismatch("update design and target row counts differ");
  if (h_new.rows() == 0) return model;
  if (h_new.cols() != model.layer.nodes()) throw DimensionMismatch("update hidden width differs from node count");
  if (y_new.cols() != model.outputs()) {
    throw DimensionMismatch("update has " + std::to_string(y_new.cols()) + " outputs, model has " +
                            std::to_string(model.outputs()));
  }
  if (!h_new.allFinite() || !y_new.allFinite()) throw InvalidArgument("non-finite update data");

  ElmModel next = model;
  next.kmat += gram(h_new);
  // exact symmetry, independent of accumulation order inside gram()
  next.kmat = 0.5 * (next.kmat + next.kmat.transpose()).eval();
  const Matrix residual = y_new - h_new * model.beta;
  next.beta += solve_spd(next.kmat, h_new.transpose() * residual);
  next.samples_seen += static_cast<std::uint64_t>(h_new.rows());
  return next;
}

ElmModel incremental_update(const ElmModel& model, const Matrix& x_new, const Matrix& y_new) {
  if (x_new.rows() != y_new.rows()) throw DimensionMismatch("update input and target row counts differ");
  if (x_new.rows() == 0) return model;
  if (!x_new.allFinite()) throw InvalidArgument("non-finite update inputs");
  return incremental_update_hidden(model, hidden_matrix(model.layer, x_new), y_new);
}

Matrix predict(const ElmModel& model, const Matrix& x) {
  return hidden_matrix(model.layer, x) * model.beta;
}

double normal_equation_residual(const ElmModel& model, const Matrix& h, const Matrix& y) {
  const Matrix rhs = h.transpose() * y;
  const double denom = rhs.norm();
  const double num = (model.kmat * model.beta - rhs).norm();
  return denom > 0.0 ? num / denom : num;
}

}  // namespace icr
