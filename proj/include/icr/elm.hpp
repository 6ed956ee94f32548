#pragma once

// Single-hidden-layer random-feature regression (extreme learning machine).
//
// Only the output weights are learned. The model keeps the Gram accumulator
//   kmat = ridge * I + sum over all seen rows of h h^T
// so new rows can be folded in without revisiting old data:
//   kmat'  = kmat + H_new^T H_new
//   beta'  = beta + kmat'^{-1} H_new^T (Y_new - H_new beta)
// Every solve re-factorizes kmat with Cholesky; the inverse is never stored.

#include <cstdint>

#include <Eigen/Core>

namespace icr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint32_t { Sigmoid = 0 };

struct HiddenLayer {
  Matrix weights;  // k_nodes x n_features
  Vector biases;   // k_nodes
  Activation activation = Activation::Sigmoid;

  Eigen::Index nodes() const { return weights.rows(); }
  Eigen::Index features() const { return weights.cols(); }
};

struct ElmModel {
  HiddenLayer layer;
  Matrix beta;  // k_nodes x outputs
  Matrix kmat;  // k_nodes x k_nodes
  double ridge = 0.0;
  std::uint64_t samples_seen = 0;

  Eigen::Index outputs() const { return beta.cols(); }
};

inline constexpr double kDefaultRidge = 1.0;

/// Hidden weights and biases i.i.d. uniform on [-1, 1], deterministic in seed.
HiddenLayer init_hidden_layer(Eigen::Index n_features, Eigen::Index k_nodes, std::uint64_t seed);

/// H(i, k) = sigmoid(a_k . x_i + b_k). Rows are processed in fixed-size blocks
/// across OpenMP workers; output is identical for any worker count.
Matrix hidden_matrix(const HiddenLayer& layer, const Matrix& x);

/// Serial scalar-loop evaluation of hidden_matrix, kept as a test oracle and
/// benchmark baseline.
Matrix hidden_matrix_reference(const HiddenLayer& layer, const Matrix& x);

/// Fits beta from scratch: kmat = H^T H + ridge I, kmat beta = H^T Y.
ElmModel batch_train(const HiddenLayer& layer, const Matrix& x, const Matrix& y, double ridge);

/// Same as batch_train but takes a precomputed hidden matrix.
ElmModel batch_train_hidden(const HiddenLayer& layer, const Matrix& h, const Matrix& y, double ridge);

/// Folds new rows into an existing model. An empty batch returns the model unchanged.
ElmModel incremental_update(const ElmModel& model, const Matrix& x_new, const Matrix& y_new);

ElmModel incremental_update_hidden(const ElmModel& model, const Matrix& h_new, const Matrix& y_new);

Matrix predict(const ElmModel& model, const Matrix& x);

/// ||kmat beta - H^T Y|| / ||H^T Y|| for a given design; diagnostic only.
double normal_equation_residual(const ElmModel& model, const Matrix& h, const Matrix& y);

}  // namespace icr
