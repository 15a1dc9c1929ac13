#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qlcd/rng.hpp"

namespace qlcd {

/// Standard deviation assigned to constant training features. The huge
/// value zeroes both the standardized input and its gradient, so
/// directions the data never exercised cannot steer descent.
inline constexpr double kDisabledSigma = 1e30;

/// Small MLP mapping a coefficient vector to a scalar tracking-cost
/// estimate. Hidden layers use ReLU, the head is linear; inputs are
/// standardized with statistics frozen at training time. When
/// `log_labels` is set the network regresses log1p(cost) and forward()
/// returns expm1 of the head, floored at zero.
///
/// Input convention: the pipeline trains and queries on sampled
/// trajectory derivatives (velocity/acceleration/jerk along each
/// segment, see feature_map), in which the same feature vector means
/// the same physical motion in every task. The network itself is
/// agnostic: it learns whatever features it was trained on.
struct TrackNetModel {
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: out_dim x in_dim
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;  // entries > 0
  bool log_labels = true;

  int input_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
  }
  /// Throws ShapeCorruption if layer shapes do not chain or sigma is
  /// invalid.
  void validate() const;
};

/// He-initialized model with the given layer widths (first entry = input
/// dimension, last must be 1). Normalization defaults to identity.
TrackNetModel make_tracknet(const std::vector<int>& dims, Rng& rng);

double forward(const TrackNetModel& model, const Eigen::VectorXd& raw_input);

/// Exact gradient of forward() w.r.t. the raw input (subgradient 0 at
/// ReLU kinks and at the output floor).
Eigen::VectorXd input_gradient(const TrackNetModel& model,
                               const Eigen::VectorXd& raw_input);

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  // L2 penalty on weights (not biases). Descent-based planning differen-
  // tiates the fitted surface off the training manifold, so a smooth fit
  // matters more here than the last decimal of validation loss.
  double weight_decay = 1e-4;
  int epochs = 200;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
  bool log_labels = true;
  std::vector<int> hidden = {100, 100, 20};

  /// Throws DimensionMismatch on invalid settings.
  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch, transformed-label MSE
  std::vector<double> val_loss;    // per epoch (epoch 0 = before training)
  double val_spearman = 0.0;       // on forward() outputs vs raw labels
  std::vector<int> train_indices;
  std::vector<int> val_indices;
};

/// Trains on rows of X (one sample per row) against nonnegative labels y.
/// Splits off a validation set with the config seed, standardizes on the
/// training split only, and runs minibatch SGD with momentum on the MSE
/// of (optionally log1p-transformed) labels. Throws InsufficientData for
/// fewer than 100 usable records and NonFiniteLoss on divergence.
std::pair<TrackNetModel, TrainReport> train(const Eigen::MatrixXd& X,
                                            const Eigen::VectorXd& y,
                                            const TrainConfig& config);

/// Spearman rank correlation (average ranks on ties).
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Binary model format, bit-exact round trip. Throws
/// FormatVersionMismatch, ShapeCorruption, IoFailure.
void save_model(const TrackNetModel& model, const std::filesystem::path& path);
TrackNetModel load_model(const std::filesystem::path& path);

}  // namespace qlcd
