#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "rcnf/spline.hpp"

namespace rcnf {

/// Autoregressive RQ-spline flow. Layer l maps z to u with u_i = RQS(z_i; theta_{l,i}(z_{<i}));
/// theta_{l,0} is a free vector, the others come from 2x8 tanh MLPs. The dimension order
/// is reversed between consecutive layers and restored after the last one. Inputs are
/// standardised by an error scaler.
class FlowModel {
 public:
  FlowModel() = default;
  /// Identity-initialised flow (hidden weights random, output layer zero).
  FlowModel(std::size_t dim, std::size_t n_layers, const SplineConfig& spline, std::uint64_t seed);

  static constexpr std::size_t kHidden = 8;

  std::size_t dim() const { return dim_; }
  std::size_t n_layers() const { return n_layers_; }
  const SplineConfig& spline() const { return spline_; }

  const std::vector<double>& params() const { return theta_; }
  std::vector<double>& params() { return theta_; }
  std::size_t n_params() const { return theta_.size(); }

  const Eigen::VectorXd& scale_mean() const { return mean_; }
  const Eigen::VectorXd& scale_std() const { return std_; }
  void set_scaler(Eigen::VectorXd mean, Eigen::VectorXd std);

  /// One layer on standardised coordinates (no reversal): returns sum of log-derivatives.
  double layer_forward(std::size_t layer, const double* in, double* out) const;
  void layer_inverse(std::size_t layer, const double* in, double* out) const;

  /// Standardised error z -> base variable u with total logdet (layers only).
  double forward(const double* z, double* u) const;
  void inverse(const double* u, double* z) const;

  /// log p(eps) in original units, including the scaler's logdet.
  double log_density(const double* eps) const;
  double log_density(const Eigen::VectorXd& eps) const { return log_density(eps.data()); }

  /// eps = scaler^{-1}(h^{-1}(u)).
  void sample_from_base(const double* u, double* eps) const;
  /// n x d samples with u ~ N(0, I) drawn from a stream seeded by `seed`.
  Eigen::MatrixXd sample(std::size_t n, std::uint64_t seed) const;

  /// Mean negative log-likelihood of the rows of `batch` and its exact gradient.
  double nll_and_gradient(const Eigen::MatrixXd& batch, std::vector<double>* grad) const;
  /// Same over a subset of rows.
  double nll_and_gradient(const Eigen::MatrixXd& data, const std::vector<std::size_t>& rows,
                          std::vector<double>* grad) const;

  void save(std::ostream& os) const;
  static FlowModel load(std::istream& is);

 private:
  struct Block {
    std::size_t offset;
    std::size_t n_in;  // 0: free parameter vector
  };
  const Block& block(std::size_t layer, std::size_t i) const { return blocks_[layer * dim_ + i]; }
  void conditioner(const Block& b, const double* in, double* raw) const;
  double sample_nll_grad(const double* eps, double* grad, const SplineKnots* free_knots) const;
  void layout();

  std::size_t dim_ = 0;
  std::size_t n_layers_ = 0;
  SplineConfig spline_;
  std::vector<Block> blocks_;
  std::vector<double> theta_;
  Eigen::VectorXd mean_, std_;
};

struct FlowTrainConfig {
  std::size_t n_layers = 2;
  SplineConfig spline;
  std::size_t iterations = 500;
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;
};

struct FlowTrainResult {
  FlowModel model;
  std::vector<double> loss_trace;  // loss at the start of every iteration, then the final loss
};

/// Fits the scaler to the samples and minimises the NLL with Adam.
/// Throws NumericalError (message includes the iteration) on a non-finite loss.
FlowTrainResult train_flow(const Eigen::MatrixXd& samples, const FlowTrainConfig& cfg);

}  // namespace rcnf
