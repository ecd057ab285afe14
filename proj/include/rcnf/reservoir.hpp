#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcnf/ensemble.hpp"

namespace rcnf {

/// Reservoir hyperparameters. Ranges: rho, chi in [0.3, 1.5], k in 1..5,
/// alpha in [0.05, 1], lambda in [1e-10, 1].
struct RCHyper {
  double rho = 0.9;
  int k = 3;
  double chi = 1.0;
  double alpha = 1.0;
  double lambda = 1e-6;

  /// Throws ValidationError naming the offending field when outside the search box.
  void validate_ranges() const;
};

enum class Variant { kRc, kEsn };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);

/// Compressed sparse row matrix.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<std::uint32_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }
  /// y = A x
  void multiply(const double* x, double* y) const;
  void scale(double s);
  Eigen::MatrixXd to_dense() const;
  static SparseMatrix from_dense(const Eigen::MatrixXd& m);
};

struct SpectralOptions {
  double tol = 1e-10;
  std::uint64_t seed = 0x5eed;
};

/// Largest eigenvalue modulus. Arnoldi with full reorthogonalisation on a growing
/// Krylov subspace; the subspace reaches the full dimension in the worst case.
double spectral_radius(const SparseMatrix& a, const SpectralOptions& opt = {});

class ReservoirModel {
 public:
  ReservoirModel() = default;

  std::size_t n_nodes() const { return n_; }
  std::size_t dim() const { return d_; }
  Variant variant() const { return variant_; }
  const RCHyper& hyper() const { return hyper_; }
  /// Leak used by the update rule (1 for the esn variant).
  double leak() const { return variant_ == Variant::kEsn ? 1.0 : hyper_.alpha; }

  const SparseMatrix& adjacency() const { return a_; }
  const Eigen::MatrixXd& w_in() const { return w_in_; }
  const Eigen::VectorXd& zeta() const { return zeta_; }

  bool trained() const { return w_out_.size() > 0; }
  const Eigen::MatrixXd& w_out() const { return w_out_; }
  void set_w_out(Eigen::MatrixXd w);

  /// Length of a readout feature vector: 1 + d + N (rc) or N (esn).
  std::size_t feature_dim() const { return variant_ == Variant::kEsn ? n_ : 1 + d_ + n_; }

  /// r <- next reservoir state driven by input x. scratch must hold N doubles.
  void advance(double* r, const double* x, double* scratch) const;
  void features(const double* x_prev, const double* r, double* out) const;
  /// X_hat = W_out [1; x_prev; r] (or W_out r for esn).
  void readout(const double* x_prev, const double* r, double* out) const;

  void save(std::ostream& os) const;
  static ReservoirModel load(std::istream& is);

  friend ReservoirModel build_reservoir(const RCHyper&, std::size_t, std::size_t, std::uint64_t, Variant);
  friend ReservoirModel make_reservoir(SparseMatrix, Eigen::MatrixXd, Eigen::VectorXd, const RCHyper&, Variant);

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  Variant variant_ = Variant::kRc;
  RCHyper hyper_;
  SparseMatrix a_;
  Eigen::MatrixXd w_in_;
  Eigen::VectorXd zeta_;
  Eigen::MatrixXd w_out_;
};

/// Random Erdos-Renyi adjacency with edge probability k/N (self-loops allowed),
/// U[-1, 1] weights rescaled to spectral radius rho; W_in, zeta ~ U[-chi/2, chi/2].
ReservoirModel build_reservoir(const RCHyper& h, std::size_t n_nodes, std::size_t dim, std::uint64_t seed,
                               Variant variant = Variant::kRc);

/// Assemble a model from explicit matrices (tests and toy problems).
ReservoirModel make_reservoir(SparseMatrix a, Eigen::MatrixXd w_in, Eigen::VectorXd zeta, const RCHyper& h,
                              Variant variant = Variant::kRc);

/// States r_1..r_L for inputs X_0..X_{L-1}, starting from r0; row t is r_{t+1}.
Eigen::MatrixXd evolve_states(const ReservoirModel& model, const Eigen::MatrixXd& traj, const Eigen::VectorXd& r0);

struct ReadoutDiagnostics {
  double relative_residual = 0.0;  // ||W (RR^T + lambda I) - Y R^T||_F / ||Y R^T||_F
  std::size_t n_samples = 0;
};

/// Ridge readout over targets X_t, t in (warm, T-1], pooled across trajectories with the
/// reservoir reset to zero at each trajectory start.
ReadoutDiagnostics fit_readout(ReservoirModel& model, const EnsembleView& train, std::size_t warm);

/// One-step prediction.
Eigen::VectorXd one_step(const ReservoirModel& model, const Eigen::VectorXd& x_prev, const Eigen::VectorXd& r);

/// Teacher-forced one-step errors X_t - X_hat_t over the same targets fit_readout uses.
/// Rows are samples ordered by trajectory then time.
Eigen::MatrixXd collect_errors(const ReservoirModel& model, const EnsembleView& train, std::size_t warm);

/// Warm the reservoir from zero on `warmup` (rows are states), then close the loop for
/// `horizon` steps. Throws DivergenceError(0, step) if a component exceeds 1e12.
Eigen::MatrixXd rolling_forecast_deterministic(const ReservoirModel& model, const Eigen::MatrixXd& warmup,
                                               std::size_t horizon);

}  // namespace rcnf
