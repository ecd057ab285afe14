#include "rcnf/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rcnf/binary_io.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/kernels.hpp"
#include "rcnf/parallel.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {

void RCHyper::validate_ranges() const {
  auto fail = [](const std::string& field, double v, const std::string& range) {
    std::ostringstream msg;
    msg << "hyperparameter " << field << " = " << v << " outside " << range;
    throw ValidationError(msg.str());
  };
  if (!(rho >= 0.3 && rho <= 1.5)) fail("rho", rho, "[0.3, 1.5]");
  if (k < 1 || k > 5) fail("k", k, "{1, ..., 5}");
  if (!(chi >= 0.3 && chi <= 1.5)) fail("chi", chi, "[0.3, 1.5]");
  if (!(alpha >= 0.05 && alpha <= 1.0)) fail("alpha", alpha, "[0.05, 1]");
  if (!(lambda >= 1e-10 && lambda <= 1.0)) fail("lambda", lambda, "[1e-10, 1]");
}

std::string variant_name(Variant v) { return v == Variant::kEsn ? "esn" : "rc"; }

Variant parse_variant(const std::string& s) {
  if (s == "rc") return Variant::kRc;
  if (s == "esn") return Variant::kEsn;
  throw ValidationError("unknown reservoir variant '" + s + "' (expected rc or esn)");
}

void SparseMatrix::multiply(const double* x, double* y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::uint32_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += val[e] * x[col[e]];
    y[i] = s;
  }
}

void SparseMatrix::scale(double s) {
  for (double& v : val) v *= s;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::uint32_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) m(static_cast<Eigen::Index>(i), col[e]) = val[e];
  return m;
}

SparseMatrix SparseMatrix::from_dense(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ValidationError("adjacency must be square");
  SparseMatrix s;
  s.n = static_cast<std::size_t>(m.rows());
  s.row_ptr.assign(s.n + 1, 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) {
        s.col.push_back(static_cast<std::uint32_t>(j));
        s.val.push_back(m(i, j));
      }
    s.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<std::uint32_t>(s.val.size());
  }
  return s;
}

void ReservoirModel::set_w_out(Eigen::MatrixXd w) {
  if (w.rows() != static_cast<Eigen::Index>(d_) || w.cols() != static_cast<Eigen::Index>(feature_dim()))
    throw ValidationError("W_out has the wrong shape");
  w_out_ = std::move(w);
}

void ReservoirModel::advance(double* r, const double* x, double* scratch) const {
  a_.multiply(r, scratch);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < d_; ++i) k.axpy(x[i], w_in_.col(static_cast<Eigen::Index>(i)).data(), scratch, n_);
  for (std::size_t j = 0; j < n_; ++j) scratch[j] += zeta_[static_cast<Eigen::Index>(j)];
  k.leaky_tanh(r, scratch, leak(), n_);
}

void ReservoirModel::features(const double* x_prev, const double* r, double* out) const {
  if (variant_ == Variant::kEsn) {
    std::copy(r, r + n_, out);
    return;
  }
  out[0] = 1.0;
  std::copy(x_prev, x_prev + d_, out + 1);
  std::copy(r, r + n_, out + 1 + d_);
}

void ReservoirModel::readout(const double* x_prev, const double* r, double* out) const {
  if (!trained()) throw ValidationError("reservoir readout is not trained");
  const auto& k = kernels::active();
  // W_out is column-major d x F; accumulate column blocks.
  for (std::size_t i = 0; i < d_; ++i) out[i] = 0.0;
  std::size_t c = 0;
  auto add_col = [&](double coef) {
    const double* w = w_out_.col(static_cast<Eigen::Index>(c++)).data();
    for (std::size_t i = 0; i < d_; ++i) out[i] += coef * w[i];
  };
  if (variant_ == Variant::kRc) {
    add_col(1.0);
    for (std::size_t i = 0; i < d_; ++i) add_col(x_prev[i]);
  }
  if (d_ == 1) {
    out[0] += k.dot(w_out_.data() + c, r, n_);
  } else {
    for (std::size_t j = 0; j < n_; ++j) add_col(r[j]);
  }
}

ReservoirModel make_reservoir(SparseMatrix a, Eigen::MatrixXd w_in, Eigen::VectorXd zeta, const RCHyper& h,
                              Variant variant) {
  if (a.row_ptr.size() != a.n + 1) throw ValidationError("malformed adjacency");
  if (w_in.rows() != static_cast<Eigen::Index>(a.n) || zeta.size() != static_cast<Eigen::Index>(a.n))
    throw ValidationError("W_in / zeta do not match the adjacency size");
  ReservoirModel m;
  m.n_ = a.n;
  m.d_ = static_cast<std::size_t>(w_in.cols());
  m.variant_ = variant;
  m.hyper_ = h;
  m.a_ = std::move(a);
  m.w_in_ = std::move(w_in);
  m.zeta_ = std::move(zeta);
  return m;
}

ReservoirModel build_reservoir(const RCHyper& h, std::size_t n_nodes, std::size_t dim, std::uint64_t seed,
                               Variant variant) {
  if (n_nodes == 0 || dim == 0) throw ValidationError("reservoir needs N >= 1 and d >= 1");
  if (!(h.rho >= 0) || h.k < 1 || !(h.chi >= 0) || !(h.alpha >= 0 && h.alpha <= 1) || !(h.lambda > 0))
    throw ValidationError("invalid reservoir hyperparameters");
  const double p = std::min(1.0, static_cast<double>(h.k) / static_cast<double>(n_nodes));
  constexpr int kRetries = 8;
  for (int attempt = 0; attempt <= kRetries; ++attempt) {
    Engine eng = make_engine(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> weight(-1.0, 1.0);
    SparseMatrix a;
    a.n = n_nodes;
    a.row_ptr.assign(n_nodes + 1, 0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      for (std::size_t j = 0; j < n_nodes; ++j) {
        if (u01(eng) >= p) continue;
        const double w = weight(eng);
        if (w == 0.0) continue;
        a.col.push_back(static_cast<std::uint32_t>(j));
        a.val.push_back(w);
      }
      a.row_ptr[i + 1] = static_cast<std::uint32_t>(a.val.size());
    }
    const double radius = a.nnz() ? spectral_radius(a) : 0.0;
    if (!(radius > 1e-12)) continue;
    a.scale(h.rho / radius);

    Eigen::MatrixXd w_in = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_nodes), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd zeta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_nodes));
    if (h.chi > 0) {
      std::uniform_real_distribution<double> in(-h.chi / 2, h.chi / 2);
      for (Eigen::Index i = 0; i < w_in.rows(); ++i)
        for (Eigen::Index j = 0; j < w_in.cols(); ++j) w_in(i, j) = in(eng);
      for (Eigen::Index i = 0; i < zeta.size(); ++i) zeta[i] = in(eng);
    }
    return make_reservoir(std::move(a), std::move(w_in), std::move(zeta), h, variant);
  }
  throw NumericalError("reservoir adjacency had zero spectral radius in " + std::to_string(kRetries + 1) +
                       " draws; increase k or N");
}

Eigen::MatrixXd evolve_states(const ReservoirModel& model, const Eigen::MatrixXd& traj, const Eigen::VectorXd& r0) {
  const auto n = static_cast<Eigen::Index>(model.n_nodes());
  if (traj.cols() != static_cast<Eigen::Index>(model.dim())) throw ValidationError("input dimension mismatch");
  if (r0.size() != n) throw ValidationError("initial state has the wrong length");
  Eigen::MatrixXd out(traj.rows(), n);
  Eigen::VectorXd r = r0, scratch(n), x(traj.cols());
  for (Eigen::Index t = 0; t < traj.rows(); ++t) {
    x = traj.row(t).transpose();
    model.advance(r.data(), x.data(), scratch.data());
    out.row(t) = r.transpose();
  }
  return out;
}

Eigen::VectorXd one_step(const ReservoirModel& model, const Eigen::VectorXd& x_prev, const Eigen::VectorXd& r) {
  if (x_prev.size() != static_cast<Eigen::Index>(model.dim()) || r.size() != static_cast<Eigen::Index>(model.n_nodes()))
    throw ValidationError("one_step: dimension mismatch");
  Eigen::VectorXd out(x_prev.size());
  model.readout(x_prev.data(), r.data(), out.data());
  return out;
}

namespace {

constexpr std::size_t kChunkCols = 256;
constexpr std::size_t kReductionGroups = 4;  // fixed so results do not depend on thread count

struct GramAccumulator {
  std::size_t f_dim, d;
  std::vector<double> gram;   // f_dim x f_dim, lower triangle
  std::vector<double> cross;  // d x f_dim
  std::vector<double> fchunk; // f_dim x kChunkCols
  std::vector<double> ychunk; // d x kChunkCols
  std::size_t fill = 0;
  std::size_t samples = 0;

  GramAccumulator(std::size_t f, std::size_t dd)
      : f_dim(f), d(dd), gram(f * f, 0.0), cross(dd * f, 0.0), fchunk(f * kChunkCols), ychunk(dd * kChunkCols) {}

  void push(const double* feat, const double* y) {
    for (std::size_t k = 0; k < f_dim; ++k) fchunk[k * kChunkCols + fill] = feat[k];
    for (std::size_t i = 0; i < d; ++i) ychunk[i * kChunkCols + fill] = y[i];
    ++samples;
    if (++fill == kChunkCols) flush();
  }

  void flush() {
    if (fill == 0) return;
    if (fill < kChunkCols) {
      for (std::size_t k = 0; k < f_dim; ++k)
        std::fill(fchunk.begin() + static_cast<std::ptrdiff_t>(k * kChunkCols + fill),
                  fchunk.begin() + static_cast<std::ptrdiff_t>((k + 1) * kChunkCols), 0.0);
      for (std::size_t i = 0; i < d; ++i)
        std::fill(ychunk.begin() + static_cast<std::ptrdiff_t>(i * kChunkCols + fill),
                  ychunk.begin() + static_cast<std::ptrdiff_t>((i + 1) * kChunkCols), 0.0);
    }
    const auto& k = kernels::active();
    k.gram_lower(fchunk.data(), f_dim, kChunkCols, gram.data());
    k.cross(ychunk.data(), d, fchunk.data(), f_dim, kChunkCols, cross.data());
    fill = 0;
  }
};

}  // namespace

ReadoutDiagnostics fit_readout(ReservoirModel& model, const EnsembleView& train, std::size_t warm) {
  if (train.dim != model.dim()) throw ValidationError("training data dimension does not match the reservoir");
  if (train.length <= warm + 1) throw ValidationError("training length must exceed warm-up + 1");
  const std::size_t n = model.n_nodes(), d = model.dim(), f = model.feature_dim();
  const std::size_t groups = std::min(kReductionGroups, train.n_traj);

  std::vector<GramAccumulator> acc;
  acc.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) acc.emplace_back(f, d);

  parallel_for(groups, [&](std::size_t g) {
    const std::size_t m_lo = g * train.n_traj / groups, m_hi = (g + 1) * train.n_traj / groups;
    std::vector<double> r(n), scratch(n), feat(f);
    for (std::size_t m = m_lo; m < m_hi; ++m) {
      std::fill(r.begin(), r.end(), 0.0);
      for (std::size_t t = 0; t + 1 < train.length; ++t) {
        model.advance(r.data(), train.state(m, t), scratch.data());
        if (t + 1 <= warm) continue;
        model.features(train.state(m, t), r.data(), feat.data());
        acc[g].push(feat.data(), train.state(m, t + 1));
      }
    }
    acc[g].flush();
  });

  const auto fi = static_cast<Eigen::Index>(f), di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(fi, fi);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(di, fi);
  std::size_t samples = 0;
  for (const auto& a : acc) {
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += a.gram[i * f + j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < f; ++j) cross(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += a.cross[i * f + j];
    samples += a.samples;
  }
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  gram.diagonal().array() += model.hyper().lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw NumericalError("ridge system is not positive definite; increase lambda");
  const Eigen::MatrixXd rhs = cross.transpose();
  Eigen::MatrixXd x = llt.solve(rhs);
  for (int it = 0; it < 2; ++it) x += llt.solve(rhs - gram * x);
  if (!x.allFinite()) throw NumericalError("ridge solve produced non-finite weights; increase lambda");

  Eigen::MatrixXd w = x.transpose();
  ReadoutDiagnostics diag;
  const double denom = cross.norm();
  diag.relative_residual = denom > 0 ? (w * gram - cross).norm() / denom : (w * gram).norm();
  diag.n_samples = samples;
  model.set_w_out(std::move(w));
  return diag;
}

Eigen::MatrixXd collect_errors(const ReservoirModel& model, const EnsembleView& train, std::size_t warm) {
  if (!model.trained()) throw ValidationError("collect_errors needs a trained readout");
  if (train.dim != model.dim()) throw ValidationError("training data dimension does not match the reservoir");
  if (train.length <= warm + 1) throw ValidationError("training length must exceed warm-up + 1");
  const std::size_t n = model.n_nodes(), d = model.dim();
  const std::size_t per = train.length - warm - 1;
  Eigen::MatrixXd err(static_cast<Eigen::Index>(train.n_traj * per), static_cast<Eigen::Index>(d));
  parallel_for(train.n_traj, [&](std::size_t m) {
    std::vector<double> r(n, 0.0), scratch(n), pred(d);
    for (std::size_t t = 0; t + 1 < train.length; ++t) {
      model.advance(r.data(), train.state(m, t), scratch.data());
      if (t + 1 <= warm) continue;
      model.readout(train.state(m, t), r.data(), pred.data());
      const auto row = static_cast<Eigen::Index>(m * per + (t - warm));
      const double* truth = train.state(m, t + 1);
      for (std::size_t i = 0; i < d; ++i) err(row, static_cast<Eigen::Index>(i)) = truth[i] - pred[i];
    }
  });
  return err;
}

Eigen::MatrixXd rolling_forecast_deterministic(const ReservoirModel& model, const Eigen::MatrixXd& warmup,
                                               std::size_t horizon) {
  if (!model.trained()) throw ValidationError("rolling forecast needs a trained readout");
  if (warmup.rows() < 1) throw ValidationError("warm-up must contain at least one state");
  if (warmup.cols() != static_cast<Eigen::Index>(model.dim())) throw ValidationError("warm-up dimension mismatch");
  const std::size_t n = model.n_nodes(), d = model.dim();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(horizon), static_cast<Eigen::Index>(d));
  if (horizon == 0) return out;
  std::vector<double> r(n, 0.0), scratch(n), x(d), pred(d);
  for (Eigen::Index t = 0; t < warmup.rows(); ++t) {
    for (std::size_t i = 0; i < d; ++i) x[i] = warmup(t, static_cast<Eigen::Index>(i));
    model.advance(r.data(), x.data(), scratch.data());
  }
  for (std::size_t s = 0; s < horizon; ++s) {
    model.readout(x.data(), r.data(), pred.data());
    for (std::size_t i = 0; i < d; ++i) {
      if (!std::isfinite(pred[i]) || std::abs(pred[i]) > 1e12)
        throw DivergenceError(0, s, "deterministic forecast diverged at step " + std::to_string(s));
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = pred[i];
    }
    x = pred;
    if (s + 1 < horizon) model.advance(r.data(), x.data(), scratch.data());
  }
  return out;
}

void ReservoirModel::save(std::ostream& os) const {
  io::write_magic(os, "RSV1");
  io::write_u32(os, 1);
  io::write_u64(os, n_);
  io::write_u64(os, d_);
  io::write_u32(os, variant_ == Variant::kEsn ? 1u : 0u);
  io::write_f64(os, hyper_.rho);
  io::write_f64(os, static_cast<double>(hyper_.k));
  io::write_f64(os, hyper_.chi);
  io::write_f64(os, hyper_.alpha);
  io::write_f64(os, hyper_.lambda);
  io::write_u64(os, a_.nnz());
  for (std::size_t i = 0; i < n_; ++i)
    for (std::uint32_t e = a_.row_ptr[i]; e < a_.row_ptr[i + 1]; ++e) {
      io::write_u32(os, static_cast<std::uint32_t>(i));
      io::write_u32(os, a_.col[e]);
      io::write_f64(os, a_.val[e]);
    }
  io::write_f64s(os, w_in_.data(), static_cast<std::size_t>(w_in_.size()));
  io::write_f64s(os, zeta_.data(), static_cast<std::size_t>(zeta_.size()));
  io::write_u32(os, trained() ? 1u : 0u);
  if (trained()) {
    io::write_u64(os, static_cast<std::uint64_t>(w_out_.rows()));
    io::write_u64(os, static_cast<std::uint64_t>(w_out_.cols()));
    io::write_f64s(os, w_out_.data(), static_cast<std::size_t>(w_out_.size()));
  }
}

ReservoirModel ReservoirModel::load(std::istream& is) {
  io::expect_magic(is, "RSV1", "reservoir blob");
  const std::uint32_t version = io::read_u32(is);
  if (version != 1) throw IoError("unsupported reservoir blob version " + std::to_string(version));
  const std::size_t n = io::read_u64(is), d = io::read_u64(is);
  if (n == 0 || d == 0 || n > (1u << 24) || d > 64) throw IoError("reservoir blob has implausible shape");
  const std::uint32_t var = io::read_u32(is);
  RCHyper h;
  h.rho = io::read_f64(is);
  h.k = static_cast<int>(io::read_f64(is));
  h.chi = io::read_f64(is);
  h.alpha = io::read_f64(is);
  h.lambda = io::read_f64(is);
  const std::size_t nnz = io::read_u64(is);
  if (nnz > n * n) throw IoError("reservoir blob has too many nonzeros");
  SparseMatrix a;
  a.n = n;
  a.row_ptr.assign(n + 1, 0);
  std::size_t last_row = 0;
  for (std::size_t e = 0; e < nnz; ++e) {
    const std::uint32_t row = io::read_u32(is), c = io::read_u32(is);
    const double v = io::read_f64(is);
    if (row >= n || c >= n || row < last_row) throw IoError("reservoir blob has malformed COO entries");
    last_row = row;
    a.col.push_back(c);
    a.val.push_back(v);
    a.row_ptr[row + 1]++;
  }
  for (std::size_t i = 0; i < n; ++i) a.row_ptr[i + 1] += a.row_ptr[i];
  Eigen::MatrixXd w_in(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  io::read_f64s(is, w_in.data(), n * d);
  Eigen::VectorXd zeta(static_cast<Eigen::Index>(n));
  io::read_f64s(is, zeta.data(), n);
  ReservoirModel m = make_reservoir(std::move(a), std::move(w_in), std::move(zeta), h,
                                    var == 1 ? Variant::kEsn : Variant::kRc);
  if (io::read_u32(is) == 1) {
    const std::size_t rows = io::read_u64(is), cols = io::read_u64(is);
    if (rows != d || cols != m.feature_dim()) throw IoError("reservoir blob W_out has the wrong shape");
    Eigen::MatrixXd w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    io::read_f64s(is, w.data(), rows * cols);
    m.set_w_out(std::move(w));
  }
  return m;
}

}  // namespace rcnf
