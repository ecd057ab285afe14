#include "rcnf/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "rcnf/binary_io.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/parallel.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {
namespace {

constexpr std::size_t kMaxDim = 8;
constexpr std::size_t kMaxLayers = 4;
constexpr int kMaxParams = 3 * kMaxSplineBins - 1;
constexpr std::size_t H = FlowModel::kHidden;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

std::size_t mlp_size(std::size_t n_in, std::size_t p) { return H * n_in + H + H * H + H + p * H + p; }

// Forward activations of one conditioner, kept for the backward pass.
struct CondCache {
  std::array<double, H> h1, h2;
  std::array<double, kMaxParams> raw;
  SplineKnots knots;
};

}  // namespace

FlowModel::FlowModel(std::size_t dim, std::size_t n_layers, const SplineConfig& spline, std::uint64_t seed)
    : dim_(dim), n_layers_(n_layers), spline_(spline) {
  if (dim == 0 || dim > kMaxDim) throw ValidationError("flow dimension must be in [1, 8]");
  if (n_layers == 0 || n_layers > kMaxLayers) throw ValidationError("flow layer count must be in [1, 4]");
  if (spline.bins < 2 || spline.bins > kMaxSplineBins) throw ValidationError("spline bin count must be in [2, 32]");
  if (!(spline.bound > 0)) throw ValidationError("spline bound must be positive");
  if (!(spline.min_bin_width * spline.bins < 1.0) || !(spline.min_bin_height * spline.bins < 1.0))
    throw ValidationError("minimum bin width/height too large for the bin count");
  layout();
  mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  std_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim));

  Engine eng = make_engine(seed);
  const auto p = static_cast<std::size_t>(spline_.n_params());
  std::vector<double> ident(p);
  rqs_identity(ident.data(), spline_);
  for (const Block& b : blocks_) {
    double* t = theta_.data() + b.offset;
    if (b.n_in == 0) {
      std::copy(ident.begin(), ident.end(), t);
      continue;
    }
    std::uniform_real_distribution<double> u1(-1.0 / std::sqrt(static_cast<double>(b.n_in)),
                                              1.0 / std::sqrt(static_cast<double>(b.n_in)));
    std::uniform_real_distribution<double> u2(-1.0 / std::sqrt(static_cast<double>(H)),
                                              1.0 / std::sqrt(static_cast<double>(H)));
    for (std::size_t j = 0; j < H * b.n_in + H; ++j) *t++ = u1(eng);
    for (std::size_t j = 0; j < H * H + H; ++j) *t++ = u2(eng);
    for (std::size_t j = 0; j < p * H; ++j) *t++ = 0.0;
    std::copy(ident.begin(), ident.end(), t);
  }
}

void FlowModel::layout() {
  const auto p = static_cast<std::size_t>(spline_.n_params());
  blocks_.clear();
  std::size_t off = 0;
  for (std::size_t l = 0; l < n_layers_; ++l)
    for (std::size_t i = 0; i < dim_; ++i) {
      blocks_.push_back({off, i});
      off += i == 0 ? p : mlp_size(i, p);
    }
  theta_.assign(off, 0.0);
}

void FlowModel::set_scaler(Eigen::VectorXd mean, Eigen::VectorXd std) {
  if (mean.size() != static_cast<Eigen::Index>(dim_) || std.size() != static_cast<Eigen::Index>(dim_))
    throw ValidationError("flow scaler dimension mismatch");
  for (Eigen::Index i = 0; i < std.size(); ++i)
    if (!(std[i] > 0) || !std::isfinite(std[i])) throw ValidationError("flow scaler std must be positive");
  mean_ = std::move(mean);
  std_ = std::move(std);
}

void FlowModel::conditioner(const Block& b, const double* in, double* raw) const {
  const auto p = static_cast<std::size_t>(spline_.n_params());
  const double* t = theta_.data() + b.offset;
  if (b.n_in == 0) {
    std::copy(t, t + p, raw);
    return;
  }
  const double* w1 = t;
  const double* b1 = w1 + H * b.n_in;
  const double* w2 = b1 + H;
  const double* b2 = w2 + H * H;
  const double* w3 = b2 + H;
  const double* b3 = w3 + p * H;
  std::array<double, H> h1, h2;
  for (std::size_t j = 0; j < H; ++j) {
    double s = b1[j];
    for (std::size_t k = 0; k < b.n_in; ++k) s += w1[j * b.n_in + k] * in[k];
    h1[j] = std::tanh(s);
  }
  for (std::size_t j = 0; j < H; ++j) {
    double s = b2[j];
    for (std::size_t k = 0; k < H; ++k) s += w2[j * H + k] * h1[k];
    h2[j] = std::tanh(s);
  }
  for (std::size_t j = 0; j < p; ++j) {
    double s = b3[j];
    for (std::size_t k = 0; k < H; ++k) s += w3[j * H + k] * h2[k];
    raw[j] = s;
  }
}

double FlowModel::layer_forward(std::size_t layer, const double* in, double* out) const {
  std::array<double, kMaxParams> raw;
  double logdet = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    conditioner(block(layer, i), in, raw.data());
    const SplineEval e = rqs_forward(in[i], raw.data(), spline_);
    out[i] = e.y;
    logdet += e.logdet;
  }
  return logdet;
}

void FlowModel::layer_inverse(std::size_t layer, const double* in, double* out) const {
  std::array<double, kMaxParams> raw;
  for (std::size_t i = 0; i < dim_; ++i) {
    conditioner(block(layer, i), out, raw.data());  // out[0..i) already recovered
    out[i] = rqs_inverse(in[i], raw.data(), spline_).y;
  }
}

double FlowModel::forward(const double* z, double* u) const {
  std::array<double, kMaxDim> cur, nxt;
  std::copy(z, z + dim_, cur.begin());
  double logdet = 0.0;
  for (std::size_t l = 0; l < n_layers_; ++l) {
    logdet += layer_forward(l, cur.data(), nxt.data());
    if (l + 1 < n_layers_)
      for (std::size_t i = 0; i < dim_; ++i) cur[i] = nxt[dim_ - 1 - i];
    else
      std::copy(nxt.begin(), nxt.begin() + static_cast<std::ptrdiff_t>(dim_), cur.begin());
  }
  // Undo the net reversal so fresh flows are exactly the identity.
  if (n_layers_ % 2 == 0) std::reverse(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(dim_));
  std::copy(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(dim_), u);
  return logdet;
}

void FlowModel::inverse(const double* u, double* z) const {
  std::array<double, kMaxDim> cur, prev;
  std::copy(u, u + dim_, cur.begin());
  if (n_layers_ % 2 == 0) std::reverse(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(dim_));
  for (std::size_t l = n_layers_; l-- > 0;) {
    layer_inverse(l, cur.data(), prev.data());
    if (l > 0)
      for (std::size_t i = 0; i < dim_; ++i) cur[i] = prev[dim_ - 1 - i];
    else
      std::copy(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(dim_), cur.begin());
  }
  std::copy(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(dim_), z);
}

double FlowModel::log_density(const double* eps) const {
  std::array<double, kMaxDim> z, u;
  double log_std = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    z[i] = (eps[i] - mean_[static_cast<Eigen::Index>(i)]) / std_[static_cast<Eigen::Index>(i)];
    log_std += std::log(std_[static_cast<Eigen::Index>(i)]);
  }
  const double logdet = forward(z.data(), u.data());
  double sq = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) sq += u[i] * u[i];
  return -0.5 * sq - kHalfLog2Pi * static_cast<double>(dim_) + logdet - log_std;
}

void FlowModel::sample_from_base(const double* u, double* eps) const {
  inverse(u, eps);
  for (std::size_t i = 0; i < dim_; ++i)
    eps[i] = eps[i] * std_[static_cast<Eigen::Index>(i)] + mean_[static_cast<Eigen::Index>(i)];
}

Eigen::MatrixXd FlowModel::sample(std::size_t n, std::uint64_t seed) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim_));
  Engine eng = make_engine(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::array<double, kMaxDim> u, e;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < dim_; ++i) u[i] = n01(eng);
    sample_from_base(u.data(), e.data());
    for (std::size_t i = 0; i < dim_; ++i) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = e[i];
  }
  return out;
}

// Per-sample loss and gradient accumulation (grad may be null).
double FlowModel::sample_nll_grad(const double* eps, double* grad, const SplineKnots* free_knots) const {
  const auto p = static_cast<std::size_t>(spline_.n_params());
  // inputs[l] is what layer l sees; outputs[l] what it produces.
  std::array<std::array<double, kMaxDim>, kMaxLayers> inputs, outputs;
  std::array<std::array<CondCache, kMaxDim>, kMaxLayers> cache;
  double log_std = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    inputs[0][i] = (eps[i] - mean_[static_cast<Eigen::Index>(i)]) / std_[static_cast<Eigen::Index>(i)];
    log_std += std::log(std_[static_cast<Eigen::Index>(i)]);
  }
  double logdet = 0.0;
  for (std::size_t l = 0; l < n_layers_; ++l) {
    const double* in = inputs[l].data();
    for (std::size_t i = 0; i < dim_; ++i) {
      const Block& b = block(l, i);
      CondCache& c = cache[l][i];
      const double* t = theta_.data() + b.offset;
      const SplineKnots* kn = &c.knots;
      if (b.n_in == 0) {
        kn = &free_knots[l * dim_ + i];
      } else {
        const double* w1 = t;
        const double* b1 = w1 + H * b.n_in;
        const double* w2 = b1 + H;
        const double* b2 = w2 + H * H;
        const double* w3 = b2 + H;
        const double* b3 = w3 + p * H;
        for (std::size_t j = 0; j < H; ++j) {
          double s = b1[j];
          for (std::size_t k = 0; k < b.n_in; ++k) s += w1[j * b.n_in + k] * in[k];
          c.h1[j] = std::tanh(s);
        }
        for (std::size_t j = 0; j < H; ++j) {
          double s = b2[j];
          for (std::size_t k = 0; k < H; ++k) s += w2[j * H + k] * c.h1[k];
          c.h2[j] = std::tanh(s);
        }
        for (std::size_t j = 0; j < p; ++j) {
          double s = b3[j];
          for (std::size_t k = 0; k < H; ++k) s += w3[j * H + k] * c.h2[k];
          c.raw[j] = s;
        }
        c.knots = rqs_knots(c.raw.data(), spline_);
      }
      const SplineEval e = rqs_forward(in[i], *kn, spline_);
      outputs[l][i] = e.y;
      logdet += e.logdet;
    }
    if (l + 1 < n_layers_)
      for (std::size_t i = 0; i < dim_; ++i) inputs[l + 1][i] = outputs[l][dim_ - 1 - i];
  }
  const auto& u = outputs[n_layers_ - 1];
  double sq = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) sq += u[i] * u[i];
  const double loss = 0.5 * sq + kHalfLog2Pi * static_cast<double>(dim_) - logdet + log_std;
  if (!grad) return loss;

  std::array<double, kMaxDim> g_out, g_in;
  for (std::size_t i = 0; i < dim_; ++i) g_out[i] = u[i];
  std::array<double, kMaxParams> g_raw;
  for (std::size_t l = n_layers_; l-- > 0;) {
    const double* in = inputs[l].data();
    g_in.fill(0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
      const Block& b = block(l, i);
      const CondCache& c = cache[l][i];
      std::fill(g_raw.begin(), g_raw.begin() + static_cast<std::ptrdiff_t>(p), 0.0);
      const double* raw = b.n_in == 0 ? theta_.data() + b.offset : c.raw.data();
      const SplineKnots& kn = b.n_in == 0 ? free_knots[l * dim_ + i] : c.knots;
      g_in[i] += rqs_backward(in[i], raw, kn, spline_, g_out[i], -1.0, g_raw.data());
      double* g = grad + b.offset;
      if (b.n_in == 0) {
        for (std::size_t j = 0; j < p; ++j) g[j] += g_raw[j];
        continue;
      }
      const double* t = theta_.data() + b.offset;
      const double* w1 = t;
      const double* w2 = w1 + H * b.n_in + H;
      const double* w3 = w2 + H * H + H;
      double* gw1 = g;
      double* gb1 = gw1 + H * b.n_in;
      double* gw2 = gb1 + H;
      double* gb2 = gw2 + H * H;
      double* gw3 = gb2 + H;
      double* gb3 = gw3 + p * H;
      std::array<double, H> g_h2{}, g_a2, g_h1{}, g_a1;
      for (std::size_t j = 0; j < p; ++j) {
        const double gr = g_raw[j];
        gb3[j] += gr;
        for (std::size_t k = 0; k < H; ++k) {
          gw3[j * H + k] += gr * c.h2[k];
          g_h2[k] += w3[j * H + k] * gr;
        }
      }
      for (std::size_t j = 0; j < H; ++j) g_a2[j] = g_h2[j] * (1.0 - c.h2[j] * c.h2[j]);
      for (std::size_t j = 0; j < H; ++j) {
        gb2[j] += g_a2[j];
        for (std::size_t k = 0; k < H; ++k) {
          gw2[j * H + k] += g_a2[j] * c.h1[k];
          g_h1[k] += w2[j * H + k] * g_a2[j];
        }
      }
      for (std::size_t j = 0; j < H; ++j) g_a1[j] = g_h1[j] * (1.0 - c.h1[j] * c.h1[j]);
      for (std::size_t j = 0; j < H; ++j) {
        gb1[j] += g_a1[j];
        for (std::size_t k = 0; k < b.n_in; ++k) {
          gw1[j * b.n_in + k] += g_a1[j] * in[k];
          g_in[k] += w1[j * b.n_in + k] * g_a1[j];
        }
      }
    }
    if (l > 0)
      for (std::size_t i = 0; i < dim_; ++i) g_out[dim_ - 1 - i] = g_in[i];
  }
  return loss;
}

double FlowModel::nll_and_gradient(const Eigen::MatrixXd& data, const std::vector<std::size_t>& rows,
                                   std::vector<double>* grad) const {
  if (rows.empty()) throw ValidationError("NLL needs a non-empty batch");
  if (data.cols() != static_cast<Eigen::Index>(dim_)) throw ValidationError("batch dimension mismatch");
  const std::size_t n = rows.size();
  const std::size_t blocks = std::min<std::size_t>(n, 32);  // fixed partition keeps the sum order fixed
  std::vector<double> block_loss(blocks, 0.0);
  std::vector<std::vector<double>> block_grad(grad ? blocks : 0, std::vector<double>(theta_.size(), 0.0));
  std::vector<SplineKnots> free_knots(blocks_.size());
  for (std::size_t j = 0; j < blocks_.size(); ++j)
    if (blocks_[j].n_in == 0) free_knots[j] = rqs_knots(theta_.data() + blocks_[j].offset, spline_);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * n / blocks, hi = (b + 1) * n / blocks;
    std::array<double, kMaxDim> eps;
    double s = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      for (std::size_t i = 0; i < dim_; ++i)
        eps[i] = data(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(i));
      s += sample_nll_grad(eps.data(), grad ? block_grad[b].data() : nullptr, free_knots.data());
    }
    block_loss[b] = s;
  });
  double loss = 0.0;
  for (double v : block_loss) loss += v;
  loss /= static_cast<double>(n);
  if (grad) {
    grad->assign(theta_.size(), 0.0);
    for (const auto& g : block_grad)
      for (std::size_t j = 0; j < g.size(); ++j) (*grad)[j] += g[j];
    for (double& g : *grad) g /= static_cast<double>(n);
  }
  if (!std::isfinite(loss)) throw NumericalError("flow NLL is not finite");
  return loss;
}

double FlowModel::nll_and_gradient(const Eigen::MatrixXd& batch, std::vector<double>* grad) const {
  std::vector<std::size_t> rows(static_cast<std::size_t>(batch.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return nll_and_gradient(batch, rows, grad);
}

void FlowModel::save(std::ostream& os) const {
  io::write_magic(os, "NSF1");
  io::write_u32(os, 1);
  io::write_u32(os, static_cast<std::uint32_t>(n_layers_));
  io::write_u32(os, static_cast<std::uint32_t>(dim_));
  io::write_u32(os, static_cast<std::uint32_t>(spline_.bins));
  io::write_f64(os, spline_.bound);
  io::write_f64(os, spline_.min_bin_width);
  io::write_f64(os, spline_.min_bin_height);
  io::write_f64(os, spline_.min_derivative);
  io::write_f64s(os, mean_.data(), dim_);
  io::write_f64s(os, std_.data(), dim_);
  io::write_u64(os, theta_.size());
  io::write_f64s(os, theta_.data(), theta_.size());
}

FlowModel FlowModel::load(std::istream& is) {
  io::expect_magic(is, "NSF1", "flow blob");
  const std::uint32_t version = io::read_u32(is);
  if (version != 1) throw IoError("unsupported flow blob version " + std::to_string(version));
  FlowModel f;
  f.n_layers_ = io::read_u32(is);
  f.dim_ = io::read_u32(is);
  f.spline_.bins = static_cast<int>(io::read_u32(is));
  f.spline_.bound = io::read_f64(is);
  f.spline_.min_bin_width = io::read_f64(is);
  f.spline_.min_bin_height = io::read_f64(is);
  f.spline_.min_derivative = io::read_f64(is);
  if (f.dim_ == 0 || f.dim_ > kMaxDim || f.n_layers_ == 0 || f.n_layers_ > kMaxLayers || f.spline_.bins < 2 ||
      f.spline_.bins > kMaxSplineBins)
    throw IoError("flow blob has an unsupported shape");
  f.layout();
  f.mean_.resize(static_cast<Eigen::Index>(f.dim_));
  f.std_.resize(static_cast<Eigen::Index>(f.dim_));
  io::read_f64s(is, f.mean_.data(), f.dim_);
  io::read_f64s(is, f.std_.data(), f.dim_);
  if (io::read_u64(is) != f.theta_.size()) throw IoError("flow blob parameter count mismatch");
  io::read_f64s(is, f.theta_.data(), f.theta_.size());
  return f;
}

FlowTrainResult train_flow(const Eigen::MatrixXd& samples, const FlowTrainConfig& cfg) {
  if (samples.rows() == 0) throw ValidationError("train_flow needs samples");
  const auto d = static_cast<std::size_t>(samples.cols());
  FlowTrainResult res{FlowModel(d, cfg.n_layers, cfg.spline, derive_seed(cfg.seed, "init")), {}};
  FlowModel& model = res.model;

  Eigen::VectorXd mean = samples.colwise().mean().transpose();
  Eigen::VectorXd sd = ((samples.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index i = 0; i < sd.size(); ++i) sd[i] = std::max(sd[i], 1e-15 * std::max(1.0, std::abs(mean[i])));
  for (Eigen::Index i = 0; i < sd.size(); ++i) sd[i] = std::max(sd[i], 1e-300);
  model.set_scaler(mean, sd);

  const std::size_t n = static_cast<std::size_t>(samples.rows());
  const bool full = cfg.batch_size == 0 || cfg.batch_size >= n;
  std::vector<std::size_t> rows(full ? n : cfg.batch_size);
  if (full)
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  Engine eng = make_engine(derive_seed(cfg.seed, "batches"));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::vector<double>& th = model.params();
  std::vector<double> grad, m1(th.size(), 0.0), m2(th.size(), 0.0);
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (!full)
      for (auto& r : rows) r = pick(eng);
    double loss;
    try {
      loss = model.nll_and_gradient(samples, rows, &grad);
    } catch (const NumericalError&) {
      throw NumericalError("flow training: non-finite loss at iteration " + std::to_string(it));
    }
    res.loss_trace.push_back(loss);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t j = 0; j < th.size(); ++j) {
      m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * grad[j];
      m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
      const double mh = m1[j] / (1.0 - b1t), vh = m2[j] / (1.0 - b2t);
      th[j] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    }
  }
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  try {
    res.loss_trace.push_back(model.nll_and_gradient(samples, all, nullptr));
  } catch (const NumericalError&) {
    throw NumericalError("flow training: non-finite loss after the final iteration");
  }
  return res;
}

}  // namespace rcnf
