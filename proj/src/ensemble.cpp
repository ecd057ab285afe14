#include "rcnf/ensemble.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "rcnf/binary_io.hpp"
#include "rcnf/errors.hpp"

namespace rcnf {

EnsembleView EnsembleView::time_slice(std::size_t begin, std::size_t len) const {
  if (begin + len > length) throw ValidationError("time slice out of range");
  EnsembleView v = *this;
  v.base = base + begin * dim;
  v.length = len;
  v.t0 = t0 + static_cast<double>(begin) * dt_obs;
  return v;
}

EnsembleView EnsembleView::traj_slice(std::size_t begin, std::size_t count) const {
  if (begin + count > n_traj) throw ValidationError("trajectory slice out of range");
  EnsembleView v = *this;
  v.base = base + begin * traj_stride;
  v.n_traj = count;
  return v;
}

Ensemble EnsembleView::materialize() const {
  Ensemble e(n_traj, length, dim, dt_obs, t0);
  for (std::size_t m = 0; m < n_traj; ++m) {
    const double* src = state(m, 0);
    std::copy(src, src + length * dim, e.state(m, 0));
  }
  return e;
}

std::vector<double> EnsembleView::snapshot(std::size_t t, std::size_t i) const {
  std::vector<double> out(n_traj);
  for (std::size_t m = 0; m < n_traj; ++m) out[m] = state(m, t)[i];
  return out;
}

std::vector<double> EnsembleView::pooled(std::size_t i) const {
  std::vector<double> out;
  out.reserve(n_traj * length);
  for (std::size_t m = 0; m < n_traj; ++m)
    for (std::size_t t = 0; t < length; ++t) out.push_back(state(m, t)[i]);
  return out;
}

Ensemble::Ensemble(std::size_t n_traj, std::size_t length, std::size_t dim, double dt_obs, double t0)
    : n_traj_(n_traj), length_(length), dim_(dim), dt_obs_(dt_obs), t0_(t0),
      data_(n_traj * length * dim, 0.0) {}

Ensemble::Ensemble(std::size_t n_traj, std::size_t length, std::size_t dim, double dt_obs, double t0,
                   std::vector<double> data)
    : n_traj_(n_traj), length_(length), dim_(dim), dt_obs_(dt_obs), t0_(t0), data_(std::move(data)) {
  if (data_.size() != n_traj * length * dim) throw ValidationError("ensemble data size does not match shape");
}

EnsembleView Ensemble::view() const {
  return EnsembleView{data_.data(), n_traj_, length_, dim_, length_ * dim_, dt_obs_, t0_};
}

void Ensemble::check_finite() const {
  if (n_traj_ == 0 || length_ == 0 || dim_ == 0) throw ValidationError("ensemble has an empty dimension");
  for (double v : data_)
    if (!std::isfinite(v)) throw ValidationError("ensemble contains non-finite values");
}

void SplitSpec::validate(std::size_t length) const {
  if (train + valid + test != length)
    throw ValidationError("split lengths " + std::to_string(train) + "+" + std::to_string(valid) + "+" +
                          std::to_string(test) + " do not sum to ensemble length " + std::to_string(length));
  if (warm == 0 || warm >= train) throw ValidationError("warm-up must satisfy 0 < warm < train");
}

SplitViews split(const EnsembleView& e, const SplitSpec& s) {
  s.validate(e.length);
  return {e.time_slice(0, s.train), e.time_slice(s.train, s.valid), e.time_slice(s.train + s.valid, s.test)};
}

void Scaler::apply_inplace(double* x) const {
  for (std::size_t i = 0; i < mean.size(); ++i) x[i] = (x[i] - mean[i]) / std[i];
}

void Scaler::invert_inplace(double* x) const {
  for (std::size_t i = 0; i < mean.size(); ++i) x[i] = x[i] * std[i] + mean[i];
}

Scaler fit_scaler(const EnsembleView& e) {
  if (e.n_traj == 0 || e.length == 0) throw ValidationError("cannot fit a scaler to an empty ensemble");
  const std::size_t d = e.dim;
  const double n = static_cast<double>(e.n_traj * e.length);
  Scaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t m = 0; m < e.n_traj; ++m)
    for (std::size_t t = 0; t < e.length; ++t)
      for (std::size_t i = 0; i < d; ++i) s.mean[i] += e(m, t, i);
  for (auto& v : s.mean) v /= n;
  // Second pass for the variance; the two-pass form is accurate for large offsets.
  for (std::size_t m = 0; m < e.n_traj; ++m)
    for (std::size_t t = 0; t < e.length; ++t)
      for (std::size_t i = 0; i < d; ++i) {
        const double c = e(m, t, i) - s.mean[i];
        s.std[i] += c * c;
      }
  for (std::size_t i = 0; i < d; ++i) {
    s.std[i] = std::sqrt(s.std[i] / n);
    if (!(s.std[i] > 1e-300) || s.std[i] <= 1e-14 * std::max(1.0, std::abs(s.mean[i])))
      throw ValidationError("zero variance in dimension " + std::to_string(i));
  }
  return s;
}

Ensemble apply_scaler(const EnsembleView& e, const Scaler& s) {
  if (s.dim() != e.dim) throw ValidationError("scaler dimension mismatch");
  Ensemble out = e.materialize();
  for (std::size_t m = 0; m < out.n_traj(); ++m)
    for (std::size_t t = 0; t < out.length(); ++t) s.apply_inplace(out.state(m, t));
  return out;
}

Ensemble invert_scaler(const EnsembleView& e, const Scaler& s) {
  if (s.dim() != e.dim) throw ValidationError("scaler dimension mismatch");
  Ensemble out = e.materialize();
  for (std::size_t m = 0; m < out.n_traj(); ++m)
    for (std::size_t t = 0; t < out.length(); ++t) s.invert_inplace(out.state(m, t));
  return out;
}

void save_ensemble(const Ensemble& e, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  io::write_magic(os, "TRJ1");
  io::write_u32(os, kTrajectoryFormatVersion);
  io::write_u32(os, static_cast<std::uint32_t>(e.n_traj()));
  io::write_u32(os, static_cast<std::uint32_t>(e.length()));
  io::write_u32(os, static_cast<std::uint32_t>(e.dim()));
  io::write_f64(os, e.dt_obs());
  io::write_f64(os, e.t0());
  io::write_f64s(os, e.data().data(), e.data().size());
  os.close();
  if (!os) throw IoError("write failed: " + path);

  nlohmann::json side = {{"format", "TRJ1"},
                         {"version", kTrajectoryFormatVersion},
                         {"n_traj", e.n_traj()},
                         {"length", e.length()},
                         {"dim", e.dim()},
                         {"dt_obs", e.dt_obs()},
                         {"t0", e.t0()},
                         {"meta",
                          {{"system", e.meta.system},
                           {"seed", e.meta.seed},
                           {"config_hash", e.meta.config_hash}}}};
  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw IoError("cannot open for writing: " + path + ".json");
  js << side.dump(2) << '\n';
}

Ensemble load_ensemble(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  io::expect_magic(is, "TRJ1", path);
  const std::uint32_t version = io::read_u32(is);
  if (version != kTrajectoryFormatVersion)
    throw IoError(path + ": unsupported TRJ1 version " + std::to_string(version));
  const std::size_t m = io::read_u32(is);
  const std::size_t l = io::read_u32(is);
  const std::size_t d = io::read_u32(is);
  const double dt_obs = io::read_f64(is);
  const double t0 = io::read_f64(is);
  std::vector<double> data(m * l * d);
  try {
    io::read_f64s(is, data.data(), data.size());
  } catch (const IoError&) {
    throw IoError(path + ": truncated trajectory data");
  }
  Ensemble e(m, l, d, dt_obs, t0, std::move(data));

  std::ifstream js(path + ".json");
  if (js) {
    try {
      const auto side = nlohmann::json::parse(js);
      const auto& meta = side.at("meta");
      e.meta.system = meta.value("system", "");
      e.meta.seed = meta.value("seed", std::uint64_t{0});
      e.meta.config_hash = meta.value("config_hash", "");
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(path + ".json: malformed sidecar: " + ex.what());
    }
  }
  return e;
}

}  // namespace rcnf
