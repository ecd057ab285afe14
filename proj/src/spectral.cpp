#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "rcnf/errors.hpp"
#include "rcnf/reservoir.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {
namespace {

// Tarjan's strongly connected components over the nonzero pattern (iterative).
std::vector<std::vector<std::uint32_t>> strong_components(const SparseMatrix& a) {
  const std::size_t n = a.n;
  const std::uint32_t kUnset = 0xffffffffu;
  std::vector<std::uint32_t> index(n, kUnset), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::uint32_t> stack;
  std::vector<std::vector<std::uint32_t>> comps;
  std::uint32_t counter = 0;

  struct Frame {
    std::uint32_t v;
    std::uint32_t next_edge;
  };
  std::vector<Frame> call;
  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, a.row_ptr[root]});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const std::uint32_t v = f.v;
      if (f.next_edge < a.row_ptr[v + 1]) {
        const std::uint32_t w = a.col[f.next_edge++];
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, a.row_ptr[w]});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<std::uint32_t> comp;
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }
  return comps;
}

struct RitzCheck {
  double radius;
  double residual;
};

// Largest-modulus Ritz value of the leading m x m block of H and its Arnoldi residual.
RitzCheck ritz(const Eigen::MatrixXd& h, std::size_t m, double h_next) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(h.topLeftCorner(m, m), true);
  if (es.info() != Eigen::Success) throw NumericalError("spectral radius: Hessenberg eigensolver failed");
  const auto& vals = es.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < vals.size(); ++i)
    if (std::abs(vals[i]) > std::abs(vals[best])) best = i;
  const Eigen::VectorXcd y = es.eigenvectors().col(best);
  const double res = std::abs(h_next) * std::abs(y[static_cast<Eigen::Index>(m) - 1]) / y.norm();
  return {std::abs(vals[best]), res};
}

double krylov_radius(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a, const SpectralOptions& opt,
                     std::uint64_t stream) {
  const auto n = static_cast<std::size_t>(a.rows());
  Engine eng = make_engine(derive_seed(opt.seed, stream));
  Eigen::MatrixXd q(n, n + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + 1, n);
  {
    Eigen::VectorXd v(n);
    fill_standard_normal(eng, std::span<double>(v.data(), n));
    q.col(0) = v / v.norm();
  }
  const double anorm = std::max(1e-300, [&] {
    double s = 0;
    for (Eigen::Index k = 0; k < a.outerSize(); ++k)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a, k); it; ++it) s += it.value() * it.value();
    return std::sqrt(s);
  }());

  std::size_t checkpoint = std::min<std::size_t>(n, 40);
  double previous = -1.0;
  for (std::size_t j = 0; j < n; ++j) {
    Eigen::VectorXd w = a * q.col(static_cast<Eigen::Index>(j));
    // Two passes of classical Gram-Schmidt keep Q orthonormal to working precision.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd c = q.leftCols(static_cast<Eigen::Index>(j + 1)).transpose() * w;
      w.noalias() -= q.leftCols(static_cast<Eigen::Index>(j + 1)) * c;
      h.col(static_cast<Eigen::Index>(j)).head(static_cast<Eigen::Index>(j + 1)) += c;
    }
    const double beta = w.norm();
    h(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(j)) = beta;
    const std::size_t m = j + 1;
    const bool breakdown = beta <= 1e-13 * anorm;
    if (breakdown || m == n) return ritz(h, m, 0.0).radius;  // invariant subspace: exact
    q.col(static_cast<Eigen::Index>(j + 1)) = w / beta;
    if (m == checkpoint) {
      const RitzCheck rc = ritz(h, m, beta);
      const double scale = std::max(rc.radius, 1e-300);
      if (rc.residual <= opt.tol * scale && previous >= 0 && std::abs(rc.radius - previous) <= opt.tol * scale)
        return rc.radius;
      previous = rc.radius;
      checkpoint = std::min(n, m + std::max<std::size_t>(20, m / 2));
    }
  }
  return ritz(h, n, 0.0).radius;
}

}  // namespace

double spectral_radius(const SparseMatrix& a, const SpectralOptions& opt) {
  if (a.n == 0) throw ValidationError("spectral radius of an empty matrix");
  if (a.row_ptr.size() != a.n + 1) throw ValidationError("malformed sparse matrix");
  // The spectrum is the union of the spectra of the diagonal blocks of the
  // strongly connected components; acyclic structure contributes only zeros.
  double best = 0.0;
  std::uint64_t stream = 0;
  for (const auto& comp : strong_components(a)) {
    if (comp.size() == 1) {
      const std::uint32_t v = comp[0];
      for (std::uint32_t e = a.row_ptr[v]; e < a.row_ptr[v + 1]; ++e)
        if (a.col[e] == v) best = std::max(best, std::abs(a.val[e]));
      continue;
    }
    std::vector<std::int64_t> local(a.n, -1);
    for (std::size_t i = 0; i < comp.size(); ++i) local[comp[i]] = static_cast<std::int64_t>(i);
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < comp.size(); ++i) {
      const std::uint32_t v = comp[i];
      for (std::uint32_t e = a.row_ptr[v]; e < a.row_ptr[v + 1]; ++e)
        if (local[a.col[e]] >= 0)
          trip.emplace_back(static_cast<int>(i), static_cast<int>(local[a.col[e]]), a.val[e]);
    }
    const auto s = static_cast<Eigen::Index>(comp.size());
    Eigen::SparseMatrix<double, Eigen::RowMajor> sub(s, s);
    sub.setFromTriplets(trip.begin(), trip.end());
    if (comp.size() <= 64) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sub), false);
      if (es.info() != Eigen::Success) throw NumericalError("spectral radius: dense eigensolver failed");
      best = std::max(best, es.eigenvalues().cwiseAbs().maxCoeff());
    } else {
      best = std::max(best, krylov_radius(sub, opt, stream++));
    }
  }
  if (!std::isfinite(best)) throw NumericalError("spectral radius is not finite");
  return best;
}

}  // namespace rcnf
