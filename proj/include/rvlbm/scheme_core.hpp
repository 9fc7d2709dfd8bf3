#pragma once

// The relative-velocity DdQq time step: moments in the frame moving at u,
// diagonal relaxation, back to distributions, exact-characteristics transport
// on a periodic Cartesian grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rvlbm/errors.hpp"
#include "rvlbm/velocity_lattice.hpp"

namespace rvlbm {

enum class ShiftMode { zero, constant, sine };

inline const char* to_string(ShiftMode m) {
  switch (m) {
    case ShiftMode::zero: return "zero";
    case ShiftMode::constant: return "constant";
    case ShiftMode::sine: return "sine";
  }
  return "?";
}

/// The relative velocity u(x). `sine` is u(x) = value * sin(2 pi x_1 / L_1),
/// meant for exercising per-cell matrices in the simulator only.
struct VelocityShift {
  ShiftMode mode = ShiftMode::zero;
  Vector value;

  static VelocityShift zero(int dim) { return {ShiftMode::zero, Vector::Zero(dim)}; }
  static VelocityShift constant(Vector v) { return {ShiftMode::constant, std::move(v)}; }
  static VelocityShift sine(Vector amplitude) { return {ShiftMode::sine, std::move(amplitude)}; }

  bool is_constant() const { return mode != ShiftMode::sine; }

  /// Constant shift; zero for `zero` mode.
  Vector constant_value() const {
    if (!is_constant()) throw NonConstantShift("relative velocity is a field, not a constant");
    return mode == ShiftMode::zero ? Vector::Zero(value.size()) : value;
  }

  Vector at(const Vector& x, double length0) const {
    if (is_constant()) return constant_value();
    return value * std::sin(2.0 * std::numbers::pi * x[0] / length0);
  }
};

/// Complete definition of a relative-velocity scheme with one conservation
/// law and linear equilibrium f^eq_j = E_j rho.
struct SchemeSpec {
  VelocitySet vset;
  std::vector<MomentPolynomial> basis;
  Vector s;  // relaxation rates, s_0 = 0
  Vector E;  // equilibrium weights, sum = 1
  VelocityShift u_tilde;

  int dim() const { return vset.dim(); }
  int q() const { return vset.q(); }

  /// Throws ValidationError on a broken invariant; returns non-fatal warnings.
  std::vector<std::string> validate() const {
    check_basis(basis, vset);
    if (s.size() != q()) throw ValidationError("relaxation vector must have q entries");
    if (E.size() != q()) throw ValidationError("equilibrium vector must have q entries");
    if (u_tilde.value.size() != dim())
      throw ValidationError("u_tilde value must have d components");
    if (s[0] != 0.0) throw ValidationError("s[0] must be 0");
    std::vector<std::string> warnings;
    for (int k = 1; k < q(); ++k) {
      if (s[k] == 0.0) throw ValidationError("s[" + std::to_string(k) + "] must be nonzero");
      if (!(s[k] > 0.0 && s[k] < 2.0))
        warnings.push_back("s[" + std::to_string(k) + "] = " + std::to_string(s[k]) +
                           " is outside (0,2)");
    }
    if (std::abs(E.sum() - 1.0) > 1e-12) throw ValidationError("equilibrium weights must sum to 1");
    return warnings;
  }

  Vector feq(double rho) const { return E * rho; }
};

/// rho = sum_j f_j.
inline double density(const Vector& f) { return f.sum(); }

inline Vector moments_from_distributions(const Vector& f, const MomentMatrix& M) {
  if (f.size() != M.m.cols()) throw DimensionMismatch("distribution size does not match M");
  return M.m * f;
}

/// M(u) E rho, equal to M(u) M(0)^{-1} (M(0) E rho).
inline Vector equilibrium_moments(const SchemeSpec& spec, double rho, const MomentMatrix& M) {
  return M.m * spec.E * rho;
}

/// m*_k = m_k + s_k (m^eq_k - m_k).
inline Vector relax(const Vector& m, const Vector& m_eq, const Vector& s) {
  if (m.size() != m_eq.size() || m.size() != s.size())
    throw DimensionMismatch("relax: moment and rate vectors differ in size");
  return m + s.cwiseProduct(m_eq - m);
}

inline Vector post_collision_distributions(const Vector& m_star, const MomentMatrix& M) {
  if (m_star.size() != M.m_inv.cols()) throw DimensionMismatch("moment size does not match M");
  return M.m_inv * m_star;
}

/// Periodic Cartesian grid with a single mesh size dx = L_a / N_a on every axis.
struct Grid {
  std::vector<int> n;
  std::vector<double> length;

  Grid() = default;
  Grid(std::vector<int> sizes, std::vector<double> lengths)
      : n(std::move(sizes)), length(std::move(lengths)) {
    if (n.empty() || n.size() != length.size())
      throw DimensionMismatch("grid sizes and box lengths must have the same positive dimension");
    for (std::size_t a = 0; a < n.size(); ++a) {
      if (n[a] < 1) throw ValidationError("grid size must be positive");
      if (!(length[a] > 0.0)) throw ValidationError("box length must be positive");
    }
    for (std::size_t a = 1; a < n.size(); ++a)
      if (std::abs(length[a] / n[a] - dx()) > 1e-12 * dx())
        throw ValidationError("grid must have the same mesh size on every axis");
  }

  int dim() const { return static_cast<int>(n.size()); }
  double dx() const { return length[0] / n[0]; }
  std::size_t cells() const {
    std::size_t c = 1;
    for (int v : n) c *= static_cast<std::size_t>(v);
    return c;
  }

  // Axis 0 varies fastest.
  std::vector<int> unravel(std::size_t cell) const {
    std::vector<int> idx(n.size());
    for (std::size_t a = 0; a < n.size(); ++a) {
      idx[a] = static_cast<int>(cell % n[a]);
      cell /= n[a];
    }
    return idx;
  }
  std::size_t ravel(const std::vector<int>& idx) const {
    std::size_t cell = 0;
    for (std::size_t a = n.size(); a-- > 0;) {
      const int i = ((idx[a] % n[a]) + n[a]) % n[a];
      cell = cell * n[a] + static_cast<std::size_t>(i);
    }
    return cell;
  }
  Vector position(std::size_t cell) const {
    const auto idx = unravel(cell);
    Vector x(dim());
    for (int a = 0; a < dim(); ++a) x[a] = idx[a] * dx();
    return x;
  }
};

/// Particle distributions on the grid, structure of arrays: f[j][cell].
struct StateField {
  Grid grid;
  double dx = 0.0;
  double dt = 0.0;
  std::vector<std::vector<double>> f;
  long step_count = 0;

  StateField() = default;
  StateField(Grid g, int q, double lambda) : grid(std::move(g)) {
    dx = grid.dx();
    dt = dx / lambda;
    f.assign(q, std::vector<double>(grid.cells(), 0.0));
  }

  int q() const { return static_cast<int>(f.size()); }
  std::size_t cells() const { return grid.cells(); }

  Vector cell(std::size_t c) const {
    Vector v(q());
    for (int j = 0; j < q(); ++j) v[j] = f[j][c];
    return v;
  }
  void set_cell(std::size_t c, const Vector& v) {
    for (int j = 0; j < q(); ++j) f[j][c] = v[j];
  }
  double rho(std::size_t c) const {
    double r = 0.0;
    for (int j = 0; j < q(); ++j) r += f[j][c];
    return r;
  }
  double total_mass() const {
    // Neumaier summation.
    double sum = 0.0, comp = 0.0;
    for (const auto& fj : f)
      for (double v : fj) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
      }
    return sum + comp;
  }
};

/// f_j(x, t+dt) = f*_j(x - v_j dt, t), periodic. Gathers into a fresh array.
inline StateField stream(const StateField& post, const VelocitySet& vset) {
  if (post.q() != vset.q()) throw DimensionMismatch("state and velocity set disagree on q");
  if (post.grid.dim() != vset.dim()) throw DimensionMismatch("state and velocity set disagree on d");
  StateField out = post;
  const auto& g = post.grid;
  const int d = g.dim();
  for (int j = 0; j < vset.q(); ++j) {
    const auto& off = vset.lattice(j);
    for (std::size_t c = 0; c < g.cells(); ++c) {
      auto idx = g.unravel(c);
      for (int a = 0; a < d; ++a) idx[a] -= off[a];
      out.f[j][c] = post.f[j][g.ravel(idx)];
    }
  }
  return out;
}

/// Collision + transport with per-u cached moment matrices.
class Simulator {
 public:
  explicit Simulator(SchemeSpec spec, unsigned workers = 1)
      : spec_(std::move(spec)), workers_(std::max(1u, workers)) {
    spec_.validate();
  }

  const SchemeSpec& spec() const { return spec_; }

  /// Moment matrix for the shift in effect at cell c.
  const MomentMatrix& matrix_at(const Grid& grid, std::size_t c) {
    const Vector u = spec_.u_tilde.at(grid.position(c), grid.length[0]);
    std::vector<double> key(u.data(), u.data() + u.size());
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, build_moment_matrix(spec_.basis, spec_.vset, u)).first;
    return it->second;
  }

  /// Per-cell collision in place, as f* = f + M^{-1}(m* - m).
  void collide(StateField& state) {
    const auto& g = state.grid;
    std::vector<const MomentMatrix*> mats(g.cells());
    for (std::size_t c = 0; c < g.cells(); ++c) mats[c] = &matrix_at(g, c);

    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t c = begin; c < end; ++c) {
        const MomentMatrix& M = *mats[c];
        const Vector f = state.cell(c);
        const Vector m = M.m * f;
        const Vector m_eq = equilibrium_moments(spec_, m[0], M);
        Vector dm = spec_.s.cwiseProduct(m_eq - m);
        dm[0] = 0.0;
        state.set_cell(c, f + M.m_inv * dm);
      }
    };
    const std::size_t n = g.cells();
    if (workers_ == 1 || n < 2 * workers_) {
      work(0, n);
      return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers_ - 1) / workers_;
    for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(work, b, std::min(n, b + chunk));
  }

  StateField step(const StateField& state) {
    StateField post = state;
    collide(post);
    StateField next = stream(post, spec_.vset);
    next.step_count = state.step_count + 1;
    return next;
  }

  StateField run(StateField state, long steps) {
    for (long n = 0; n < steps; ++n) state = step(state);
    return state;
  }

  std::size_t cached_matrices() const { return cache_.size(); }

 private:
  SchemeSpec spec_;
  unsigned workers_;
  std::map<std::vector<double>, MomentMatrix> cache_;
};

/// f = E rho(x) everywhere.
template <class DensityFn>
StateField equilibrium_state(const SchemeSpec& spec, const Grid& grid, DensityFn&& rho) {
  StateField s(grid, spec.q(), spec.vset.lambda());
  for (std::size_t c = 0; c < grid.cells(); ++c) s.set_cell(c, spec.E * rho(grid.position(c)));
  return s;
}

}  // namespace rvlbm
