#pragma once

// Scheme builders and independent oracles shared by the test binaries.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "rvlbm/rvlbm.hpp"

namespace rvlbm::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline std::vector<MomentPolynomial> basis_1d(int q) {
  std::vector<MomentPolynomial> b;
  for (int p = 0; p < q; ++p) b.push_back(MomentPolynomial::monomial({p}));
  return b;
}

/// E = ((1+c)/2, (1-c)/2) on v = (+lambda, -lambda), so the advection speed is c lambda.
inline SchemeSpec d1q2(double c, double s1, double u = 0.0, double lambda = 1.0) {
  return {VelocitySet(1, lambda, {{1}, {-1}}), basis_1d(2), vec({0.0, s1}),
          vec({(1 + c) / 2, (1 - c) / 2}), VelocityShift::constant(vec({u}))};
}

inline SchemeSpec d1q3(const Vector& E, const Vector& s, double u = 0.0) {
  return {VelocitySet(1, 1.0, {{0}, {1}, {-1}}), basis_1d(3), s, E, VelocityShift::constant(vec({u}))};
}

/// Seeded E in a box around (0.5, 0.3, 0.2) and s_1, s_2 in [0.8, 1.3].
inline SchemeSpec d1q3_seeded(std::uint64_t seed, double u = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> e(-0.1, 0.1), r(0.8, 1.3);
  const double e1 = 0.3 + e(rng), e2 = 0.2 + e(rng);
  return d1q3(vec({1.0 - e1 - e2, e1, e2}), vec({0.0, r(rng), r(rng)}), u);
}

inline std::vector<MomentPolynomial> basis_d2q5() {
  MomentPolynomial energy(2), shear(2);
  energy.add_term({2, 0}, 1.0).add_term({0, 2}, 1.0);
  shear.add_term({2, 0}, 1.0).add_term({0, 2}, -1.0);
  return {MomentPolynomial::constant(2), MomentPolynomial::coordinate(2, 0),
          MomentPolynomial::coordinate(2, 1), energy, shear};
}

inline SchemeSpec d2q5(double u = 0.0) {
  return {VelocitySet(2, 1.0, {{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1}}), basis_d2q5(),
          vec({0.0, 1.2, 1.1, 1.25, 0.9}), vec({0.4, 0.25, 0.2, 0.05, 0.1}),
          VelocityShift::constant(vec({u, u}))};
}

using LMatrix = std::vector<std::vector<long double>>;

/// Gauss-Jordan inverse with partial pivoting in long double.
inline LMatrix gauss_jordan_inverse(LMatrix a) {
  const std::size_t n = a.size();
  LMatrix inv(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0L;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const long double p = a[col][col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col][c] /= p;
      inv[col][c] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double f = a[r][col];
      for (std::size_t c = 0; c < n; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  return inv;
}

/// M(u)_kj by direct monomial expansion, independent of the library evaluator.
inline LMatrix moment_matrix_oracle(const SchemeSpec& spec, const Vector& u) {
  const int q = spec.q(), d = spec.dim();
  LMatrix m(q, std::vector<long double>(q, 0.0L));
  for (int k = 0; k < q; ++k)
    for (int j = 0; j < q; ++j)
      for (const auto& [a, coef] : spec.basis[k].terms()) {
        long double t = coef;
        for (int ax = 0; ax < d; ++ax)
          for (int e = 0; e < a[ax]; ++e)
            t *= static_cast<long double>(spec.vset.lambda()) * spec.vset.lattice(j)[ax] - u[ax];
        m[k][j] += t;
      }
  return m;
}

/// Classical multiple-relaxation-time step at zero shift on a periodic 1D
/// array-of-structures field: f[x][j].
class ClassicalMrt1d {
 public:
  explicit ClassicalMrt1d(const SchemeSpec& spec) : spec_(spec), q_(spec.q()) {
    const auto m = moment_matrix_oracle(spec, Vector::Zero(1));
    const auto mi = gauss_jordan_inverse(m);
    M_.assign(q_, std::vector<double>(q_));
    Minv_.assign(q_, std::vector<double>(q_));
    for (int a = 0; a < q_; ++a)
      for (int b = 0; b < q_; ++b) {
        M_[a][b] = static_cast<double>(m[a][b]);
        Minv_[a][b] = static_cast<double>(mi[a][b]);
      }
  }

  std::vector<std::vector<double>> step(const std::vector<std::vector<double>>& f) const {
    const std::size_t n = f.size();
    std::vector<std::vector<double>> post(n, std::vector<double>(q_));
    for (std::size_t x = 0; x < n; ++x) {
      std::vector<double> m(q_, 0.0), meq(q_, 0.0);
      double rho = 0.0;
      for (int j = 0; j < q_; ++j) rho += f[x][j];
      for (int k = 0; k < q_; ++k)
        for (int j = 0; j < q_; ++j) {
          m[k] += M_[k][j] * f[x][j];
          meq[k] += M_[k][j] * spec_.E[j] * rho;
        }
      std::vector<double> dm(q_, 0.0);
      for (int k = 1; k < q_; ++k) dm[k] = spec_.s[k] * (meq[k] - m[k]);
      for (int j = 0; j < q_; ++j) {
        double v = f[x][j];
        for (int k = 0; k < q_; ++k) v += Minv_[j][k] * dm[k];
        post[x][j] = v;
      }
    }
    std::vector<std::vector<double>> next(n, std::vector<double>(q_));
    for (std::size_t x = 0; x < n; ++x)
      for (int j = 0; j < q_; ++j) {
        const long shift = spec_.vset.lattice(j)[0];
        const std::size_t from = static_cast<std::size_t>(((long(x) - shift) % long(n) + long(n)) % long(n));
        next[x][j] = post[from][j];
      }
    return next;
  }

 private:
  SchemeSpec spec_;
  int q_;
  std::vector<std::vector<double>> M_, Minv_;
};

using LComplex = std::complex<long double>;

/// Characteristic polynomial coefficients c_0..c_n (monic, c_n = 1) of a
/// complex matrix by the Faddeev-LeVerrier recursion.
inline std::vector<LComplex> characteristic_polynomial(const ComplexMatrix<long double>& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<LComplex> c(n + 1);
  c[n] = 1;
  ComplexMatrix<long double> Mk = ComplexMatrix<long double>::Zero(n, n);
  const ComplexMatrix<long double> I = ComplexMatrix<long double>::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    Mk = a * Mk + c[n - k + 1] * I;
    const ComplexMatrix<long double> AM = a * Mk;
    c[n - k] = -AM.trace() / static_cast<long double>(k);
  }
  return c;
}

/// All roots of the polynomial by Durand-Kerner iteration.
inline std::vector<LComplex> polynomial_roots(const std::vector<LComplex>& c) {
  const int n = static_cast<int>(c.size()) - 1;
  std::vector<LComplex> z(n);
  for (int i = 0; i < n; ++i) z[i] = std::pow(LComplex(0.4L, 0.9L), i);
  auto eval = [&](LComplex x) {
    LComplex v = 0;
    for (int i = n; i >= 0; --i) v = v * x + c[i];
    return v;
  };
  for (int it = 0; it < 2000; ++it) {
    long double change = 0;
    for (int i = 0; i < n; ++i) {
      LComplex den = c[n];
      for (int j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      const LComplex dz = eval(z[i]) / den;
      z[i] -= dz;
      change = std::max(change, std::abs(dz));
    }
    if (change < 1e-18L) break;
  }
  return z;
}

inline double max_cell_diff(const StateField& a, const StateField& b) {
  double worst = 0.0;
  for (int j = 0; j < a.q(); ++j)
    for (std::size_t c = 0; c < a.cells(); ++c) worst = std::max(worst, std::abs(a.f[j][c] - b.f[j][c]));
  return worst;
}

}  // namespace rvlbm::testing
