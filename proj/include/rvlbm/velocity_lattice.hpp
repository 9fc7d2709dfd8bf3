#pragma once

// Velocity sets, moment polynomials and the relative-velocity moment matrix
// M(u)_{kj} = P_k(v_j - u).

#include <Eigen/Dense>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rvlbm/errors.hpp"

namespace rvlbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Exponent multi-index a = (a_1, ..., a_d).
using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& a) {
  int n = 0;
  for (int e : a) n += e;
  return n;
}

/// Graded lexicographic order: total degree first, then the first axis most
/// significant (degree 2 in 2D iterates as X^2, XY, Y^2).
struct GradedLex {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const {
    const int da = total_degree(a), db = total_degree(b);
    if (da != db) return da < db;
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  }
};

/// A polynomial in R[X_1..X_d] stored as a sparse exponent map. Zero
/// coefficients are never stored, so two polynomials are equal iff their
/// maps are equal.
class MomentPolynomial {
 public:
  using Terms = std::map<MultiIndex, double, GradedLex>;

  MomentPolynomial() = default;
  explicit MomentPolynomial(int dim) : dim_(dim) {}

  static MomentPolynomial constant(int dim, double value = 1.0) {
    MomentPolynomial p(dim);
    p.add_term(MultiIndex(dim, 0), value);
    return p;
  }

  /// X_axis, axis in [0, dim).
  static MomentPolynomial coordinate(int dim, int axis) {
    MomentPolynomial p(dim);
    MultiIndex a(dim, 0);
    a.at(axis) = 1;
    p.add_term(a, 1.0);
    return p;
  }

  static MomentPolynomial monomial(const MultiIndex& exps, double coef = 1.0) {
    MomentPolynomial p(static_cast<int>(exps.size()));
    p.add_term(exps, coef);
    return p;
  }

  MomentPolynomial& add_term(const MultiIndex& exps, double coef) {
    if (static_cast<int>(exps.size()) != dim_)
      throw DimensionMismatch("monomial has " + std::to_string(exps.size()) +
                              " exponents, polynomial dimension is " + std::to_string(dim_));
    for (int e : exps)
      if (e < 0) throw DimensionMismatch("negative exponent in monomial");
    auto& slot = terms_[exps];
    slot += coef;
    if (slot == 0.0) terms_.erase(exps);
    return *this;
  }

  int dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool operator==(const MomentPolynomial&) const = default;

  int degree() const { return terms_.empty() ? 0 : total_degree(terms_.rbegin()->first); }

 private:
  int dim_ = 0;
  Terms terms_;
};

/// Sum_a coef(a) * prod_alpha x_alpha^{a_alpha}.
template <class Scalar, class Point>
Scalar evaluate_polynomial(const MomentPolynomial& p, const Point& x) {
  Scalar sum = 0;
  for (const auto& [exps, coef] : p.terms()) {
    Scalar mono = static_cast<Scalar>(coef);
    for (std::size_t a = 0; a < exps.size(); ++a)
      for (int e = 0; e < exps[a]; ++e) mono *= static_cast<Scalar>(x[a]);
    sum += mono;
  }
  return sum;
}

inline double evaluate_polynomial(const MomentPolynomial& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.dim())
    throw DimensionMismatch("point dimension " + std::to_string(x.size()) +
                            " does not match polynomial dimension " + std::to_string(p.dim()));
  return evaluate_polynomial<double>(p, x);
}

/// The q velocities of a DdQq scheme, stored as integer lattice vectors
/// (multiples of lambda per axis).
class VelocitySet {
 public:
  VelocitySet(int dim, double lambda, std::vector<std::vector<int>> lattice_velocities)
      : dim_(dim), lambda_(lambda), units_(std::move(lattice_velocities)) {
    validate();
  }

  /// Build from real components given in units of lambda; every component
  /// must be an integer. The error names the offending velocity.
  static VelocitySet from_components(int dim, double lambda,
                                     const std::vector<std::vector<double>>& v) {
    std::vector<std::vector<int>> units;
    units.reserve(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (static_cast<int>(v[j].size()) != dim)
        throw DimensionMismatch("velocity v_" + std::to_string(j) + " has " +
                                std::to_string(v[j].size()) + " components, expected " +
                                std::to_string(dim));
      std::vector<int> u(dim);
      for (int a = 0; a < dim; ++a) {
        const double r = std::round(v[j][a]);
        if (!std::isfinite(v[j][a]) || std::abs(v[j][a] - r) > 1e-12)
          throw NonLatticeVelocity("velocity v_" + std::to_string(j) +
                                   " is not a lattice vector: component " + std::to_string(a) +
                                   " = " + std::to_string(v[j][a]) + " (units of lambda)");
        u[a] = static_cast<int>(r);
      }
      units.push_back(std::move(u));
    }
    return VelocitySet(dim, lambda, std::move(units));
  }

  int dim() const { return dim_; }
  int q() const { return static_cast<int>(units_.size()); }
  double lambda() const { return lambda_; }

  /// Integer lattice offset of velocity j (v_j / lambda).
  const std::vector<int>& lattice(int j) const { return units_.at(j); }

  /// Physical velocity v_j.
  Vector velocity(int j) const {
    Vector v(dim_);
    for (int a = 0; a < dim_; ++a) v[a] = lambda_ * units_.at(j)[a];
    return v;
  }
  double component(int j, int axis) const { return lambda_ * units_[j][axis]; }

 private:
  void validate() const {
    if (dim_ < 1) throw DimensionMismatch("spatial dimension must be positive");
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_))
      throw DimensionMismatch("velocity scale lambda must be positive");
    if (q() < dim_ + 1)
      throw DimensionMismatch("need q >= d+1 velocities, got q=" + std::to_string(q()));
    std::set<std::vector<int>> seen;
    for (int j = 0; j < q(); ++j) {
      if (static_cast<int>(units_[j].size()) != dim_)
        throw DimensionMismatch("velocity v_" + std::to_string(j) + " has wrong dimension");
      if (!seen.insert(units_[j]).second)
        throw DimensionMismatch("velocity v_" + std::to_string(j) + " duplicates an earlier one");
    }
  }

  int dim_;
  double lambda_;
  std::vector<std::vector<int>> units_;
};

/// Checks the basis convention P_0 = 1, P_k = X_k (1 <= k <= d) and size q.
inline void check_basis(const std::vector<MomentPolynomial>& basis, const VelocitySet& vset) {
  const int d = vset.dim();
  if (static_cast<int>(basis.size()) != vset.q())
    throw DimensionMismatch("basis has " + std::to_string(basis.size()) +
                            " polynomials, velocity set has q=" + std::to_string(vset.q()));
  for (std::size_t k = 0; k < basis.size(); ++k)
    if (basis[k].dim() != d)
      throw DimensionMismatch("polynomial P_" + std::to_string(k) + " has wrong dimension");
  if (!(basis[0] == MomentPolynomial::constant(d)))
    throw DimensionMismatch("P_0 must be the constant polynomial 1");
  for (int k = 1; k <= d; ++k)
    if (!(basis[k] == MomentPolynomial::coordinate(d, k - 1)))
      throw DimensionMismatch("P_" + std::to_string(k) + " must be X_" + std::to_string(k));
}

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Relative-velocity moment matrix M(u) with its inverse. A value type: every
/// instance owns its storage.
template <class Scalar = double>
struct BasicMomentMatrix {
  DenseMatrix<Scalar> m;
  DenseMatrix<Scalar> m_inv;
  double cond_estimate = 1.0;
  Vector u_tilde;
};

using MomentMatrix = BasicMomentMatrix<double>;

namespace detail {

// LU with partial pivoting; smallest pivot below 1e-12 * max|entry| is singular.
template <class Scalar>
std::pair<DenseMatrix<Scalar>, double> checked_inverse(const DenseMatrix<Scalar>& a,
                                                       const char* what) {
  using std::abs;
  const Eigen::Index n = a.rows();
  if (n != a.cols() || n == 0) throw DimensionMismatch(std::string(what) + " is not square");
  Eigen::PartialPivLU<DenseMatrix<Scalar>> lu(a);
  const Scalar scale = a.cwiseAbs().maxCoeff();
  const Scalar min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(scale > Scalar(0)) || min_pivot < Scalar(1e-12) * scale)
    throw SingularMatrix(std::string(what) + " is singular (smallest pivot " +
                         std::to_string(static_cast<double>(min_pivot)) + ")");
  const double rcond = static_cast<double>(lu.rcond());
  return {lu.inverse(), rcond > 0.0 ? std::max(1.0, 1.0 / rcond) : 1e300};
}

}  // namespace detail

template <class Scalar = double>
BasicMomentMatrix<Scalar> build_moment_matrix(const std::vector<MomentPolynomial>& basis,
                                              const VelocitySet& vset, const Vector& u_tilde) {
  check_basis(basis, vset);
  if (u_tilde.size() != vset.dim())
    throw DimensionMismatch("u_tilde has dimension " + std::to_string(u_tilde.size()) +
                            ", expected " + std::to_string(vset.dim()));
  const int q = vset.q(), d = vset.dim();
  BasicMomentMatrix<Scalar> out;
  out.m.resize(q, q);
  std::vector<Scalar> rel(d);
  for (int j = 0; j < q; ++j) {
    for (int a = 0; a < d; ++a)
      rel[a] = static_cast<Scalar>(vset.lambda()) * static_cast<Scalar>(vset.lattice(j)[a]) -
               static_cast<Scalar>(u_tilde[a]);
    for (int k = 0; k < q; ++k) out.m(k, j) = evaluate_polynomial<Scalar>(basis[k], rel);
  }
  auto [inv, cond] = detail::checked_inverse<Scalar>(out.m, "moment matrix");
  out.m_inv = std::move(inv);
  out.cond_estimate = cond;
  out.u_tilde = u_tilde;
  return out;
}

/// M(u) M(0)^{-1}: maps rest-frame moments to the moments in the frame moving at u.
inline Matrix shift_conjugation(const std::vector<MomentPolynomial>& basis, const VelocitySet& vset,
                                const Vector& u_tilde) {
  const auto shifted = build_moment_matrix(basis, vset, u_tilde);
  const auto rest = build_moment_matrix(basis, vset, Vector::Zero(vset.dim()));
  return shifted.m * rest.m_inv;
}

}  // namespace rvlbm
