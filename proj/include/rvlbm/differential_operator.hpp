#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include "rvlbm/errors.hpp"
#include "rvlbm/velocity_lattice.hpp"

namespace rvlbm {

/// Constant-coefficient spatial operator sum_a C_a d^a, stored as a sparse map
/// from multi-index to coefficient. Operators commute, so composition is
/// polynomial multiplication in (d_1, ..., d_d).
class DifferentialOperator {
 public:
  using Terms = std::map<MultiIndex, double, GradedLex>;

  DifferentialOperator() = default;
  explicit DifferentialOperator(int dim) : dim_(dim) {}

  static DifferentialOperator identity(int dim) {
    DifferentialOperator op(dim);
    op.add(MultiIndex(dim, 0), 1.0);
    return op;
  }
  static DifferentialOperator partial(int dim, int axis, double coef = 1.0) {
    DifferentialOperator op(dim);
    MultiIndex a(dim, 0);
    a.at(axis) = 1;
    op.add(a, coef);
    return op;
  }
  /// sum_alpha w_alpha d_alpha.
  static DifferentialOperator gradient_along(const Vector& w) {
    DifferentialOperator op(static_cast<int>(w.size()));
    for (int a = 0; a < w.size(); ++a) op += partial(op.dim_, a, w[a]);
    return op;
  }

  DifferentialOperator& add(const MultiIndex& a, double coef) {
    if (static_cast<int>(a.size()) != dim_) throw DimensionMismatch("multi-index dimension");
    if (coef == 0.0) return *this;
    auto& slot = terms_[a];
    slot += coef;
    if (slot == 0.0) terms_.erase(a);
    return *this;
  }

  int dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  double coefficient(const MultiIndex& a) const {
    auto it = terms_.find(a);
    return it == terms_.end() ? 0.0 : it->second;
  }

  DifferentialOperator& operator+=(const DifferentialOperator& o) {
    adopt_dim(o);
    for (const auto& [a, c] : o.terms_) add(a, c);
    return *this;
  }
  DifferentialOperator& operator-=(const DifferentialOperator& o) {
    adopt_dim(o);
    for (const auto& [a, c] : o.terms_) add(a, -c);
    return *this;
  }
  DifferentialOperator& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [a, c] : terms_) c *= s;
    return *this;
  }

  friend DifferentialOperator operator+(DifferentialOperator a, const DifferentialOperator& b) {
    return a += b;
  }
  friend DifferentialOperator operator-(DifferentialOperator a, const DifferentialOperator& b) {
    return a -= b;
  }
  friend DifferentialOperator operator*(DifferentialOperator a, double s) { return a *= s; }
  friend DifferentialOperator operator*(double s, DifferentialOperator a) { return a *= s; }

  /// Composition.
  friend DifferentialOperator operator*(const DifferentialOperator& a,
                                        const DifferentialOperator& b) {
    if (a.empty() || b.empty()) return DifferentialOperator(std::max(a.dim_, b.dim_));
    if (a.dim_ != b.dim_) throw DimensionMismatch("composing operators of different dimension");
    DifferentialOperator out(a.dim_);
    MultiIndex sum(a.dim_);
    for (const auto& [ia, ca] : a.terms_)
      for (const auto& [ib, cb] : b.terms_) {
        for (int k = 0; k < a.dim_; ++k) sum[k] = ia[k] + ib[k];
        out.add(sum, ca * cb);
      }
    return out;
  }

  /// Drops terms with |C_a| <= rel_tol * max|C|; used to discard round-off residue.
  DifferentialOperator pruned(double rel_tol) const {
    double scale = 0.0;
    for (const auto& [a, c] : terms_) scale = std::max(scale, std::abs(c));
    DifferentialOperator out(dim_);
    for (const auto& [a, c] : terms_)
      if (std::abs(c) > rel_tol * scale) out.terms_.emplace(a, c);
    return out;
  }

  /// True if every stored multi-index has |a| == order.
  bool homogeneous_of_order(int order) const {
    for (const auto& [a, c] : terms_)
      if (total_degree(a) != order) return false;
    return true;
  }

  /// Fourier symbol at wavevector k: sum_a C_a prod (i k_alpha)^{a_alpha}.
  template <class Scalar = double>
  std::complex<Scalar> symbol(const std::vector<Scalar>& k) const {
    if (!empty() && static_cast<int>(k.size()) != dim_)
      throw DimensionMismatch("wavevector dimension");
    std::complex<Scalar> sum(0);
    for (const auto& [a, c] : terms_) {
      std::complex<Scalar> mono(static_cast<Scalar>(c));
      for (int ax = 0; ax < dim_; ++ax)
        for (int e = 0; e < a[ax]; ++e) mono *= std::complex<Scalar>(0, k[ax]);
      sum += mono;
    }
    return sum;
  }

  double max_abs_difference(const DifferentialOperator& o) const {
    double m = 0.0;
    for (const auto& [a, c] : (*this - o).terms_) m = std::max(m, std::abs(c));
    return m;
  }
  double max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [a, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

 private:
  void adopt_dim(const DifferentialOperator& o) {
    if (dim_ == 0) dim_ = o.dim_;
    if (o.dim_ != 0 && o.dim_ != dim_) throw DimensionMismatch("operators of different dimension");
  }

  int dim_ = 0;
  Terms terms_;
};

/// Pretty form of one multi-index derivative, e.g. "∂xxy".
inline std::string derivative_name(const MultiIndex& a) {
  static const char* axes[] = {"x", "y", "z"};
  std::string s = "∂";
  for (std::size_t ax = 0; ax < a.size(); ++ax)
    for (int e = 0; e < a[ax]; ++e) s += ax < 3 ? axes[ax] : ("x" + std::to_string(ax + 1));
  return s;
}

}  // namespace rvlbm
