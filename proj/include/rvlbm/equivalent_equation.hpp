#pragma once

// Third-order equivalent equation of a relative-velocity scheme with one
// conservation law and linear equilibrium:
//
//   d_t rho = A_0 rho + dt A_1 rho + dt^2 A_2 rho + O(dt^3),
//
// where A_l contains only spatial derivatives of order l+1. Time derivatives
// are eliminated in two passes: d_t -> A_0 to get A_1, then d_t -> A_0 + dt A_1
// to get A_2.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rvlbm/differential_operator.hpp"
#include "rvlbm/errors.hpp"
#include "rvlbm/format.hpp"
#include "rvlbm/scheme_core.hpp"
#include "rvlbm/velocity_lattice.hpp"

namespace rvlbm {

/// sigma_k = 1/s_k - 1/2, defined for k >= 1.
struct HenonVector {
  std::vector<std::optional<double>> sigma;

  double operator[](int k) const {
    const auto& v = sigma.at(k);
    if (!v) throw DivisionByZero("Henon parameter undefined for k=" + std::to_string(k));
    return *v;
  }
  int size() const { return static_cast<int>(sigma.size()); }
};

inline HenonVector henon_sigma(const Vector& s) {
  HenonVector h;
  h.sigma.resize(s.size());
  for (int k = 1; k < s.size(); ++k) {
    if (s[k] == 0.0) throw DivisionByZero("s[" + std::to_string(k) + "] = 0 has no Henon parameter");
    h.sigma[k] = 1.0 / s[k] - 0.5;
  }
  return h;
}

/// c = sum_j v_j E_j, so that the equilibrium momentum is c rho.
inline Vector advection_vector(const SchemeSpec& spec) {
  Vector c = Vector::Zero(spec.dim());
  for (int j = 0; j < spec.q(); ++j) c += spec.vset.velocity(j) * spec.E[j];
  return c;
}

/// Replacement rule d_t rho -> sum_l dt^l A_l rho, truncated at A.size() terms.
struct TimeSubstitution {
  std::vector<DifferentialOperator> A;
};

/// Conservation defaults theta_k = sum_j M_kj E_j (d_t + v_j . grad) rho as a
/// dt-series of spatial operators: theta[k][l] is the dt^l coefficient.
struct ThetaSet {
  Vector frame;  // the u used for M(u)
  std::vector<std::vector<DifferentialOperator>> theta;

  const DifferentialOperator& at(int k, int order) const {
    if (order >= static_cast<int>(theta.at(k).size()))
      throw OrderUnavailable("theta_" + std::to_string(k) + " not available at order " +
                             std::to_string(order));
    return theta[k][order];
  }
};

namespace detail {

inline DifferentialOperator velocity_gradient(const SchemeSpec& spec, int j) {
  return DifferentialOperator::gradient_along(spec.vset.velocity(j));
}

// Order-0 particular derivative d_t + v_j . grad with d_t -> A_0.
inline DifferentialOperator material_derivative0(const SchemeSpec& spec, int j,
                                                 const DifferentialOperator& A0) {
  return A0 + velocity_gradient(spec, j);
}

inline Vector require_constant_shift(const SchemeSpec& spec) {
  if (!spec.u_tilde.is_constant())
    throw NonConstantShift("equivalent-equation analysis needs a constant relative velocity");
  return spec.u_tilde.constant_value();
}

}  // namespace detail

/// theta_k in the frame moving at `frame`, up to `orders` dt-orders.
inline ThetaSet conservation_defaults(const SchemeSpec& spec, const TimeSubstitution& subst,
                                      const Vector& frame, int orders) {
  if (orders < 1 || orders > static_cast<int>(subst.A.size()))
    throw OrderUnavailable("time substitution has " + std::to_string(subst.A.size()) +
                           " orders, " + std::to_string(orders) + " requested");
  const int q = spec.q(), d = spec.dim();
  const auto M = build_moment_matrix(spec.basis, spec.vset, frame);
  ThetaSet out;
  out.frame = frame;
  out.theta.assign(q, std::vector<DifferentialOperator>(orders, DifferentialOperator(d)));
  for (int k = 0; k < q; ++k) {
    for (int j = 0; j < q; ++j) {
      const double w = M.m(k, j) * spec.E[j];
      out.theta[k][0] += w * detail::material_derivative0(spec, j, subst.A[0]);
      for (int l = 1; l < orders; ++l) out.theta[k][l] += w * subst.A[l];
    }
  }
  return out;
}

inline ThetaSet conservation_defaults(const SchemeSpec& spec, const TimeSubstitution& subst) {
  return conservation_defaults(spec, subst, detail::require_constant_shift(spec),
                               static_cast<int>(subst.A.size()));
}

/// Which conservation default enters the dt-term of the density equation.
///  rest_frame    : theta computed with M(0), as printed in the density equation.
///  shifted_frame : theta computed with M(u), the literal alternative reading.
/// Both give the same A_1; they differ in A_2 by -sum_b sigma_b u_b d_b A_1.
enum class ThetaConvention { rest_frame, shifted_frame };

inline const char* to_string(ThetaConvention c) {
  return c == ThetaConvention::rest_frame ? "rest_frame" : "shifted_frame";
}

/// The d x d x ... symmetric coefficient tensor of a homogeneous operator of order n:
/// sum_{b1..bn} T_{b1..bn} d_b1 ... d_bn = op. Flat storage, axis 0 most significant.
struct SymmetricTensor {
  int dim = 0;
  int rank = 0;
  std::vector<double> data;

  double operator()(std::initializer_list<int> idx) const {
    std::size_t flat = 0;
    for (int i : idx) flat = flat * dim + static_cast<std::size_t>(i);
    return data.at(flat);
  }

  static SymmetricTensor from_operator(const DifferentialOperator& op, int dim, int rank) {
    SymmetricTensor t{dim, rank, {}};
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) n *= dim;
    t.data.assign(n, 0.0);
    std::vector<int> idx(rank);
    for (std::size_t flat = 0; flat < n; ++flat) {
      std::size_t rem = flat;
      for (int r = rank; r-- > 0;) {
        idx[r] = static_cast<int>(rem % dim);
        rem /= dim;
      }
      MultiIndex a(dim, 0);
      for (int i : idx) ++a[i];
      // Number of index tuples sharing this multi-index.
      double perms = 1.0;
      for (int r = 2; r <= rank; ++r) perms *= r;
      for (int e : a)
        for (int r = 2; r <= e; ++r) perms /= r;
      t.data[flat] = op.coefficient(a) / perms;
    }
    return t;
  }
};

/// The four groups that make up A_2.
struct ThirdOrderGroups {
  DifferentialOperator correction;     // sum_b sigma_b d_b theta_b^(1): dt-term fed by dt A_1
  DifferentialOperator sigma_sigma;    // -sum sigma_b sigma_l v_j^b d_b d_t^j (Minv_jl theta_l)
  DifferentialOperator twelfth;        // (1/12) sum v^b v^g d_bg d_t^j f^eq_j
  DifferentialOperator sixth;          // (1/6) sum d_b d_t theta_b
};

struct EquivalentEquation {
  int order = 0;
  int dim = 0;
  ThetaConvention convention = ThetaConvention::rest_frame;
  Vector u_tilde;
  std::vector<DifferentialOperator> ops;  // A_0 .. A_{order-1}
  Vector c;                               // advection, A_0 = -c . grad
  Matrix D;                               // diffusion, A_1 = D : grad grad
  SymmetricTensor T;                      // dispersion, A_2
  std::optional<ThirdOrderGroups> groups;

  /// Predicted growth rate sum_l dt^l A_l(ik), returned per dt-order.
  template <class Scalar = double>
  std::vector<std::complex<Scalar>> symbol(const std::vector<Scalar>& k) const {
    std::vector<std::complex<Scalar>> out;
    for (const auto& op : ops) out.push_back(op.symbol<Scalar>(k));
    return out;
  }
};

inline EquivalentEquation derive_equivalent_equation(
    const SchemeSpec& spec, int order, ThetaConvention convention = ThetaConvention::rest_frame) {
  if (order < 1 || order > 3)
    throw OrderUnavailable("equivalent equation available at orders 1..3, not " +
                           std::to_string(order));
  const Vector u = detail::require_constant_shift(spec);
  const int d = spec.dim(), q = spec.q();
  const Vector zero = Vector::Zero(d);
  constexpr double kPrune = 64 * 2.220446049250313e-16;

  EquivalentEquation eq;
  eq.order = order;
  eq.dim = d;
  eq.convention = convention;
  eq.u_tilde = u;
  eq.c = advection_vector(spec);
  eq.D = Matrix::Zero(d, d);

  TimeSubstitution subst{{DifferentialOperator::gradient_along(-eq.c)}};
  eq.ops.push_back(subst.A[0]);
  if (order >= 2) {
    const HenonVector sigma = henon_sigma(spec.s);
    const Vector& dt_frame = convention == ThetaConvention::rest_frame ? zero : u;

    const ThetaSet th_dt = conservation_defaults(spec, subst, dt_frame, 1);
    DifferentialOperator A1(d);
    for (int b = 0; b < d; ++b)
      A1 += sigma[b + 1] * DifferentialOperator::partial(d, b) * th_dt.at(b + 1, 0);
    A1 = A1.pruned(kPrune);
    subst.A.push_back(A1);
    eq.ops.push_back(A1);
    eq.D = Matrix::Zero(d, d);
    const auto D = SymmetricTensor::from_operator(A1, d, 2);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) eq.D(a, b) = D({a, b});

    if (order == 3) {
      const ThetaSet th_dt1 = conservation_defaults(spec, subst, dt_frame, 2);
      const ThetaSet th_rest = conservation_defaults(spec, subst, zero, 1);
      const ThetaSet th_shift = conservation_defaults(spec, subst, u, 1);
      const auto Mu = build_moment_matrix(spec.basis, spec.vset, u);
      const auto& A0 = subst.A[0];

      ThirdOrderGroups g{DifferentialOperator(d), DifferentialOperator(d), DifferentialOperator(d),
                         DifferentialOperator(d)};
      for (int b = 0; b < d; ++b)
        g.correction += sigma[b + 1] * DifferentialOperator::partial(d, b) * th_dt1.at(b + 1, 1);

      for (int j = 0; j < q; ++j) {
        const auto dtj = detail::material_derivative0(spec, j, A0);
        DifferentialOperator inner(d);  // sum_{l>=1} sigma_l Minv_jl theta_l
        for (int l = 1; l < q; ++l) inner += (sigma[l] * Mu.m_inv(j, l)) * th_shift.at(l, 0);
        for (int b = 0; b < d; ++b) {
          const double w = -sigma[b + 1] * spec.vset.component(j, b);
          g.sigma_sigma += w * DifferentialOperator::partial(d, b) * dtj * inner;
        }
        const auto vg = detail::velocity_gradient(spec, j);
        g.twelfth += (spec.E[j] / 12.0) * vg * vg * dtj;
      }
      for (int b = 0; b < d; ++b)
        g.sixth += (1.0 / 6.0) * DifferentialOperator::partial(d, b) * A0 * th_rest.at(b + 1, 0);

      const auto A2 = (g.correction + g.sigma_sigma + g.twelfth + g.sixth).pruned(kPrune);
      eq.ops.push_back(A2);
      eq.T = SymmetricTensor::from_operator(A2, d, 3);
      eq.groups = std::move(g);
    }
  }
  return eq;
}

/// True if A_l only has derivatives of order l+1, for every l.
inline bool has_graded_structure(const EquivalentEquation& eq) {
  for (std::size_t l = 0; l < eq.ops.size(); ++l)
    if (!eq.ops[l].homogeneous_of_order(static_cast<int>(l) + 1)) return false;
  return true;
}

/// xi_k = theta_k - dt sum_{j, l>=1} sigma_l M_kj d_t^j (Minv_jl theta_l), k >= 1,
/// in the frame of the scheme's constant u. xi[k][l] is the dt^l coefficient;
/// xi[0] is left empty.
struct XiPrediction {
  int order = 0;
  Vector u_tilde;
  HenonVector sigma;
  std::vector<std::vector<DifferentialOperator>> xi;

  /// m_k - m_k^eq before collision as a dt-series: index l holds the dt^(l+1) term.
  std::vector<DifferentialOperator> pre_collision(int k) const { return scaled(k, -(0.5 + sigma[k])); }
  /// m*_k - m_k^eq after collision.
  std::vector<DifferentialOperator> post_collision(int k) const { return scaled(k, 0.5 - sigma[k]); }

 private:
  std::vector<DifferentialOperator> scaled(int k, double w) const {
    std::vector<DifferentialOperator> out;
    for (const auto& op : xi.at(k)) out.push_back(w * op);
    return out;
  }
};

inline XiPrediction transition_prediction(const SchemeSpec& spec, int order) {
  if (order != 2 && order != 3)
    throw OrderUnavailable("transition prediction available at orders 2 and 3");
  const Vector u = detail::require_constant_shift(spec);
  const int d = spec.dim(), q = spec.q();
  const auto eq = derive_equivalent_equation(spec, 2);
  TimeSubstitution subst{{eq.ops[0], eq.ops[1]}};
  const ThetaSet th = conservation_defaults(spec, subst, u, 2);
  const auto M = build_moment_matrix(spec.basis, spec.vset, u);

  XiPrediction out;
  out.order = order;
  out.u_tilde = u;
  out.sigma = henon_sigma(spec.s);
  out.xi.assign(q, {});
  for (int k = 1; k < q; ++k) {
    out.xi[k].push_back(th.at(k, 0));
    if (order == 3) {
      DifferentialOperator x1 = th.at(k, 1);
      for (int j = 0; j < q; ++j) {
        const auto dtj = detail::material_derivative0(spec, j, subst.A[0]);
        DifferentialOperator inner(d);
        for (int l = 1; l < q; ++l) inner += (out.sigma[l] * M.m_inv(j, l)) * th.at(l, 0);
        x1 -= M.m(k, j) * dtj * inner;
      }
      out.xi[k].push_back(x1);
    }
  }
  return out;
}

/// Lambda^{bg}_l = sum_j v_j^b v_j^g Minv(0)_jl, stored [b][g][l].
struct MomentumVelocityTensor {
  int dim = 0;
  int q = 0;
  std::vector<double> data;
  double operator()(int b, int g, int l) const { return data.at((b * dim + g) * q + l); }
};

inline MomentumVelocityTensor momentum_velocity_tensor(const SchemeSpec& spec) {
  const int d = spec.dim(), q = spec.q();
  const auto M0 = build_moment_matrix(spec.basis, spec.vset, Vector::Zero(d));
  MomentumVelocityTensor t{d, q, std::vector<double>(static_cast<std::size_t>(d * d * q), 0.0)};
  for (int b = 0; b < d; ++b)
    for (int g = 0; g < d; ++g)
      for (int l = 0; l < q; ++l) {
        double sum = 0.0;
        for (int j = 0; j < q; ++j)
          sum += spec.vset.component(j, b) * spec.vset.component(j, g) * M0.m_inv(j, l);
        t.data[(b * d + g) * q + l] = sum;
      }
  return t;
}

struct DhumieresCrosscheck {
  DifferentialOperator direct;
  DifferentialOperator regrouped;
  double max_abs_diff = 0.0;
  double rel_diff = 0.0;
  bool pass = false;
};

/// At u = 0, rebuilds A_2 from the momentum-velocity tensor form and compares
/// with the direct derivation. Throws MismatchBeyondTolerance on disagreement.
inline DhumieresCrosscheck dhumieres_crosscheck(const SchemeSpec& spec, double rel_tol = 1e-10) {
  const Vector u = detail::require_constant_shift(spec);
  if (u.cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError("d'Humieres cross-check needs u = 0");
  const int d = spec.dim(), q = spec.q();
  const auto eq = derive_equivalent_equation(spec, 3);
  const HenonVector sigma = henon_sigma(spec.s);
  const auto Lam = momentum_velocity_tensor(spec);
  TimeSubstitution subst{{eq.ops[0], eq.ops[1]}};
  const ThetaSet th = conservation_defaults(spec, subst, u, 1);
  const auto& A0 = eq.ops[0];

  DifferentialOperator regrouped = eq.groups->correction;
  for (int b = 0; b < d; ++b) {
    const auto db = DifferentialOperator::partial(d, b);
    regrouped -= (sigma[b + 1] * sigma[b + 1]) * db * A0 * th.at(b + 1, 0);
    regrouped += (1.0 / 6.0) * db * A0 * th.at(b + 1, 0);
    for (int g = 0; g < d; ++g) {
      const auto dbg = db * DifferentialOperator::partial(d, g);
      for (int l = 0; l < q; ++l) {
        const double w = (l >= 1 ? -sigma[b + 1] * sigma[l] : 0.0) + 1.0 / 12.0;
        regrouped += (w * Lam(b, g, l)) * dbg * th.at(l, 0);
      }
    }
  }

  DhumieresCrosscheck r;
  r.direct = eq.ops[2];
  r.regrouped = regrouped.pruned(64 * 2.220446049250313e-16);
  r.max_abs_diff = r.direct.max_abs_difference(r.regrouped);
  const double scale = std::max(r.direct.max_abs_coefficient(), r.regrouped.max_abs_coefficient());
  r.rel_diff = scale > 0.0 ? r.max_abs_diff / scale : r.max_abs_diff;
  r.pass = r.max_abs_diff <= rel_tol * scale + 1e-300 || r.max_abs_diff == 0.0;
  if (!r.pass)
    throw MismatchBeyondTolerance("regrouped A_2 differs from direct A_2 by " +
                                  format_double(r.rel_diff) + " (relative)");
  return r;
}

inline nlohmann::json operator_to_json(const DifferentialOperator& op, int order) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [a, coef] : op.terms())
    terms.push_back({{"multi_index", a}, {"coefficient", coef}});
  return {{"order", order}, {"terms", std::move(terms)}};
}

inline nlohmann::json to_json(const EquivalentEquation& eq) {
  nlohmann::json j;
  j["truncation_order"] = eq.order;
  j["dim"] = eq.dim;
  j["theta_convention"] = to_string(eq.convention);
  j["u_tilde"] = std::vector<double>(eq.u_tilde.data(), eq.u_tilde.data() + eq.u_tilde.size());
  j["operators"] = nlohmann::json::array();
  for (std::size_t l = 0; l < eq.ops.size(); ++l)
    j["operators"].push_back(operator_to_json(eq.ops[l], static_cast<int>(l)));
  j["c"] = std::vector<double>(eq.c.data(), eq.c.data() + eq.c.size());
  if (eq.order >= 2) {
    nlohmann::json D = nlohmann::json::array();
    for (int a = 0; a < eq.dim; ++a) {
      std::vector<double> row(eq.dim);
      for (int b = 0; b < eq.dim; ++b) row[b] = eq.D(a, b);
      D.push_back(row);
    }
    j["D"] = std::move(D);
  }
  if (eq.order == 3) {
    nlohmann::json T = nlohmann::json::array();
    for (int a = 0; a < eq.dim; ++a) {
      nlohmann::json plane = nlohmann::json::array();
      for (int b = 0; b < eq.dim; ++b) {
        std::vector<double> row(eq.dim);
        for (int g = 0; g < eq.dim; ++g) row[g] = eq.T({a, b, g});
        plane.push_back(row);
      }
      T.push_back(std::move(plane));
    }
    j["T"] = std::move(T);
  }
  return j;
}

/// Human-readable PDE, e.g. "∂t ρ + 0.5 ∂x ρ = Δ·(0.375 ∂xx ρ) + O(Δ²)".
inline std::string pretty_print(const EquivalentEquation& eq) {
  std::ostringstream os;
  os << "∂t ρ";
  for (const auto& [a, coef] : eq.ops[0].terms()) {
    const double c = -coef;
    os << (c < 0 ? " - " : " + ") << format_short(std::abs(c)) << " " << derivative_name(a)
       << " ρ";
  }
  os << " = ";
  bool any = false;
  static const char* powers[] = {"", "Δ", "Δ²"};
  for (std::size_t l = 1; l < eq.ops.size(); ++l) {
    if (eq.ops[l].empty()) continue;
    os << (any ? " + " : "") << powers[l] << "·(";
    bool first = true;
    for (const auto& [a, coef] : eq.ops[l].terms()) {
      if (first)
        os << (coef < 0 ? "-" : "");
      else
        os << (coef < 0 ? " - " : " + ");
      os << format_short(std::abs(coef)) << " " << derivative_name(a) << " ρ";
      first = false;
    }
    os << ")";
    any = true;
  }
  static const char* rest[] = {"O(Δ)", "O(Δ²)", "O(Δ³)"};
  os << (any ? " + " : "") << rest[eq.order - 1];
  return os.str();
}

}  // namespace rvlbm
