#pragma once

// Von Neumann analysis of the linear scheme. The one-step Fourier operator is
//
//   G(k) = diag(exp(-i k.v_j dt)) M^{-1} [ (I - S) M + S M E 1^T ],
//
// and the growth rate log(g)/dt of its branch through 1 is fitted as a
// polynomial in dt.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rvlbm/equivalent_equation.hpp"
#include "rvlbm/errors.hpp"
#include "rvlbm/format.hpp"
#include "rvlbm/scheme_core.hpp"
#include "rvlbm/velocity_lattice.hpp"

namespace rvlbm {

template <class Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar = long double>
struct AmplificationMatrix {
  ComplexMatrix<Scalar> g;
  std::vector<double> k;
  Scalar dt = 0;
};

/// Collision matrix C = M^{-1}[(I - S)M + S M E 1^T], i.e. f* = C f.
template <class Scalar = long double>
DenseMatrix<Scalar> collision_matrix(const SchemeSpec& spec) {
  if (!spec.u_tilde.is_constant())
    throw NonConstantShift("amplification analysis needs a constant relative velocity");
  const int q = spec.q();
  const auto M = build_moment_matrix<Scalar>(spec.basis, spec.vset, spec.u_tilde.constant_value());
  DenseMatrix<Scalar> S = DenseMatrix<Scalar>::Zero(q, q);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> E(q);
  for (int j = 0; j < q; ++j) {
    S(j, j) = static_cast<Scalar>(spec.s[j]);
    E[j] = static_cast<Scalar>(spec.E[j]);
  }
  const DenseMatrix<Scalar> I = DenseMatrix<Scalar>::Identity(q, q);
  const DenseMatrix<Scalar> ones_row = DenseMatrix<Scalar>::Ones(1, q);
  return M.m_inv * ((I - S) * M.m + S * M.m * E * ones_row);
}

template <class Scalar = long double>
AmplificationMatrix<Scalar> amplification_matrix(const SchemeSpec& spec, const std::vector<double>& k,
                                                 Scalar dt) {
  if (static_cast<int>(k.size()) != spec.dim()) throw DimensionMismatch("wavevector dimension");
  const int q = spec.q();
  const DenseMatrix<Scalar> C = collision_matrix<Scalar>(spec);
  AmplificationMatrix<Scalar> out{ComplexMatrix<Scalar>(q, q), k, dt};
  for (int j = 0; j < q; ++j) {
    Scalar phase = 0;
    for (int a = 0; a < spec.dim(); ++a)
      phase += static_cast<Scalar>(k[a]) * static_cast<Scalar>(spec.vset.lambda()) *
               static_cast<Scalar>(spec.vset.lattice(j)[a]);
    const std::complex<Scalar> shift = std::polar(Scalar(1), -phase * dt);
    for (int i = 0; i < q; ++i) out.g(j, i) = shift * C(j, i);
  }
  return out;
}

template <class Scalar>
std::vector<std::complex<Scalar>> eigenvalues(const ComplexMatrix<Scalar>& g) {
  Eigen::ComplexEigenSolver<ComplexMatrix<Scalar>> solver(g, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw Error("eigenvalue iteration did not converge");
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

/// Eigenvalue nearest to `hint`. Ambiguous when a second eigenvalue is within
/// 1e-9 of both the chosen one and the hint.
template <class Scalar>
std::complex<Scalar> dominant_eigenvalue(const ComplexMatrix<Scalar>& g,
                                         std::complex<Scalar> hint = {1, 0}) {
  const auto ev = eigenvalues(g);
  std::size_t best = 0;
  for (std::size_t i = 1; i < ev.size(); ++i)
    if (std::abs(ev[i] - hint) < std::abs(ev[best] - hint)) best = i;
  const Scalar tol = static_cast<Scalar>(1e-9);
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (i != best && std::abs(ev[i] - ev[best]) < tol && std::abs(ev[i] - hint) < tol)
      throw BranchAmbiguity("two eigenvalues within 1e-9 of the continuity hint");
  return ev[best];
}

/// The branch continuous from g = 1 at k = 0. Falls back to stepping k up from
/// zero in ten increments when the direct selection is ambiguous.
template <class Scalar = long double>
std::complex<Scalar> tracked_eigenvalue(const SchemeSpec& spec, const std::vector<double>& k, Scalar dt) {
  try {
    return dominant_eigenvalue(amplification_matrix<Scalar>(spec, k, dt).g);
  } catch (const BranchAmbiguity&) {
    std::complex<Scalar> hint(1, 0);
    std::vector<double> kk(k.size());
    for (int step = 1; step <= 10; ++step) {
      for (std::size_t a = 0; a < k.size(); ++a) kk[a] = k[a] * step / 10.0;
      hint = dominant_eigenvalue(amplification_matrix<Scalar>(spec, kk, dt).g, hint);
    }
    return hint;
  }
}

struct SymbolSeries {
  std::vector<double> k;
  std::complex<double> mu0, mu1, mu2;
  double fit_residual = 0.0;
  double dt0 = 0.0;
};

inline std::vector<double> geometric_dt_sequence(double dt0, int count) {
  if (count < 5) throw ValidationError("dt sequence needs at least 5 refinements");
  std::vector<double> out(count);
  for (int m = 0; m < count; ++m) out[m] = std::ldexp(dt0, -m);
  return out;
}

/// Least-squares fit of log(g)/dt = mu0 + mu1 dt + mu2 dt^2 + mu3 dt^3 over
/// the given steps; mu3 absorbs truncation and is not reported.
template <class Scalar = long double>
SymbolSeries extract_symbol_series(const SchemeSpec& spec, const std::vector<double>& k,
                                   const std::vector<double>& dt_sequence) {
  if (dt_sequence.size() < 5) throw ValidationError("dt sequence needs at least 5 refinements");
  const int n = static_cast<int>(dt_sequence.size());
  const Scalar dt0 = static_cast<Scalar>(dt_sequence.front());
  using RealMatrix = DenseMatrix<Scalar>;
  RealMatrix V(n, 4), Y(n, 2);
  for (int m = 0; m < n; ++m) {
    const Scalar dt = static_cast<Scalar>(dt_sequence[m]);
    const std::complex<Scalar> rate = std::log(tracked_eigenvalue<Scalar>(spec, k, dt)) / dt;
    const Scalar t = dt / dt0;
    Scalar p = 1;
    for (int c = 0; c < 4; ++c, p *= t) V(m, c) = p;
    Y(m, 0) = rate.real();
    Y(m, 1) = rate.imag();
  }
  const RealMatrix coef = V.colPivHouseholderQr().solve(Y);
  const RealMatrix resid = V * coef - Y;
  SymbolSeries out;
  out.k = k;
  out.dt0 = dt_sequence.front();
  auto mu = [&](int p) {
    Scalar scale = 1;
    for (int i = 0; i < p; ++i) scale *= dt0;
    return std::complex<double>(static_cast<double>(coef(p, 0) / scale),
                                static_cast<double>(coef(p, 1) / scale));
  };
  out.mu0 = mu(0);
  out.mu1 = mu(1);
  out.mu2 = mu(2);
  Scalar worst = 0;
  for (int m = 0; m < n; ++m) worst = std::max(worst, std::hypot(resid(m, 0), resid(m, 1)));
  out.fit_residual = static_cast<double>(worst);
  if (out.fit_residual > 1e-8 * std::abs(out.mu0 + 1.0))
    throw PoorFit("growth-rate fit residual " + format_double(out.fit_residual) + " at |k| dt0 = " +
                  format_double(out.dt0));
  return out;
}

struct OracleTolerances {
  double rel[3] = {1e-8, 1e-6, 1e-4};
  double floor[3] = {1e-12, 1e-10, 1e-8};
};

struct OracleOptions {
  OracleTolerances tol;
  double k_dx = 2e-3;         // |k| lambda dt0 for the largest step of each sequence
  std::optional<double> dt0;  // fixed largest step instead of k_dx / (|k| lambda)
  int refinements = 5;  // dt_m = dt0 / 2^m, m < refinements
};

struct DispersionSample {
  std::vector<double> k;
  std::complex<double> mu[3];
  std::complex<double> predicted[3];
  double abs_err[3] = {0, 0, 0};
  double rel_err[3] = {0, 0, 0};
  bool order_pass[3] = {false, false, false};
  bool pass = false;
  double fit_residual = 0.0;
  double dt0 = 0.0;
  double max_abs_eigenvalue = 0.0;
  std::string error;
};

struct DispersionReport {
  std::vector<DispersionSample> samples;
  double max_abs_eigenvalue = 0.0;
  bool pass = true;
};

inline double norm2(const std::vector<double>& k) {
  double s = 0.0;
  for (double v : k) s += v * v;
  return std::sqrt(s);
}

/// Compares the predicted symbol of `eq` with the oracle series at each k.
/// Failures are report content, never exceptions.
inline DispersionReport compare_with_prediction(const SchemeSpec& spec, const EquivalentEquation& eq,
                                                std::vector<std::vector<double>> k_samples,
                                                const OracleOptions& opt = {}) {
  std::sort(k_samples.begin(), k_samples.end());
  DispersionReport report;
  for (const auto& k : k_samples) {
    DispersionSample s;
    s.k = k;
    const double kn = norm2(k);
    if (opt.dt0)
      s.dt0 = *opt.dt0;
    else
      s.dt0 = kn > 0.0 ? opt.k_dx / (kn * spec.vset.lambda()) : opt.k_dx / spec.vset.lambda();
    const auto pred = eq.symbol<double>(k);
    for (int l = 0; l < 3; ++l) s.predicted[l] = l < static_cast<int>(pred.size()) ? pred[l] : 0.0;
    try {
      const auto series = extract_symbol_series(spec, k, geometric_dt_sequence(s.dt0, opt.refinements));
      s.mu[0] = series.mu0;
      s.mu[1] = series.mu1;
      s.mu[2] = series.mu2;
      s.fit_residual = series.fit_residual;
      for (const auto& ev : eigenvalues(amplification_matrix<long double>(spec, k, s.dt0).g))
        s.max_abs_eigenvalue = std::max(s.max_abs_eigenvalue, static_cast<double>(std::abs(ev)));
      s.pass = true;
      for (int l = 0; l < std::min(3, eq.order); ++l) {
        s.abs_err[l] = std::abs(s.mu[l] - s.predicted[l]);
        const double mag = std::abs(s.predicted[l]);
        s.rel_err[l] = mag > 0.0 ? s.abs_err[l] / mag : s.abs_err[l];
        s.order_pass[l] = s.abs_err[l] <= std::max(opt.tol.rel[l] * mag, opt.tol.floor[l]);
        s.pass = s.pass && s.order_pass[l];
      }
    } catch (const Error& e) {
      s.error = e.what();
      s.pass = false;
    }
    report.max_abs_eigenvalue = std::max(report.max_abs_eigenvalue, s.max_abs_eigenvalue);
    report.pass = report.pass && s.pass;
    report.samples.push_back(std::move(s));
  }
  return report;
}

inline DispersionReport compare_with_prediction(const SchemeSpec& spec,
                                                const std::vector<std::vector<double>>& k_samples,
                                                const OracleOptions& opt = {}) {
  return compare_with_prediction(spec, derive_equivalent_equation(spec, 3), k_samples, opt);
}

/// Deterministic wavevectors: `count` magnitudes in [0.05, 0.5] on the axes and,
/// for d >= 2, the diagonals.
inline std::vector<std::vector<double>> default_k_samples(int dim, int count = 8) {
  std::vector<std::vector<double>> dirs;
  for (int a = 0; a < dim; ++a) {
    std::vector<double> e(dim, 0.0);
    e[a] = 1.0;
    dirs.push_back(e);
  }
  if (dim >= 2) {
    std::vector<double> diag(dim, 1.0 / std::sqrt(double(dim)));
    dirs.push_back(diag);
    diag[1] = -diag[1];
    dirs.push_back(diag);
  }
  std::vector<std::vector<double>> out;
  for (int i = 0; i < count; ++i) {
    const double mag = 0.05 + 0.45 * i / std::max(1, count - 1);
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    auto k = dirs[i % dirs.size()];
    for (double& v : k) v *= sign * mag;
    out.push_back(std::move(k));
  }
  return out;
}

inline nlohmann::json to_json(const DispersionReport& r) {
  auto cx = [](std::complex<double> z) { return nlohmann::json::array({z.real(), z.imag()}); };
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples) {
    nlohmann::json j;
    j["k"] = s.k;
    j["dt0"] = s.dt0;
    j["mu"] = {cx(s.mu[0]), cx(s.mu[1]), cx(s.mu[2])};
    j["predicted"] = {cx(s.predicted[0]), cx(s.predicted[1]), cx(s.predicted[2])};
    j["abs_err"] = {s.abs_err[0], s.abs_err[1], s.abs_err[2]};
    j["rel_err"] = {s.rel_err[0], s.rel_err[1], s.rel_err[2]};
    j["fit_residual"] = s.fit_residual;
    j["max_abs_eigenvalue"] = s.max_abs_eigenvalue;
    j["pass"] = s.pass;
    if (!s.error.empty()) j["error"] = s.error;
    samples.push_back(std::move(j));
  }
  return {{"samples", std::move(samples)},
          {"max_abs_eigenvalue", r.max_abs_eigenvalue},
          {"pass", r.pass}};
}

/// One row per (k, order).
inline std::string to_csv(const DispersionReport& r) {
  std::string out = "sample,k,order,mu_re,mu_im,predicted_re,predicted_im,abs_err,rel_err,pass\n";
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    std::string k;
    for (std::size_t a = 0; a < s.k.size(); ++a) k += (a ? ";" : "") + format_double(s.k[a]);
    for (int l = 0; l < 3; ++l) {
      out += std::to_string(i) + "," + k + "," + std::to_string(l) + "," +
             format_double(s.mu[l].real()) + "," + format_double(s.mu[l].imag()) + "," +
             format_double(s.predicted[l].real()) + "," + format_double(s.predicted[l].imag()) +
             "," + format_double(s.abs_err[l]) + "," + format_double(s.rel_err[l]) + "," +
             (s.order_pass[l] ? "true" : "false") + "\n";
    }
  }
  return out;
}

}  // namespace rvlbm
