#pragma once

// Experiment orchestration: refinement studies for the slow-manifold
// expansions, simulation with observables, and the verification report that
// ties predictor, oracle and simulation together.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rvlbm/config.hpp"
#include "rvlbm/dispersion_oracle.hpp"
#include "rvlbm/equivalent_equation.hpp"
#include "rvlbm/scheme_core.hpp"
#include "rvlbm/spectral.hpp"

namespace rvlbm {

inline SchemeSpec with_shift(SchemeSpec spec, const Vector& u) {
  spec.u_tilde = VelocityShift::constant(u);
  return spec;
}

inline StateField initial_state(const SchemeSpec& spec, const Grid& grid, const InitialCondition& ini) {
  return equilibrium_state(spec, grid, [&](const Vector& x) {
    if (ini.type == InitialCondition::Type::uniform) return ini.rho0;
    double phase = 0.0;
    for (int a = 0; a < grid.dim(); ++a)
      phase += 2.0 * std::numbers::pi * ini.mode[a] * x[a] / grid.length[a];
    return ini.rho0 + ini.amplitude * std::sin(phase);
  });
}

/// Same box, axis 0 resampled to n cells and the other axes in proportion.
inline Grid refined_grid(const Grid& base, int n) {
  std::vector<int> sizes(base.n.size());
  for (std::size_t a = 0; a < sizes.size(); ++a)
    sizes[a] = std::max(1, static_cast<int>(std::lround(double(n) * base.n[a] / base.n[0])));
  return Grid(sizes, base.length);
}

inline std::vector<double> density_field(const StateField& s) {
  std::vector<double> rho(s.cells());
  for (std::size_t c = 0; c < s.cells(); ++c) rho[c] = s.rho(c);
  return rho;
}

struct SlowManifoldResiduals {
  double equilibrium = 0.0;        // max_j |f_j - E_j rho|
  double transition = 0.0;         // max_k |m_k - m^eq_k - third-order prediction|
  double transition_order2 = 0.0;  // same with the second-order truncation
};

/// Residuals of the near-equilibrium expansions on the current state. Needs a
/// constant shift; xi must be the order-3 prediction for the same scheme.
inline SlowManifoldResiduals measure_residuals(const SchemeSpec& spec, const StateField& state,
                                               const XiPrediction& xi, SpectralGrid& spectral) {
  const int q = spec.q();
  const auto M = build_moment_matrix(spec.basis, spec.vset, xi.u_tilde);
  const auto rho = density_field(state);
  const double dt = state.dt;

  std::vector<std::vector<double>> first(q), second(q);
  for (int k = 1; k < q; ++k) {
    const auto pre = xi.pre_collision(k);
    first[k] = spectral.apply(pre.at(0), rho);
    second[k] = spectral.apply(pre.at(1), rho);
  }
  SlowManifoldResiduals r;
  for (std::size_t c = 0; c < state.cells(); ++c) {
    const Vector f = state.cell(c);
    const Vector feq = spec.E * rho[c];
    r.equilibrium = std::max(r.equilibrium, (f - feq).cwiseAbs().maxCoeff());
    const Vector neq = M.m * (f - feq);
    for (int k = 1; k < q; ++k) {
      const double p2 = dt * first[k][c];
      const double p3 = p2 + dt * dt * second[k][c];
      r.transition_order2 = std::max(r.transition_order2, std::abs(neq[k] - p2));
      r.transition = std::max(r.transition, std::abs(neq[k] - p3));
    }
  }
  return r;
}

struct ScalingFit {
  double slope = 0.0;
  bool floor = false;
  std::vector<double> ratios;  // residual(coarse) / residual(fine) per halving
};

/// Least-squares slope of log2(residual) against log2(dt).
inline ScalingFit fit_scaling(const std::vector<double>& dt, const std::vector<double>& residual,
                              double floor_level) {
  ScalingFit fit;
  fit.floor = std::all_of(residual.begin(), residual.end(), [&](double r) { return r <= floor_level; });
  for (std::size_t i = 1; i < residual.size(); ++i)
    fit.ratios.push_back(residual[i] > 0.0 ? residual[i - 1] / residual[i] : INFINITY);
  if (fit.floor) return fit;
  const std::size_t n = dt.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log2(dt[i]), y = std::log2(std::max(residual[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return fit;
}

struct RefinementLevel {
  int n = 0;
  double dx = 0.0, dt = 0.0;
  SlowManifoldResiduals residuals;
};

struct RefinementStudy {
  std::vector<RefinementLevel> levels;
  ScalingFit equilibrium, transition, transition_order2;
  bool equilibrium_pass = false;
  bool transition_pass = false;
};

struct ScalingCriteria {
  double equilibrium_slope = 1.0, equilibrium_slope_tol = 0.15;
  double transition_slope = 3.0, transition_slope_tol = 0.3;
  double ratio_min = 6.5, ratio_max = 9.5;
};

inline RefinementStudy refinement_study(const SchemeSpec& spec, const Grid& base, const InitialCondition& ini,
                                        const std::vector<int>& resolutions, int warmup,
                                        const ScalingCriteria& crit = {}) {
  const auto xi = transition_prediction(spec, 3);
  RefinementStudy study;
  std::vector<double> dts, eq, tr, tr2;
  for (int n : resolutions) {
    const Grid grid = refined_grid(base, n);
    Simulator sim(spec);
    StateField state = sim.run(initial_state(spec, grid, ini), warmup);
    SpectralGrid spectral(grid);
    RefinementLevel lvl{n, state.dx, state.dt, measure_residuals(spec, state, xi, spectral)};
    dts.push_back(lvl.dt);
    eq.push_back(lvl.residuals.equilibrium);
    tr.push_back(lvl.residuals.transition);
    tr2.push_back(lvl.residuals.transition_order2);
    study.levels.push_back(lvl);
  }
  const double floor_level = 1e-13 * std::max(1.0, std::abs(ini.rho0) + std::abs(ini.amplitude));
  study.equilibrium = fit_scaling(dts, eq, floor_level);
  study.transition = fit_scaling(dts, tr, floor_level);
  study.transition_order2 = fit_scaling(dts, tr2, floor_level);
  study.equilibrium_pass =
      study.equilibrium.floor ||
      std::abs(study.equilibrium.slope - crit.equilibrium_slope) <= crit.equilibrium_slope_tol;
  study.transition_pass =
      study.transition.floor ||
      (std::abs(study.transition.slope - crit.transition_slope) <= crit.transition_slope_tol &&
       std::all_of(study.transition.ratios.begin(), study.transition.ratios.end(),
                   [&](double r) { return r >= crit.ratio_min && r <= crit.ratio_max; }));
  return study;
}

inline nlohmann::json to_json(const ScalingFit& f) {
  nlohmann::json j;
  if (f.floor)
    j["slope"] = "floor";
  else
    j["slope"] = f.slope;
  j["ratios"] = f.ratios;
  return j;
}

inline nlohmann::json to_json(const RefinementStudy& s) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : s.levels)
    levels.push_back({{"n", l.n},
                      {"dx", l.dx},
                      {"dt", l.dt},
                      {"equilibrium_residual", l.residuals.equilibrium},
                      {"transition_residual", l.residuals.transition},
                      {"transition_residual_order2", l.residuals.transition_order2}});
  return {{"levels", std::move(levels)},
          {"equilibrium", to_json(s.equilibrium)},
          {"transition", to_json(s.transition)},
          {"transition_order2", to_json(s.transition_order2)},
          {"equilibrium_pass", s.equilibrium_pass},
          {"transition_pass", s.transition_pass}};
}

inline std::string to_csv(const RefinementStudy& s) {
  std::string out = "n,dx,dt,equilibrium_residual,transition_residual,transition_residual_order2\n";
  for (const auto& l : s.levels)
    out += std::to_string(l.n) + "," + format_double(l.dx) + "," + format_double(l.dt) + "," +
           format_double(l.residuals.equilibrium) + "," + format_double(l.residuals.transition) + "," +
           format_double(l.residuals.transition_order2) + "\n";
  auto slope = [](const ScalingFit& f) { return f.floor ? std::string("floor") : format_double(f.slope); };
  out += "# slope equilibrium," + slope(s.equilibrium) + "\n";
  out += "# slope transition," + slope(s.transition) + "\n";
  out += "# slope transition_order2," + slope(s.transition_order2) + "\n";
  return out;
}

struct Observation {
  long step = 0;
  double time = 0.0;
  double mass = 0.0;
  double amplitude = 0.0;  // 2 |rho_hat(mode)|
  double phase = 0.0;
};

struct SimulationResult {
  std::vector<Observation> observations;
  double mass_drift = 0.0;  // relative, final vs initial
  std::optional<double> growth_factor_measured;  // last-step amplitude ratio
  std::optional<double> growth_factor_oracle;    // |g| of the dominant Fourier branch
  StateField final_state;
};

inline std::vector<double> mode_wavevector(const Grid& grid, const std::vector<int>& mode) {
  std::vector<double> k(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) k[a] = 2.0 * std::numbers::pi * mode[a] / grid.length[a];
  return k;
}

/// Runs `steps` steps, recording observables each step. `on_snapshot` sees the
/// state at step 0, every `snapshot_every` steps, and the final step.
inline SimulationResult run_simulation(
    const SchemeSpec& spec, const Grid& grid, const InitialCondition& ini, long steps, int warmup,
    long snapshot_every = 0, const std::function<void(const StateField&)>& on_snapshot = {}) {
  Simulator sim(spec);
  StateField state = initial_state(spec, grid, ini);
  SpectralGrid spectral(grid);
  const double mass0 = state.total_mass();
  SimulationResult res;
  auto observe = [&] {
    const auto c = spectral.coefficient(density_field(state), ini.mode);
    res.observations.push_back({state.step_count, state.step_count * state.dt, state.total_mass(),
                                2.0 * std::abs(c), std::arg(c)});
  };
  observe();
  if (on_snapshot) on_snapshot(state);
  for (long n = 0; n < steps; ++n) {
    state = sim.step(state);
    observe();
    const bool last = n + 1 == steps;
    if (on_snapshot && (last || (snapshot_every > 0 && state.step_count % snapshot_every == 0)))
      on_snapshot(state);
  }
  res.mass_drift = std::abs(state.total_mass() - mass0) / std::max(std::abs(mass0), 1e-300);
  if (ini.type == InitialCondition::Type::sine && spec.u_tilde.is_constant() && steps > warmup &&
      steps >= 1) {
    const auto& o = res.observations;
    res.growth_factor_measured = o.back().amplitude / o[o.size() - 2].amplitude;
    const auto g = tracked_eigenvalue<long double>(spec, mode_wavevector(grid, ini.mode), state.dt);
    res.growth_factor_oracle = static_cast<double>(std::abs(g));
  }
  res.final_state = std::move(state);
  return res;
}

inline std::string to_csv(const SimulationResult& r) {
  std::string out = "step,time,mass,amplitude,phase\n";
  for (const auto& o : r.observations)
    out += std::to_string(o.step) + "," + format_double(o.time) + "," + format_double(o.mass) + "," +
           format_double(o.amplitude) + "," + format_double(o.phase) + "\n";
  return out;
}

inline nlohmann::json to_json(const SimulationResult& r) {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : r.observations)
    obs.push_back({{"step", o.step}, {"time", o.time}, {"mass", o.mass}, {"amplitude", o.amplitude},
                   {"phase", o.phase}});
  nlohmann::json j{{"observations", std::move(obs)}, {"mass_drift", r.mass_drift}};
  if (r.growth_factor_measured) {
    j["growth_factor_measured"] = *r.growth_factor_measured;
    j["growth_factor_oracle"] = *r.growth_factor_oracle;
    j["growth_factor_diff"] = std::abs(*r.growth_factor_measured - *r.growth_factor_oracle);
  }
  return j;
}

/// One row per cell: coordinates, rho, f_0..f_{q-1}.
inline std::string snapshot_csv(const StateField& s) {
  std::string out;
  static const char* axes[] = {"x", "y", "z"};
  for (int a = 0; a < s.grid.dim(); ++a) out += std::string(axes[a]) + ",";
  out += "rho";
  for (int j = 0; j < s.q(); ++j) out += ",f" + std::to_string(j);
  out += "\n";
  for (std::size_t c = 0; c < s.cells(); ++c) {
    const Vector x = s.grid.position(c);
    for (int a = 0; a < s.grid.dim(); ++a) out += format_double(x[a]) + ",";
    out += format_double(s.rho(c));
    for (int j = 0; j < s.q(); ++j) out += "," + format_double(s.f[j][c]);
    out += "\n";
  }
  return out;
}

inline nlohmann::json to_json(const SchemeSpec& spec) {
  nlohmann::json vel = nlohmann::json::array(), poly = nlohmann::json::array();
  for (int j = 0; j < spec.q(); ++j) vel.push_back(spec.vset.lattice(j));
  for (const auto& p : spec.basis) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [a, c] : p.terms()) terms.push_back({{"exps", a}, {"coef", c}});
    poly.push_back(std::move(terms));
  }
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"d", spec.dim()},
          {"q", spec.q()},
          {"lambda", spec.vset.lambda()},
          {"velocities", std::move(vel)},
          {"polynomials", std::move(poly)},
          {"relaxation", vec(spec.s)},
          {"equilibrium", vec(spec.E)},
          {"u_tilde", {{"mode", to_string(spec.u_tilde.mode)}, {"value", vec(spec.u_tilde.value)}}}};
}

inline nlohmann::json snapshot_metadata(const SchemeSpec& spec, const StateField& s) {
  return {{"scheme", to_json(spec)},
          {"step", s.step_count},
          {"dx", s.dx},
          {"dt", s.dt},
          {"grid", {{"n", s.grid.n}, {"length", s.grid.length}}}};
}

// ---------------------------------------------------------------------------
// Verification

struct VerifySection {
  std::string name;
  bool pass = false;
  bool informational = false;
  nlohmann::json detail;
};

struct VerificationReport {
  std::vector<VerifySection> sections;
  bool pass = false;

  const VerifySection* section(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
};

struct VerifyOptions {
  /// Applied to each derived equation before it is confronted with the oracle.
  std::function<void(EquivalentEquation&)> predictor_fault;
  bool run_transition_study = true;
  double invariance_rel_tol = 1e-10;
};

namespace detail {

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

inline nlohmann::json vec_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

inline VerificationReport run_verification(const ExperimentConfig& cfg, const VerifyOptions& opt = {}) {
  const auto& an = cfg.analysis;
  VerificationReport report;

  // Predictor vs oracle over the shift sweep.
  VerifySection pvo{"predictor_vs_oracle", true, false, nlohmann::json::object()};
  std::vector<EquivalentEquation> rest, shifted;
  std::vector<DispersionReport> oracle;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& u : an.u_sweep) {
    const SchemeSpec spec = with_shift(cfg.scheme, u);
    auto eq = derive_equivalent_equation(spec, 3);
    if (opt.predictor_fault) opt.predictor_fault(eq);
    auto disp = compare_with_prediction(spec, eq, an.k_samples, an.oracle);
    pvo.pass = pvo.pass && disp.pass;
    runs.push_back({{"u_tilde", detail::vec_json(u)}, {"report", to_json(disp)}});
    rest.push_back(std::move(eq));
    shifted.push_back(derive_equivalent_equation(spec, 3, ThetaConvention::shifted_frame));
    oracle.push_back(std::move(disp));
  }
  pvo.detail["runs"] = std::move(runs);
  report.sections.push_back(std::move(pvo));

  // Shift invariance of c and D, and the oracle's mu0/mu1; mu2 spread is reported.
  VerifySection inv{"u_invariance", true, false, nlohmann::json::object()};
  double c_diff = 0.0, D_diff = 0.0, mu2_spread = 0.0;
  bool oracle_low_order_ok = true;
  for (std::size_t i = 1; i < rest.size(); ++i) {
    for (const auto* eqs : {&rest, &shifted}) {
      c_diff = std::max(c_diff, detail::rel_diff((*eqs)[i].c, rest[0].c));
      D_diff = std::max(D_diff, detail::rel_diff((*eqs)[i].D, rest[0].D));
    }
    for (std::size_t s = 0; s < oracle[i].samples.size(); ++s) {
      const auto& a = oracle[0].samples[s];
      const auto& b = oracle[i].samples[s];
      for (int l = 0; l < 2; ++l) {
        const double diff = std::abs(a.mu[l] - b.mu[l]);
        if (diff > std::max(an.oracle.tol.rel[l] * std::abs(a.mu[l]), an.oracle.tol.floor[l]))
          oracle_low_order_ok = false;
      }
      mu2_spread = std::max(mu2_spread, std::abs(a.mu[2] - b.mu[2]));
    }
  }
  inv.pass = c_diff <= opt.invariance_rel_tol && D_diff <= opt.invariance_rel_tol && oracle_low_order_ok;
  inv.detail = {{"c_max_rel_diff", c_diff},
                {"D_max_rel_diff", D_diff},
                {"oracle_mu0_mu1_invariant", oracle_low_order_ok},
                {"mu2_max_spread", mu2_spread},
                {"third_order_shift_dependence", mu2_spread > 1e-6}};
  report.sections.push_back(std::move(inv));

  // Both readings of theta in the dt-term.
  VerifySection conv{"theta_conventions", true, true, nlohmann::json::array()};
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const SchemeSpec spec = with_shift(cfg.scheme, an.u_sweep[i]);
    const double diff = rest[i].ops[2].max_abs_difference(shifted[i].ops[2]);
    nlohmann::json row{{"u_tilde", detail::vec_json(an.u_sweep[i])},
                       {"A2_max_abs_diff", diff},
                       {"rest_frame", to_json(rest[i])}};
    if (diff > 0.0) {
      const auto alt = compare_with_prediction(spec, shifted[i], an.k_samples, an.oracle);
      row["shifted_frame"] = to_json(shifted[i]);
      row["shifted_frame_matches_oracle"] = alt.pass;
    }
    conv.detail.push_back(std::move(row));
  }
  report.sections.push_back(std::move(conv));

  // Slow-manifold refinement study on the configured scheme.
  if (opt.run_transition_study) {
    VerifySection tl{"transition_lemma", false, false, nlohmann::json::object()};
    const Vector u = cfg.scheme.u_tilde.is_constant() ? cfg.scheme.u_tilde.constant_value() : an.u_sweep.front();
    InitialCondition ini = cfg.initial;
    const auto study = refinement_study(with_shift(cfg.scheme, u), cfg.grid, ini, an.resolutions, an.warmup);
    tl.pass = study.equilibrium_pass && study.transition_pass;
    tl.detail = to_json(study);
    tl.detail["u_tilde"] = detail::vec_json(u);
    report.sections.push_back(std::move(tl));
  }

  VerifySection dh{"dhumieres_crosscheck", false, false, nlohmann::json::object()};
  try {
    const auto r = dhumieres_crosscheck(with_shift(cfg.scheme, Vector::Zero(cfg.scheme.dim())));
    dh.pass = r.pass;
    dh.detail = {{"max_abs_diff", r.max_abs_diff}, {"rel_diff", r.rel_diff}};
  } catch (const MismatchBeyondTolerance& e) {
    dh.detail = {{"error", e.what()}};
  }
  report.sections.push_back(std::move(dh));

  report.pass = std::all_of(report.sections.begin(), report.sections.end(),
                            [](const VerifySection& s) { return s.informational || s.pass; });
  return report;
}

inline nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json sections = nlohmann::json::object();
  for (const auto& s : r.sections)
    sections[s.name] = {{"pass", s.pass}, {"informational", s.informational}, {"detail", s.detail}};
  return {{"pass", r.pass}, {"sections", std::move(sections)}};
}

}  // namespace rvlbm
