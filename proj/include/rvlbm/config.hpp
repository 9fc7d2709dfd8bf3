#pragma once

// JSON experiment configuration. Every error carries the JSON pointer of the
// offending value.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rvlbm/dispersion_oracle.hpp"
#include "rvlbm/errors.hpp"
#include "rvlbm/scheme_core.hpp"
#include "rvlbm/velocity_lattice.hpp"

namespace rvlbm {

struct InitialCondition {
  enum class Type { uniform, sine };
  Type type = Type::sine;
  double rho0 = 1.0;
  double amplitude = 0.1;
  std::vector<int> mode;  // integer wave numbers per axis
};

struct AnalysisConfig {
  int order = 3;
  std::vector<std::vector<double>> k_samples;
  OracleOptions oracle;
  std::vector<Vector> u_sweep;
  std::vector<int> resolutions{64, 128, 256};
  int warmup = 20;
  long steps = 100;
  long snapshot_every = 0;  // 0: first and last step only
};

struct OutputConfig {
  std::string dir = "rvlbm_out";
  std::string format = "json";
};

struct ExperimentConfig {
  SchemeSpec scheme;
  std::vector<std::string> warnings;
  Grid grid;
  InitialCondition initial;
  AnalysisConfig analysis;
  OutputConfig output;
};

namespace detail {

using nlohmann::json;

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(child(path, key), "missing required key");
  return *it;
}

inline const json* optional_key(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(path, "expected a finite number");
  return d;
}

inline long as_integer(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d) return static_cast<long>(d);
  }
  throw SchemaError(path, "expected an integer");
}

inline const json& as_array(const json& v, const std::string& path, std::size_t expected = 0) {
  if (!v.is_array()) throw SchemaError(path, "expected an array");
  if (expected && v.size() != expected)
    throw SchemaError(path, "expected " + std::to_string(expected) + " entries, got " +
                                std::to_string(v.size()));
  return v;
}

inline std::vector<double> number_list(const json& v, const std::string& path, std::size_t expected = 0) {
  as_array(v, path, expected);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], child(path, i)));
  return out;
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline SchemeSpec parse_scheme(const json& s, const std::string& path,
                               std::vector<std::string>& warnings) {
  const int d = static_cast<int>(as_integer(require(s, "d", path), child(path, "d")));
  if (d < 1 || d > 3) throw ValidationError("scheme.d must be 1, 2 or 3");
  const int q = static_cast<int>(as_integer(require(s, "q", path), child(path, "q")));
  const double lambda = optional_key(s, "lambda", path)
                            ? as_number(s["lambda"], child(path, "lambda"))
                            : 1.0;
  if (!(lambda > 0.0)) throw ValidationError("scheme.lambda must be positive");

  const std::string vpath = child(path, "velocities");
  const json& vj = as_array(require(s, "velocities", path), vpath, q);
  std::vector<std::vector<double>> vel;
  for (std::size_t j = 0; j < vj.size(); ++j) vel.push_back(number_list(vj[j], child(vpath, j), d));
  VelocitySet vset = [&] {
    try {
      return VelocitySet::from_components(d, lambda, vel);
    } catch (const NonLatticeVelocity& e) {
      throw ValidationError(std::string("non-lattice velocity: ") + e.what());
    } catch (const DimensionMismatch& e) {
      throw ValidationError(e.what());
    }
  }();

  const std::string ppath = child(path, "polynomials");
  const json& pj = as_array(require(s, "polynomials", path), ppath, q);
  std::vector<MomentPolynomial> basis;
  for (std::size_t k = 0; k < pj.size(); ++k) {
    const std::string kp = child(ppath, k);
    MomentPolynomial p(d);
    const json& terms = as_array(pj[k], kp);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const std::string tp = child(kp, t);
      const json& ej = as_array(require(terms[t], "exps", tp), child(tp, "exps"), d);
      MultiIndex a;
      for (std::size_t i = 0; i < ej.size(); ++i) {
        const long e = as_integer(ej[i], child(child(tp, "exps"), i));
        if (e < 0) throw SchemaError(child(child(tp, "exps"), i), "exponent must be >= 0");
        a.push_back(static_cast<int>(e));
      }
      p.add_term(a, as_number(require(terms[t], "coef", tp), child(tp, "coef")));
    }
    basis.push_back(std::move(p));
  }

  const Vector srate = to_vector(number_list(require(s, "relaxation", path), child(path, "relaxation"), q));
  const Vector E = to_vector(number_list(require(s, "equilibrium", path), child(path, "equilibrium"), q));

  VelocityShift shift = VelocityShift::zero(d);
  if (const json* u = optional_key(s, "u_tilde", path)) {
    const std::string up = child(path, "u_tilde");
    const json& mode = require(*u, "mode", up);
    if (!mode.is_string()) throw SchemaError(child(up, "mode"), "expected a string");
    const std::string m = mode.get<std::string>();
    auto value = [&] { return to_vector(number_list(require(*u, "value", up), child(up, "value"), d)); };
    if (m == "zero")
      shift = VelocityShift::zero(d);
    else if (m == "constant")
      shift = VelocityShift::constant(value());
    else if (m == "sine")
      shift = VelocityShift::sine(value());
    else
      throw SchemaError(child(up, "mode"), "expected \"zero\", \"constant\" or \"sine\"");
  }

  SchemeSpec spec{std::move(vset), std::move(basis), srate, E, shift};
  try {
    warnings = spec.validate();
  } catch (const DimensionMismatch& e) {
    throw ValidationError(e.what());
  }
  // An invertible M(u) is part of a valid scheme.
  try {
    if (spec.u_tilde.is_constant())
      build_moment_matrix(spec.basis, spec.vset, spec.u_tilde.constant_value());
    else
      build_moment_matrix(spec.basis, spec.vset, Vector::Zero(d));
  } catch (const SingularMatrix& e) {
    throw ValidationError(std::string("moment basis and velocity set are incompatible: ") + e.what());
  }
  return spec;
}

}  // namespace detail

inline ExperimentConfig load_config(const std::string& text) {
  using detail::child;
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("", "expected a top-level object");

  std::vector<std::string> warnings;
  SchemeSpec scheme = detail::parse_scheme(detail::require(root, "scheme", ""), "/scheme", warnings);
  const int d = scheme.dim();

  Grid grid;
  if (const auto* g = detail::optional_key(root, "grid", "")) {
    const auto nd = detail::number_list(detail::require(*g, "n", "/grid"), "/grid/n", d);
    std::vector<int> n;
    for (std::size_t a = 0; a < nd.size(); ++a) {
      if (nd[a] != std::floor(nd[a]) || nd[a] < 1) throw SchemaError(child("/grid/n", a), "expected a positive integer");
      n.push_back(static_cast<int>(nd[a]));
    }
    std::vector<double> length(d, 1.0);
    if (const auto* l = detail::optional_key(*g, "length", "/grid"))
      length = detail::number_list(*l, "/grid/length", d);
    grid = Grid(n, length);
  } else {
    grid = Grid(std::vector<int>(d, 64), std::vector<double>(d, 1.0));
  }

  ExperimentConfig cfg{std::move(scheme), std::move(warnings), std::move(grid), {}, {}, {}};

  cfg.initial.mode.assign(d, 0);
  cfg.initial.mode[0] = 1;
  if (const auto* ini = detail::optional_key(root, "initial", "")) {
    if (const auto* t = detail::optional_key(*ini, "type", "/initial")) {
      if (!t->is_string()) throw SchemaError("/initial/type", "expected a string");
      const auto ts = t->get<std::string>();
      if (ts == "uniform")
        cfg.initial.type = InitialCondition::Type::uniform;
      else if (ts == "sine")
        cfg.initial.type = InitialCondition::Type::sine;
      else
        throw SchemaError("/initial/type", "expected \"uniform\" or \"sine\"");
    }
    if (const auto* a = detail::optional_key(*ini, "amplitude", "/initial"))
      cfg.initial.amplitude = detail::as_number(*a, "/initial/amplitude");
    if (const auto* r = detail::optional_key(*ini, "rho0", "/initial"))
      cfg.initial.rho0 = detail::as_number(*r, "/initial/rho0");
    if (const auto* m = detail::optional_key(*ini, "mode", "/initial")) {
      detail::as_array(*m, "/initial/mode", d);
      for (std::size_t a = 0; a < m->size(); ++a)
        cfg.initial.mode[a] = static_cast<int>(detail::as_integer((*m)[a], child("/initial/mode", a)));
    }
  }

  auto& an = cfg.analysis;
  an.k_samples = default_k_samples(d);
  const double lambda = cfg.scheme.vset.lambda();
  for (double f : {0.0, 0.2, 0.5}) an.u_sweep.push_back(Vector::Constant(d, f * lambda));
  if (const auto* a = detail::optional_key(root, "analysis", "")) {
    const std::string ap = "/analysis";
    if (const auto* o = detail::optional_key(*a, "order", ap)) {
      an.order = static_cast<int>(detail::as_integer(*o, ap + "/order"));
      if (an.order < 1 || an.order > 3) throw ValidationError("analysis.order must be 1, 2 or 3");
    }
    if (const auto* ks = detail::optional_key(*a, "k_samples", ap)) {
      if (ks->is_number()) {
        const long count = detail::as_integer(*ks, ap + "/k_samples");
        if (count < 1) throw ValidationError("analysis.k_samples must be positive");
        an.k_samples = default_k_samples(d, static_cast<int>(count));
      } else {
        detail::as_array(*ks, ap + "/k_samples");
        an.k_samples.clear();
        for (std::size_t i = 0; i < ks->size(); ++i)
          an.k_samples.push_back(detail::number_list((*ks)[i], child(ap + "/k_samples", i), d));
      }
    }
    if (const auto* v = detail::optional_key(*a, "dt0", ap)) {
      const double dt0 = detail::as_number(*v, ap + "/dt0");
      if (!(dt0 > 0.0)) throw ValidationError("analysis.dt0 must be positive");
      an.oracle.dt0 = dt0;
    }
    if (const auto* v = detail::optional_key(*a, "k_dx", ap)) {
      an.oracle.k_dx = detail::as_number(*v, ap + "/k_dx");
      if (!(an.oracle.k_dx > 0.0 && an.oracle.k_dx <= 0.1))
        throw ValidationError("analysis.k_dx must be in (0, 0.1]");
    }
    if (const auto* v = detail::optional_key(*a, "refinements", ap)) {
      an.oracle.refinements = static_cast<int>(detail::as_integer(*v, ap + "/refinements"));
      if (an.oracle.refinements < 5) throw ValidationError("analysis.refinements must be >= 5");
    }
    if (const auto* t = detail::optional_key(*a, "tolerances", ap)) {
      const std::string tp = ap + "/tolerances";
      if (const auto* r = detail::optional_key(*t, "rel", tp)) {
        const auto v = detail::number_list(*r, tp + "/rel", 3);
        for (int l = 0; l < 3; ++l) an.oracle.tol.rel[l] = v[l];
      }
      if (const auto* f = detail::optional_key(*t, "floor", tp)) {
        const auto v = detail::number_list(*f, tp + "/floor", 3);
        for (int l = 0; l < 3; ++l) an.oracle.tol.floor[l] = v[l];
      }
    }
    if (const auto* u = detail::optional_key(*a, "u_sweep", ap)) {
      detail::as_array(*u, ap + "/u_sweep");
      an.u_sweep.clear();
      for (std::size_t i = 0; i < u->size(); ++i) {
        const std::string up = child(ap + "/u_sweep", i);
        if ((*u)[i].is_number())
          an.u_sweep.push_back(Vector::Constant(d, detail::as_number((*u)[i], up) * lambda));
        else
          an.u_sweep.push_back(detail::to_vector(detail::number_list((*u)[i], up, d)) * lambda);
      }
    }
    if (const auto* r = detail::optional_key(*a, "resolutions", ap)) {
      detail::as_array(*r, ap + "/resolutions");
      an.resolutions.clear();
      for (std::size_t i = 0; i < r->size(); ++i) {
        const long n = detail::as_integer((*r)[i], child(ap + "/resolutions", i));
        if (n < 4) throw ValidationError("analysis.resolutions entries must be >= 4");
        an.resolutions.push_back(static_cast<int>(n));
      }
      if (an.resolutions.size() < 2) throw ValidationError("analysis.resolutions needs two or more entries");
    }
    if (const auto* w = detail::optional_key(*a, "warmup", ap)) {
      an.warmup = static_cast<int>(detail::as_integer(*w, ap + "/warmup"));
      if (an.warmup < 0) throw ValidationError("analysis.warmup must be >= 0");
    }
    if (const auto* s = detail::optional_key(*a, "steps", ap)) {
      an.steps = detail::as_integer(*s, ap + "/steps");
      if (an.steps < 0) throw ValidationError("analysis.steps must be >= 0");
    }
    if (const auto* s = detail::optional_key(*a, "snapshot_every", ap))
      an.snapshot_every = detail::as_integer(*s, ap + "/snapshot_every");
  }
  if (an.oracle.dt0)
    for (const auto& k : an.k_samples)
      if (norm2(k) * lambda * *an.oracle.dt0 > 0.1)
        throw ValidationError("analysis.dt0 too large: |k| lambda dt0 must stay <= 0.1");

  if (const auto* o = detail::optional_key(root, "output", "")) {
    if (const auto* dir = detail::optional_key(*o, "dir", "/output")) {
      if (!dir->is_string()) throw SchemaError("/output/dir", "expected a string");
      cfg.output.dir = dir->get<std::string>();
    }
    if (const auto* f = detail::optional_key(*o, "format", "/output")) {
      if (!f->is_string()) throw SchemaError("/output/format", "expected a string");
      cfg.output.format = f->get<std::string>();
      if (cfg.output.format != "json" && cfg.output.format != "csv")
        throw SchemaError("/output/format", "expected \"json\" or \"csv\"");
    }
  }
  return cfg;
}

}  // namespace rvlbm
