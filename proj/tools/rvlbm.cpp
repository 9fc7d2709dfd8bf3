// rvlbm: command-line front end for equivalent-equation analysis, dispersion
// checks, simulation and verification of relative-velocity schemes.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "rvlbm/rvlbm.hpp"

namespace fs = std::filesystem;
using namespace rvlbm;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfigError = 2;

struct Options {
  std::string config;
  std::string output;
  std::string format;
  int order = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

struct Context {
  ExperimentConfig cfg;
  fs::path dir;
  std::string format;
  int order;
};

Context make_context(const Options& o) {
  Context c{load_config(read_file(o.config)), {}, {}, 0};
  c.dir = o.output.empty() ? fs::path(c.cfg.output.dir) : fs::path(o.output);
  c.format = o.format.empty() ? c.cfg.output.format : o.format;
  c.order = o.order ? o.order : c.cfg.analysis.order;
  for (const auto& w : c.cfg.warnings) std::cerr << "warning: " << w << "\n";
  return c;
}

// The analysis channels need a constant shift; a field shift falls back to the
// first entry of the sweep.
SchemeSpec analysis_scheme(const ExperimentConfig& cfg) {
  if (cfg.scheme.u_tilde.is_constant()) return cfg.scheme;
  std::cerr << "note: u_tilde is not constant, analysing at the first u_sweep value\n";
  return with_shift(cfg.scheme, cfg.analysis.u_sweep.front());
}

int cmd_analyze(const Context& c) {
  const SchemeSpec spec = analysis_scheme(c.cfg);
  const auto rest = derive_equivalent_equation(spec, c.order, ThetaConvention::rest_frame);
  const auto shifted = derive_equivalent_equation(spec, c.order, ThetaConvention::shifted_frame);
  nlohmann::json j{{"scheme", to_json(spec)}, {"equivalent_equation", to_json(rest)}};
  std::string text = pretty_print(rest) + "\n";
  bool differ = false;
  for (std::size_t l = 0; l < rest.ops.size(); ++l)
    differ = differ || rest.ops[l].max_abs_difference(shifted.ops[l]) > 0.0;
  if (differ) {
    j["shifted_frame_variant"] = to_json(shifted);
    text += "shifted-frame variant: " + pretty_print(shifted) + "\n";
  }
  write_json(c.dir / "equivalent_equation.json", j);
  write_file(c.dir / "equivalent_equation.txt", text);
  std::cout << text;
  return kPass;
}

int cmd_dispersion(const Context& c) {
  const SchemeSpec spec = analysis_scheme(c.cfg);
  const auto eq = derive_equivalent_equation(spec, c.order);
  const auto report = compare_with_prediction(spec, eq, c.cfg.analysis.k_samples, c.cfg.analysis.oracle);
  write_json(c.dir / "dispersion.json", to_json(report));
  write_file(c.dir / "dispersion.csv", to_csv(report));
  std::cout << "dispersion: " << (report.pass ? "PASS" : "FAIL") << " (" << report.samples.size()
            << " wavevectors)\n";
  return report.pass ? kPass : kFail;
}

int cmd_simulate(const Context& c) {
  const auto& an = c.cfg.analysis;
  const SchemeSpec& spec = c.cfg.scheme;
  auto on_snapshot = [&](const StateField& s) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%06ld", s.step_count);
    write_file(c.dir / (std::string(name) + ".csv"), snapshot_csv(s));
    write_json(c.dir / (std::string(name) + ".meta.json"), snapshot_metadata(spec, s));
  };
  const auto res = run_simulation(spec, c.cfg.grid, c.cfg.initial, an.steps, an.warmup, an.snapshot_every,
                                  on_snapshot);
  if (c.format == "csv")
    write_file(c.dir / "observables.csv", to_csv(res));
  else
    write_json(c.dir / "observables.json", to_json(res));
  std::cout << "simulate: " << an.steps << " steps, relative mass drift " << format_short(res.mass_drift)
            << "\n";
  return kPass;
}

int cmd_verify(const Context& c) {
  const auto report = run_verification(c.cfg);
  write_json(c.dir / "verification_report.json", to_json(report));
  for (const auto& s : report.sections)
    std::cout << (s.informational ? "INFO" : (s.pass ? "PASS" : "FAIL")) << "  " << s.name << "\n";
  std::cout << "verify: " << (report.pass ? "PASS" : "FAIL") << "\n";
  return report.pass ? kPass : kFail;
}

int cmd_convergence(const Context& c) {
  const auto& an = c.cfg.analysis;
  const SchemeSpec spec = analysis_scheme(c.cfg);
  const auto study = refinement_study(spec, c.cfg.grid, c.cfg.initial, an.resolutions, an.warmup);
  if (c.format == "csv")
    write_file(c.dir / "convergence.csv", to_csv(study));
  else
    write_json(c.dir / "convergence.json", to_json(study));
  auto slope = [](const ScalingFit& f) { return f.floor ? std::string("floor") : format_short(f.slope); };
  std::cout << "equilibrium residual slope " << slope(study.equilibrium) << ", transition residual slope "
            << slope(study.transition) << "\n";
  return study.equilibrium_pass && study.transition_pass ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative-velocity lattice Boltzmann analysis"};
  app.require_subcommand(1);
  Options opt;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Context&);
  };
  const Command commands[] = {
      {"analyze", "Derive the equivalent equation", cmd_analyze},
      {"dispersion", "Compare the predicted symbol with the amplification-matrix oracle", cmd_dispersion},
      {"simulate", "Run the scheme and record snapshots and observables", cmd_simulate},
      {"verify", "Run every check and write a verification report", cmd_verify},
      {"convergence", "Refinement study of the near-equilibrium expansions", cmd_convergence},
  };
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", opt.config, "Experiment config (JSON)")->required();
    sub->add_option("--output", opt.output, "Output directory");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--order", opt.order, "Truncation order")->check(CLI::Range(1, 3));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  std::optional<Context> ctx;
  try {
    ctx.emplace(make_context(opt));
  } catch (const SchemaError& e) {
    std::cerr << "config error at " << (e.path().empty() ? "/" : e.path()) << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  for (const auto& cmd : commands) {
    if (!app.got_subcommand(cmd.name)) continue;
    try {
      return cmd.run(*ctx);
    } catch (const Error& e) {
      std::cerr << cmd.name << ": " << e.what() << "\n";
      return kFail;
    }
  }
  return kConfigError;
}
