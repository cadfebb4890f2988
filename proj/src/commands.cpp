#include "chemoctrl/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "chemoctrl/adjoint.hpp"
#include "chemoctrl/finite_volume.hpp"
#include "chemoctrl/io.hpp"
#include "chemoctrl/optimizer.hpp"

namespace chemoctrl {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- Report

void Report::add(Status s, std::string name, std::string detail) {
  lines_.push_back({s, std::move(name), std::move(detail)});
}

bool Report::failed() const {
  return std::any_of(lines_.begin(), lines_.end(), [](const Line& l) { return l.status == Status::Fail; });
}

std::string Report::str() const {
  std::ostringstream os;
  for (const Line& l : lines_) {
    const char* tag = l.status == Status::Pass   ? "PASS"
                      : l.status == Status::Fail ? "FAIL"
                      : l.status == Status::Warn ? "WARN"
                                                 : "INFO";
    os << tag << ' ' << l.name;
    if (!l.detail.empty()) os << ": " << l.detail;
    os << '\n';
  }
  return os.str();
}

void Report::write(const fs::path& file) const {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot write " + file.string());
  os << str();
}

double uniform01(std::uint64_t raw) { return static_cast<double>(raw >> 11) * 0x1.0p-53; }

// ---------------------------------------------------------------- checks

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string cell_name(const Grid2D& g, std::size_t k) {
  return "(" + std::to_string(k % g.nx()) + "," + std::to_string(k / g.nx()) + ")";
}

constexpr std::size_t kMaxListed = 10;

void list(std::vector<std::string>& out, std::string msg) {
  if (out.size() < kMaxListed) out.push_back(std::move(msg));
}

double control_sup(const ControlField& f) {
  double m = 0.0;
  const Grid2D& g = *f.grid();
  for (int n = 0; n < f.n_steps(); ++n)
    for (std::size_t k = 0; k < g.cell_count(); ++k)
      if (g.in_control(k)) m = std::max(m, std::abs(f(n, k)));
  return m;
}

}  // namespace

TrajectoryCheck check_trajectory(const Trajectory& traj) {
  TrajectoryCheck c;
  const Grid2D& g = *traj.grid;
  const ModelParams& p = traj.params;
  c.n_tol = 1e-10 + p.solver.newton_tol;
  c.M = m_bound(traj.C.front().max_abs(), control_sup(traj.control), p.alpha, p.T);
  const double c_tol = 1e-12 * std::max(1.0, c.M);
  const double mass_tol = 1e-12 * g.area();
  const double mass0 = traj.N.front().integral();
  c.min_N = c.min_C = INFINITY;
  c.max_N = c.max_C = -INFINITY;
  std::size_t n_bad = 0, c_bad = 0;
  for (int n = 0; n < traj.levels(); ++n) {
    const ScalarField& N = traj.N[n];
    const ScalarField& C = traj.C[n];
    if (!N.all_finite() || !C.all_finite()) c.finite = false;
    for (std::size_t k = 0; k < g.cell_count(); ++k) {
      c.min_N = std::min(c.min_N, N[k]);
      c.max_N = std::max(c.max_N, N[k]);
      c.min_C = std::min(c.min_C, C[k]);
      c.max_C = std::max(c.max_C, C[k]);
      if (N[k] < -c.n_tol || N[k] > 1.0 + c.n_tol) {
        ++n_bad;
        list(c.n_violations, "level " + std::to_string(n) + " cell " + cell_name(g, k) + ": N = " + fmt(N[k]));
      }
      if (C[k] < -c_tol || C[k] > c.M + c_tol) {
        ++c_bad;
        list(c.c_violations, "level " + std::to_string(n) + " cell " + cell_name(g, k) + ": C = " + fmt(C[k]) +
                                 " (M = " + fmt(c.M) + ")");
      }
    }
    const double drift = std::abs(N.integral() - mass0);
    c.mass_drift = std::max(c.mass_drift, drift);
    if (drift > mass_tol) list(c.mass_violations, "level " + std::to_string(n) + ": drift " + fmt(drift));
  }
  if (n_bad > kMaxListed) c.n_violations.push_back("... " + std::to_string(n_bad - kMaxListed) + " more");
  if (c_bad > kMaxListed) c.c_violations.push_back("... " + std::to_string(c_bad - kMaxListed) + " more");
  return c;
}

ExperimentConfig apply_overrides(ExperimentConfig cfg, const CommandOptions& opts) {
  if (opts.out) cfg.output.dir = opts.out->string();
  if (opts.seed) cfg.run.seed = *opts.seed;
  if (opts.workers) cfg.run.workers = *opts.workers;
  return cfg;
}

namespace {

// ---------------------------------------------------------------- helpers

struct Session {
  ExperimentConfig cfg;
  fs::path out;
  std::ostream* log;
  Report report;

  Session(const ExperimentConfig& c, const CommandOptions& o) : cfg(apply_overrides(c, o)), out(cfg.output.dir), log(o.log) {
    fs::create_directories(out);
    std::ofstream(out / "config.ini", std::ios::trunc) << serialize_config(cfg);
  }

  void say(const std::string& s) const {
    if (log) *log << s << '\n';
  }

  int finish(int code) {
    if (code == kExitPass && report.failed()) code = kExitInvariant;
    report.info("exit", std::to_string(code));
    report.write(out / "report");
    if (log) *log << report.str();
    return code;
  }

  std::size_t csv_cells() const { return static_cast<std::size_t>(cfg.output.csv_max_cells); }
};

template <class Fn>
void parallel_for(std::size_t count, int workers, Fn fn) {
  const std::size_t nw = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  if (nw <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(nw);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < nw; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += nw) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Admissibility of the built initial data; problems are config errors.
ValidationReport admissibility(const ControlProblem& pb) {
  return validate_params(pb.params, pb.cs, pb.N0, pb.C0);
}

void report_trajectory(Report& r, const TrajectoryCheck& c, bool bounds_are_warnings) {
  const auto bounds = [&](bool ok, const std::string& name, const std::string& detail) {
    if (ok) r.add(Report::Status::Pass, name, detail);
    else r.add(bounds_are_warnings ? Report::Status::Warn : Report::Status::Fail, name, detail);
  };
  r.check(c.finite, "finite", c.finite ? "all values finite" : "non-finite values in N or C");
  std::string nd = "min " + fmt(c.min_N) + ", max " + fmt(c.max_N) + ", tolerance " + fmt(c.n_tol);
  for (const auto& v : c.n_violations) nd += "; " + v;
  bounds(c.n_violations.empty(), "N_bounds", nd);
  std::string cd = "min " + fmt(c.min_C) + ", max " + fmt(c.max_C) + ", M " + fmt(c.M);
  for (const auto& v : c.c_violations) cd += "; " + v;
  bounds(c.c_violations.empty(), "C_bounds", cd);
  std::string md = "max drift " + fmt(c.mass_drift);
  for (const auto& v : c.mass_violations) md += "; " + v;
  r.check(c.mass_ok(), "mass", md);
}

void report_solver_use(Report& r, const Trajectory& t) {
  int max_it = 0, fallback = 0;
  for (const auto& rep : t.reports) {
    max_it = std::max(max_it, rep.iterations);
    fallback += rep.used_fallback;
  }
  r.info("newton", "max iterations " + std::to_string(max_it) + ", fixed-point fallbacks " + std::to_string(fallback));
}

bool centered(const ExperimentConfig& cfg) { return cfg.model.solver.convection == ConvectionScheme::Centered; }

// Builds the problem or records why the config cannot be run.
std::optional<ControlProblem> prepare(Session& s, GridPtr& grid) {
  grid = build_grid(s.cfg);
  ControlProblem pb = build_problem(s.cfg, grid);
  const ValidationReport v = admissibility(pb);
  if (!v.ok()) {
    for (const auto& m : v.violations) s.report.add(Report::Status::Fail, "admissible", m);
    return std::nullopt;
  }
  return pb;
}

double max_abs_levels(const std::vector<ScalarField>& levels) {
  double m = 0.0;
  for (const auto& f : levels) m = std::max(m, f.max_abs());
  return m;
}

template <class Body>
int guarded(Session& s, Body body) {
  try {
    return s.finish(body());
  } catch (const SolverError& e) {
    s.report.add(Report::Status::Fail, "solver", e.what());
    return s.finish(kExitSolver);
  } catch (const LinearSolveError& e) {
    s.report.add(Report::Status::Fail, "solver", e.what());
    return s.finish(kExitSolver);
  } catch (const ConfigError& e) {
    for (const auto& m : e.errors()) s.report.add(Report::Status::Fail, "config", m);
    return s.finish(kExitConfig);
  } catch (const IoError& e) {
    s.report.add(Report::Status::Fail, "config", e.what());
    return s.finish(kExitConfig);
  } catch (const std::invalid_argument& e) {
    s.report.add(Report::Status::Fail, "config", e.what());
    return s.finish(kExitConfig);
  }
}

}  // namespace

// ---------------------------------------------------------------- commands

int cmd_forward(const ExperimentConfig& cfg0, const CommandOptions& opts) {
  Session s(cfg0, opts);
  return guarded(s, [&]() -> int {
    GridPtr grid;
    auto pb = prepare(s, grid);
    if (!pb) return kExitConfig;
    const ControlField f = build_initial_control(s.cfg, grid);
    s.say("forward: " + std::to_string(grid->nx()) + "x" + std::to_string(grid->ny()) + ", " +
          std::to_string(s.cfg.model.n_steps) + " steps");
    const Trajectory traj = run_forward(pb->N0, pb->C0, f, pb->params, pb->cs);
    write_trajectory(s.out / "trajectory", traj, s.csv_cells());
    report_trajectory(s.report, check_trajectory(traj), centered(s.cfg));
    report_solver_use(s.report, traj);
    s.report.info("J", fmt(compute_cost(traj, f, pb->Nd, pb->Cd, pb->params)));
    return kExitPass;
  });
}

int cmd_adjoint(const ExperimentConfig& cfg0, const CommandOptions& opts) {
  Session s(cfg0, opts);
  return guarded(s, [&]() -> int {
    GridPtr grid;
    auto pb = prepare(s, grid);
    if (!pb) return kExitConfig;
    if (!(pb->params.eps > 0.0)) {
      s.report.add(Report::Status::Fail, "config", "the adjoint needs eps > 0");
      return kExitConfig;
    }
    const ControlField f = build_initial_control(s.cfg, grid);
    const ControlProblem::GradientEvaluation ge = pb->gradient(f);
    write_trajectory(s.out / "trajectory", ge.traj, s.csv_cells());
    write_adjoint(s.out / "adjoint", ge.adj, s.csv_cells());
    write_control(s.out / "gradient", ge.g, pb->params.T);
    report_trajectory(s.report, check_trajectory(ge.traj), centered(s.cfg));

    const int last = ge.adj.levels() - 1;
    const bool terminal = ge.adj.p[last].max_abs() == 0.0 && ge.adj.q[last].max_abs() == 0.0;
    s.report.check(terminal, "terminal", "p and q vanish at the final level");
    bool finite = true;
    for (int n = 0; n <= last; ++n) finite = finite && ge.adj.p[n].all_finite() && ge.adj.q[n].all_finite();
    s.report.check(finite, "adjoint_finite", finite ? "all values finite" : "non-finite dual values");
    s.report.info("max_abs_p", fmt(max_abs_levels(ge.adj.p)));
    s.report.info("max_abs_q", fmt(max_abs_levels(ge.adj.q)));
    s.report.info("J", fmt(ge.J));
    s.report.info("gradient_norm", fmt(weighted_norm(ge.g, pb->params.step())));
    if (!ge.adj.dominance_lost.empty()) {
      std::string lv;
      for (int n : ge.adj.dominance_lost) lv += (lv.empty() ? "" : " ") + std::to_string(n);
      s.report.warn("diagonal_dominance", "q-system lost diagonal dominance at levels " + lv);
    }
    return kExitPass;
  });
}

int cmd_optimize(const ExperimentConfig& cfg0, const CommandOptions& opts) {
  Session s(cfg0, opts);
  return guarded(s, [&]() -> int {
    GridPtr grid;
    auto pb = prepare(s, grid);
    if (!pb) return kExitConfig;
    if (!(pb->params.eps > 0.0)) {
      s.report.add(Report::Status::Fail, "config", "the adjoint needs eps > 0");
      return kExitConfig;
    }
    const ControlField f0 = build_initial_control(s.cfg, grid);
    bool feasible = true;
    std::string infeasible_at;
    const OptimizationResult res = optimize(f0, *pb, s.cfg.optimizer, [&](const OptimizationState& st) {
      if (feasible && !st.f.is_feasible(0.0)) {
        feasible = false;
        infeasible_at = std::to_string(st.iteration);
      }
      s.say("iteration " + std::to_string(st.iteration) + ": J " + fmt(st.J) + ", stationarity " + fmt(st.stationarity));
    });
    write_history_csv(s.out / "history.csv", res.history);
    write_control(s.out / "control", res.state.f, pb->params.T);
    if (res.status == OptimizeStatus::SolverFailed) {
      s.report.add(Report::Status::Fail, "solver", res.message);
      return kExitSolver;
    }
    const Trajectory traj = run_forward(pb->N0, pb->C0, res.state.f, pb->params, pb->cs);
    write_trajectory(s.out / "trajectory", traj, s.csv_cells());

    bool decreasing = true;
    for (std::size_t k = 1; k < res.history.size(); ++k) decreasing = decreasing && res.history[k].J < res.history[k - 1].J;
    const double J0 = res.history.front().J;
    s.report.check(decreasing, "descent", "J strictly decreasing over " + std::to_string(res.history.size()) + " iterates");
    s.report.check(feasible, "feasible", feasible ? "every iterate within [f_min, f_max]" : "iterate " + infeasible_at);
    report_trajectory(s.report, check_trajectory(traj), centered(s.cfg));
    s.report.info("status", to_string(res.status) + (res.message.empty() ? "" : " (" + res.message + ")"));
    if (res.status == OptimizeStatus::LineSearchFailed) s.report.warn("line_search", res.message);
    s.report.info("iterations", std::to_string(res.state.iteration));
    s.report.info("J_initial", fmt(J0));
    s.report.info("J_final", fmt(res.state.J));
    s.report.info("J_ratio", fmt(J0 > 0.0 ? res.state.J / J0 : 0.0));
    s.report.info("stationarity", fmt(res.state.stationarity));
    s.report.info("control_norm", fmt(weighted_norm(res.state.f, pb->params.step())));
    return kExitPass;
  });
}

int cmd_gradcheck(const ExperimentConfig& cfg0, const CommandOptions& opts) {
  Session s(cfg0, opts);
  return guarded(s, [&]() -> int {
    GridPtr grid;
    auto pb = prepare(s, grid);
    if (!pb) return kExitConfig;
    if (!(pb->params.eps > 0.0)) {
      s.report.add(Report::Status::Fail, "config", "the adjoint needs eps > 0");
      return kExitConfig;
    }
    const GradcheckSpec& gc = s.cfg.gradcheck;
    const int steps = pb->params.n_steps;
    std::mt19937_64 rng(s.cfg.run.seed);
    auto u = [&] { return uniform01(rng()); };

    ControlField f = build_initial_control(s.cfg, grid);
    if (gc.control == "random") {
      for (int n = 0; n < steps; ++n)
        for (std::size_t k = 0; k < grid->cell_count(); ++k) {
          const double mag = gc.min_abs + (gc.max_abs - gc.min_abs) * u();
          const double sign = u() < 0.5 ? -1.0 : 1.0;
          f(n, k) = grid->in_control(k) ? std::clamp(sign * mag, f.f_min(), f.f_max()) : 0.0;
        }
    }

    std::vector<std::size_t> inside, outside;
    for (std::size_t k = 0; k < grid->cell_count(); ++k) (grid->in_control(k) ? inside : outside).push_back(k);
    std::vector<Probe> probes;
    std::set<std::pair<int, std::size_t>> used;
    const std::size_t available = inside.size() * static_cast<std::size_t>(steps);
    while (!inside.empty() && probes.size() < std::min<std::size_t>(static_cast<std::size_t>(gc.probes), available)) {
      const int level = static_cast<int>(u() * steps);
      const std::size_t cell = inside[static_cast<std::size_t>(u() * static_cast<double>(inside.size()))];
      if (used.insert({level, cell}).second) probes.push_back({level, cell});
    }
    if (gc.include_outside && !outside.empty())
      probes.push_back({static_cast<int>(u() * steps), outside[static_cast<std::size_t>(u() * static_cast<double>(outside.size()))]});
    if (probes.empty()) {
      s.report.add(Report::Status::Fail, "probes", "no probes could be placed");
      return kExitConfig;
    }

    const ControlProblem::GradientEvaluation ge = pb->gradient(f);
    std::vector<std::vector<double>> fd;
    for (double d : gc.deltas) fd.push_back(fd_gradient(f, probes, d, *pb, s.cfg.run.workers));

    auto rel = [&](double a, double b) {
      if (a == b) return 0.0;
      return std::abs(a - b) / std::max(std::abs(b), gc.abs_floor);
    };
    std::ofstream csv(s.out / "gradcheck.csv", std::ios::trunc);
    csv << "probe,level,cell,in_control,delta,adjoint,fd,rel_error\n";
    double worst_best = 0.0;
    bool outside_zero = true;
    std::vector<double> worst_per_delta(gc.deltas.size(), 0.0);
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double a = ge.g(probes[i].level, probes[i].cell);
      const bool in = grid->in_control(probes[i].cell);
      double best = INFINITY;
      for (std::size_t d = 0; d < gc.deltas.size(); ++d) {
        const double e = rel(a, fd[d][i]);
        best = std::min(best, e);
        worst_per_delta[d] = std::max(worst_per_delta[d], e);
        csv << i << ',' << probes[i].level << ',' << probes[i].cell << ',' << (in ? 1 : 0) << ','
            << format_double(gc.deltas[d]) << ',' << format_double(a) << ',' << format_double(fd[d][i]) << ','
            << format_double(e) << '\n';
        if (!in && (a != 0.0 || fd[d][i] != 0.0)) outside_zero = false;
      }
      worst_best = std::max(worst_best, best);
    }
    for (std::size_t d = 0; d < gc.deltas.size(); ++d)
      s.report.info("delta " + fmt(gc.deltas[d]), "max relative error " + fmt(worst_per_delta[d]));
    s.report.check(worst_best <= gc.tolerance, "gradient",
                   std::to_string(probes.size()) + " probes, worst best-delta relative error " + fmt(worst_best) +
                       " (tolerance " + fmt(gc.tolerance) + ")");
    if (gc.include_outside && !outside.empty())
      s.report.check(outside_zero, "outside_support", "adjoint and finite-difference entries off the control set");
    s.report.info("J", fmt(ge.J));
    return kExitPass;
  });
}

namespace {

struct SweepSample {
  ModelParams params;
  std::string description;
  FieldSpec N0, C0;
  std::vector<double> f;  ///< level-major control values
};

FieldSpec random_field(std::mt19937_64& rng, bool density) {
  auto u = [&] { return uniform01(rng()); };
  FieldSpec s;
  if (u() < 0.5) {
    s.kind = FieldSpec::Kind::Constant;
    s.value = density ? u() : 2.0 * u();
  } else {
    s.kind = FieldSpec::Kind::Bump;
    s.value = density ? 0.5 * u() : u();
    s.amplitude = density ? 1.2 * u() : 2.0 * u();
    s.center_x = u();
    s.center_y = u();
    s.width = 0.1 + 0.4 * u();
  }
  return s;
}

std::string describe(const FieldSpec& s) {
  if (s.kind == FieldSpec::Kind::Constant) return "constant " + fmt(s.value);
  return "bump " + fmt(s.value) + "+" + fmt(s.amplitude) + "@(" + fmt(s.center_x) + "," + fmt(s.center_y) + ")/" +
         fmt(s.width);
}

}  // namespace

int cmd_sweep(const ExperimentConfig& cfg0, const CommandOptions& opts) {
  Session s(cfg0, opts);
  return guarded(s, [&]() -> int {
    const GridPtr grid = build_grid(s.cfg);
    const SweepSpec& sw = s.cfg.sweep;
    const ConstitutiveSet cs = make_constitutive(s.cfg.model.constitutive);
    const int steps = s.cfg.model.n_steps;
    const bool warn_only = centered(s.cfg);
    const double f_lo = sw.f_sign == "nonnegative" ? std::max(0.0, s.cfg.control.f_min) : s.cfg.control.f_min;
    const double f_hi = s.cfg.control.f_max;

    // All draws happen here, in sample order, so results do not depend on the worker count.
    std::mt19937_64 rng(s.cfg.run.seed);
    auto u = [&] { return uniform01(rng()); };
    std::vector<SweepSample> samples(static_cast<std::size_t>(sw.samples));
    for (SweepSample& smp : samples) {
      smp.params = s.cfg.model;
      smp.params.alpha = sw.alpha_max * u();
      smp.params.beta = sw.beta_max * u();
      smp.params.eps = sw.eps_values[std::min(sw.eps_values.size() - 1,
                                              static_cast<std::size_t>(u() * static_cast<double>(sw.eps_values.size())))];
      smp.N0 = random_field(rng, true);
      smp.C0 = random_field(rng, false);
      smp.f.resize(static_cast<std::size_t>(steps) * grid->cell_count());
      for (double& v : smp.f) v = f_lo + (f_hi - f_lo) * u();
      smp.description = "alpha " + fmt(smp.params.alpha) + ", beta " + fmt(smp.params.beta) + ", eps " +
                        fmt(smp.params.eps) + ", N0 " + describe(smp.N0) + ", C0 " + describe(smp.C0);
    }

    struct Outcome {
      TrajectoryCheck check;
      bool solved = false;
      std::string error;
    };
    std::vector<Outcome> results(samples.size());
    fs::create_directories(s.out / "runs");
    parallel_for(samples.size(), s.cfg.run.workers, [&](std::size_t i) {
      const SweepSample& smp = samples[i];
      Outcome& o = results[i];
      ControlField f(grid, steps, f_lo, f_hi, 0.0);
      f.data() = smp.f;
      f.restrict_to_support();
      try {
        const Trajectory t = run_forward(build_field(smp.N0, grid, true), build_field(smp.C0, grid, false), f,
                                         smp.params, cs);
        o.check = check_trajectory(t);
        o.solved = true;
      } catch (const SolverError& e) {
        o.error = e.what();
      }
      char name[32];
      std::snprintf(name, sizeof name, "run_%04zu", i);
      const fs::path dir = s.out / "runs" / name;
      fs::create_directories(dir);
      std::ofstream sum(dir / "summary", std::ios::trunc);
      sum << "config = " << smp.description << '\n';
      if (o.solved) {
        sum << "min_N = " << format_double(o.check.min_N) << "\nmax_N = " << format_double(o.check.max_N)
            << "\nmin_C = " << format_double(o.check.min_C) << "\nmax_C = " << format_double(o.check.max_C)
            << "\nM = " << format_double(o.check.M) << "\nmass_drift = " << format_double(o.check.mass_drift)
            << "\nbounds = " << (o.check.bounds_ok() ? "pass" : "fail")
            << "\nmass = " << (o.check.mass_ok() ? "pass" : "fail") << '\n';
      } else {
        sum << "error = " << o.error << '\n';
      }
    });

    std::ofstream csv(s.out / "sweep.csv", std::ios::trunc);
    csv << "run,alpha,beta,eps,min_N,max_N,min_C,max_C,M,mass_drift,bounds,mass,solved\n";
    int bound_fail = 0, mass_fail = 0, solver_fail = 0;
    double min_N = INFINITY, max_N = -INFINITY, min_C = INFINITY, max_ratio = 0.0, max_drift = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Outcome& o = results[i];
      const SweepSample& smp = samples[i];
      csv << i << ',' << format_double(smp.params.alpha) << ',' << format_double(smp.params.beta) << ','
          << format_double(smp.params.eps) << ',';
      if (!o.solved) {
        ++solver_fail;
        csv << ",,,,,,,,0\n";
        s.report.add(warn_only ? Report::Status::Warn : Report::Status::Fail, "run " + std::to_string(i),
                     o.error + " [" + smp.description + "]");
        continue;
      }
      const TrajectoryCheck& c = o.check;
      csv << format_double(c.min_N) << ',' << format_double(c.max_N) << ',' << format_double(c.min_C) << ','
          << format_double(c.max_C) << ',' << format_double(c.M) << ',' << format_double(c.mass_drift) << ','
          << (c.bounds_ok() ? "pass" : "fail") << ',' << (c.mass_ok() ? "pass" : "fail") << ",1\n";
      min_N = std::min(min_N, c.min_N);
      max_N = std::max(max_N, c.max_N);
      min_C = std::min(min_C, c.min_C);
      if (c.M > 0.0) max_ratio = std::max(max_ratio, c.max_C / c.M);
      max_drift = std::max(max_drift, c.mass_drift);
      if (!c.bounds_ok()) {
        ++bound_fail;
        std::string d;
        for (const auto& v : c.n_violations) d += v + "; ";
        for (const auto& v : c.c_violations) d += v + "; ";
        s.report.add(warn_only ? Report::Status::Warn : Report::Status::Fail, "run " + std::to_string(i) + " bounds",
                     d + "[" + smp.description + "]");
      }
      if (!c.mass_ok()) {
        ++mass_fail;
        s.report.add(Report::Status::Fail, "run " + std::to_string(i) + " mass",
                     "drift " + fmt(c.mass_drift) + " [" + smp.description + "]");
      }
    }
    const std::string n = std::to_string(samples.size());
    const auto summary = [&](int fails, const std::string& name, const std::string& what) {
      if (fails == 0) s.report.add(Report::Status::Pass, name, n + " runs, " + what);
      else s.report.add(warn_only ? Report::Status::Warn : Report::Status::Fail, name,
                        std::to_string(fails) + " of " + n + " runs violate " + what);
    };
    summary(solver_fail, "solved", "all solves converged");
    summary(bound_fail, "max_principle", "0 <= N <= 1 and 0 <= C <= M");
    s.report.check(mass_fail == 0, "mass", std::to_string(mass_fail) + " of " + n + " runs exceed 1e-12 |Omega|");
    s.report.info("min_N", fmt(min_N));
    s.report.info("max_N", fmt(max_N));
    s.report.info("min_C", fmt(min_C));
    s.report.info("max_C_over_M", fmt(max_ratio));
    s.report.info("max_mass_drift", fmt(max_drift));
    if (warn_only) s.report.info("mode", "centered convection: bound violations reported as warnings");
    return kExitPass;
  });
}

int cmd_eoc(const ExperimentConfig& cfg0, const CommandOptions& opts) {
  Session s(cfg0, opts);
  return guarded(s, [&]() -> int {
    ExperimentConfig cfg = s.cfg;
    const EocSpec& ec = cfg.eoc;
    double eoc_min = ec.eoc_min;
    double f_value = cfg.control.initial;
    if (ec.preset == "smooth") {
      cfg.N0 = {FieldSpec::Kind::Cosine, 0.5, 0.3, 0.5, 0.5, 0.25, ""};
      cfg.C0 = {FieldSpec::Kind::Cosine, 1.0, 0.5, 0.5, 0.5, 0.25, ""};
    } else if (ec.preset == "constant") {
      cfg.N0 = FieldSpec::constant(0.5);
      cfg.C0 = FieldSpec::constant(cfg.model.beta > 0.0 ? cfg.model.alpha * 0.5 / cfg.model.beta : 0.5);
      f_value = 0.0;
    } else if (ec.preset == "degenerate") {
      cfg.N0 = {FieldSpec::Kind::Bump, 0.0, 1.5, 0.5, 0.5, 0.35, ""};
      cfg.C0 = {FieldSpec::Kind::Cosine, 1.0, 0.5, 0.5, 0.5, 0.25, ""};
      eoc_min = std::min(eoc_min, 0.5);
    }
    const GridPtr grid = build_grid(cfg);
    const ScalarField N0 = build_field(cfg.N0, grid, true);
    const ScalarField C0 = build_field(cfg.C0, grid, false);
    const ConstitutiveSet cs = make_constitutive(cfg.model.constitutive);
    const ValidationReport v = validate_params(cfg.model, cs, N0, C0);
    if (!v.ok()) {
      for (const auto& m : v.violations) s.report.add(Report::Status::Fail, "admissible", m);
      return kExitConfig;
    }

    std::vector<int> steps;
    for (int k = 0; k < ec.refinements; ++k) steps.push_back(ec.base_steps << k);
    steps.push_back(ec.base_steps * ec.reference_factor);
    std::vector<std::pair<ScalarField, ScalarField>> finals(steps.size());
    std::vector<std::string> errors(steps.size());
    parallel_for(steps.size(), cfg.run.workers, [&](std::size_t i) {
      ModelParams p = cfg.model;
      p.n_steps = steps[i];
      const ControlField f(grid, p.n_steps, cfg.control.f_min, cfg.control.f_max, f_value);
      try {
        const Trajectory t = run_forward(N0, C0, f, p, cs);
        finals[i] = {t.N.back(), t.C.back()};
      } catch (const SolverError& e) {
        errors[i] = std::to_string(steps[i]) + " steps: " + e.what();
      }
    });
    for (const auto& e : errors)
      if (!e.empty()) throw SolverError(-1, e);

    const std::size_t nref = steps.size() - 1;
    auto l2 = [&](const ScalarField& a, const ScalarField& b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
      return std::sqrt(acc * grid->cell_volume());
    };
    std::vector<double> eN, eC, hs;
    for (std::size_t i = 0; i < nref; ++i) {
      eN.push_back(l2(finals[i].first, finals[nref].first));
      eC.push_back(l2(finals[i].second, finals[nref].second));
      hs.push_back(cfg.model.T / steps[i]);
    }
    std::ofstream csv(s.out / "eoc.csv", std::ios::trunc);
    csv << "n_steps,h,err_N,err_C,eoc_N,eoc_C\n";
    for (std::size_t i = 0; i < nref; ++i) {
      csv << steps[i] << ',' << format_double(hs[i]) << ',' << format_double(eN[i]) << ',' << format_double(eC[i]) << ',';
      if (i > 0 && eN[i] > 0.0 && eC[i] > 0.0)
        csv << format_double(std::log2(eN[i - 1] / eN[i])) << ',' << format_double(std::log2(eC[i - 1] / eC[i]));
      else
        csv << ',';
      csv << '\n';
    }
    s.report.info("preset", ec.preset);
    s.report.info("reference_steps", std::to_string(steps.back()));

    const auto judge = [&](const std::vector<double>& e, const std::string& name) {
      const double emax = *std::max_element(e.begin(), e.end());
      if (emax <= 1e-14) {
        s.report.add(Report::Status::Pass, name, "exact (max error " + fmt(emax) + ")");
        return;
      }
      if (*std::min_element(e.begin(), e.end()) <= 0.0) {
        s.report.add(Report::Status::Fail, name, "an error vanished while others did not; order undefined");
        return;
      }
      // Least-squares slope of log e against log h.
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double m = static_cast<double>(e.size());
      for (std::size_t i = 0; i < e.size(); ++i) {
        const double x = std::log(hs[i]), y = std::log(e[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
      }
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      std::string pairs;
      double min_pair = INFINITY;
      for (std::size_t i = 1; i < e.size(); ++i) {
        const double r = std::log2(e[i - 1] / e[i]);
        min_pair = std::min(min_pair, r);
        pairs += (i > 1 ? " " : "") + fmt(r);
      }
      const bool ok = slope >= eoc_min && slope <= ec.eoc_max && min_pair >= eoc_min;
      s.report.check(ok, name,
                     "fitted order " + fmt(slope) + ", successive " + pairs + " (accepted [" + fmt(eoc_min) + ", " +
                         fmt(ec.eoc_max) + "], successive >= " + fmt(eoc_min) + ")");
    };
    judge(eN, "eoc_N");
    judge(eC, "eoc_C");
    return kExitPass;
  });
}

int run_command(const std::string& name, const fs::path& path, const CommandOptions& opts) {
  ExperimentConfig cfg;
  try {
    cfg = apply_overrides(parse_config(path), opts);
    const auto errs = validate_config(cfg);
    if (!errs.empty()) throw ConfigError(errs);
  } catch (const ConfigError& e) {
    for (const auto& m : e.errors()) std::cerr << "config error: " << m << '\n';
    return kExitConfig;
  }
  if (name == "forward") return cmd_forward(cfg, opts);
  if (name == "adjoint") return cmd_adjoint(cfg, opts);
  if (name == "optimize") return cmd_optimize(cfg, opts);
  if (name == "gradcheck") return cmd_gradcheck(cfg, opts);
  if (name == "sweep") return cmd_sweep(cfg, opts);
  if (name == "eoc") return cmd_eoc(cfg, opts);
  std::cerr << "unknown command '" << name << "'\n";
  return kExitConfig;
}

}  // namespace chemoctrl
