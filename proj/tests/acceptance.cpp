// Acceptance runs. Each criterion prints one line
//   criterion N: PASS|FAIL <measurements>
// and the process exits nonzero if any selected criterion fails.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "chemoctrl/commands.hpp"
#include "chemoctrl/config.hpp"
#include "chemoctrl/optimizer.hpp"
#include "oracles.hpp"

using namespace chemoctrl;
namespace fs = std::filesystem;

namespace {

fs::path g_configs = CHEMOCTRL_CONFIG_DIR;
fs::path g_out;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

CommandOptions quiet_options(const std::string& name) {
  CommandOptions o;
  o.out = g_out / name;
  return o;
}

// Smooth random field: constant plus two cosine modes, clamped to [lo, hi].
ScalarField smooth_random(const GridPtr& g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base = lo + (hi - lo) * u(rng);
  const double a1 = (hi - lo) * (u(rng) - 0.5), a2 = (hi - lo) * (u(rng) - 0.5);
  const int k1 = 1 + static_cast<int>(3 * u(rng)), k2 = 1 + static_cast<int>(3 * u(rng));
  return ScalarField::from_function(g, [&](double x, double y) {
    const double v = base + a1 * std::cos(k1 * M_PI * x) + a2 * std::cos(k2 * M_PI * y);
    return std::clamp(v, lo, hi);
  });
}

// Criteria 1 and 2 share one randomised sweep.
struct SweepResult {
  int runs = 0;
  int solver_failures = 0;
  int bound_failures = 0;
  int mass_failures = 0;
  double worst_below = 0.0;  ///< largest violation of N >= 0 or N <= 1
  double worst_c_ratio = 0.0;
  double worst_drift = 0.0;
  double seconds = 0.0;
  int cli_exit = -1;
};

const SweepResult& sweep() {
  static SweepResult r = [] {
    SweepResult s;
    const auto t0 = std::chrono::steady_clock::now();
    Grid2D g0(16, 16);
    g0.add_control_rect(0.2, 0.8, 0.2, 0.8);
    const GridPtr g = make_grid(g0);
    const ConstitutiveSet cs = make_logistic_constitutive();
    std::mt19937_64 rng(987654321);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double eps_choices[3] = {0.0, 1e-3, 1e-2};
    for (int run = 0; run < 100; ++run) {
      ModelParams p;
      p.n_steps = 20;
      p.alpha = 2.0 * u(rng);
      p.beta = 2.0 * u(rng);
      p.eps = eps_choices[static_cast<int>(3 * u(rng)) % 3];
      const ScalarField N0 = smooth_random(g, rng, 0.0, 1.0);
      const ScalarField C0 = smooth_random(g, rng, 0.0, 2.0);
      ControlField f(g, 20, -3.0, 3.0, 0.0);
      for (double& v : f.data()) v = -3.0 + 6.0 * u(rng);
      f.restrict_to_support();
      ++s.runs;
      Trajectory t;
      try {
        t = run_forward(N0, C0, f, p, cs);
      } catch (const std::exception&) {
        ++s.solver_failures;
        continue;
      }
      const double tol = 1e-10 + p.solver.newton_tol;
      const double M = m_bound(C0.max_abs(), f.sup_norm(), p.alpha, p.T);
      double mass0 = 0.0;
      for (std::size_t k = 0; k < g->cell_count(); ++k) mass0 += N0[k];
      bool bounds = true, mass = true;
      for (int n = 0; n < t.levels(); ++n) {
        double sum = 0.0;
        for (std::size_t k = 0; k < g->cell_count(); ++k) {
          const double N = t.N[n][k], C = t.C[n][k];
          sum += N;
          s.worst_below = std::max({s.worst_below, -N, N - 1.0});
          if (M > 0.0) s.worst_c_ratio = std::max(s.worst_c_ratio, C / M);
          if (!(N >= -tol && N <= 1.0 + tol && C >= 0.0 && C <= M)) bounds = false;
        }
        const double drift = std::abs(sum - mass0) * g->hx() * g->hy();
        s.worst_drift = std::max(s.worst_drift, drift);
        if (drift > 1e-12 * g->area()) mass = false;
      }
      s.bound_failures += !bounds;
      s.mass_failures += !mass;
    }
    s.cli_exit = run_command("sweep", g_configs / "sweep.ini", quiet_options("sweep"));
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
  }();
  return r;
}

Outcome criterion1() {
  const SweepResult& s = sweep();
  const bool ok = s.runs >= 100 && s.solver_failures == 0 && s.bound_failures == 0 && s.cli_exit == kExitPass &&
                  s.seconds <= 120.0;
  return {ok, std::to_string(s.runs) + " runs, " + std::to_string(s.bound_failures) + " bound violations, " +
                  std::to_string(s.solver_failures) + " solver failures, worst N excursion " + num(s.worst_below) +
                  ", max C/M " + num(s.worst_c_ratio) + ", CLI sweep exit " + std::to_string(s.cli_exit) + ", " +
                  num(s.seconds, 3) + " s"};
}

Outcome criterion2() {
  const SweepResult& s = sweep();
  const bool ok = s.runs >= 100 && s.solver_failures == 0 && s.mass_failures == 0;
  return {ok, std::to_string(s.mass_failures) + " mass violations, worst drift " + num(s.worst_drift) +
                  " (limit 1e-12 |Omega|)"};
}

Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  Grid2D g0(8, 8);
  g0.add_control_rect(0.2, 0.8, 0.2, 0.8);
  const GridPtr g = make_grid(g0);
  ModelParams p;
  p.n_steps = 10;
  p.eps = 1e-2;
  p.gamma_f = 1e-2;
  const ScalarField C0 = ScalarField::from_function(g, [](double x, double) { return 1.0 + 0.5 * std::cos(M_PI * x); });
  const ScalarField Nd = ScalarField::from_function(g, [](double x, double y) { return 0.4 + 0.2 * std::cos(M_PI * x) * std::cos(M_PI * y); });
  const ControlProblem prob{ScalarField(g, 0.5), C0, p, make_logistic_constitutive(), TargetSeries(Nd),
                            TargetSeries(ScalarField(g, 0.5))};
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ControlField f(g, 10, -2.0, 2.0, 0.0);
  for (double& v : f.data()) v = u(rng);
  f.restrict_to_support();
  const ControlField grad = prob.gradient(f).g;

  std::vector<std::pair<int, std::size_t>> probes;
  std::vector<std::size_t> support;
  for (std::size_t k = 0; k < g->cell_count(); ++k)
    if (g->in_control(k)) support.push_back(k);
  for (int i = 0; i < 24; ++i)
    probes.push_back({static_cast<int>(rng() % 10), support[rng() % support.size()]});

  const double w = p.step() * g->hx() * g->hy();
  double worst = 0.0;
  for (const auto& [n, k] : probes) {
    double best = INFINITY;
    for (double delta : {1e-2, 1e-3, 1e-4}) {
      ControlField fp = f, fm = f;
      fp(n, k) += delta;
      fm(n, k) -= delta;
      const double fd = (prob.cost(fp) - prob.cost(fm)) / (2.0 * delta * w);
      best = std::min(best, std::abs(fd - grad(n, k)) / std::max(std::abs(grad(n, k)), 1e-10));
    }
    worst = std::max(worst, best);
  }
  const int cli = run_command("gradcheck", g_configs / "gradcheck.ini", quiet_options("gradcheck"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-3 && cli == kExitPass && secs <= 60.0,
          std::to_string(probes.size()) + " probes, worst best-delta relative error " + num(worst) +
              ", CLI gradcheck exit " + std::to_string(cli) + ", " + num(secs, 3) + " s"};
}

Outcome criterion4() {
  Grid2D g0(12, 12);
  g0.add_control_rect(0.25, 0.75, 0.25, 0.75);
  const GridPtr g = make_grid(g0);
  ModelParams p;
  p.n_steps = 15;
  p.eps = 1e-2;
  p.gamma_f = 1e-3;
  const ConstitutiveSet cs = make_logistic_constitutive();
  std::mt19937_64 rng(77);
  const ScalarField N0 = smooth_random(g, rng, 0.05, 0.95), C0 = smooth_random(g, rng, 0.0, 2.0);
  ControlField f(g, 15, -1, 1, 0.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : f.data()) v = u(rng);
  f.restrict_to_support();
  const Trajectory t = run_forward(N0, C0, f, p, cs);
  double worst = 0.0;
  for (AdjointScheme scheme : {AdjointScheme::Consistent, AdjointScheme::Literal}) {
    ModelParams q = p;
    q.solver.adjoint = scheme;
    const AdjointPair a =
        run_adjoint(t, f, TargetSeries::from_trajectory_N(t), TargetSeries::from_trajectory_C(t), q, cs);
    for (int n = 0; n < a.levels(); ++n) worst = std::max({worst, a.p[n].max_abs(), a.q[n].max_abs()});
  }
  const int cli = run_command("adjoint", g_configs / "adjoint_perfect.ini", quiet_options("adjoint_perfect"));
  return {worst <= 1e-10 && cli == kExitPass,
          "max |p|, |q| over all levels and both schemes " + num(worst) + ", CLI adjoint exit " + std::to_string(cli)};
}

Outcome criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = parse_config(g_configs / "optimize_recover.ini");
  const GridPtr g = build_grid(cfg);
  const ControlProblem prob = build_problem(cfg, g);
  const ControlField f0 = build_initial_control(cfg, g);
  bool feasible = true;
  const OptimizationResult r =
      optimize(f0, prob, cfg.optimizer, [&](const OptimizationState& s) { feasible = feasible && s.f.is_feasible(); });
  const double J0 = prob.cost(f0);
  bool decreasing = true;
  for (std::size_t i = 1; i < r.history.size(); ++i) decreasing = decreasing && r.history[i].J < r.history[i - 1].J;
  const double ratio = r.state.J / J0;
  const int cli = run_command("optimize", g_configs / "optimize_recover.ini", quiet_options("optimize_recover"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = decreasing && feasible && ratio <= 0.1 && r.status != OptimizeStatus::SolverFailed &&
                  cli == kExitPass && secs <= 300.0;
  return {ok, std::to_string(r.history.size() - 1) + " iterations (" + to_string(r.status) + "), J/J0 " + num(ratio) +
                  ", strictly decreasing " + (decreasing ? "yes" : "no") + ", feasible " + (feasible ? "yes" : "no") +
                  ", CLI optimize exit " + std::to_string(cli) + ", " + num(secs, 3) + " s"};
}

Outcome criterion6() {
  const ExperimentConfig cfg = parse_config(g_configs / "optimize_control_cost.ini");
  const GridPtr g = build_grid(cfg);
  const ControlProblem prob = build_problem(cfg, g);
  const ControlField f0 = build_initial_control(cfg, g);
  const OptimizationResult r = optimize(f0, prob, cfg.optimizer);
  const double norm = weighted_norm(r.state.f, cfg.model.step());
  const int cli = run_command("optimize", g_configs / "optimize_control_cost.ini", quiet_options("optimize_control_cost"));
  return {norm <= 1e-4 && r.status == OptimizeStatus::Converged && cli == kExitPass,
          "weighted |f| " + num(norm) + " from " + num(weighted_norm(f0, cfg.model.step())) + " after " +
              std::to_string(r.state.iteration) + " iterations (" + to_string(r.status) + "), CLI exit " +
              std::to_string(cli)};
}

Outcome criterion7() {
  Grid2D g0(16, 16);
  g0.add_control_rect(0.25, 0.75, 0.25, 0.75);
  const GridPtr g = make_grid(g0);
  const ConstitutiveSet cs = make_logistic_constitutive();
  const ScalarField N0 = ScalarField::from_function(
      g, [](double x, double y) { return 0.5 + 0.3 * std::cos(M_PI * x) * std::cos(M_PI * y); });
  const ScalarField C0 =
      ScalarField::from_function(g, [](double x, double y) { return 1.0 + 0.5 * std::cos(M_PI * x) * std::cos(M_PI * y); });
  auto final_state = [&](int steps) {
    ModelParams p;
    p.eps = 1e-2;
    p.n_steps = steps;
    const Trajectory t = run_forward(N0, C0, ControlField(g, steps, -1, 1, 0.5), p, cs);
    return std::make_pair(t.N.back(), t.C.back());
  };
  // Successive differences u_h - u_{h/2}: their ratio is 2^order without a reference solution.
  std::vector<std::pair<ScalarField, ScalarField>> u;
  for (int steps : {10, 20, 40, 80}) u.push_back(final_state(steps));
  std::vector<double> dN, dC;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    dN.push_back(max_abs_diff(u[i].first, u[i + 1].first));
    dC.push_back(max_abs_diff(u[i].second, u[i + 1].second));
  }
  bool ok = true;
  std::string detail = "orders N:";
  for (std::size_t i = 0; i + 1 < dN.size(); ++i) {
    const double e = std::log2(dN[i] / dN[i + 1]);
    ok = ok && e >= 0.8 && e <= 1.5;
    detail += " " + num(e);
  }
  detail += ", C:";
  for (std::size_t i = 0; i + 1 < dC.size(); ++i) {
    const double e = std::log2(dC[i] / dC[i + 1]);
    ok = ok && e >= 0.8 && e <= 1.5;
    detail += " " + num(e);
  }
  const int cli = run_command("eoc", g_configs / "eoc.ini", quiet_options("eoc"));
  return {ok && cli == kExitPass, detail + ", CLI eoc exit " + std::to_string(cli)};
}

Outcome criterion8() {
  Grid2D g0(4, 4);
  g0.add_control_rect(0.25, 0.75, 0.25, 0.75);
  const GridPtr g = make_grid(g0);
  const Grid2D& grid = *g;
  const std::size_t n = grid.cell_count();
  const ConstitutiveSet cs = make_logistic_constitutive();
  ModelParams p;
  p.eps = 1e-2;
  p.alpha = 0.9;
  p.beta = 0.4;
  const double h = 0.05;
  double eC = 0.0, eN = 0.0, eP = 0.0, eQ = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto Nv = oracle::random_values(n, 0.05, 0.95, seed), Cv = oracle::random_values(n, 0.0, 2.0, seed + 100);
    const auto fv = oracle::random_values(n, -3.0, 3.0, seed + 200), gv = oracle::random_values(n, -3.0, 3.0, seed + 300);
    const ScalarField N(g, Nv), C(g, Cv), f(g, fv), f2(g, gv);

    // C-step.
    const ScalarField Cn = step_C(C, N, f, h, p);
    oracle::Dense A = oracle::laplacian(grid);
    std::vector<double> b(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double fk = grid.in_control(k) ? fv[k] : 0.0;
      A[k][k] += 1.0 / h + p.beta + std::max(-fk, 0.0);
      b[k] = Cv[k] / h + p.alpha * Nv[k] + std::max(fk, 0.0) * Cv[k];
    }
    const auto C_ref = oracle::solve(A, b);
    eC = std::max(eC, oracle::max_diff(Cn.vector(), C_ref) / std::max(1.0, oracle::max_abs(C_ref)));

    // N-step.
    const auto N_next = step_N(N, Cn, h, p, cs).first;
    eN = std::max(eN, oracle::max_diff(N_next.vector(), oracle::newton_step_N(grid, Nv, Cn.vector(), h, p.eps)));

    // Both adjoint substeps of the default scheme.
    const auto p1 = oracle::random_values(n, -1, 1, seed + 400), q1 = oracle::random_values(n, -1, 1, seed + 500);
    const ScalarField Nd(g, 0.3), Cd(g, 0.7);
    const AdjointStepResult got =
        step_adjoint_backward(ScalarField(g, p1), ScalarField(g, q1), AdjointStepData{N, C, Nd, Cd, f2, f}, h, p, cs);
    const auto JN = oracle::residual_jacobian(grid, Nv, Cv, h, p.eps, true);
    const auto JC = oracle::residual_jacobian(grid, Nv, Cv, h, p.eps, false);
    oracle::Dense JNt = oracle::zeros(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) JNt[r][c] = JN[c][r];
    for (std::size_t k = 0; k < n; ++k) b[k] = p1[k] / h + p.alpha * q1[k] + p.gamma_N * (Nv[k] - Nd[k]);
    const auto p0 = oracle::solve(JNt, b);
    eP = std::max(eP, oracle::max_diff(got.p.vector(), p0) / std::max(1.0, oracle::max_abs(p0)));
    oracle::Dense Aq = oracle::laplacian(grid);
    const auto JCtp = oracle::matvec_transposed(JC, p0);
    for (std::size_t k = 0; k < n; ++k) {
      const double fi = grid.in_control(k) ? gv[k] : 0.0, fo = grid.in_control(k) ? fv[k] : 0.0;
      Aq[k][k] += 1.0 / h + p.beta + std::max(-fi, 0.0);
      b[k] = (1.0 / h + std::max(fo, 0.0)) * q1[k] - JCtp[k] + p.gamma_C * (Cv[k] - Cd[k]);
    }
    const auto q0 = oracle::solve(Aq, b);
    eQ = std::max(eQ, oracle::max_diff(got.q.vector(), q0) / std::max(1.0, oracle::max_abs(q0)));
  }
  return {eC <= 1e-12 && eN <= 1e-8 && eP <= 1e-12 && eQ <= 1e-12,
          "step_C " + num(eC) + ", step_N " + num(eN) + ", adjoint p " + num(eP) + ", adjoint q " + num(eQ) +
              " over 10 random 4x4 states"};
}

Outcome criterion9() {
  const ConstitutiveSet cs = make_logistic_constitutive();
  std::string detail = "logistic K0 estimates:";
  std::vector<double> values;
  for (int n : {100, 200, 400, 800}) {
    const K0Estimate k = estimate_K0(cs, n);
    values.push_back(k.infinite ? INFINITY : k.value);
    detail += " n=" + std::to_string(n) + " " + (k.infinite ? std::string("inf") : num(k.value, 7));
  }
  // Three significant digits: identical after rounding to 3 digits.
  auto round3 = [](double v) { return std::stod(num(v, 3)); };
  const bool ok = std::isfinite(values[0]) && std::isfinite(values[1]) && round3(values[0]) == round3(values[1]);
  if (!ok) detail += "; the estimate roughly doubles per doubling (the ratio near s = 0 grows like 2/s)";
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance runs"};
  std::vector<int> selected;
  std::string out = (fs::temp_directory_path() / "chemoctrl_acceptance").string();
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--out", out, "scratch directory for command outputs");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  g_out = out;
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::map<int, std::function<Outcome()>> all{{1, criterion1}, {2, criterion2}, {3, criterion3},
                                                    {4, criterion4}, {5, criterion5}, {6, criterion6},
                                                    {7, criterion7}, {8, criterion8}, {9, criterion9}};
  bool failed = false;
  for (int c : selected) {
    Outcome o;
    try {
      o = all.at(c)();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << ' ' << o.detail << std::endl;
    failed = failed || !o.pass;
  }
  return failed ? 1 : 0;
}
