#include "chemoctrl/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace chemoctrl {

ControlProblem::Evaluation ControlProblem::evaluate(const ControlField& f) const {
  Evaluation e;
  e.traj = run_forward(N0, C0, f, params, cs);
  e.J = compute_cost(e.traj, f, Nd, Cd, params);
  return e;
}

ControlProblem::GradientEvaluation ControlProblem::gradient(const ControlField& f) const {
  return gradient(f, evaluate(f));
}

ControlProblem::GradientEvaluation ControlProblem::gradient(const ControlField& f, Evaluation forward) const {
  GradientEvaluation out;
  out.J = forward.J;
  out.traj = std::move(forward.traj);
  out.adj = run_adjoint(out.traj, f, Nd, Cd, params, cs);
  out.g = reduced_gradient(out.traj, out.adj, f, params);
  return out;
}

ControlField reduced_gradient(const Trajectory& traj, const AdjointPair& adj, const ControlField& f,
                              const ModelParams& params) {
  const int steps = params.n_steps;
  if (!same_grid(traj.grid, adj.grid) || !same_grid(traj.grid, f.grid()))
    throw std::invalid_argument("reduced_gradient: runs on different grids");
  if (traj.levels() != steps + 1 || adj.levels() != steps + 1 || f.n_steps() != steps)
    throw std::invalid_argument("reduced_gradient: step counts do not match");

  const Grid2D& g = *traj.grid;
  ControlField grad(traj.grid, steps, f.f_min(), f.f_max(), 0.0);
  const bool literal = adj.scheme == AdjointScheme::Literal;
  for (int n = 0; n < steps; ++n) {
    for (std::size_t k = 0; k < g.cell_count(); ++k) {
      if (!g.in_control(k)) continue;
      const double fv = f(n, k);
      double coupling;
      if (literal) {
        coupling = traj.C[n][k] * adj.q[n][k];
      } else {
        const double c_state = fv > 0.0   ? traj.C[n][k]
                               : fv < 0.0 ? traj.C[n + 1][k]
                                          : 0.5 * (traj.C[n][k] + traj.C[n + 1][k]);
        coupling = c_state * adj.q[n + 1][k];
      }
      grad(n, k) = params.gamma_f * fv + coupling;
    }
  }
  return grad;
}

namespace {

double fd_probe(const ControlField& f, const Probe& pr, double delta, const ControlProblem& problem) {
  const double v = f(pr.level, pr.cell);
  const double scale = problem.params.step() * f.grid()->cell_volume();
  double up = delta, down = delta;
  if (f.grid()->in_control(pr.cell)) {
    const double room_up = f.f_max() - v;
    const double room_down = v - f.f_min();
    const double room = std::min(room_up, room_down);
    if (room < delta) {
      if (room >= 1e-3 * delta) {
        up = down = room;
      } else if (room_up >= room_down) {
        up = std::min(delta, room_up);
        down = 0.0;
      } else {
        up = 0.0;
        down = std::min(delta, room_down);
      }
    }
  }
  if (up == 0.0 && down == 0.0) return 0.0;
  ControlField fp = f, fm = f;
  fp(pr.level, pr.cell) = v + up;
  fm(pr.level, pr.cell) = v - down;
  const double Jp = up > 0.0 ? problem.cost(fp) : problem.cost(f);
  const double Jm = down > 0.0 ? problem.cost(fm) : problem.cost(f);
  return (Jp - Jm) / ((up + down) * scale);
}

}  // namespace

std::vector<double> fd_gradient(const ControlField& f, const std::vector<Probe>& probes, double delta,
                                const ControlProblem& problem, int workers) {
  if (!(delta > 0.0)) throw std::invalid_argument("fd_gradient: delta must be > 0");
  for (const Probe& pr : probes)
    if (pr.level < 0 || pr.level >= f.n_steps() || pr.cell >= f.grid()->cell_count())
      throw std::invalid_argument("fd_gradient: probe out of range");

  std::vector<double> out(probes.size(), 0.0);
  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(probes.size())));
  if (nw == 1) {
    for (std::size_t k = 0; k < probes.size(); ++k) out[k] = fd_probe(f, probes[k], delta, problem);
    return out;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nw));
  std::vector<std::thread> pool;
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = static_cast<std::size_t>(w); k < probes.size(); k += static_cast<std::size_t>(nw))
          out[k] = fd_probe(f, probes[k], delta, problem);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

ControlField project_control(const ControlField& f) {
  ControlField out = f;
  const Grid2D& g = *f.grid();
  for (int n = 0; n < f.n_steps(); ++n)
    for (std::size_t k = 0; k < g.cell_count(); ++k)
      out(n, k) = g.in_control(k) ? std::clamp(f(n, k), f.f_min(), f.f_max()) : 0.0;
  return out;
}

double stationarity_measure(const ControlField& f, const ControlField& g, double eta, double h) {
  if (!(eta > 0.0)) throw std::invalid_argument("stationarity_measure: eta must be > 0");
  ControlField trial = f;
  for (std::size_t k = 0; k < trial.data().size(); ++k) trial.data()[k] = f.data()[k] - eta * g.data()[k];
  const ControlField proj = project_control(trial);
  ControlField diff = f;
  for (std::size_t k = 0; k < diff.data().size(); ++k) diff.data()[k] = f.data()[k] - proj.data()[k];
  return weighted_norm(diff, h);
}

std::string to_string(OptimizeStatus s) {
  switch (s) {
    case OptimizeStatus::Converged: return "converged";
    case OptimizeStatus::MaxIterations: return "max_iterations";
    case OptimizeStatus::LineSearchFailed: return "line_search_failed";
    case OptimizeStatus::SolverFailed: return "solver_failed";
  }
  return "unknown";
}

OptimizationResult optimize(const ControlField& f0, const ControlProblem& problem, const OptimizerOptions& opts,
                            const IterateObserver& observer) {
  if (!f0.is_feasible(0.0)) throw std::invalid_argument("optimize: initial control is not feasible");
  const double h = problem.params.step();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  OptimizationResult res;
  ControlProblem::GradientEvaluation cur;
  try {
    cur = problem.gradient(f0);
  } catch (const SolverError& e) {
    res.status = OptimizeStatus::SolverFailed;
    res.message = e.what();
    res.state.f = f0;
    return res;
  }
  ControlField f = f0;
  double last_step = 0.0;

  for (int k = 0;; ++k) {
    const double stat = stationarity_measure(f, cur.g, opts.eta, h);
    res.state = {f, cur.J, stat, last_step, k};
    if (observer) observer(res.state);
    if (stat <= opts.stationarity_tol) {
      res.history.push_back({k, cur.J, stat, 0.0, elapsed()});
      res.status = OptimizeStatus::Converged;
      break;
    }
    if (k >= opts.max_iterations) {
      res.history.push_back({k, cur.J, stat, 0.0, elapsed()});
      res.status = OptimizeStatus::MaxIterations;
      break;
    }

    double tau = opts.tau0;
    bool accepted = false;
    ControlField next;
    ControlProblem::Evaluation next_eval;
    for (int b = 0; b <= opts.max_backtracks; ++b, tau *= opts.backtrack) {
      ControlField trial = f;
      for (std::size_t i = 0; i < trial.data().size(); ++i) trial.data()[i] -= tau * cur.g.data()[i];
      trial = project_control(trial);
      ControlField d = trial;
      for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] -= f.data()[i];
      const double dist2 = weighted_dot(d, d, h);
      try {
        ControlProblem::Evaluation ev = problem.evaluate(trial);
        if (ev.J < cur.J && ev.J <= cur.J - opts.sigma / tau * dist2) {
          next = std::move(trial);
          next_eval = std::move(ev);
          accepted = true;
          break;
        }
      } catch (const SolverError&) {
        // treat as a rejected trial and keep backtracking
      }
    }
    if (!accepted) {
      res.history.push_back({k, cur.J, stat, 0.0, elapsed()});
      res.status = OptimizeStatus::LineSearchFailed;
      res.message = "no sufficient decrease after " + std::to_string(opts.max_backtracks) + " backtracks";
      break;
    }
    res.history.push_back({k, cur.J, stat, tau, elapsed()});
    last_step = tau;
    f = std::move(next);
    try {
      cur = problem.gradient(f, std::move(next_eval));
    } catch (const SolverError& e) {
      res.status = OptimizeStatus::SolverFailed;
      res.message = e.what();
      res.state = {f, next_eval.J, stat, last_step, k + 1};
      break;
    }
  }
  return res;
}

}  // namespace chemoctrl
