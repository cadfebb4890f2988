#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "chemoctrl/adjoint.hpp"
#include "chemoctrl/constitutive.hpp"
#include "chemoctrl/control.hpp"
#include "chemoctrl/forward.hpp"
#include "chemoctrl/params.hpp"

namespace chemoctrl {

/// Everything needed to evaluate J(f): data, targets, model.
struct ControlProblem {
  ScalarField N0;
  ScalarField C0;
  ModelParams params;
  ConstitutiveSet cs;
  TargetSeries Nd;
  TargetSeries Cd;

  struct Evaluation {
    Trajectory traj;
    double J = 0.0;
  };
  struct GradientEvaluation {
    Trajectory traj;
    AdjointPair adj;
    double J = 0.0;
    ControlField g;
  };

  Evaluation evaluate(const ControlField& f) const;
  double cost(const ControlField& f) const { return evaluate(f).J; }
  GradientEvaluation gradient(const ControlField& f) const;
  /// Adjoint and gradient for an already computed forward run of f.
  GradientEvaluation gradient(const ControlField& f, Evaluation forward) const;
};

/// Density of dJ/df per unit space-time measure, zero off the control set.
/// Consistent scheme: g_n = gf f_n + C_* q_{n+1}, C_* = C_n where f_n > 0,
/// C_{n+1} where f_n < 0 and their mean where f_n = 0 (the f^+/f^- kink).
/// Literal scheme: g_n = gf f_n + C_n q_n.
ControlField reduced_gradient(const Trajectory& traj, const AdjointPair& adj, const ControlField& f,
                              const ModelParams& params);

struct Probe {
  int level;
  std::size_t cell;
};

/// Central differences of J normalised by h hx hy, with forward re-solves.
/// Near a bound the step shrinks to stay feasible; at an active bound the
/// difference becomes one-sided. Probes are independent and may run on
/// `workers` threads; the result does not depend on the worker count.
std::vector<double> fd_gradient(const ControlField& f, const std::vector<Probe>& probes, double delta,
                                const ControlProblem& problem, int workers = 1);

/// Clamp to [f_min, f_max] on the control set, zero elsewhere.
ControlField project_control(const ControlField& f);

/// || f - P(f - eta g) || in the space-time weighted norm (weights h hx hy).
double stationarity_measure(const ControlField& f, const ControlField& g, double eta, double h);

struct OptimizerOptions {
  double sigma = 1e-4;
  double tau0 = 1.0;
  double backtrack = 0.5;
  int max_backtracks = 30;
  double stationarity_tol = 1e-6;
  double eta = 1.0;  ///< step used inside the stationarity measure
  int max_iterations = 200;

  bool operator==(const OptimizerOptions&) const = default;
};

struct OptimizationState {
  ControlField f;
  double J = 0.0;
  double stationarity = 0.0;
  double step = 0.0;  ///< last accepted step length
  int iteration = 0;
};

struct HistoryEntry {
  int iteration;
  double J;
  double stationarity;
  double step;  ///< step accepted from this iterate, 0 if none
  double wall_time;
};

enum class OptimizeStatus { Converged, MaxIterations, LineSearchFailed, SolverFailed };
std::string to_string(OptimizeStatus s);

struct OptimizationResult {
  OptimizationState state;
  std::vector<HistoryEntry> history;
  OptimizeStatus status = OptimizeStatus::MaxIterations;
  std::string message;
};

/// Called once per iterate, including the first and the last.
using IterateObserver = std::function<void(const OptimizationState&)>;

/// Projected gradient descent with Armijo backtracking on the box.
OptimizationResult optimize(const ControlField& f0, const ControlProblem& problem, const OptimizerOptions& opts = {},
                            const IterateObserver& observer = {});

}  // namespace chemoctrl
