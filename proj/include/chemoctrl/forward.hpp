#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chemoctrl/constitutive.hpp"
#include "chemoctrl/control.hpp"
#include "chemoctrl/grid.hpp"
#include "chemoctrl/params.hpp"

namespace chemoctrl {

/// A time-stepping failure, tagged with the level that could not be produced.
class SolverError : public std::runtime_error {
public:
  SolverError(int level, const std::string& what)
      : std::runtime_error("level " + std::to_string(level) + ": " + what), level_(level) {}
  int level() const { return level_; }

private:
  int level_;
};

struct NonlinearSolveReport {
  int iterations = 0;
  double residual = 0.0;  ///< h * max-norm of the residual at exit
  bool converged = false;
  bool used_fallback = false;
};

/// Forward history: levels 0..n_steps at t_n = n T / n_steps.
struct Trajectory {
  GridPtr grid;
  ModelParams params;
  ControlField control;
  std::vector<double> times;
  std::vector<ScalarField> N;
  std::vector<ScalarField> C;
  std::vector<NonlinearSolveReport> reports;  ///< one per step, reports[n] produced level n+1

  int levels() const { return static_cast<int>(N.size()); }
};

/// C^{n+1} from (1/h + beta + f^-) C^{n+1} + L C^{n+1} = C^n/h + alpha N^n + f^+ C^n
/// with f the control of the step (zero outside the control set).
ScalarField step_C(const ScalarField& C_n, const ScalarField& N_n, const ScalarField& f_step, double h,
                   const ModelParams& params);

/// N^{n+1} from (N^{n+1} - N^n)/h + F(N^{n+1}; C^{n+1}) = 0 by damped Newton,
/// falling back to a lagged-coefficient fixed point.
std::pair<ScalarField, NonlinearSolveReport> step_N(const ScalarField& N_n, const ScalarField& C_np1, double h,
                                                    const ModelParams& params, const ConstitutiveSet& cs);

/// Full forward run. Throws std::invalid_argument for inadmissible input and
/// SolverError for a failing step.
Trajectory run_forward(const ScalarField& N0, const ScalarField& C0, const ControlField& f, const ModelParams& params,
                       const ConstitutiveSet& cs);

/// Target values per time level; a single field is broadcast to every level.
class TargetSeries {
public:
  TargetSeries() = default;
  explicit TargetSeries(ScalarField constant) : levels_{std::move(constant)} {}
  explicit TargetSeries(std::vector<ScalarField> levels) : levels_(std::move(levels)) {}

  static TargetSeries from_trajectory_N(const Trajectory& t) { return TargetSeries(t.N); }
  static TargetSeries from_trajectory_C(const Trajectory& t) { return TargetSeries(t.C); }

  const ScalarField& at(int level) const { return levels_.size() == 1 ? levels_.front() : levels_.at(level); }
  bool is_constant() const { return levels_.size() == 1; }
  std::size_t size() const { return levels_.size(); }
  bool empty() const { return levels_.empty(); }

private:
  std::vector<ScalarField> levels_;
};

/// Tracking cost by the left rectangle rule in time and the midpoint rule in space:
/// h hx hy sum_{n<n_steps} [ gN/2 |N_n - Nd_n|^2 + gC/2 |C_n - Cd_n|^2 + gf/2 |f_n|^2_{control set} ].
double compute_cost(const Trajectory& traj, const ControlField& f, const TargetSeries& Nd, const TargetSeries& Cd,
                    const ModelParams& params);

}  // namespace chemoctrl
