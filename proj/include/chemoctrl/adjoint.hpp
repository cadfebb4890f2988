#pragma once

#include <vector>

#include "chemoctrl/constitutive.hpp"
#include "chemoctrl/control.hpp"
#include "chemoctrl/forward.hpp"
#include "chemoctrl/grid.hpp"
#include "chemoctrl/params.hpp"

namespace chemoctrl {

/// Normal components on cell faces. x-face (i,j), 0 <= i <= nx, is the left
/// face of cell (i,j), stored at j*(nx+1)+i; y-face (i,j), 0 <= j <= ny, is the
/// bottom face, stored at j*nx+i. Boundary faces are zero.
struct FaceField {
  GridPtr grid;
  std::vector<double> x_faces;
  std::vector<double> y_faces;

  double x_face(int i, int j) const { return x_faces[static_cast<std::size_t>(j) * (grid->nx() + 1) + i]; }
  double y_face(int i, int j) const { return y_faces[static_cast<std::size_t>(j) * grid->nx() + i]; }
  double max_abs() const;
};

/// V = a'(N) grad N - chi'(N) grad C on faces: central face gradients and
/// arithmetic face means of a'(N), chi'(N).
FaceField velocity_field(const ScalarField& N, const ScalarField& C, const ConstitutiveSet& cs, const Grid2D& grid);

/// Dual states by forward level, p[n], q[n] for n = 0..n_steps, computed from
/// n_steps down to 0.
struct AdjointPair {
  GridPtr grid;
  std::vector<ScalarField> p;
  std::vector<ScalarField> q;
  double eps = 0.0;
  AdjointScheme scheme = AdjointScheme::Consistent;
  /// Levels at which the literal q-system lost diagonal dominance (f h >= 1 + beta h).
  std::vector<int> dominance_lost;

  int levels() const { return static_cast<int>(p.size()); }
};

/// Forward data consumed by one backward step at level n.
struct AdjointStepData {
  const ScalarField& N;       ///< N_n
  const ScalarField& C;       ///< C_n
  const ScalarField& Nd;      ///< target at level n
  const ScalarField& Cd;
  const ScalarField& f_into;  ///< control of the step that produced level n
  const ScalarField& f_out;   ///< control of the step leaving level n
};

struct AdjointStepResult {
  ScalarField p;
  ScalarField q;
  bool dominance_lost = false;
};

/// One implicit step of the time-reversed dual system: p_n with q lagged at
/// n+1, then q_n with the new p_n. Requires eps > 0.
///
/// Consistent scheme (default):
///   (1/h) (p_n - p_{n+1}) + J_N^T p_n = alpha q_{n+1} + gN (N_n - Nd)
///   (1/h) (q_n - q_{n+1}) + L q_n + beta q_n + f_into^- q_n - f_out^+ q_{n+1}
///       = -div(chi_face grad p_n) + gC (C_n - Cd)
/// where J_N is the linearisation of the cell-density fluxes at (N_n, C_n), so
/// J_N^T = A_eps + (transport along V), and chi_face is the upwinded face chi.
///
/// Literal scheme: A_eps with arithmetic face a_eps, V.grad p upwinded by the
/// sign of V on faces, -f_out q_n fully implicit, arithmetic face chi.
AdjointStepResult step_adjoint_backward(const ScalarField& p_next, const ScalarField& q_next,
                                        const AdjointStepData& data, double h, const ModelParams& params,
                                        const ConstitutiveSet& cs);

/// Backward sweep from p = q = 0 at T. Throws std::invalid_argument when
/// eps <= 0 or the inputs do not match, SolverError on a failed step.
AdjointPair run_adjoint(const Trajectory& traj, const ControlField& f, const TargetSeries& Nd, const TargetSeries& Cd,
                        const ModelParams& params, const ConstitutiveSet& cs);

}  // namespace chemoctrl
