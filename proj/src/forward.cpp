#include "chemoctrl/forward.hpp"

#include <algorithm>
#include <cmath>

#include "chemoctrl/finite_volume.hpp"

namespace chemoctrl {

ScalarField step_C(const ScalarField& C_n, const ScalarField& N_n, const ScalarField& f_step, double h,
                   const ModelParams& params) {
  if (!(h > 0.0)) throw std::invalid_argument("step_C: h must be > 0");
  if (!same_grid(C_n.grid(), N_n.grid()) || !same_grid(C_n.grid(), f_step.grid()))
    throw std::invalid_argument("step_C: fields on different grids");
  const Grid2D& g = *C_n.grid();
  const std::size_t n = g.cell_count();

  Vector diag(static_cast<Eigen::Index>(n));
  Vector rhs(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double f = g.in_control(k) ? f_step[k] : 0.0;
    const double fp = std::max(f, 0.0);
    const double fm = std::max(-f, 0.0);
    const auto e = static_cast<Eigen::Index>(k);
    diag[e] = 1.0 / h + params.beta + fm;
    rhs[e] = C_n[k] / h + params.alpha * N_n[k] + fp * C_n[k];
  }
  const SparseMatrix A = sparse_diagonal(diag) + neumann_laplacian(g);
  return to_field(C_n.grid(), sparse_solve(A, rhs, "step_C"));
}

namespace {

double scaled_norm(const Vector& r, double h) { return h * r.lpNorm<Eigen::Infinity>(); }

Vector n_residual(const Grid2D& g, const Vector& N, const Vector& N_old, const Vector& C, double h,
                  const ModelParams& p, const ConstitutiveSet& cs) {
  return (N - N_old) / h + n_flux_divergence(g, N, C, cs, p.eps, p.solver.convection);
}

// One lagged-coefficient sweep: diffusion coefficients and the convective flux
// frozen at the current iterate, the diffusion difference implicit.
Vector fixed_point_sweep(const Grid2D& g, const Vector& N, const Vector& N_old, const Vector& C, double h,
                         const ModelParams& p, const ConstitutiveSet& cs) {
  std::vector<Eigen::Triplet<double>> t;
  Vector rhs = N_old / h;
  const auto n = static_cast<Eigen::Index>(g.cell_count());
  for (Eigen::Index k = 0; k < n; ++k) t.emplace_back(static_cast<int>(k), static_cast<int>(k), 1.0 / h);
  for (const Face& f : interior_faces(g)) {
    const auto l = static_cast<int>(f.left), r = static_cast<int>(f.right);
    const FaceFlux ff = n_face_flux(f, N[l], N[r], C[l], C[r], cs, p.eps, p.solver.convection);
    const double abar = f.weight * (0.5 * (cs.a_ext(N[l]) + cs.a_ext(N[r])) + p.eps);
    t.emplace_back(l, l, abar);
    t.emplace_back(r, r, abar);
    t.emplace_back(l, r, -abar);
    t.emplace_back(r, l, -abar);
    const double conv = f.weight * ff.chi_face * (C[r] - C[l]);
    rhs[l] -= conv;
    rhs[r] += conv;
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return sparse_solve(A, rhs, "step_N fixed point");
}

}  // namespace

std::pair<ScalarField, NonlinearSolveReport> step_N(const ScalarField& N_n, const ScalarField& C_np1, double h,
                                                    const ModelParams& params, const ConstitutiveSet& cs) {
  if (!(h > 0.0)) throw std::invalid_argument("step_N: h must be > 0");
  if (!same_grid(N_n.grid(), C_np1.grid())) throw std::invalid_argument("step_N: fields on different grids");
  const Grid2D& g = *N_n.grid();
  const SolverOptions& opt = params.solver;
  const Vector N_old = to_vector(N_n);
  const Vector C = to_vector(C_np1);
  const SparseMatrix I_h = sparse_identity(g.cell_count(), 1.0 / h);

  NonlinearSolveReport rep;

  // Damped Newton on the residual with regularisation `eps`, from N in place.
  auto newton = [&](Vector& N, double eps) {
    ModelParams p = params;
    p.eps = eps;
    Vector r = n_residual(g, N, N_old, C, h, p, cs);
    double rn = scaled_norm(r, h);
    for (int it = 0; it < opt.newton_max_iter && rn > opt.newton_tol; ++it) {
      const SparseMatrix J = I_h + n_flux_jacobian(g, N, C, cs, eps, opt.convection);
      Vector delta;
      try {
        delta = sparse_solve(J, -r, "step_N Newton");
      } catch (const LinearSolveError&) {
        break;
      }
      bool accepted = false;
      for (double lambda = 1.0; lambda > 1e-9 && !accepted; lambda *= 0.5) {
        Vector trial = N + lambda * delta;
        Vector r_trial = n_residual(g, trial, N_old, C, h, p, cs);
        const double rn_trial = scaled_norm(r_trial, h);
        if (rn_trial < rn) {
          N = std::move(trial);
          r = std::move(r_trial);
          rn = rn_trial;
          accepted = true;
        }
      }
      ++rep.iterations;
      if (!accepted) break;
    }
    return rn;
  };

  Vector N = N_old;
  double rn = newton(N, params.eps);

  // Near a degenerate state (a = 0 on many faces) the Jacobian at N_old can be
  // indefinite. Continue from strongly regularised problems down to eps.
  if (!(rn <= opt.newton_tol)) {
    Vector M = N_old;
    double rm = 0.0;
    for (double e = 1.0; e > params.eps && e >= 1e-8; e *= 0.1) {
      rm = newton(M, e);
      if (!(rm <= opt.newton_tol)) break;
    }
    if (rm <= opt.newton_tol) {
      rm = newton(M, params.eps);
      if (rm < rn) {
        N = M;
        rn = rm;
      }
    }
  }

  if (rn > opt.newton_tol) {
    rep.used_fallback = true;
    Vector M = N_old;
    for (int it = 0; it < opt.fixed_point_max_iter; ++it) {
      try {
        M = fixed_point_sweep(g, M, N_old, C, h, params, cs);
      } catch (const LinearSolveError&) {
        break;
      }
      ++rep.iterations;
      const Vector rm = n_residual(g, M, N_old, C, h, params, cs);
      const double rmn = scaled_norm(rm, h);
      if (rmn < rn) {
        N = M;
        rn = rmn;
      }
      if (rn <= opt.newton_tol) break;
    }
  }

  rep.residual = rn;
  rep.converged = rn <= opt.newton_tol && N.allFinite();
  return {to_field(N_n.grid(), N.allFinite() ? N : N_old), rep};
}

Trajectory run_forward(const ScalarField& N0, const ScalarField& C0, const ControlField& f, const ModelParams& params,
                       const ConstitutiveSet& cs) {
  const ValidationReport vr = validate_params(params, cs, N0, C0);
  if (!vr.ok()) throw std::invalid_argument("run_forward: inadmissible input: " + vr.violations.front());
  if (!same_grid(N0.grid(), f.grid())) throw std::invalid_argument("run_forward: control on a different grid");
  if (f.n_steps() != params.n_steps) throw std::invalid_argument("run_forward: control step count mismatch");

  const double h = params.step();
  Trajectory t;
  t.grid = N0.grid();
  t.params = params;
  t.control = f;
  t.times.reserve(params.n_steps + 1);
  t.N.reserve(params.n_steps + 1);
  t.C.reserve(params.n_steps + 1);
  t.times.push_back(0.0);
  t.N.push_back(N0);
  t.C.push_back(C0);

  for (int n = 0; n < params.n_steps; ++n) {
    ScalarField C_next;
    try {
      C_next = step_C(t.C[n], t.N[n], f.level(n), h, params);
    } catch (const LinearSolveError& e) {
      throw SolverError(n + 1, e.what());
    }
    auto [N_next, rep] = step_N(t.N[n], C_next, h, params, cs);
    if (!rep.converged)
      throw SolverError(n + 1, "N-step did not converge (residual " + std::to_string(rep.residual) + " after " +
                                   std::to_string(rep.iterations) + " iterations)");
    t.times.push_back(params.time(n + 1));
    t.N.push_back(std::move(N_next));
    t.C.push_back(std::move(C_next));
    t.reports.push_back(rep);
  }
  return t;
}

double compute_cost(const Trajectory& traj, const ControlField& f, const TargetSeries& Nd, const TargetSeries& Cd,
                    const ModelParams& params) {
  const int steps = params.n_steps;
  if (traj.levels() != steps + 1) throw std::invalid_argument("compute_cost: trajectory has the wrong number of levels");
  if (f.n_steps() != steps) throw std::invalid_argument("compute_cost: control step count mismatch");
  auto check_targets = [&](const TargetSeries& s, const char* name) {
    if (s.empty()) throw std::invalid_argument(std::string("compute_cost: empty target ") + name);
    if (!s.is_constant() && static_cast<int>(s.size()) < steps)
      throw std::invalid_argument(std::string("compute_cost: target ") + name + " has too few levels");
    if (!same_grid(s.at(0).grid(), traj.grid))
      throw std::invalid_argument(std::string("compute_cost: target ") + name + " on a different grid");
  };
  check_targets(Nd, "Nd");
  check_targets(Cd, "Cd");
  if (!same_grid(f.grid(), traj.grid)) throw std::invalid_argument("compute_cost: control on a different grid");

  const Grid2D& g = *traj.grid;
  double total = 0.0;
  for (int n = 0; n < steps; ++n) {
    const ScalarField& N = traj.N[n];
    const ScalarField& C = traj.C[n];
    const ScalarField& nd = Nd.at(n);
    const ScalarField& cd = Cd.at(n);
    double sN = 0.0, sC = 0.0, sF = 0.0;
    for (std::size_t k = 0; k < g.cell_count(); ++k) {
      sN += (N[k] - nd[k]) * (N[k] - nd[k]);
      sC += (C[k] - cd[k]) * (C[k] - cd[k]);
      if (g.in_control(k)) sF += f(n, k) * f(n, k);
    }
    total += 0.5 * (params.gamma_N * sN + params.gamma_C * sC + params.gamma_f * sF);
  }
  return total * params.step() * g.cell_volume();
}

}  // namespace chemoctrl
