#include "chemoctrl/adjoint.hpp"

#include <algorithm>
#include <cmath>

#include "chemoctrl/finite_volume.hpp"

namespace chemoctrl {

double FaceField::max_abs() const {
  double m = 0.0;
  for (double v : x_faces) m = std::max(m, std::abs(v));
  for (double v : y_faces) m = std::max(m, std::abs(v));
  return m;
}

namespace {

double face_velocity(const Face& f, const Vector& N, const Vector& C, const ConstitutiveSet& cs) {
  const auto l = static_cast<Eigen::Index>(f.left), r = static_cast<Eigen::Index>(f.right);
  const double a_p = 0.5 * (cs.a_prime_ext(N[l]) + cs.a_prime_ext(N[r]));
  const double chi_p = 0.5 * (cs.chi_prime_ext(N[l]) + cs.chi_prime_ext(N[r]));
  return (a_p * (N[r] - N[l]) - chi_p * (C[r] - C[l])) * f.inv_distance;
}

// -div(a_eps grad .) with arithmetic face a_eps, plus upwind V.grad.
SparseMatrix literal_p_operator(const Grid2D& g, const Vector& N, const Vector& C, const ConstitutiveSet& cs,
                                double eps) {
  std::vector<Eigen::Triplet<double>> t;
  for (const Face& f : interior_faces(g)) {
    const auto l = static_cast<int>(f.left), r = static_cast<int>(f.right);
    const double w = f.weight * (0.5 * (cs.a_ext(N[l]) + cs.a_ext(N[r])) + eps);
    t.emplace_back(l, l, w);
    t.emplace_back(r, r, w);
    t.emplace_back(l, r, -w);
    t.emplace_back(r, l, -w);
    const double v = face_velocity(f, N, C, cs);
    // Face is the upstream side of r when v > 0 and of l when v < 0.
    const double vp = std::max(v, 0.0) * f.inv_distance;
    const double vm = std::min(v, 0.0) * f.inv_distance;
    t.emplace_back(r, r, vp);
    t.emplace_back(r, l, -vp);
    t.emplace_back(l, r, vm);
    t.emplace_back(l, l, -vm);
  }
  const auto n = static_cast<Eigen::Index>(g.cell_count());
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

// u -> div_h(chibar grad_h u) with arithmetic face chi.
SparseMatrix literal_chi_divergence(const Grid2D& g, const Vector& N, const ConstitutiveSet& cs) {
  std::vector<Eigen::Triplet<double>> t;
  for (const Face& f : interior_faces(g)) {
    const auto l = static_cast<int>(f.left), r = static_cast<int>(f.right);
    const double w = f.weight * 0.5 * (cs.chi_ext(N[l]) + cs.chi_ext(N[r]));
    t.emplace_back(l, r, w);
    t.emplace_back(l, l, -w);
    t.emplace_back(r, l, w);
    t.emplace_back(r, r, -w);
  }
  const auto n = static_cast<Eigen::Index>(g.cell_count());
  SparseMatrix D(n, n);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

}  // namespace

FaceField velocity_field(const ScalarField& N, const ScalarField& C, const ConstitutiveSet& cs, const Grid2D& grid) {
  if (N.size() != grid.cell_count() || C.size() != grid.cell_count())
    throw std::invalid_argument("velocity_field: fields do not match the grid");
  FaceField V;
  V.grid = N.grid();
  V.x_faces.assign(static_cast<std::size_t>(grid.nx() + 1) * grid.ny(), 0.0);
  V.y_faces.assign(static_cast<std::size_t>(grid.nx()) * (grid.ny() + 1), 0.0);
  const Vector n = to_vector(N), c = to_vector(C);
  for (const Face& f : interior_faces(grid)) {
    const double v = face_velocity(f, n, c, cs);
    const int i = static_cast<int>(f.right % grid.nx());
    const int j = static_cast<int>(f.right / grid.nx());
    if (f.x_direction)
      V.x_faces[static_cast<std::size_t>(j) * (grid.nx() + 1) + i] = v;
    else
      V.y_faces[static_cast<std::size_t>(j) * grid.nx() + i] = v;
  }
  return V;
}

AdjointStepResult step_adjoint_backward(const ScalarField& p_next, const ScalarField& q_next,
                                        const AdjointStepData& d, double h, const ModelParams& params,
                                        const ConstitutiveSet& cs) {
  if (!(h > 0.0)) throw std::invalid_argument("step_adjoint_backward: h must be > 0");
  if (!(params.eps > 0.0)) throw std::invalid_argument("step_adjoint_backward: eps must be > 0");
  const GridPtr& gp = p_next.grid();
  for (const ScalarField* s : {&q_next, &d.N, &d.C, &d.Nd, &d.Cd, &d.f_into, &d.f_out})
    if (!same_grid(gp, s->grid())) throw std::invalid_argument("step_adjoint_backward: fields on different grids");
  const Grid2D& g = *gp;
  const std::size_t n = g.cell_count();
  const auto en = static_cast<Eigen::Index>(n);

  const Vector N = to_vector(d.N), C = to_vector(d.C);
  const Vector p1 = to_vector(p_next), q1 = to_vector(q_next);
  const Vector srcN = params.gamma_N * (N - to_vector(d.Nd));
  const Vector srcC = params.gamma_C * (C - to_vector(d.Cd));
  const SparseMatrix I_h = sparse_identity(n, 1.0 / h);

  AdjointStepResult out;
  if (params.solver.adjoint == AdjointScheme::Consistent) {
    const SparseMatrix JN = n_flux_jacobian(g, N, C, cs, params.eps, params.solver.convection);
    const SparseMatrix Ap = SparseMatrix(I_h + SparseMatrix(JN.transpose()));
    const Vector p = sparse_solve(Ap, p1 / h + params.alpha * q1 + srcN, "adjoint p-step");

    Vector diag(en), q_coef(en);
    for (std::size_t k = 0; k < n; ++k) {
      const bool c = g.in_control(k);
      const auto e = static_cast<Eigen::Index>(k);
      diag[e] = 1.0 / h + params.beta + (c ? std::max(-d.f_into[k], 0.0) : 0.0);
      q_coef[e] = 1.0 / h + (c ? std::max(d.f_out[k], 0.0) : 0.0);
    }
    const SparseMatrix JC = n_flux_c_jacobian(g, N, C, cs, params.solver.convection);
    const SparseMatrix Aq = sparse_diagonal(diag) + neumann_laplacian(g);
    const Vector rhs = q_coef.cwiseProduct(q1) - SparseMatrix(JC.transpose()) * p + srcC;
    const Vector q = sparse_solve(Aq, rhs, "adjoint q-step");
    out.p = to_field(gp, p);
    out.q = to_field(gp, q);
  } else {
    const SparseMatrix Ap = I_h + literal_p_operator(g, N, C, cs, params.eps);
    const Vector p = sparse_solve(Ap, p1 / h + params.alpha * q1 + srcN, "adjoint p-step");

    Vector diag(en);
    for (std::size_t k = 0; k < n; ++k) {
      const double f = g.in_control(k) ? d.f_out[k] : 0.0;
      diag[static_cast<Eigen::Index>(k)] = 1.0 / h + params.beta - f;
      if (f * h >= 1.0 + params.beta * h) out.dominance_lost = true;
    }
    const SparseMatrix Aq = sparse_diagonal(diag) + neumann_laplacian(g);
    const Vector rhs = q1 / h - literal_chi_divergence(g, N, cs) * p + srcC;
    const Vector q = sparse_solve(Aq, rhs, "adjoint q-step");
    out.p = to_field(gp, p);
    out.q = to_field(gp, q);
  }
  return out;
}

AdjointPair run_adjoint(const Trajectory& traj, const ControlField& f, const TargetSeries& Nd, const TargetSeries& Cd,
                        const ModelParams& params, const ConstitutiveSet& cs) {
  if (!(params.eps > 0.0)) throw std::invalid_argument("run_adjoint: eps must be > 0");
  const int steps = params.n_steps;
  if (traj.levels() != steps + 1) throw std::invalid_argument("run_adjoint: incomplete trajectory");
  if (f.n_steps() != steps || !same_grid(f.grid(), traj.grid))
    throw std::invalid_argument("run_adjoint: control does not match the trajectory");
  if (Nd.empty() || Cd.empty()) throw std::invalid_argument("run_adjoint: missing targets");
  if ((!Nd.is_constant() && static_cast<int>(Nd.size()) < steps) ||
      (!Cd.is_constant() && static_cast<int>(Cd.size()) < steps))
    throw std::invalid_argument("run_adjoint: target series too short");

  const double h = params.step();
  AdjointPair adj;
  adj.grid = traj.grid;
  adj.eps = params.eps;
  adj.scheme = params.solver.adjoint;
  adj.p.assign(steps + 1, ScalarField(traj.grid, 0.0));
  adj.q.assign(steps + 1, ScalarField(traj.grid, 0.0));

  std::vector<ScalarField> controls;
  controls.reserve(steps);
  for (int n = 0; n < steps; ++n) controls.push_back(f.level(n));

  for (int n = steps - 1; n >= 0; --n) {
    const AdjointStepData data{traj.N[n], traj.C[n], Nd.at(n), Cd.at(n), controls[n > 0 ? n - 1 : 0], controls[n]};
    try {
      AdjointStepResult r = step_adjoint_backward(adj.p[n + 1], adj.q[n + 1], data, h, params, cs);
      if (r.dominance_lost) adj.dominance_lost.push_back(n);
      adj.p[n] = std::move(r.p);
      adj.q[n] = std::move(r.q);
    } catch (const LinearSolveError& e) {
      throw SolverError(n, e.what());
    }
  }
  return adj;
}

}  // namespace chemoctrl
