#include <doctest.h>

#include <cmath>

#include "chemoctrl/adjoint.hpp"
#include "chemoctrl/forward.hpp"
#include "chemoctrl/optimizer.hpp"
#include "oracles.hpp"

using namespace chemoctrl;

namespace {

GridPtr controlled_grid(int n) {
  Grid2D g(n, n);
  g.add_control_rect(0.25, 0.75, 0.25, 0.75);
  return make_grid(g);
}

ScalarField random_field(const GridPtr& g, double lo, double hi, std::uint64_t seed) {
  return ScalarField(g, oracle::random_values(g->cell_count(), lo, hi, seed));
}

ControlField random_control(const GridPtr& g, int steps, double lo, double hi, std::uint64_t seed) {
  ControlField f(g, steps, lo, hi, 0.0);
  f.data() = oracle::random_values(f.data().size(), lo, hi, seed);
  f.restrict_to_support();
  return f;
}

ControlProblem make_problem(const GridPtr& g, ModelParams p, std::uint64_t seed) {
  return ControlProblem{random_field(g, 0.1, 0.9, seed), random_field(g, 0.0, 2.0, seed + 1), p,
                        make_logistic_constitutive(), TargetSeries(random_field(g, 0.0, 1.0, seed + 2)),
                        TargetSeries(random_field(g, 0.0, 1.0, seed + 3))};
}

double logistic_prime(double s) { return (s < 0.0 || s > 1.0) ? 0.0 : 1.0 - 2.0 * s; }

}  // namespace

TEST_CASE("velocity_field examples") {
  const ConstitutiveSet cs = make_logistic_constitutive();
  SUBCASE("constant N and C give zero") {
    auto g = make_grid(Grid2D(5, 3));
    CHECK(velocity_field(ScalarField(g, 0.3), ScalarField(g, 2.0), cs, *g).max_abs() == 0.0);
  }
  SUBCASE("N = 1/2 kills both derivatives") {
    auto g = make_grid(Grid2D(4, 4));
    CHECK(velocity_field(ScalarField(g, 0.5), random_field(g, 0, 3, 1), cs, *g).max_abs() == 0.0);
  }
  SUBCASE("linear profile on four cells") {
    auto g = make_grid(Grid2D(4, 1));
    const ScalarField N = ScalarField::from_function(g, [](double x, double) { return x; });
    const FaceField V = velocity_field(N, ScalarField(g, 0.0), cs, *g);
    CHECK(V.x_face(0, 0) == 0.0);
    CHECK(V.x_face(1, 0) == doctest::Approx(0.5));
    CHECK(std::abs(V.x_face(2, 0)) < 1e-14);
    CHECK(V.x_face(3, 0) == doctest::Approx(-0.5));
    CHECK(V.x_face(4, 0) == 0.0);
    CHECK(V.y_faces.size() == 8);
    for (double v : V.y_faces) CHECK(v == 0.0);
  }
}

TEST_CASE("adjoint of a single cell") {
  Grid2D g0(1, 1);
  g0.add_control_rect(0, 1, 0, 1);
  auto g = make_grid(g0);
  ModelParams p;
  p.n_steps = 1;
  p.eps = 1e-2;
  p.gamma_C = 0.0;
  const ConstitutiveSet cs = make_logistic_constitutive();
  const ControlField f(g, 1, -1, 1, 0.0);
  const Trajectory t = run_forward(ScalarField(g, 0.5), ScalarField(g, 1.0), f, p, cs);
  const AdjointPair a = run_adjoint(t, f, TargetSeries(ScalarField(g, 0.0)), TargetSeries(ScalarField(g, 0.0)), p, cs);
  CHECK(a.p[0][0] == doctest::Approx(0.5));
  CHECK(a.q[0][0] == 0.0);
  CHECK(a.p[1][0] == 0.0);
  CHECK(a.q[1][0] == 0.0);
}

TEST_CASE("consistent adjoint step equals the transposed complex-step linearisation") {
  auto g = controlled_grid(4);
  const ConstitutiveSet cs = make_logistic_constitutive();
  ModelParams p;
  p.eps = 1e-2;
  p.alpha = 0.8;
  p.beta = 0.6;
  p.gamma_N = 1.3;
  p.gamma_C = 0.7;
  const double h = 0.1;
  for (std::uint64_t seed = 31; seed <= 34; ++seed) {
    const ScalarField N = random_field(g, 0.05, 0.95, seed), C = random_field(g, 0.0, 2.0, seed + 1);
    const ScalarField Nd = random_field(g, 0.0, 1.0, seed + 2), Cd = random_field(g, 0.0, 1.0, seed + 3);
    const ScalarField p1 = random_field(g, -1.0, 1.0, seed + 4), q1 = random_field(g, -1.0, 1.0, seed + 5);
    const ScalarField f_in = random_field(g, -2.0, 2.0, seed + 6), f_out = random_field(g, -2.0, 2.0, seed + 7);
    const AdjointStepData d{N, C, Nd, Cd, f_in, f_out};
    const AdjointStepResult got = step_adjoint_backward(p1, q1, d, h, p, cs);

    const std::size_t n = g->cell_count();
    const auto JN = oracle::residual_jacobian(*g, N.vector(), C.vector(), h, p.eps, true);
    const auto JC = oracle::residual_jacobian(*g, N.vector(), C.vector(), h, p.eps, false);
    oracle::Dense JNt = oracle::zeros(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) JNt[r][c] = JN[c][r];
    std::vector<double> b(n);
    for (std::size_t k = 0; k < n; ++k) b[k] = p1[k] / h + p.alpha * q1[k] + p.gamma_N * (N[k] - Nd[k]);
    const auto p0 = oracle::solve(JNt, b);
    CHECK(oracle::max_diff(got.p.vector(), p0) <= 1e-12 * std::max(1.0, oracle::max_abs(p0)));

    oracle::Dense Aq = oracle::laplacian(*g);
    const auto JCtp = oracle::matvec_transposed(JC, p0);
    for (std::size_t k = 0; k < n; ++k) {
      const double fi = g->in_control(k) ? f_in[k] : 0.0, fo = g->in_control(k) ? f_out[k] : 0.0;
      Aq[k][k] += 1.0 / h + p.beta + std::max(-fi, 0.0);
      b[k] = (1.0 / h + std::max(fo, 0.0)) * q1[k] - JCtp[k] + p.gamma_C * (C[k] - Cd[k]);
    }
    const auto q0 = oracle::solve(Aq, b);
    CHECK(oracle::max_diff(got.q.vector(), q0) <= 1e-12 * std::max(1.0, oracle::max_abs(q0)));
    CHECK_FALSE(got.dominance_lost);
  }
}

TEST_CASE("literal adjoint step matches a cell-loop assembly") {
  auto g = controlled_grid(4);
  const ConstitutiveSet cs = make_logistic_constitutive();
  ModelParams p;
  p.eps = 1e-2;
  p.solver.adjoint = AdjointScheme::Literal;
  const double h = 0.1;
  const int nx = g->nx(), ny = g->ny();
  const std::size_t n = g->cell_count();
  for (std::uint64_t seed = 41; seed <= 43; ++seed) {
    const ScalarField N = random_field(g, 0.05, 0.95, seed), C = random_field(g, 0.0, 2.0, seed + 1);
    const ScalarField Nd(g, 0.2), Cd(g, 0.1);
    const ScalarField p1 = random_field(g, -1.0, 1.0, seed + 4), q1 = random_field(g, -1.0, 1.0, seed + 5);
    const ScalarField f_in(g, 0.0), f_out = random_field(g, -2.0, 2.0, seed + 7);
    const AdjointStepResult got = step_adjoint_backward(p1, q1, AdjointStepData{N, C, Nd, Cd, f_in, f_out}, h, p, cs);

    oracle::Dense Ap = oracle::zeros(n), D = oracle::zeros(n);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = g->index(i, j);
        Ap[k][k] += 1.0 / h;
        const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
        for (int s = 0; s < 4; ++s) {
          const int ii = i + di[s], jj = j + dj[s];
          if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
          const std::size_t o = g->index(ii, jj);
          const double dist = s < 2 ? g->hx() : g->hy();
          const double w = 1.0 / (dist * dist);
          const double abar = 0.5 * (cs.a(N[k]) + cs.a(N[o])) + p.eps;
          Ap[k][k] += w * abar;
          Ap[k][o] -= w * abar;
          const double chibar = 0.5 * (cs.chi(N[k]) + cs.chi(N[o]));
          D[k][o] += w * chibar;
          D[k][k] -= w * chibar;
          // Velocity from the lower-index cell toward the higher one.
          const bool k_low = (s == 1 || s == 3);
          const std::size_t lo = k_low ? k : o, hi = k_low ? o : k;
          const double v = (0.5 * (logistic_prime(N[lo]) + logistic_prime(N[hi])) * (N[hi] - N[lo]) -
                            0.5 * (logistic_prime(N[lo]) + logistic_prime(N[hi])) * (C[hi] - C[lo])) /
                           dist;
          // Inflow through this face: upwind difference toward the neighbour.
          if (!k_low && v > 0.0) {
            Ap[k][k] += v / dist;
            Ap[k][o] -= v / dist;
          }
          if (k_low && v < 0.0) {
            Ap[k][o] += v / dist;
            Ap[k][k] -= v / dist;
          }
        }
      }
    std::vector<double> b(n);
    for (std::size_t k = 0; k < n; ++k) b[k] = p1[k] / h + p.alpha * q1[k] + p.gamma_N * (N[k] - Nd[k]);
    const auto p0 = oracle::solve(Ap, b);
    CHECK(oracle::max_diff(got.p.vector(), p0) <= 1e-12 * std::max(1.0, oracle::max_abs(p0)));

    oracle::Dense Aq = oracle::laplacian(*g);
    const auto Dp = oracle::matvec(D, p0);
    for (std::size_t k = 0; k < n; ++k) {
      const double fo = g->in_control(k) ? f_out[k] : 0.0;
      Aq[k][k] += 1.0 / h + p.beta - fo;
      b[k] = q1[k] / h - Dp[k] + p.gamma_C * (C[k] - Cd[k]);
    }
    const auto q0 = oracle::solve(Aq, b);
    CHECK(oracle::max_diff(got.q.vector(), q0) <= 1e-12 * std::max(1.0, oracle::max_abs(q0)));
  }
}

TEST_CASE("literal scheme flags lost diagonal dominance") {
  Grid2D g0(2, 2);
  g0.add_control_rect(0, 1, 0, 1);
  auto g = make_grid(g0);
  ModelParams p;
  p.eps = 1e-2;
  p.beta = 0.0;
  p.solver.adjoint = AdjointScheme::Literal;
  const ScalarField z(g, 0.0);
  const AdjointStepResult r =
      step_adjoint_backward(z, z, AdjointStepData{ScalarField(g, 0.5), z, z, z, z, ScalarField(g, 20.0)}, 0.1, p,
                            make_logistic_constitutive());
  CHECK(r.dominance_lost);
}

TEST_CASE("run_adjoint: terminal condition, perfect tracking, linearity") {
  auto g = controlled_grid(6);
  ModelParams p;
  p.eps = 1e-2;
  p.n_steps = 8;
  const ControlProblem prob = make_problem(g, p, 5);
  const ControlField f = random_control(g, 8, -1.0, 1.0, 9);
  const Trajectory t = run_forward(prob.N0, prob.C0, f, p, prob.cs);

  for (AdjointScheme scheme : {AdjointScheme::Consistent, AdjointScheme::Literal}) {
    ModelParams q = p;
    q.solver.adjoint = scheme;
    const AdjointPair a = run_adjoint(t, f, prob.Nd, prob.Cd, q, prob.cs);
    CHECK(a.levels() == 9);
    CHECK(a.scheme == scheme);
    CHECK(a.p[8].max_abs() == 0.0);
    CHECK(a.q[8].max_abs() == 0.0);
    CHECK(a.p[0].max_abs() > 0.0);

    const AdjointPair zero =
        run_adjoint(t, f, TargetSeries::from_trajectory_N(t), TargetSeries::from_trajectory_C(t), q, prob.cs);
    for (int n = 0; n <= 8; ++n) {
      CHECK(zero.p[n].max_abs() == 0.0);
      CHECK(zero.q[n].max_abs() == 0.0);
    }

    ModelParams twice = q;
    twice.gamma_N *= 2.0;
    twice.gamma_C *= 2.0;
    const AdjointPair b = run_adjoint(t, f, prob.Nd, prob.Cd, twice, prob.cs);
    for (int n = 0; n <= 8; ++n) {
      for (std::size_t k = 0; k < g->cell_count(); ++k) {
        CHECK(std::abs(b.p[n][k] - 2.0 * a.p[n][k]) <= 1e-12 * std::max(1.0, std::abs(a.p[n][k])));
        CHECK(std::abs(b.q[n][k] - 2.0 * a.q[n][k]) <= 1e-12 * std::max(1.0, std::abs(a.q[n][k])));
      }
    }
  }
}

TEST_CASE("run_adjoint: rejects eps <= 0 and mismatched inputs") {
  auto g = controlled_grid(4);
  ModelParams p;
  p.n_steps = 3;
  p.eps = 0.0;
  const ConstitutiveSet cs = make_logistic_constitutive();
  const ControlField f(g, 3, -1, 1);
  const Trajectory t = run_forward(ScalarField(g, 0.5), ScalarField(g, 0.0), f, p, cs);
  const TargetSeries z(ScalarField(g, 0.0));
  CHECK_THROWS_AS(run_adjoint(t, f, z, z, p, cs), std::invalid_argument);
  p.eps = -1.0;
  CHECK_THROWS_AS(run_adjoint(t, f, z, z, p, cs), std::invalid_argument);
  p.eps = 1e-2;
  CHECK_THROWS_AS(run_adjoint(t, ControlField(g, 4, -1, 1), z, z, p, cs), std::invalid_argument);
  CHECK_THROWS_AS(run_adjoint(t, f, TargetSeries(), z, p, cs), std::invalid_argument);
}

TEST_CASE("directional derivative duality") {
  auto g = controlled_grid(6);
  ModelParams p;
  p.eps = 1e-2;
  p.n_steps = 10;
  p.gamma_f = 1e-2;
  const ControlProblem prob = make_problem(g, p, 17);
  const ControlField f = random_control(g, 10, -1.0, 1.0, 18);
  const ControlField d = random_control(g, 10, -1.0, 1.0, 19);
  const auto ge = prob.gradient(f);
  const double dd = weighted_dot(ge.g, d, p.step());
  const double s = 1e-5;
  ControlField fp = f, fm = f;
  for (std::size_t k = 0; k < f.data().size(); ++k) {
    fp.data()[k] += s * d.data()[k];
    fm.data()[k] -= s * d.data()[k];
  }
  const double fd = (prob.cost(fp) - prob.cost(fm)) / (2 * s);
  CHECK(std::abs(fd - dd) <= 1e-6 * std::max(1.0, std::abs(dd)));
}

TEST_CASE("literal adjoint converges at first order in time") {
  auto g = controlled_grid(6);
  const ConstitutiveSet cs = make_logistic_constitutive();
  const ScalarField N0 = ScalarField::from_function(
      g, [](double x, double y) { return 0.5 + 0.3 * std::cos(M_PI * x) * std::cos(M_PI * y); });
  const ScalarField C0(g, 1.0);
  auto p_at_zero = [&](int steps, AdjointScheme scheme) {
    ModelParams p;
    p.eps = 1e-2;
    p.n_steps = steps;
    p.solver.adjoint = scheme;
    ControlField f(g, steps, -1, 1, 0.0);
    for (int n = 0; n < steps; ++n)
      for (std::size_t k = 0; k < g->cell_count(); ++k)
        if (g->in_control(k)) f(n, k) = 0.5 * std::sin(M_PI * p.time(n));
    const Trajectory t = run_forward(N0, C0, f, p, cs);
    return run_adjoint(t, f, TargetSeries(ScalarField(g, 0.3)), TargetSeries(ScalarField(g, 0.2)), p, cs).p[0];
  };
  for (AdjointScheme scheme : {AdjointScheme::Literal, AdjointScheme::Consistent}) {
    const ScalarField a = p_at_zero(10, scheme), b = p_at_zero(20, scheme), c = p_at_zero(40, scheme);
    const double order = std::log2(max_abs_diff(a, b) / max_abs_diff(b, c));
    CHECK(order > 0.8);
    CHECK(order < 1.5);
  }
}
