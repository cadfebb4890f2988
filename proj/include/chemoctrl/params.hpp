#pragma once

#include <string>
#include <vector>

#include "chemoctrl/constitutive.hpp"
#include "chemoctrl/grid.hpp"

namespace chemoctrl {

enum class ConvectionScheme {
  Upwind,   ///< monotone upwind split of chi by the sign of the face C-difference
  Centered  ///< mean of chi over the face; for scheme studies only, bounds not guaranteed
};

enum class AdjointScheme {
  Consistent,  ///< dual operators built from the forward flux linearisation
  Literal      ///< upwind V.grad(p) on face velocities, implicit -f q
};

std::string to_string(ConvectionScheme s);
std::string to_string(AdjointScheme s);
ConvectionScheme convection_scheme_from_string(const std::string& s);
AdjointScheme adjoint_scheme_from_string(const std::string& s);

struct SolverOptions {
  ConvectionScheme convection = ConvectionScheme::Upwind;
  AdjointScheme adjoint = AdjointScheme::Consistent;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  int fixed_point_max_iter = 20;

  bool operator==(const SolverOptions&) const = default;
};

struct ModelParams {
  double alpha = 1.0;
  double beta = 1.0;
  double eps = 0.0;
  double T = 1.0;
  int n_steps = 10;
  double gamma_N = 1.0;
  double gamma_C = 1.0;
  double gamma_f = 0.0;
  ConstitutiveKind constitutive = ConstitutiveKind::Logistic;
  SolverOptions solver;

  double step() const { return T / n_steps; }
  double time(int n) const { return n * (T / n_steps); }

  bool operator==(const ModelParams&) const = default;
};

/// Violations of the admissibility hypotheses; empty means admissible.
struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  bool mentions(const std::string& needle) const;
};

struct ValidationOptions {
  int interior_samples = 64;
  double tol = 1e-12;
};

ValidationReport validate_params(const ModelParams& p, const ConstitutiveSet& cs, const ScalarField& N0,
                                 const ScalarField& C0, const ValidationOptions& opts = {});

}  // namespace chemoctrl
