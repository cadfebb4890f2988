#pragma once

#include <functional>
#include <optional>
#include <string>

namespace chemoctrl {

enum class ConstitutiveKind { Logistic, Quartic };

std::string to_string(ConstitutiveKind kind);
ConstitutiveKind constitutive_kind_from_string(const std::string& name);

/// Diffusion a, chemotactic sensitivity chi and everything derived from them.
///
/// Functions are defined on [0,1]. `chi_up` and `chi_down` are the
/// nondecreasing and nonincreasing parts of chi (chi = chi_up + chi_down,
/// chi_up(0) = chi_down(0) = 0); the upwind convective flux is built on them.
/// `A` is the primitive of `a` and must be supplied in closed form.
struct ConstitutiveSet {
  std::string name;
  std::function<double(double)> a;
  std::function<double(double)> a_prime;
  std::function<double(double)> A;
  std::function<double(double)> chi;
  std::function<double(double)> chi_prime;
  std::function<double(double)> chi_up;
  std::function<double(double)> chi_down;
  std::function<double(double)> mu;
  /// Smallest known kappa with a' <= kappa a on (0,1); empty means none exists.
  std::optional<double> kappa_bound;

  // Evaluation off [0,1]: a and chi are extended by zero, chi_up/chi_down by
  // their endpoint values. Iterates of the nonlinear solver may leave [0,1] by
  // round-off and the zero extension keeps the flux monotone there.
  double a_ext(double s) const;
  double a_prime_ext(double s) const;
  double chi_ext(double s) const;
  double chi_prime_ext(double s) const;
  double chi_up_ext(double s) const;
  double chi_down_ext(double s) const;
  double chi_up_prime_ext(double s) const;
  double chi_down_prime_ext(double s) const;
};

/// a(s) = chi(s) = s(1-s); mu = 1.
ConstitutiveSet make_logistic_constitutive();

/// a(s) = s^2(1-s)^2, chi(s) = s(1-s); mu = 1/(s(1-s)) is nonconstant.
ConstitutiveSet make_quartic_constitutive();

ConstitutiveSet make_constitutive(ConstitutiveKind kind);

/// Bound on C from the discrete maximum principle:
/// c0_max e^{f_inf T} + alpha T (1 + e^{f_inf T}).
double m_bound(double c0_max, double f_inf, double alpha, double T);

struct K0Estimate {
  double value = 0.0;
  bool infinite = false;
};

/// Sup over a uniform n_samples x n_samples grid of pairs in [0,1]^2 of
/// (chi(N1)-chi(N2))^2 / ((N1-N2)(A(N1)-A(N2))). Pairs with N1 == N2, or with
/// a vanishing denominator and vanishing numerator, are skipped; a positive
/// numerator over a zero denominator, or a ratio above `cap`, flags infinite.
K0Estimate estimate_K0(const ConstitutiveSet& cs, int n_samples, double cap = 1e12);

}  // namespace chemoctrl
