#include "chemoctrl/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace chemoctrl {

std::string to_string(ConstitutiveKind kind) {
  switch (kind) {
    case ConstitutiveKind::Logistic: return "logistic";
    case ConstitutiveKind::Quartic: return "quartic";
  }
  return "unknown";
}

ConstitutiveKind constitutive_kind_from_string(const std::string& name) {
  if (name == "logistic") return ConstitutiveKind::Logistic;
  if (name == "quartic") return ConstitutiveKind::Quartic;
  throw std::invalid_argument("unknown constitutive set '" + name + "'");
}

namespace {
bool inside(double s) { return s >= 0.0 && s <= 1.0; }
double clamp01(double s) { return std::clamp(s, 0.0, 1.0); }

// chi(s) = s(1-s) increases on [0,1/2] and decreases on [1/2,1].
double logistic_chi_up(double s) { return s <= 0.5 ? s * (1.0 - s) : 0.25; }
double logistic_chi_down(double s) { return s <= 0.5 ? 0.0 : s * (1.0 - s) - 0.25; }
}  // namespace

double ConstitutiveSet::a_ext(double s) const { return inside(s) ? a(s) : 0.0; }
double ConstitutiveSet::a_prime_ext(double s) const { return inside(s) ? a_prime(s) : 0.0; }
double ConstitutiveSet::chi_ext(double s) const { return inside(s) ? chi(s) : 0.0; }
double ConstitutiveSet::chi_prime_ext(double s) const { return inside(s) ? chi_prime(s) : 0.0; }
double ConstitutiveSet::chi_up_ext(double s) const { return chi_up(clamp01(s)); }
double ConstitutiveSet::chi_down_ext(double s) const { return chi_down(clamp01(s)); }
double ConstitutiveSet::chi_up_prime_ext(double s) const {
  return inside(s) ? std::max(chi_prime(s), 0.0) : 0.0;
}
double ConstitutiveSet::chi_down_prime_ext(double s) const {
  return inside(s) ? std::min(chi_prime(s), 0.0) : 0.0;
}

ConstitutiveSet make_logistic_constitutive() {
  ConstitutiveSet cs;
  cs.name = "logistic";
  cs.a = [](double s) { return s * (1.0 - s); };
  cs.a_prime = [](double s) { return 1.0 - 2.0 * s; };
  cs.A = [](double s) { return s * s / 2.0 - s * s * s / 3.0; };
  cs.chi = [](double s) { return s * (1.0 - s); };
  cs.chi_prime = [](double s) { return 1.0 - 2.0 * s; };
  cs.chi_up = logistic_chi_up;
  cs.chi_down = logistic_chi_down;
  cs.mu = [](double) { return 1.0; };
  // a'/a = (1-2s)/(s(1-s)) is unbounded at both ends.
  cs.kappa_bound = std::nullopt;
  return cs;
}

ConstitutiveSet make_quartic_constitutive() {
  ConstitutiveSet cs;
  cs.name = "quartic";
  cs.a = [](double s) { return s * s * (1.0 - s) * (1.0 - s); };
  cs.a_prime = [](double s) { return 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s); };
  cs.A = [](double s) { return s * s * s / 3.0 - s * s * s * s / 2.0 + s * s * s * s * s / 5.0; };
  cs.chi = [](double s) { return s * (1.0 - s); };
  cs.chi_prime = [](double s) { return 1.0 - 2.0 * s; };
  cs.chi_up = logistic_chi_up;
  cs.chi_down = logistic_chi_down;
  cs.mu = [](double s) {
    const double d = s * (1.0 - s);
    return d > 0.0 ? 1.0 / d : std::numeric_limits<double>::infinity();
  };
  cs.kappa_bound = std::nullopt;
  return cs;
}

ConstitutiveSet make_constitutive(ConstitutiveKind kind) {
  switch (kind) {
    case ConstitutiveKind::Logistic: return make_logistic_constitutive();
    case ConstitutiveKind::Quartic: return make_quartic_constitutive();
  }
  throw std::invalid_argument("unknown constitutive kind");
}

double m_bound(double c0_max, double f_inf, double alpha, double T) {
  const double growth = std::exp(f_inf * T);
  return c0_max * growth + alpha * T * (1.0 + growth);
}

K0Estimate estimate_K0(const ConstitutiveSet& cs, int n_samples, double cap) {
  if (n_samples < 2) throw std::invalid_argument("estimate_K0: n_samples must be >= 2");
  std::vector<double> s(n_samples), chi(n_samples), A(n_samples);
  for (int k = 0; k < n_samples; ++k) {
    s[k] = static_cast<double>(k) / (n_samples - 1);
    chi[k] = cs.chi(s[k]);
    A[k] = cs.A(s[k]);
  }
  K0Estimate est;
  for (int k = 0; k < n_samples; ++k) {
    for (int l = k + 1; l < n_samples; ++l) {
      const double num = (chi[l] - chi[k]) * (chi[l] - chi[k]);
      const double den = (s[l] - s[k]) * (A[l] - A[k]);
      if (den <= 0.0) {
        if (num > 0.0) {
          est.infinite = true;
          est.value = std::numeric_limits<double>::infinity();
          return est;
        }
        continue;
      }
      const double ratio = num / den;
      if (ratio > cap) {
        est.infinite = true;
        est.value = std::numeric_limits<double>::infinity();
        return est;
      }
      est.value = std::max(est.value, ratio);
    }
  }
  return est;
}

}  // namespace chemoctrl
