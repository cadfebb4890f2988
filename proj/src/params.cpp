#include "chemoctrl/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace chemoctrl {

std::string to_string(ConvectionScheme s) { return s == ConvectionScheme::Upwind ? "upwind" : "centered"; }
std::string to_string(AdjointScheme s) { return s == AdjointScheme::Consistent ? "consistent" : "literal"; }

ConvectionScheme convection_scheme_from_string(const std::string& s) {
  if (s == "upwind") return ConvectionScheme::Upwind;
  if (s == "centered") return ConvectionScheme::Centered;
  throw std::invalid_argument("unknown convection scheme '" + s + "'");
}

AdjointScheme adjoint_scheme_from_string(const std::string& s) {
  if (s == "consistent") return AdjointScheme::Consistent;
  if (s == "literal") return AdjointScheme::Literal;
  throw std::invalid_argument("unknown adjoint scheme '" + s + "'");
}

bool ValidationReport::mentions(const std::string& needle) const {
  for (const auto& v : violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

namespace {

std::string where(const ScalarField& f, std::size_t k) {
  const auto& g = *f.grid();
  std::ostringstream os;
  os << " at cell (" << k % g.nx() << "," << k / g.nx() << ") value " << f[k];
  return os.str();
}

void check_constitutive(const ConstitutiveSet& cs, const ValidationOptions& opts, ValidationReport& r) {
  auto bad = [&](const std::string& msg) { r.violations.push_back(msg); };
  if (std::abs(cs.a(0.0)) > opts.tol) bad("a(0) != 0");
  if (std::abs(cs.a(1.0)) > opts.tol) bad("a(1) != 0");
  if (std::abs(cs.chi(0.0)) > opts.tol) bad("chi(0) != 0");
  if (std::abs(cs.chi(1.0)) > opts.tol) bad("chi(1) != 0");
  if (std::abs(cs.A(0.0)) > opts.tol) bad("A(0) != 0");
  const int n = std::max(opts.interior_samples, 2);
  double prev_A = cs.A(0.0);
  bool a_pos = true, A_mono = true, split_ok = true;
  for (int k = 1; k <= n; ++k) {
    const double s = static_cast<double>(k) / (n + 1);
    if (!(cs.a(s) > 0.0)) a_pos = false;
    const double As = cs.A(s);
    if (As < prev_A - opts.tol) A_mono = false;
    prev_A = As;
    if (std::abs(cs.chi_up(s) + cs.chi_down(s) - cs.chi(s)) > 1e-10) split_ok = false;
  }
  if (cs.A(1.0) < prev_A - opts.tol) A_mono = false;
  if (!a_pos) bad("a not positive on (0,1)");
  if (!A_mono) bad("A not nondecreasing on [0,1]");
  if (!split_ok) bad("chi_up + chi_down != chi");
}

}  // namespace

ValidationReport validate_params(const ModelParams& p, const ConstitutiveSet& cs, const ScalarField& N0,
                                 const ScalarField& C0, const ValidationOptions& opts) {
  ValidationReport r;
  auto bad = [&](const std::string& msg) { r.violations.push_back(msg); };
  if (!(p.alpha >= 0.0)) bad("alpha must be >= 0");
  if (!(p.beta >= 0.0)) bad("beta must be >= 0");
  if (!(p.eps >= 0.0)) bad("eps must be >= 0");
  if (!(p.T > 0.0)) bad("T must be > 0");
  if (p.n_steps < 1) bad("n_steps must be >= 1");
  if (!(p.gamma_N >= 0.0)) bad("gamma_N must be >= 0");
  if (!(p.gamma_C >= 0.0)) bad("gamma_C must be >= 0");
  if (!(p.gamma_f >= 0.0)) bad("gamma_f must be >= 0");

  if (!same_grid(N0.grid(), C0.grid())) {
    bad("N0 and C0 live on different grids");
  } else {
    for (std::size_t k = 0; k < N0.size(); ++k) {
      if (!(N0[k] >= 0.0 && N0[k] <= 1.0)) {
        bad("N0 out of [0,1]" + where(N0, k));
        break;
      }
    }
    for (std::size_t k = 0; k < C0.size(); ++k) {
      if (!(C0[k] >= 0.0)) {
        bad("C0 negative" + where(C0, k));
        break;
      }
    }
  }
  check_constitutive(cs, opts, r);
  return r;
}

}  // namespace chemoctrl
