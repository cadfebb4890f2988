#include "chemoctrl/finite_volume.hpp"

#include <cmath>

namespace chemoctrl {

std::vector<Face> interior_faces(const Grid2D& g) {
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>((g.nx() - 1) * g.ny() + g.nx() * (g.ny() - 1)));
  const double wx = 1.0 / (g.hx() * g.hx());
  const double wy = 1.0 / (g.hy() * g.hy());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i + 1 < g.nx(); ++i) faces.push_back({g.index(i, j), g.index(i + 1, j), wx, 1.0 / g.hx(), true});
  for (int j = 0; j + 1 < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) faces.push_back({g.index(i, j), g.index(i, j + 1), wy, 1.0 / g.hy(), false});
  return faces;
}

SparseMatrix neumann_laplacian(const Grid2D& g) {
  std::vector<Eigen::Triplet<double>> t;
  for (const Face& f : interior_faces(g)) {
    const auto l = static_cast<int>(f.left), r = static_cast<int>(f.right);
    t.emplace_back(l, l, f.weight);
    t.emplace_back(r, r, f.weight);
    t.emplace_back(l, r, -f.weight);
    t.emplace_back(r, l, -f.weight);
  }
  const auto n = static_cast<Eigen::Index>(g.cell_count());
  SparseMatrix L(n, n);
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

FaceFlux n_face_flux(const Face& f, double nl, double nr, double cl, double cr, const ConstitutiveSet& cs,
                     double eps, ConvectionScheme scheme) {
  const double dc = cr - cl;
  const double dn = nr - nl;
  const double abar = 0.5 * (cs.a_ext(nl) + cs.a_ext(nr)) + eps;

  double chi_face, g_l, g_r;
  if (scheme == ConvectionScheme::Upwind) {
    // Monotone split: nondecreasing in the upwind value, nonincreasing in the
    // downwind one, consistent with chi on the diagonal.
    if (dc >= 0.0) {
      chi_face = cs.chi_up_ext(nl) + cs.chi_down_ext(nr);
      g_l = dc * cs.chi_up_prime_ext(nl);
      g_r = dc * cs.chi_down_prime_ext(nr);
    } else {
      chi_face = cs.chi_up_ext(nr) + cs.chi_down_ext(nl);
      g_l = dc * cs.chi_down_prime_ext(nl);
      g_r = dc * cs.chi_up_prime_ext(nr);
    }
  } else {
    chi_face = 0.5 * (cs.chi_ext(nl) + cs.chi_ext(nr));
    g_l = dc * 0.5 * cs.chi_prime_ext(nl);
    g_r = dc * 0.5 * cs.chi_prime_ext(nr);
  }

  FaceFlux out;
  out.value = f.weight * (-abar * dn + chi_face * dc);
  out.d_left = f.weight * (abar - 0.5 * cs.a_prime_ext(nl) * dn + g_l);
  out.d_right = f.weight * (-abar - 0.5 * cs.a_prime_ext(nr) * dn + g_r);
  out.chi_face = chi_face;
  return out;
}

Vector n_flux_divergence(const Grid2D& g, const Vector& N, const Vector& C, const ConstitutiveSet& cs, double eps,
                         ConvectionScheme scheme) {
  Vector F = Vector::Zero(static_cast<Eigen::Index>(g.cell_count()));
  for (const Face& f : interior_faces(g)) {
    const auto l = static_cast<Eigen::Index>(f.left), r = static_cast<Eigen::Index>(f.right);
    const double phi = n_face_flux(f, N[l], N[r], C[l], C[r], cs, eps, scheme).value;
    F[l] += phi;
    F[r] -= phi;
  }
  return F;
}

SparseMatrix n_flux_jacobian(const Grid2D& g, const Vector& N, const Vector& C, const ConstitutiveSet& cs,
                             double eps, ConvectionScheme scheme) {
  std::vector<Eigen::Triplet<double>> t;
  for (const Face& f : interior_faces(g)) {
    const auto l = static_cast<int>(f.left), r = static_cast<int>(f.right);
    const FaceFlux ff = n_face_flux(f, N[l], N[r], C[l], C[r], cs, eps, scheme);
    t.emplace_back(l, l, ff.d_left);
    t.emplace_back(l, r, ff.d_right);
    t.emplace_back(r, l, -ff.d_left);
    t.emplace_back(r, r, -ff.d_right);
  }
  const auto n = static_cast<Eigen::Index>(g.cell_count());
  SparseMatrix J(n, n);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

SparseMatrix n_flux_c_jacobian(const Grid2D& g, const Vector& N, const Vector& C, const ConstitutiveSet& cs,
                               ConvectionScheme scheme) {
  std::vector<Eigen::Triplet<double>> t;
  for (const Face& f : interior_faces(g)) {
    const auto l = static_cast<int>(f.left), r = static_cast<int>(f.right);
    const double w = f.weight * n_face_flux(f, N[l], N[r], C[l], C[r], cs, 0.0, scheme).chi_face;
    // value = w (C_r - C_l), added to F_l and subtracted from F_r.
    t.emplace_back(l, r, w);
    t.emplace_back(l, l, -w);
    t.emplace_back(r, r, -w);
    t.emplace_back(r, l, w);
  }
  const auto n = static_cast<Eigen::Index>(g.cell_count());
  SparseMatrix J(n, n);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

Vector sparse_solve(const SparseMatrix& A, const Vector& b, const std::string& what) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw LinearSolveError(what + ": factorisation failed (" + lu.lastErrorMessage() + ")");
  Vector x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw LinearSolveError(what + ": solve failed");
  return x;
}

SparseMatrix sparse_identity(std::size_t n, double scale) {
  SparseMatrix I(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  I.setIdentity();
  return I * scale;
}

SparseMatrix sparse_diagonal(const Vector& d) {
  SparseMatrix D(d.size(), d.size());
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index k = 0; k < d.size(); ++k) t.emplace_back(static_cast<int>(k), static_cast<int>(k), d[k]);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

}  // namespace chemoctrl
