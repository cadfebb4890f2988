#pragma once

#include <Eigen/Sparse>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemoctrl/constitutive.hpp"
#include "chemoctrl/grid.hpp"
#include "chemoctrl/params.hpp"

namespace chemoctrl {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

class LinearSolveError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Interior face between cells `left` and `right` (right = left + 1 in x or
/// left + nx in y). `weight` is |face| / (|cell| * distance), i.e. 1/hx^2 or
/// 1/hy^2 on a uniform grid. Boundary faces are absent: they carry no flux.
struct Face {
  std::size_t left;
  std::size_t right;
  double weight;
  double inv_distance;  ///< 1/hx or 1/hy
  bool x_direction;
};

/// All interior faces, x-faces first, in a fixed order.
std::vector<Face> interior_faces(const Grid2D& g);

/// Neumann 5-point Laplacian L with (L u)_i = sum_faces w (u_i - u_j);
/// symmetric positive semidefinite, zero row sums.
SparseMatrix neumann_laplacian(const Grid2D& g);

/// Outward flux of the N-equation through one face, per unit cell volume,
/// together with its partial derivatives.
struct FaceFlux {
  double value;      ///< w [ -abar (N_r - N_l) + G(N_l, N_r; C_r - C_l) ]
  double d_left;     ///< d value / d N_l
  double d_right;    ///< d value / d N_r
  double chi_face;   ///< effective face chi: G = chi_face * (C_r - C_l)
};

FaceFlux n_face_flux(const Face& f, double n_left, double n_right, double c_left, double c_right,
                     const ConstitutiveSet& cs, double eps, ConvectionScheme scheme);

/// F(N; C) = sum of outward face fluxes per cell, the spatial part of the
/// discrete cell-density equation (-div(a_eps grad N) + div(chi grad C)).
Vector n_flux_divergence(const Grid2D& g, const Vector& N, const Vector& C, const ConstitutiveSet& cs, double eps,
                         ConvectionScheme scheme);

/// dF/dN at (N, C).
SparseMatrix n_flux_jacobian(const Grid2D& g, const Vector& N, const Vector& C, const ConstitutiveSet& cs,
                             double eps, ConvectionScheme scheme);

/// dF/dC at (N, C): the operator u -> div_h(chi_face grad_h u) with the
/// effective (upwinded) face chi. Symmetric.
SparseMatrix n_flux_c_jacobian(const Grid2D& g, const Vector& N, const Vector& C, const ConstitutiveSet& cs,
                               ConvectionScheme scheme);

/// Direct sparse solve; throws LinearSolveError on a singular factorisation
/// or a non-finite result.
Vector sparse_solve(const SparseMatrix& A, const Vector& b, const std::string& what);

SparseMatrix sparse_identity(std::size_t n, double scale = 1.0);
SparseMatrix sparse_diagonal(const Vector& d);

inline Vector to_vector(const ScalarField& f) {
  return Eigen::Map<const Vector>(f.values().data(), static_cast<Eigen::Index>(f.size()));
}
inline ScalarField to_field(const GridPtr& g, const Vector& v) {
  return ScalarField(g, std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace chemoctrl
