#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace chemoctrl {

/// Uniform cell-centred grid on [0,lx]x[0,ly] with a control sub-domain mask.
///
/// Cells are stored row-major: index = j*nx + i with i along x. Boundaries are
/// homogeneous Neumann, i.e. boundary faces carry zero flux.
class Grid2D {
public:
  Grid2D(int nx, int ny, double lx = 1.0, double ly = 1.0);
  Grid2D(int nx, int ny, double lx, double ly, std::vector<std::uint8_t> control_mask);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return lx_ / nx_; }
  double hy() const { return ly_ / ny_; }
  double cell_volume() const { return hx() * hy(); }
  double area() const { return lx_ * ly_; }
  std::size_t cell_count() const { return static_cast<std::size_t>(nx_) * ny_; }

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  double x_center(int i) const { return (i + 0.5) * hx(); }
  double y_center(int j) const { return (j + 0.5) * hy(); }

  bool in_control(std::size_t cell) const { return control_mask_[cell] != 0; }
  const std::vector<std::uint8_t>& control_mask() const { return control_mask_; }
  std::size_t control_cell_count() const;

  /// Marks every cell whose centre lies in [x0,x1]x[y0,y1].
  void add_control_rect(double x0, double x1, double y0, double y1);
  void set_control_mask(std::vector<std::uint8_t> mask);

  bool operator==(const Grid2D&) const = default;

private:
  int nx_;
  int ny_;
  double lx_;
  double ly_;
  std::vector<std::uint8_t> control_mask_;
};

using GridPtr = std::shared_ptr<const Grid2D>;

inline GridPtr make_grid(Grid2D g) { return std::make_shared<const Grid2D>(std::move(g)); }

/// Grids are shared by pointer; two fields are compatible when their grids
/// describe the same cells, not only when they are the same object.
bool same_grid(const GridPtr& a, const GridPtr& b);

/// One real per cell (N, C, p, q, targets or one control level).
class ScalarField {
public:
  ScalarField() = default;
  explicit ScalarField(GridPtr grid, double value = 0.0);
  ScalarField(GridPtr grid, std::vector<double> values);

  static ScalarField from_function(GridPtr grid, const std::function<double(double, double)>& fn);

  const GridPtr& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& at(int i, int j) { return values_[grid_->index(i, j)]; }
  double at(int i, int j) const { return values_[grid_->index(i, j)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  double min() const;
  double max() const;
  double max_abs() const;
  double sum() const;
  /// Midpoint-rule integral over the domain.
  double integral() const { return sum() * grid_->cell_volume(); }
  bool all_finite() const;

  bool operator==(const ScalarField& other) const;

private:
  GridPtr grid_;
  std::vector<double> values_;
};

double max_abs_diff(const ScalarField& a, const ScalarField& b);

}  // namespace chemoctrl
