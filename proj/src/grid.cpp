#include "chemoctrl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace chemoctrl {

Grid2D::Grid2D(int nx, int ny, double lx, double ly)
    : Grid2D(nx, ny, lx, ly, std::vector<std::uint8_t>(nx > 0 && ny > 0 ? std::size_t(nx) * ny : 0, 0)) {}

Grid2D::Grid2D(int nx, int ny, double lx, double ly, std::vector<std::uint8_t> control_mask)
    : nx_(nx), ny_(ny), lx_(lx), ly_(ly), control_mask_(std::move(control_mask)) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("grid: nx and ny must be >= 1");
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("grid: lx and ly must be > 0");
  if (control_mask_.size() != cell_count())
    throw std::invalid_argument("grid: control mask has " + std::to_string(control_mask_.size()) +
                                " entries, expected " + std::to_string(cell_count()));
}

std::size_t Grid2D::control_cell_count() const {
  return static_cast<std::size_t>(std::count_if(control_mask_.begin(), control_mask_.end(),
                                                [](std::uint8_t m) { return m != 0; }));
}

void Grid2D::add_control_rect(double x0, double x1, double y0, double y1) {
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const double x = x_center(i);
      const double y = y_center(j);
      if (x >= x0 && x <= x1 && y >= y0 && y <= y1) control_mask_[index(i, j)] = 1;
    }
  }
}

void Grid2D::set_control_mask(std::vector<std::uint8_t> mask) {
  if (mask.size() != cell_count()) throw std::invalid_argument("grid: control mask size mismatch");
  control_mask_ = std::move(mask);
}

bool same_grid(const GridPtr& a, const GridPtr& b) {
  if (!a || !b) return false;
  return a == b || *a == *b;
}

ScalarField::ScalarField(GridPtr grid, double value) : grid_(std::move(grid)) {
  if (!grid_) throw std::invalid_argument("field: null grid");
  values_.assign(grid_->cell_count(), value);
}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw std::invalid_argument("field: null grid");
  if (values_.size() != grid_->cell_count()) throw std::invalid_argument("field: value count does not match grid");
  if (!all_finite()) throw std::invalid_argument("field: non-finite value");
}

ScalarField ScalarField::from_function(GridPtr grid, const std::function<double(double, double)>& fn) {
  ScalarField out(grid);
  for (int j = 0; j < grid->ny(); ++j)
    for (int i = 0; i < grid->nx(); ++i) out.at(i, j) = fn(grid->x_center(i), grid->y_center(j));
  if (!out.all_finite()) throw std::invalid_argument("field: initialiser produced a non-finite value");
  return out;
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool ScalarField::operator==(const ScalarField& other) const {
  return same_grid(grid_, other.grid_) && values_ == other.values_;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace chemoctrl
