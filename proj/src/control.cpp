#include "chemoctrl/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chemoctrl {

ControlField::ControlField(GridPtr grid, int n_steps, double f_min, double f_max, double value)
    : grid_(std::move(grid)), n_steps_(n_steps), f_min_(f_min), f_max_(f_max) {
  if (!grid_) throw std::invalid_argument("control: null grid");
  if (n_steps < 1) throw std::invalid_argument("control: n_steps must be >= 1");
  if (!(f_min <= f_max)) throw std::invalid_argument("control: f_min must not exceed f_max");
  cells_ = grid_->cell_count();
  values_.assign(static_cast<std::size_t>(n_steps) * cells_, 0.0);
  for (int n = 0; n < n_steps; ++n)
    for (std::size_t k = 0; k < cells_; ++k)
      if (grid_->in_control(k)) (*this)(n, k) = value;
}

ScalarField ControlField::level(int n) const {
  if (n < 0 || n >= n_steps_) throw std::out_of_range("control: level out of range");
  auto first = values_.begin() + static_cast<std::ptrdiff_t>(n * cells_);
  return ScalarField(grid_, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(cells_)));
}

double ControlField::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool ControlField::is_feasible(double tol) const {
  for (int n = 0; n < n_steps_; ++n) {
    for (std::size_t k = 0; k < cells_; ++k) {
      const double v = (*this)(n, k);
      if (grid_->in_control(k)) {
        if (v < f_min_ - tol || v > f_max_ + tol) return false;
      } else if (v != 0.0) {
        return false;
      }
    }
  }
  return true;
}

void ControlField::restrict_to_support() {
  for (int n = 0; n < n_steps_; ++n)
    for (std::size_t k = 0; k < cells_; ++k)
      if (!grid_->in_control(k)) (*this)(n, k) = 0.0;
}

bool ControlField::operator==(const ControlField& o) const {
  return same_grid(grid_, o.grid_) && n_steps_ == o.n_steps_ && f_min_ == o.f_min_ && f_max_ == o.f_max_ &&
         values_ == o.values_;
}

double weighted_dot(const ControlField& a, const ControlField& b, double h) {
  if (a.data().size() != b.data().size()) throw std::invalid_argument("weighted_dot: shape mismatch");
  const auto& g = *a.grid();
  double s = 0.0;
  for (int n = 0; n < a.n_steps(); ++n)
    for (std::size_t k = 0; k < g.cell_count(); ++k)
      if (g.in_control(k)) s += a(n, k) * b(n, k);
  return s * h * g.cell_volume();
}

double weighted_norm(const ControlField& a, double h) { return std::sqrt(weighted_dot(a, a, h)); }

}  // namespace chemoctrl
