#pragma once

#include <cstddef>
#include <vector>

#include "chemoctrl/grid.hpp"

namespace chemoctrl {

/// Space-time control, piecewise constant in time.
///
/// Level n (0 <= n < n_steps) holds the control on (t_n, t_{n+1}], i.e. the
/// value used by the step producing level n+1. Values outside the control
/// mask are zero. The same type carries reduced gradients, for which the box
/// bounds are informational only.
class ControlField {
public:
  ControlField() = default;
  ControlField(GridPtr grid, int n_steps, double f_min, double f_max, double value = 0.0);

  const GridPtr& grid() const { return grid_; }
  int n_steps() const { return n_steps_; }
  double f_min() const { return f_min_; }
  double f_max() const { return f_max_; }

  double& operator()(int level, std::size_t cell) { return values_[level * cells_ + cell]; }
  double operator()(int level, std::size_t cell) const { return values_[level * cells_ + cell]; }

  /// Control of one step as a field (zero outside the control set).
  ScalarField level(int n) const;

  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  /// max |f| over all levels and cells.
  double sup_norm() const;
  /// True when every control-set value lies in the box and all others are zero.
  bool is_feasible(double tol = 0.0) const;
  /// Zeroes every value outside the control set.
  void restrict_to_support();

  bool operator==(const ControlField&) const;

private:
  GridPtr grid_;
  int n_steps_ = 0;
  std::size_t cells_ = 0;
  double f_min_ = 0.0;
  double f_max_ = 0.0;
  std::vector<double> values_;
};

/// Space-time inner product with weights h*hx*hy over the control set.
double weighted_dot(const ControlField& a, const ControlField& b, double h);
double weighted_norm(const ControlField& a, double h);

}  // namespace chemoctrl
