#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chemoctrl/control.hpp"
#include "chemoctrl/forward.hpp"
#include "chemoctrl/grid.hpp"
#include "chemoctrl/optimizer.hpp"
#include "chemoctrl/params.hpp"

namespace chemoctrl {

/// Collected problems of one configuration file.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

private:
  std::vector<std::string> errors_;
};

/// Initial or target data preset.
///   constant: value
///   cosine:   value + amplitude cos(pi x/lx) cos(pi y/ly)
///   bump:     value + amplitude max(0, 1 - r^2/width^2), r the distance to the
///             centre, clipped to the admissible range of the field
///   file:     flat binary field
struct FieldSpec {
  enum class Kind { Constant, Cosine, Bump, File };
  Kind kind = Kind::Constant;
  double value = 0.0;
  double amplitude = 0.0;
  double center_x = 0.5;
  double center_y = 0.5;
  double width = 0.25;
  std::string file;

  static FieldSpec constant(double v) {
    FieldSpec s;
    s.value = v;
    return s;
  }
  bool operator==(const FieldSpec&) const = default;
};

struct GridSpec {
  int nx = 16;
  int ny = 16;
  double lx = 1.0;
  double ly = 1.0;
  bool operator==(const GridSpec&) const = default;
};

struct TargetSpec {
  /// fields: Nd, Cd presets; trajectory: levels of a stored run;
  /// forward: levels of a forward run of this config under f = f_dagger on the control set.
  enum class Kind { Fields, Trajectory, Forward };
  Kind kind = Kind::Fields;
  FieldSpec Nd = FieldSpec::constant(0.5);
  FieldSpec Cd = FieldSpec::constant(0.0);
  std::string trajectory;
  double f_dagger = 0.5;
  bool operator==(const TargetSpec&) const = default;
};

struct ControlSpec {
  double f_min = -1.0;
  double f_max = 1.0;
  std::vector<std::array<double, 4>> rects{{0.25, 0.75, 0.25, 0.75}};  ///< x0 x1 y0 y1
  std::string mask_file;                                               ///< overrides rects when set
  double initial = 0.0;
  std::string initial_dir;  ///< stored control, overrides `initial` when set
  bool operator==(const ControlSpec&) const = default;
};

struct GradcheckSpec {
  int probes = 20;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  double tolerance = 1e-3;
  double abs_floor = 1e-10;  ///< denominator floor of the relative error
  /// random: mixed-sign control with |f| in [min_abs, max_abs]; initial: [control] initial guess
  std::string control = "random";
  double min_abs = 0.2;
  double max_abs = 1.0;
  bool include_outside = true;  ///< add one probe off the control set
  bool operator==(const GradcheckSpec&) const = default;
};

struct SweepSpec {
  int samples = 100;
  std::string f_sign = "mixed";  ///< mixed | nonnegative
  double alpha_max = 2.0;
  double beta_max = 2.0;
  std::vector<double> eps_values{0.0, 1e-3, 1e-2};
  bool operator==(const SweepSpec&) const = default;
};

struct EocSpec {
  std::string preset = "smooth";  ///< smooth | constant | degenerate | config
  int base_steps = 10;
  int refinements = 4;
  int reference_factor = 16;
  double eoc_min = 0.8;
  double eoc_max = 1.5;
  bool operator==(const EocSpec&) const = default;
};

struct OutputSpec {
  std::string dir = "out";
  int csv_max_cells = 1024;
  bool operator==(const OutputSpec&) const = default;
};

struct RunSpec {
  std::uint64_t seed = 1;
  int workers = 1;
  bool operator==(const RunSpec&) const = default;
};

struct ExperimentConfig {
  GridSpec grid;
  ModelParams model = default_model();
  FieldSpec N0 = FieldSpec::constant(0.5);
  FieldSpec C0 = FieldSpec::constant(0.0);
  TargetSpec target;
  ControlSpec control;
  OptimizerOptions optimizer;
  GradcheckSpec gradcheck;
  SweepSpec sweep;
  EocSpec eoc;
  OutputSpec output;
  RunSpec run;

  static ModelParams default_model() {
    ModelParams p;
    p.eps = 1e-2;
    return p;
  }
  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates. Relative file references resolve against the
/// directory of the config file and are stored as absolute paths.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir);
std::string serialize_config(const ExperimentConfig& cfg);

/// Problems of an in-memory config; empty when valid.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

GridPtr build_grid(const ExperimentConfig& cfg);
/// N fields clip to [0,1], C fields to [0, inf).
ScalarField build_field(const FieldSpec& spec, const GridPtr& grid, bool density);
ControlField build_initial_control(const ExperimentConfig& cfg, const GridPtr& grid);
/// Targets, running the forward model for the `forward` kind.
std::pair<TargetSeries, TargetSeries> build_targets(const ExperimentConfig& cfg, const GridPtr& grid,
                                                    const ScalarField& N0, const ScalarField& C0);
ControlProblem build_problem(const ExperimentConfig& cfg, const GridPtr& grid);

}  // namespace chemoctrl
