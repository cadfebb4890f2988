#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "chemoctrl/config.hpp"
#include "chemoctrl/forward.hpp"

namespace chemoctrl {

enum ExitCode : int { kExitPass = 0, kExitInvariant = 1, kExitSolver = 2, kExitConfig = 3 };

/// Pass/fail lines of one command, written to `<out>/report`.
class Report {
public:
  enum class Status { Pass, Fail, Warn, Info };
  struct Line {
    Status status;
    std::string name;
    std::string detail;
  };

  void add(Status s, std::string name, std::string detail);
  void check(bool ok, std::string name, std::string detail) { add(ok ? Status::Pass : Status::Fail, name, detail); }
  void info(std::string name, std::string detail) { add(Status::Info, name, detail); }
  void warn(std::string name, std::string detail) { add(Status::Warn, name, detail); }

  bool failed() const;
  const std::vector<Line>& lines() const { return lines_; }
  std::string str() const;
  void write(const std::filesystem::path& file) const;

private:
  std::vector<Line> lines_;
};

/// Discrete maximum principle and conservation measured on one trajectory.
struct TrajectoryCheck {
  double min_N = 0.0;
  double max_N = 0.0;
  double min_C = 0.0;
  double max_C = 0.0;
  double M = 0.0;           ///< m_bound(|C0|_inf, |f|_inf, alpha, T)
  double mass_drift = 0.0;  ///< max_n |sum N_n - sum N_0| hx hy
  double n_tol = 0.0;       ///< 1e-10 + Newton tolerance
  bool finite = true;
  std::vector<std::string> n_violations;  ///< "level n cell (i,j): value"
  std::vector<std::string> c_violations;
  std::vector<std::string> mass_violations;

  bool bounds_ok() const { return finite && n_violations.empty() && c_violations.empty(); }
  bool mass_ok() const { return mass_violations.empty(); }
};

TrajectoryCheck check_trajectory(const Trajectory& traj);

/// Overrides from the command line.
struct CommandOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::ostream* log = nullptr;  ///< progress and the report text, if set
};

/// Config with command-line overrides applied.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const CommandOptions& opts);

int cmd_forward(const ExperimentConfig& cfg, const CommandOptions& opts = {});
int cmd_adjoint(const ExperimentConfig& cfg, const CommandOptions& opts = {});
int cmd_optimize(const ExperimentConfig& cfg, const CommandOptions& opts = {});
int cmd_gradcheck(const ExperimentConfig& cfg, const CommandOptions& opts = {});
int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts = {});
int cmd_eoc(const ExperimentConfig& cfg, const CommandOptions& opts = {});

/// Parses the config at `path` and dispatches; config problems give kExitConfig.
int run_command(const std::string& name, const std::filesystem::path& path, const CommandOptions& opts);

/// mt19937_64 draw mapped to [0,1) as (u >> 11) * 2^-53.
double uniform01(std::uint64_t raw);

}  // namespace chemoctrl
