#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemoctrl/adjoint.hpp"
#include "chemoctrl/control.hpp"
#include "chemoctrl/forward.hpp"
#include "chemoctrl/grid.hpp"
#include "chemoctrl/optimizer.hpp"

namespace chemoctrl {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Flat binary field: cell values as 64-bit little-endian reals, row-major.
void write_field_bin(const std::filesystem::path& file, const std::vector<double>& values);
std::vector<double> read_field_bin(const std::filesystem::path& file);
ScalarField read_field_bin(const std::filesystem::path& file, const GridPtr& grid);

/// `x,y,value` per cell.
void write_field_csv(const std::filesystem::path& file, const ScalarField& field);

/// Key-value sidecar, one `key = value` per line, sorted by key.
using Meta = std::map<std::string, std::string>;
void write_meta(const std::filesystem::path& file, const Meta& meta);
Meta read_meta(const std::filesystem::path& file);

/// Run directories: `meta` plus one file per level (N_0000.bin, C_0000.bin,
/// p_..., q_..., f_...). Fields are exported to CSV as well when the grid has
/// at most `csv_max_cells` cells.
void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj, std::size_t csv_max_cells = 0);
Trajectory read_trajectory(const std::filesystem::path& dir);

void write_adjoint(const std::filesystem::path& dir, const AdjointPair& adj, std::size_t csv_max_cells = 0);
AdjointPair read_adjoint(const std::filesystem::path& dir);

void write_control(const std::filesystem::path& dir, const ControlField& f, double T);
ControlField read_control(const std::filesystem::path& dir);

/// iteration,J,stationarity,step,wall_time
void write_history_csv(const std::filesystem::path& file, const std::vector<HistoryEntry>& history);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace chemoctrl
