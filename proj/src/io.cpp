#include "chemoctrl/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace chemoctrl {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad number for " + what + ": " + s);
  return v;
}

long parse_int(const std::string& s, const std::string& what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad integer for " + what + ": " + s);
  return v;
}

const std::string& need(const Meta& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw IoError("meta: missing key '" + key + "'");
  return it->second;
}

std::string level_name(char prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c_%04d", prefix, n);
  return buf;
}

void put_grid(Meta& m, const Grid2D& g) {
  m["nx"] = std::to_string(g.nx());
  m["ny"] = std::to_string(g.ny());
  m["lx"] = format_double(g.lx());
  m["ly"] = format_double(g.ly());
  std::string mask;
  mask.reserve(g.cell_count());
  for (auto b : g.control_mask()) mask.push_back(b ? '1' : '0');
  m["control_mask"] = mask;
}

GridPtr get_grid(const Meta& m) {
  const int nx = static_cast<int>(parse_int(need(m, "nx"), "nx"));
  const int ny = static_cast<int>(parse_int(need(m, "ny"), "ny"));
  const std::string& s = need(m, "control_mask");
  std::vector<std::uint8_t> mask;
  mask.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw IoError("meta: control_mask must be a 0/1 string");
    mask.push_back(c == '1');
  }
  try {
    return make_grid(Grid2D(nx, ny, parse_double(need(m, "lx"), "lx"), parse_double(need(m, "ly"), "ly"), mask));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("meta: ") + e.what());
  }
}

void put_params(Meta& m, const ModelParams& p) {
  m["alpha"] = format_double(p.alpha);
  m["beta"] = format_double(p.beta);
  m["eps"] = format_double(p.eps);
  m["T"] = format_double(p.T);
  m["n_steps"] = std::to_string(p.n_steps);
  m["gamma_N"] = format_double(p.gamma_N);
  m["gamma_C"] = format_double(p.gamma_C);
  m["gamma_f"] = format_double(p.gamma_f);
  m["constitutive"] = to_string(p.constitutive);
  m["convection"] = to_string(p.solver.convection);
  m["adjoint"] = to_string(p.solver.adjoint);
  m["newton_tol"] = format_double(p.solver.newton_tol);
  m["newton_max_iter"] = std::to_string(p.solver.newton_max_iter);
  m["fixed_point_max_iter"] = std::to_string(p.solver.fixed_point_max_iter);
}

ModelParams get_params(const Meta& m) {
  ModelParams p;
  p.alpha = parse_double(need(m, "alpha"), "alpha");
  p.beta = parse_double(need(m, "beta"), "beta");
  p.eps = parse_double(need(m, "eps"), "eps");
  p.T = parse_double(need(m, "T"), "T");
  p.n_steps = static_cast<int>(parse_int(need(m, "n_steps"), "n_steps"));
  p.gamma_N = parse_double(need(m, "gamma_N"), "gamma_N");
  p.gamma_C = parse_double(need(m, "gamma_C"), "gamma_C");
  p.gamma_f = parse_double(need(m, "gamma_f"), "gamma_f");
  try {
    p.constitutive = constitutive_kind_from_string(need(m, "constitutive"));
    p.solver.convection = convection_scheme_from_string(need(m, "convection"));
    p.solver.adjoint = adjoint_scheme_from_string(need(m, "adjoint"));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("meta: ") + e.what());
  }
  p.solver.newton_tol = parse_double(need(m, "newton_tol"), "newton_tol");
  p.solver.newton_max_iter = static_cast<int>(parse_int(need(m, "newton_max_iter"), "newton_max_iter"));
  p.solver.fixed_point_max_iter = static_cast<int>(parse_int(need(m, "fixed_point_max_iter"), "fixed_point_max_iter"));
  return p;
}

void write_levels(const fs::path& dir, char prefix, const std::vector<ScalarField>& levels, std::size_t csv_max) {
  for (std::size_t n = 0; n < levels.size(); ++n) {
    const std::string name = level_name(prefix, static_cast<int>(n));
    write_field_bin(dir / (name + ".bin"), levels[n].vector());
    if (csv_max > 0 && levels[n].size() <= csv_max) write_field_csv(dir / (name + ".csv"), levels[n]);
  }
}

std::vector<ScalarField> read_levels(const fs::path& dir, char prefix, int count, const GridPtr& grid) {
  std::vector<ScalarField> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) out.push_back(read_field_bin(dir / (level_name(prefix, n) + ".bin"), grid));
  return out;
}

void write_control_levels(const fs::path& dir, const ControlField& f) {
  for (int n = 0; n < f.n_steps(); ++n) write_field_bin(dir / (level_name('f', n) + ".bin"), f.level(n).vector());
}

ControlField read_control_levels(const fs::path& dir, const GridPtr& grid, int steps, double fmin, double fmax) {
  ControlField f(grid, steps, fmin, fmax, 0.0);
  for (int n = 0; n < steps; ++n) {
    const std::vector<double> v = read_field_bin(dir / (level_name('f', n) + ".bin"));
    if (v.size() != grid->cell_count()) throw IoError("control level has the wrong size");
    for (std::size_t k = 0; k < v.size(); ++k) f(n, k) = v[k];
  }
  return f;
}

}  // namespace

void write_field_bin(const fs::path& file, const std::vector<double>& values) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + file.string());
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    os.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!os) throw IoError("write failed: " + file.string());
}

std::vector<double> read_field_bin(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot read " + file.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (raw.size() % 8 != 0) throw IoError(file.string() + ": size is not a multiple of 8 bytes");
  std::vector<double> out(raw.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[8 * k + b])) << (8 * b);
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

ScalarField read_field_bin(const fs::path& file, const GridPtr& grid) {
  std::vector<double> v = read_field_bin(file);
  if (v.size() != grid->cell_count())
    throw IoError(file.string() + ": expected " + std::to_string(grid->cell_count()) + " values, found " +
                  std::to_string(v.size()));
  try {
    return ScalarField(grid, std::move(v));
  } catch (const std::invalid_argument& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

void write_field_csv(const fs::path& file, const ScalarField& field) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot write " + file.string());
  const Grid2D& g = *field.grid();
  os << "x,y,value\n";
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      os << format_double(g.x_center(i)) << ',' << format_double(g.y_center(j)) << ',' << format_double(field.at(i, j))
         << '\n';
}

void write_meta(const fs::path& file, const Meta& meta) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot write " + file.string());
  for (const auto& [k, v] : meta) os << k << " = " << v << '\n';
}

Meta read_meta(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read " + file.string());
  Meta m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw IoError(file.string() + ": malformed line '" + line + "'");
    m[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return m;
}

void write_trajectory(const fs::path& dir, const Trajectory& traj, std::size_t csv_max_cells) {
  fs::create_directories(dir);
  Meta m;
  m["kind"] = "trajectory";
  put_grid(m, *traj.grid);
  put_params(m, traj.params);
  m["levels"] = std::to_string(traj.levels());
  m["f_min"] = format_double(traj.control.f_min());
  m["f_max"] = format_double(traj.control.f_max());
  write_meta(dir / "meta", m);
  write_levels(dir, 'N', traj.N, csv_max_cells);
  write_levels(dir, 'C', traj.C, csv_max_cells);
  write_control_levels(dir, traj.control);
}

Trajectory read_trajectory(const fs::path& dir) {
  const Meta m = read_meta(dir / "meta");
  if (need(m, "kind") != "trajectory") throw IoError(dir.string() + " does not hold a trajectory");
  Trajectory t;
  t.grid = get_grid(m);
  t.params = get_params(m);
  const int levels = static_cast<int>(parse_int(need(m, "levels"), "levels"));
  if (levels != t.params.n_steps + 1) throw IoError("meta: levels does not match n_steps");
  t.N = read_levels(dir, 'N', levels, t.grid);
  t.C = read_levels(dir, 'C', levels, t.grid);
  t.control = read_control_levels(dir, t.grid, t.params.n_steps, parse_double(need(m, "f_min"), "f_min"),
                                  parse_double(need(m, "f_max"), "f_max"));
  for (int n = 0; n < levels; ++n) t.times.push_back(t.params.time(n));
  t.reports.resize(static_cast<std::size_t>(t.params.n_steps));
  return t;
}

void write_adjoint(const fs::path& dir, const AdjointPair& adj, std::size_t csv_max_cells) {
  fs::create_directories(dir);
  Meta m;
  m["kind"] = "adjoint";
  put_grid(m, *adj.grid);
  m["levels"] = std::to_string(adj.levels());
  m["eps"] = format_double(adj.eps);
  m["scheme"] = to_string(adj.scheme);
  std::string lost;
  for (int n : adj.dominance_lost) lost += (lost.empty() ? "" : " ") + std::to_string(n);
  m["dominance_lost"] = lost.empty() ? "none" : lost;
  write_meta(dir / "meta", m);
  write_levels(dir, 'p', adj.p, csv_max_cells);
  write_levels(dir, 'q', adj.q, csv_max_cells);
}

AdjointPair read_adjoint(const fs::path& dir) {
  const Meta m = read_meta(dir / "meta");
  if (need(m, "kind") != "adjoint") throw IoError(dir.string() + " does not hold an adjoint");
  AdjointPair a;
  a.grid = get_grid(m);
  const int levels = static_cast<int>(parse_int(need(m, "levels"), "levels"));
  a.eps = parse_double(need(m, "eps"), "eps");
  try {
    a.scheme = adjoint_scheme_from_string(need(m, "scheme"));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("meta: ") + e.what());
  }
  const std::string& lost = need(m, "dominance_lost");
  if (lost != "none") {
    std::istringstream is(lost);
    int n;
    while (is >> n) a.dominance_lost.push_back(n);
  }
  a.p = read_levels(dir, 'p', levels, a.grid);
  a.q = read_levels(dir, 'q', levels, a.grid);
  return a;
}

void write_control(const fs::path& dir, const ControlField& f, double T) {
  fs::create_directories(dir);
  Meta m;
  m["kind"] = "control";
  put_grid(m, *f.grid());
  m["n_steps"] = std::to_string(f.n_steps());
  m["T"] = format_double(T);
  m["f_min"] = format_double(f.f_min());
  m["f_max"] = format_double(f.f_max());
  write_meta(dir / "meta", m);
  write_control_levels(dir, f);
}

ControlField read_control(const fs::path& dir) {
  const Meta m = read_meta(dir / "meta");
  if (need(m, "kind") != "control") throw IoError(dir.string() + " does not hold a control");
  return read_control_levels(dir, get_grid(m), static_cast<int>(parse_int(need(m, "n_steps"), "n_steps")),
                             parse_double(need(m, "f_min"), "f_min"), parse_double(need(m, "f_max"), "f_max"));
}

void write_history_csv(const fs::path& file, const std::vector<HistoryEntry>& history) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot write " + file.string());
  os << "iteration,J,stationarity,step,wall_time\n";
  for (const HistoryEntry& e : history)
    os << e.iteration << ',' << format_double(e.J) << ',' << format_double(e.stationarity) << ','
       << format_double(e.step) << ',' << format_double(e.wall_time) << '\n';
}

}  // namespace chemoctrl
