#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "chemoctrl/commands.hpp"
#include "chemoctrl/config.hpp"
#include "chemoctrl/io.hpp"
#include "oracles.hpp"

using namespace chemoctrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("chemoctrl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Drops the last CSV column (wall_time) from every line.
std::string without_last_column(const std::string& text) {
  std::istringstream is(text);
  std::string line, out;
  while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

void check_same_tree(const fs::path& a, const fs::path& b) {
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    REQUIRE(fs::exists(b / rel));
    std::string x = slurp(e.path()), y = slurp(b / rel);
    if (rel.filename() == "history.csv") {
      x = without_last_column(x);
      y = without_last_column(y);
    }
    // The config copy records the output directory.
    if (rel.filename() == "config.ini") continue;
    INFO(rel.string());
    CHECK(x == y);
    ++files;
  }
  CHECK(files > 0);
}

const char* kSmallConfig = R"(
[grid]
nx = 6
ny = 6

[model]
n_steps = 5
eps = 0.01
gamma_f = 0.001

[initial]
N0_kind = cosine
N0_value = 0.5
N0_amplitude = 0.3
C0_value = 1

[target]
Nd_value = 0.3
Cd_value = 0.2

[optimizer]
max_iterations = 5

[run]
seed = 42
)";

}  // namespace

TEST_CASE("binary fields round-trip bit for bit in little-endian order") {
  const fs::path dir = scratch("bin");
  const std::vector<double> v{0.0, -0.0, 1.0 / 3.0, 1e-310, -2.5e300, 0.1};
  write_field_bin(dir / "f.bin", v);
  const auto back = read_field_bin(dir / "f.bin");
  REQUIRE(back.size() == v.size());
  CHECK(std::memcmp(back.data(), v.data(), v.size() * sizeof(double)) == 0);
  const std::string raw = slurp(dir / "f.bin");
  CHECK(raw.size() == 48);
  // Third value, lowest byte first.
  const std::string bytes = raw.substr(16, 8);
  const double third = 1.0 / 3.0;
  std::uint64_t bits;
  std::memcpy(&bits, &third, 8);
  for (int i = 0; i < 8; ++i) CHECK(static_cast<unsigned char>(bytes[i]) == ((bits >> (8 * i)) & 0xFF));
  CHECK_THROWS_AS(read_field_bin(dir / "f.bin", make_grid(Grid2D(2, 2))), IoError);
  CHECK_THROWS_AS(read_field_bin(dir / "missing.bin"), IoError);
}

TEST_CASE("format_double is shortest round-trip") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -0.0}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("trajectory, adjoint and control directories round-trip") {
  const fs::path dir = scratch("traj");
  Grid2D g0(5, 4, 2.0, 1.0);
  g0.add_control_rect(0.5, 1.5, 0.25, 0.75);
  auto g = make_grid(g0);
  ModelParams p;
  p.eps = 1e-2;
  p.n_steps = 4;
  p.alpha = 0.7;
  ControlField f(g, 4, -1, 2, 0.0);
  f.data() = oracle::random_values(f.data().size(), -1, 2, 3);
  f.restrict_to_support();
  const ScalarField N0(g, oracle::random_values(20, 0.1, 0.9, 1)), C0(g, oracle::random_values(20, 0, 1, 2));
  const ConstitutiveSet cs = make_logistic_constitutive();
  const Trajectory t = run_forward(N0, C0, f, p, cs);
  write_trajectory(dir / "forward", t, 1024);
  const Trajectory r = read_trajectory(dir / "forward");
  CHECK(*r.grid == *g);
  CHECK(r.params == p);
  CHECK(r.control == f);
  CHECK(r.times == t.times);
  for (int n = 0; n <= 4; ++n) {
    CHECK(r.N[n] == t.N[n]);
    CHECK(r.C[n] == t.C[n]);
  }
  CHECK(fs::exists(dir / "forward" / "N_0000.bin"));
  CHECK(fs::exists(dir / "forward" / "meta"));

  const AdjointPair a = run_adjoint(t, f, TargetSeries(ScalarField(g, 0.2)), TargetSeries(ScalarField(g, 0.1)), p, cs);
  write_adjoint(dir / "adjoint", a);
  const AdjointPair b = read_adjoint(dir / "adjoint");
  CHECK(b.eps == a.eps);
  CHECK(b.scheme == a.scheme);
  for (int n = 0; n <= 4; ++n) {
    CHECK(b.p[n] == a.p[n]);
    CHECK(b.q[n] == a.q[n]);
  }

  write_control(dir / "control", f, p.T);
  CHECK(read_control(dir / "control") == f);
  CHECK_THROWS_AS(read_trajectory(dir / "control"), IoError);
}

TEST_CASE("config defaults and validation") {
  const ExperimentConfig d = parse_config_text("", fs::temp_directory_path());
  CHECK(d == ExperimentConfig{});
  CHECK(d.model.eps == 1e-2);
  CHECK(d.optimizer.sigma == 1e-4);
  CHECK(d.optimizer.tau0 == 1.0);
  CHECK(d.optimizer.backtrack == 0.5);
  CHECK(d.model.solver.newton_tol == 1e-10);
  CHECK(d.model.solver.newton_max_iter == 50);
  CHECK(d.model.solver.fixed_point_max_iter == 20);

  auto errors_of = [](const std::string& text) {
    try {
      parse_config_text(text, fs::temp_directory_path());
    } catch (const ConfigError& e) {
      return e.errors();
    }
    return std::vector<std::string>{};
  };
  auto mentions = [](const std::vector<std::string>& errs, const std::string& needle) {
    for (const auto& e : errs)
      if (e.find(needle) != std::string::npos) return true;
    return false;
  };
  CHECK(mentions(errors_of("[model]\nn_steps = 0\n"), "n_steps must be ≥ 1"));
  CHECK(mentions(errors_of("[model]\nfoo = 1\n"), "unknown key 'foo'"));
  CHECK(mentions(errors_of("[nowhere]\n"), "unknown section"));
  CHECK(mentions(errors_of("[grid]\nnx = 4\nnx = 5\n"), "duplicate key"));
  CHECK(mentions(errors_of("nx = 4\n"), "outside any section"));
  CHECK(mentions(errors_of("[model]\neps = abc\n"), "eps"));
  CHECK(mentions(errors_of("[initial]\nN0_kind = file\nN0_file = does_not_exist.bin\n"), "does_not_exist.bin"));
  CHECK_THROWS_AS(parse_config("/nonexistent/dir/config.ini"), ConfigError);
}

TEST_CASE("serialize_config round-trips") {
  ExperimentConfig c = parse_config_text(kSmallConfig, fs::temp_directory_path());
  c.control.rects = {{0.1, 0.4, 0.2, 0.9}, {0.6, 0.9, 0.0, 0.3}};
  c.model.solver.adjoint = AdjointScheme::Literal;
  c.sweep.eps_values = {0.0, 0.5};
  const ExperimentConfig back = parse_config_text(serialize_config(c), fs::temp_directory_path());
  CHECK(back == c);
}

TEST_CASE("command results do not depend on the run") {
  const fs::path root = scratch("determinism");
  {
    std::ofstream os(root / "small.ini");
    os << kSmallConfig;
  }
  for (const char* cmd : {"forward", "adjoint", "optimize", "gradcheck"}) {
    CommandOptions a, b;
    a.out = root / (std::string(cmd) + "_a");
    b.out = root / (std::string(cmd) + "_b");
    b.workers = 2;
    CHECK(run_command(cmd, root / "small.ini", a) == kExitPass);
    CHECK(run_command(cmd, root / "small.ini", b) == kExitPass);
    check_same_tree(*a.out, *b.out);
  }
  CHECK(run_command("forward", root / "missing.ini", {}) == kExitConfig);
  CHECK(run_command("frobnicate", root / "small.ini", {}) == kExitConfig);
}
