#include "chemoctrl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "chemoctrl/io.hpp"

namespace chemoctrl {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? sep : "") + v[k];
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool read_double(const std::string& s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

template <class Int>
bool read_int(const std::string& s, Int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string kind_name(FieldSpec::Kind k) {
  switch (k) {
    case FieldSpec::Kind::Constant: return "constant";
    case FieldSpec::Kind::Cosine: return "cosine";
    case FieldSpec::Kind::Bump: return "bump";
    case FieldSpec::Kind::File: return "file";
  }
  return "constant";
}

std::string target_name(TargetSpec::Kind k) {
  switch (k) {
    case TargetSpec::Kind::Fields: return "fields";
    case TargetSpec::Kind::Trajectory: return "trajectory";
    case TargetSpec::Kind::Forward: return "forward";
  }
  return "fields";
}

using Errors = std::vector<std::string>;

// One key of the file: how to read it into a config and print it back.
struct Binding {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, const fs::path&, Errors&)> read;
  std::function<std::string(ExperimentConfig&)> write;
};

std::string where(const Binding& b) { return "[" + b.section + "] " + b.key; }

template <class Get>
Binding real(std::string sec, std::string key, Get get) {
  Binding b{std::move(sec), std::move(key), {}, {}};
  const std::string w = where(b);
  b.read = [get, w](ExperimentConfig& c, const std::string& v, const fs::path&, Errors& e) {
    if (!read_double(v, get(c))) e.push_back(w + ": expected a finite number, got '" + v + "'");
  };
  b.write = [get](ExperimentConfig& c) { return format_double(get(c)); };
  return b;
}

template <class Get>
Binding integer(std::string sec, std::string key, Get get) {
  Binding b{std::move(sec), std::move(key), {}, {}};
  const std::string w = where(b);
  b.read = [get, w](ExperimentConfig& c, const std::string& v, const fs::path&, Errors& e) {
    if (!read_int(v, get(c))) e.push_back(w + ": expected an integer, got '" + v + "'");
  };
  b.write = [get](ExperimentConfig& c) { return std::to_string(get(c)); };
  return b;
}

template <class Get>
Binding text(std::string sec, std::string key, Get get) {
  Binding b{std::move(sec), std::move(key), {}, {}};
  b.read = [get](ExperimentConfig& c, const std::string& v, const fs::path&, Errors&) { get(c) = v; };
  b.write = [get](ExperimentConfig& c) { return get(c); };
  return b;
}

template <class Get>
Binding path(std::string sec, std::string key, Get get) {
  Binding b{std::move(sec), std::move(key), {}, {}};
  b.read = [get](ExperimentConfig& c, const std::string& v, const fs::path& base, Errors&) {
    if (v.empty()) {
      get(c).clear();
      return;
    }
    fs::path p(v);
    if (p.is_relative()) p = base / p;
    get(c) = fs::absolute(p).lexically_normal().string();
  };
  b.write = [get](ExperimentConfig& c) { return get(c); };
  return b;
}

template <class Get>
Binding flag(std::string sec, std::string key, Get get) {
  Binding b{std::move(sec), std::move(key), {}, {}};
  const std::string w = where(b);
  b.read = [get, w](ExperimentConfig& c, const std::string& v, const fs::path&, Errors& e) {
    if (v == "true") get(c) = true;
    else if (v == "false") get(c) = false;
    else e.push_back(w + ": expected true or false, got '" + v + "'");
  };
  b.write = [get](ExperimentConfig& c) { return std::string(get(c) ? "true" : "false"); };
  return b;
}

template <class Get>
Binding real_list(std::string sec, std::string key, Get get) {
  Binding b{std::move(sec), std::move(key), {}, {}};
  const std::string w = where(b);
  b.read = [get, w](ExperimentConfig& c, const std::string& v, const fs::path&, Errors& e) {
    std::vector<double> out;
    for (const std::string& tok : split_ws(v)) {
      double d;
      if (!read_double(tok, d)) {
        e.push_back(w + ": expected numbers, got '" + tok + "'");
        return;
      }
      out.push_back(d);
    }
    get(c) = out;
  };
  b.write = [get](ExperimentConfig& c) {
    std::vector<std::string> parts;
    for (double d : get(c)) parts.push_back(format_double(d));
    return join(parts, " ");
  };
  return b;
}

template <class Get>
Binding field_kind(std::string sec, std::string key, Get get) {
  Binding b{std::move(sec), std::move(key), {}, {}};
  const std::string w = where(b);
  b.read = [get, w](ExperimentConfig& c, const std::string& v, const fs::path&, Errors& e) {
    if (v == "constant") get(c) = FieldSpec::Kind::Constant;
    else if (v == "cosine") get(c) = FieldSpec::Kind::Cosine;
    else if (v == "bump") get(c) = FieldSpec::Kind::Bump;
    else if (v == "file") get(c) = FieldSpec::Kind::File;
    else e.push_back(w + ": expected constant, cosine, bump or file, got '" + v + "'");
  };
  b.write = [get](ExperimentConfig& c) { return kind_name(get(c)); };
  return b;
}

void add_field_spec(std::vector<Binding>& out, const std::string& sec, const std::string& prefix,
                    FieldSpec& (*get)(ExperimentConfig&)) {
  out.push_back(field_kind(sec, prefix + "_kind", [get](ExperimentConfig& c) -> auto& { return get(c).kind; }));
  out.push_back(real(sec, prefix + "_value", [get](ExperimentConfig& c) -> auto& { return get(c).value; }));
  out.push_back(real(sec, prefix + "_amplitude", [get](ExperimentConfig& c) -> auto& { return get(c).amplitude; }));
  out.push_back(real(sec, prefix + "_center_x", [get](ExperimentConfig& c) -> auto& { return get(c).center_x; }));
  out.push_back(real(sec, prefix + "_center_y", [get](ExperimentConfig& c) -> auto& { return get(c).center_y; }));
  out.push_back(real(sec, prefix + "_width", [get](ExperimentConfig& c) -> auto& { return get(c).width; }));
  out.push_back(path(sec, prefix + "_file", [get](ExperimentConfig& c) -> auto& { return get(c).file; }));
}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> t;
    using C = ExperimentConfig;
    t.push_back(integer("grid", "nx", [](C& c) -> auto& { return c.grid.nx; }));
    t.push_back(integer("grid", "ny", [](C& c) -> auto& { return c.grid.ny; }));
    t.push_back(real("grid", "lx", [](C& c) -> auto& { return c.grid.lx; }));
    t.push_back(real("grid", "ly", [](C& c) -> auto& { return c.grid.ly; }));

    t.push_back(real("model", "alpha", [](C& c) -> auto& { return c.model.alpha; }));
    t.push_back(real("model", "beta", [](C& c) -> auto& { return c.model.beta; }));
    t.push_back(real("model", "eps", [](C& c) -> auto& { return c.model.eps; }));
    t.push_back(real("model", "T", [](C& c) -> auto& { return c.model.T; }));
    t.push_back(integer("model", "n_steps", [](C& c) -> auto& { return c.model.n_steps; }));
    t.push_back(real("model", "gamma_N", [](C& c) -> auto& { return c.model.gamma_N; }));
    t.push_back(real("model", "gamma_C", [](C& c) -> auto& { return c.model.gamma_C; }));
    t.push_back(real("model", "gamma_f", [](C& c) -> auto& { return c.model.gamma_f; }));
    {
      Binding b{"model", "constitutive", {}, {}};
      b.read = [](C& c, const std::string& v, const fs::path&, Errors& e) {
        try {
          c.model.constitutive = constitutive_kind_from_string(v);
        } catch (const std::invalid_argument&) {
          e.push_back("[model] constitutive: expected logistic or quartic, got '" + v + "'");
        }
      };
      b.write = [](C& c) { return to_string(c.model.constitutive); };
      t.push_back(b);
    }
    {
      Binding b{"model", "convection", {}, {}};
      b.read = [](C& c, const std::string& v, const fs::path&, Errors& e) {
        try {
          c.model.solver.convection = convection_scheme_from_string(v);
        } catch (const std::invalid_argument&) {
          e.push_back("[model] convection: expected upwind or centered, got '" + v + "'");
        }
      };
      b.write = [](C& c) { return to_string(c.model.solver.convection); };
      t.push_back(b);
    }
    {
      Binding b{"model", "adjoint", {}, {}};
      b.read = [](C& c, const std::string& v, const fs::path&, Errors& e) {
        try {
          c.model.solver.adjoint = adjoint_scheme_from_string(v);
        } catch (const std::invalid_argument&) {
          e.push_back("[model] adjoint: expected consistent or literal, got '" + v + "'");
        }
      };
      b.write = [](C& c) { return to_string(c.model.solver.adjoint); };
      t.push_back(b);
    }
    t.push_back(real("model", "newton_tol", [](C& c) -> auto& { return c.model.solver.newton_tol; }));
    t.push_back(integer("model", "newton_max_iter", [](C& c) -> auto& { return c.model.solver.newton_max_iter; }));
    t.push_back(
        integer("model", "fixed_point_max_iter", [](C& c) -> auto& { return c.model.solver.fixed_point_max_iter; }));

    add_field_spec(t, "initial", "N0", [](C& c) -> FieldSpec& { return c.N0; });
    add_field_spec(t, "initial", "C0", [](C& c) -> FieldSpec& { return c.C0; });

    {
      Binding b{"target", "kind", {}, {}};
      b.read = [](C& c, const std::string& v, const fs::path&, Errors& e) {
        if (v == "fields") c.target.kind = TargetSpec::Kind::Fields;
        else if (v == "trajectory") c.target.kind = TargetSpec::Kind::Trajectory;
        else if (v == "forward") c.target.kind = TargetSpec::Kind::Forward;
        else e.push_back("[target] kind: expected fields, trajectory or forward, got '" + v + "'");
      };
      b.write = [](C& c) { return target_name(c.target.kind); };
      t.push_back(b);
    }
    add_field_spec(t, "target", "Nd", [](C& c) -> FieldSpec& { return c.target.Nd; });
    add_field_spec(t, "target", "Cd", [](C& c) -> FieldSpec& { return c.target.Cd; });
    t.push_back(path("target", "trajectory", [](C& c) -> auto& { return c.target.trajectory; }));
    t.push_back(real("target", "f_dagger", [](C& c) -> auto& { return c.target.f_dagger; }));

    t.push_back(real("control", "f_min", [](C& c) -> auto& { return c.control.f_min; }));
    t.push_back(real("control", "f_max", [](C& c) -> auto& { return c.control.f_max; }));
    {
      Binding b{"control", "rects", {}, {}};
      b.read = [](C& c, const std::string& v, const fs::path&, Errors& e) {
        c.control.rects.clear();
        if (v == "none") return;
        std::istringstream is(v);
        std::string item;
        while (std::getline(is, item, ',')) {
          const auto tok = split_ws(item);
          std::array<double, 4> r{};
          bool ok = tok.size() == 4;
          for (std::size_t k = 0; ok && k < 4; ++k) ok = read_double(tok[k], r[k]);
          if (!ok) {
            e.push_back("[control] rects: expected 'x0 x1 y0 y1' items separated by commas, got '" + trim(item) + "'");
            return;
          }
          c.control.rects.push_back(r);
        }
      };
      b.write = [](C& c) {
        if (c.control.rects.empty()) return std::string("none");
        std::vector<std::string> items;
        for (const auto& r : c.control.rects)
          items.push_back(format_double(r[0]) + " " + format_double(r[1]) + " " + format_double(r[2]) + " " +
                          format_double(r[3]));
        return join(items, ", ");
      };
      t.push_back(b);
    }
    t.push_back(path("control", "mask_file", [](C& c) -> auto& { return c.control.mask_file; }));
    t.push_back(real("control", "initial", [](C& c) -> auto& { return c.control.initial; }));
    t.push_back(path("control", "initial_dir", [](C& c) -> auto& { return c.control.initial_dir; }));

    t.push_back(real("optimizer", "sigma", [](C& c) -> auto& { return c.optimizer.sigma; }));
    t.push_back(real("optimizer", "tau0", [](C& c) -> auto& { return c.optimizer.tau0; }));
    t.push_back(real("optimizer", "backtrack", [](C& c) -> auto& { return c.optimizer.backtrack; }));
    t.push_back(integer("optimizer", "max_backtracks", [](C& c) -> auto& { return c.optimizer.max_backtracks; }));
    t.push_back(real("optimizer", "stationarity_tol", [](C& c) -> auto& { return c.optimizer.stationarity_tol; }));
    t.push_back(real("optimizer", "eta", [](C& c) -> auto& { return c.optimizer.eta; }));
    t.push_back(integer("optimizer", "max_iterations", [](C& c) -> auto& { return c.optimizer.max_iterations; }));

    t.push_back(integer("gradcheck", "probes", [](C& c) -> auto& { return c.gradcheck.probes; }));
    t.push_back(real_list("gradcheck", "deltas", [](C& c) -> auto& { return c.gradcheck.deltas; }));
    t.push_back(real("gradcheck", "tolerance", [](C& c) -> auto& { return c.gradcheck.tolerance; }));
    t.push_back(real("gradcheck", "abs_floor", [](C& c) -> auto& { return c.gradcheck.abs_floor; }));
    t.push_back(text("gradcheck", "control", [](C& c) -> auto& { return c.gradcheck.control; }));
    t.push_back(real("gradcheck", "min_abs", [](C& c) -> auto& { return c.gradcheck.min_abs; }));
    t.push_back(real("gradcheck", "max_abs", [](C& c) -> auto& { return c.gradcheck.max_abs; }));
    t.push_back(flag("gradcheck", "include_outside", [](C& c) -> auto& { return c.gradcheck.include_outside; }));

    t.push_back(integer("sweep", "samples", [](C& c) -> auto& { return c.sweep.samples; }));
    t.push_back(text("sweep", "f_sign", [](C& c) -> auto& { return c.sweep.f_sign; }));
    t.push_back(real("sweep", "alpha_max", [](C& c) -> auto& { return c.sweep.alpha_max; }));
    t.push_back(real("sweep", "beta_max", [](C& c) -> auto& { return c.sweep.beta_max; }));
    t.push_back(real_list("sweep", "eps_values", [](C& c) -> auto& { return c.sweep.eps_values; }));

    t.push_back(text("eoc", "preset", [](C& c) -> auto& { return c.eoc.preset; }));
    t.push_back(integer("eoc", "base_steps", [](C& c) -> auto& { return c.eoc.base_steps; }));
    t.push_back(integer("eoc", "refinements", [](C& c) -> auto& { return c.eoc.refinements; }));
    t.push_back(integer("eoc", "reference_factor", [](C& c) -> auto& { return c.eoc.reference_factor; }));
    t.push_back(real("eoc", "eoc_min", [](C& c) -> auto& { return c.eoc.eoc_min; }));
    t.push_back(real("eoc", "eoc_max", [](C& c) -> auto& { return c.eoc.eoc_max; }));

    t.push_back(text("output", "dir", [](C& c) -> auto& { return c.output.dir; }));
    t.push_back(integer("output", "csv_max_cells", [](C& c) -> auto& { return c.output.csv_max_cells; }));

    t.push_back(integer("run", "seed", [](C& c) -> auto& { return c.run.seed; }));
    t.push_back(integer("run", "workers", [](C& c) -> auto& { return c.run.workers; }));
    return t;
  }();
  return table;
}

void check_field_spec(const FieldSpec& s, const std::string& name, bool density, Errors& e) {
  if (s.kind == FieldSpec::Kind::File) {
    if (s.file.empty()) e.push_back(name + "_file must be set when " + name + "_kind = file");
    else if (!fs::is_regular_file(s.file)) e.push_back(name + "_file not found: " + s.file);
  }
  if (s.kind == FieldSpec::Kind::Bump && !(s.width > 0.0)) e.push_back(name + "_width must be > 0");
  if (density && (s.kind == FieldSpec::Kind::Constant || s.kind == FieldSpec::Kind::Cosine)) {
    const double lo = s.value - (s.kind == FieldSpec::Kind::Cosine ? std::abs(s.amplitude) : 0.0);
    const double hi = s.value + (s.kind == FieldSpec::Kind::Cosine ? std::abs(s.amplitude) : 0.0);
    if (lo < 0.0 || hi > 1.0) e.push_back(name + " out of [0,1]");
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join(errors, "; ")), errors_(std::move(errors)) {}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  Errors e;
  if (c.grid.nx < 1) e.push_back("nx must be ≥ 1");
  if (c.grid.ny < 1) e.push_back("ny must be ≥ 1");
  if (!(c.grid.lx > 0.0)) e.push_back("lx must be > 0");
  if (!(c.grid.ly > 0.0)) e.push_back("ly must be > 0");
  const ModelParams& m = c.model;
  if (m.alpha < 0.0) e.push_back("alpha must be ≥ 0");
  if (m.beta < 0.0) e.push_back("beta must be ≥ 0");
  if (m.eps < 0.0) e.push_back("eps must be ≥ 0");
  if (!(m.T > 0.0)) e.push_back("T must be > 0");
  if (m.n_steps < 1) e.push_back("n_steps must be ≥ 1");
  if (m.gamma_N < 0.0) e.push_back("gamma_N must be ≥ 0");
  if (m.gamma_C < 0.0) e.push_back("gamma_C must be ≥ 0");
  if (m.gamma_f < 0.0) e.push_back("gamma_f must be ≥ 0");
  if (!(m.solver.newton_tol > 0.0)) e.push_back("newton_tol must be > 0");
  if (m.solver.newton_max_iter < 1) e.push_back("newton_max_iter must be ≥ 1");
  if (m.solver.fixed_point_max_iter < 0) e.push_back("fixed_point_max_iter must be ≥ 0");

  check_field_spec(c.N0, "N0", true, e);
  check_field_spec(c.C0, "C0", false, e);
  if (c.C0.kind == FieldSpec::Kind::Constant && c.C0.value < 0.0) e.push_back("C0 negative");
  if (c.target.kind == TargetSpec::Kind::Fields) {
    check_field_spec(c.target.Nd, "Nd", false, e);
    check_field_spec(c.target.Cd, "Cd", false, e);
  }
  if (c.target.kind == TargetSpec::Kind::Trajectory) {
    if (c.target.trajectory.empty()) e.push_back("trajectory must be set when [target] kind = trajectory");
    else if (!fs::is_regular_file(fs::path(c.target.trajectory) / "meta"))
      e.push_back("target trajectory not found: " + c.target.trajectory);
  }

  if (!(c.control.f_min <= c.control.f_max)) e.push_back("f_min must be ≤ f_max");
  if (!c.control.mask_file.empty() && !fs::is_regular_file(c.control.mask_file))
    e.push_back("mask_file not found: " + c.control.mask_file);
  if (!c.control.initial_dir.empty() && !fs::is_regular_file(fs::path(c.control.initial_dir) / "meta"))
    e.push_back("initial_dir not found: " + c.control.initial_dir);
  if (c.control.initial < c.control.f_min || c.control.initial > c.control.f_max)
    e.push_back("initial control outside [f_min, f_max]");
  if (c.target.kind == TargetSpec::Kind::Forward &&
      (c.target.f_dagger < c.control.f_min || c.target.f_dagger > c.control.f_max))
    e.push_back("f_dagger outside [f_min, f_max]");

  const OptimizerOptions& o = c.optimizer;
  if (!(o.sigma > 0.0 && o.sigma < 1.0)) e.push_back("sigma must be in (0,1)");
  if (!(o.tau0 > 0.0)) e.push_back("tau0 must be > 0");
  if (!(o.backtrack > 0.0 && o.backtrack < 1.0)) e.push_back("backtrack must be in (0,1)");
  if (o.max_backtracks < 0) e.push_back("max_backtracks must be ≥ 0");
  if (!(o.stationarity_tol >= 0.0)) e.push_back("stationarity_tol must be ≥ 0");
  if (!(o.eta > 0.0)) e.push_back("eta must be > 0");
  if (o.max_iterations < 0) e.push_back("max_iterations must be ≥ 0");

  const GradcheckSpec& gc = c.gradcheck;
  if (gc.probes < 1) e.push_back("probes must be ≥ 1");
  if (gc.deltas.empty()) e.push_back("deltas must list at least one step");
  for (double d : gc.deltas)
    if (!(d > 0.0)) e.push_back("deltas must be > 0");
  if (!(gc.tolerance > 0.0)) e.push_back("tolerance must be > 0");
  if (!(gc.abs_floor >= 0.0)) e.push_back("abs_floor must be ≥ 0");
  if (gc.control != "random" && gc.control != "initial") e.push_back("[gradcheck] control: expected random or initial");
  if (!(gc.min_abs >= 0.0 && gc.min_abs <= gc.max_abs)) e.push_back("min_abs must be in [0, max_abs]");

  if (c.sweep.samples < 1) e.push_back("samples must be ≥ 1");
  if (c.sweep.f_sign != "mixed" && c.sweep.f_sign != "nonnegative")
    e.push_back("[sweep] f_sign: expected mixed or nonnegative");
  if (c.sweep.alpha_max < 0.0) e.push_back("alpha_max must be ≥ 0");
  if (c.sweep.beta_max < 0.0) e.push_back("beta_max must be ≥ 0");
  if (c.sweep.eps_values.empty()) e.push_back("eps_values must list at least one value");
  for (double v : c.sweep.eps_values)
    if (v < 0.0) e.push_back("eps_values must be ≥ 0");
  if (c.sweep.f_sign == "nonnegative" && c.control.f_max < 0.0) e.push_back("f_sign = nonnegative needs f_max ≥ 0");

  const EocSpec& ec = c.eoc;
  if (ec.preset != "smooth" && ec.preset != "constant" && ec.preset != "degenerate" && ec.preset != "config")
    e.push_back("[eoc] preset: expected smooth, constant, degenerate or config");
  if (ec.base_steps < 1) e.push_back("base_steps must be ≥ 1");
  if (ec.refinements < 2) e.push_back("refinements must be ≥ 2");
  if (ec.refinements >= 2 && ec.refinements < 20 && ec.reference_factor <= (1 << (ec.refinements - 1)))
    e.push_back("reference_factor must exceed the finest refinement factor");
  if (!(ec.eoc_min <= ec.eoc_max)) e.push_back("eoc_min must be ≤ eoc_max");

  if (c.output.dir.empty()) e.push_back("output dir must be set");
  if (c.output.csv_max_cells < 0) e.push_back("csv_max_cells must be ≥ 0");
  if (c.run.workers < 1) e.push_back("workers must be ≥ 1");
  return e;
}

ExperimentConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
  const fs::path base = fs::absolute(base_dir);
  std::map<std::pair<std::string, std::string>, const Binding*> index;
  std::set<std::string> sections;
  for (const Binding& b : bindings()) {
    index[{b.section, b.key}] = &b;
    sections.insert(b.section);
  }

  ExperimentConfig cfg;
  Errors errors;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream is(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string at = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(at + "malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) errors.push_back(at + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(at + "expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      errors.push_back(at + "key '" + key + "' outside any section");
      continue;
    }
    if (!sections.count(section)) continue;
    auto it = index.find({section, key});
    if (it == index.end()) {
      errors.push_back(at + "unknown key '" + key + "' in [" + section + "]");
      continue;
    }
    if (!seen.insert({section, key}).second) {
      errors.push_back(at + "duplicate key '" + key + "' in [" + section + "]");
      continue;
    }
    Errors local;
    it->second->read(cfg, value, base, local);
    for (auto& m : local) errors.push_back(at + m);
  }
  if (errors.empty()) errors = validate_config(cfg);
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ExperimentConfig parse_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::ostringstream os;
  std::string section;
  for (const Binding& b : bindings()) {
    if (b.section != section) {
      if (!section.empty()) os << '\n';
      section = b.section;
      os << '[' << section << "]\n";
    }
    os << b.key << " = " << b.write(copy) << '\n';
  }
  return os.str();
}

GridPtr build_grid(const ExperimentConfig& cfg) {
  Grid2D g(cfg.grid.nx, cfg.grid.ny, cfg.grid.lx, cfg.grid.ly);
  if (!cfg.control.mask_file.empty()) {
    const std::vector<double> v = read_field_bin(cfg.control.mask_file);
    if (v.size() != g.cell_count()) throw ConfigError({"mask_file has the wrong number of cells"});
    std::vector<std::uint8_t> mask(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) mask[k] = v[k] != 0.0;
    g.set_control_mask(std::move(mask));
  } else {
    for (const auto& r : cfg.control.rects) g.add_control_rect(r[0], r[1], r[2], r[3]);
  }
  return make_grid(std::move(g));
}

ScalarField build_field(const FieldSpec& s, const GridPtr& grid, bool density) {
  const double lx = grid->lx(), ly = grid->ly();
  switch (s.kind) {
    case FieldSpec::Kind::Constant: return ScalarField(grid, s.value);
    case FieldSpec::Kind::Cosine:
      return ScalarField::from_function(grid, [&](double x, double y) {
        return s.value + s.amplitude * std::cos(std::numbers::pi * x / lx) * std::cos(std::numbers::pi * y / ly);
      });
    case FieldSpec::Kind::Bump:
      return ScalarField::from_function(grid, [&](double x, double y) {
        const double r2 = (x - s.center_x) * (x - s.center_x) + (y - s.center_y) * (y - s.center_y);
        const double v = s.value + s.amplitude * std::max(0.0, 1.0 - r2 / (s.width * s.width));
        return density ? std::clamp(v, 0.0, 1.0) : std::max(v, 0.0);
      });
    case FieldSpec::Kind::File: return read_field_bin(s.file, grid);
  }
  return ScalarField(grid, s.value);
}

ControlField build_initial_control(const ExperimentConfig& cfg, const GridPtr& grid) {
  if (!cfg.control.initial_dir.empty()) {
    ControlField stored = read_control(cfg.control.initial_dir);
    if (!same_grid(stored.grid(), grid) || stored.n_steps() != cfg.model.n_steps)
      throw ConfigError({"initial_dir control does not match the grid or n_steps"});
    ControlField f(grid, cfg.model.n_steps, cfg.control.f_min, cfg.control.f_max, 0.0);
    f.data() = stored.data();
    return project_control(f);
  }
  return ControlField(grid, cfg.model.n_steps, cfg.control.f_min, cfg.control.f_max, cfg.control.initial);
}

std::pair<TargetSeries, TargetSeries> build_targets(const ExperimentConfig& cfg, const GridPtr& grid,
                                                    const ScalarField& N0, const ScalarField& C0) {
  switch (cfg.target.kind) {
    case TargetSpec::Kind::Fields:
      return {TargetSeries(build_field(cfg.target.Nd, grid, false)), TargetSeries(build_field(cfg.target.Cd, grid, false))};
    case TargetSpec::Kind::Trajectory: {
      const Trajectory t = read_trajectory(cfg.target.trajectory);
      if (!same_grid(t.grid, grid) || t.params.n_steps != cfg.model.n_steps)
        throw ConfigError({"target trajectory does not match the grid or n_steps"});
      std::vector<ScalarField> nd, cd;
      for (int n = 0; n < t.levels(); ++n) {
        nd.emplace_back(grid, t.N[n].vector());
        cd.emplace_back(grid, t.C[n].vector());
      }
      return {TargetSeries(std::move(nd)), TargetSeries(std::move(cd))};
    }
    case TargetSpec::Kind::Forward: {
      const ControlField fd(grid, cfg.model.n_steps, cfg.control.f_min, cfg.control.f_max, cfg.target.f_dagger);
      const Trajectory t = run_forward(N0, C0, fd, cfg.model, make_constitutive(cfg.model.constitutive));
      return {TargetSeries::from_trajectory_N(t), TargetSeries::from_trajectory_C(t)};
    }
  }
  throw ConfigError({"unknown target kind"});
}

ControlProblem build_problem(const ExperimentConfig& cfg, const GridPtr& grid) {
  ControlProblem p;
  p.N0 = build_field(cfg.N0, grid, true);
  p.C0 = build_field(cfg.C0, grid, false);
  p.params = cfg.model;
  p.cs = make_constitutive(cfg.model.constitutive);
  auto [nd, cd] = build_targets(cfg, grid, p.N0, p.C0);
  p.Nd = std::move(nd);
  p.Cd = std::move(cd);
  return p;
}

}  // namespace chemoctrl
