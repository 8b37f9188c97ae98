#include "safekernel/io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include "safekernel/errors.hpp"

namespace safekernel {

using nlohmann::json;

namespace {

json state_json(const State& s) { return {{"x", s.x}, {"y", s.y}, {"theta", s.theta}}; }

// Dispatches nlohmann type/key errors into schema errors with context.
template <class F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string(what) + ": " + e.what());
  }
}

State state_from(const json& j) {
  return State(j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>());
}

void expect_schema(const json& j, const char* schema) {
  if (!j.is_object() || !j.contains("schema") || j.at("schema") != schema) {
    throw Error(ErrorKind::schema, std::string("expected a ") + schema + " document");
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path.string());
  return is;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::schema, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j, int indent) {
  std::ofstream os = open_out(path);
  os << j.dump(indent) << '\n';
  if (!os) throw Error(ErrorKind::io, "write failed for " + path.string());
}

json value_function_to_json(const ValueFunction& vf) {
  const Grid3& g = vf.grid;
  return {{"schema", kValueFunctionSchema},
          {"grid", {{"mins", g.mins}, {"maxs", g.maxs}, {"dims", g.dims}, {"periodic", g.periodic}}},
          {"omega_max", vf.omega_max},
          {"obstacle_radius", vf.obstacle_radius},
          {"converged", vf.converged},
          {"residual", vf.residual},
          {"values", vf.values}};
}

ValueFunction value_function_from_json(const json& j) {
  expect_schema(j, kValueFunctionSchema);
  ValueFunction vf = guarded("vf-1", [&] {
    ValueFunction out;
    const json& g = j.at("grid");
    out.grid.mins = g.at("mins").get<std::array<double, 3>>();
    out.grid.maxs = g.at("maxs").get<std::array<double, 3>>();
    out.grid.dims = g.at("dims").get<std::array<int, 3>>();
    out.grid.periodic = g.at("periodic").get<std::array<bool, 3>>();
    out.omega_max = j.at("omega_max").get<double>();
    out.obstacle_radius = j.at("obstacle_radius").get<double>();
    out.converged = j.at("converged").get<bool>();
    out.residual = j.at("residual").get<double>();
    out.values = j.at("values").get<std::vector<double>>();
    return out;
  });
  try {
    vf.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::schema, std::string("vf-1: ") + e.what());
  }
  return vf;
}

void save_value_function(const std::filesystem::path& path, const ValueFunction& vf) {
  write_json_file(path, value_function_to_json(vf), -1);
}

ValueFunction load_value_function(const std::filesystem::path& path) {
  return value_function_from_json(read_json_file(path));
}

json record_to_json(const InterventionRecord& rec) {
  return {{"session_id", rec.session_id},
          {"tick", rec.tick},
          {"obstacle", {{"cx", rec.obstacle.cx}, {"cy", rec.obstacle.cy}, {"r", rec.obstacle.r}}},
          {"absolute_state", state_json(rec.absolute_state)},
          {"relative_state", state_json(rec.relative_state)}};
}

InterventionRecord record_from_json(const json& j) {
  return guarded("intervention record", [&] {
    const json& o = j.at("obstacle");
    const KeepOutDisk disk{o.at("cx").get<double>(), o.at("cy").get<double>(), o.at("r").get<double>()};
    InterventionRecord rec = InterventionRecord::from_absolute(
        state_from(j.at("absolute_state")), disk, j.at("session_id").get<std::string>(),
        j.at("tick").get<std::int64_t>());
    if (j.contains("relative_state")) rec.relative_state = state_from(j.at("relative_state"));
    return rec;
  });
}

void append_record(std::ostream& os, const InterventionRecord& rec) { os << record_to_json(rec).dump() << '\n'; }

std::vector<InterventionRecord> read_records(std::istream& is) {
  std::vector<InterventionRecord> out;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::schema, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_records(const std::filesystem::path& path, std::span<const InterventionRecord> records) {
  std::ofstream os = open_out(path);
  for (const InterventionRecord& r : records) append_record(os, r);
  if (!os) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::vector<InterventionRecord> load_records(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  return read_records(is);
}

json fit_to_json(const SupervisorFit& fit) {
  json candidates = json::array();
  for (const CandidateScore& c : fit.per_candidate) {
    candidates.push_back({{"omega_max", c.omega_max},
                          {"mu_hat", c.mu_hat},
                          {"sigma2_hat", c.sigma2_hat},
                          {"log_likelihood", c.log_likelihood},
                          {"conservative", c.conservative}});
  }
  return {{"schema", kFitSchema},
          {"selected",
           {{"library_index", fit.library_index},
            {"omega_max", fit.omega_max},
            {"mu_hat", fit.mu_hat},
            {"sigma2_hat", fit.sigma2_hat},
            {"log_likelihood", fit.log_likelihood}}},
          {"candidates", std::move(candidates)},
          {"n_records", fit.n_records},
          {"n_excluded", fit.n_excluded}};
}

SupervisorFit fit_from_json(const json& j) {
  expect_schema(j, kFitSchema);
  SupervisorFit fit = guarded("fit-1", [&] {
    SupervisorFit out;
    const json& s = j.at("selected");
    out.library_index = s.value("library_index", std::size_t{0});
    out.omega_max = s.at("omega_max").get<double>();
    out.mu_hat = s.at("mu_hat").get<double>();
    out.sigma2_hat = s.at("sigma2_hat").get<double>();
    out.log_likelihood = s.at("log_likelihood").get<double>();
    for (const json& c : j.at("candidates")) {
      out.per_candidate.push_back({c.at("omega_max").get<double>(), c.at("mu_hat").get<double>(),
                                   c.at("sigma2_hat").get<double>(), c.at("log_likelihood").get<double>(),
                                   c.value("conservative", true)});
    }
    out.n_records = j.at("n_records").get<std::size_t>();
    out.n_excluded = j.at("n_excluded").get<std::size_t>();
    return out;
  });
  if (fit.mu_hat < 0.0 || !(fit.sigma2_hat > 0.0)) {
    throw Error(ErrorKind::schema, "fit-1: mu_hat must be >= 0 and sigma2_hat > 0");
  }
  return fit;
}

void save_fit(const std::filesystem::path& path, const SupervisorFit& fit) { write_json_file(path, fit_to_json(fit)); }

SupervisorFit load_fit(const std::filesystem::path& path) { return fit_from_json(read_json_file(path)); }

void save_library(const std::filesystem::path& dir, const LibraryDir& lib) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  json members = json::array();
  for (const ValueFunction& vf : lib.members) {
    char name[64];
    std::snprintf(name, sizeof name, "omega_%.2f.json", vf.omega_max);
    save_value_function(dir / name, vf);
    members.push_back({{"omega_max", vf.omega_max}, {"file", name}});
  }
  json manifest = {{"schema", kLibrarySchema}, {"members", std::move(members)}};
  if (lib.standard) {
    save_value_function(dir / "standard.json", *lib.standard);
    manifest["standard"] = "standard.json";
  }
  if (lib.conservative) {
    save_value_function(dir / "conservative.json", *lib.conservative);
    manifest["conservative"] = "conservative.json";
  }
  write_json_file(dir / "manifest.json", manifest);
}

LibraryDir load_library(const std::filesystem::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");
  expect_schema(manifest, kLibrarySchema);
  LibraryDir lib;
  const auto files = guarded("library-1", [&] {
    std::vector<std::string> out;
    for (const json& m : manifest.at("members")) out.push_back(m.at("file").get<std::string>());
    return out;
  });
  for (const std::string& f : files) lib.members.push_back(load_value_function(dir / f));
  for (std::size_t i = 1; i < lib.members.size(); ++i) {
    if (!(lib.members[i - 1].omega_max < lib.members[i].omega_max)) {
      throw Error(ErrorKind::schema, "library members must have ascending omega_max");
    }
    if (!(lib.members[i].grid == lib.members[0].grid)) {
      throw Error(ErrorKind::grid_mismatch, "library members live on different grids");
    }
  }
  if (manifest.contains("standard")) {
    lib.standard = load_value_function(dir / manifest.at("standard").get<std::string>());
  }
  if (manifest.contains("conservative")) {
    lib.conservative = load_value_function(dir / manifest.at("conservative").get<std::string>());
  }
  return lib;
}

json metrics_to_json(const TrialMetrics& m) {
  json log = json::array();
  for (const InterventionEvent& e : m.intervention_log) {
    log.push_back({{"tick", e.tick}, {"obstacle_id", e.obstacle_id}, {"classification", to_string(e.classification)}});
  }
  return {{"trips", m.trips},
          {"crashes", m.crashes},
          {"interventions", m.interventions},
          {"false_positives", m.false_positives},
          {"score", m.score},
          {"intervention_log", std::move(log)}};
}

TrialMetrics metrics_from_json(const json& j) {
  return guarded("trial metrics", [&] {
    TrialMetrics m;
    m.trips = j.at("trips").get<int>();
    m.crashes = j.at("crashes").get<int>();
    m.interventions = j.at("interventions").get<int>();
    m.false_positives = j.at("false_positives").get<int>();
    m.score = j.at("score").get<std::int64_t>();
    for (const json& e : j.at("intervention_log")) {
      const std::string cls = e.at("classification").get<std::string>();
      if (cls != "false_positive" && cls != "true_positive") {
        throw Error(ErrorKind::schema, "unknown classification '" + cls + "'");
      }
      m.intervention_log.push_back({e.at("tick").get<std::int64_t>(), e.at("obstacle_id").get<int>(),
                                    cls == "false_positive" ? Classification::false_positive
                                                            : Classification::true_positive});
    }
    return m;
  });
}

void write_slice_csv(std::ostream& os, const ValueFunction& vf, double theta) {
  const Grid3& g = vf.grid;
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "x,y,V\n";
  for (int ix = 0; ix < g.dims[0]; ++ix) {
    for (int iy = 0; iy < g.dims[1]; ++iy) {
      const double x = g.coordinate(0, ix);
      const double y = g.coordinate(1, iy);
      os << x << ',' << y << ',' << interpolate_value(vf, State(x, y, theta)).value << '\n';
    }
  }
  os.precision(old_precision);
}

}  // namespace safekernel
