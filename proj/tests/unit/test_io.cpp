#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "safekernel/errors.hpp"
#include "safekernel/io.hpp"

using namespace safekernel;
using safekernel::testing::field;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("safekernel-io-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ValueFunction sample_vf(double omega = 1.0, double offset = 0.0) {
  ValueFunction vf = field(Grid3::dubins(5.0, 11, 9, 6),
                           [=](double x, double y, double t) { return 0.1 * x - y * y / 3.0 + std::sin(t) + offset; },
                           omega);
  vf.obstacle_radius = 2.25;
  vf.residual = 3.5e-4;
  return vf;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::invalid_argument;  // sentinel: no error
}

InterventionRecord record(double x, double y, double th, std::int64_t tick) {
  return InterventionRecord::from_absolute(State(x, y, th), {10.0, -4.0, 2.25}, "session-3", tick);
}

}  // namespace

TEST(ValueFunctionIo, RoundTripIsExact) {
  TempDir tmp;
  const ValueFunction vf = sample_vf();
  save_value_function(tmp.path() / "vf.json", vf);
  const ValueFunction back = load_value_function(tmp.path() / "vf.json");
  EXPECT_EQ(back.grid, vf.grid);
  EXPECT_EQ(back.values, vf.values);
  EXPECT_EQ(back.omega_max, 1.0);
  EXPECT_EQ(back.obstacle_radius, 2.25);
  EXPECT_EQ(back.residual, 3.5e-4);
  EXPECT_TRUE(back.converged);
  EXPECT_EQ(read_json_file(tmp.path() / "vf.json").at("schema"), "vf-1");
}

TEST(ValueFunctionIo, SchemaErrors) {
  json j = value_function_to_json(sample_vf());
  json bad = j;
  bad["schema"] = "vf-2";
  EXPECT_EQ(kind_of([&] { value_function_from_json(bad); }), ErrorKind::schema);
  bad = j;
  bad.erase("values");
  EXPECT_EQ(kind_of([&] { value_function_from_json(bad); }), ErrorKind::schema);
  bad = j;
  bad["values"].erase(0);
  EXPECT_EQ(kind_of([&] { value_function_from_json(bad); }), ErrorKind::schema);
  bad = j;
  bad["grid"]["dims"] = "121";
  EXPECT_EQ(kind_of([&] { value_function_from_json(bad); }), ErrorKind::schema);
  EXPECT_EQ(kind_of([&] { load_value_function("/nonexistent/vf.json"); }), ErrorKind::io);
}

TEST(RecordIo, JsonShape) {
  const json j = record_to_json(record(12.0, -1.0, 0.5, 77));
  EXPECT_EQ(j.at("session_id"), "session-3");
  EXPECT_EQ(j.at("tick"), 77);
  EXPECT_EQ(j.at("obstacle").at("cx"), 10.0);
  EXPECT_EQ(j.at("absolute_state").at("x"), 12.0);
  EXPECT_EQ(j.at("relative_state").at("x"), 2.0);
  EXPECT_EQ(j.at("relative_state").at("y"), 3.0);
  EXPECT_EQ(j.at("relative_state").at("theta"), 0.5);
}

TEST(RecordIo, JsonlRoundTrip) {
  TempDir tmp;
  const std::vector<InterventionRecord> recs{record(1, 2, 3, 4), record(-5, 6, -0.25, 90)};
  save_records(tmp.path() / "r.jsonl", recs);
  const auto back = load_records(tmp.path() / "r.jsonl");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].absolute_state.x, recs[i].absolute_state.x);
    EXPECT_EQ(back[i].absolute_state.theta, recs[i].absolute_state.theta);
    EXPECT_EQ(back[i].relative_state.y, recs[i].relative_state.y);
    EXPECT_EQ(back[i].tick, recs[i].tick);
    EXPECT_EQ(back[i].session_id, recs[i].session_id);
  }
}

TEST(RecordIo, RelativeStateIsDerivedWhenMissing) {
  json j = record_to_json(record(12.0, -1.0, 0.5, 1));
  j.erase("relative_state");
  const InterventionRecord r = record_from_json(j);
  EXPECT_EQ(r.relative_state.x, 2.0);
  EXPECT_EQ(r.relative_state.y, 3.0);
}

TEST(RecordIo, BlankLinesAndLineNumbers) {
  std::stringstream ss;
  append_record(ss, record(1, 1, 0, 1));
  ss << "\n   \n";
  append_record(ss, record(2, 2, 0, 2));
  EXPECT_EQ(read_records(ss).size(), 2u);

  std::stringstream bad;
  append_record(bad, record(1, 1, 0, 1));
  bad << "{\"session_id\": \"x\"}\n";
  try {
    read_records(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::schema);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::stringstream garbage("not json\n");
  EXPECT_EQ(kind_of([&] { read_records(garbage); }), ErrorKind::schema);
}

TEST(FitIo, RoundTrip) {
  SupervisorFit fit;
  fit.library_index = 1;
  fit.omega_max = 0.75;
  fit.mu_hat = 0.29;
  fit.sigma2_hat = 0.0026;
  fit.log_likelihood = 310.5;
  fit.per_candidate = {{0.5, 0.1, 0.01, 100.0, true}, {0.75, 0.29, 0.0026, 310.5, true}, {1.0, 0.4, 0.02, 50.0, false}};
  fit.n_records = 200;
  fit.n_excluded = 3;
  TempDir tmp;
  save_fit(tmp.path() / "fit.json", fit);
  const json j = read_json_file(tmp.path() / "fit.json");
  EXPECT_EQ(j.at("schema"), "fit-1");
  EXPECT_EQ(j.at("selected").at("omega_max"), 0.75);
  const SupervisorFit back = load_fit(tmp.path() / "fit.json");
  EXPECT_EQ(back.library_index, 1u);
  EXPECT_EQ(back.mu_hat, 0.29);
  EXPECT_EQ(back.sigma2_hat, 0.0026);
  ASSERT_EQ(back.per_candidate.size(), 3u);
  EXPECT_FALSE(back.per_candidate[2].conservative);
  EXPECT_EQ(back.n_excluded, 3u);

  json bad = j;
  bad["selected"]["mu_hat"] = -0.1;
  EXPECT_EQ(kind_of([&] { fit_from_json(bad); }), ErrorKind::schema);
  bad = j;
  bad["selected"]["sigma2_hat"] = 0.0;
  EXPECT_EQ(kind_of([&] { fit_from_json(bad); }), ErrorKind::schema);
}

TEST(LibraryIo, RoundTrip) {
  TempDir tmp;
  LibraryDir lib;
  lib.members = {sample_vf(0.5, -0.1), sample_vf(0.75), sample_vf(1.0, 0.1)};
  lib.standard = sample_vf(1.0, 0.2);
  save_library(tmp.path() / "lib", lib);
  EXPECT_TRUE(fs::exists(tmp.path() / "lib" / "omega_0.75.json"));
  const json manifest = read_json_file(tmp.path() / "lib" / "manifest.json");
  EXPECT_EQ(manifest.at("schema"), "library-1");
  EXPECT_FALSE(manifest.contains("conservative"));
  const LibraryDir back = load_library(tmp.path() / "lib");
  ASSERT_EQ(back.members.size(), 3u);
  EXPECT_EQ(back.members[2].values, lib.members[2].values);
  ASSERT_TRUE(back.standard.has_value());
  EXPECT_EQ(back.standard->values, lib.standard->values);
  EXPECT_FALSE(back.conservative.has_value());
}

TEST(LibraryIo, RejectsUnorderedAndMixedGrids) {
  TempDir tmp;
  LibraryDir lib;
  lib.members = {sample_vf(1.0), sample_vf(0.5)};
  save_library(tmp.path() / "a", lib);
  EXPECT_EQ(kind_of([&] { load_library(tmp.path() / "a"); }), ErrorKind::schema);

  lib.members = {sample_vf(0.5), field(Grid3::dubins(5.0, 9, 9, 6), [](double, double, double) { return 0.0; }, 1.0)};
  save_library(tmp.path() / "b", lib);
  EXPECT_EQ(kind_of([&] { load_library(tmp.path() / "b"); }), ErrorKind::grid_mismatch);
  EXPECT_EQ(kind_of([&] { load_library(tmp.path() / "missing"); }), ErrorKind::io);
}

TEST(MetricsIo, RoundTrip) {
  TrialMetrics m;
  m.trips = 30;
  m.crashes = 1;
  m.interventions = 2;
  m.false_positives = 1;
  m.score = m.expected_score(ScoreRules{});
  m.intervention_log = {{10, 3, Classification::true_positive}, {900, 7, Classification::false_positive}};
  const json j = metrics_to_json(m);
  EXPECT_EQ(j.at("score"), 10);
  EXPECT_EQ(j.at("intervention_log")[1].at("classification"), "false_positive");
  const TrialMetrics back = metrics_from_json(j);
  EXPECT_EQ(back.score, 10);
  ASSERT_EQ(back.intervention_log.size(), 2u);
  EXPECT_EQ(back.intervention_log[1].classification, Classification::false_positive);
  json bad = j;
  bad["intervention_log"][0]["classification"] = "maybe";
  EXPECT_EQ(kind_of([&] { metrics_from_json(bad); }), ErrorKind::schema);
}

TEST(SliceCsv, NodesAndValues) {
  const ValueFunction vf = sample_vf();
  const double theta = vf.grid.coordinate(2, 2);
  std::stringstream ss;
  write_slice_csv(ss, vf, theta);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "x,y,V");
  int rows = 0;
  while (std::getline(ss, line)) {
    double x, y, v;
    char c1, c2;
    std::istringstream row(line);
    row >> x >> c1 >> y >> c2 >> v;
    const int ix = rows / 9, iy = rows % 9;
    EXPECT_EQ(x, vf.grid.coordinate(0, ix));
    EXPECT_EQ(y, vf.grid.coordinate(1, iy));
    EXPECT_NEAR(v, vf.at(ix, iy, 2), 1e-12);
    ++rows;
  }
  EXPECT_EQ(rows, 11 * 9);
}

TEST(JsonFile, DeterministicOutput) {
  TempDir tmp;
  const json j = {{"b", 1}, {"a", {1.5, 2.25}}};
  write_json_file(tmp.path() / "x.json", j);
  write_json_file(tmp.path() / "y.json", j);
  std::ifstream a(tmp.path() / "x.json"), b(tmp.path() / "y.json");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().back(), '\n');
  std::ofstream(tmp.path() / "bad.json") << "{";
  EXPECT_EQ(kind_of([&] { read_json_file(tmp.path() / "bad.json"); }), ErrorKind::schema);
}
