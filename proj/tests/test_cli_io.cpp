#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

#include "cmfg/cli_io.hpp"

using namespace cmfg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json small_config() {
  return {{"kind", "solve"},
          {"model", {{"kind", "linear"}}},
          {"eps", 0.5},
          {"r", 20.0},
          {"sigma", 1.0},
          {"L", 5.0},
          {"nx", 49},
          {"nt", 50},
          {"T", 1.0},
          {"m0", {{"type", "uniform"}, {"a", 0.5}, {"b", 1.5}, {"mass", 1.0}}},
          {"terminal", {{"c3", 0.05}}},
          {"seed", 3}};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("cmfg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path / name) << content;
    return path / name;
  }
  static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config round trip and validation") {
  const auto c = ScenarioConfig::from_json(small_config());
  CHECK(c.kind == RunKind::Solve);
  CHECK(c.c3.has_value());
  CHECK(ScenarioConfig::from_json(c.to_json()).to_json() == c.to_json());
  auto inf = small_config();
  inf["kind"] = "infinite_solve";
  inf["T_list"] = {1.0, 2.0};
  const auto ci = ScenarioConfig::from_json(inf);
  CHECK(ScenarioConfig::from_json(ci.to_json()).to_json() == ci.to_json());
  for (const char* k : {"solve", "infinite_solve", "kernel", "master_residual", "uniqueness_probe", "fp_validate",
                        "mc_validate"})
    CHECK(to_string(run_kind_from_string(k)) == k);

  auto bad = [](auto mutate) {
    auto j = small_config();
    mutate(j);
    return j;
  };
  CHECK_THROWS(ScenarioConfig::from_json(bad([](json& j) { j["sigma"] = -1.0; })));
  CHECK_THROWS(ScenarioConfig::from_json(bad([](json& j) { j["nx"] = 2; })));
  CHECK_THROWS(ScenarioConfig::from_json(bad([](json& j) { j["kind"] = "teleport"; })));
  CHECK_THROWS(ScenarioConfig::from_json(bad([](json& j) { j["sigmaa"] = 1.0; })));
  CHECK_THROWS(ScenarioConfig::from_json(bad([](json& j) { j.erase("r"); })));
  CHECK_THROWS(ScenarioConfig::from_json(bad([](json& j) { j["damping"] = 1.5; })));
  CHECK_THROWS(ScenarioConfig::from_json(bad([](json& j) { j["kind"] = "infinite_solve"; })));
  CHECK_THROWS(ScenarioConfig::from_json(json::array()));
}

TEST_CASE("measures from specs and csv") {
  TempDir d;
  const Grid g{5.0, 49, 1.0, 10, 1.0};
  d.write("m0.csv", "x,mass\n1.0,0.25\n2.0,0.5\n");
  const auto m = build_measure(g, {{"type", "csv"}, {"path", "m0.csv"}}, d.path);
  CHECK(m.total() == doctest::Approx(0.75));
  CHECK(m[g.nearest_node(2.0)] == 0.5);
  CHECK(build_measure(g, {{"type", "dirac"}, {"y", 1.0}, {"mass", 0.4}}, {}).total() == doctest::Approx(0.4));
  CHECK(build_measure(g, {{"type", "lognormal"}, {"mu", 0.0}, {"s", 0.5}}, {}).total() == doctest::Approx(1.0));
  CHECK_THROWS(build_measure(g, {{"type", "blob"}}, {}));
  d.write("bad.csv", "x,mass\n7.0,0.25\n");
  CHECK_THROWS(build_measure(g, {{"type", "csv"}, {"path", "bad.csv"}}, d.path));
  auto heavy = small_config();
  heavy["m0"]["mass"] = 1.5;
  CHECK_THROWS(build_problem(ScenarioConfig::from_json(heavy)));
}

TEST_CASE("sha256") {
  TempDir d;
  CHECK(sha256_file(d.write("abc.txt", "abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("solve run writes a deterministic bundle") {
  TempDir d;
  const auto cfg = d.write("c.json", small_config().dump());
  RunOptions ro;
  ro.emit_plotscript = true;
  REQUIRE(run(cfg, d.path / "a", ro) == 0);
  REQUIRE(run(cfg, d.path / "b", ro) == 0);
  for (const char* f : {"u.csv", "m.csv", "eta.csv", "Q_path.csv", "terminal.csv", "diagnostics.json",
                        "assumptions.json", "plot.gp"}) {
    CHECK(fs::exists(d.path / "a" / f));
    CHECK(slurp(d.path / "a" / f) == slurp(d.path / "b" / f));
  }
  const auto manifest = json::parse(slurp(d.path / "a" / "manifest.json"));
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["status"] == "ok");
  CHECK(manifest.contains("version"));
  CHECK(manifest.contains("wall_time_s"));
  CHECK(manifest["files"]["u.csv"] == sha256_file(d.path / "a" / "u.csv"));
  const auto diag = json::parse(slurp(d.path / "a" / "diagnostics.json"));
  for (const auto& c : diag["checks"]) {
    CHECK(c["pass"] == true);
    CHECK(c["refs"]["u.csv"] == manifest["files"]["u.csv"]);
  }
  CHECK(slurp(d.path / "a" / "u.csv").rfind("t,x,u,ux\n", 0) == 0);
}

TEST_CASE("seed override") {
  TempDir d;
  const auto cfg = d.write("c.json", small_config().dump());
  RunOptions ro;
  ro.seed = 99;
  ro.validate_only = true;
  REQUIRE(run(cfg, d.path / "o", ro) == 0);
  CHECK(json::parse(slurp(d.path / "o" / "manifest.json"))["seed"] == 99);
}

TEST_CASE("validate-only writes the assumption report") {
  TempDir d;
  const auto cfg = d.write("c.json", small_config().dump());
  RunOptions ro;
  ro.validate_only = true;
  CHECK(run(cfg, d.path / "o", ro) == 0);
  CHECK(fs::exists(d.path / "o" / "assumptions.json"));
  CHECK_FALSE(fs::exists(d.path / "o" / "u.csv"));
}

TEST_CASE("exit codes") {
  TempDir d;
  const auto broken = d.write("broken.json", "{\"kind\": \"solve\", ");
  CHECK(run(broken, d.path / "x", {}) == 2);
  CHECK_FALSE(fs::exists(d.path / "x"));

  auto neg = small_config();
  neg["r"] = -1.0;
  CHECK(run(d.write("neg.json", neg.dump()), d.path / "y", {}) == 2);
  CHECK_FALSE(fs::exists(d.path / "y"));

  auto slow = small_config();
  slow["max_iter"] = 1;
  slow["tol"] = 1e-14;
  CHECK(run(d.write("slow.json", slow.dump()), d.path / "z", {}) == 3);
  const auto m = json::parse(slurp(d.path / "z" / "manifest.json"));
  CHECK(m["status"] == "nonconvergence");
  CHECK(m["exit_code"] == 3);
  CHECK(m["residual_history"].size() == 1);

  // a directory squatting on an output file name
  fs::create_directories(d.path / "w" / "u.csv");
  CHECK(run(d.write("ok.json", small_config().dump()), d.path / "w", {}) == 4);
  CHECK(json::parse(slurp(d.path / "w" / "manifest.json"))["exit_code"] == 4);
}

TEST_CASE("validation run kinds") {
  TempDir d;
  auto fp = small_config();
  fp["kind"] = "fp_validate";
  fp["eps"] = 0.0;
  fp["nx"] = 99;
  fp["nt"] = 200;
  fp["T"] = 0.5;
  fp["m0"] = {{"type", "mollified_dirac"}, {"y", 1.5}, {"width", 0.2}};
  fp["fp"] = {{"density_tolerance", 2e-2}};
  CHECK(run(d.write("fp.json", fp.dump()), d.path / "fp", {}) == 0);
  auto diag = json::parse(slurp(d.path / "fp" / "diagnostics.json"));
  for (const auto& c : diag["checks"]) CHECK(c["pass"] == true);

  auto mc = fp;
  mc["kind"] = "mc_validate";
  mc.erase("fp");
  mc["mc"] = {{"n_paths", 20000}, {"dt", 1e-3}};
  CHECK(run(d.write("mc.json", mc.dump()), d.path / "mc", {}) == 0);
  diag = json::parse(slurp(d.path / "mc" / "diagnostics.json"));
  for (const auto& c : diag["checks"]) CHECK(c["pass"] == true);
  CHECK(fs::exists(d.path / "mc" / "survival.csv"));

  auto mr = small_config();
  mr["kind"] = "master_residual";
  mr["kernel"] = {{"write_kernels", true}};
  CHECK(run(d.write("mr.json", mr.dump()), d.path / "mr", {}) == 0);
  CHECK(fs::exists(d.path / "mr" / "residual.csv"));
  CHECK(fs::exists(d.path / "mr" / "kernel.csv"));

  auto kg = small_config();
  kg["kind"] = "kernel";
  kg["kernel"] = {{"geometric", {{"y_max", 2.0}, {"count", 6}}}};
  CHECK(run(d.write("kg.json", kg.dump()), d.path / "kg", {}) == 0);
  CHECK(fs::exists(d.path / "kg" / "kernel_bounds.json"));

  auto up = small_config();
  up["kind"] = "uniqueness_probe";
  up["probe"] = {{"n_starts", 3}};
  CHECK(run(d.write("up.json", up.dump()), d.path / "up", {}) == 0);
  CHECK(json::parse(slurp(d.path / "up" / "uniqueness.json"))["converged"] == 3);

  auto ih = small_config();
  ih["kind"] = "infinite_solve";
  ih["T_list"] = {1.0, 2.0};
  CHECK(run(d.write("ih.json", ih.dump()), d.path / "ih", {}) == 0);
  CHECK(fs::exists(d.path / "ih" / "tail.json"));
}
