#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fractrace/experiments.hpp"

using namespace fractrace;
using std::numbers::pi;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fractrace_test_" + name)).string();
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string p = temp_path(name);
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream b;
  b << in.rdbuf();
  return b.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfgs = parse_run_config(R"J({"experiments": [
    {"name": "exp_measure_convergence", "s_grid": [0.5, 0.9], "tolerance": {"rel": 1e-9},
     "functions": ["one"], "output": "m.csv", "seed": 5, "domain": "disk(c=(0;0),R=1)"},
    {"name": "exp_kappa_asymptotics"}]})J");
  REQUIRE(cfgs.size() == 2);
  CHECK(cfgs[0].s_grid == std::vector<double>{0.5, 0.9});
  CHECK(cfgs[0].tol.rel == 1e-9);
  CHECK(cfgs[0].seed == 5);
  CHECK(cfgs[0].functions == std::vector<std::string>{"one"});
  CHECK(cfgs[1].s_grid.size() == 19);
  CHECK(cfgs[1].s_grid.front() == 0.05);
  CHECK(cfgs[1].s_grid.back() == 0.95);

  CHECK(parse_run_config(R"({"experiments": []})").empty());
  CHECK(parse_run_config("{}").empty());

  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [], "extra": 1})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"name": "exp_kappa_asymptotics", "sgrid": [0.5]}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"name": "exp_kappa_asymptotics",
                                       "tolerance": {"relative": 1}}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"name": "exp_nothing"}]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"s_grid": [0.5]}]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"name": "exp_kappa_asymptotics", "s_grid": [0.5, 0.5]}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"name": "exp_kappa_asymptotics", "s_grid": [0.5, 1.0]}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"name": "exp_kappa_asymptotics", "h": "x"}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"experiments": [{"name": "exp_measure_convergence", "functions": ["nope"]}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config("{\"experiments\": ["), std::invalid_argument);
}

TEST_CASE("domain descriptors") {
  const Domain d = parse_domain("disk");
  CHECK(d.is_disk());
  CHECK(d.base_radius() == 1.0);
  const Domain e = parse_domain("disk(c=(0.5;-1),R=2)");
  CHECK(e.center().x() == 0.5);
  CHECK(e.center().y() == -1.0);
  CHECK(e.base_radius() == 2.0);
  const Domain s = parse_domain("star(c=(0;0),r0=1,k3=0.1/0)");
  CHECK_FALSE(s.is_disk());
  CHECK(s.profile(0.0) == doctest::Approx(1.1));
  // Descriptors written by Domain parse back to the same shape.
  CHECK(parse_domain(s.descriptor()).descriptor() == s.descriptor());
  CHECK(parse_domain(e.descriptor()).descriptor() == e.descriptor());
  CHECK_THROWS_AS(parse_domain("square"), std::invalid_argument);
  CHECK_THROWS_AS(parse_domain("disk(c=(0;0),R=x)"), std::invalid_argument);
  CHECK_THROWS_AS(parse_domain("star(c=(0;0),k3=0.1/0)"), std::invalid_argument);
}

TEST_CASE("result table rows and csv") {
  ResultTable t{"demo", {}};
  t.check(0.5, "a", 1.01, 1.0, 0.02);
  t.check(0.5, "b", 1.03, 1.0, 0.02);
  t.check(std::nan(""), "zero", 1e-3, 0.0, 1e-3);
  t.flag(std::nan(""), "f", true);
  t.at_least(std::nan(""), "order", 1.9, 1.8);
  t.below(std::nan(""), "spread", 10.0, 10.0);
  CHECK(t.rows[0].pass);
  CHECK(t.rows[0].rel_dev == doctest::Approx(0.01));
  CHECK_FALSE(t.rows[1].pass);
  CHECK(t.rows[2].pass);
  CHECK(t.rows[4].pass);
  CHECK_FALSE(t.rows[5].pass);
  CHECK_FALSE(t.passed());
  CHECK(t.find("a", 0.5) == &t.rows[0]);
  CHECK(t.find("f") == &t.rows[3]);
  CHECK(t.find("a") == nullptr);

  // NaN deviations never pass.
  ResultTable u{"demo", {}};
  u.check_dev(0.5, "nan", 1.0, 1.0, std::nan(""), 1.0);
  CHECK_FALSE(u.passed());

  const std::string csv = t.csv();
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "experiment,s,quantity,value,reference,rel_dev,err_est,pass");
  std::getline(in, line);
  CHECK(line.rfind("demo,0.5,a,1.01", 0) == 0);
  CHECK(line.find(",true") != std::string::npos);
  int n = 1;
  while (std::getline(in, line)) ++n;
  CHECK(n == 6);
  CHECK(ResultTable{"empty", {}}.csv() == ResultTable::csv_header() + "\n");

  // 17 significant digits, NaN as an empty field.
  ResultTable v{"demo", {}};
  v.report(0.1, "x", 1.0 / 3.0);
  CHECK(v.csv().find("demo,0.10000000000000001,x,0.33333333333333331,,,,true") != std::string::npos);
}

TEST_CASE("every threshold comes from the criteria constants") {
  CHECK(criteria::kMeasureFinal == 0.05);
  CHECK(criteria::kTraceL2Final == 0.02);
  CHECK(criteria::kTraceSemiFinal == 0.10);
  CHECK(criteria::kDouglasBand == 0.10);
  CHECK(criteria::kRatioSpread == 10.0);
  CHECK(criteria::kComparabilitySpread == 1e3);

  ExperimentConfig c = default_config("exp_kappa_asymptotics");
  const ResultTable t = exp_kappa_asymptotics(c);
  const ResultRow* r = t.find("kappa_2_half", 0.5);
  REQUIRE(r != nullptr);
  CHECK(r->rel_dev <= criteria::kKappaHalf);
  CHECK(r->reference == doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-15));
  CHECK(t.passed());
}

TEST_CASE("registry") {
  const auto& reg = experiment_registry();
  CHECK(reg.size() == 8);
  for (const auto& e : reg) {
    const ExperimentConfig c = default_config(e.name);
    CHECK(c.name == e.name);
    CHECK_NOTHROW(c.validate());
    CHECK_FALSE(c.s_grid.empty());
  }
  CHECK_THROWS_AS(default_config("exp_missing"), std::invalid_argument);
  ExperimentConfig c;
  c.name = "exp_missing";
  CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
}

TEST_CASE("measure experiment") {
  ExperimentConfig c = default_config("exp_measure_convergence");
  const ResultTable t = exp_measure_convergence(c);
  CHECK(t.passed());
  const ResultRow* r = t.find("mass_one", 0.5);
  REQUIRE(r != nullptr);
  CHECK(r->value == doctest::Approx(2.0 * pi * (1.0 + 0.5 / 1.5)).epsilon(1e-9));

  // A grid ending at s = 0.6 is still monotone but fails the final deviation.
  c.s_grid = {0.3, 0.45, 0.6};
  c.functions = {"one"};
  const ResultTable early = exp_measure_convergence(c);
  CHECK_FALSE(early.passed());
  CHECK(early.find("tail_monotone_one")->pass);
  CHECK_FALSE(early.find("final_dev_one", 0.6)->pass);
}

TEST_CASE("diffusion experiment") {
  const ResultTable t = exp_diffusion_recovery(default_config("exp_diffusion_recovery"));
  CHECK(t.passed());
  CHECK(std::abs(t.find("a12_diag41")->value) <= 1e-12);
  CHECK(t.find("a11_diag41")->reference == 4.0);
}

TEST_CASE("run_config_file exit codes and determinism") {
  std::ostringstream log;
  CHECK(run_config_file(write_temp("empty.json", R"({"experiments": []})"), log) == 0);
  CHECK(run_config_file(write_temp("bad.json", R"({"experiments": [{"name": "x"}]})"), log) == 2);
  CHECK(run_config_file(write_temp("badkey.json", R"({"runs": []})"), log) == 2);
  CHECK(run_config_file(temp_path("does_not_exist.json"), log) == 2);

  const std::string out1 = temp_path("k1.csv");
  const std::string out2 = temp_path("k2.csv");
  const std::string ok = R"({"experiments": [{"name": "exp_kappa_asymptotics", "output": ")" + out1 + R"("}]})";
  CHECK(run_config_file(write_temp("ok.json", ok), log) == 0);
  // A grid that ends early fails the final-deviation row: exit 1.
  const std::string failing = R"({"experiments": [{"name": "exp_measure_convergence", "s_grid": [0.3, 0.4, 0.5],
    "functions": ["one"]}]})";
  CHECK(run_config_file(write_temp("fail.json", failing), log) == 1);

  const std::string again = R"({"experiments": [{"name": "exp_kappa_asymptotics", "output": ")" + out2 + R"("}]})";
  CHECK(run_config_file(write_temp("again.json", again), log) == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK_FALSE(slurp(out1).empty());
}
