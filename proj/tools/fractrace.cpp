#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fractrace/experiments.hpp"
#include "fractrace/geometry.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fractrace: verification experiments for nonlocal trace spaces"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiments of a JSON config; exit 0 iff all rows pass");
  run->add_option("config", config_path, "Path to the config file")->required();

  auto* list = app.add_subcommand("list", "List the registered experiments");

  std::string domain = "disk";
  double R = 3.0;
  double h = 0.2;
  std::string out_path;
  auto* mesh = app.add_subcommand("mesh", "Write a mesh of the truncation ball");
  mesh->set_help_flag("--help", "Print this help message and exit");
  mesh->add_option("--domain", domain, "Domain descriptor")->capture_default_str();
  mesh->add_option("--R", R, "Truncation radius")->capture_default_str();
  mesh->add_option("--h", h, "Mesh width at the boundary")->capture_default_str();
  mesh->add_option("--out", out_path, "Output file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return fractrace::run_config_file(config_path, std::cout);
    if (*list) {
      for (const auto& e : fractrace::experiment_registry()) std::cout << e.name << "  " << e.summary << '\n';
      return 0;
    }
    if (*mesh) {
      const fractrace::Mesh m = fractrace::build_mesh(fractrace::parse_domain(domain), R, h);
      if (out_path.empty()) {
        fractrace::write_mesh(std::cout, m);
      } else {
        std::ofstream out(out_path);
        if (!out) {
          std::cerr << "cannot write " << out_path << '\n';
          return 2;
        }
        fractrace::write_mesh(out, m);
      }
      std::cerr << m.vertices.size() << " vertices, " << m.triangles.size() << " triangles\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
