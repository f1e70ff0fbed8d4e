// Acceptance run: one line per criterion. Criteria listed in kKnownFailures
// are reported but do not change the exit code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "fractrace/experiments.hpp"

using namespace fractrace;

namespace {

const std::set<int> kKnownFailures = {4};

using RowFilter = std::function<bool(const ResultRow&)>;

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

struct Outcome {
  bool pass = true;
  int rows = 0;
  std::string detail;
};

Outcome collect(const ResultTable& t, const RowFilter& keep) {
  Outcome o;
  std::ostringstream failing;
  for (const auto& r : t.rows) {
    if (!keep(r)) continue;
    ++o.rows;
    if (!r.pass) {
      o.pass = false;
      failing << ' ' << r.quantity;
      if (!std::isnan(r.s)) failing << "@s=" << r.s;
      failing << "=" << r.value;
    }
  }
  if (o.rows == 0) {
    o.pass = false;
    o.detail = "no rows";
  } else {
    o.detail = std::to_string(o.rows) + " rows";
    if (!o.pass) o.detail += "; failing:" + failing.str();
  }
  return o;
}

std::string value_of(const ResultTable& t, const std::string& q, double s = std::nan("")) {
  const ResultRow* r = t.find(q, s);
  if (!r) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", r->value);
  return buf;
}

struct Runner {
  std::string csv_dir;
  int unexpected = 0;
  std::map<int, std::string> lines;

  ResultTable run(const std::string& name) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig c = default_config(name);
    if (!csv_dir.empty()) c.output = csv_dir + "/" + name + ".csv";
    ResultTable t = run_experiment(c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  [" << name << " " << secs << " s]\n";
    return t;
  }

  void line(int k, const std::string& title, const Outcome& o) {
    const bool known = kKnownFailures.count(k) > 0;
    std::string verdict = o.pass ? "PASS" : (known ? "FAIL (known, see notes)" : "FAIL");
    if (o.pass && known) verdict = "PASS (listed as known failure)";
    if (!o.pass && !known) ++unexpected;
    lines[k] = "criterion " + std::to_string(k) + " [" + title + "]: " + verdict + " - " + o.detail;
    std::cerr << "  " << lines[k] << '\n';
  }

  void line_error(int k, const std::string& title, const std::exception& e) {
    Outcome o;
    o.pass = false;
    o.detail = std::string("error: ") + e.what();
    line(k, title, o);
  }
};

}  // namespace

int main(int argc, char** argv) {
  Runner R;
  if (argc > 1) R.csv_dir = argv[1];
  auto any = [](const ResultRow&) { return true; };

  try {
    const ResultTable kappa = R.run("exp_kappa_asymptotics");
    Outcome o = collect(kappa, any);
    o.detail += "; kappa_{2,1/2}=" + value_of(kappa, "kappa_2_half", 0.5) + ", bracket d=2 " +
                value_of(kappa, "bracket_d2") + ", d=3 " + value_of(kappa, "bracket_d3");
    R.line(1, "kappa constant", o);
  } catch (const std::exception& e) {
    R.line_error(1, "kappa constant", e);
  }

  try {
    const ResultTable trace = R.run("exp_trace_norm_convergence");
    Outcome tau = collect(trace, [](const ResultRow& r) { return starts_with(r.quantity, "tau_mass"); });
    R.line(2, "disk tau mass", tau);
    Outcome tr = collect(trace, [](const ResultRow& r) { return !starts_with(r.quantity, "tau_mass"); });
    tr.detail += "; L2^2 at s=0.95 " + value_of(trace, "l2_sq_final", 0.95) + " vs pi, seminorm^2 " +
                 value_of(trace, "semi_sq_final", 0.95) + " vs 2 pi^2";
    R.line(4, "trace-norm convergence", tr);
  } catch (const std::exception& e) {
    R.line_error(2, "disk tau mass", e);
    R.line_error(4, "trace-norm convergence", e);
  }

  try {
    const ResultTable m = R.run("exp_measure_convergence");
    Outcome o = collect(m, any);
    o.detail += "; mu_0.95(R^2)=" + value_of(m, "mass_one", 0.95);
    R.line(3, "measure convergence", o);
  } catch (const std::exception& e) {
    R.line_error(3, "measure convergence", e);
  }

  try {
    const ResultTable d = R.run("exp_douglas_identity");
    R.line(5, "Poisson kernel normalization",
           collect(d, [](const ResultRow& r) { return starts_with(r.quantity, "poisson_mass"); }));
    Outcome o = collect(d, [](const ResultRow& r) { return !starts_with(r.quantity, "poisson_mass"); });
    o.detail += "; vs/cx for bump_out " + value_of(d, "identity_bump_out", 0.5);
    R.line(7, "Douglas identity", o);
  } catch (const std::exception& e) {
    R.line_error(5, "Poisson kernel normalization", e);
    R.line_error(7, "Douglas identity", e);
  }

  ResultTable comparability;
  try {
    comparability = R.run("exp_kernel_comparability");
    Outcome o = collect(comparability, any);
    o.detail += "; spread " + value_of(comparability, "spread");
    R.line(6, "kernel comparability", o);
  } catch (const std::exception& e) {
    R.line_error(6, "kernel comparability", e);
  }

  try {
    R.line(8, "robust inequalities", collect(R.run("exp_robust_inequalities"), any));
  } catch (const std::exception& e) {
    R.line_error(8, "robust inequalities", e);
  }

  try {
    R.line(9, "diffusion recovery", collect(R.run("exp_diffusion_recovery"), any));
  } catch (const std::exception& e) {
    R.line_error(9, "diffusion recovery", e);
  }

  try {
    const ResultTable n = R.run("exp_neumann_localization");
    Outcome loc = collect(n, [](const ResultRow& r) { return starts_with(r.quantity, "local_"); });
    loc.detail += "; order " + value_of(n, "local_order_h0.1") + ", " + value_of(n, "local_order_h0.05");
    R.line(10, "local solver sanity", loc);
    Outcome nl = collect(n, [](const ResultRow& r) { return !starts_with(r.quantity, "local_"); });
    nl.detail += "; e_first/e_last fractional " + value_of(n, "final_over_first_fractional") + ", diag(4,1) " +
                 value_of(n, "final_over_first_diag41");
    R.line(11, "Neumann localization", nl);
  } catch (const std::exception& e) {
    R.line_error(10, "local solver sanity", e);
    R.line_error(11, "Neumann localization", e);
  }

  try {
    // Rerun a sampled experiment and a short Monte Carlo one with the same seed.
    Outcome o;
    o.rows = 0;
    std::ostringstream detail;
    auto compare = [&](const std::string& label, const std::string& a, const std::string& b) {
      ++o.rows;
      const bool same = a == b && !a.empty();
      o.pass = o.pass && same;
      detail << label << (same ? " identical" : " DIFFERENT") << " (" << a.size() << " bytes); ";
    };
    ExperimentConfig c = default_config("exp_kernel_comparability");
    const std::string first = comparability.rows.empty() ? exp_kernel_comparability(c).csv() : comparability.csv();
    compare("comparability", first, exp_kernel_comparability(c).csv());

    ExperimentConfig d = default_config("exp_douglas_identity");
    d.tol.rel = 0.1;
    d.functions = {"bump_out", "tent_b"};
    compare("douglas (short budget)", exp_douglas_identity(d).csv(), exp_douglas_identity(d).csv());
    o.detail = detail.str();
    R.line(12, "determinism", o);
  } catch (const std::exception& e) {
    R.line_error(12, "determinism", e);
  }

  std::ostringstream summary;
  for (const auto& [k, text] : R.lines) summary << text << '\n';
  summary << (R.unexpected == 0 ? "acceptance: all criteria pass or are documented known failures"
                                : "acceptance: " + std::to_string(R.unexpected) + " unexpected failure(s)")
          << '\n';
  std::cout << summary.str() << std::flush;
  if (!R.csv_dir.empty()) std::ofstream(R.csv_dir + "/acceptance_summary.txt") << summary.str();
  return R.unexpected == 0 ? 0 : 1;
}
