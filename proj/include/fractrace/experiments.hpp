#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "fractrace/geometry.hpp"
#include "fractrace/quadrature.hpp"

namespace fractrace {

/// Pass thresholds of the verification experiments. Every ResultTable pass
/// flag is computed from these values.
namespace criteria {
inline constexpr double kKappaHalf = 1e-12;          // kappa_{2,1/2} = 1/(2 pi)
inline constexpr double kTauMass = 1e-6;             // disk tau_s mass, closed form
inline constexpr double kMeasureClosedForm = 1e-6;   // mu_s against its closed form
inline constexpr double kMeasureFinal = 0.05;        // mu_s at the last s against sigma
inline constexpr double kTraceL2Final = 0.02;        // L^2(tau_s) part against pi
inline constexpr double kTraceSemiFinal = 0.10;      // trace seminorm against 2 pi^2
inline constexpr double kPoissonMass = 1e-4;         // int P(z, .) = 1
inline constexpr double kComparabilitySpread = 1e3;  // upper / lower kernel constant
inline constexpr double kKernelSymmetry = 1e-6;      // k*(x,y) against k*(y,x), tight tolerance
inline constexpr double kDouglasBand = 0.10;         // |A - B| <= band (A + B)
inline constexpr double kRatioSpread = 10.0;         // max / min of a ratio over s
inline constexpr double kHardyClosedForm = 1e-6;     // u = 1 Hardy numerator
inline constexpr double kDiffusion = 0.05;           // recovered a_ij, relative to max |A|
inline constexpr double kDeltaIndependence = 0.02;   // delta = 0.25 against 0.5
inline constexpr double kLocalOrder = 1.8;           // observed L^2 order, local solver
inline constexpr double kInversion = 0.05;           // one allowed increase of e_n
inline constexpr double kFinalReduction = 0.5;       // e_last <= kFinalReduction e_first
}  // namespace criteria

struct ExperimentConfig {
  std::string name;
  std::string domain = "disk";
  std::vector<double> s_grid;
  double h = 0.1;
  double R = 3.0;
  Tolerance tol;
  std::vector<std::string> functions;
  std::string output;  // CSV path; empty writes nothing
  std::uint64_t seed = 20240607;

  /// Strictly increasing s-grid inside (0, 1), positive h and R.
  void validate() const;
};

/// Defaults for a named experiment; throws std::invalid_argument for unknown names.
ExperimentConfig default_config(const std::string& name);

/// "disk", "disk(c=(x;y),R=r)" or "star(c=(x;y),r0=r,k3=a/b,...)".
Domain parse_domain(const std::string& descriptor);

struct ResultRow {
  std::string experiment;
  double s = std::numeric_limits<double>::quiet_NaN();
  std::string quantity;
  double value = 0.0;
  double reference = std::numeric_limits<double>::quiet_NaN();
  double rel_dev = std::numeric_limits<double>::quiet_NaN();
  double err_est = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
};

struct ResultTable {
  std::string experiment;
  std::vector<ResultRow> rows;

  /// Reporting row, always passing.
  ResultRow& report(double s, const std::string& quantity, double value, double err = std::nan(""));
  /// Row checked against a reference: pass iff rel_dev <= limit. rel_dev is
  /// |value - reference| / |reference|, or the absolute deviation for a zero reference.
  ResultRow& check(double s, const std::string& quantity, double value, double reference, double limit,
                   double err = std::nan(""));
  /// Row with a precomputed deviation measure.
  ResultRow& check_dev(double s, const std::string& quantity, double value, double reference, double dev,
                       double limit, double err = std::nan(""));
  /// Boolean criterion stored as value 1 or 0.
  ResultRow& flag(double s, const std::string& quantity, bool ok);
  /// pass iff value >= minimum (reference column holds the bound).
  ResultRow& at_least(double s, const std::string& quantity, double value, double minimum);
  /// pass iff value < maximum (reference column holds the bound).
  ResultRow& below(double s, const std::string& quantity, double value, double maximum);

  bool passed() const;
  const ResultRow* find(const std::string& quantity, double s = std::nan("")) const;

  static std::string csv_header();
  /// Header plus one line per row; 17 significant digits, NaN as an empty field.
  std::string csv() const;
};

ResultTable exp_kappa_asymptotics(const ExperimentConfig& cfg);
ResultTable exp_measure_convergence(const ExperimentConfig& cfg);
ResultTable exp_trace_norm_convergence(const ExperimentConfig& cfg);
ResultTable exp_kernel_comparability(const ExperimentConfig& cfg);
ResultTable exp_douglas_identity(const ExperimentConfig& cfg);
ResultTable exp_robust_inequalities(const ExperimentConfig& cfg);
ResultTable exp_diffusion_recovery(const ExperimentConfig& cfg);
ResultTable exp_neumann_localization(const ExperimentConfig& cfg);

using ExperimentFn = std::function<ResultTable(const ExperimentConfig&)>;

struct ExperimentEntry {
  std::string name;
  std::string summary;
  ExperimentFn run;
};

const std::vector<ExperimentEntry>& experiment_registry();

/// Looks the experiment up by name and runs it; writes cfg.output when set.
ResultTable run_experiment(const ExperimentConfig& cfg);

/// Parses a run file {"experiments": [{...}, ...]}. Unknown keys and names
/// raise std::invalid_argument.
std::vector<ExperimentConfig> parse_run_config(const std::string& json_text);

/// Runs every configured experiment in order; returns 0 iff all rows pass,
/// 1 on a failing row, 2 on a configuration error. Progress goes to log.
int run_config_file(const std::string& path, std::ostream& log);

}  // namespace fractrace
