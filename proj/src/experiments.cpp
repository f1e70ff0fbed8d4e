#include "fractrace/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fractrace/kernels.hpp"
#include "fractrace/norms.hpp"
#include "fractrace/solver.hpp"

namespace fractrace {

namespace {

using std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double deviation(double value, double reference) {
  const double d = std::abs(value - reference);
  return reference == 0.0 ? d : d / std::abs(reference);
}

std::vector<double> linspace_grid(double a, double b, double step) {
  std::vector<double> g;
  for (int k = 0; a + k * step <= b + 1e-12; ++k) g.push_back(std::round((a + k * step) * 1e12) / 1e12);
  return g;
}

/// |v - limit| nonincreasing over the last three grid points.
bool monotone_tail(const std::vector<double>& dev) {
  if (dev.size() < 3) return false;
  const std::size_t n = dev.size();
  return dev[n - 3] >= dev[n - 2] && dev[n - 2] >= dev[n - 1];
}

// Test-field battery.

struct NamedField {
  ScalarField f;
  bool lifted = false;  // depends on the nearest boundary angle only
  std::vector<SamplingFocus> focus;
};

ScalarField smooth_bump(Point c, double a) {
  ScalarField f = ScalarField::supported(
      [c, a](Point x) {
        const double q = (x - c).squaredNorm() / (a * a);
        return q < 1.0 ? (1.0 - q) * (1.0 - q) : 0.0;
      },
      c, a, 1.0, 1.6 / a);
  f.gradient = [c, a](Point x) -> Point {
    const double q = (x - c).squaredNorm() / (a * a);
    if (q >= 1.0) return Point::Zero();
    return -4.0 * (1.0 - q) / (a * a) * (x - c);
  };
  return f;
}

ScalarField tent(Point c, double a) {
  return ScalarField::supported([c, a](Point x) { return std::max(0.0, 1.0 - (x - c).norm() / a); }, c, a,
                                1.0, 1.0 / a);
}

NamedField named_field(const std::string& id, const Domain& D) {
  const Point c = D.center();
  NamedField out;
  if (id == "one") {
    out.f = ScalarField::lipschitz_field([](Point) { return 1.0; }, 0.0, 1.0);
    out.lifted = true;
  } else if (id == "x1") {
    out.f = ScalarField::lipschitz_field([c](Point x) { return x.x() - c.x(); }, 1.0);
    out.f.gradient = [](Point) { return Point(1.0, 0.0); };
  } else if (id == "x1_over_r") {
    out.f = ScalarField::bounded([c](Point x) { return (x.x() - c.x()) / (x - c).norm(); }, 1.0);
    out.lifted = D.is_disk();
  } else if (id == "cos2_lifted") {
    out.f = ScalarField::bounded(
        [D](Point x) {
          const double a = std::cos(D.nearest_boundary_angle(x));
          return a * a;
        },
        1.0);
    out.lifted = true;
  } else if (id == "bump_lifted") {
    // C-infinity bump in the boundary angle around 0, half-width 1.
    out.f = ScalarField::bounded(
        [D](Point x) {
          const double t = std::remainder(D.nearest_boundary_angle(x), 2.0 * pi);
          return std::abs(t) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0;
        },
        1.0);
    out.lifted = true;
  } else if (id == "bump_out") {
    const Point p = c + Point(1.5, 0.0) * D.base_radius();
    out.f = smooth_bump(p, 0.4 * D.base_radius());
    out.focus = {{p, 0.4 * D.base_radius()}};
  } else if (id == "bump_cross") {
    const Point p = c + Point(0.8, 0.0) * D.base_radius();
    out.f = smooth_bump(p, 0.7 * D.base_radius());
    out.focus = {{p, 0.7 * D.base_radius()}};
  } else if (id == "bump_cross_b") {
    const Point p = c + Point(0.0, -0.9) * D.base_radius();
    out.f = smooth_bump(p, 0.5 * D.base_radius());
    out.focus = {{p, 0.5 * D.base_radius()}};
  } else if (id == "tent_a" || id == "tent_b" || id == "tent_c") {
    const double r = D.base_radius();
    const Point p = c + r * (id == "tent_a" ? Point(1.0, 0.0) : id == "tent_b" ? Point(0.5, 0.0) : Point(1.8, 0.3));
    const double a = r * (id == "tent_a" ? 0.8 : id == "tent_b" ? 1.2 : 1.0);
    out.f = tent(p, a);
    out.focus = {{p, a}};
  } else {
    throw std::invalid_argument("unknown test function '" + id + "'");
  }
  return out;
}

void require_disk(const Domain& D, const std::string& who) {
  if (!D.is_disk()) throw std::invalid_argument(who + ": needs a disk domain");
}

Tolerance rel_tol(double rel) {
  Tolerance t;
  t.rel = rel;
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config.

void ExperimentConfig::validate() const {
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    if (!(s_grid[k] > 0.0 && s_grid[k] < 1.0)) throw std::invalid_argument("s_grid entries must lie in (0,1)");
    if (k > 0 && !(s_grid[k] > s_grid[k - 1])) throw std::invalid_argument("s_grid must be strictly increasing");
  }
  if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
  if (!(R > 0.0)) throw std::invalid_argument("R must be positive");
  tol.validate();
}

ExperimentConfig default_config(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "exp_kappa_asymptotics") {
    c.s_grid = linspace_grid(0.05, 0.95, 0.05);
  } else if (name == "exp_measure_convergence") {
    c.s_grid = {0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
    c.tol.rel = 1e-10;
    c.functions = {"one", "cos2_lifted", "bump_lifted"};
  } else if (name == "exp_trace_norm_convergence") {
    c.s_grid = {0.5, 0.7, 0.9, 0.95};
    c.tol.rel = 1e-3;
  } else if (name == "exp_kernel_comparability") {
    c.s_grid = {0.3, 0.5, 0.7, 0.9};
    c.tol.rel = 1e-5;
  } else if (name == "exp_douglas_identity") {
    c.s_grid = {0.5};
    c.tol.rel = 0.02;
    c.functions = {"bump_out", "tent_a", "tent_b", "tent_c"};
  } else if (name == "exp_robust_inequalities") {
    c.s_grid = {0.3, 0.5, 0.7, 0.9, 0.95};
    c.tol.rel = 0.03;
    c.functions = {"bump_cross", "bump_cross_b"};
  } else if (name == "exp_diffusion_recovery") {
    c.s_grid = {0.9, 0.95, 0.99};
  } else if (name == "exp_neumann_localization") {
    c.s_grid = {0.6, 0.75, 0.9, 0.95};
    c.tol.rel = 1e-3;
  } else {
    throw std::invalid_argument("unknown experiment '" + name + "'");
  }
  return c;
}

Domain parse_domain(const std::string& text) {
  std::string d;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) d.push_back(ch);
  }
  if (d == "disk") return Domain::disk();
  static const std::regex shape(R"(^(disk|star)\(c=\(([^;]+);([^)]+)\),(.*)\)$)");
  std::smatch m;
  if (!std::regex_match(d, m, shape)) throw std::invalid_argument("malformed domain descriptor '" + text + "'");
  auto num = [&text](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw std::invalid_argument("bad number '" + s + "' in '" + text + "'");
    return v;
  };
  const Point c(num(m[2]), num(m[3]));
  std::vector<std::string> parts;
  std::stringstream rest(m[4].str());
  for (std::string p; std::getline(rest, p, ',');) parts.push_back(p);
  if (m[1] == "disk") {
    if (parts.size() != 1 || parts[0].rfind("R=", 0) != 0) {
      throw std::invalid_argument("disk descriptor needs exactly R=...: '" + text + "'");
    }
    return Domain::disk(c, num(parts[0].substr(2)));
  }
  if (parts.empty() || parts[0].rfind("r0=", 0) != 0) {
    throw std::invalid_argument("star descriptor needs r0=... first: '" + text + "'");
  }
  const double r0 = num(parts[0].substr(3));
  static const std::regex mode(R"(^k(\d+)=([^/]+)/(.+)$)");
  std::vector<FourierMode> modes;
  for (std::size_t k = 1; k < parts.size(); ++k) {
    std::smatch mm;
    if (!std::regex_match(parts[k], mm, mode)) throw std::invalid_argument("bad mode '" + parts[k] + "'");
    modes.push_back({std::stoi(mm[1]), num(mm[2]), num(mm[3])});
  }
  return Domain::star_shaped(c, r0, modes);
}

// ---------------------------------------------------------------------------
// ResultTable.

ResultRow& ResultTable::report(double s, const std::string& quantity, double value, double err) {
  ResultRow r;
  r.experiment = experiment;
  r.s = s;
  r.quantity = quantity;
  r.value = value;
  r.err_est = err;
  rows.push_back(r);
  return rows.back();
}

ResultRow& ResultTable::check(double s, const std::string& quantity, double value, double reference,
                              double limit, double err) {
  return check_dev(s, quantity, value, reference, deviation(value, reference), limit, err);
}

ResultRow& ResultTable::check_dev(double s, const std::string& quantity, double value, double reference,
                                  double dev, double limit, double err) {
  ResultRow& r = report(s, quantity, value, err);
  r.reference = reference;
  r.rel_dev = dev;
  r.pass = dev <= limit;  // false for NaN
  return r;
}

ResultRow& ResultTable::flag(double s, const std::string& quantity, bool ok) {
  ResultRow& r = report(s, quantity, ok ? 1.0 : 0.0);
  r.reference = 1.0;
  r.pass = ok;
  return r;
}

ResultRow& ResultTable::at_least(double s, const std::string& quantity, double value, double minimum) {
  ResultRow& r = report(s, quantity, value);
  r.reference = minimum;
  r.pass = value >= minimum;
  return r;
}

ResultRow& ResultTable::below(double s, const std::string& quantity, double value, double maximum) {
  ResultRow& r = report(s, quantity, value);
  r.reference = maximum;
  r.pass = value < maximum;
  return r;
}

bool ResultTable::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.pass; });
}

const ResultRow* ResultTable::find(const std::string& quantity, double s) const {
  for (const auto& r : rows) {
    if (r.quantity != quantity) continue;
    if (std::isnan(s) ? std::isnan(r.s) : (!std::isnan(r.s) && std::abs(r.s - s) < 1e-12)) return &r;
  }
  return nullptr;
}

std::string ResultTable::csv_header() { return "experiment,s,quantity,value,reference,rel_dev,err_est,pass"; }

std::string ResultTable::csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  auto field = [&os](double v) {
    if (!std::isnan(v)) os << v;
  };
  os << csv_header() << '\n';
  for (const auto& r : rows) {
    os << r.experiment << ',';
    field(r.s);
    os << ',' << r.quantity << ',';
    field(r.value);
    os << ',';
    field(r.reference);
    os << ',';
    field(r.rel_dev);
    os << ',';
    field(r.err_est);
    os << ',' << (r.pass ? "true" : "false") << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Experiments.

ResultTable exp_kappa_asymptotics(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultTable t{"exp_kappa_asymptotics", {}};
  for (int d : {2, 3}) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    const std::string tag = "_d" + std::to_string(d);
    for (double s : cfg.s_grid) {
      const double k = kappa(d, FracOrder(s));
      const double r = k / (s * (1.0 - s));
      t.report(s, "kappa" + tag, k);
      t.report(s, "kappa_over_s1ms" + tag, r);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const bool finite = std::isfinite(hi) && lo > 0.0 && std::isfinite(lo);
    ResultRow& b = t.report(kNaN, "bracket" + tag, finite ? hi / lo : kNaN);
    b.pass = finite;
  }
  t.check(0.5, "kappa_2_half", kappa(2, FracOrder(0.5)), 1.0 / (2.0 * pi), criteria::kKappaHalf);
  return t;
}

ResultTable exp_measure_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain D = parse_domain(cfg.domain);
  ResultTable t{"exp_measure_convergence", {}};
  const int n_theta = 512;
  // Collar {d_x < 1}, narrowed to the exterior ball radius when that is smaller.
  const double width = std::min(1.0, D.ball_radius());
  const BoundaryQuadrature bq = boundary_quadrature(D, 8192);
  for (const auto& id : cfg.functions) {
    const NamedField nf = named_field(id, D);
    // int_{dOmega} f dsigma, and int f dtheta for lifted fields on a disk.
    double limit = 0.0;
    double angular = 0.0;
    for (const auto& n : bq.nodes) {
      limit += n.weight * nf.f(n.point);
      angular += nf.f(n.point) * 2.0 * pi / static_cast<double>(bq.nodes.size());
    }
    std::vector<double> devs;
    for (double s : cfg.s_grid) {
      const auto nodes = graded_boundary_quadrature(D, s, width, n_theta, cfg.tol.rel);
      double mass = 0.0;
      for (const auto& n : nodes) {
        const double dx = D.is_disk() ? n.t : D.distance(n.x);
        mass += n.w * (1.0 - s) * std::pow(dx, -s) * nf.f(n.x);
      }
      if (D.is_disk() && nf.lifted) {
        // int_0^w (1-s) t^{-s} (rho + t) dt.
        const double closed = angular * (D.base_radius() * std::pow(width, 1.0 - s) +
                                         (1.0 - s) / (2.0 - s) * std::pow(width, 2.0 - s));
        t.check(s, "mass_" + id, mass, closed, criteria::kMeasureClosedForm);
      } else {
        t.report(s, "mass_" + id, mass);
      }
      ResultRow& r = t.report(s, "limit_dev_" + id, mass);
      r.reference = limit;
      r.rel_dev = deviation(mass, limit);
      devs.push_back(r.rel_dev);
    }
    t.check(cfg.s_grid.back(), "final_dev_" + id, t.rows.back().value, limit, criteria::kMeasureFinal);
    t.flag(kNaN, "tail_monotone_" + id, monotone_tail(devs));
  }
  return t;
}

ResultTable exp_trace_norm_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain D = parse_domain(cfg.domain);
  require_disk(D, "exp_trace_norm_convergence");
  ResultTable t{"exp_trace_norm_convergence", {}};
  const Tolerance l2tol = rel_tol(1e-8);
  const double rho = D.base_radius();
  auto tau_mass = [rho](double s) {
    // Unit disk closed form; a disk of radius rho scales by rho^{1-s} through d_x.
    return 2.0 * pi * (1.0 - s) * std::tgamma(2.0 * s) * std::tgamma(1.0 - s) / std::tgamma(1.0 + s) *
           (rho == 1.0 ? 1.0 : kNaN);
  };
  const ScalarField one = named_field("one", D).f;
  for (double s : {0.3, 0.5, 0.7, 0.9}) {
    const NormReport r = l2_tau_norm(one, D, FracOrder(s), l2tol);
    t.check(s, "tau_mass", r.value * r.value, tau_mass(s), criteria::kTauMass, r.error);
  }
  {
    const NormReport r = l2_tau_norm(one, D, FracOrder(0.5), l2tol);
    t.check(0.5, "tau_mass_half", r.value * r.value, 2.0 * pi, criteria::kTauMass, r.error);
  }

  const ScalarField g = named_field("x1_over_r", D).f;
  std::vector<double> dl2, dsemi;
  double l2_last = 0.0, semi_last = 0.0, semi_err = kNaN;
  for (double s : cfg.s_grid) {
    const NormReport a = l2_tau_norm(g, D, FracOrder(s), l2tol);
    const NormReport b = trace_seminorm(g, D, FracOrder(s), cfg.tol);
    l2_last = a.value * a.value;
    semi_last = b.value * b.value;
    semi_err = b.error;
    ResultRow& ra = t.report(s, "l2_sq", l2_last, a.error);
    ra.reference = pi * rho;
    ra.rel_dev = deviation(l2_last, pi * rho);
    dl2.push_back(ra.rel_dev);
    ResultRow& rb = t.report(s, "semi_sq", semi_last, b.error);
    rb.reference = 2.0 * pi * pi;
    rb.rel_dev = deviation(semi_last, 2.0 * pi * pi);
    dsemi.push_back(rb.rel_dev);

    const NormReport c = l2_tau_norm(one, D, FracOrder(s), l2tol);
    t.check(s, "l2_sq_one", c.value * c.value, tau_mass(s), criteria::kTauMass, c.error);
    TraceSeminormOptions fast;
    fast.estimate_error = false;
    const NormReport z = trace_seminorm(one, D, FracOrder(s), cfg.tol, fast);
    t.check(s, "semi_sq_one", z.value * z.value, 0.0, 0.0);
  }
  const double sf = cfg.s_grid.back();
  t.check(sf, "l2_sq_final", l2_last, pi * rho, criteria::kTraceL2Final);
  t.flag(kNaN, "l2_sq_tail_monotone", monotone_tail(dl2));
  t.check(sf, "semi_sq_final", semi_last, 2.0 * pi * pi, criteria::kTraceSemiFinal, semi_err);
  t.flag(kNaN, "semi_sq_tail_monotone", monotone_tail(dsemi));
  return t;
}

ResultTable exp_kernel_comparability(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain D = parse_domain(cfg.domain);
  require_disk(D, "exp_kernel_comparability");
  ResultTable t{"exp_kernel_comparability", {}};
  const double rho = D.base_radius();

  // 200 exterior pairs in four regimes of 50: both near the boundary, near
  // and far, both far, and near pairs close to each other.
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto at = [&](double d, double th) { return Point(D.center() + (rho + d) * Point(std::cos(th), std::sin(th))); };
  auto near_d = [&] { return 0.01 * std::pow(10.0, U(rng)); };  // [0.01, 0.1]
  auto far_d = [&] { return 1.0 + 2.0 * U(rng); };               // [1, 3]
  std::vector<std::pair<Point, Point>> pairs;
  for (int regime = 0; regime < 4; ++regime) {
    for (int k = 0; k < 50; ++k) {
      const double a = 2.0 * pi * U(rng);
      const double b = 2.0 * pi * U(rng);
      if (regime == 0) {
        pairs.emplace_back(at(near_d(), a), at(near_d(), b));
      } else if (regime == 1) {
        pairs.emplace_back(at(near_d(), a), at(far_d(), b));
      } else if (regime == 2) {
        pairs.emplace_back(at(far_d(), a), at(far_d(), b));
      } else {
        const double da = near_d();
        const double db = near_d();
        const double off = (0.01 + 0.09 * U(rng)) / rho;
        pairs.emplace_back(at(da, a), at(db, a + off));
      }
    }
  }

  double upper = 0.0;
  double lower = std::numeric_limits<double>::infinity();
  bool positive = true;
  for (double s : cfg.s_grid) {
    double up_s = 0.0;
    double lo_s = std::numeric_limits<double>::infinity();
    for (const auto& [x, y] : pairs) {
      const double ks = trace_kernel(D, FracOrder(s), x, y);
      const double kstar = bogdan_kernel(D, FracOrder(s), x, y, cfg.tol).value;
      positive = positive && kstar > 0.0;
      up_s = std::max(up_s, kstar / (s * ks));
      lo_s = std::min(lo_s, kstar / (s * s * ks));
    }
    t.report(s, "sup_kstar_over_s_ks", up_s);
    t.report(s, "inf_kstar_over_s2_ks", lo_s);
    upper = std::max(upper, up_s);
    lower = std::min(lower, lo_s);
  }
  t.report(kNaN, "upper_constant", upper);
  t.report(kNaN, "lower_constant", lower);
  t.below(kNaN, "spread", upper / lower, criteria::kComparabilitySpread);
  t.flag(kNaN, "positive", positive && std::isfinite(upper) && lower > 0.0);

  const Tolerance tight = rel_tol(1e-9);
  double asym = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto& [x, y] = pairs[static_cast<std::size_t>(k * 20)];
    const double s = cfg.s_grid[static_cast<std::size_t>(k) % cfg.s_grid.size()];
    const double a = bogdan_kernel(D, FracOrder(s), x, y, tight).value;
    const double b = bogdan_kernel(D, FracOrder(s), y, x, tight).value;
    asym = std::max(asym, std::abs(a - b) / std::max(a, b));
  }
  t.check_dev(kNaN, "symmetry", asym, 0.0, asym, criteria::kKernelSymmetry);
  return t;
}

namespace {

MonteCarloEstimate run_mc(const std::function<MonteCarloEstimate()>& fn, bool* exhausted) {
  try {
    return fn();
  } catch (const BudgetExhausted& e) {
    *exhausted = true;
    return e.achieved();
  }
}

}  // namespace

ResultTable exp_douglas_identity(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain D = parse_domain(cfg.domain);
  require_disk(D, "exp_douglas_identity");
  if (cfg.functions.empty()) throw std::invalid_argument("exp_douglas_identity: needs at least one function");
  ResultTable t{"exp_douglas_identity", {}};

  for (double s : {0.3, 0.5, 0.8}) {
    for (const Point& z : {Point(D.center()), Point(D.center() + Point(0.5 * D.base_radius(), 0.0))}) {
      const ScalarField one = named_field("one", D).f;
      const Estimate e = poisson_extension(one, D, FracOrder(s), z, rel_tol(1e-8));
      std::ostringstream q;
      q << "poisson_mass_z" << (z - D.center()).x();
      t.check(s, q.str(), e.value, 1.0, criteria::kPoissonMass, e.error);
    }
  }

  MonteCarloOptions mc;
  mc.seed = cfg.seed;
  mc.batch = 2000;
  mc.max_samples = 200000;
  mc.rel_target = cfg.tol.rel;
  const Tolerance ext_tol = rel_tol(1e-6);

  for (double s : cfg.s_grid) {
    const KernelSpec J = KernelSpec::fractional(FracOrder(s));
    const ScalarField c = ScalarField::lipschitz_field([](Point) { return 3.0; }, 0.0, 3.0);
    const auto ca = cx_seminorm(c, D, FracOrder(s), mc, 1e-6);
    const auto cb = vs_energy_monte_carlo(c, D, J, mc);
    t.check(s, "constant_cx", ca.value, 0.0, 0.0, ca.std_error);
    t.check(s, "constant_vs", cb.value, 0.0, 0.0, cb.std_error);

    for (std::size_t k = 0; k < cfg.functions.size(); ++k) {
      const std::string& id = cfg.functions[k];
      const NamedField nf = named_field(id, D);
      bool short_budget = false;
      const auto cx = run_mc([&] { return cx_seminorm(nf.f, D, FracOrder(s), mc, 1e-6); }, &short_budget);
      if (k == 0) {
        const ScalarField Pg = poisson_extended_field(nf.f, D, FracOrder(s), ext_tol);
        std::vector<SamplingFocus> focus = nf.focus;
        const auto vs = run_mc([&] { return vs_energy_monte_carlo(Pg, D, J, mc, focus); }, &short_budget);
        t.report(s, "cx_" + id, cx.value, cx.std_error);
        t.report(s, "vs_P_" + id, vs.value, vs.std_error);
        const double gap = std::abs(vs.value - cx.value) / (vs.value + cx.value);
        ResultRow& r = t.check_dev(s, "identity_" + id, vs.value / cx.value, 1.0, gap, criteria::kDouglasBand);
        r.pass = r.pass && !short_budget;
      } else {
        const auto vs = run_mc([&] { return vs_energy_monte_carlo(nf.f, D, J, mc, nf.focus); }, &short_budget);
        t.report(s, "cx_" + id, cx.value, cx.std_error);
        t.report(s, "vs_" + id, vs.value, vs.std_error);
        // [u,u]_{V^s} >= [g,g]_{X^s} - band (A + B).
        const double shortfall = (cx.value - vs.value) / (vs.value + cx.value);
        ResultRow& r = t.check_dev(s, "inequality_" + id, vs.value / cx.value, 1.0, shortfall,
                                   criteria::kDouglasBand);
        r.pass = r.pass && !short_budget;
      }
    }
  }
  return t;
}

ResultTable exp_robust_inequalities(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain D = parse_domain(cfg.domain);
  ResultTable t{"exp_robust_inequalities", {}};
  auto spread_row = [&t](const std::string& q, const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double sp = (*lo > 0.0 && std::isfinite(*hi)) ? *hi / *lo : kNaN;
    ResultRow& r = t.below(kNaN, q, sp, criteria::kRatioSpread);
    r.pass = r.pass && !std::isnan(sp);
  };

  const Tolerance qtol = cfg.tol;
  VsEnergyOptions vopt;
  vopt.h = std::min(cfg.h, 0.15);
  TraceSeminormOptions topt;
  topt.n_theta = 96;

  // Trace ratio ||u|_{Omega^c}||_{T^s} / ||u||_{V^s}.
  for (const auto& id : cfg.functions) {
    const NamedField nf = named_field(id, D);
    std::vector<double> ratios;
    for (double s : cfg.s_grid) {
      const KernelSpec J = KernelSpec::fractional(FracOrder(s));
      const NormReport tn = trace_norm(nf.f, D, FracOrder(s), qtol, topt);
      const NormReport vn = vs_norm(nf.f, D, J, qtol, vopt);
      ratios.push_back(tn.value / vn.value);
      t.report(s, "trace_ratio_" + id, ratios.back(), tn.error);
    }
    spread_row("trace_ratio_spread_" + id, ratios);
  }

  // Extension ratio ||P g||_{V^s} / ||g||_{T^s} for g supported off the closure.
  if (D.is_disk()) {
    const NamedField nf = named_field("bump_out", D);
    MonteCarloOptions mc;
    mc.seed = cfg.seed;
    mc.batch = 2000;
    mc.max_samples = 400000;
    mc.rel_target = cfg.tol.rel;
    std::vector<double> ratios;
    for (double s : cfg.s_grid) {
      const KernelSpec J = KernelSpec::fractional(FracOrder(s));
      const ScalarField Pg = poisson_extended_field(nf.f, D, FracOrder(s), rel_tol(1e-6));
      const auto e = vs_energy_monte_carlo(Pg, D, J, mc, nf.focus);
      const double l2 = integrate_interior([&Pg](Point x) { return Pg(x) * Pg(x); }, D, 32, 8);
      const NormReport tn = trace_norm(nf.f, D, FracOrder(s), qtol, topt);
      ratios.push_back(std::sqrt(e.value + l2) / tn.value);
      t.report(s, "extension_ratio_bump_out", ratios.back(), e.std_error);
    }
    spread_row("extension_ratio_spread_bump_out", ratios);
  }

  // Hardy ratio (1-s) int u^2 d^{-s} / ||u||^2_{V^s(Omega|Omega)}.
  HardyOptions hopt;
  hopt.h = std::min(cfg.h, 0.15);
  for (const std::string id : {"one", "x1"}) {
    const NamedField nf = named_field(id, D);
    std::vector<double> ratios;
    for (double s : cfg.s_grid) {
      const HardyRatio hr = hardy_ratio(nf.f, D, FracOrder(s), rel_tol(1e-6), hopt);
      ratios.push_back(hr.ratio());
      t.report(s, "hardy_ratio_" + id, hr.ratio());
      if (id == "one" && D.is_disk()) {
        // (1-s) int_0^rho (rho - r)^{-s} 2 pi r dr.
        const double rho = D.base_radius();
        const double closed = 2.0 * pi * std::pow(rho, 2.0 - s) / (2.0 - s);
        t.check(s, "hardy_numerator_one", hr.numerator, closed, criteria::kHardyClosedForm);
      }
    }
    spread_row("hardy_ratio_spread_" + id, ratios);
  }
  return t;
}

ResultTable exp_diffusion_recovery(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain D = parse_domain(cfg.domain);
  ResultTable t{"exp_diffusion_recovery", {}};
  Mat2 diag;
  diag << 4.0, 0.0, 0.0, 1.0;
  const std::vector<std::pair<std::string, MatrixField>> fields = {
      {"identity", MatrixField::identity()},
      {"diag41", MatrixField::constant_matrix(diag)},
      {"rotation", MatrixField::rotation(4.0, 1.0, 1.0)},
  };
  const Point x = D.center() + Point(0.3, 0.2) * D.base_radius();
  const char* names[2][2] = {{"a11", "a12"}, {"a21", "a22"}};
  for (const auto& [label, A] : fields) {
    auto family = [&A](double s) { return elliptic_kernel_factory(A, FracOrder(s)); };
    const DiffusionRecovery big = recover_diffusion(family, x, 0.5, cfg.s_grid);
    const DiffusionRecovery small = recover_diffusion(family, x, 0.25, cfg.s_grid);
    const Mat2 ref = A(x);
    const double scale = ref.cwiseAbs().maxCoeff();
    for (std::size_t k = 0; k < big.s_grid.size(); ++k) {
      t.report(big.s_grid[k], "a11_" + label + "_at_s", big.per_s[k](0, 0));
    }
    for (int i = 0; i < 2; ++i) {
      for (int j = i; j < 2; ++j) {
        const double v = big.a(i, j);
        t.check_dev(kNaN, std::string(names[i][j]) + "_" + label, v, ref(i, j), std::abs(v - ref(i, j)) / scale,
                    criteria::kDiffusion);
      }
    }
    const double dd = (big.a - small.a).cwiseAbs().maxCoeff() / scale;
    t.check_dev(kNaN, "delta_independence_" + label, dd, 0.0, dd, criteria::kDeltaIndependence);
  }
  return t;
}

ResultTable exp_neumann_localization(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain D = parse_domain(cfg.domain);
  ResultTable t{"exp_neumann_localization", {}};
  const Point c = D.center();
  auto x1 = [c](Point x) { return x.x() - c.x(); };
  // Boundary flux of x1: the first component of the outer normal.
  auto n1 = [D](Point x) { return D.outer_normal(D.nearest_boundary_point(x)).x(); };

  // Halving study of the local solver against x1 (shifted to mean zero on Omega_h).
  std::vector<double> hs = {2.0 * cfg.h, cfg.h, 0.5 * cfg.h};
  std::vector<double> errs;
  for (double h : hs) {
    const Mesh full = build_mesh(D, cfg.R, h);
    const Mesh in = restrict_to_interior(full);
    const DiscreteFunction I = DiscreteFunction::interpolate(in, x1);
    const double shift = I.mean_integral() / in.region_area(Region::kInterior);
    const auto p = NeumannProblem::local(MatrixField::identity(), nullptr, n1);
    const DiscreteFunction u = solve_neumann(p, in, D, cfg.tol);
    errs.push_back(l2_error_on_omega(u, [&](Point x) { return x1(x) - shift; }));
    std::ostringstream q;
    q << "local_error_h" << h;
    t.report(kNaN, q.str(), errs.back());
  }
  for (std::size_t k = 1; k < hs.size(); ++k) {
    std::ostringstream q;
    q << "local_order_h" << hs[k];
    t.at_least(kNaN, q.str(), std::log(errs[k - 1] / errs[k]) / std::log(hs[k - 1] / hs[k]), criteria::kLocalOrder);
  }

  const Mesh mesh = build_mesh(D, cfg.R, cfg.h);
  const Mesh in = restrict_to_interior(mesh);
  const ScalarField E = normal_ray_extension(n1, D, 0.5 * D.ball_radius());
  const DiscreteFunction Ix = DiscreteFunction::interpolate(in, x1);
  const double shift = Ix.mean_integral() / in.region_area(Region::kInterior);

  Mat2 diag;
  diag << 4.0, 0.0, 0.0, 1.0;
  const MatrixField A = MatrixField::constant_matrix(diag);
  const DiscreteFunction uA = solve_neumann(NeumannProblem::local(A, nullptr, n1), in, D, cfg.tol);

  auto trend_rows = [&t](const std::string& tag, const std::vector<double>& e) {
    int inversions = 0;
    bool ok = true;
    for (std::size_t k = 1; k < e.size(); ++k) {
      if (e[k] > e[k - 1]) {
        ++inversions;
        ok = ok && e[k] <= (1.0 + criteria::kInversion) * e[k - 1];
      }
    }
    t.flag(kNaN, "trend_" + tag, ok && inversions <= 1 && e.size() >= 2);
    const double r = e.back() / e.front();
    t.check_dev(kNaN, "final_over_first_" + tag, r, criteria::kFinalReduction, r, criteria::kFinalReduction);
  };

  for (const bool elliptic : {false, true}) {
    const std::string tag = elliptic ? "diag41" : "fractional";
    std::vector<double> e;
    for (std::size_t k = 0; k < cfg.s_grid.size(); ++k) {
      const double s = cfg.s_grid[k];
      const KernelSpec J = elliptic ? elliptic_kernel_factory(A, FracOrder(s)) : KernelSpec::fractional(FracOrder(s));
      auto g = [&D, &E, s](Point x) { return tau(D, FracOrder(s), x) * E(x); };
      LinearSystem sys;
      sys.K = assemble_nonlocal_stiffness(mesh, J, cfg.tol);
      sys.b = assemble_loads(mesh, D, NeumannProblem::nonlocal(J, nullptr, g));
      sys.m = mean_vector(mesh);
      const DiscreteFunction u = solve_saddle(mesh, sys, cfg.tol);
      e.push_back(elliptic ? l2_error_on_omega(u, uA) : l2_error_on_omega(u, [&](Point x) { return x1(x) - shift; }));
      t.report(s, "error_" + tag, e.back());
      if (k == 0) {
        LinearSystem zero = sys;
        zero.b.setZero();
        const DiscreteFunction u0 = solve_saddle(mesh, zero, cfg.tol);
        t.check(s, "zero_data_" + tag, u0.values.cwiseAbs().maxCoeff(), 0.0, 0.0);
      }
    }
    trend_rows(tag, e);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Registry and runner.

const std::vector<ExperimentEntry>& experiment_registry() {
  static const std::vector<ExperimentEntry> reg = {
      {"exp_kappa_asymptotics", "kappa_{d,s}/(s(1-s)) over the s-grid, d = 2, 3", exp_kappa_asymptotics},
      {"exp_measure_convergence", "collar measures mu_s against the surface measure", exp_measure_convergence},
      {"exp_trace_norm_convergence", "trace norm parts of x1/|x| and 1 as s grows", exp_trace_norm_convergence},
      {"exp_kernel_comparability", "k*_s against s k_s and s^2 k_s on sampled pairs", exp_kernel_comparability},
      {"exp_douglas_identity", "Poisson extension energy against the X^s seminorm", exp_douglas_identity},
      {"exp_robust_inequalities", "trace, extension and Hardy ratios over s", exp_robust_inequalities},
      {"exp_diffusion_recovery", "second moments of elliptic-factory kernels", exp_diffusion_recovery},
      {"exp_neumann_localization", "nonlocal Neumann solutions against the local limit", exp_neumann_localization},
  };
  return reg;
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
  for (const auto& e : experiment_registry()) {
    if (e.name != cfg.name) continue;
    ResultTable t = e.run(cfg);
    if (!cfg.output.empty()) {
      std::ofstream out(cfg.output, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + cfg.output);
      out << t.csv();
    }
    return t;
  }
  throw std::invalid_argument("unknown experiment '" + cfg.name + "'");
}

std::vector<ExperimentConfig> parse_run_config(const std::string& json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "experiments") throw std::invalid_argument("unknown config key '" + key + "'");
  }
  std::vector<ExperimentConfig> out;
  if (!doc.contains("experiments")) return out;
  const json& list = doc.at("experiments");
  if (!list.is_array()) throw std::invalid_argument("'experiments' must be an array");
  try {
    for (const auto& item : list) {
      if (!item.is_object() || !item.contains("name")) {
        throw std::invalid_argument("each experiment needs a \"name\"");
      }
      ExperimentConfig c = default_config(item.at("name").get<std::string>());
      for (const auto& [key, v] : item.items()) {
        if (key == "name") {
        } else if (key == "domain") {
          c.domain = v.get<std::string>();
          parse_domain(c.domain);
        } else if (key == "s_grid") {
          c.s_grid = v.get<std::vector<double>>();
        } else if (key == "h") {
          c.h = v.get<double>();
        } else if (key == "R") {
          c.R = v.get<double>();
        } else if (key == "tolerance") {
          if (!v.is_object()) throw std::invalid_argument("'tolerance' must be an object");
          for (const auto& [tk, tv] : v.items()) {
            if (tk == "rel") c.tol.rel = tv.get<double>();
            else if (tk == "abs") c.tol.abs = tv.get<double>();
            else if (tk == "max_depth") c.tol.max_depth = tv.get<int>();
            else throw std::invalid_argument("unknown tolerance key '" + tk + "'");
          }
        } else if (key == "functions") {
          c.functions = v.get<std::vector<std::string>>();
        } else if (key == "output") {
          c.output = v.get<std::string>();
        } else if (key == "seed") {
          c.seed = v.get<std::uint64_t>();
        } else {
          throw std::invalid_argument("unknown experiment key '" + key + "'");
        }
      }
      c.validate();
      if (c.s_grid.empty()) throw std::invalid_argument(c.name + ": empty s_grid");
      for (const auto& id : c.functions) named_field(id, parse_domain(c.domain));
      out.push_back(c);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  return out;
}

int run_config_file(const std::string& path, std::ostream& log) {
  std::vector<ExperimentConfig> cfgs;
  try {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfgs = parse_run_config(buf.str());
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  }
  int code = 0;
  for (const auto& c : cfgs) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const ResultTable t = run_experiment(c);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log << c.name << ": " << t.rows.size() << " rows, " << (t.passed() ? "PASS" : "FAIL") << " ("
          << std::fixed << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
      for (const auto& r : t.rows) {
        if (!r.pass) log << "  failing: " << r.quantity << " s=" << r.s << " value=" << r.value << '\n';
      }
      if (!t.passed()) code = 1;
    } catch (const std::exception& e) {
      log << c.name << ": error: " << e.what() << '\n';
      code = 1;
    }
  }
  return code;
}

}  // namespace fractrace
