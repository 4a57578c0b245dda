#include "afem/problem.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "afem/mesh_io.hpp"

namespace afem {

// ---------------------------------------------------------------------------
// Coefficient models

double CoefficientModel::half_integral(Point x, double s) const {
  if (s <= 0.0) return 0.0;
  // Composite 5-point Gauss-Legendre, panel count doubled until two
  // successive estimates agree.
  static constexpr double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                   0.5384693101056831, 0.9061798459386640};
  static constexpr double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                   0.4786286704993665, 0.2369268850561891};
  auto integrate = [&](int panels) {
    const double h = s / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * h;
      for (int q = 0; q < 5; ++q) sum += gw[q] * alpha(x, mid + 0.5 * h * gx[q]);
    }
    return 0.5 * h * sum;
  };
  double prev = integrate(1);
  for (int panels = 2; panels <= (1 << 16); panels *= 2) {
    const double cur = integrate(panels);
    if (!std::isfinite(cur)) break;
    if (std::abs(cur - prev) <= 1e-14 * std::max(1.0, std::abs(cur))) return 0.5 * cur;
    prev = cur;
  }
  throw ProblemError("quadrature for gamma did not converge for model '" + name() + "'");
}

ConstantCoefficient::ConstantCoefficient(double c) : c_(c) {
  if (!(c > 0.0)) throw ProblemError("constant coefficient must be positive");
}

std::string ConstantCoefficient::name() const {
  std::ostringstream os;
  os << "const c=" << c_;
  return os.str();
}

ChowCoefficient::ChowCoefficient(double a, double b, double kx, double ky)
    : a_(a), b_(b), kx_(kx), ky_(ky) {}

std::string ChowCoefficient::name() const {
  std::ostringstream os;
  os << "chow a=" << a_ << " b=" << b_;
  if (kx_ != 0.0) os << " kx=" << kx_;
  if (ky_ != 0.0) os << " ky=" << ky_;
  return os.str();
}

double ChowCoefficient::alpha(Point x, double s) const { return weight(x) * (a_ + b_ / (1.0 + s)); }

double ChowCoefficient::d_alpha(Point x, double s) const {
  return -weight(x) * b_ / ((1.0 + s) * (1.0 + s));
}

Point ChowCoefficient::grad_x_alpha(Point, double s) const {
  const double g = a_ + b_ / (1.0 + s);
  return {kx_ * g, ky_ * g};
}

double ChowCoefficient::lipschitz_x() const {
  // Hessian of gamma is weight(x) times an x-independent matrix whose
  // eigenvalues are a + b/(1+s) and a + b(1-s)/(1+s)^2.
  double peak = 0.0;
  for (double s : {0.0, 3.0, 1e12}) {
    peak = std::max(peak, std::abs(a_ + b_ / (1.0 + s)));
    peak = std::max(peak, std::abs(a_ + b_ * (1.0 - s) / ((1.0 + s) * (1.0 + s))));
  }
  return std::hypot(kx_, ky_) * peak;
}

double ChowCoefficient::half_integral(Point x, double s) const {
  return 0.5 * weight(x) * (a_ * s + b_ * std::log1p(s));
}

FunctionCoefficient::FunctionCoefficient(std::string name, ScalarFn alpha, ScalarFn d_alpha,
                                         VectorFn grad_x, bool depends_on_x, double lipschitz_x,
                                         std::vector<double> critical)
    : name_(std::move(name)),
      alpha_(std::move(alpha)),
      d_alpha_(std::move(d_alpha)),
      grad_x_(std::move(grad_x)),
      depends_on_x_(depends_on_x),
      lipschitz_x_(lipschitz_x),
      critical_(std::move(critical)) {}

// ---------------------------------------------------------------------------
// Derived quantities

namespace {
double beta_tt_s(const CoefficientModel& m, Point x, double s) {
  return m.alpha(x, s) + 2.0 * s * m.d_alpha(x, s);
}
}  // namespace

double beta_tt(const CoefficientModel& m, Point x, double t) { return beta_tt_s(m, x, t * t); }

double gamma_value(const CoefficientModel& m, Point x, Point xi) {
  return m.half_integral(x, dot(xi, xi));
}

Point gamma_grad(const CoefficientModel& m, Point x, Point xi) {
  return m.alpha(x, dot(xi, xi)) * xi;
}

Sym2 gamma_hessian(const CoefficientModel& m, Point x, Point xi) {
  const double s = dot(xi, xi);
  const double a = m.alpha(x, s), d = 2.0 * m.d_alpha(x, s);
  return {a + d * xi.x * xi.x, d * xi.x * xi.y, a + d * xi.y * xi.y};
}

SampleSpec sample_spec_for(const Mesh& mesh, double t_max, int nt) {
  SampleSpec spec;
  spec.t_max = t_max;
  spec.nt = nt;
  for (const auto& v : mesh.vertices()) spec.xs.push_back(v.p);
  for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) spec.xs.push_back(mesh.barycenter(e));
  return spec;
}

MonotonicityConstants estimate_constants(const CoefficientModel& m, const SampleSpec& spec) {
  if (spec.xs.empty()) throw ProblemError("constant estimation needs at least one sample point");
  if (!(spec.t_max > 0.0) || spec.nt < 2) throw ProblemError("invalid t-range for constant estimation");
  std::vector<double> ss;
  for (int i = 0; i < spec.nt; ++i) {
    const double t = spec.t_max * i / (spec.nt - 1);
    ss.push_back(t * t);
  }
  for (double s : m.critical_s())
    if (s >= 0.0 && s <= spec.t_max * spec.t_max) ss.push_back(s);

  const double inf = std::numeric_limits<double>::infinity();
  double bmin = inf, bmax = -inf, amin = inf, amax = -inf;
  const std::vector<Point> xs = m.depends_on_x() ? spec.xs : std::vector<Point>{spec.xs.front()};
  for (Point x : xs)
    for (double s : ss) {
      const double b = beta_tt_s(m, x, s), a = m.alpha(x, s);
      if (!std::isfinite(a) || !std::isfinite(b)) throw ProblemError("coefficient is not finite at a sample");
      bmin = std::min(bmin, b);
      bmax = std::max(bmax, b);
      amin = std::min(amin, a);
      amax = std::max(amax, a);
    }
  if (!(bmin > 0.0) || !(amin > 0.0))
    throw ProblemError("model '" + m.name() + "' violates the structure condition (minimum " +
                       std::to_string(std::min(bmin, amin)) + ")");
  // Outward rounding by a few ulps so that pointwise re-evaluation near an
  // extremum never lands outside the certified interval.
  auto down = [](double v) { return v * (1.0 - 4.0 * std::numeric_limits<double>::epsilon()); };
  auto up = [](double v) { return v * (1.0 + 4.0 * std::numeric_limits<double>::epsilon()); };
  MonotonicityConstants c;
  c.c_a = down(bmin);
  c.C_a = up(bmax);
  c.alpha_min = down(amin);
  c.alpha_max = up(amax);
  c.c_A = std::min(c.c_a, c.alpha_min);
  c.C_A = std::max(c.C_a, c.alpha_max);
  c.t_max = spec.t_max;
  return c;
}

// ---------------------------------------------------------------------------
// Problems

namespace {

using std::numbers::pi;

ProblemSpec finish(ProblemSpec p) {
  Mesh m = initial_mesh(p);
  p.constants = estimate_constants(*p.coefficient, sample_spec_for(m, 10.0));
  return p;
}

ScalarField sinsin() {
  return [](Point p) { return std::sin(pi * p.x) * std::sin(pi * p.y); };
}
VectorField sinsin_grad() {
  return [](Point p) {
    return Point{pi * std::cos(pi * p.x) * std::sin(pi * p.y), pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
  };
}

}  // namespace

std::vector<std::string> builtin_problem_names() {
  return {"poisson-square", "chow-square-smooth", "chow-lshape-singular", "poisson-lshape-singular",
          "poisson-square-poly"};
}

ProblemSpec builtin_problem(const std::string& name) {
  ProblemSpec p;
  p.name = name;
  if (name == "poisson-square") {
    p.coefficient = std::make_shared<ConstantCoefficient>(1.0);
    p.domain = "square";
    p.exact_u = sinsin();
    p.exact_grad_u = sinsin_grad();
    p.f = [](Point x) { return 2.0 * pi * pi * std::sin(pi * x.x) * std::sin(pi * x.y); };
  } else if (name == "poisson-square-poly") {
    // Polynomial manufactured solution: every integral in the discrete
    // problem is computed exactly by the degree-4 rule.
    p.coefficient = std::make_shared<ConstantCoefficient>(1.0);
    p.domain = "square";
    p.exact_u = [](Point x) { return x.x * (1 - x.x) * x.y * (1 - x.y); };
    p.exact_grad_u = [](Point x) {
      return Point{(1 - 2 * x.x) * x.y * (1 - x.y), x.x * (1 - x.x) * (1 - 2 * x.y)};
    };
    p.f = [](Point x) { return 2.0 * (x.x * (1 - x.x) + x.y * (1 - x.y)); };
  } else if (name == "chow-square-smooth") {
    auto model = std::make_shared<ChowCoefficient>(2.0, 1.0);
    p.coefficient = model;
    p.domain = "square";
    p.exact_u = sinsin();
    p.exact_grad_u = sinsin_grad();
    // f = -div(alpha(s) grad u) = -alpha(s) lap u - alpha'(s) grad s . grad u
    // with s = |grad u|^2, lap u = -2 pi^2 u and
    // grad s = pi^3 (sin 2pi x cos 2pi y, cos 2pi x sin 2pi y).
    p.f = [model](Point x) {
      const double u = std::sin(pi * x.x) * std::sin(pi * x.y);
      const double ux = pi * std::cos(pi * x.x) * std::sin(pi * x.y);
      const double uy = pi * std::sin(pi * x.x) * std::cos(pi * x.y);
      const double s = ux * ux + uy * uy;
      const double sx = pi * pi * pi * std::sin(2 * pi * x.x) * std::cos(2 * pi * x.y);
      const double sy = pi * pi * pi * std::cos(2 * pi * x.x) * std::sin(2 * pi * x.y);
      return model->alpha(x, s) * 2.0 * pi * pi * u - model->d_alpha(x, s) * (sx * ux + sy * uy);
    };
  } else if (name == "chow-lshape-singular") {
    p.coefficient = std::make_shared<ChowCoefficient>(2.0, 1.0);
    p.domain = "lshape";
    p.f = [](Point) { return 1.0; };
  } else if (name == "poisson-lshape-singular") {
    p.coefficient = std::make_shared<ConstantCoefficient>(1.0);
    p.domain = "lshape";
    p.f = [](Point) { return 1.0; };
  } else {
    throw ProblemError("unknown problem '" + name + "'");
  }
  return finish(std::move(p));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw ProblemError("bad number '" + text + "' for " + what);
  }
}

std::shared_ptr<const CoefficientModel> parse_alpha(const std::string& value) {
  std::istringstream is(value);
  std::string family;
  is >> family;
  std::map<std::string, double> params;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ProblemError("expected key=value in alpha parameters, got '" + tok + "'");
    params[tok.substr(0, eq)] = parse_number(tok.substr(eq + 1), "alpha parameter " + tok.substr(0, eq));
  }
  auto take = [&](const std::string& key, double def) {
    auto it = params.find(key);
    if (it == params.end()) return def;
    double v = it->second;
    params.erase(it);
    return v;
  };
  std::shared_ptr<const CoefficientModel> model;
  if (family == "const") {
    model = std::make_shared<ConstantCoefficient>(take("c", 1.0));
  } else if (family == "chow") {
    const double a = take("a", 2.0), b = take("b", 1.0), kx = take("kx", 0.0), ky = take("ky", 0.0);
    model = std::make_shared<ChowCoefficient>(a, b, kx, ky);
  } else {
    throw ProblemError("unknown coefficient family '" + family + "'");
  }
  if (!params.empty()) throw ProblemError("unknown alpha parameter '" + params.begin()->first + "'");
  return model;
}

}  // namespace

ProblemSpec parse_problem_spec(std::istream& is, const std::string& name) {
  ProblemSpec p;
  p.name = name;
  p.domain = "square";
  p.coefficient = std::make_shared<ConstantCoefficient>(1.0);
  p.f = [](Point) { return 1.0; };
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ProblemError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "alpha") {
      p.coefficient = parse_alpha(value);
    } else if (key == "f") {
      std::istringstream vs(value);
      std::string kind, num, extra;
      vs >> kind >> num;
      if (kind != "const" || num.empty() || (vs >> extra))
        throw ProblemError("only 'f = const <value>' loads are supported");
      const double c = parse_number(num, "f");
      p.f = [c](Point) { return c; };
    } else if (key == "domain") {
      p.domain = value;
    } else if (key == "name") {
      p.name = value;
    } else {
      throw ProblemError("unknown problem key '" + key + "'");
    }
  }
  return finish(std::move(p));
}

ProblemSpec load_problem(const std::string& name_or_path) {
  const auto names = builtin_problem_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin_problem(name_or_path);
  std::ifstream is(name_or_path);
  if (!is) throw ProblemError("unknown problem '" + name_or_path + "' (not a built-in name or readable file)");
  return parse_problem_spec(is, std::filesystem::path(name_or_path).stem().string());
}

Mesh initial_mesh(const ProblemSpec& problem) {
  if (problem.domain == "square" || problem.domain == "lshape") return builtin::by_name(problem.domain);
  try {
    Mesh m = read_mesh_file(problem.domain);
    if (!probe_label_compatibility(m))
      throw ProblemError("mesh '" + problem.domain + "' has refinement edges that are not compatibly labeled");
    return m;
  } catch (const MeshError& e) {
    throw ProblemError(e.what());
  }
}

}  // namespace afem
