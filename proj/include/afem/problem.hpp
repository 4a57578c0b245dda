#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afem/mesh.hpp"

namespace afem {

class ProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coefficient alpha(x, s) of -div[alpha(x, |grad u|^2) grad u] = f, with
/// s = |grad u|^2 as second argument.
class CoefficientModel {
 public:
  virtual ~CoefficientModel() = default;

  virtual std::string name() const = 0;
  virtual double alpha(Point x, double s) const = 0;
  /// d alpha / d s
  virtual double d_alpha(Point x, double s) const = 0;
  /// Spatial gradient of alpha at fixed s.
  virtual Point grad_x_alpha(Point x, double s) const = 0;
  virtual bool depends_on_x() const = 0;
  /// Lipschitz bound in x of the Hessian of gamma (zero when alpha is x-independent).
  virtual double lipschitz_x() const { return 0.0; }

  /// 1/2 * int_0^s alpha(x, r) dr. The default integrates numerically.
  virtual double half_integral(Point x, double s) const;

  /// Values of s where alpha(x,s) + 2 s d_alpha(x,s) or alpha itself may have
  /// interior extrema; added to the sampling grid when certifying constants.
  virtual std::vector<double> critical_s() const { return {}; }
};

/// alpha == c.
class ConstantCoefficient final : public CoefficientModel {
 public:
  explicit ConstantCoefficient(double c = 1.0);
  std::string name() const override;
  double alpha(Point, double) const override { return c_; }
  double d_alpha(Point, double) const override { return 0.0; }
  Point grad_x_alpha(Point, double) const override { return {0.0, 0.0}; }
  bool depends_on_x() const override { return false; }
  double half_integral(Point, double s) const override { return 0.5 * c_ * s; }

 private:
  double c_;
};

/// alpha(x, s) = (1 + kx*x + ky*y) * (a + b / (1 + s)).
/// With a = 2, b = 1 this is the model of Chow's shock-free airfoil and
/// seepage studies.
class ChowCoefficient final : public CoefficientModel {
 public:
  ChowCoefficient(double a = 2.0, double b = 1.0, double kx = 0.0, double ky = 0.0);
  std::string name() const override;
  double alpha(Point x, double s) const override;
  double d_alpha(Point x, double s) const override;
  Point grad_x_alpha(Point x, double s) const override;
  bool depends_on_x() const override { return kx_ != 0.0 || ky_ != 0.0; }
  double lipschitz_x() const override;
  double half_integral(Point x, double s) const override;
  std::vector<double> critical_s() const override { return {3.0}; }

  double a() const { return a_; }
  double b() const { return b_; }

 private:
  double weight(Point x) const { return 1.0 + kx_ * x.x + ky_ * x.y; }
  double a_, b_, kx_, ky_;
};

/// User model given as pure functions with analytic derivatives.
class FunctionCoefficient final : public CoefficientModel {
 public:
  using ScalarFn = std::function<double(Point, double)>;
  using VectorFn = std::function<Point(Point, double)>;

  FunctionCoefficient(std::string name, ScalarFn alpha, ScalarFn d_alpha, VectorFn grad_x,
                      bool depends_on_x, double lipschitz_x = 0.0,
                      std::vector<double> critical = {});
  std::string name() const override { return name_; }
  double alpha(Point x, double s) const override { return alpha_(x, s); }
  double d_alpha(Point x, double s) const override { return d_alpha_(x, s); }
  Point grad_x_alpha(Point x, double s) const override { return grad_x_(x, s); }
  bool depends_on_x() const override { return depends_on_x_; }
  double lipschitz_x() const override { return lipschitz_x_; }
  std::vector<double> critical_s() const override { return critical_; }

 private:
  std::string name_;
  ScalarFn alpha_, d_alpha_;
  VectorFn grad_x_;
  bool depends_on_x_;
  double lipschitz_x_;
  std::vector<double> critical_;
};

struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
  Point apply(Point v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
};

/// alpha(x, t^2) + 2 t^2 d_alpha(x, t^2): second derivative of beta(x, t) in t.
double beta_tt(const CoefficientModel& m, Point x, double t);
/// gamma(x, xi) = 1/2 int_0^{|xi|^2} alpha(x, r) dr
double gamma_value(const CoefficientModel& m, Point x, Point xi);
/// alpha(x, |xi|^2) xi
Point gamma_grad(const CoefficientModel& m, Point x, Point xi);
/// 2 d_alpha(x,|xi|^2) xi xi^T + alpha(x,|xi|^2) I
Sym2 gamma_hessian(const CoefficientModel& m, Point x, Point xi);

struct MonotonicityConstants {
  double c_a = 0.0, C_a = 0.0;  // extrema of beta_tt
  double c_A = 0.0, C_A = 0.0;  // monotonicity / Lipschitz constants of A
  double alpha_min = 0.0, alpha_max = 0.0;
  double t_max = 0.0;           // certified range of |grad u|
};

struct SampleSpec {
  std::vector<Point> xs;
  double t_max = 10.0;
  int nt = 2001;
};

/// Sample points covering a mesh: vertices plus element barycenters.
SampleSpec sample_spec_for(const Mesh& mesh, double t_max, int nt = 2001);

/// Extrema of beta_tt and alpha over the sample grid (plus the model's
/// critical points), rounded outward by a few ulps. Throws ProblemError when
/// the structure condition fails (non-positive minimum).
MonotonicityConstants estimate_constants(const CoefficientModel& m, const SampleSpec& spec);

using ScalarField = std::function<double(Point)>;
using VectorField = std::function<Point(Point)>;

struct ProblemSpec {
  std::string name;
  std::shared_ptr<const CoefficientModel> coefficient;
  ScalarField f;
  std::string domain;  // "square", "lshape" or a mesh file path
  std::optional<ScalarField> exact_u;
  std::optional<VectorField> exact_grad_u;
  MonotonicityConstants constants;

  bool has_exact() const { return exact_u.has_value() && exact_grad_u.has_value(); }
};

/// Names accepted by builtin_problem().
std::vector<std::string> builtin_problem_names();
ProblemSpec builtin_problem(const std::string& name);

/// Parses a `key = value` problem description:
///   alpha = chow a=2 b=1 [kx=.. ky=..] | const c=1
///   f = const 1
///   domain = square | lshape | <mesh file>
ProblemSpec parse_problem_spec(std::istream& is, const std::string& name = "custom");
/// Built-in name, or a path to a problem description file.
ProblemSpec load_problem(const std::string& name_or_path);

/// Initial mesh of the problem's domain.
Mesh initial_mesh(const ProblemSpec& problem);

}  // namespace afem
