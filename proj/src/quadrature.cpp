#include "afem/quadrature.hpp"

#include <cmath>

namespace afem {

const QuadratureRule& triangle_rule_deg4() {
  static const QuadratureRule rule = [] {
    QuadratureRule r;
    r.degree = 4;
    const double a1 = 0.44594849091596488632, b1 = 0.10810301816807022736, w1 = 0.22338158967801146570;
    const double a2 = 0.09157621350977074346, b2 = 0.81684757298045851308, w2 = 0.10995174365532186764;
    r.points = {{a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1}, {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}};
    r.weights = {w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

const QuadratureRule& triangle_rule_deg1() {
  static const QuadratureRule rule{{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}}, {1.0}, 1};
  return rule;
}

const EdgeRule& edge_rule_gauss3() {
  static const EdgeRule rule = [] {
    EdgeRule r;
    r.degree = 5;
    const double d = 0.5 * std::sqrt(0.6);
    r.points = {0.5 - d, 0.5, 0.5 + d};
    r.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    return r;
  }();
  return rule;
}

}  // namespace afem
