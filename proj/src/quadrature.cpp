#include "graphmpa/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "graphmpa/error.hpp"

namespace graphmpa {

namespace {

GaussLegendre compute_rule(std::size_t n) {
  GaussLegendre rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      // p1 = P_n(x), p0 = P_{n-1}(x)
      derivative = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / derivative;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
      p0 = p1;
      p1 = pk;
    }
    derivative = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussLegendre& GaussLegendre::rule(std::size_t n) {
  if (n == 0) throw InputError("Gauss-Legendre rule needs at least one node");
  static std::mutex mutex;
  static std::map<std::size_t, GaussLegendre> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
  return it->second;
}

void GaussLegendre::mapped(double a, double b, std::vector<double>& x,
                           std::vector<double>& w) const {
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  x.resize(nodes.size());
  w.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    x[i] = mid + half * nodes[i];
    w[i] = half * weights[i];
  }
}

}  // namespace graphmpa
