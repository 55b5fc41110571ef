#pragma once

#include <cstddef>
#include <vector>

namespace graphmpa {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Nodes from Newton iteration on P_n; rules are cached per n.
  static const GaussLegendre& rule(std::size_t n);

  /// Nodes and weights mapped onto [a, b].
  void mapped(double a, double b, std::vector<double>& x, std::vector<double>& w) const;
};

}  // namespace graphmpa
