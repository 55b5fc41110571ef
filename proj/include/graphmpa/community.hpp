#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "graphmpa/index.hpp"
#include "graphmpa/random.hpp"

namespace graphmpa {

/// Node -> community assignment with dense ids in [0, community_count).
struct Partition {
  std::vector<std::uint32_t> assignment;
  std::size_t community_count = 0;

  /// Member node indices per community, ascending.
  std::vector<std::vector<std::uint32_t>> members() const;

  static Partition singletons(std::size_t n);
  /// Relabels ids densely in order of each community's lowest node index.
  static Partition canonical(std::vector<std::uint32_t> assignment);

  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Undirected weighted graph for community detection. Self-loops only
/// appear on aggregated graphs, where they hold collapsed internal weight.
struct WeightedGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adjacency;  // no self entries
  std::vector<double> self_loop;
  std::vector<double> degree;  // weighted degree k_i, self-loops counted twice
  double total_weight = 0.0;   // m

  std::size_t size() const noexcept { return adjacency.size(); }

  static WeightedGraph from_edges(std::size_t n, const std::vector<Edge>& edges);
  static WeightedGraph from_layer(const GraphLayer& layer);
};

/// Weighted modularity with resolution:
/// Q = sum_c [ W_c / m - resolution * (K_c / 2m)^2 ], 0 for a graph with no weight.
double quality(const WeightedGraph& graph, const Partition& p, double resolution);
double quality(const GraphLayer& layer, const Partition& p, double resolution);

struct LeidenOptions {
  double resolution = 1.0;
  std::uint64_t seed = 0;
  /// Randomness of the refinement merge choice.
  double theta = 0.01;
  /// Outer iterations stop when quality improves by less than this.
  double tolerance = 1e-12;
  std::size_t max_iterations = 64;
  /// Called after every accepted outer iteration with its quality.
  std::function<void(std::size_t iteration, double quality)> on_iteration;
};

Partition leiden(const WeightedGraph& graph, const LeidenOptions& options);

/// Leiden with modularity on a layer's edge set. Communities are connected
/// in the layer; isolated nodes end up as singletons.
Partition detect_communities(const GraphLayer& layer, double resolution, std::uint64_t seed);

namespace leiden_detail {

using graphmpa::Rng;

/// Fast local moving over a queue seeded in random order. Returns true when
/// any node changed community. `membership` ids may become sparse.
bool move_nodes(const WeightedGraph& graph, std::vector<std::uint32_t>& membership,
                double resolution, Rng& rng);

/// Refinement: starts from singletons and merges well-connected singletons
/// only within their `membership` community.
std::vector<std::uint32_t> refine(const WeightedGraph& graph,
                                  const std::vector<std::uint32_t>& membership,
                                  double resolution, double theta, Rng& rng);

/// Collapses each community of `membership` (dense ids required) into one node.
WeightedGraph aggregate(const WeightedGraph& graph, const std::vector<std::uint32_t>& membership,
                        std::size_t community_count);

/// Splits every community that is disconnected in `graph` into its
/// connected components.
std::vector<std::uint32_t> split_disconnected(const WeightedGraph& graph,
                                              const std::vector<std::uint32_t>& membership);

}  // namespace leiden_detail
}  // namespace graphmpa
