#include "graphmpa/community.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "graphmpa/error.hpp"

namespace graphmpa {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// Gains compare within this slack so that floating-point noise never
// triggers a move.
bool strictly_better(double candidate, double incumbent) {
  return candidate > incumbent + 1e-12 * (1.0 + std::abs(incumbent));
}

// Dense relabel (first-appearance order of the lowest node), returns count.
std::size_t densify(std::vector<std::uint32_t>& membership) {
  std::vector<std::uint32_t> relabel;
  std::uint32_t next = 0;
  for (auto& c : membership) {
    if (c >= relabel.size()) relabel.resize(static_cast<std::size_t>(c) + 1, kNone);
    if (relabel[c] == kNone) relabel[c] = next++;
    c = relabel[c];
  }
  return next;
}

}  // namespace

// ---------------------------------------------------------------------------
// Partition

std::vector<std::vector<std::uint32_t>> Partition::members() const {
  std::vector<std::vector<std::uint32_t>> out(community_count);
  for (std::uint32_t v = 0; v < assignment.size(); ++v) out[assignment[v]].push_back(v);
  return out;
}

Partition Partition::singletons(std::size_t n) {
  Partition p;
  p.assignment.resize(n);
  std::iota(p.assignment.begin(), p.assignment.end(), 0u);
  p.community_count = n;
  return p;
}

Partition Partition::canonical(std::vector<std::uint32_t> assignment) {
  Partition p;
  p.community_count = densify(assignment);
  p.assignment = std::move(assignment);
  return p;
}

// ---------------------------------------------------------------------------
// WeightedGraph

WeightedGraph WeightedGraph::from_edges(std::size_t n, const std::vector<Edge>& edges) {
  WeightedGraph g;
  g.adjacency.resize(n);
  g.self_loop.assign(n, 0.0);
  g.degree.assign(n, 0.0);
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) throw InputError("edge endpoint out of range");
    if (e.u == e.v) {
      g.self_loop[e.u] += e.w;
      g.degree[e.u] += 2.0 * e.w;
    } else {
      g.adjacency[e.u].emplace_back(e.v, e.w);
      g.adjacency[e.v].emplace_back(e.u, e.w);
      g.degree[e.u] += e.w;
      g.degree[e.v] += e.w;
    }
    g.total_weight += e.w;
  }
  for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
  return g;
}

WeightedGraph WeightedGraph::from_layer(const GraphLayer& layer) {
  return from_edges(layer.node_count(), layer.edges);
}

double quality(const WeightedGraph& graph, const Partition& p, double resolution) {
  const std::size_t n = graph.size();
  if (p.assignment.size() != n) throw InputError("partition size does not match the graph");
  if (graph.total_weight <= 0.0) return 0.0;
  const double m = graph.total_weight;
  std::vector<double> internal(p.community_count, 0.0), total(p.community_count, 0.0);
  for (std::uint32_t v = 0; v < n; ++v) {
    const auto c = p.assignment[v];
    if (c >= p.community_count) throw InputError("partition id out of range");
    total[c] += graph.degree[v];
    internal[c] += graph.self_loop[v];
    for (const auto& [u, w] : graph.adjacency[v])
      if (u > v && p.assignment[u] == c) internal[c] += w;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < p.community_count; ++c) {
    const double share = total[c] / (2.0 * m);
    q += internal[c] / m - resolution * share * share;
  }
  return q;
}

double quality(const GraphLayer& layer, const Partition& p, double resolution) {
  return quality(WeightedGraph::from_layer(layer), p, resolution);
}

namespace leiden_detail {

bool move_nodes(const WeightedGraph& graph, std::vector<std::uint32_t>& membership,
                double resolution, Rng& rng) {
  const std::size_t n = graph.size();
  if (n == 0 || graph.total_weight <= 0.0) return false;
  const double two_m = 2.0 * graph.total_weight;

  // Room for one fresh community per node in case nodes leave to empty ones.
  std::size_t slots = n;
  for (auto c : membership) slots = std::max<std::size_t>(slots, c + 1);
  std::vector<double> community_weight(slots, 0.0);
  std::vector<std::size_t> community_size(slots, 0);
  for (std::uint32_t v = 0; v < n; ++v) {
    community_weight[membership[v]] += graph.degree[v];
    ++community_size[membership[v]];
  }
  std::vector<std::uint32_t> empty;
  for (std::size_t c = slots; c-- > 0;)
    if (community_size[c] == 0) empty.push_back(static_cast<std::uint32_t>(c));

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(order);
  std::vector<std::uint32_t> queue(order.begin(), order.end());
  std::vector<char> queued(n, 1);
  std::size_t head = 0;

  std::vector<double> link(slots, 0.0);
  std::vector<std::uint32_t> touched;
  bool changed = false;

  while (head < queue.size()) {
    const std::uint32_t v = queue[head++];
    queued[v] = 0;
    const std::uint32_t current = membership[v];
    const double k = graph.degree[v];

    touched.clear();
    for (const auto& [u, w] : graph.adjacency[v]) {
      const auto c = membership[u];
      if (link[c] == 0.0 && std::find(touched.begin(), touched.end(), c) == touched.end())
        touched.push_back(c);
      link[c] += w;
    }

    community_weight[current] -= k;
    --community_size[current];

    std::uint32_t best = current;
    double best_gain = link[current] - resolution * k * community_weight[current] / two_m;
    for (auto c : touched) {
      if (c == current) continue;
      const double gain = link[c] - resolution * k * community_weight[c] / two_m;
      if (strictly_better(gain, best_gain)) {
        best = c;
        best_gain = gain;
      }
    }
    if (community_size[current] > 0 && strictly_better(0.0, best_gain)) {
      best = empty.back();
      best_gain = 0.0;
    }

    if (best != current && !empty.empty() && empty.back() == best) empty.pop_back();
    if (community_size[current] == 0 && best != current) empty.push_back(current);
    community_weight[best] += k;
    ++community_size[best];
    membership[v] = best;

    for (auto c : touched) link[c] = 0.0;

    if (best != current) {
      changed = true;
      for (const auto& [u, w] : graph.adjacency[v]) {
        if (!queued[u] && membership[u] != best) {
          queued[u] = 1;
          queue.push_back(u);
        }
      }
    }
  }
  return changed;
}

std::vector<std::uint32_t> refine(const WeightedGraph& graph,
                                  const std::vector<std::uint32_t>& membership,
                                  double resolution, double theta, Rng& rng) {
  const std::size_t n = graph.size();
  std::vector<std::uint32_t> refined(n);
  std::iota(refined.begin(), refined.end(), 0u);
  if (n == 0 || graph.total_weight <= 0.0) return refined;
  const double m = graph.total_weight;
  const double two_m = 2.0 * m;

  std::size_t slots = 0;
  for (auto c : membership) slots = std::max<std::size_t>(slots, c + 1);
  std::vector<std::vector<std::uint32_t>> groups(slots);
  for (std::uint32_t v = 0; v < n; ++v) groups[membership[v]].push_back(v);

  // Refined communities are indexed by their founding node.
  std::vector<double> ref_weight(graph.degree);
  std::vector<std::size_t> ref_size(n, 1);
  std::vector<double> ref_external(n, 0.0);  // weight from the refined community to S minus it
  std::vector<double> node_external(n, 0.0);  // w(v, S - v)

  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<double> gains;

  for (auto& group : groups) {
    if (group.size() < 2) continue;
    const std::uint32_t s = membership[group.front()];
    double group_weight = 0.0;
    for (auto v : group) {
      group_weight += graph.degree[v];
      double w_in = 0.0;
      for (const auto& [u, w] : graph.adjacency[v])
        if (membership[u] == s) w_in += w;
      node_external[v] = w_in;
      ref_external[v] = w_in;
    }

    std::vector<std::uint32_t> order(group);
    rng.shuffle(order);
    for (auto v : order) {
      const double k = graph.degree[v];
      if (ref_size[refined[v]] != 1) continue;
      if (node_external[v] < resolution * k * (group_weight - k) / two_m) continue;

      const std::uint32_t own = refined[v];
      touched.clear();
      for (const auto& [u, w] : graph.adjacency[v]) {
        if (membership[u] != s) continue;
        const auto c = refined[u];
        if (c == own) continue;
        if (link[c] == 0.0 && std::find(touched.begin(), touched.end(), c) == touched.end())
          touched.push_back(c);
        link[c] += w;
      }

      // Candidates: staying alone (gain 0) and every well-connected
      // neighbouring refined community with non-negative gain.
      std::vector<std::uint32_t> candidates{own};
      gains.assign(1, 0.0);
      for (auto c : touched) {
        const double kc = ref_weight[c];
        if (ref_external[c] < resolution * kc * (group_weight - kc) / two_m) continue;
        const double gain = (link[c] - resolution * k * kc / two_m) / m;
        if (gain < 0.0) continue;
        candidates.push_back(c);
        gains.push_back(gain);
      }

      std::uint32_t chosen = own;
      if (candidates.size() > 1) {
        const double top = *std::max_element(gains.begin(), gains.end());
        double total = 0.0;
        for (auto& g : gains) {
          g = std::exp((g - top) / theta);
          total += g;
        }
        double draw = rng.uniform() * total;
        chosen = candidates.back();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
          draw -= gains[i];
          if (draw < 0.0) {
            chosen = candidates[i];
            break;
          }
        }
      }

      if (chosen != own) {
        ref_external[chosen] += node_external[v] - 2.0 * link[chosen];
        ref_weight[chosen] += k;
        ++ref_size[chosen];
        ref_weight[own] = 0.0;
        ref_size[own] = 0;
        refined[v] = chosen;
      }
      for (auto c : touched) link[c] = 0.0;
    }
  }
  return refined;
}

WeightedGraph aggregate(const WeightedGraph& graph, const std::vector<std::uint32_t>& membership,
                        std::size_t community_count) {
  WeightedGraph out;
  out.adjacency.resize(community_count);
  out.self_loop.assign(community_count, 0.0);
  out.degree.assign(community_count, 0.0);
  out.total_weight = graph.total_weight;

  std::vector<std::vector<std::uint32_t>> groups(community_count);
  for (std::uint32_t v = 0; v < graph.size(); ++v) groups[membership[v]].push_back(v);

  std::vector<double> link(community_count, 0.0);
  std::vector<std::uint32_t> touched;
  for (std::uint32_t c = 0; c < community_count; ++c) {
    touched.clear();
    for (auto v : groups[c]) {
      out.degree[c] += graph.degree[v];
      out.self_loop[c] += graph.self_loop[v];
      for (const auto& [u, w] : graph.adjacency[v]) {
        const auto d = membership[u];
        if (d == c) {
          if (u > v) out.self_loop[c] += w;
          continue;
        }
        if (link[d] == 0.0 && std::find(touched.begin(), touched.end(), d) == touched.end())
          touched.push_back(d);
        link[d] += w;
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto d : touched) {
      out.adjacency[c].emplace_back(d, link[d]);
      link[d] = 0.0;
    }
  }
  return out;
}

std::vector<std::uint32_t> split_disconnected(const WeightedGraph& graph,
                                              const std::vector<std::uint32_t>& membership) {
  const std::size_t n = graph.size();
  std::vector<std::uint32_t> out(n, kNone);
  std::uint32_t next = 0;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t start = 0; start < n; ++start) {
    if (out[start] != kNone) continue;
    out[start] = next;
    stack.assign(1, start);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (const auto& [u, w] : graph.adjacency[v]) {
        if (out[u] == kNone && membership[u] == membership[start]) {
          out[u] = next;
          stack.push_back(u);
        }
      }
    }
    ++next;
  }
  return out;
}

}  // namespace leiden_detail

namespace {

using namespace leiden_detail;

// One multi-level Leiden pass starting from `initial` on the base graph.
std::vector<std::uint32_t> leiden_pass(const WeightedGraph& base,
                                       const std::vector<std::uint32_t>& initial,
                                       const LeidenOptions& options, Rng& rng) {
  std::vector<std::uint32_t> node_of(base.size());
  std::iota(node_of.begin(), node_of.end(), 0u);

  WeightedGraph graph = base;
  std::vector<std::uint32_t> membership = initial;
  for (std::size_t level = 0; level < 64; ++level) {
    move_nodes(graph, membership, options.resolution, rng);
    const std::size_t communities = densify(membership);
    if (communities == graph.size()) break;

    auto refined = refine(graph, membership, options.resolution, options.theta, rng);
    const std::size_t refined_count = densify(refined);
    if (refined_count == graph.size()) break;

    WeightedGraph next = aggregate(graph, refined, refined_count);
    std::vector<std::uint32_t> next_membership(refined_count);
    for (std::uint32_t v = 0; v < graph.size(); ++v) next_membership[refined[v]] = membership[v];
    for (auto& x : node_of) x = refined[x];

    graph = std::move(next);
    membership = std::move(next_membership);
  }

  std::vector<std::uint32_t> flat(base.size());
  for (std::uint32_t v = 0; v < base.size(); ++v) flat[v] = membership[node_of[v]];
  return flat;
}

}  // namespace

Partition leiden(const WeightedGraph& graph, const LeidenOptions& options) {
  if (!(options.resolution > 0.0)) throw InputError("resolution must be positive");
  Rng rng(options.seed);
  Partition best = Partition::singletons(graph.size());
  if (graph.size() == 0 || graph.total_weight <= 0.0) return best;

  double best_quality = quality(graph, best, options.resolution);
  for (std::size_t iteration = 1; iteration <= options.max_iterations; ++iteration) {
    auto candidate = Partition::canonical(leiden_pass(graph, best.assignment, options, rng));
    const double q = quality(graph, candidate, options.resolution);
    if (!(q >= best_quality + options.tolerance)) break;
    best = std::move(candidate);
    best_quality = q;
    if (options.on_iteration) options.on_iteration(iteration, best_quality);
  }

  return Partition::canonical(split_disconnected(graph, best.assignment));
}

Partition detect_communities(const GraphLayer& layer, double resolution, std::uint64_t seed) {
  LeidenOptions options;
  options.resolution = resolution;
  options.seed = seed;
  return leiden(WeightedGraph::from_layer(layer), options);
}

}  // namespace graphmpa
