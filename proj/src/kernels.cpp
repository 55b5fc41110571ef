#include "graphmpa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "graphmpa/error.hpp"

namespace graphmpa {

namespace {

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

double cosine_from(double dot_ab, double norm_a, double norm_b) {
  return clamp_unit(dot_ab / (norm_a * norm_b));
}

void check_uniform(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.empty()) throw InputError("similarity matrix of an empty set");
  const auto dim = embeddings.front().dim();
  for (const auto& e : embeddings)
    if (e.dim() != dim) throw InputError("embeddings have mixed dimensions");
}

std::vector<double> norms_of(std::span<const EmbeddingVector> embeddings) {
  std::vector<double> norms(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) norms[i] = embeddings[i].norm();
  return norms;
}

// Row u's candidate neighbours ordered by (weight desc, id asc), cut to k and
// thresholded. Emits normalized (min, max) pairs.
void select_row(const SimilarityMatrix& m, std::size_t u, double tau, std::size_t k,
                std::vector<std::uint32_t>& scratch, std::vector<Edge>& out) {
  const std::size_t n = m.size();
  scratch.clear();
  for (std::size_t v = 0; v < n; ++v)
    if (v != u && !std::isnan(m(u, v))) scratch.push_back(static_cast<std::uint32_t>(v));
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    const double wa = m(u, a), wb = m(u, b);
    return wa != wb ? wa > wb : a < b;
  };
  const std::size_t keep = std::min(k, scratch.size());
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(keep),
                    scratch.end(), better);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::uint32_t v = scratch[i];
    if (m(u, v) < tau) break;
    const auto lo = static_cast<std::uint32_t>(std::min<std::size_t>(u, v));
    const auto hi = static_cast<std::uint32_t>(std::max<std::size_t>(u, v));
    out.push_back(Edge{lo, hi, m(lo, hi)});
  }
}

std::vector<Edge> merge_pairs(std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }),
              edges.end());
  return edges;
}

}  // namespace

SimilarityMatrix::SimilarityMatrix(std::size_t n, std::vector<double> entries)
    : n_(n), entries_(std::move(entries)) {
  if (entries_.size() != n * n) throw InputError("similarity matrix needs n*n entries");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw InputError("cosine_similarity: dimension mismatch");
  return cosine_from(dot(a.values, b.values), a.norm(), b.norm());
}

namespace kernels {

SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> embeddings) {
  check_uniform(embeddings);
  const auto n = static_cast<std::ptrdiff_t>(embeddings.size());
  const auto norms = norms_of(embeddings);
  SimilarityMatrix m(embeddings.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = i; j < n; ++j) {
      const double s = cosine_from(dot(embeddings[i].values, embeddings[j].values),
                                   norms[i], norms[j]);
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  return m;
}

std::vector<Edge> prune_edges(const SimilarityMatrix& m, double tau, std::size_t k_edges) {
  const auto n = static_cast<std::ptrdiff_t>(m.size());
  std::vector<std::vector<Edge>> rows(m.size());
#pragma omp parallel
  {
    std::vector<std::uint32_t> scratch;
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t u = 0; u < n; ++u)
      select_row(m, static_cast<std::size_t>(u), tau, k_edges, scratch, rows[u]);
  }
  std::vector<Edge> all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  return merge_pairs(std::move(all));
}

std::vector<double> score_nodes(const EmbeddingVector& query,
                                std::span<const EmbeddingVector* const> nodes) {
  for (const auto* node : nodes)
    if (node->dim() != query.dim()) throw InputError("score_nodes: dimension mismatch");
  const double qnorm = query.norm();
  const auto n = static_cast<std::ptrdiff_t>(nodes.size());
  std::vector<double> scores(nodes.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    scores[i] = cosine_from(dot(query.values, nodes[i]->values), qnorm, nodes[i]->norm());
  return scores;
}

namespace serial {

SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> embeddings) {
  check_uniform(embeddings);
  const std::size_t n = embeddings.size();
  const auto norms = norms_of(embeddings);
  SimilarityMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = cosine_from(dot(embeddings[i].values, embeddings[j].values),
                                   norms[i], norms[j]);
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  return m;
}

std::vector<Edge> prune_edges(const SimilarityMatrix& m, double tau, std::size_t k_edges) {
  std::vector<Edge> all;
  std::vector<std::uint32_t> scratch;
  for (std::size_t u = 0; u < m.size(); ++u) select_row(m, u, tau, k_edges, scratch, all);
  return merge_pairs(std::move(all));
}

std::vector<double> score_nodes(const EmbeddingVector& query,
                                std::span<const EmbeddingVector* const> nodes) {
  const double qnorm = query.norm();
  std::vector<double> scores;
  scores.reserve(nodes.size());
  for (const auto* node : nodes) {
    if (node->dim() != query.dim()) throw InputError("score_nodes: dimension mismatch");
    scores.push_back(cosine_from(dot(query.values, node->values), qnorm, node->norm()));
  }
  return scores;
}

}  // namespace serial
}  // namespace kernels
}  // namespace graphmpa
