#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "graphmpa/backends.hpp"

namespace graphmpa {

/// Undirected weighted edge with u < v.
struct Edge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  double w = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Dense symmetric n x n matrix of pairwise similarities, row-major.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}
  SimilarityMatrix(std::size_t n, std::vector<double> entries);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }
  const std::vector<double>& entries() const noexcept { return entries_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

double dot(std::span<const double> a, std::span<const double> b);

/// Cosine similarity clamped to [-1, 1]. Throws InputError on dim mismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

namespace kernels {

// OpenMP kernels. Each output cell or row is produced by exactly one thread
// with the same arithmetic as the serial reference, so results are
// bit-identical to it regardless of thread count.

SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> embeddings);

/// Per-row top-k (weight desc, then node id asc) excluding the diagonal,
/// thresholded at tau, merged into unique unordered pairs sorted by (u, v).
std::vector<Edge> prune_edges(const SimilarityMatrix& m, double tau, std::size_t k_edges);

/// Cosine of `query` against every node.
std::vector<double> score_nodes(const EmbeddingVector& query,
                                std::span<const EmbeddingVector* const> nodes);

namespace serial {

SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> embeddings);
std::vector<Edge> prune_edges(const SimilarityMatrix& m, double tau, std::size_t k_edges);
std::vector<double> score_nodes(const EmbeddingVector& query,
                                std::span<const EmbeddingVector* const> nodes);

}  // namespace serial
}  // namespace kernels
}  // namespace graphmpa
