#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "graphmpa/backends.hpp"
#include "graphmpa/index.hpp"

namespace graphmpa {

struct RetrievedNode {
  ChunkId chunk_id = 0;
  std::size_t layer_index = 0;
  double score = 0.0;
  ChunkKind kind = ChunkKind::leaf;

  friend bool operator==(const RetrievedNode&, const RetrievedNode&) = default;
};

/// Ranked nodes, best first.
struct RetrievalResult {
  std::vector<RetrievedNode> entries;
};

/// Scores every node of every layer by cosine similarity to the query
/// embedding and keeps the global top_k. Ties go to the lower layer, then the
/// lower chunk id.
RetrievalResult rank(const HierarchicalIndex& index, std::string_view query, std::size_t top_k,
                     const Embedder& embedder);

/// Same ranking for an already embedded query.
RetrievalResult rank(const HierarchicalIndex& index, const EmbeddingVector& query,
                     std::size_t top_k);

/// Number of entries per layer, for layers [0, layer_count).
std::vector<std::size_t> layer_distribution(const RetrievalResult& result,
                                            std::size_t layer_count);

}  // namespace graphmpa
