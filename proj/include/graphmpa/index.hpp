#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "graphmpa/backends.hpp"
#include "graphmpa/docmodel.hpp"
#include "graphmpa/kernels.hpp"

namespace graphmpa {

/// One hierarchy level: nodes (chunk ids with embeddings) and thresholded
/// similarity edges between node positions.
struct GraphLayer {
  std::size_t layer_index = 0;
  std::vector<ChunkId> node_ids;
  std::vector<EmbeddingVector> embeddings;  // aligned with node_ids
  std::vector<Edge> edges;

  std::size_t node_count() const noexcept { return node_ids.size(); }

  friend bool operator==(const GraphLayer&, const GraphLayer&) = default;
};

/// A community detected on some layer and the summary chunk made from it.
struct CommunityRecord {
  std::uint32_t community_id = 0;
  std::vector<std::uint32_t> members;  // node positions in the layer
  ChunkId summary_id = 0;

  friend bool operator==(const CommunityRecord&, const CommunityRecord&) = default;
};

/// The queryable artifact: layers (0 = base), every chunk by id, and for each
/// layer that fed a next layer, its communities. Immutable once built.
struct HierarchicalIndex {
  std::vector<GraphLayer> layers;
  std::map<ChunkId, DocumentChunk> chunks;
  std::vector<std::vector<CommunityRecord>> communities;  // communities[L] built from layers[L]
  BuildConfig config;

  std::size_t node_count() const;
  const DocumentChunk& chunk(ChunkId id) const;

  friend bool operator==(const HierarchicalIndex&, const HierarchicalIndex&) = default;
};

}  // namespace graphmpa
