#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "graphmpa/backends.hpp"
#include "graphmpa/docmodel.hpp"
#include "graphmpa/index.hpp"
#include "graphmpa/kernels.hpp"

namespace graphmpa {

/// entries(i, j) = cosine_similarity(e_i, e_j). Throws InputError when the
/// list is empty or dimensions differ.
SimilarityMatrix build_similarity_matrix(std::span<const EmbeddingVector> embeddings);

/// Keeps, for each node, its k_edges most similar other nodes whose weight
/// is at least tau. Ties go to the lower node id. Both directions of a pair
/// collapse into one (u < v) edge; output is sorted by (u, v).
/// k_edges >= n - 1 gives the plain threshold graph.
std::vector<Edge> prune_edges(const SimilarityMatrix& m, double tau, std::size_t k_edges);

/// Embeds `chunks` in order and connects them with prune_edges.
GraphLayer build_layer(std::span<const DocumentChunk> chunks, std::size_t layer_index,
                       const BuildConfig& config, const Embedder& embedder);

/// Builds the layered index for `text`.
///
/// Layer 0 holds one summary per large document followed by the small chunks
/// of every large document. Each further layer holds one summary per
/// community of the layer below. Building stops after config.n_layers layers,
/// or earlier when a layer has at most two nodes or its communities are all
/// singletons. Backend failures are rethrown with BackendError::layer set.
HierarchicalIndex build_hierarchy(std::string_view text, const BuildConfig& config,
                                  const Embedder& embedder, const Summarizer& summarizer);

}  // namespace graphmpa
