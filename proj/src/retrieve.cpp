#include "graphmpa/retrieve.hpp"

#include <algorithm>

#include "graphmpa/docmodel.hpp"
#include "graphmpa/error.hpp"
#include "graphmpa/kernels.hpp"

namespace graphmpa {

RetrievalResult rank(const HierarchicalIndex& index, std::string_view query, std::size_t top_k,
                     const Embedder& embedder) {
  if (count_tokens(query) == 0) throw InputError("rank: empty query");
  return rank(index, embedder.embed(query), top_k);
}

RetrievalResult rank(const HierarchicalIndex& index, const EmbeddingVector& query,
                     std::size_t top_k) {
  if (index.node_count() == 0) throw InputError("rank: index is empty");
  if (top_k == 0) throw InputError("rank: top_k must be positive");

  std::vector<const EmbeddingVector*> nodes;
  std::vector<RetrievedNode> entries;
  nodes.reserve(index.node_count());
  entries.reserve(index.node_count());
  for (const auto& layer : index.layers) {
    for (std::size_t i = 0; i < layer.node_count(); ++i) {
      nodes.push_back(&layer.embeddings[i]);
      entries.push_back(RetrievedNode{layer.node_ids[i], layer.layer_index, 0.0,
                                      index.chunk(layer.node_ids[i]).kind});
    }
  }
  const auto scores = kernels::score_nodes(query, nodes);
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].score = scores[i];

  const auto before = [](const RetrievedNode& a, const RetrievedNode& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.layer_index != b.layer_index) return a.layer_index < b.layer_index;
    return a.chunk_id < b.chunk_id;
  };
  const std::size_t keep = std::min(top_k, entries.size());
  std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(keep),
                    entries.end(), before);
  entries.resize(keep);
  return RetrievalResult{std::move(entries)};
}

std::vector<std::size_t> layer_distribution(const RetrievalResult& result,
                                            std::size_t layer_count) {
  std::size_t needed = layer_count;
  for (const auto& e : result.entries) needed = std::max(needed, e.layer_index + 1);
  std::vector<std::size_t> counts(needed, 0);
  for (const auto& e : result.entries) ++counts[e.layer_index];
  return counts;
}

}  // namespace graphmpa
