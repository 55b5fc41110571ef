#include "graphmpa/graphbuild.hpp"

#include <spdlog/spdlog.h>

#include "graphmpa/community.hpp"
#include "graphmpa/error.hpp"

namespace graphmpa {

std::size_t HierarchicalIndex::node_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.node_count();
  return total;
}

const DocumentChunk& HierarchicalIndex::chunk(ChunkId id) const {
  const auto it = chunks.find(id);
  if (it == chunks.end()) throw InputError("unknown chunk id " + std::to_string(id));
  return it->second;
}

SimilarityMatrix build_similarity_matrix(std::span<const EmbeddingVector> embeddings) {
  return kernels::similarity_matrix(embeddings);
}

std::vector<Edge> prune_edges(const SimilarityMatrix& m, double tau, std::size_t k_edges) {
  return kernels::prune_edges(m, tau, k_edges);
}

GraphLayer build_layer(std::span<const DocumentChunk> chunks, std::size_t layer_index,
                       const BuildConfig& config, const Embedder& embedder) {
  if (chunks.empty()) throw InputError("build_layer: no chunks");
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  GraphLayer layer;
  layer.layer_index = layer_index;
  for (const auto& c : chunks) {
    texts.push_back(c.text);
    layer.node_ids.push_back(c.id);
  }
  layer.embeddings = embedder.embed_batch(texts);
  const auto m = build_similarity_matrix(layer.embeddings);
  layer.edges = prune_edges(m, config.tau, config.k_edges);
  return layer;
}

namespace {

DocumentChunk make_summary(ChunkId id, std::string text, std::size_t layer,
                           std::vector<ChunkId> sources) {
  if (count_tokens(text) == 0)
    throw BackendError("summarizer returned an empty summary", 200, false);
  DocumentChunk chunk;
  chunk.id = id;
  chunk.token_count = count_tokens(text);
  chunk.text = std::move(text);
  chunk.kind = ChunkKind::summary;
  chunk.layer_index = layer;
  chunk.source_ids = std::move(sources);
  return chunk;
}

}  // namespace

HierarchicalIndex build_hierarchy(std::string_view text, const BuildConfig& config,
                                  const Embedder& embedder, const Summarizer& summarizer) {
  config.validate();
  if (count_tokens(text) == 0) throw InputError("build_hierarchy: text has no tokens");

  HierarchicalIndex index;
  index.config = config;
  std::size_t current_layer = 0;

  try {
    const auto large_docs = split_text(text, config.large);
    std::vector<std::vector<std::string>> groups;
    groups.reserve(large_docs.size());
    for (const auto& doc : large_docs) groups.push_back({doc.text});
    auto large_summaries = summarizer.summarize_batch(groups, config.small);

    ChunkId next_id = large_docs.size();
    std::vector<DocumentChunk> leaves;
    std::vector<DocumentChunk> nodes;
    for (std::size_t i = 0; i < large_docs.size(); ++i) {
      auto parts = split_text(large_docs[i].text, config.small, next_id);
      next_id += parts.size();
      std::vector<ChunkId> sources;
      for (const auto& p : parts) sources.push_back(p.id);
      nodes.push_back(make_summary(i, std::move(large_summaries[i]), 0, std::move(sources)));
      for (auto& p : parts) leaves.push_back(std::move(p));
    }
    for (auto& leaf : leaves) nodes.push_back(std::move(leaf));

    index.layers.push_back(build_layer(nodes, 0, config, embedder));
    for (auto& c : nodes) index.chunks.emplace(c.id, std::move(c));

    for (current_layer = 1; current_layer < config.n_layers; ++current_layer) {
      const GraphLayer& below = index.layers.back();
      if (below.node_count() <= 2) break;
      const auto partition =
          detect_communities(below, config.resolution, config.seed + current_layer - 1);
      if (partition.community_count == below.node_count()) break;

      const auto members = partition.members();
      std::vector<std::vector<std::string>> texts(members.size());
      for (std::size_t c = 0; c < members.size(); ++c)
        for (auto v : members[c]) texts[c].push_back(index.chunk(below.node_ids[v]).text);
      auto summaries = summarizer.summarize_batch(texts, config.small);

      std::vector<DocumentChunk> layer_chunks;
      std::vector<CommunityRecord> records;
      for (std::size_t c = 0; c < members.size(); ++c) {
        std::vector<ChunkId> sources;
        for (auto v : members[c]) sources.push_back(below.node_ids[v]);
        layer_chunks.push_back(
            make_summary(next_id, std::move(summaries[c]), current_layer, std::move(sources)));
        records.push_back(CommunityRecord{static_cast<std::uint32_t>(c), members[c], next_id});
        ++next_id;
      }
      spdlog::debug("layer {}: {} nodes -> {} communities", current_layer - 1,
                    below.node_count(), members.size());

      auto layer = build_layer(layer_chunks, current_layer, config, embedder);
      index.communities.push_back(std::move(records));
      index.layers.push_back(std::move(layer));
      for (auto& c : layer_chunks) index.chunks.emplace(c.id, std::move(c));
    }
  } catch (BackendError& e) {
    e.layer = current_layer;
    throw;
  }
  return index;
}

}  // namespace graphmpa
