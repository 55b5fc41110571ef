#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <cmath>
#include <set>

#include "graphmpa/error.hpp"
#include "graphmpa/graphbuild.hpp"
#include "graphmpa/persist.hpp"
#include "oracles.hpp"

using namespace graphmpa;

namespace {

EmbeddingVector random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return EmbeddingVector::normalized(std::move(v));
}

std::vector<std::vector<double>> random_symmetric(Rng& rng, std::size_t n, bool quantized) {
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double w = rng.uniform(-1.0, 1.0);
      if (quantized) w = std::round(w * 10.0) / 10.0;
      m[i][j] = m[j][i] = w;
    }
  return m;
}

SimilarityMatrix to_matrix(const std::vector<std::vector<double>>& m) {
  SimilarityMatrix out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) out(i, j) = m[i][j];
  return out;
}

std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> as_tuples(const std::vector<Edge>& edges) {
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
  for (const auto& e : edges) out.emplace_back(e.u, e.v, e.w);
  return out;
}

DocumentChunk leaf(ChunkId id, std::string text) {
  DocumentChunk c;
  c.id = id;
  c.token_count = count_tokens(text);
  c.text = std::move(text);
  return c;
}

}  // namespace

TEST_CASE("cosine_similarity") {
  const auto v = EmbeddingVector::normalized({0.3, -1.2, 4.0});
  CHECK(std::abs(cosine_similarity(v, v) - 1.0) <= 1e-12);
  const auto x = EmbeddingVector::normalized({1, 0});
  const auto y = EmbeddingVector::normalized({0, 1});
  const auto d = EmbeddingVector::normalized({1, 1});
  CHECK(cosine_similarity(x, y) == 0.0);
  CHECK(std::abs(cosine_similarity(x, d) - 0.70710678) <= 1e-8);
  CHECK(cosine_similarity(x, d) == cosine_similarity(d, x));
  CHECK_THROWS_AS(cosine_similarity(x, EmbeddingVector::normalized({1, 2, 3})), InputError);

  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_unit(rng, 16), b = random_unit(rng, 16);
    const double c = cosine_similarity(a, b);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(std::abs(c - oracle::cosine(a.values, b.values)) <= 1e-12);
  }
}

TEST_CASE("build_similarity_matrix") {
  const std::vector<EmbeddingVector> one{EmbeddingVector::normalized({2.0, 0.0})};
  const auto m1 = build_similarity_matrix(one);
  REQUIRE(m1.size() == 1);
  CHECK(m1(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<EmbeddingVector> ortho{EmbeddingVector::normalized({1, 0}),
                                           EmbeddingVector::normalized({0, 1})};
  const auto m2 = build_similarity_matrix(ortho);
  CHECK(m2(0, 1) == 0.0);
  CHECK(m2(1, 0) == 0.0);
  CHECK(m2(1, 1) == doctest::Approx(1.0));

  CHECK_THROWS_AS(build_similarity_matrix(std::vector<EmbeddingVector>{}), InputError);

  Rng rng(11);
  std::vector<EmbeddingVector> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(random_unit(rng, 24));
  const auto m = build_similarity_matrix(ten);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      CHECK(std::abs(m(i, j) - oracle::cosine(ten[i].values, ten[j].values)) <= 1e-12);
      CHECK(std::abs(m(i, j) - m(j, i)) <= 1e-12);
    }
  for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(m(i, i) - 1.0) <= 1e-9);
}

TEST_CASE("prune_edges examples") {
  SimilarityMatrix id(2);
  id(0, 0) = id(1, 1) = 1.0;
  CHECK(prune_edges(id, 0.5, 1).empty());

  const auto m = to_matrix({{1, 0.9}, {0.9, 1}});
  const auto edges = prune_edges(m, 0.5, 1);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0] == Edge{0, 1, 0.9});
}

TEST_CASE("prune_edges matches the brute-force oracle") {
  Rng rng(5);
  {
    const auto m = random_symmetric(rng, 12, false);
    CHECK(as_tuples(prune_edges(to_matrix(m), 0.3, 3)) == oracle::prune(m, 0.3, 3));
  }
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    const auto m = random_symmetric(rng, n, trial % 2 == 0);
    const double tau = rng.uniform(-0.2, 0.8);
    const std::size_t k = 1 + rng.below(n + 2);
    const auto got = prune_edges(to_matrix(m), tau, k);
    CHECK(as_tuples(got) == oracle::prune(m, tau, k));
    for (const auto& e : got) {
      CHECK(e.u < e.v);
      CHECK(e.w >= tau);
    }
  }
}

TEST_CASE("k_edges >= n-1 gives the plain threshold graph") {
  Rng rng(9);
  const auto m = random_symmetric(rng, 15, false);
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> threshold;
  for (std::uint32_t i = 0; i < 15; ++i)
    for (std::uint32_t j = i + 1; j < 15; ++j)
      if (m[i][j] >= 0.2) threshold.emplace_back(i, j, m[i][j]);
  CHECK(as_tuples(prune_edges(to_matrix(m), 0.2, 14)) == threshold);
  CHECK(as_tuples(prune_edges(to_matrix(m), 0.2, 100)) == threshold);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(120);
    std::vector<EmbeddingVector> e;
    for (std::size_t i = 0; i < n; ++i) e.push_back(random_unit(rng, 1 + rng.below(40) + 1));
    // uniform dim per trial
    const std::size_t dim = e[0].dim();
    for (auto& v : e) v = random_unit(rng, dim);
    for (int threads : {1, 4}) {
      omp_set_num_threads(threads);
      const auto par = kernels::similarity_matrix(e);
      const auto ser = kernels::serial::similarity_matrix(e);
      CHECK(std::memcmp(par.entries().data(), ser.entries().data(), n * n * sizeof(double)) == 0);
      const double tau = rng.uniform(-0.5, 0.5);
      const std::size_t k = 1 + rng.below(12);
      CHECK(kernels::prune_edges(par, tau, k) == kernels::serial::prune_edges(ser, tau, k));
      std::vector<const EmbeddingVector*> nodes;
      for (const auto& v : e) nodes.push_back(&v);
      const auto q = random_unit(rng, dim);
      const auto sp = kernels::score_nodes(q, nodes);
      const auto ss = kernels::serial::score_nodes(q, nodes);
      CHECK(std::memcmp(sp.data(), ss.data(), n * sizeof(double)) == 0);
    }
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("build_layer") {
  MockEmbedder embedder;
  BuildConfig cfg;
  const std::vector<DocumentChunk> single{leaf(7, "only one")};
  const auto l1 = build_layer(single, 0, cfg, embedder);
  CHECK(l1.node_ids == std::vector<ChunkId>{7});
  CHECK(l1.edges.empty());

  const std::vector<DocumentChunk> twins{leaf(0, "same words here"), leaf(1, "same words here")};
  const auto l2 = build_layer(twins, 0, cfg, embedder);
  REQUIRE(l2.edges.size() == 1);
  CHECK(l2.edges[0].w == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(build_layer(std::vector<DocumentChunk>{}, 0, cfg, embedder), InputError);

  Rng rng(2);
  std::vector<DocumentChunk> twenty;
  for (ChunkId i = 0; i < 20; ++i) {
    std::string t;
    for (int w = 0; w < 6; ++w) t += "v" + std::to_string(rng.below(15)) + " ";
    twenty.push_back(leaf(i, t));
  }
  cfg.tau = 0.3;
  cfg.k_edges = 4;
  const auto l20 = build_layer(twenty, 3, cfg, embedder);
  CHECK(l20.layer_index == 3);
  std::vector<std::vector<double>> m(20, std::vector<double>(20));
  for (std::size_t i = 0; i < 20; ++i) {
    const auto vi = oracle::hashed_bag(twenty[i].text, 64);
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(l20.embeddings[i] == embedder.embed(twenty[i].text));
      m[i][j] = cosine_similarity(l20.embeddings[i], l20.embeddings[j]);
      CHECK(std::abs(m[i][j] - oracle::cosine(vi, oracle::hashed_bag(twenty[j].text, 64))) <= 1e-12);
    }
  }
  CHECK(as_tuples(l20.edges) == oracle::prune(m, 0.3, 4));
}

TEST_CASE("build_hierarchy: degenerate corpus") {
  MockEmbedder embedder;
  MockSummarizer summarizer;
  BuildConfig cfg;
  const auto index = build_hierarchy("just a few words", cfg, embedder, summarizer);
  REQUIRE(index.layers.size() == 1);
  CHECK(index.layers[0].node_count() == 2);
  CHECK(index.communities.empty());
  const auto& summary = index.chunk(index.layers[0].node_ids[0]);
  const auto& leaf0 = index.chunk(index.layers[0].node_ids[1]);
  CHECK(summary.kind == ChunkKind::summary);
  CHECK(leaf0.kind == ChunkKind::leaf);
  CHECK(summary.source_ids == std::vector<ChunkId>{leaf0.id});

  CHECK_THROWS_AS(build_hierarchy("   ", cfg, embedder, summarizer), InputError);
}

TEST_CASE("build_hierarchy: two disjoint topics give two layer-1 nodes") {
  MockEmbedder embedder(256);
  MockSummarizer summarizer;
  BuildConfig cfg;
  cfg.large = 60;
  cfg.small = 12;
  cfg.tau = 0.2;
  cfg.k_edges = 200;
  // two blocks, each a repeated small vocabulary so chunks within a block are similar
  std::string text;
  for (int i = 0; i < 60; ++i) text += "apple banana cherry date elder fig grape ";
  text += "\n";
  std::string second;
  for (int i = 0; i < 60; ++i) second += "xray yankee zulu quartz oxygen nitrogen ";
  const auto index = build_hierarchy(text + second, cfg, embedder, summarizer);
  REQUIRE(index.layers.size() == 2);
  CHECK(index.layers[1].node_count() == 2);
}

TEST_CASE("build_hierarchy invariants on random corpora") {
  MockEmbedder embedder(64, 4);
  MockSummarizer summarizer;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed);
    BuildConfig cfg;
    cfg.large = 40 + rng.below(60);
    cfg.small = 8 + rng.below(10);
    cfg.n_layers = 2 + rng.below(3);
    cfg.tau = rng.uniform(0.1, 0.6);
    cfg.k_edges = 2 + rng.below(8);
    cfg.seed = seed;
    const auto text = oracle::topic_corpus(rng, 2 + rng.below(4), 60 + rng.below(120));
    const auto index = build_hierarchy(text, cfg, embedder, summarizer);

    CHECK(index.layers.size() <= cfg.n_layers);
    CHECK(index.communities.size() + 1 == index.layers.size());
    std::set<ChunkId> seen;
    for (std::size_t l = 0; l < index.layers.size(); ++l) {
      const auto& layer = index.layers[l];
      CHECK(layer.layer_index == l);
      CHECK(layer.embeddings.size() == layer.node_count());
      std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
      for (const auto& e : layer.edges) {
        CHECK(e.w >= cfg.tau);
        CHECK(e.u < e.v);
        CHECK(e.v < layer.node_count());
        CHECK(pairs.insert({e.u, e.v}).second);
      }
      for (auto id : layer.node_ids) {
        CHECK(seen.insert(id).second);
        const auto& c = index.chunk(id);
        CHECK(c.token_count == count_tokens(c.text));
        CHECK((c.kind == ChunkKind::leaf) == c.source_ids.empty());
        if (l > 0) CHECK(c.token_count <= cfg.small);
        for (auto s : c.source_ids)
          if (l > 0) CHECK(index.chunk(s).layer_index == l - 1);
      }
      if (l > 0) {
        const auto& records = index.communities[l - 1];
        CHECK(records.size() == layer.node_count());
        CHECK(layer.node_count() <= index.layers[l - 1].node_count());
        std::vector<int> covered(index.layers[l - 1].node_count(), 0);
        for (std::size_t c = 0; c < records.size(); ++c) {
          CHECK(records[c].summary_id == layer.node_ids[c]);
          std::vector<ChunkId> member_ids;
          for (auto m : records[c].members) {
            ++covered[m];
            member_ids.push_back(index.layers[l - 1].node_ids[m]);
          }
          CHECK(index.chunk(records[c].summary_id).source_ids == member_ids);
        }
        for (int c : covered) CHECK(c == 1);
      }
    }
    CHECK(seen.size() == index.chunks.size());

    const auto again = build_hierarchy(text, cfg, embedder, summarizer);
    CHECK(serialize_index(again) == serialize_index(index));
  }
}

TEST_CASE("backend errors carry the layer index") {
  struct FailingSummarizer final : Summarizer {
    mutable int calls = 0;
    std::string summarize(std::span<const std::string> texts, std::size_t max_len) const override {
      // layer 0 summaries succeed, community summaries fail
      if (texts.size() > 1) throw BackendError("down", 503, true);
      return MockSummarizer().summarize(texts, max_len);
    }
  };
  MockEmbedder embedder;
  FailingSummarizer summarizer;
  BuildConfig cfg;
  cfg.large = 60;
  cfg.small = 10;
  cfg.tau = 0.1;
  std::string text;
  for (int i = 0; i < 40; ++i) text += "a b c d e f. ";
  try {
    build_hierarchy(text, cfg, embedder, summarizer);
    FAIL("expected an error");
  } catch (const BackendError& e) {
    REQUIRE(e.layer.has_value());
    CHECK(*e.layer == 1);
  }
}
