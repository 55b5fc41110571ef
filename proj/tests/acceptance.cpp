// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "graphmpa/community.hpp"
#include "graphmpa/error.hpp"
#include "graphmpa/graphbuild.hpp"
#include "graphmpa/metrics.hpp"
#include "graphmpa/modeseek.hpp"
#include "graphmpa/persist.hpp"
#include "graphmpa/prefsynth.hpp"
#include "graphmpa/retrieve.hpp"
#include "oracles.hpp"

using namespace graphmpa;
using namespace graphmpa::modeseek;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int number, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.ok && in_time;
  failures += !pass;
  std::printf("%s %2d %-28s %7.2fs (limit %.0fs)  %s%s\n", pass ? "PASS" : "FAIL", number, name, secs, limit_s,
              o.detail.c_str(), in_time ? "" : " [over time]");
  std::fflush(stdout);
}

GraphLayer layer_from(std::size_t n, std::vector<Edge> edges) {
  GraphLayer layer;
  for (std::size_t i = 0; i < n; ++i) {
    layer.node_ids.push_back(i);
    layer.embeddings.push_back(EmbeddingVector::normalized({1.0}));
  }
  layer.edges = std::move(edges);
  return layer;
}

std::vector<Edge> random_connected(Rng& rng, std::size_t n, double extra_p) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint32_t v = 1; v < n; ++v) pairs.insert({static_cast<std::uint32_t>(rng.below(v)), v});
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v)
      if (rng.uniform() < extra_p) pairs.insert({u, v});
  std::vector<Edge> edges;
  for (auto [u, v] : pairs) edges.push_back({u, v, rng.uniform(0.1, 1.0)});
  return edges;
}

HierarchicalIndex random_index(std::uint64_t seed, std::size_t layers) {
  Rng rng(seed);
  BuildConfig cfg;
  cfg.large = 20 + rng.below(20);
  cfg.small = 4 + rng.below(4);
  cfg.n_layers = layers;
  cfg.tau = rng.uniform(0.1, 0.4);
  cfg.k_edges = 2 + rng.below(6);
  cfg.resolution = rng.uniform(0.7, 1.3);
  cfg.seed = seed;
  return build_hierarchy(oracle::topic_corpus(rng, 2 + rng.below(3), 30 + rng.below(60), 4 + rng.below(10)), cfg,
                         MockEmbedder(16 + rng.below(32)), MockSummarizer());
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Trapezoid KL between N(mu, s) and 0.5 N(-4,1) + 0.5 N(4,1) on a wide grid.
double grid_kl(double mu, double s, bool reverse) {
  constexpr double kPi = 3.14159265358979323846;
  const int n = 6001;
  const double lo = -25, hi = 25, h = (hi - lo) / (n - 1);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + i * h;
    const double p = 0.5 * (std::exp(-0.5 * (x + 4) * (x + 4)) + std::exp(-0.5 * (x - 4) * (x - 4))) / std::sqrt(2 * kPi);
    const double logq = -0.5 * (x - mu) * (x - mu) / (s * s) - std::log(s * std::sqrt(2 * kPi));
    const double f = reverse ? std::exp(logq) * (logq - std::log(p)) : p * (std::log(p) - logq);
    total += (i == 0 || i == n - 1 ? 0.5 : 1.0) * f * h;
  }
  return total;
}

std::pair<double, double> grid_argmin(bool reverse, double mu_lo, double mu_hi) {
  double best = 1e300, bm = 0, bs = 1;
  for (double mu = mu_lo; mu <= mu_hi + 1e-9; mu += 0.25)
    for (double s = 0.2; s <= 5.0 + 1e-9; s += 0.1) {
      const double v = grid_kl(mu, s, reverse);
      if (v < best) best = v, bm = mu, bs = s;
    }
  for (double step : {0.05, 0.01, 0.002}) {
    const double cm = bm, cs = bs;
    for (int i = -6; i <= 6; ++i)
      for (int j = -6; j <= 6; ++j) {
        const double mu = cm + i * step, s = cs + j * step;
        if (s <= 0.05) continue;
        const double v = grid_kl(mu, s, reverse);
        if (v < best) best = v, bm = mu, bs = s;
      }
  }
  return {bm, bs};
}

std::vector<double> random_distribution(Rng& rng, std::size_t n, bool allow_zero) {
  std::vector<double> p(n);
  double sum = 0;
  for (double& x : p) {
    x = allow_zero && rng.below(4) == 0 ? 0.0 : rng.uniform(0.01, 1.0);
    sum += x;
  }
  if (sum == 0) p[0] = sum = 1;
  for (double& x : p) x /= sum;
  return p;
}

}  // namespace

int main() {
  criterion(1, "leiden_optimality", 30, [] {
    Rng rng(2024);
    int optimal = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.below(7);
      const auto edges = random_connected(rng, n, 0.35);
      const auto layer = layer_from(n, edges);
      const auto p = detect_communities(layer, 1.0, trial);
      optimal += quality(layer, p, 1.0) >= oracle::best_modularity(n, edges, 1.0) - 1e-9;
    }
    std::vector<Edge> clique;
    for (std::uint32_t base : {0u, 4u})
      for (std::uint32_t i = 0; i < 4; ++i)
        for (std::uint32_t j = i + 1; j < 4; ++j) clique.push_back({base + i, base + j, 1.0});
    clique.push_back({3, 4, 0.6});
    std::sort(clique.begin(), clique.end(), [](auto& a, auto& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    const double q_best = oracle::best_modularity(8, clique, 1.0);
    int clique_ok = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto layer = layer_from(8, clique);
      const auto p = detect_communities(layer, 1.0, seed);
      clique_ok += std::abs(quality(layer, p, 1.0) - q_best) <= 1e-12 &&
                   oracle::same_grouping(p.assignment, {0, 0, 0, 0, 1, 1, 1, 1});
    }
    return Outcome{optimal >= 45 && clique_ok == 50,
                   fmt("optimal %.0f/50, two-clique %.0f/50", optimal, clique_ok)};
  });

  criterion(2, "retrieval_oracle", 10, [] {
    MockEmbedder embedder(32);
    int mismatches = 0, queries = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      BuildConfig cfg;
      cfg.large = 30;
      cfg.small = 6;
      cfg.n_layers = 3;
      cfg.tau = 0.2;
      cfg.k_edges = 4;
      cfg.seed = seed;
      const auto index = build_hierarchy(oracle::topic_corpus(rng, 3, 40, 4 + seed % 8), cfg, embedder, MockSummarizer());
      for (int q = 0; q < 5; ++q) {
        std::string query;
        for (std::size_t w = 0, n = 1 + rng.below(4); w < n; ++w)
          query += "t" + std::to_string(rng.below(3)) + "w" + std::to_string(rng.below(6)) + " ";
        const std::size_t k = 1 + rng.below(index.node_count() + 3);
        const auto qv = embedder.embed(query);
        struct S {
          double score;
          std::size_t layer;
          ChunkId id;
          double plain;  // independently computed cosine
        };
        std::vector<S> all;
        for (const auto& layer : index.layers)
          for (std::size_t i = 0; i < layer.node_count(); ++i)
            all.push_back({cosine_similarity(qv, layer.embeddings[i]), layer.layer_index, layer.node_ids[i],
                           oracle::cosine(qv.values, layer.embeddings[i].values)});
        std::sort(all.begin(), all.end(), [](const S& a, const S& b) {
          if (a.score != b.score) return a.score > b.score;
          if (a.layer != b.layer) return a.layer < b.layer;
          return a.id < b.id;
        });
        all.resize(std::min(all.size(), k));
        const auto got = rank(index, query, k, embedder);
        bool same = got.entries.size() == all.size();
        for (std::size_t i = 0; same && i < all.size(); ++i)
          same = got.entries[i].chunk_id == all[i].id && got.entries[i].layer_index == all[i].layer &&
                 got.entries[i].score == all[i].score && std::abs(all[i].score - all[i].plain) <= 1e-12;
        mismatches += !same;
        ++queries;
      }
    }
    return Outcome{mismatches == 0, fmt("%.0f/%.0f queries match", queries - mismatches, queries)};
  });

  criterion(3, "prune_oracle", 5, [] {
    Rng rng(3);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.below(30);
      std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
      std::vector<double> flat(n * n, 1.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          // coarse values so ties happen
          const double v = std::round(rng.uniform(-1, 1) * 8) / 8;
          m[i][j] = m[j][i] = flat[i * n + j] = flat[j * n + i] = v;
        }
      const double tau = std::round(rng.uniform(-0.5, 0.9) * 8) / 8;
      const std::size_t k = 1 + rng.below(n + 2);
      const auto got = kernels::prune_edges(SimilarityMatrix(n, flat), tau, k);
      std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> tuples;
      for (const auto& e : got) tuples.emplace_back(e.u, e.v, e.w);
      agree += tuples == oracle::prune(m, tau, k) &&
               kernels::serial::prune_edges(SimilarityMatrix(n, flat), tau, k) == got;
    }
    return Outcome{agree == 100, fmt("%.0f/100 matrices match", agree)};
  });

  criterion(4, "mode_seeking_contrast", 60, [] {
    const GaussianMixtureTarget target{{0.5, 0.5}, {-4.0, 4.0}, 1.0};
    const auto [fwd_mu, fwd_s] = grid_argmin(false, -8, 8);
    const auto [rev_mu, rev_s] = grid_argmin(true, 0, 8);
    const auto [rev_mu_neg, rev_s_neg] = grid_argmin(true, -8, 0);
    FitOptions opts;
    const auto fwd = fit_policy(target, Objective::forward_kl, opts);
    bool ok = std::abs(fwd.params[0]) <= 0.05 && std::abs(fwd.params[0] - fwd_mu) <= 0.05 &&
              std::abs(std::exp(fwd.params[1]) - fwd_s) <= 0.05;
    int locked = 0;
    bool oracle_agrees = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      opts.seed = seed;
      const auto rev = fit_policy(target, Objective::reverse_kl, opts);
      const double mu = rev.params[0], s = std::exp(rev.params[1]);
      if (std::abs(mu) >= 3.5 && std::abs(mu) <= 4.5) {
        ++locked;
        const double om = mu > 0 ? rev_mu : rev_mu_neg, os = mu > 0 ? rev_s : rev_s_neg;
        oracle_agrees &= std::abs(mu - om) <= 0.05 && std::abs(s - os) <= 0.05;
      }
    }
    ok &= locked >= 18 && oracle_agrees && std::abs(rev_mu - 4) <= 0.5 && std::abs(rev_mu_neg + 4) <= 0.5;
    return Outcome{ok, fmt("forward mu %.4f (grid %.3f), reverse locked %.0f/20", fwd.params[0], fwd_mu, locked) +
                           (oracle_agrees ? ", grid agrees" : ", grid DISAGREES")};
  });

  criterion(5, "gradient_check", 30, [] {
    Rng rng(5);
    double worst[3] = {0, 0, 0};
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng.below(15);
      const auto target = random_distribution(rng, n, trial % 5 == 0);
      std::vector<double> params(n);
      for (double& z : params) z = 2 * rng.normal();
      const auto model = std::make_shared<FreeLogits>(n);
      const auto sets = sample_item_sets(CategoricalPolicy{std::vector<double>(n, 0.0)}, 1 + rng.below(8),
                                         std::min<std::size_t>(n, 2 + rng.below(4)), trial);
      if (trial % 4 == 3) {
        const GaussianMixtureTarget g{{0.3, 0.7}, {rng.uniform(-5, 0), rng.uniform(0, 5)}, rng.uniform(0.5, 2)};
        const std::vector<double> gp{rng.uniform(-6, 6), rng.uniform(-1, 1.2)};
        worst[0] = std::max(worst[0], grad_check(GaussianObjective(g, Objective::reverse_kl), gp, 1e-5));
        worst[1] = std::max(worst[1], grad_check(GaussianObjective(g, Objective::forward_kl), gp, 1e-5));
      } else {
        worst[0] = std::max(worst[0], grad_check(CategoricalObjective(target, Objective::reverse_kl, model), params, 1e-5));
        worst[1] = std::max(worst[1], grad_check(CategoricalObjective(target, Objective::forward_kl, model), params, 1e-5));
      }
      worst[2] = std::max(worst[2], grad_check(CategoricalObjective(target, Objective::ms_loss, model, sets), params, 1e-5));
    }
    return Outcome{worst[0] <= 1e-5 && worst[1] <= 1e-5 && worst[2] <= 1e-5,
                   fmt("max rel err reverse %.2e forward %.2e ms %.2e", worst[0], worst[1], worst[2])};
  });

  criterion(6, "concentration_iqr", 60, [] {
    std::vector<double> ms, fwd;
    const ConcentrationConfig cfg;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto t = concentration_trial(seed, cfg);
      ms.push_back(t.ms_log_prob);
      fwd.push_back(t.forward_log_prob);
    }
    const double a = interquartile_range(ms), b = interquartile_range(fwd);
    return Outcome{a < b, fmt("IQR ms %.4f vs forward %.4f", a, b)};
  });

  criterion(7, "hierarchy_invariants", 60, [] {
    int good = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto index = random_index(seed, 2 + seed % 3);
      bool ok = index.communities.size() + 1 == index.layers.size();
      for (std::size_t l = 0; l < index.layers.size(); ++l) {
        const auto& layer = index.layers[l];
        ok &= layer.embeddings.size() == layer.node_count();
        for (const auto& e : layer.edges) ok &= e.w >= index.config.tau && e.u < e.v && e.v < layer.node_count();
        if (l + 1 < index.layers.size()) {
          ok &= index.layers[l + 1].node_count() == index.communities[l].size();
          std::vector<int> covered(layer.node_count(), 0);
          for (const auto& c : index.communities[l])
            for (auto m : c.members)
              if (m < covered.size()) ++covered[m];
              else ok = false;
          for (int c : covered) ok &= c == 1;
        }
      }
      ok &= serialize_index(random_index(seed, 2 + seed % 3)) == serialize_index(index);
      good += ok;
    }
    return Outcome{good == 20, fmt("%.0f/20 builds satisfy all invariants", good)};
  });

  criterion(8, "persistence", 30, [] {
    const fs::path dir = fs::temp_directory_path() / ("graphmpa_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    int round_trips = 0, corruptions = 0, detected = 0;
    Rng rng(8);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto index = random_index(1000 + seed, 1 + seed % 3);
      const auto file = dir / "i.idx";
      save_index(index, file);
      const auto back = load_index(file);
      round_trips += oracle::deep_equal(back, index) && serialize_index(back) == serialize_index(index);

      std::ifstream in(file, std::ios::binary);
      const std::string bytes{std::istreambuf_iterator<char>(in), {}};
      for (int c = 0; c < 20; ++c) {
        auto bad = bytes;
        const std::size_t pos = c == 0 ? bytes.size() - 1 : rng.below(bytes.size());
        bad[pos] = static_cast<char>(bad[pos] ^ (1 + rng.below(255)));
        const auto bad_file = dir / "b.idx";
        std::ofstream(bad_file, std::ios::binary | std::ios::trunc) << bad;
        ++corruptions;
        try {
          load_index(bad_file);
        } catch (const IndexFormatError&) {
          ++detected;
        }
      }
    }
    fs::remove_all(dir);
    return Outcome{round_trips == 100 && detected == corruptions,
                   fmt("round trips %.0f/100, corruptions detected %.0f/%.0f", round_trips, detected, corruptions)};
  });

  criterion(9, "preference_contract", 60, [] {
    Rng rng(9);
    BuildConfig cfg;
    cfg.large = 60;
    cfg.small = 10;
    cfg.tau = 0.2;
    MockEmbedder embedder(64);
    const auto index = build_hierarchy(oracle::topic_corpus(rng, 6, 200), cfg, embedder, MockSummarizer());
    std::vector<QaPair> qa;
    for (int i = 0; i < 5000; ++i) {
      std::string question;
      for (std::size_t w = 0, n = 1 + rng.below(5); w < n; ++w)
        question += "t" + std::to_string(rng.below(6)) + "w" + std::to_string(rng.below(12)) + " ";
      qa.push_back({"qa" + std::to_string(i), question, i % 3 == 0 ? "yes" : "answer " + std::to_string(i), {}});
    }
    SynthesisConfig sc;
    sc.max_concurrent = 8;
    const auto out = synthesize_dataset(qa, index, sc, embedder,
                                        {std::make_shared<MockReasoner>("a"), std::make_shared<MockReasoner>("b")});
    std::size_t bad = 0;
    for (std::size_t q = 0; q < qa.size(); ++q) {
      const auto retrieved = rank(index, qa[q].question, sc.top_k, embedder);
      for (std::size_t j = 0; j < 4; ++j) {
        const std::size_t at = q * 4 + j;
        if (at >= out.records.size()) {
          ++bad;
          continue;
        }
        const auto& r = out.records[at];
        const std::size_t want = std::min(sc.context_sizes[j], retrieved.entries.size());
        bool ok = r.source_qa_id == qa[q].id && r.query == qa[q].question && r.rejected == qa[q].answer &&
                  r.chosen != r.rejected && r.context_size == want && r.context.size() == want;
        const std::string reason_marker = "###Reason: ", answer_marker = "\n###Answer: ";
        ok &= r.chosen.rfind(reason_marker, 0) == 0 &&
              r.chosen.size() >= answer_marker.size() + r.rejected.size() &&
              r.chosen.compare(r.chosen.size() - answer_marker.size() - r.rejected.size(), std::string::npos,
                               answer_marker + r.rejected) == 0;
        for (std::size_t c = 0; ok && c < r.context.size(); ++c)
          ok = r.context[c] == index.chunk(retrieved.entries[c].chunk_id).text;
        if (j > 0 && ok) {
          const auto& prev = out.records[at - 1].context;
          ok = prev.size() <= r.context.size() && std::equal(prev.begin(), prev.end(), r.context.begin());
        }
        bad += !ok;
      }
    }
    return Outcome{out.records.size() == 20000 && out.skipped == 0 && bad == 0,
                   fmt("%.0f records, %.0f skipped, %.0f invariant failures", out.records.size(), out.skipped, bad)};
  });

  criterion(10, "metrics_oracle", 5, [] {
    Rng rng(10);
    const std::vector<std::string> vocab{"a", "b", "c", "the", "cat", "Cat", "sat"};
    int rouge_ok = 0, acc_ok = 0;
    for (int trial = 0; trial < 50; ++trial) {
      auto sentence = [&] {
        std::string s;
        for (std::size_t i = 0, n = rng.below(12); i < n; ++i) s += vocab[rng.below(vocab.size())] + (rng.below(3) ? " " : "  \t");
        return s;
      };
      const auto p = sentence(), r = sentence();
      rouge_ok += std::abs(rouge_l_f1(p, r) - oracle::rouge_l(p, r)) <= 1e-9;

      const std::vector<std::string> choices{"A", "b", " c", "D ", "yes", "No", "maybe"};
      std::vector<std::string> pred, gold;
      for (std::size_t i = 0, n = 1 + rng.below(20); i < n; ++i) {
        pred.push_back(choices[rng.below(choices.size())]);
        gold.push_back(choices[rng.below(choices.size())]);
      }
      double hits = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) hits += oracle::fold(pred[i]) == oracle::fold(gold[i]);
      acc_ok += std::abs(choice_accuracy(pred, gold) - hits / static_cast<double>(pred.size())) <= 1e-9;
    }
    return Outcome{rouge_ok == 50 && acc_ok == 50, fmt("rouge %.0f/50, accuracy %.0f/50", rouge_ok, acc_ok)};
  });

  std::printf("%d of 10 criteria failing\n", failures);
  return failures ? 1 : 0;
}
