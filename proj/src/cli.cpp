#include "graphmpa/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "graphmpa/error.hpp"
#include "graphmpa/graphbuild.hpp"
#include "graphmpa/metrics.hpp"
#include "graphmpa/persist.hpp"
#include "graphmpa/prefsynth.hpp"
#include "graphmpa/retrieve.hpp"
#include "json.hpp"

namespace graphmpa {

namespace {

using nlohmann::json;

struct UsageError : InputError {
  using InputError::InputError;
};

// Flag values that only count when given, so they can override env and file.
struct Settings {
  std::map<std::string, std::string> storage;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options[key] = app->add_option(flag, storage[key], help);
  }
  std::map<std::string, std::string> given() const {
    std::map<std::string, std::string> out;
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) out[key] = storage.at(key);
    return out;
  }
};

void add_backend_flags(CLI::App* app, Settings& s) {
  s.add(app, "--backend", "backend", "mock or http");
  s.add(app, "--endpoint", "endpoint", "OpenAI-compatible base URL");
  s.add(app, "--model", "model", "model name sent to the endpoint");
  s.add(app, "--api-key-env", "api_key_env", "environment variable holding the API key");
  s.add(app, "--timeout-ms", "timeout_ms", "per-request timeout");
  s.add(app, "--max-concurrent", "max_concurrent", "in-flight request limit");
  s.add(app, "--mock-dim", "mock_dim", "mock embedding dimension");
  s.add(app, "--templates", "templates_dir", "prompt template directory");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::unique_ptr<Embedder> make_embedder(const AppConfig& c, std::size_t mock_dim) {
  if (c.backend.kind == BackendKind::mock)
    return std::make_unique<MockEmbedder>(mock_dim, c.backend.max_concurrent);
  return std::make_unique<HttpEmbedder>(OpenAiClient(c.backend, make_default_transport()));
}

std::size_t index_dim(const HierarchicalIndex& index) {
  for (const auto& layer : index.layers)
    if (!layer.embeddings.empty()) return layer.embeddings.front().dim();
  throw std::runtime_error("index has no embeddings");
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      sizes.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--context-sizes expects positive integers, got '" + item + "'");
    }
  }
  if (sizes.empty()) throw UsageError("--context-sizes is empty");
  return sizes;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("bad number '" + s + "' in " + what);
}

}  // namespace

DemoTarget parse_target(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("target needs a kind prefix (gmm: or cat:)");
  const std::string kind = text.substr(0, colon);
  std::string rest = text.substr(colon + 1);

  if (kind == "cat") {
    std::vector<double> probs;
    std::stringstream ss(rest);
    for (std::string item; std::getline(ss, item, ',');) probs.push_back(parse_double(item, text));
    if (probs.empty()) throw UsageError("cat target needs probabilities");
    return probs;
  }
  if (kind == "gmm") {
    modeseek::GaussianMixtureTarget t;
    if (const auto opt = rest.find(":std="); opt != std::string::npos) {
      t.std = parse_double(rest.substr(opt + 5), text);
      rest.resize(opt);
    }
    std::stringstream ss(rest);
    for (std::string item; std::getline(ss, item, ',');) {
      const auto at = item.find('@');
      if (at == std::string::npos) throw UsageError("gmm component must be WEIGHT@MEAN: " + item);
      t.weights.push_back(parse_double(item.substr(0, at), text));
      t.means.push_back(parse_double(item.substr(at + 1), text));
    }
    try {
      t.validate();
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
    return t;
  }
  throw UsageError("unknown target kind '" + kind + "'");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env) {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("graphmpa");
    spdlog::set_default_logger(l);
    return l;
  }();
  (void)logger;

  CLI::App app{"Hierarchical similarity-graph index, preference data and mode-seeking tools", "graphmpa"};
  app.require_subcommand(1);
  std::string config_path;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // build
  auto* build = app.add_subcommand("build", "split, embed, cluster and summarize a text into an index");
  std::string build_input, build_out;
  Settings build_settings;
  build->add_option("--input", build_input, "source text file")->required();
  build->add_option("--out", build_out, "index file to write")->required();
  build_settings.add(build, "--large", "large", "large document length in tokens");
  build_settings.add(build, "--small", "small", "leaf chunk length in tokens");
  build_settings.add(build, "--layers", "layers", "maximum number of layers");
  build_settings.add(build, "--tau", "tau", "edge similarity threshold");
  build_settings.add(build, "--k-edges", "k_edges", "edges kept per node");
  build_settings.add(build, "--resolution", "resolution", "modularity resolution");
  build_settings.add(build, "--seed", "seed", "community detection seed");
  add_backend_flags(build, build_settings);

  // query
  auto* query = app.add_subcommand("query", "rank index nodes against a query");
  std::string query_index, query_text;
  std::size_t query_top_k = 0;
  bool show_layers = false;
  Settings query_settings;
  query->add_option("--index", query_index, "index file")->required();
  query->add_option("--q", query_text, "query text")->required();
  query->add_option("--top-k", query_top_k, "number of nodes (default: the index's setting)");
  query->add_flag("--show-layers", show_layers, "print how many hits each layer contributed");
  add_backend_flags(query, query_settings);

  // stats
  auto* stats = app.add_subcommand("stats", "layer, edge and community statistics as JSON");
  std::string stats_index, stats_queries;
  std::size_t stats_top_k = 0;
  Settings stats_settings;
  stats->add_option("--index", stats_index, "index file")->required();
  stats->add_option("--queries", stats_queries, "file with one query per line for layer distributions");
  stats->add_option("--top-k", stats_top_k, "hits per query (default: the index's setting)");
  add_backend_flags(stats, stats_settings);

  // synth-prefs
  auto* synth = app.add_subcommand("synth-prefs", "write chosen/rejected preference records");
  std::string synth_index, synth_qa, synth_out, synth_sizes = "1,2,4,10", synth_models;
  std::size_t synth_top_k = 10;
  bool include_empty = false;
  Settings synth_settings;
  synth->add_option("--index", synth_index, "index file")->required();
  synth->add_option("--qa", synth_qa, "QA pairs, one JSON object per line")->required();
  synth->add_option("--out", synth_out, "output JSONL")->required();
  synth->add_option("--context-sizes", synth_sizes, "comma-separated context sizes");
  synth->add_option("--top-k", synth_top_k, "retrieved nodes per question");
  synth->add_option("--models", synth_models, "comma-separated reasoning models, used in turn");
  synth->add_flag("--include-empty", include_empty, "also emit a record with no context");
  add_backend_flags(synth, synth_settings);

  // ms-demo
  auto* demo = app.add_subcommand("ms-demo", "fit a policy to a target and write the trace as CSV");
  std::string demo_objective = "reverse", demo_target = "gmm:0.5@-4,0.5@4:std=1", demo_out;
  modeseek::FitOptions demo_opts;
  demo->add_option("--objective", demo_objective, "reverse, forward or ms")
      ->check(CLI::IsMember({"reverse", "forward", "ms"}));
  demo->add_option("--target", demo_target, "gmm:W@M,...[:std=S] or cat:P,...");
  demo->add_option("--steps", demo_opts.steps, "gradient steps")->check(CLI::PositiveNumber);
  demo->add_option("--lr", demo_opts.learning_rate, "learning rate")->check(CLI::PositiveNumber);
  demo->add_option("--seed", demo_opts.seed, "initialization seed");
  demo->add_option("--set-count", demo_opts.set_count, "ms: number of response sets");
  demo->add_option("--set-size", demo_opts.set_size, "ms: responses per set");
  demo->add_option("--out", demo_out, "CSV path (default: stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions against references, one per line");
  std::string eval_pred, eval_gold, eval_metric;
  eval->add_option("--pred", eval_pred, "predictions file")->required();
  eval->add_option("--gold", eval_gold, "references file")->required();
  eval->add_option("--metric", eval_metric, "rouge or accuracy")
      ->required()
      ->check(CLI::IsMember({"rouge", "accuracy"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  const auto resolve = [&](const Settings& s) {
    try {
      return resolve_config(s.given(), env,
                            config_path.empty() ? std::nullopt
                                                : std::optional<std::filesystem::path>(config_path));
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
  };

  try {
    if (build->parsed()) {
      const AppConfig c = resolve(build_settings);
      const std::string text = read_file(build_input);
      std::unique_ptr<Summarizer> summarizer;
      if (c.backend.kind == BackendKind::mock) {
        summarizer = std::make_unique<MockSummarizer>();
      } else {
        summarizer = std::make_unique<HttpSummarizer>(OpenAiClient(c.backend, make_default_transport()),
                                                      load_template(c.templates_dir, "summarize"));
      }
      const auto embedder = make_embedder(c, c.backend.mock_dim);
      const auto index = build_hierarchy(text, c.build, *embedder, *summarizer);
      const auto manifest = save_index(index, build_out);
      json summary{{"index", build_out},
                   {"layers", manifest.layer_count},
                   {"chunks", manifest.chunk_count},
                   {"checksum", manifest.checksum}};
      json nodes = json::array();
      for (const auto& layer : index.layers) nodes.push_back(layer.node_count());
      summary["layer_nodes"] = nodes;
      out << summary.dump() << "\n";
    } else if (query->parsed()) {
      const AppConfig c = resolve(query_settings);
      const auto index = load_index(query_index);
      const auto embedder = make_embedder(c, index_dim(index));
      const std::size_t k = query_top_k ? query_top_k : index.config.top_k_retrieval;
      const auto result = rank(index, query_text, k, *embedder);
      std::size_t position = 1;
      for (const auto& e : result.entries) {
        out << position++ << '\t' << std::fixed << std::setprecision(6) << e.score << '\t'
            << e.layer_index << '\t' << to_string(e.kind) << '\t' << e.chunk_id << '\t'
            << index.chunk(e.chunk_id).text << '\n';
      }
      if (show_layers) {
        const auto dist = layer_distribution(result, index.layers.size());
        out << "layers";
        for (std::size_t l = 0; l < dist.size(); ++l) out << ' ' << l << ':' << dist[l];
        out << '\n';
      }
    } else if (stats->parsed()) {
      const auto index = load_index(stats_index);
      json j;
      j["chunk_count"] = index.chunks.size();
      json layers = json::array();
      for (const auto& layer : index.layers) {
        std::size_t summaries = 0;
        for (auto id : layer.node_ids) summaries += index.chunk(id).kind == ChunkKind::summary;
        json l{{"layer", layer.layer_index},
               {"nodes", layer.node_count()},
               {"edges", layer.edges.size()},
               {"summary_nodes", summaries},
               {"leaf_nodes", layer.node_count() - summaries}};
        if (layer.layer_index < index.communities.size()) {
          json sizes = json::array();
          for (const auto& rec : index.communities[layer.layer_index]) sizes.push_back(rec.members.size());
          l["communities"] = index.communities[layer.layer_index].size();
          l["community_sizes"] = sizes;
        }
        layers.push_back(l);
      }
      j["layers"] = layers;
      if (!stats_queries.empty()) {
        const AppConfig c = resolve(stats_settings);
        const auto embedder = make_embedder(c, index_dim(index));
        const std::size_t k = stats_top_k ? stats_top_k : index.config.top_k_retrieval;
        std::vector<std::size_t> totals(index.layers.size(), 0);
        std::size_t queries = 0, hits = 0;
        for (const auto& q : read_lines(stats_queries)) {
          if (count_tokens(q) == 0) continue;
          const auto dist = layer_distribution(rank(index, q, k, *embedder), index.layers.size());
          for (std::size_t l = 0; l < totals.size(); ++l) totals[l] += dist[l];
          ++queries;
        }
        for (auto t : totals) hits += t;
        json fractions = json::array();
        for (auto t : totals) fractions.push_back(hits ? static_cast<double>(t) / static_cast<double>(hits) : 0.0);
        j["layer_distribution"] = {{"queries", queries}, {"top_k", k}, {"hits", totals}, {"fraction", fractions}};
      }
      out << j.dump(2) << "\n";
    } else if (synth->parsed()) {
      const AppConfig c = resolve(synth_settings);
      const auto index = load_index(synth_index);
      std::ifstream qa_in(synth_qa);
      if (!qa_in) throw std::runtime_error("cannot read " + synth_qa);
      const auto qa = read_qa_pairs(qa_in);

      SynthesisConfig sc;
      sc.context_sizes = parse_sizes(synth_sizes);
      sc.include_empty_context = include_empty;
      sc.top_k = synth_top_k;
      sc.max_concurrent = c.backend.max_concurrent;

      std::vector<std::string> models;
      std::stringstream ss(synth_models);
      for (std::string m; std::getline(ss, m, ',');)
        if (!m.empty()) models.push_back(m);
      if (models.empty()) models.push_back(c.backend.kind == BackendKind::mock ? "mock" : c.backend.model_name);

      std::vector<std::shared_ptr<ReasoningBackend>> backends;
      for (const auto& m : models) {
        if (c.backend.kind == BackendKind::mock) {
          backends.push_back(std::make_shared<MockReasoner>(m));
        } else {
          BackendConfig bc = c.backend;
          bc.model_name = m;
          backends.push_back(std::make_shared<HttpReasoner>(OpenAiClient(bc, make_default_transport()),
                                                            load_template(c.templates_dir, "reasoning")));
        }
      }
      const auto embedder = make_embedder(c, index_dim(index));
      const auto result = synthesize_dataset(qa, index, sc, *embedder, backends);
      auto file = open_out(synth_out);
      for (const auto& r : result.records) write_record(file, r);
      out << json{{"records", result.records.size()}, {"skipped", result.skipped}}.dump() << "\n";
    } else if (demo->parsed()) {
      const auto objective = modeseek::parse_objective(demo_objective);
      const auto target = parse_target(demo_target);
      modeseek::FitResult fit;
      std::vector<std::string> columns;
      if (const auto* gmm = std::get_if<modeseek::GaussianMixtureTarget>(&target)) {
        if (objective == modeseek::Objective::ms_loss)
          throw UsageError("the ms objective needs a cat: target");
        fit = modeseek::fit_policy(*gmm, objective, demo_opts);
        columns = {"mu", "log_sigma"};
      } else {
        const auto& probs = std::get<std::vector<double>>(target);
        fit = modeseek::fit_policy(probs, objective, demo_opts);
        for (std::size_t i = 0; i < probs.size(); ++i) columns.push_back("logit_" + std::to_string(i));
      }
      std::ofstream file;
      if (!demo_out.empty()) file = open_out(demo_out);
      std::ostream& csv = demo_out.empty() ? out : file;
      csv << "step,loss";
      for (const auto& name : columns) csv << ',' << name;
      csv << '\n' << std::setprecision(17);
      for (std::size_t s = 0; s < fit.loss_trace.size(); ++s) {
        csv << s << ',' << fit.loss_trace[s];
        for (double p : fit.param_trace[s]) csv << ',' << p;
        csv << '\n';
      }
      if (!demo_out.empty()) {
        json summary{{"objective", modeseek::to_string(objective)},
                     {"final_loss", fit.loss_trace.back()},
                     {"params", fit.params}};
        out << summary.dump() << "\n";
      }
    } else if (eval->parsed()) {
      const auto preds = read_lines(eval_pred);
      const auto golds = read_lines(eval_gold);
      if (preds.size() != golds.size())
        throw std::runtime_error(std::to_string(preds.size()) + " predictions for " +
                                 std::to_string(golds.size()) + " references");
      const auto report = evaluate(preds, golds);
      const double score = eval_metric == "rouge" ? report.mean_rouge_l_f1
                                                  : choice_accuracy(preds, golds);
      out << json{{"metric", eval_metric}, {"score", score}, {"item_count", report.item_count}}.dump()
          << "\n";
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr, process_env());
}

}  // namespace graphmpa
