#include "graphmpa/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "graphmpa/error.hpp"
#include "json.hpp"

namespace graphmpa {

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty())
    throw InputError("invalid value for " + key + ": '" + value + "'");
  return out;
}

std::string env_name(const std::string& key) {
  std::string name = "GRAPHMPA_";
  for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return name;
}

constexpr const char* kSummarizeTemplate =
    "Write a concise summary of the following passages in at most {{max_len}} words. "
    "Keep names, numbers and key facts.\n\n{{texts}}\n\nSummary:";

constexpr const char* kReasoningTemplate =
    "Question: {{question}}\n\nRetrieved passages:\n{{context}}\n\n"
    "The correct answer is: {{answer}}\n\n"
    "Explain step by step, citing the passages, how they lead to this answer. "
    "Do not restate the answer at the end.";

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "large",   "small",    "layers",      "tau",        "k_edges",        "top_k",
      "resolution", "seed",  "backend",     "endpoint",   "model",          "api_key_env",
      "timeout_ms", "max_concurrent", "mock_dim", "templates_dir"};
  return keys;
}

void apply_setting(AppConfig& c, const std::string& key, const std::string& value) {
  if (key == "large") c.build.large = parse_number<std::size_t>(key, value);
  else if (key == "small") c.build.small = parse_number<std::size_t>(key, value);
  else if (key == "layers") c.build.n_layers = parse_number<std::size_t>(key, value);
  else if (key == "tau") c.build.tau = parse_number<double>(key, value);
  else if (key == "k_edges") c.build.k_edges = parse_number<std::size_t>(key, value);
  else if (key == "top_k") c.build.top_k_retrieval = parse_number<std::size_t>(key, value);
  else if (key == "resolution") c.build.resolution = parse_number<double>(key, value);
  else if (key == "seed") c.build.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "backend") {
    if (value == "mock") c.backend.kind = BackendKind::mock;
    else if (value == "http") c.backend.kind = BackendKind::http;
    else throw InputError("backend must be mock or http, got '" + value + "'");
  } else if (key == "endpoint") c.backend.endpoint_url = value;
  else if (key == "model") c.backend.model_name = value;
  else if (key == "api_key_env") c.backend.api_key_env = value;
  else if (key == "timeout_ms") c.backend.timeout_ms = parse_number<int>(key, value);
  else if (key == "max_concurrent") c.backend.max_concurrent = parse_number<std::size_t>(key, value);
  else if (key == "mock_dim") c.backend.mock_dim = parse_number<std::size_t>(key, value);
  else if (key == "templates_dir") c.templates_dir = value;
  else throw InputError("unknown config key: " + key);
}

AppConfig resolve_config(const std::map<std::string, std::string>& flags, const EnvLookup& env,
                         const std::optional<std::filesystem::path>& config_file) {
  AppConfig config;
  config.templates_dir = GRAPHMPA_TEMPLATES_DIR;

  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw InputError("cannot read config file " + config_file->string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("config file " + config_file->string() + ": " + e.what());
    }
    if (!j.is_object()) throw InputError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items())
      apply_setting(config, key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  if (env)
    for (const auto& key : config_keys())
      if (auto v = env(env_name(key))) apply_setting(config, key, *v);
  for (const auto& [key, value] : flags) apply_setting(config, key, value);

  config.build.validate();
  config.backend.validate();
  return config;
}

std::string default_template(const std::string& name) {
  if (name == "summarize") return kSummarizeTemplate;
  if (name == "reasoning") return kReasoningTemplate;
  throw InputError("no built-in template named " + name);
}

std::string load_template(const std::filesystem::path& dir, const std::string& name) {
  std::ifstream in(dir / (name + ".txt"));
  if (!in) return default_template(name);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace graphmpa
