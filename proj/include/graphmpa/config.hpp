#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "graphmpa/backends.hpp"
#include "graphmpa/docmodel.hpp"

namespace graphmpa {

/// Everything a CLI run can be configured with.
struct AppConfig {
  BuildConfig build;
  BackendConfig backend;
  std::filesystem::path templates_dir;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
EnvLookup process_env();

/// Recognized keys, in the spelling used by config files and flags
/// (large, small, layers, tau, k_edges, top_k, resolution, seed, backend,
/// endpoint, model, api_key_env, timeout_ms, max_concurrent, mock_dim,
/// templates_dir). The environment spelling is GRAPHMPA_ plus the key in
/// upper case.
const std::vector<std::string>& config_keys();

/// Sets one key from its string form. Throws InputError on an unknown key
/// or a malformed value.
void apply_setting(AppConfig& config, const std::string& key, const std::string& value);

/// Layers settings by precedence: flags over environment over the JSON
/// config file over defaults. The result is validated.
AppConfig resolve_config(const std::map<std::string, std::string>& flags, const EnvLookup& env,
                         const std::optional<std::filesystem::path>& config_file);

/// Contents of `<dir>/<name>.txt`, or the built-in text for `name`
/// ("summarize" or "reasoning") when the file is absent.
std::string load_template(const std::filesystem::path& dir, const std::string& name);

std::string default_template(const std::string& name);

}  // namespace graphmpa
