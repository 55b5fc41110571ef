#pragma once

#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "graphmpa/config.hpp"
#include "graphmpa/modeseek.hpp"

namespace graphmpa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env);
int run_cli(int argc, char** argv);

/// ms-demo targets: "gmm:W@M,W@M,...[:std=S]" or "cat:P,P,...".
using DemoTarget = std::variant<modeseek::GaussianMixtureTarget, std::vector<double>>;
DemoTarget parse_target(const std::string& text);

}  // namespace graphmpa
