#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metalearn_cli/config.hpp"

namespace metalearn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitCheckFailed = 4;

struct RunOptions {
    std::optional<std::filesystem::path> config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    bool paper_scale = false;
    bool svg = false;
    /// Worker threads. Deliberately not part of the config: outputs must not depend on it.
    std::size_t threads = 1;
    /// "section.key" = value pairs applied after the config file.
    std::vector<std::pair<std::string, std::string>> overrides;
    bool quiet = false;
};

/// What a subcommand sees once its config is resolved.
struct Context {
    std::filesystem::path out;
    std::size_t threads = 1;
    bool svg = false;
    bool quiet = false;
};

struct Command {
    std::string name;
    std::string summary;
    std::vector<ConfigKey> (*schema)(bool paper_scale);
    int (*run)(const Config& cfg, const Context& ctx);
};

const std::vector<Command>& commands();
const Command* find_command(const std::string& name);

/// Defaults for a subcommand, with paper-scale iteration counts when asked.
Config default_config(const Command& cmd, bool paper_scale);

/// Resolves the config, writes config.resolved and runs the command. Errors
/// are reported on stderr and mapped to the documented exit codes.
int run_subcommand(const std::string& name, const RunOptions& opts);

}  // namespace metalearn::cli
