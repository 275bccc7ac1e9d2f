#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "metalearn_cli/commands.hpp"

using namespace metalearn::cli;

int main(int argc, char** argv) {
    CLI::App app{"Gradient-based meta-learning experiments"};
    app.require_subcommand(1);

    RunOptions opts;
    std::string config, out;
    std::uint64_t seed = 0;
    std::vector<std::string> sets;
    bool print_defaults = false;

    for (const auto& cmd : commands()) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.summary);
        sub->add_option("--config", config, "INI config file; omitted keys keep their defaults")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "override [run] seed");
        sub->add_flag("--paper-scale", opts.paper_scale, "use the full-length iteration counts");
        sub->add_flag("--svg", opts.svg, "also render SVG line charts");
        sub->add_option("--threads", opts.threads, "worker threads (outputs do not depend on it)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--set", sets, "override one key: section.key=value (repeatable)");
        sub->add_flag("--quiet", opts.quiet, "no progress output");
        sub->add_flag("--print-config", print_defaults, "print the resolved config and exit");
    }
    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    const CLI::App* sub = app.get_subcommands().front();
    if (!config.empty()) opts.config = config;
    if (sub->count("--seed")) opts.seed = seed;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "config error: --set expects section.key=value, got '%s'\n", s.c_str());
            return kExitConfig;
        }
        opts.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }

    try {
        if (print_defaults) {
            Config cfg = default_config(*find_command(name), opts.paper_scale);
            if (opts.config) cfg.load_file(*opts.config);
            cfg.set_all(opts.overrides);
            if (opts.seed) cfg.set("run.seed", std::to_string(*opts.seed));
            std::fputs(cfg.resolved().c_str(), stdout);
            return kExitOk;
        }
        if (out.empty()) {
            std::fprintf(stderr, "config error: --out is required\n");
            return kExitConfig;
        }
        opts.out = out;
        return run_subcommand(name, opts);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
