#include "metalearn_cli/commands.hpp"

#include <cstdio>
#include <exception>

#include "common.hpp"
#include "metalearn/errors.hpp"

namespace metalearn::cli {

const std::vector<Command>& commands() {
    static const std::vector<Command> list{
        {"sine-demo", "meta-train on sine regression and dump adaptation curves", sine_demo_schema, run_sine_demo},
        {"fewshot", "meta-train each algorithm on synthetic N-way K-shot episodes", fewshot_schema, run_fewshot},
        {"combo-sweep", "meta-train on weighted sums of the four inner gradients", combo_sweep_schema,
         run_combo_sweep},
        {"overlap-sweep", "FOMAML tail-batch overlap sweep against Reptile", overlap_sweep_schema,
         run_overlap_sweep},
        {"taylor-check", "check the second-order expansion of the meta-gradients", taylor_check_schema,
         run_taylor_check},
        {"manifold-demo", "Reptile as SGD on distance to affine solution manifolds", manifold_demo_schema,
         run_manifold_demo},
    };
    return list;
}

const Command* find_command(const std::string& name) {
    for (const auto& c : commands()) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

Config default_config(const Command& cmd, bool paper_scale) { return Config(cmd.schema(paper_scale)); }

int run_subcommand(const std::string& name, const RunOptions& opts) {
    const Command* cmd = find_command(name);
    if (!cmd) {
        std::fprintf(stderr, "error: unknown subcommand '%s'\n", name.c_str());
        return kExitConfig;
    }
    try {
        Config cfg = default_config(*cmd, opts.paper_scale);
        if (opts.config) cfg.load_file(*opts.config);
        cfg.set_all(opts.overrides);
        if (opts.seed) cfg.set("run.seed", std::to_string(*opts.seed));
        if (opts.threads == 0) throw ConfigError("--threads must be at least 1");

        std::error_code ec;
        std::filesystem::create_directories(opts.out, ec);
        if (ec) throw ConfigError("cannot create output directory '" + opts.out.string() + "': " + ec.message());
        write_text(opts.out / "config.resolved", "; " + cmd->name + "\n" + cfg.resolved());

        Context ctx{opts.out, opts.threads, opts.svg, opts.quiet};
        return cmd->run(cfg, ctx);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical divergence: %s\n", e.what());
        return kExitNumerical;
    } catch (const OracleError& e) {
        std::fprintf(stderr, "numerical divergence: %s\n", e.what());
        return kExitNumerical;
    }
}

}  // namespace metalearn::cli
