#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "metalearn/errors.hpp"
#include "metalearn/fewshot.hpp"
#include "metalearn/meta.hpp"
#include "metalearn/mlp.hpp"
#include "metalearn_cli/commands.hpp"
#include "metalearn_cli/config.hpp"
#include "metalearn_cli/output.hpp"

namespace metalearn::cli {

using Schema = std::vector<ConfigKey>;

// Top-level stream ids, children of the run seed.
enum Stream : std::uint64_t {
    kInitStream = 1,
    kTrainStream = 2,
    kEvalTasksStream = 3,
    kCurveStream = 4,
    kStudyStream = 5,
};

RngStream root_stream(const Config& cfg);

/// [model] hidden, activation around the given input and output widths.
void add_model_keys(Schema& s, const std::string& hidden, const std::string& activation = "tanh");
MlpSpec model_from(const Config& cfg, std::size_t in, std::size_t out, OutputKind output);

/// <section>.optimizer / lr / beta1 / beta2.
void add_optimizer_keys(Schema& s, const std::string& section, const std::string& kind, const std::string& lr);
OptimizerConfig optimizer_from(const Config& cfg, const std::string& section);

/// <section>.steps / batch_size / sampling plus the optimizer keys.
void add_inner_keys(Schema& s, const std::string& section, const std::string& steps, const std::string& batch,
                    const std::string& kind, const std::string& lr);
InnerLoopConfig inner_from(const Config& cfg, const std::string& section);

/// <section>.iterations / step / anneal / meta_batch.
void add_outer_keys(Schema& s, const std::string& section, const std::string& iterations, const std::string& step,
                    const std::string& meta_batch);
OuterSchedule schedule_from(const Config& cfg, const std::string& section = "outer");

/// [family] keys of the synthetic few-shot family.
void add_fewshot_keys(Schema& s, const std::string& train_shots, const std::string& tail_per_class,
                      const std::string& eval_shots);
FewShotConfig fewshot_train_family(const Config& cfg);
FewShotConfig fewshot_eval_family(const Config& cfg);

/// Runs `fn`, turning library contract violations into config errors tagged with `where`.
template <typename Fn>
auto checked(const std::string& where, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ContractError& e) {
        throw ConfigError("[" + where + "] " + e.what());
    }
}

MetaAlgorithm parse_algorithm(const std::string& where, const std::string& name, std::size_t k);

const std::vector<std::string>& train_log_header();
void write_log_row(CsvWriter& csv, const std::string& run, const TrainLogRow& row);

void progress(const Context& ctx, const std::string& line);

nlohmann::ordered_json eval_json(const EvalSummary& s);

// Subcommands.
Schema sine_demo_schema(bool paper_scale);
int run_sine_demo(const Config& cfg, const Context& ctx);
Schema fewshot_schema(bool paper_scale);
int run_fewshot(const Config& cfg, const Context& ctx);
Schema combo_sweep_schema(bool paper_scale);
int run_combo_sweep(const Config& cfg, const Context& ctx);
Schema overlap_sweep_schema(bool paper_scale);
int run_overlap_sweep(const Config& cfg, const Context& ctx);
Schema taylor_check_schema(bool paper_scale);
int run_taylor_check(const Config& cfg, const Context& ctx);
Schema manifold_demo_schema(bool paper_scale);
int run_manifold_demo(const Config& cfg, const Context& ctx);

}  // namespace metalearn::cli
