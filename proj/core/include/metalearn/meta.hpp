#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metalearn/inner_loop.hpp"

namespace metalearn {

enum class MetaKind { reptile, fomaml, maml, combo };
enum class ComboNormalize { sum, average };

std::string to_string(MetaKind kind);
MetaKind parse_meta_kind(const std::string& name);
std::string to_string(ComboNormalize n);
ComboNormalize parse_combo_normalize(const std::string& name);

/// Which meta-update to apply. Combo weights act on the k inner gradients g_1..g_k.
struct MetaAlgorithm {
    MetaKind kind = MetaKind::reptile;
    std::vector<double> weights;
    ComboNormalize normalize = ComboNormalize::sum;

    static MetaAlgorithm reptile() { return {MetaKind::reptile, {}, ComboNormalize::sum}; }
    static MetaAlgorithm fomaml() { return {MetaKind::fomaml, {}, ComboNormalize::sum}; }
    static MetaAlgorithm maml() { return {MetaKind::maml, {}, ComboNormalize::sum}; }
    static MetaAlgorithm combo(std::vector<double> weights, ComboNormalize normalize) {
        return {MetaKind::combo, std::move(weights), normalize};
    }
    /// Joint training: only the first inner gradient.
    static MetaAlgorithm first_gradient_only(std::size_t k);

    /// Throws ContractError when the algorithm cannot run with k inner steps.
    void validate(std::size_t k) const;
    std::string label() const;
};

/// A meta-gradient in ascent form: the outer loop moves phi along `direction`.
struct MetaGradient {
    ParamVector direction;
    MetaKind algorithm = MetaKind::reptile;
    /// Norms of the inner gradients g_1..g_k that went into the direction (when recorded).
    std::vector<double> term_norms;
};

/// direction = phi_{k+1} - phi_1.
MetaGradient reptile_direction(const Trajectory& traj);
/// (phi_1 - phi_{k+1}) / alpha; SGD trajectories only. Equals g_1 + ... + g_k.
ParamVector reptile_gradient(const Trajectory& traj);

/// Post-update convention: direction = -grad(L_tail, phi_final) where `traj`
/// holds the steps taken before the tail batch.
MetaGradient fomaml_direction(const Trajectory& traj, const Minibatch& tail_batch, const Task& task);
/// Last-gradient convention: g_k = L_k'(phi_k), the gradient of the trajectory's final step.
ParamVector fomaml_last_gradient(const Trajectory& traj);

/// Exact MAML through an SGD inner loop with step `inner_lr` on the given
/// batches: v = g_k, then v <- v - alpha H_j(phi_j) v for j = k-1..1; direction = -v.
MetaGradient maml_direction(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                            double inner_lr);
/// Same computation reusing a recorded SGD trajectory.
MetaGradient maml_direction(const Trajectory& traj, const Task& task);

/// Central finite differences of phi -> L_k(U^{k-1}(phi)) with the batch sequence frozen.
ParamVector maml_fd_oracle(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                           double inner_lr, double h = kDefaultUpdateStep);

/// Gradient form sum_i w_i g_i, divided by sum_i |w_i| for `average`; direction is its negative.
MetaGradient combo_direction(const Trajectory& traj, const std::vector<double>& weights, ComboNormalize normalize);

/// Result of running one task inside a meta-batch. All algorithms are expressed
/// as a parameter displacement so one outer step size serves them all: for SGD
/// inner loops the displacement of a gradient-form meta-gradient g is -alpha g.
struct TaskUpdate {
    ParamVector displacement;
    double last_loss = 0.0;
    OptimizerState state;
};

TaskUpdate task_update(const ParamVector& phi, const Task& task, const MetaAlgorithm& algo,
                       const InnerLoopConfig& inner, RngStream& rng, OptimizerState state);

struct EvalConfig {
    InnerLoopConfig inner;
    std::size_t trials = 100;
    std::size_t threads = 1;
};

struct EvalTrial {
    double pre = 0.0;
    double post = 0.0;
};

struct EvalSummary {
    double mean = 0.0;
    double std_error = 0.0;
    double pre_mean = 0.0;
    std::vector<EvalTrial> trials;
};

/// Adapts a copy of phi on each of `trials` fresh tasks and measures the
/// held-out metric before and after. `state` (if given) seeds every trial's
/// optimizer and is left untouched.
EvalSummary meta_evaluate(const ParamVector& phi, const TaskSampler& sampler, const EvalConfig& cfg, const RngStream& rng,
                          const OptimizerState* state = nullptr);

// High bits keep it clear of the per-iteration streams child(0..total-1).
inline constexpr std::uint64_t kEvalStream = 0xe7a1ull << 48;

struct MetaTrainConfig {
    MetaAlgorithm algorithm;
    InnerLoopConfig inner;
    OuterSchedule schedule;
    std::size_t meta_batch = 1;
    std::size_t threads = 1;
    /// Carry inner Adam moments across outer iterations (per-task clones merged by averaging).
    bool persist_optimizer_state = true;
    /// Log (and evaluate) every n outer iterations; 0 logs only the last one.
    std::size_t log_every = 0;
    std::optional<EvalConfig> eval;
    /// Family the logged evaluations draw from; the training family when null.
    const TaskSampler* eval_sampler = nullptr;

    void validate() const;
};

struct TrainLogRow {
    std::size_t iteration = 0;
    double outer_step = 0.0;
    double displacement_norm = 0.0;
    double last_inner_loss = 0.0;
    bool has_eval = false;
    double eval_mean = 0.0;
    double eval_stderr = 0.0;
};

struct MetaTrainResult {
    ParamVector phi;
    std::optional<OptimizerState> state;
    std::vector<TrainLogRow> log;
};

/// Outer loop: per iteration sample `meta_batch` tasks, compute each task's
/// displacement from the same phi, average in task order and take an outer step.
/// Task t of iteration i draws from rng.child(i).child(t). Every logged
/// evaluation uses the same trials, drawn from rng.child(kEvalStream).
MetaTrainResult meta_train(const TaskSampler& sampler, const ParamVector& phi0, const MetaTrainConfig& cfg,
                           const RngStream& rng, const std::function<void(const TrainLogRow&)>& on_log = {});

}  // namespace metalearn
