#include "metalearn/meta.hpp"

#include <cmath>

#include "metalearn/errors.hpp"
#include "metalearn/parallel.hpp"

namespace metalearn {

std::string to_string(MetaKind kind) {
    switch (kind) {
        case MetaKind::reptile: return "reptile";
        case MetaKind::fomaml: return "fomaml";
        case MetaKind::maml: return "maml";
        case MetaKind::combo: return "combo";
    }
    return "reptile";
}

MetaKind parse_meta_kind(const std::string& name) {
    if (name == "reptile") return MetaKind::reptile;
    if (name == "fomaml") return MetaKind::fomaml;
    if (name == "maml") return MetaKind::maml;
    if (name == "combo") return MetaKind::combo;
    throw ContractError("unknown meta algorithm '" + name + "' (expected reptile, fomaml, maml or combo)");
}

std::string to_string(ComboNormalize n) { return n == ComboNormalize::sum ? "sum" : "average"; }

ComboNormalize parse_combo_normalize(const std::string& name) {
    if (name == "sum") return ComboNormalize::sum;
    if (name == "average") return ComboNormalize::average;
    throw ContractError("unknown combo normalization '" + name + "' (expected sum or average)");
}

MetaAlgorithm MetaAlgorithm::first_gradient_only(std::size_t k) {
    std::vector<double> w(k, 0.0);
    if (k > 0) w[0] = 1.0;
    return combo(std::move(w), ComboNormalize::sum);
}

void MetaAlgorithm::validate(std::size_t k) const {
    if (kind != MetaKind::combo) return;
    if (weights.size() != k) {
        throw ContractError("combo weights: expected " + std::to_string(k) + " weights, got " +
                            std::to_string(weights.size()));
    }
    bool any = false;
    for (double w : weights) {
        if (!std::isfinite(w)) throw ContractError("combo weights must be finite");
        any = any || w != 0.0;
    }
    if (!any) throw ContractError("combo weights are all zero");
}

std::string MetaAlgorithm::label() const {
    if (kind != MetaKind::combo) return to_string(kind);
    std::string out = "combo[";
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (i) out += ' ';
        const double w = weights[i];
        out += w == std::floor(w) ? std::to_string(static_cast<long long>(w)) : std::to_string(w);
    }
    return out + "]/" + to_string(normalize);
}

namespace {

std::vector<double> gradient_norms(const Trajectory& traj) {
    std::vector<double> out;
    out.reserve(traj.gradients.size());
    for (const auto& g : traj.gradients) out.push_back(norm2(g));
    return out;
}

void require_recorded(const Trajectory& traj, const char* what) {
    if (!traj.recorded && traj.steps() > 1) {
        throw ContractError(std::string(what) + ": needs a recorded trajectory");
    }
}

void require_sgd(const Trajectory& traj, const char* what) {
    if (traj.optimizer_kind != OptimizerKind::sgd) {
        throw ContractError(std::string(what) + ": only defined for SGD inner loops");
    }
}

double combo_scale(const std::vector<double>& weights, ComboNormalize normalize) {
    if (normalize == ComboNormalize::sum) return 1.0;
    double total = 0.0;
    for (double w : weights) total += std::abs(w);
    return 1.0 / total;
}

}  // namespace

MetaGradient reptile_direction(const Trajectory& traj) {
    MetaGradient out;
    out.direction = traj.final() - traj.initial();
    out.algorithm = MetaKind::reptile;
    if (traj.recorded) out.term_norms = gradient_norms(traj);
    return out;
}

ParamVector reptile_gradient(const Trajectory& traj) {
    require_sgd(traj, "reptile_gradient");
    if (!(traj.step_size > 0.0)) throw ContractError("reptile_gradient: step size must be positive");
    return (1.0 / traj.step_size) * (traj.initial() - traj.final());
}

MetaGradient fomaml_direction(const Trajectory& traj, const Minibatch& tail_batch, const Task& task) {
    if (tail_batch.size() == 0) throw ContractError("fomaml_direction: missing tail batch");
    MetaGradient out;
    out.direction = -task.loss(tail_batch)->grad(traj.final());
    out.algorithm = MetaKind::fomaml;
    out.term_norms.push_back(norm2(out.direction));
    return out;
}

ParamVector fomaml_last_gradient(const Trajectory& traj) {
    if (traj.gradients.empty()) throw ContractError("fomaml_last_gradient: empty trajectory");
    return traj.gradients.back();
}

MetaGradient maml_direction(const Trajectory& traj, const Task& task) {
    require_sgd(traj, "maml_direction");
    require_recorded(traj, "maml_direction");
    if (traj.steps() == 0) throw ContractError("maml_direction: empty trajectory");
    const double alpha = traj.step_size;
    ParamVector v = traj.gradients.back();
    for (std::size_t j = traj.steps() - 1; j-- > 0;) {
        v -= alpha * task.loss(traj.batches[j])->hvp(traj.iterates[j], v);
    }
    if (!v.is_finite()) throw NumericalError("maml_direction: non-finite meta-gradient");
    MetaGradient out;
    out.direction = -v;
    out.algorithm = MetaKind::maml;
    out.term_norms = gradient_norms(traj);
    return out;
}

MetaGradient maml_direction(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                            double inner_lr) {
    OptimizerState state(SgdState{inner_lr});
    return maml_direction(run_on_batches(phi, task, batches, state, true), task);
}

ParamVector maml_fd_oracle(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                           double inner_lr, double h) {
    if (batches.empty()) throw ContractError("maml_fd_oracle: no batches");
    const std::vector<Minibatch> head(batches.begin(), batches.end() - 1);
    const auto last = task.loss(batches.back());
    auto objective = [&](const ParamVector& x) {
        OptimizerState state(SgdState{inner_lr});
        const ParamVector adapted = head.empty() ? x : run_on_batches(x, task, head, state, false).final();
        const double value = last->value(adapted);
        if (!std::isfinite(value)) throw OracleError("maml_fd_oracle: non-finite objective");
        return value;
    };
    ParamVector out = ParamVector::zeros(phi.dim());
    ParamVector probe = phi;
    for (std::size_t i = 0; i < phi.dim(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = objective(probe);
        probe[i] = saved - h;
        const double down = objective(probe);
        probe[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

MetaGradient combo_direction(const Trajectory& traj, const std::vector<double>& weights, ComboNormalize normalize) {
    require_recorded(traj, "combo_direction");
    MetaAlgorithm::combo(weights, normalize).validate(traj.steps());
    ParamVector sum = ParamVector::zeros(traj.initial().dim());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] != 0.0) sum = axpy(sum, weights[i], traj.gradients[i]);
    }
    MetaGradient out;
    out.direction = -combo_scale(weights, normalize) * sum;
    out.algorithm = MetaKind::combo;
    out.term_norms = gradient_norms(traj);
    return out;
}

TaskUpdate task_update(const ParamVector& phi, const Task& task, const MetaAlgorithm& algo,
                       const InnerLoopConfig& inner, RngStream& rng, OptimizerState state) {
    const std::size_t k = inner.iterations;
    algo.validate(k);
    std::vector<Minibatch> batches = sample_batches(task, inner, rng);

    switch (algo.kind) {
        case MetaKind::reptile: {
            const Trajectory traj = run_on_batches(phi, task, batches, state, false);
            return {reptile_direction(traj).direction, traj.losses.back(), std::move(state)};
        }
        case MetaKind::fomaml: {
            // The tail batch is the k-th batch; its optimizer step is the update.
            Minibatch tail = std::move(batches.back());
            batches.pop_back();
            const Trajectory pre = run_on_batches(phi, task, batches, state, false);
            const ParamVector& phi_k = pre.final();
            ParamVector g;
            const double loss = task.loss(tail)->value_and_grad(phi_k, g);
            if (!std::isfinite(loss) || !g.is_finite()) throw NumericalError("fomaml: non-finite tail gradient", k);
            const ParamVector next = state.step(phi_k, g);
            return {next - phi_k, loss, std::move(state)};
        }
        case MetaKind::maml: {
            if (state.kind() != OptimizerKind::sgd) throw ContractError("maml: inner optimizer must be sgd");
            const Trajectory traj = run_on_batches(phi, task, batches, state, true);
            return {state.step_size() * maml_direction(traj, task).direction, traj.losses.back(), std::move(state)};
        }
        case MetaKind::combo: {
            // Weighted sum of per-step displacements; with SGD this is -alpha sum w_i g_i.
            const Trajectory traj = run_on_batches(phi, task, batches, state, true);
            const double scale = combo_scale(algo.weights, algo.normalize);
            ParamVector d = ParamVector::zeros(phi.dim());
            for (std::size_t i = 0; i < k; ++i) {
                if (algo.weights[i] != 0.0) d = axpy(d, scale * algo.weights[i], traj.iterates[i + 1] - traj.iterates[i]);
            }
            return {std::move(d), traj.losses.back(), std::move(state)};
        }
    }
    throw ContractError("task_update: unknown algorithm");
}

EvalSummary meta_evaluate(const ParamVector& phi, const TaskSampler& sampler, const EvalConfig& cfg, const RngStream& rng,
                          const OptimizerState* state) {
    if (cfg.trials == 0) throw ContractError("meta_evaluate: need at least one trial");
    InnerLoopConfig inner = cfg.inner;
    inner.record_trajectory = false;
    // Zero adaptation steps is allowed here: it measures the initialisation itself.
    if (inner.iterations > 0) inner.validate();
    const std::size_t dim = phi.dim();
    const StateBlob blob = snapshot(state ? *state : OptimizerState(inner.optimizer, dim));

    EvalSummary out;
    out.trials.resize(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
        RngStream trial_rng = rng.child(i);
        const auto task = sampler.sample(trial_rng);
        OptimizerState st = restore(blob, dim);
        EvalTrial t;
        t.pre = task->evaluate(phi);
        t.post = inner.iterations == 0 ? t.pre : task->evaluate(run_inner(phi, *task, inner, trial_rng, st).final());
        out.trials[i] = t;
    });

    const double n = static_cast<double>(cfg.trials);
    for (const auto& t : out.trials) {
        out.mean += t.post;
        out.pre_mean += t.pre;
    }
    out.mean /= n;
    out.pre_mean /= n;
    if (cfg.trials > 1) {
        double ss = 0.0;
        for (const auto& t : out.trials) ss += (t.post - out.mean) * (t.post - out.mean);
        out.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return out;
}

void MetaTrainConfig::validate() const {
    inner.validate();
    algorithm.validate(inner.iterations);
    if (meta_batch == 0) throw ContractError("meta batch size must be >= 1");
    if (schedule.total_iters > 0) schedule.validate();
    if (algorithm.kind == MetaKind::maml && inner.optimizer.kind != OptimizerKind::sgd) {
        throw ContractError("maml requires an sgd inner optimizer");
    }
    if (eval) eval->inner.validate();
}

namespace {

void merge_adam(OptimizerState& target, const std::vector<std::optional<TaskUpdate>>& updates) {
    AdamState* adam = target.adam();
    if (adam == nullptr) return;
    ParamVector m = ParamVector::zeros(adam->dim());
    ParamVector v = ParamVector::zeros(adam->dim());
    std::uint64_t t = adam->step_count();
    for (const auto& u : updates) {
        const AdamState* a = u->state.adam();
        m += a->first_moment();
        v += a->second_moment();
        t = std::max(t, a->step_count());
    }
    const double inv = 1.0 / static_cast<double>(updates.size());
    adam->set_moments(inv * m, inv * v, t);
}

}  // namespace

MetaTrainResult meta_train(const TaskSampler& sampler, const ParamVector& phi0, const MetaTrainConfig& cfg,
                           const RngStream& rng, const std::function<void(const TrainLogRow&)>& on_log) {
    cfg.validate();
    if (phi0.dim() != sampler.dim()) throw ContractError("meta_train: initial parameters do not match task family");
    if (cfg.eval_sampler && cfg.eval_sampler->dim() != sampler.dim()) {
        throw ContractError("meta_train: evaluation family does not match the training family");
    }
    InnerLoopConfig inner = cfg.inner;
    inner.record_trajectory = false;
    const std::size_t dim = phi0.dim();
    const std::size_t total = cfg.schedule.total_iters;

    MetaTrainResult result;
    result.phi = phi0;
    if (cfg.persist_optimizer_state) result.state.emplace(inner.optimizer, dim);
    const RngStream eval_rng = rng.child(kEvalStream);

    auto log = [&](TrainLogRow row) {
        if (cfg.eval) {
            const EvalSummary s =
                meta_evaluate(result.phi, cfg.eval_sampler ? *cfg.eval_sampler : sampler, *cfg.eval, eval_rng,
                              result.state ? &*result.state : nullptr);
            row.has_eval = true;
            row.eval_mean = s.mean;
            row.eval_stderr = s.std_error;
        }
        result.log.push_back(row);
        if (on_log) on_log(row);
    };

    if (cfg.log_every > 0 || total == 0) log(TrainLogRow{});

    for (std::size_t iter = 0; iter < total; ++iter) {
        const RngStream iter_rng = rng.child(iter);
        std::vector<std::optional<TaskUpdate>> updates(cfg.meta_batch);
        try {
            parallel_for(cfg.meta_batch, cfg.threads, [&](std::size_t t) {
                RngStream task_rng = iter_rng.child(t);
                const auto task = sampler.sample(task_rng);
                OptimizerState st = result.state ? *result.state : OptimizerState(inner.optimizer, dim);
                updates[t] = task_update(result.phi, *task, cfg.algorithm, inner, task_rng, std::move(st));
            });
        } catch (const NumericalError& e) {
            throw NumericalError("meta_train: diverged at outer iteration " + std::to_string(iter + 1) + " (" +
                                     e.what() + ")",
                                 iter + 1);
        }

        ParamVector mean = ParamVector::zeros(dim);
        double loss = 0.0;
        for (const auto& u : updates) {
            mean += u->displacement;
            loss += u->last_loss;
        }
        const double inv = 1.0 / static_cast<double>(cfg.meta_batch);
        mean *= inv;
        if (result.state) merge_adam(*result.state, updates);

        result.phi = outer_step(result.phi, mean, cfg.schedule, iter);
        if (!result.phi.is_finite()) {
            throw NumericalError("meta_train: non-finite parameters at outer iteration " + std::to_string(iter + 1),
                                 iter + 1);
        }

        const std::size_t done = iter + 1;
        if ((cfg.log_every > 0 && done % cfg.log_every == 0) || done == total) {
            TrainLogRow row;
            row.iteration = done;
            row.outer_step = cfg.schedule.step(iter);
            row.displacement_norm = norm2(mean);
            row.last_inner_loss = loss * inv;
            log(row);
        }
    }
    return result;
}

}  // namespace metalearn
