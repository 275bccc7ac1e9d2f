#include "metalearn/inner_loop.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "metalearn/errors.hpp"

namespace metalearn {

Sampling parse_sampling(const std::string& name) {
    if (name == "cycle") return Sampling::cycle;
    if (name == "replacement") return Sampling::replacement;
    throw ContractError("unknown sampling mode '" + name + "' (expected cycle or replacement)");
}

TailMode parse_tail(const std::string& name) {
    if (name == "none") return TailMode::none;
    if (name == "shared") return TailMode::shared;
    if (name == "separate") return TailMode::separate;
    throw ContractError("unknown tail mode '" + name + "' (expected none, shared or separate)");
}

std::string to_string(Sampling s) { return s == Sampling::cycle ? "cycle" : "replacement"; }

std::string to_string(TailMode t) {
    switch (t) {
        case TailMode::none: return "none";
        case TailMode::shared: return "shared";
        case TailMode::separate: return "separate";
    }
    return "none";
}

void InnerLoopConfig::validate() const {
    if (iterations == 0) throw ContractError("inner loop needs at least one iteration");
    if (batch_size == 0) throw ContractError("inner batch size must be positive");
    optimizer.validate();
}

namespace {

bool has_duplicate_ids(const std::vector<std::size_t>& ids) {
    std::vector<std::size_t> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

Minibatch finish(const Task& task, std::vector<std::size_t> ids, DataPool pool) {
    Minibatch b = task.make_batch(ids, pool);
    b.sample_ids = std::move(ids);
    b.pool = pool;
    b.has_duplicates = has_duplicate_ids(b.sample_ids);
    return b;
}

}  // namespace

std::vector<Minibatch> sample_batches(const Task& task, const InnerLoopConfig& cfg, RngStream& rng) {
    cfg.validate();
    const std::size_t n = task.train_size();
    if (n == 0) throw ContractError("sample_batches: task has no training data");
    if (cfg.tail == TailMode::separate && task.tail_size() == 0) {
        throw ContractError("sample_batches: separate tail requested but task has no tail split");
    }
    if (cfg.sampling == Sampling::cycle && cfg.batch_size > n) {
        throw ContractError("sample_batches: cycle sampling needs batch_size <= training set size");
    }

    const std::size_t from_train = cfg.tail == TailMode::separate ? cfg.iterations - 1 : cfg.iterations;
    std::vector<Minibatch> out;
    out.reserve(cfg.iterations);

    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    for (std::size_t b = 0; b < from_train; ++b) {
        std::vector<std::size_t> ids(cfg.batch_size);
        for (std::size_t j = 0; j < cfg.batch_size; ++j) {
            if (cfg.sampling == Sampling::replacement) {
                ids[j] = rng.index(n);
                continue;
            }
            if (cursor == order.size()) {
                order = rng.permutation(n);
                cursor = 0;
            }
            ids[j] = order[cursor++];
        }
        out.push_back(finish(task, std::move(ids), DataPool::train));
    }

    if (cfg.tail == TailMode::separate) {
        const std::size_t m = std::min(cfg.batch_size, task.tail_size());
        std::vector<std::size_t> perm = rng.permutation(task.tail_size());
        perm.resize(m);
        out.push_back(finish(task, std::move(perm), DataPool::tail));
    }
    return out;
}

Trajectory run_on_batches(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                          OptimizerState& state, bool record) {
    if (phi.dim() != task.dim()) throw ContractError("run_inner: parameter dimension does not match task");
    Trajectory traj;
    traj.optimizer_kind = state.kind();
    traj.step_size = state.step_size();
    traj.recorded = record;
    traj.batches = batches;
    traj.iterates.push_back(phi);
    ParamVector current = phi;
    ParamVector g;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        const auto loss = task.loss(batches[i]);
        double value = 0.0;
        try {
            value = loss->value_and_grad(current, g);
        } catch (const NumericalError&) {
            throw NumericalError("inner loop diverged at step " + std::to_string(i + 1), i + 1);
        }
        if (!std::isfinite(value) || !g.is_finite()) {
            throw NumericalError("inner loop: non-finite loss at step " + std::to_string(i + 1), i + 1);
        }
        ParamVector next = state.step(current, g);
        if (!next.is_finite()) {
            throw NumericalError("inner loop: non-finite parameters after step " + std::to_string(i + 1), i + 1);
        }
        traj.losses.push_back(value);
        if (record || i + 1 == batches.size()) traj.gradients.push_back(g);
        if (record) traj.iterates.push_back(next);
        current = std::move(next);
    }
    if (!record) traj.iterates.push_back(std::move(current));
    return traj;
}

Trajectory run_inner(const ParamVector& phi, const Task& task, const InnerLoopConfig& cfg, RngStream& rng) {
    OptimizerState state(cfg.optimizer, phi.dim());
    return run_inner(phi, task, cfg, rng, state);
}

Trajectory run_inner(const ParamVector& phi, const Task& task, const InnerLoopConfig& cfg, RngStream& rng,
                     OptimizerState& state) {
    const std::vector<Minibatch> batches = sample_batches(task, cfg, rng);
    return run_on_batches(phi, task, batches, state, cfg.record_trajectory);
}

double overlap_fraction(const Minibatch& b1, const Minibatch& b2) {
    const std::set<std::size_t> a(b1.sample_ids.begin(), b1.sample_ids.end());
    if (a.empty()) return 0.0;
    const std::set<std::size_t> b(b2.sample_ids.begin(), b2.sample_ids.end());
    std::size_t common = 0;
    for (std::size_t id : a) common += b.count(id);
    return static_cast<double>(common) / static_cast<double>(a.size());
}

}  // namespace metalearn
