#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "metalearn/optim.hpp"
#include "metalearn/task.hpp"

namespace metalearn {

enum class Sampling { cycle, replacement };
/// Where the last inner batch (the one FOMAML takes its gradient on) comes from.
enum class TailMode { none, shared, separate };

Sampling parse_sampling(const std::string& name);
TailMode parse_tail(const std::string& name);
std::string to_string(Sampling s);
std::string to_string(TailMode t);

/// k optimizer steps on minibatches of one task.
///
/// With tail = separate the k-th batch is drawn from the task's disjoint tail
/// pool; with tail = shared it is simply the next batch under `sampling`.
struct InnerLoopConfig {
    std::size_t iterations = 5;
    std::size_t batch_size = 10;
    Sampling sampling = Sampling::cycle;
    TailMode tail = TailMode::none;
    OptimizerConfig optimizer = OptimizerConfig::sgd(0.02);
    bool record_trajectory = true;

    void validate() const;
};

/// Record of one inner loop. iterates[i] is phi_{i+1} in 1-based notation, so
/// gradients[i] = L_{i+1}'(iterates[i]) and iterates[i+1] is the result of the
/// optimizer step. When recording is off only the first and last iterate and
/// the last gradient are kept.
struct Trajectory {
    std::vector<ParamVector> iterates;
    std::vector<ParamVector> gradients;
    std::vector<double> losses;
    std::vector<Minibatch> batches;
    OptimizerKind optimizer_kind = OptimizerKind::sgd;
    double step_size = 0.0;
    bool recorded = true;

    std::size_t steps() const { return batches.size(); }
    const ParamVector& initial() const { return iterates.front(); }
    const ParamVector& final() const { return iterates.back(); }
};

/// The k batches an inner loop would consume (last one is the tail batch when tail != none).
std::vector<Minibatch> sample_batches(const Task& task, const InnerLoopConfig& cfg, RngStream& rng);

/// Runs the loop with a fresh optimizer state.
Trajectory run_inner(const ParamVector& phi, const Task& task, const InnerLoopConfig& cfg, RngStream& rng);
/// Runs the loop carrying `state` (Adam moments persist into and out of the call).
Trajectory run_inner(const ParamVector& phi, const Task& task, const InnerLoopConfig& cfg, RngStream& rng,
                     OptimizerState& state);
/// Deterministic core: one optimizer step per supplied batch.
Trajectory run_on_batches(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                          OptimizerState& state, bool record = true);

/// |ids(b1) ∩ ids(b2)| / |ids(b1)|, counting distinct ids of b1.
double overlap_fraction(const Minibatch& b1, const Minibatch& b2);

}  // namespace metalearn
