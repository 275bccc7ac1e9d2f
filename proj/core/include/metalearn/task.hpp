#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>

#include "metalearn/loss.hpp"
#include "metalearn/mlp.hpp"
#include "metalearn/rng.hpp"

namespace metalearn {

/// One sampled learning problem. Examples live in a train pool and, for tasks
/// that support separate-tail FOMAML, a disjoint tail pool.
class Task {
public:
    virtual ~Task() = default;

    /// Dimension of the parameter vector this task's losses act on.
    virtual std::size_t dim() const = 0;
    virtual std::size_t train_size() const = 0;
    virtual std::size_t tail_size() const { return 0; }

    /// Materialise the examples with the given ids from a pool.
    virtual Minibatch make_batch(std::span<const std::size_t> ids, DataPool pool) const = 0;
    virtual std::unique_ptr<DifferentiableLoss> loss(const Minibatch& batch) const = 0;

    /// Held-out metric: grid loss for regression, query accuracy for classification.
    virtual double evaluate(const ParamVector& phi) const = 0;
    /// True when larger `evaluate` values are better.
    virtual bool higher_is_better() const = 0;
};

/// A distribution over tasks.
class TaskSampler {
public:
    virtual ~TaskSampler() = default;
    virtual std::size_t dim() const = 0;
    virtual std::unique_ptr<Task> sample(RngStream& rng) const = 0;
    virtual std::string name() const = 0;
};

}  // namespace metalearn
