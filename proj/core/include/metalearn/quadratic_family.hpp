#pragma once

#include <memory>
#include <vector>

#include "metalearn/task.hpp"

namespace metalearn {

/// Task whose i-th example is a quadratic loss L_i; a minibatch loss is the
/// mean of its examples' quadratics. Used as an exactness oracle for the
/// Taylor-expansion checks.
class QuadraticTask final : public Task {
public:
    QuadraticTask(std::vector<QuadraticLoss> train, std::vector<QuadraticLoss> tail = {});

    /// L1 = 1/2 (phi - 1)^2 and L2 = 1/2 (phi - 3)^2.
    static QuadraticTask scalar_pair();

    const std::vector<QuadraticLoss>& train() const { return train_; }

    std::size_t dim() const override { return dim_; }
    std::size_t train_size() const override { return train_.size(); }
    std::size_t tail_size() const override { return tail_.size(); }
    Minibatch make_batch(std::span<const std::size_t> ids, DataPool pool) const override;
    std::unique_ptr<DifferentiableLoss> loss(const Minibatch& batch) const override;
    /// Mean loss over the whole training pool.
    double evaluate(const ParamVector& phi) const override;
    bool higher_is_better() const override { return false; }

private:
    std::vector<QuadraticLoss> train_;
    std::vector<QuadraticLoss> tail_;
    std::size_t dim_;
};

struct QuadraticFamilyConfig {
    std::size_t dim = 4;
    std::size_t samples_per_task = 8;
    std::size_t tail_samples = 0;
    double curvature_min = 0.5;
    double curvature_max = 2.0;
    double center_scale = 1.0;
    double sample_noise = 0.5;

    void validate() const;
};

/// Tasks share nothing but the generating distribution: each draws a centre
/// mu ~ N(0, center_scale^2 I); each example is 1/2 (phi - c_i)^T A_i (phi - c_i)
/// with c_i = mu + sample_noise * N(0, I) and A_i = Q diag(lambda) Q^T,
/// lambda ~ U[curvature_min, curvature_max].
class QuadraticSampler final : public TaskSampler {
public:
    explicit QuadraticSampler(QuadraticFamilyConfig cfg);

    std::size_t dim() const override { return cfg_.dim; }
    std::unique_ptr<Task> sample(RngStream& rng) const override;
    std::string name() const override { return "quadratic"; }

private:
    QuadraticFamilyConfig cfg_;
};

/// Always returns the scalar pair task; batches of size 1 then enumerate L1 and L2.
class ScalarPairSampler final : public TaskSampler {
public:
    std::size_t dim() const override { return 1; }
    std::unique_ptr<Task> sample(RngStream& rng) const override;
    std::string name() const override { return "scalar-pair"; }
};

}  // namespace metalearn
