#include "metalearn/quadratic_family.hpp"

#include <Eigen/QR>

#include "metalearn/errors.hpp"

namespace metalearn {

QuadraticTask::QuadraticTask(std::vector<QuadraticLoss> train, std::vector<QuadraticLoss> tail)
    : train_(std::move(train)), tail_(std::move(tail)) {
    if (train_.empty()) throw ContractError("QuadraticTask: needs at least one example");
    dim_ = train_.front().dim();
    for (const auto& q : train_) {
        if (q.dim() != dim_) throw ContractError("QuadraticTask: example dimensions differ");
    }
    for (const auto& q : tail_) {
        if (q.dim() != dim_) throw ContractError("QuadraticTask: tail dimensions differ");
    }
}

QuadraticTask QuadraticTask::scalar_pair() {
    return QuadraticTask({QuadraticLoss::scalar(1.0, 1.0), QuadraticLoss::scalar(1.0, 3.0)});
}

Minibatch QuadraticTask::make_batch(std::span<const std::size_t> ids, DataPool pool) const {
    const auto& pool_items = pool == DataPool::train ? train_ : tail_;
    for (std::size_t id : ids) {
        if (id >= pool_items.size()) throw ContractError("QuadraticTask: sample id out of range");
    }
    Minibatch b;
    b.sample_ids.assign(ids.begin(), ids.end());
    b.pool = pool;
    return b;
}

std::unique_ptr<DifferentiableLoss> QuadraticTask::loss(const Minibatch& batch) const {
    const auto& pool_items = batch.pool == DataPool::train ? train_ : tail_;
    if (batch.sample_ids.empty()) throw ContractError("QuadraticTask: empty minibatch");
    if (batch.sample_ids.size() == 1) return std::make_unique<QuadraticLoss>(pool_items.at(batch.sample_ids[0]));
    std::vector<std::shared_ptr<const DifferentiableLoss>> parts;
    parts.reserve(batch.sample_ids.size());
    for (std::size_t id : batch.sample_ids) parts.push_back(std::make_shared<QuadraticLoss>(pool_items.at(id)));
    return std::make_unique<MeanLoss>(std::move(parts));
}

double QuadraticTask::evaluate(const ParamVector& phi) const {
    double total = 0.0;
    for (const auto& q : train_) total += q.value(phi);
    return total / static_cast<double>(train_.size());
}

void QuadraticFamilyConfig::validate() const {
    if (dim == 0) throw ContractError("quadratic family: dim must be positive");
    if (samples_per_task == 0) throw ContractError("quadratic family: need at least one example per task");
    if (!(curvature_min >= 0.0 && curvature_min <= curvature_max)) {
        throw ContractError("quadratic family: need 0 <= curvature_min <= curvature_max");
    }
}

QuadraticSampler::QuadraticSampler(QuadraticFamilyConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::unique_ptr<Task> QuadraticSampler::sample(RngStream& rng) const {
    const auto d = static_cast<Eigen::Index>(cfg_.dim);
    Eigen::VectorXd mu(d);
    for (Eigen::Index i = 0; i < d; ++i) mu(i) = cfg_.center_scale * rng.normal();

    auto make = [&] {
        Eigen::MatrixXd g(d, d);
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
        }
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
        Eigen::VectorXd lambda(d);
        for (Eigen::Index i = 0; i < d; ++i) lambda(i) = rng.uniform(cfg_.curvature_min, cfg_.curvature_max);
        Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
        a = 0.5 * (a + a.transpose());
        Eigen::VectorXd c(d);
        for (Eigen::Index i = 0; i < d; ++i) c(i) = mu(i) + cfg_.sample_noise * rng.normal();
        return QuadraticLoss(std::move(a), ParamVector(std::move(c)));
    };

    std::vector<QuadraticLoss> train;
    std::vector<QuadraticLoss> tail;
    for (std::size_t i = 0; i < cfg_.samples_per_task; ++i) train.push_back(make());
    for (std::size_t i = 0; i < cfg_.tail_samples; ++i) tail.push_back(make());
    return std::make_unique<QuadraticTask>(std::move(train), std::move(tail));
}

std::unique_ptr<Task> ScalarPairSampler::sample(RngStream&) const {
    return std::make_unique<QuadraticTask>(QuadraticTask::scalar_pair());
}

}  // namespace metalearn
