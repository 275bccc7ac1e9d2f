#include "metalearn/fewshot.hpp"

#include <Eigen/QR>

#include "metalearn/errors.hpp"

namespace metalearn {

void FewShotConfig::validate() const {
    if (ways < 2) throw ContractError("fewshot: need at least 2 ways");
    if (shots < 1) throw ContractError("fewshot: need at least 1 shot");
    if (query_per_class < 1) throw ContractError("fewshot: need at least 1 query point per class");
    if (input_dim < 1) throw ContractError("fewshot: input_dim must be positive");
    if (signal_dim < 1 || signal_dim > input_dim) throw ContractError("fewshot: signal_dim must lie in [1, input_dim]");
    if (!(noise > 0.0)) throw ContractError("fewshot: noise must be positive");
    if (!(prototype_scale > 0.0)) throw ContractError("fewshot: prototype_scale must be positive");
}

Eigen::MatrixXd fewshot_basis(const FewShotConfig& cfg) {
    const auto d = static_cast<Eigen::Index>(cfg.input_dim);
    const auto r = static_cast<Eigen::Index>(cfg.signal_dim);
    if (r == d) return Eigen::MatrixXd::Identity(d, d);
    RngStream rng(cfg.basis_seed, 0xba515);
    Eigen::MatrixXd g(d, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
}

FewShotEpisode episode_sample(const FewShotConfig& cfg, const Eigen::MatrixXd& basis, RngStream& rng) {
    cfg.validate();
    const auto d = static_cast<Eigen::Index>(cfg.input_dim);
    const auto r = static_cast<Eigen::Index>(cfg.signal_dim);
    if (basis.rows() != d || basis.cols() != r) throw ContractError("episode_sample: basis shape does not match config");

    FewShotEpisode ep;
    ep.ways = cfg.ways;
    ep.shots = cfg.shots;
    ep.label_of_draw = rng.permutation(cfg.ways);
    ep.prototypes.resize(static_cast<Eigen::Index>(cfg.ways), d);
    for (std::size_t c = 0; c < cfg.ways; ++c) {
        Eigen::VectorXd z(r);
        for (Eigen::Index j = 0; j < r; ++j) z(j) = rng.normal();
        ep.prototypes.row(static_cast<Eigen::Index>(ep.label_of_draw[c])) = (cfg.prototype_scale * (basis * z)).transpose();
    }

    auto draw = [&](std::size_t per_class, Eigen::MatrixXd& x, std::vector<std::size_t>& y) {
        x.resize(static_cast<Eigen::Index>(cfg.ways * per_class), d);
        y.resize(cfg.ways * per_class);
        Eigen::Index row = 0;
        for (std::size_t c = 0; c < cfg.ways; ++c) {
            const std::size_t label = ep.label_of_draw[c];
            for (std::size_t s = 0; s < per_class; ++s, ++row) {
                for (Eigen::Index j = 0; j < d; ++j) {
                    x(row, j) = ep.prototypes(static_cast<Eigen::Index>(label), j) + cfg.noise * rng.normal();
                }
                y[static_cast<std::size_t>(row)] = label;
            }
        }
    };
    draw(cfg.shots, ep.support_x, ep.support_y);
    draw(cfg.query_per_class, ep.query_x, ep.query_y);
    return ep;
}

double nearest_prototype_accuracy(const FewShotEpisode& episode) {
    std::size_t correct = 0;
    for (Eigen::Index q = 0; q < episode.query_x.rows(); ++q) {
        Eigen::Index best = 0;
        double best_d = (episode.prototypes.row(0) - episode.query_x.row(q)).squaredNorm();
        for (Eigen::Index c = 1; c < episode.prototypes.rows(); ++c) {
            const double dist = (episode.prototypes.row(c) - episode.query_x.row(q)).squaredNorm();
            if (dist < best_d) {
                best_d = dist;
                best = c;
            }
        }
        correct += static_cast<std::size_t>(best) == episode.query_y[static_cast<std::size_t>(q)] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(episode.query_y.size());
}

FewShotTask::FewShotTask(MlpSpec spec, FewShotEpisode episode) : spec_(std::move(spec)), episode_(std::move(episode)) {
    spec_.validate();
    if (spec_.output != OutputKind::softmax || spec_.output_dim() != episode_.ways) {
        throw ContractError("FewShotTask: model needs a softmax output with one unit per way");
    }
    if (spec_.input_dim() != static_cast<std::size_t>(episode_.support_x.cols())) {
        throw ContractError("FewShotTask: model input width does not match episode");
    }
}

Minibatch FewShotTask::make_batch(std::span<const std::size_t> ids, DataPool pool) const {
    const auto& x = pool == DataPool::train ? episode_.support_x : episode_.query_x;
    const auto& y = pool == DataPool::train ? episode_.support_y : episode_.query_y;
    Minibatch b;
    b.inputs.resize(static_cast<Eigen::Index>(ids.size()), x.cols());
    b.labels.resize(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= y.size()) throw ContractError("FewShotTask: sample id out of range");
        b.inputs.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(ids[r]));
        b.labels[r] = y[ids[r]];
    }
    b.sample_ids.assign(ids.begin(), ids.end());
    b.pool = pool;
    return b;
}

std::unique_ptr<DifferentiableLoss> FewShotTask::loss(const Minibatch& batch) const { return mlp_loss(spec_, batch); }

double FewShotTask::evaluate(const ParamVector& phi) const {
    const auto pred = mlp_predict_class(spec_, phi, episode_.query_x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == episode_.query_y[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

FewShotSampler::FewShotSampler(FewShotConfig cfg, MlpSpec spec)
    : cfg_(cfg), spec_(std::move(spec)), basis_(fewshot_basis(cfg_)) {
    cfg_.validate();
    spec_.validate();
}

std::unique_ptr<Task> FewShotSampler::sample(RngStream& rng) const {
    return std::make_unique<FewShotTask>(spec_, episode_sample(cfg_, basis_, rng));
}

}  // namespace metalearn
