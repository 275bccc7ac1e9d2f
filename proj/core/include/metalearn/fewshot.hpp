#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "metalearn/task.hpp"

namespace metalearn {

/// Synthetic N-way K-shot family. Every episode draws fresh class prototypes
/// mu_c = scale * B z_c with z_c ~ N(0, I_r), where B is a fixed D x r
/// orthonormal basis shared by the whole family (signal_dim = r). Examples are
/// mu_c + noise * N(0, I_D). With r < D the discriminative directions are a
/// family-level regularity that meta-learning can discover and a network
/// fine-tuned from scratch cannot.
struct FewShotConfig {
    std::size_t ways = 5;
    std::size_t shots = 1;
    std::size_t query_per_class = 1;
    std::size_t input_dim = 20;
    std::size_t signal_dim = 20;
    double prototype_scale = 1.0;
    double noise = 0.3;
    std::uint64_t basis_seed = 7;

    void validate() const;
};

struct FewShotEpisode {
    std::size_t ways = 0;
    std::size_t shots = 0;
    Eigen::MatrixXd prototypes;  // ways x input_dim, row = episode label
    Eigen::MatrixXd support_x;   // (ways*shots) x input_dim
    std::vector<std::size_t> support_y;
    Eigen::MatrixXd query_x;
    std::vector<std::size_t> query_y;
    /// label_of_draw[c] = episode label assigned to the c-th drawn class.
    std::vector<std::size_t> label_of_draw;
};

/// The family's fixed D x r orthonormal prototype basis.
Eigen::MatrixXd fewshot_basis(const FewShotConfig& cfg);

FewShotEpisode episode_sample(const FewShotConfig& cfg, const Eigen::MatrixXd& basis, RngStream& rng);

/// Accuracy of assigning each query point to the nearest true prototype.
double nearest_prototype_accuracy(const FewShotEpisode& episode);

/// Classification task over one episode: the support set is the train pool, the
/// query set is both the tail pool and the held-out evaluation set.
class FewShotTask final : public Task {
public:
    FewShotTask(MlpSpec spec, FewShotEpisode episode);

    const FewShotEpisode& episode() const { return episode_; }
    const MlpSpec& spec() const { return spec_; }

    std::size_t dim() const override { return spec_.param_count(); }
    std::size_t train_size() const override { return episode_.support_y.size(); }
    std::size_t tail_size() const override { return episode_.query_y.size(); }
    Minibatch make_batch(std::span<const std::size_t> ids, DataPool pool) const override;
    std::unique_ptr<DifferentiableLoss> loss(const Minibatch& batch) const override;
    /// Fraction of query points classified correctly.
    double evaluate(const ParamVector& phi) const override;
    bool higher_is_better() const override { return true; }

private:
    MlpSpec spec_;
    FewShotEpisode episode_;
};

class FewShotSampler final : public TaskSampler {
public:
    FewShotSampler(FewShotConfig cfg, MlpSpec spec);

    std::size_t dim() const override { return spec_.param_count(); }
    std::unique_ptr<Task> sample(RngStream& rng) const override;
    std::string name() const override { return "fewshot"; }
    const FewShotConfig& config() const { return cfg_; }
    const MlpSpec& spec() const { return spec_; }
    const Eigen::MatrixXd& basis() const { return basis_; }

private:
    FewShotConfig cfg_;
    MlpSpec spec_;
    Eigen::MatrixXd basis_;
};

}  // namespace metalearn
