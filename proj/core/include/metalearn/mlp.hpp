#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metalearn/loss.hpp"
#include "metalearn/param_vector.hpp"
#include "metalearn/rng.hpp"

namespace metalearn {

enum class Activation { tanh, relu };
enum class OutputKind { linear, softmax };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// Fully connected network. Parameters are laid out layer by layer: the
/// row-major (n_out x n_in) weight block followed by the n_out biases.
struct MlpSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::tanh;
    OutputKind output = OutputKind::linear;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; }
    std::size_t param_count() const;
    /// Offset of layer l's weight block (l in [0, num_layers)).
    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const;

    void validate() const;
};

enum class DataPool { train, tail };

/// A batch of examples drawn from one task. Rows of `inputs` line up with
/// `sample_ids`; regression uses `targets`, classification uses `labels`.
/// Losses that are not data-driven (quadratic families) only use the ids.
struct Minibatch {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> sample_ids;
    DataPool pool = DataPool::train;
    bool has_duplicates = false;

    std::size_t size() const { return sample_ids.size(); }
};

/// Glorot-uniform weights, zero biases.
ParamVector mlp_init(const MlpSpec& spec, RngStream& rng);

/// Forward pass; softmax networks return class probabilities. One row per input row.
Eigen::MatrixXd mlp_predict(const MlpSpec& spec, const ParamVector& phi, const Eigen::MatrixXd& inputs);

/// argmax of each row, ties resolved toward the lowest class index.
std::vector<std::size_t> mlp_predict_class(const MlpSpec& spec, const ParamVector& phi, const Eigen::MatrixXd& inputs);

/// Loss of an MLP on a fixed minibatch: mean squared error (summed over output
/// units) for linear outputs, mean cross-entropy for softmax outputs.
class MlpLoss final : public DifferentiableLoss {
public:
    MlpLoss(MlpSpec spec, const Minibatch& batch);

    const MlpSpec& spec() const { return spec_; }
    std::size_t batch_size() const { return static_cast<std::size_t>(x_.cols()); }

    std::size_t dim() const override { return dim_; }
    double value(const ParamVector& phi) const override;
    ParamVector grad(const ParamVector& phi) const override;
    double value_and_grad(const ParamVector& phi, ParamVector& grad_out) const override;
    /// Exact Hessian-vector product (forward-mode directional derivative of backprop).
    ParamVector hvp(const ParamVector& phi, const ParamVector& v) const override;

private:
    struct Forward;
    Forward forward(const ParamVector& phi) const;
    double loss_and_output_delta(const Forward& fw, Eigen::MatrixXd* delta) const;

    MlpSpec spec_;
    std::size_t dim_;
    Eigen::MatrixXd x_;  // in_dim x batch
    Eigen::MatrixXd y_;  // out_dim x batch (regression)
    std::vector<std::size_t> labels_;
};

std::unique_ptr<MlpLoss> mlp_loss(const MlpSpec& spec, const Minibatch& batch);

}  // namespace metalearn
