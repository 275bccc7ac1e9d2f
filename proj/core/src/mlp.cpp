#include "metalearn/mlp.hpp"

#include <cmath>

#include "metalearn/errors.hpp"

namespace metalearn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

ConstRowMap weights(const MlpSpec& spec, const double* base, std::size_t layer) {
    return ConstRowMap(base + spec.weight_offset(layer), idx(spec.layer_sizes[layer + 1]), idx(spec.layer_sizes[layer]));
}

ConstVecMap biases(const MlpSpec& spec, const double* base, std::size_t layer) {
    return ConstVecMap(base + spec.bias_offset(layer), idx(spec.layer_sizes[layer + 1]));
}

RowMap weights(const MlpSpec& spec, double* base, std::size_t layer) {
    return RowMap(base + spec.weight_offset(layer), idx(spec.layer_sizes[layer + 1]), idx(spec.layer_sizes[layer]));
}

VecMap biases(const MlpSpec& spec, double* base, std::size_t layer) {
    return VecMap(base + spec.bias_offset(layer), idx(spec.layer_sizes[layer + 1]));
}

// Activation derivatives expressed through the pre-activation z and output a.
Eigen::ArrayXXd act_d1(Activation act, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a) {
    if (act == Activation::tanh) return 1.0 - a.array().square();
    return (z.array() > 0.0).cast<double>();
}

Eigen::ArrayXXd act_d2(Activation act, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a) {
    if (act == Activation::tanh) return -2.0 * a.array() * (1.0 - a.array().square());
    return Eigen::ArrayXXd::Zero(z.rows(), z.cols());
}

void softmax_columns(Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        auto col = m.col(c);
        const double mx = col.maxCoeff();
        col = (col.array() - mx).exp().matrix();
        col /= col.sum();
    }
}

}  // namespace

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    throw ContractError("unknown activation '" + name + "' (expected tanh or relu)");
}

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

std::size_t MlpSpec::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return n;
}

std::size_t MlpSpec::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return off;
}

std::size_t MlpSpec::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
}

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2) throw ContractError("MlpSpec: need at least an input and an output layer");
    for (std::size_t s : layer_sizes) {
        if (s == 0) throw ContractError("MlpSpec: layer sizes must be positive");
    }
    if (output == OutputKind::softmax && output_dim() < 2) {
        throw ContractError("MlpSpec: softmax output needs at least 2 classes");
    }
}

ParamVector mlp_init(const MlpSpec& spec, RngStream& rng) {
    spec.validate();
    ParamVector phi(spec.param_count());
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
        const std::size_t off = spec.weight_offset(l);
        for (std::size_t i = 0; i < n_in * n_out; ++i) phi[off + i] = rng.uniform(-bound, bound);
    }
    return phi;
}

struct MlpLoss::Forward {
    std::vector<Eigen::MatrixXd> z;  // pre-activations, one per layer
    std::vector<Eigen::MatrixXd> a;  // a[0] = inputs, a[l+1] = activation of layer l
};

namespace {

void forward_pass(const MlpSpec& spec, const double* p, const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>& z,
                  std::vector<Eigen::MatrixXd>& a) {
    const std::size_t layers = spec.num_layers();
    z.resize(layers);
    a.resize(layers + 1);
    a[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
        z[l].noalias() = weights(spec, p, l) * a[l];
        z[l].colwise() += biases(spec, p, l);
        if (l + 1 < layers) {
            if (spec.activation == Activation::tanh) {
                a[l + 1] = z[l].array().tanh().matrix();
            } else {
                a[l + 1] = z[l].cwiseMax(0.0);
            }
        } else {
            a[l + 1] = z[l];
        }
    }
}

}  // namespace

MlpLoss::MlpLoss(MlpSpec spec, const Minibatch& batch) : spec_(std::move(spec)) {
    spec_.validate();
    dim_ = spec_.param_count();
    const auto b = batch.inputs.rows();
    if (b == 0) throw ContractError("MlpLoss: empty minibatch");
    if (batch.inputs.cols() != idx(spec_.input_dim())) throw ContractError("MlpLoss: input width does not match spec");
    x_ = batch.inputs.transpose();
    if (spec_.output == OutputKind::linear) {
        if (batch.targets.rows() != b || batch.targets.cols() != idx(spec_.output_dim())) {
            throw ContractError("MlpLoss: regression targets must be batch x output_dim");
        }
        y_ = batch.targets.transpose();
    } else {
        if (batch.labels.size() != static_cast<std::size_t>(b)) throw ContractError("MlpLoss: one label per row required");
        for (std::size_t lab : batch.labels) {
            if (lab >= spec_.output_dim()) throw ContractError("MlpLoss: label out of range");
        }
        labels_ = batch.labels;
    }
}

MlpLoss::Forward MlpLoss::forward(const ParamVector& phi) const {
    if (phi.dim() != dim_) throw ContractError("MlpLoss: parameter dimension does not match spec");
    Forward fw;
    forward_pass(spec_, phi.data(), x_, fw.z, fw.a);
    if (!fw.a.back().allFinite()) throw NumericalError("MlpLoss: non-finite network output");
    return fw;
}

// Returns the loss; if delta is non-null fills dLoss/dz of the output layer.
double MlpLoss::loss_and_output_delta(const Forward& fw, Eigen::MatrixXd* delta) const {
    const Eigen::MatrixXd& out = fw.a.back();
    const double inv_b = 1.0 / static_cast<double>(out.cols());
    if (spec_.output == OutputKind::linear) {
        const Eigen::MatrixXd r = out - y_;
        if (delta) *delta = (2.0 * inv_b) * r;
        return r.squaredNorm() * inv_b;
    }
    Eigen::MatrixXd p = out;
    double loss = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        auto col = p.col(c);
        const double mx = col.maxCoeff();
        const double lse = mx + std::log((col.array() - mx).exp().sum());
        loss -= col(idx(labels_[static_cast<std::size_t>(c)])) - lse;
    }
    if (delta) {
        softmax_columns(p);
        for (Eigen::Index c = 0; c < p.cols(); ++c) p(idx(labels_[static_cast<std::size_t>(c)]), c) -= 1.0;
        *delta = inv_b * p;
    }
    return loss * inv_b;
}

double MlpLoss::value(const ParamVector& phi) const {
    const Forward fw = forward(phi);
    return loss_and_output_delta(fw, nullptr);
}

ParamVector MlpLoss::grad(const ParamVector& phi) const {
    ParamVector g;
    value_and_grad(phi, g);
    return g;
}

double MlpLoss::value_and_grad(const ParamVector& phi, ParamVector& grad_out) const {
    const Forward fw = forward(phi);
    Eigen::MatrixXd delta;
    const double loss = loss_and_output_delta(fw, &delta);
    grad_out = ParamVector(dim_);
    const double* p = phi.data();
    double* g = grad_out.data();
    for (std::size_t l = spec_.num_layers(); l-- > 0;) {
        weights(spec_, g, l).noalias() = delta * fw.a[l].transpose();
        biases(spec_, g, l) = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = weights(spec_, p, l).transpose() * delta;
            delta = (back.array() * act_d1(spec_.activation, fw.z[l - 1], fw.a[l])).matrix();
        }
    }
    return loss;
}

ParamVector MlpLoss::hvp(const ParamVector& phi, const ParamVector& v) const {
    if (v.dim() != dim_) throw ContractError("MlpLoss::hvp: direction dimension does not match spec");
    const Forward fw = forward(phi);
    const std::size_t layers = spec_.num_layers();
    const double* p = phi.data();
    const double* dv = v.data();

    // Directional derivatives of the forward pass along v.
    std::vector<Eigen::MatrixXd> rz(layers);
    std::vector<Eigen::MatrixXd> ra(layers + 1);
    ra[0] = Eigen::MatrixXd::Zero(x_.rows(), x_.cols());
    for (std::size_t l = 0; l < layers; ++l) {
        rz[l].noalias() = weights(spec_, dv, l) * fw.a[l];
        if (l > 0) rz[l].noalias() += weights(spec_, p, l) * ra[l];
        rz[l].colwise() += biases(spec_, dv, l);
        if (l + 1 < layers) {
            ra[l + 1] = (act_d1(spec_.activation, fw.z[l], fw.a[l + 1]) * rz[l].array()).matrix();
        } else {
            ra[l + 1] = rz[l];
        }
    }

    Eigen::MatrixXd delta;
    loss_and_output_delta(fw, &delta);
    const double inv_b = 1.0 / static_cast<double>(x_.cols());
    Eigen::MatrixXd rdelta;
    if (spec_.output == OutputKind::linear) {
        rdelta = (2.0 * inv_b) * rz[layers - 1];
    } else {
        Eigen::MatrixXd prob = fw.a.back();
        softmax_columns(prob);
        const Eigen::MatrixXd& r = rz[layers - 1];
        rdelta.resize(prob.rows(), prob.cols());
        for (Eigen::Index c = 0; c < prob.cols(); ++c) {
            const double mean_r = prob.col(c).dot(r.col(c));
            rdelta.col(c) = inv_b * (prob.col(c).array() * (r.col(c).array() - mean_r)).matrix();
        }
    }

    ParamVector out(dim_);
    double* h = out.data();
    for (std::size_t l = layers; l-- > 0;) {
        auto hw = weights(spec_, h, l);
        hw.noalias() = rdelta * fw.a[l].transpose();
        if (l > 0) hw.noalias() += delta * ra[l].transpose();
        biases(spec_, h, l) = rdelta.rowwise().sum();
        if (l > 0) {
            const Eigen::MatrixXd back = weights(spec_, p, l).transpose() * delta;
            Eigen::MatrixXd rback = weights(spec_, dv, l).transpose() * delta;
            rback.noalias() += weights(spec_, p, l).transpose() * rdelta;
            const Eigen::ArrayXXd d1 = act_d1(spec_.activation, fw.z[l - 1], fw.a[l]);
            const Eigen::ArrayXXd d2 = act_d2(spec_.activation, fw.z[l - 1], fw.a[l]);
            rdelta = (d2 * rz[l - 1].array() * back.array() + d1 * rback.array()).matrix();
            delta = (d1 * back.array()).matrix();
        }
    }
    return out;
}

std::unique_ptr<MlpLoss> mlp_loss(const MlpSpec& spec, const Minibatch& batch) {
    return std::make_unique<MlpLoss>(spec, batch);
}

Eigen::MatrixXd mlp_predict(const MlpSpec& spec, const ParamVector& phi, const Eigen::MatrixXd& inputs) {
    spec.validate();
    if (phi.dim() != spec.param_count()) throw ContractError("mlp_predict: parameter dimension does not match spec");
    if (inputs.cols() != idx(spec.input_dim())) throw ContractError("mlp_predict: input width does not match spec");
    std::vector<Eigen::MatrixXd> z;
    std::vector<Eigen::MatrixXd> a;
    forward_pass(spec, phi.data(), inputs.transpose(), z, a);
    Eigen::MatrixXd out = a.back();
    if (spec.output == OutputKind::softmax) softmax_columns(out);
    return out.transpose();
}

std::vector<std::size_t> mlp_predict_class(const MlpSpec& spec, const ParamVector& phi, const Eigen::MatrixXd& inputs) {
    const Eigen::MatrixXd probs = mlp_predict(spec, phi, inputs);
    std::vector<std::size_t> out(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < probs.cols(); ++c) {
            if (probs(r, c) > probs(r, best)) best = c;
        }
        out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
    }
    return out;
}

}  // namespace metalearn
