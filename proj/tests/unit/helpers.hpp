#pragma once

#include <cmath>
#include <vector>

#include "metalearn/mlp.hpp"
#include "metalearn/param_vector.hpp"
#include "metalearn/rng.hpp"

namespace testing_support {

using metalearn::MlpSpec;
using metalearn::ParamVector;
using metalearn::RngStream;

inline ParamVector random_vector(std::size_t dim, RngStream& rng, double scale = 1.0) {
    ParamVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = scale * rng.normal();
    return v;
}

inline ParamVector unit_vector(std::size_t dim, RngStream& rng) {
    ParamVector v = random_vector(dim, rng);
    v *= 1.0 / metalearn::norm2(v);
    return v;
}

inline metalearn::Minibatch regression_batch(const MlpSpec& spec, std::size_t rows, RngStream& rng) {
    metalearn::Minibatch b;
    b.inputs.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.input_dim()));
    b.targets.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.output_dim()));
    for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < b.targets.size(); ++i) b.targets.data()[i] = rng.normal();
    for (std::size_t i = 0; i < rows; ++i) b.sample_ids.push_back(i);
    return b;
}

inline metalearn::Minibatch classification_batch(const MlpSpec& spec, std::size_t rows, RngStream& rng) {
    metalearn::Minibatch b;
    b.inputs.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.input_dim()));
    for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = rng.normal();
    for (std::size_t i = 0; i < rows; ++i) {
        b.labels.push_back(rng.index(spec.output_dim()));
        b.sample_ids.push_back(i);
    }
    return b;
}

/// A small random tanh network with a nonzero-bias point to evaluate at.
inline MlpSpec random_spec(RngStream& rng, metalearn::OutputKind out, std::size_t max_hidden = 8) {
    MlpSpec spec;
    spec.layer_sizes.push_back(1 + rng.index(4));
    const std::size_t hidden_layers = 1 + rng.index(2);
    for (std::size_t l = 0; l < hidden_layers; ++l) spec.layer_sizes.push_back(1 + rng.index(max_hidden));
    spec.layer_sizes.push_back(out == metalearn::OutputKind::softmax ? 2 + rng.index(4) : 1 + rng.index(2));
    spec.output = out;
    return spec;
}

}  // namespace testing_support
