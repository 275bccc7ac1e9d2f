#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "metalearn/errors.hpp"
#include "metalearn/mlp.hpp"

using namespace metalearn;
using namespace testing_support;

namespace {

MlpSpec spec_of(std::vector<std::size_t> sizes, OutputKind out = OutputKind::linear) {
    MlpSpec s;
    s.layer_sizes = std::move(sizes);
    s.output = out;
    return s;
}

Minibatch one_point(double x, double y) {
    Minibatch b;
    b.inputs = Eigen::MatrixXd::Constant(1, 1, x);
    b.targets = Eigen::MatrixXd::Constant(1, 1, y);
    b.sample_ids = {0};
    return b;
}

}  // namespace

TEST_SUITE("models") {
    TEST_CASE("parameter counts") {
        CHECK(spec_of({1, 64, 64, 1}).param_count() == 4353);
        CHECK(spec_of({2, 3}).param_count() == 9);
        RngStream rng(1, 0);
        CHECK(mlp_init(spec_of({1, 64, 64, 1}), rng).dim() == 4353);
    }

    TEST_CASE("spec validation") {
        CHECK_THROWS_AS(spec_of({4}).validate(), ContractError);
        CHECK_THROWS_AS(spec_of({4, 0, 2}).validate(), ContractError);
        CHECK_THROWS_AS(spec_of({4, 1}, OutputKind::softmax).validate(), ContractError);
        CHECK_NOTHROW(spec_of({4, 2}, OutputKind::softmax).validate());
        CHECK_THROWS_AS(parse_activation("sigmoid"), ContractError);
    }

    TEST_CASE("Glorot initialisation") {
        const MlpSpec s = spec_of({3, 7, 2});
        RngStream a(5, 0), b(5, 0);
        const ParamVector p = mlp_init(s, a);
        CHECK(p == mlp_init(s, b));
        for (std::size_t l = 0; l < s.num_layers(); ++l) {
            const std::size_t in = s.layer_sizes[l], out = s.layer_sizes[l + 1];
            const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            for (std::size_t i = 0; i < in * out; ++i) CHECK(std::abs(p[s.weight_offset(l) + i]) <= limit);
            for (std::size_t i = 0; i < out; ++i) CHECK(p[s.bias_offset(l) + i] == 0.0);
        }
    }

    TEST_CASE("hand-computed losses") {
        const MlpSpec lin = spec_of({1, 1});
        const MlpLoss l(lin, one_point(1, 0));
        const ParamVector phi{2, 0};
        CHECK(l.value(phi) == doctest::Approx(4.0));
        CHECK(max_abs_diff(l.grad(phi), {4, 4}) <= 1e-12);

        Minibatch fit = one_point(2, 7);
        CHECK(MlpLoss(lin, fit).value({3, 1}) == 0.0);
        CHECK(norm_inf(MlpLoss(lin, fit).grad({3, 1})) == 0.0);

        const MlpSpec cls = spec_of({3, 4, 5}, OutputKind::softmax);
        RngStream rng(2, 0);
        const Minibatch b = classification_batch(cls, 6, rng);
        CHECK(MlpLoss(cls, b).value(ParamVector::zeros(cls.param_count())) == doctest::Approx(std::log(5.0)));
    }

    TEST_CASE("predictions") {
        CHECK(mlp_predict(spec_of({1, 1}), {3, 1}, Eigen::MatrixXd::Constant(1, 1, 2))(0, 0) == 7.0);
        const MlpSpec reg = spec_of({2, 5, 3});
        CHECK(mlp_predict(reg, ParamVector::zeros(reg.param_count()), Eigen::MatrixXd::Ones(4, 2)).isZero());
        const MlpSpec cls = spec_of({2, 5, 4}, OutputKind::softmax);
        const ParamVector zero = ParamVector::zeros(cls.param_count());
        const Eigen::MatrixXd p = mlp_predict(cls, zero, Eigen::MatrixXd::Ones(3, 2));
        CHECK((p.array() - 0.25).abs().maxCoeff() <= 1e-15);
        for (auto c : mlp_predict_class(cls, zero, Eigen::MatrixXd::Ones(3, 2))) CHECK(c == 0);
        CHECK_THROWS_AS(mlp_predict(cls, ParamVector::zeros(3), Eigen::MatrixXd::Ones(3, 2)), ContractError);
        CHECK_THROWS_AS(mlp_predict(cls, zero, Eigen::MatrixXd::Ones(3, 3)), ContractError);
    }

    TEST_CASE("property: softmax rows sum to one and cross-entropy is non-negative") {
        RngStream rng(3, 0);
        for (int t = 0; t < 20; ++t) {
            const MlpSpec s = random_spec(rng, OutputKind::softmax);
            const ParamVector phi = random_vector(s.param_count(), rng, 2.0);
            const Minibatch b = classification_batch(s, 7, rng);
            const Eigen::MatrixXd p = mlp_predict(s, phi, b.inputs);
            CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
            CHECK(MlpLoss(s, b).value(phi) >= 0.0);
        }
    }

    TEST_CASE("property: gradients and HVPs match finite differences") {
        RngStream rng(4, 0);
        for (int t = 0; t < 30; ++t) {
            const auto out = t % 2 ? OutputKind::softmax : OutputKind::linear;
            const MlpSpec s = random_spec(rng, out);
            const ParamVector phi = random_vector(s.param_count(), rng, 0.7);
            const Minibatch b = out == OutputKind::softmax ? classification_batch(s, 5, rng) : regression_batch(s, 5, rng);
            const MlpLoss l(s, b);
            const ParamVector g = l.grad(phi);
            CHECK(max_abs_diff(g, fd_grad(l, phi)) <= 1e-6 * (1 + norm_inf(g)));
            ParamVector g2;
            CHECK(l.value_and_grad(phi, g2) == doctest::Approx(l.value(phi)));
            CHECK(g2 == g);
            const ParamVector v = unit_vector(s.param_count(), rng), w = unit_vector(s.param_count(), rng);
            const ParamVector hv = l.hvp(phi, v);
            CHECK(max_abs_diff(hv, fd_hvp(l, phi, v)) <= 1e-5 * (1 + norm_inf(hv)));
            CHECK(std::abs(dot(w, hv) - dot(v, l.hvp(phi, w))) <= 1e-9);
        }
    }

    TEST_CASE("property: loss is invariant under permuting batch rows") {
        RngStream rng(5, 0);
        const MlpSpec s = spec_of({3, 6, 2});
        const ParamVector phi = random_vector(s.param_count(), rng);
        const Minibatch b = regression_batch(s, 9, rng);
        const auto perm = rng.permutation(9);
        Minibatch p = b;
        for (std::size_t i = 0; i < 9; ++i) {
            p.inputs.row(static_cast<Eigen::Index>(i)) = b.inputs.row(static_cast<Eigen::Index>(perm[i]));
            p.targets.row(static_cast<Eigen::Index>(i)) = b.targets.row(static_cast<Eigen::Index>(perm[i]));
        }
        CHECK(MlpLoss(s, p).value(phi) == doctest::Approx(MlpLoss(s, b).value(phi)).epsilon(1e-14));
    }

    TEST_CASE("property: relabelling classes with matching output units leaves the loss unchanged") {
        RngStream rng(6, 0);
        const MlpSpec s = spec_of({4, 8, 5}, OutputKind::softmax);
        const ParamVector phi = random_vector(s.param_count(), rng);
        const Minibatch b = classification_batch(s, 10, rng);
        const auto perm = rng.permutation(5);  // class c becomes perm[c]
        Minibatch relabelled = b;
        for (auto& y : relabelled.labels) y = perm[y];
        ParamVector moved = phi;
        const std::size_t last = s.num_layers() - 1, in = s.layer_sizes[last];
        for (std::size_t c = 0; c < 5; ++c) {
            for (std::size_t j = 0; j < in; ++j) {
                moved[s.weight_offset(last) + perm[c] * in + j] = phi[s.weight_offset(last) + c * in + j];
            }
            moved[s.bias_offset(last) + perm[c]] = phi[s.bias_offset(last) + c];
        }
        CHECK(std::abs(MlpLoss(s, relabelled).value(moved) - MlpLoss(s, b).value(phi)) <= 1e-12);
    }

    TEST_CASE("relu networks run and reject malformed batches") {
        MlpSpec s = spec_of({2, 4, 1});
        s.activation = Activation::relu;
        RngStream rng(7, 0);
        const ParamVector phi = mlp_init(s, rng);
        const Minibatch b = regression_batch(s, 3, rng);
        CHECK(std::isfinite(MlpLoss(s, b).value(phi)));
        Minibatch bad = b;
        bad.inputs = Eigen::MatrixXd::Ones(3, 3);
        CHECK_THROWS_AS(MlpLoss(s, bad), ContractError);
        CHECK_THROWS_AS(MlpLoss(s, b).value(ParamVector::zeros(2)), ContractError);
    }
}
