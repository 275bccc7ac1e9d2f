#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "metalearn/errors.hpp"
#include "metalearn/fewshot.hpp"
#include "metalearn/manifold.hpp"
#include "metalearn/sine.hpp"

using namespace metalearn;
using testing_support::random_vector;

namespace {

MlpSpec sine_spec() {
    MlpSpec s;
    s.layer_sizes = {1, 8, 1};
    return s;
}

AffineManifoldTask line(double mx, double my, double q) { return {Eigen::MatrixXd{{mx, my}}, Eigen::VectorXd::Constant(1, q)}; }

}  // namespace

TEST_SUITE("tasks") {
    TEST_CASE("sine sampling statistics") {
        const SineFamilyConfig f;
        RngStream rng(1, 0);
        const int n = 100000;
        double sum = 0;
        for (int i = 0; i < n; ++i) {
            RngStream r = rng.child(static_cast<std::uint64_t>(i));
            const SineTask t = sine_sample(f, sine_spec(), r);
            REQUIRE(t.amplitude() >= 0.1);
            REQUIRE(t.amplitude() <= 5.0);
            REQUIRE(t.phase() >= 0.0);
            REQUIRE(t.phase() <= 2 * std::numbers::pi);
            sum += t.amplitude();
            if (i < 100) {
                REQUIRE(t.train_x().size() == 10);
                for (double x : t.train_x()) REQUIRE(std::abs(x) <= 5.0);
            }
        }
        const double se = 4.9 / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(sum / n - 2.55) <= 4 * se);

        RngStream a(2, 0), b(2, 0);
        const SineTask ta = sine_sample(f, sine_spec(), a), tb = sine_sample(f, sine_spec(), b);
        CHECK(ta.amplitude() == tb.amplitude());
        CHECK(ta.phase() == tb.phase());
        CHECK(ta.train_x() == tb.train_x());
    }

    TEST_CASE("sine grid and evaluation loss") {
        const auto g = uniform_grid(-5, 5, 50);
        REQUIRE(g.size() == 50);
        CHECK(g.front() == -5.0);
        CHECK(g.back() == 5.0);
        for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] - g[i - 1] == doctest::Approx(10.0 / 49).epsilon(1e-13));

        RngStream rng(3, 0);
        const MlpSpec spec = sine_spec();
        const SineTask t = sine_sample(SineFamilyConfig{}, spec, rng);
        double oracle = 0;
        for (double x : g) oracle += std::pow(t.amplitude() * std::sin(x + t.phase()), 2);
        oracle /= 50;
        const ParamVector zero = ParamVector::zeros(spec.param_count());
        CHECK(sine_eval_loss(spec, zero, t) == doctest::Approx(oracle).epsilon(1e-12));
        CHECK(t.evaluate(zero) == doctest::Approx(oracle).epsilon(1e-12));
        CHECK(oracle == doctest::Approx(t.amplitude() * t.amplitude() / 2).epsilon(0.1));
    }

    TEST_CASE("the average sine is zero everywhere") {
        const SineFamilyConfig f;
        RngStream rng(4, 0);
        const int n = 20000;
        for (double x : {-4.0, -1.0, 0.5, 3.0}) {
            double s = 0, sq = 0;
            for (int i = 0; i < n; ++i) {
                const SineTask t = sine_sample(f, sine_spec(), rng);
                const double y = t.target(x);
                s += y;
                sq += y * y;
            }
            const double mean = s / n, se = std::sqrt((sq / n - mean * mean) / n);
            CHECK(std::abs(mean) <= 4 * se);
        }
    }

    TEST_CASE("episode counts and protocol") {
        FewShotConfig c;
        const Eigen::MatrixXd basis = fewshot_basis(c);
        CHECK((basis.transpose() * basis - Eigen::MatrixXd::Identity(basis.cols(), basis.cols())).norm() <= 1e-12);
        RngStream rng(5, 0);
        const FewShotEpisode e = episode_sample(c, basis, rng);
        CHECK(e.support_x.rows() == 5);
        CHECK(e.query_x.rows() == 5);
        CHECK(e.support_y.size() == 5);
        CHECK(e.query_y.size() == 5);
        std::vector<std::size_t> seen(5, 0);
        for (auto y : e.support_y) ++seen[y];
        for (auto s : seen) CHECK(s == 1);

        // Two episodes from one stream get different label assignments at least sometimes.
        bool differs = false;
        for (int i = 0; i < 10 && !differs; ++i) differs = episode_sample(c, basis, rng).label_of_draw != e.label_of_draw;
        CHECK(differs);

        FewShotConfig bad = c;
        bad.ways = 1;
        CHECK_THROWS_AS(bad.validate(), ContractError);
        bad = c;
        bad.noise = 0;
        CHECK_THROWS_AS(bad.validate(), ContractError);
    }

    TEST_CASE("zero-noise episodes are separable") {
        FewShotConfig c;
        c.noise = 1e-9;
        c.query_per_class = 4;
        const Eigen::MatrixXd basis = fewshot_basis(c);
        RngStream rng(6, 0);
        for (int i = 0; i < 20; ++i) CHECK(nearest_prototype_accuracy(episode_sample(c, basis, rng)) == 1.0);
    }

    TEST_CASE("class means converge to the prototypes") {
        FewShotConfig c;
        c.shots = 10000;
        const Eigen::MatrixXd basis = fewshot_basis(c);
        RngStream rng(7, 0);
        const FewShotEpisode e = episode_sample(c, basis, rng);
        for (std::size_t label = 0; label < c.ways; ++label) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.input_dim));
            for (std::size_t i = 0; i < e.support_y.size(); ++i) {
                if (e.support_y[i] == label) mean += e.support_x.row(static_cast<Eigen::Index>(i)).transpose();
            }
            mean /= static_cast<double>(c.shots);
            const double dev = (mean - e.prototypes.row(static_cast<Eigen::Index>(label)).transpose()).norm();
            // ||dev||^2 ~ sigma^2 / n * chi^2_D; mean sqrt(D), spread about 1/sqrt(2).
            CHECK(dev <= c.noise / std::sqrt(10000.0) * (std::sqrt(static_cast<double>(c.input_dim)) + 3.0));
        }
    }

    TEST_CASE("few-shot task pools and evaluation") {
        FewShotConfig c;
        c.query_per_class = 2;
        MlpSpec spec;
        spec.layer_sizes = {c.input_dim, 6, c.ways};
        spec.output = OutputKind::softmax;
        const FewShotSampler sampler(c, spec);
        RngStream rng(8, 0);
        const auto task = sampler.sample(rng);
        CHECK(task->train_size() == 5);
        CHECK(task->tail_size() == 10);
        CHECK(task->higher_is_better());
        // Zero weights predict class 0 everywhere: one query point in five is correct.
        CHECK(task->evaluate(ParamVector::zeros(spec.param_count())) == doctest::Approx(0.2));
    }

    TEST_CASE("projection examples") {
        CHECK(manifold_project(line(0, 1, 0), {3, 4}) == ParamVector{3, 0});
        CHECK(max_abs_diff(manifold_project(line(0, 1, 0), {3, 0}), {3, 0}) == 0.0);
        CHECK(max_abs_diff(manifold_project(line(1, -1, 0), {2, 0}), {1, 1}) <= 1e-15);
        CHECK_THROWS_AS(AffineManifoldTask(Eigen::MatrixXd{{1, 1}, {2, 2}}, Eigen::VectorXd::Zero(2)), ContractError);
    }

    TEST_CASE("property: projection lands on W, is idempotent and orthogonal to W") {
        RngStream rng(9, 0);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t d = 2 + rng.index(9), r = 1 + rng.index(d - 1);
            const auto t = AffineManifoldTask::random(d, r, rng);
            const ParamVector phi = random_vector(d, rng, 3.0);
            const ParamVector p = t.project(phi);
            CHECK(t.violation(p) <= 1e-10);
            CHECK(max_abs_diff(t.project(p), p) <= 1e-10);
            // phi - P(phi) lies in the row space of M, so any direction inside W is orthogonal to it.
            const Eigen::MatrixXd null_proj = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) -
                                              t.normal_projector();
            CHECK((null_proj * (phi - p).eigen()).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }

    TEST_CASE("fixed-point oracle") {
        const std::vector<double> half{0.5, 0.5};
        const FixedPoint cross = manifold_fixed_point_oracle({line(0, 1, 0), line(1, 0, 0)}, half);
        CHECK(norm_inf(cross.phi) <= 1e-12);
        CHECK_FALSE(cross.minimal_norm);

        const FixedPoint one = manifold_fixed_point_oracle({line(0, 1, 2)}, {1.0});
        CHECK(one.minimal_norm);
        CHECK(max_abs_diff(one.phi, {0, 2}) <= 1e-12);

        const FixedPoint parallel = manifold_fixed_point_oracle({line(0, 1, 0), line(0, 1, 2)}, half);
        CHECK(parallel.minimal_norm);
        CHECK(max_abs_diff(parallel.phi, {0, 1}) <= 1e-12);
        const FixedPoint anchored =
            manifold_fixed_point_oracle({line(0, 1, 0), line(0, 1, 2)}, half, ParamVector{5, -3});
        CHECK(max_abs_diff(anchored.phi, {5, 1}) <= 1e-12);
    }

    TEST_CASE("manifold SGD behaviour") {
        ManifoldSgdConfig c;
        c.iterations = 20000;
        c.trace_every = 1000;
        RngStream rng(10, 0);
        const auto cross = manifold_sgd_iterate({3, 4}, {line(0, 1, 0), line(1, 0, 0)}, c, rng);
        CHECK(cross.back().iteration == 20000);
        CHECK(norm2(cross.back().phi) <= 1e-6);

        const auto single = manifold_sgd_iterate({3, 4}, {line(1, -1, 0)}, c, rng);
        CHECK(max_abs_diff(single.back().phi, {3.5, 3.5}) <= 1e-9);

        // A unit step jumps straight onto each manifold in turn.
        ManifoldSgdConfig unit;
        unit.initial_step = 1.0;
        unit.anneal = false;
        unit.iterations = 4;
        const auto bounce = manifold_sgd_iterate({3, 4}, {line(0, 1, 0), line(1, -1, 0)}, unit, rng);
        REQUIRE(bounce.size() == 5);
        CHECK(max_abs_diff(bounce[1].phi, {3, 0}) <= 1e-12);
        CHECK(max_abs_diff(bounce[2].phi, {1.5, 1.5}) <= 1e-12);
        CHECK(max_abs_diff(bounce[3].phi, {1.5, 0}) <= 1e-12);

        ManifoldSgdConfig bad;
        bad.initial_step = 1.5;
        CHECK_THROWS_AS(bad.validate(), ContractError);
    }

    TEST_CASE("property: the expected update contracts toward the fixed point") {
        RngStream rng(11, 0);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t d = 10;
            std::vector<AffineManifoldTask> tasks;
            for (int i = 0; i < 3; ++i) tasks.push_back(AffineManifoldTask::random(d, 7, rng));
            const std::vector<double> p{0.2, 0.3, 0.5};
            const ParamVector star = manifold_fixed_point_oracle(tasks, p).phi;
            const ParamVector phi = random_vector(d, rng, 3.0);
            const double eps = 0.05 + 0.95 * rng.uniform();
            ParamVector next = phi;
            for (std::size_t i = 0; i < tasks.size(); ++i) next += (eps * p[i]) * (tasks[i].project(phi) - phi);
            CHECK(norm2(next - star) <= norm2(phi - star) + 1e-12);
        }
    }
}
