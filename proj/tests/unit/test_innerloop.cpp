#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "metalearn/errors.hpp"
#include "metalearn/inner_loop.hpp"
#include "metalearn/quadratic_family.hpp"
#include "metalearn/sine.hpp"

using namespace metalearn;

namespace {

QuadraticTask scalar_task(std::size_t n) {
    std::vector<QuadraticLoss> losses;
    for (std::size_t i = 0; i < n; ++i) losses.push_back(QuadraticLoss::scalar(1.0, static_cast<double>(i)));
    return QuadraticTask(std::move(losses));
}

Minibatch ids(std::vector<std::size_t> v) {
    Minibatch b;
    b.sample_ids = std::move(v);
    return b;
}

InnerLoopConfig sgd_config(std::size_t k, std::size_t batch, Sampling s = Sampling::cycle, double lr = 0.1) {
    InnerLoopConfig c;
    c.iterations = k;
    c.batch_size = batch;
    c.sampling = s;
    c.optimizer = OptimizerConfig::sgd(lr);
    return c;
}

}  // namespace

TEST_SUITE("innerloop") {
    TEST_CASE("scalar quadratic walkthrough") {
        const QuadraticTask task = QuadraticTask::scalar_pair();
        const std::vector<std::size_t> first{0}, second{1};
        const std::vector<Minibatch> batches{task.make_batch(first, DataPool::train),
                                             task.make_batch(second, DataPool::train)};
        OptimizerState st(OptimizerConfig::sgd(0.1), 1);
        const Trajectory t = run_on_batches({0}, task, batches, st);
        REQUIRE(t.iterates.size() == 3);
        CHECK(t.gradients[0][0] == doctest::Approx(-1.0));
        CHECK(t.iterates[1][0] == doctest::Approx(0.1));
        CHECK(t.gradients[1][0] == doctest::Approx(-2.9));
        CHECK(t.iterates[2][0] == doctest::Approx(0.39));
        CHECK(t.step_size == 0.1);
    }

    TEST_CASE("k = 1 is a single SGD step") {
        const QuadraticTask task = scalar_task(4);
        RngStream rng(1, 0);
        const Trajectory t = run_inner({2.5}, task, sgd_config(1, 2), rng);
        REQUIRE(t.steps() == 1);
        const auto loss = task.loss(t.batches[0]);
        CHECK(t.final()[0] == 2.5 - 0.1 * loss->grad({2.5})[0]);
    }

    TEST_CASE("config validation") {
        CHECK_THROWS_AS(sgd_config(0, 5).validate(), ContractError);
        CHECK_THROWS_AS(sgd_config(3, 0).validate(), ContractError);
        CHECK_THROWS_AS(parse_sampling("shuffle"), ContractError);
        CHECK_THROWS_AS(parse_tail("both"), ContractError);
        const QuadraticTask task = scalar_task(4);
        RngStream rng(1, 0);
        CHECK_THROWS_AS(sample_batches(task, sgd_config(2, 5), rng), ContractError);
        InnerLoopConfig sep = sgd_config(2, 2);
        sep.tail = TailMode::separate;
        CHECK_THROWS_AS(sample_batches(task, sep, rng), ContractError);
        CHECK_THROWS_AS(run_inner({0, 0}, task, sgd_config(1, 1), rng), ContractError);
    }

    TEST_CASE("cycle sampling overlaps once the pool is exhausted") {
        const QuadraticTask task = scalar_task(25);
        RngStream rng(2, 0);
        const auto b = sample_batches(task, sgd_config(5, 25), rng);
        REQUIRE(b.size() == 5);
        for (const auto& x : b) CHECK(overlap_fraction(x, b[0]) == 1.0);
        CHECK(std::set<std::size_t>(b[4].sample_ids.begin(), b[4].sample_ids.end()).size() == 25);
    }

    TEST_CASE("property: cycle with batch * k <= pool gives disjoint batches") {
        const QuadraticTask task = scalar_task(100);
        RngStream rng(3, 0);
        for (auto [k, batch] : {std::pair<std::size_t, std::size_t>{4, 25}, {3, 30}, {10, 10}, {2, 7}}) {
            const auto b = sample_batches(task, sgd_config(k, batch), rng);
            for (std::size_t i = 0; i < b.size(); ++i) {
                CHECK_FALSE(b[i].has_duplicates);
                for (std::size_t j = i + 1; j < b.size(); ++j) CHECK(overlap_fraction(b[i], b[j]) == 0.0);
            }
        }
    }

    TEST_CASE("replacement overlap matches the closed form") {
        const QuadraticTask task = scalar_task(100);
        RngStream rng(4, 0);
        const int n = 4000;
        double sum = 0, sq = 0;
        bool saw_dupes = false;
        for (int s = 0; s < n; ++s) {
            const auto b = sample_batches(task, sgd_config(2, 25, Sampling::replacement), rng);
            const double f = overlap_fraction(b[1], b[0]);
            saw_dupes = saw_dupes || b[0].has_duplicates;
            sum += f;
            sq += f * f;
        }
        const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
        const double expected = 1.0 - std::pow(0.99, 25);  // P(an id of batch 2 appears in batch 1)
        CHECK(std::abs(mean - expected) <= 4 * se);
        CHECK(saw_dupes);
    }

    TEST_CASE("overlap_fraction") {
        CHECK(overlap_fraction(ids({1, 2, 3}), ids({1, 2, 3})) == 1.0);
        CHECK(overlap_fraction(ids({1, 2}), ids({3, 4})) == 0.0);
        CHECK(overlap_fraction(ids({1, 2, 3, 4}), ids({3, 4, 5, 6})) == 0.5);
    }

    TEST_CASE("separate tail comes from the tail pool") {
        SineFamilyConfig f;
        f.tail_points = 6;
        MlpSpec spec;
        spec.layer_sizes = {1, 4, 1};
        RngStream rng(5, 0);
        const SineTask task = sine_sample(f, spec, rng);
        InnerLoopConfig c = sgd_config(3, 5);
        c.tail = TailMode::separate;
        const auto b = sample_batches(task, c, rng);
        REQUIRE(b.size() == 3);
        CHECK(b[0].pool == DataPool::train);
        CHECK(b[1].pool == DataPool::train);
        CHECK(b[2].pool == DataPool::tail);
        CHECK(b[2].size() == 5);
    }

    TEST_CASE("property: SGD replay and the displacement identity") {
        SineFamilyConfig f;
        MlpSpec spec;
        spec.layer_sizes = {1, 8, 8, 1};
        RngStream rng(6, 0);
        for (int trial = 0; trial < 10; ++trial) {
            const SineTask task = sine_sample(f, spec, rng);
            const ParamVector phi = mlp_init(spec, rng);
            const InnerLoopConfig c = sgd_config(2 + rng.index(5), 5, trial % 2 ? Sampling::cycle : Sampling::replacement, 0.02);
            RngStream a = rng.child(trial), b = rng.child(trial);
            const Trajectory t = run_inner(phi, task, c, a);
            const Trajectory u = run_inner(phi, task, c, b);
            CHECK(t.iterates == u.iterates);
            ParamVector replay = phi, sum = ParamVector::zeros(phi.dim());
            for (std::size_t i = 0; i < t.steps(); ++i) {
                replay = sgd_step(SgdState{0.02}, replay, t.gradients[i]);
                CHECK(replay == t.iterates[i + 1]);
                sum += t.gradients[i];
            }
            CHECK(max_abs_diff(t.final() - t.initial(), -0.02 * sum) <= 1e-12);
        }
    }

    TEST_CASE("unrecorded runs keep the endpoints") {
        const QuadraticTask task = scalar_task(10);
        InnerLoopConfig c = sgd_config(4, 2);
        RngStream a(7, 0), b(7, 0);
        const Trajectory full = run_inner({5}, task, c, a);
        c.record_trajectory = false;
        const Trajectory light = run_inner({5}, task, c, b);
        CHECK(light.final() == full.final());
        CHECK(light.initial() == full.initial());
        CHECK(light.gradients.back() == full.gradients.back());
    }

    TEST_CASE("Adam moments persist through the carried state") {
        const QuadraticTask task = scalar_task(10);
        InnerLoopConfig c = sgd_config(3, 2);
        c.optimizer = OptimizerConfig::adam(0.01);
        OptimizerState st(c.optimizer, 1);
        RngStream rng(8, 0);
        run_inner({5}, task, c, rng, st);
        CHECK(st.adam()->step_count() == 3);
        run_inner({5}, task, c, rng, st);
        CHECK(st.adam()->step_count() == 6);
    }

    TEST_CASE("divergence reports the step") {
        const QuadraticTask task(std::vector<QuadraticLoss>{QuadraticLoss::scalar(1e200, 0.0)});
        RngStream rng(9, 0);
        try {
            run_inner({1}, task, sgd_config(5, 1, Sampling::cycle, 1e200), rng);
            FAIL("expected divergence");
        } catch (const NumericalError& e) {
            REQUIRE(e.index().has_value());
            CHECK(*e.index() >= 1);
        }
    }
}
