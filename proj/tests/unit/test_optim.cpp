#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "metalearn/errors.hpp"
#include "metalearn/optim.hpp"

using namespace metalearn;
using testing_support::random_vector;

TEST_SUITE("optim") {
    TEST_CASE("sgd_step") {
        const SgdState s{0.1};
        CHECK(sgd_step(s, {0}, {-1})[0] == doctest::Approx(0.1));
        CHECK(sgd_step(s, {3, 4}, {0, 0}) == ParamVector{3, 4});
        CHECK(sgd_step(SgdState{0.0}, {3, 4}, {1, 1}) == ParamVector{3, 4});
        CHECK_THROWS_AS(sgd_step(s, {0}, {NAN}), NumericalError);
    }

    TEST_CASE("first Adam step moves by the step size in the sign direction") {
        const AdamState fresh(AdamConfig{0.001, 0.0, 0.999, 1e-8}, 1);
        const auto r = adam_step(fresh, {0.5}, {1});
        CHECK(r.params[0] == doctest::Approx(0.5 - 0.001 / (1 + 1e-8)).epsilon(1e-14));
        CHECK(r.state.step_count() == 1);
        CHECK(fresh.step_count() == 0);
        const auto big = adam_step(fresh, {0.5}, {10});
        CHECK(std::abs(big.params[0] - r.params[0]) <= 1e-10);
        const auto none = adam_step(fresh, {0.5}, {0});
        CHECK(none.params[0] == 0.5);
        CHECK_THROWS_AS(adam_step(fresh, {0.5}, {INFINITY}), NumericalError);
    }

    TEST_CASE("Adam with momentum matches a hand-rolled update") {
        AdamConfig c{0.01, 0.9, 0.99, 1e-8};
        AdamState s(c, 2);
        ParamVector phi{1, -1}, m = ParamVector::zeros(2), v = ParamVector::zeros(2);
        RngStream rng(1, 0);
        for (int t = 1; t <= 5; ++t) {
            const ParamVector g = random_vector(2, rng);
            const ParamVector next = s.apply(phi, g);
            for (std::size_t i = 0; i < 2; ++i) {
                m[i] = 0.9 * m[i] + 0.1 * g[i];
                v[i] = 0.99 * v[i] + 0.01 * g[i] * g[i];
                const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.99, t));
                CHECK(next[i] == doctest::Approx(phi[i] - 0.01 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
            }
            CHECK(s.step_count() == static_cast<std::uint64_t>(t));
            for (std::size_t i = 0; i < 2; ++i) CHECK(s.second_moment()[i] >= 0.0);
            phi = next;
        }
    }

    TEST_CASE("property: Adam with beta1 = beta2 = 0 is sign-SGD") {
        AdamState s(AdamConfig{0.05, 0.0, 0.0, 1e-300}, 6);
        RngStream rng(2, 0);
        ParamVector phi = random_vector(6, rng);
        for (int step = 0; step < 20; ++step) {
            const ParamVector g = random_vector(6, rng);
            const ParamVector next = s.apply(phi, g);
            for (std::size_t i = 0; i < 6; ++i) {
                CHECK((next[i] - phi[i]) * g[i] < 0.0);
                CHECK(std::abs(next[i] - phi[i]) == doctest::Approx(0.05).epsilon(1e-12));
            }
            phi = next;
        }
    }

    TEST_CASE("config validation") {
        CHECK_THROWS_AS(OptimizerConfig::adam(0.1, 1.0).validate(), ContractError);
        CHECK_THROWS_AS(OptimizerConfig::adam(0.1, 0.0, 1.0).validate(), ContractError);
        CHECK_THROWS_AS(OptimizerConfig::adam(0.1, 0.0, 0.9, 0.0).validate(), ContractError);
        CHECK_THROWS_AS(OptimizerConfig::sgd(-1).validate(), ContractError);
        CHECK_NOTHROW(OptimizerConfig::sgd(0.1).validate());
    }

    TEST_CASE("snapshot and restore") {
        OptimizerState st(OptimizerConfig::adam(0.01), 4);
        RngStream rng(3, 0);
        ParamVector phi = random_vector(4, rng);
        for (int i = 0; i < 3; ++i) phi = st.step(phi, random_vector(4, rng));

        const StateBlob blob = snapshot(st);
        CHECK(restore(blob, 4) == st);
        CHECK_THROWS_AS(restore(blob, 5), ContractError);

        // Running 100 steps and restoring leaves no trace on what follows.
        OptimizerState untouched = st;
        ParamVector scratch = phi;
        for (int i = 0; i < 100; ++i) scratch = st.step(scratch, random_vector(4, rng));
        st = restore(blob, 4);
        RngStream g1(9, 0), g2(9, 0);
        ParamVector a = phi, b = phi;
        for (int i = 0; i < 10; ++i) {
            a = st.step(a, random_vector(4, g1));
            b = untouched.step(b, random_vector(4, g2));
        }
        CHECK(a == b);
        CHECK(st == untouched);

        OptimizerState sgd(OptimizerConfig::sgd(0.3), 2);
        CHECK(restore(snapshot(sgd), 2) == sgd);
    }

    TEST_CASE("outer schedule") {
        OuterSchedule s{1.0, 10, true};
        CHECK(outer_step({0}, {2}, s, 0)[0] == 2.0);
        CHECK(s.step(9) == doctest::Approx(0.1));
        double prev = s.step(0);
        for (std::size_t i = 1; i < 10; ++i) {
            CHECK(s.step(i) < prev);
            CHECK(s.step(i) >= 0.0);
            prev = s.step(i);
        }
        OuterSchedule long_run{0.25, 40000, true};
        CHECK(long_run.step(0) == 0.25);
        CHECK(long_run.step(39999) == doctest::Approx(0.25 / 40000));
        CHECK_THROWS_AS(outer_step({0}, {1}, s, 10), ContractError);
        OuterSchedule flat{0.5, 4, false};
        CHECK(flat.step(3) == 0.5);
        CHECK_THROWS_AS((OuterSchedule{1.0, 0, true}.validate()), ContractError);
    }
}
