#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "metalearn/errors.hpp"
#include "metalearn/loss.hpp"

using namespace metalearn;
using testing_support::random_vector;
using testing_support::unit_vector;

namespace {

/// 1/2 phi^T phi (identity Hessian).
QuadraticLoss half_square(std::size_t dim) {
    return QuadraticLoss(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
                         ParamVector::zeros(dim));
}

QuadraticLoss random_quadratic(std::size_t dim, RngStream& rng) {
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd b(d, d);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    return QuadraticLoss(b * b.transpose(), random_vector(dim, rng));
}

class NanLoss final : public DifferentiableLoss {
public:
    std::size_t dim() const override { return 2; }
    double value(const ParamVector& phi) const override {
        return phi[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : phi[0];
    }
    ParamVector grad(const ParamVector&) const override { return {1.0, 0.0}; }
    ParamVector hvp(const ParamVector&, const ParamVector&) const override { return ParamVector::zeros(2); }
};

}  // namespace

TEST_SUITE("core") {
    TEST_CASE("dot") {
        CHECK(dot({1, 2}, {3, 4}) == 11.0);
        CHECK(dot({5, -7, 2}, ParamVector::zeros(3)) == 0.0);
        CHECK(dot({1, 0, -1}, {2, 5, 2}) == 0.0);
        CHECK_THROWS_AS(dot({1, 2}, {1, 2, 3}), ContractError);
    }

    TEST_CASE("axpy leaves its inputs alone") {
        const ParamVector y{1, 1}, x{2, 4};
        CHECK(axpy(y, 0.5, x) == ParamVector{2, 3});
        CHECK(y == ParamVector{1, 1});
        CHECK(x == ParamVector{2, 4});
        CHECK(axpy(y, 0.0, x) == y);
        CHECK(axpy(ParamVector::zeros(2), 1.0, x) == x);
        CHECK_THROWS_AS(axpy(y, 1.0, ParamVector{1}), ContractError);
    }

    TEST_CASE("quadratic_grad closed form") {
        CHECK(quadratic_grad(QuadraticLoss::scalar(1, 1), {0}) == ParamVector{-1});
        const QuadraticLoss q(Eigen::MatrixXd{{2, 0}, {0, 1}}, {0, 0});
        CHECK(quadratic_grad(q, {1, 1}) == ParamVector{2, 1});
        CHECK(quadratic_grad(q, {0, 0}) == ParamVector{0, 0});
        RngStream rng(3, 0);
        const auto r = random_quadratic(4, rng);
        CHECK(norm_inf(quadratic_grad(r, r.center())) == 0.0);
    }

    TEST_CASE("QuadraticLoss rejects asymmetric matrices") {
        CHECK_THROWS_AS(QuadraticLoss(Eigen::MatrixXd{{1, 1}, {0, 1}}, {0, 0}), ContractError);
    }

    TEST_CASE("fd_grad examples") {
        CHECK(fd_grad(QuadraticLoss::scalar(1, 1), {0}, 1e-4)[0] == doctest::Approx(-1.0).epsilon(1e-8));
        CHECK(fd_grad(QuadraticLoss::scalar(1, 0), {3}, 1e-4)[0] == doctest::Approx(3.0).epsilon(1e-8));
        const QuadraticLoss flat(Eigen::MatrixXd::Zero(3, 3), {1, 2, 3});
        CHECK(norm_inf(fd_grad(flat, {0.3, -2, 7}, 1e-4)) == 0.0);
        CHECK_THROWS_AS(fd_grad(flat, {0, 0, 0}, 0.0), ContractError);
        CHECK_THROWS_AS(fd_grad(NanLoss{}, {0.5, 0}, 1e-3), OracleError);
    }

    TEST_CASE("fd_hvp examples") {
        const QuadraticLoss q(Eigen::MatrixXd{{2, 0}, {0, 1}}, {0, 0});
        const ParamVector hv = fd_hvp(q, {0.7, -3}, {1, 1}, 1e-4);
        CHECK(max_abs_diff(hv, {2, 1}) <= 1e-8);
        CHECK(norm_inf(fd_hvp(q, {1, 2}, {0, 0}, 1e-4)) == 0.0);
        RngStream rng(4, 0);
        const ParamVector v = random_vector(5, rng);
        CHECK(max_abs_diff(fd_hvp(half_square(5), random_vector(5, rng), v, 1e-4), v) <= 1e-8);
    }

    TEST_CASE("MeanLoss averages its parts") {
        auto a = std::make_shared<QuadraticLoss>(QuadraticLoss::scalar(1, 1));
        auto b = std::make_shared<QuadraticLoss>(QuadraticLoss::scalar(1, 3));
        const MeanLoss m({a, b});
        CHECK(m.value({0}) == doctest::Approx(0.25 * (1 + 9)));
        CHECK(m.grad({0})[0] == doctest::Approx(-2.0));
        CHECK(m.hvp({0}, {2})[0] == doctest::Approx(2.0));
    }

    TEST_CASE("property: quadratic gradients and HVPs agree with finite differences") {
        RngStream rng(11, 0);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t d = 1 + rng.index(8);
            const auto q = random_quadratic(d, rng);
            const ParamVector phi = random_vector(d, rng);
            const ParamVector g = q.grad(phi);
            CHECK(max_abs_diff(g, fd_grad(q, phi, 1e-5)) <= 1e-6 * (1 + norm_inf(g)));
            const ParamVector v = unit_vector(d, rng), w = unit_vector(d, rng);
            const ParamVector hv = q.hvp(phi, v);
            CHECK(max_abs_diff(hv, fd_hvp(q, phi, v, 1e-5)) <= 1e-5 * (1 + norm_inf(hv)));
            const ParamVector lin = q.hvp(phi, 2.5 * v + (-0.75) * w);
            CHECK(max_abs_diff(lin, 2.5 * hv + (-0.75) * q.hvp(phi, w)) <= 1e-10);
            CHECK(std::abs(dot(w, hv) - dot(v, q.hvp(phi, w))) <= 1e-9);
        }
    }

    TEST_CASE("property: equal (seed, stream) reproduces 10^4 draws") {
        RngStream a(123, 45), b(123, 45);
        for (int i = 0; i < 10000; ++i) REQUIRE(a.next() == b.next());
        RngStream c(123, 46), d(124, 45);
        RngStream e(123, 45);
        int same_c = 0, same_d = 0;
        for (int i = 0; i < 100; ++i) {
            const auto x = e.next();
            same_c += x == c.next();
            same_d += x == d.next();
        }
        CHECK(same_c == 0);
        CHECK(same_d == 0);
    }

    TEST_CASE("child streams do not depend on the parent's position") {
        RngStream a(9, 1);
        const RngStream fresh = a.child(5);
        for (int i = 0; i < 17; ++i) a.next();
        RngStream later = a.child(5), early = fresh;
        for (int i = 0; i < 100; ++i) REQUIRE(later.next() == early.next());
    }

    TEST_CASE("rng helpers") {
        RngStream rng(2, 2);
        double sum = 0, sq = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform();
            REQUIRE(u >= 0.0);
            REQUIRE(u < 1.0);
            const double z = rng.normal();
            sum += z;
            sq += z * z;
        }
        CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
        CHECK(sq / n == doctest::Approx(1.0).epsilon(0.05));
        auto p = rng.permutation(50);
        std::sort(p.begin(), p.end());
        for (std::size_t i = 0; i < 50; ++i) CHECK(p[i] == i);
        for (int i = 0; i < 1000; ++i) REQUIRE(rng.index(7) < 7);
        CHECK_THROWS_AS(rng.index(0), ContractError);
    }
}
