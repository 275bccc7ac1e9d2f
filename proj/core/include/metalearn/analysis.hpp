#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metalearn/meta.hpp"

namespace metalearn {

/// Expected-gradient terms of the second-order expansion, all at the initial point.
struct TaylorTerms {
    /// E[g_i]: mean gradient of a minibatch.
    ParamVector avg_grad;
    /// E[1/2 (H_j g_i + H_i g_j)] over distinct batches i != j.
    ParamVector avg_grad_inner;
    /// The two unsymmetrized halves for the first two batches: E[H_2 g_1] and E[H_1 g_2].
    ParamVector inner_12;
    ParamVector inner_21;
    ParamVector avg_grad_stderr;
    ParamVector avg_grad_inner_stderr;
    std::size_t n_samples = 0;
};

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;
    friend bool operator<(const Rational& a, const Rational& b) { return a.num * b.den < b.num * a.den; }
    friend bool operator==(const Rational& a, const Rational& b) = default;
};

Rational make_rational(std::int64_t num, std::int64_t den);

/// E[g_alg] = c_grad AvgGrad - c_inner alpha AvgGradInner + O(alpha^2).
struct Coefficients {
    double grad = 0.0;
    double inner = 0.0;
};

/// Integer coefficients for reptile (k, k(k-1)/2), fomaml (1, k-1) and maml
/// (1, 2(k-1)); combo weights w give (sum w_i, sum w_i (i-1)) scaled by the normalization.
Coefficients coefficients(const MetaAlgorithm& algo, std::size_t k);
/// c_inner / c_grad as an exact fraction (reptile, fomaml, maml only).
Rational inner_to_grad_ratio(MetaKind kind, std::size_t k);

ParamVector predicted_meta_gradient(const TaylorTerms& terms, const MetaAlgorithm& algo, std::size_t k, double alpha);

/// How the Monte-Carlo studies draw their batches.
struct TaylorSampling {
    std::size_t k = 2;
    std::size_t batch_size = 10;
    Sampling sampling = Sampling::cycle;
    /// Average measured meta-gradients over all k! batch orders (k <= 5).
    bool average_orders = true;
    std::size_t threads = 1;

    InnerLoopConfig inner(double alpha) const;
    void validate() const;
};

/// Sample s draws its task and batches from rng.child(s).
TaylorTerms estimate_terms(const ParamVector& phi, const TaskSampler& sampler, const TaylorSampling& sampling,
                           std::size_t n_samples, const RngStream& rng);

/// Meta-gradient in gradient form (descent direction negated) measured on one
/// batch order with an SGD inner loop of step alpha.
ParamVector measured_meta_gradient(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                                   const MetaAlgorithm& algo, double alpha);

enum class PointFlag { ok, diverged, unstable };
std::string to_string(PointFlag f);

struct ResidualPoint {
    double alpha = 0.0;
    double residual_norm = 0.0;
    double stderr_norm = 0.0;
    /// Norm of the mean measured meta-gradient, for scale.
    double measured_norm = 0.0;
    std::size_t n = 0;
    PointFlag flag = PointFlag::ok;
};

enum class StudyFlag { fit, exact, insufficient };
std::string to_string(StudyFlag f);

struct ResidualStudy {
    MetaAlgorithm algorithm;
    std::size_t k = 0;
    std::vector<ResidualPoint> points;
    StudyFlag flag = StudyFlag::insufficient;
    double slope = 0.0;
    double slope_stderr = 0.0;
};

struct TaylorStudy {
    TaylorTerms terms;
    std::vector<ResidualStudy> studies;
};

/// Relative residual below which a study counts as exact.
inline constexpr double kExactTolerance = 1e-10;

/// r(alpha) = || mean_s (measured_s - predicted_s) || for each algorithm, with
/// the same tasks and batches at every alpha. Per sample the prediction uses
/// that sample's own gradient terms, so sampling noise in the leading terms
/// cancels and only the O(alpha^2) remainder is left. Points whose inner loop
/// diverges on any sample are dropped and flagged; `max_curvature`, when given,
/// marks points with alpha * max_curvature >= 1 as unstable (kept).
TaylorStudy residual_study(const ParamVector& phi, const TaskSampler& sampler, const std::vector<MetaAlgorithm>& algos,
                           const TaylorSampling& sampling, const std::vector<double>& alphas, std::size_t n_samples,
                           const RngStream& rng, std::optional<double> max_curvature = std::nullopt);

/// Least-squares slope of log r against log alpha, with its standard error.
std::pair<double, double> loglog_slope(const std::vector<double>& alphas, const std::vector<double>& residuals);

struct ProbeResult {
    double mean_before = 0.0;
    double mean_after = 0.0;
    /// Standard error of the paired difference after - before.
    double diff_stderr = 0.0;
    std::size_t n = 0;
};

/// Monte-Carlo E[g_1 . g_2] for two batches of the same task at two parameter
/// vectors, paired over the same tasks and batches.
ProbeResult inner_product_probe(const ParamVector& before, const ParamVector& after, const TaskSampler& sampler,
                                const TaylorSampling& sampling, std::size_t n, const RngStream& rng);

/// phi -> g_1(phi) . g_2(phi) with gradient H_1 g_2 + H_2 g_1.
class GradientInnerProduct final : public DifferentiableLoss {
public:
    GradientInnerProduct(const DifferentiableLoss& first, const DifferentiableLoss& second)
        : first_(first), second_(second) {}

    std::size_t dim() const override { return first_.dim(); }
    double value(const ParamVector& phi) const override;
    ParamVector grad(const ParamVector& phi) const override;
    /// Not available (would need third derivatives); throws ContractError.
    ParamVector hvp(const ParamVector& phi, const ParamVector& v) const override;

private:
    const DifferentiableLoss& first_;
    const DifferentiableLoss& second_;
};

/// Largest |eigenvalue| of the minibatch Hessian at phi, by power iteration,
/// maximised over `n_batches` sampled task batches.
double max_curvature(const ParamVector& phi, const TaskSampler& sampler, const TaylorSampling& sampling,
                     std::size_t n_batches, const RngStream& rng, std::size_t power_iters = 50);

}  // namespace metalearn
