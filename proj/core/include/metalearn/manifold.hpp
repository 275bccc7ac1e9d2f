#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "metalearn/param_vector.hpp"
#include "metalearn/rng.hpp"

namespace metalearn {

/// Solution set W = {phi : M phi = q} with M of full row rank.
class AffineManifoldTask {
public:
    AffineManifoldTask(Eigen::MatrixXd m, Eigen::VectorXd q);

    /// Random affine subspace of dimension `dim - constraints` in R^dim.
    static AffineManifoldTask random(std::size_t dim, std::size_t constraints, RngStream& rng);

    std::size_t dim() const { return static_cast<std::size_t>(m_.cols()); }
    const Eigen::MatrixXd& constraints() const { return m_; }
    const Eigen::VectorXd& offsets() const { return q_; }

    /// Closest point: phi - M^T (M M^T)^{-1} (M phi - q).
    ParamVector project(const ParamVector& phi) const;
    /// Orthogonal projector onto the row space of M, M^T (M M^T)^{-1} M.
    const Eigen::MatrixXd& normal_projector() const { return normal_; }
    /// The minimum-norm point of W.
    ParamVector anchor() const;
    /// ||M phi - q||_inf.
    double violation(const ParamVector& phi) const;

private:
    Eigen::MatrixXd m_;
    Eigen::VectorXd q_;
    Eigen::MatrixXd gram_inv_;
    Eigen::MatrixXd normal_;
};

ParamVector manifold_project(const AffineManifoldTask& task, const ParamVector& phi);

enum class ManifoldOrder { alternating, random };

struct ManifoldSgdConfig {
    double initial_step = 0.5;
    std::size_t iterations = 1000;
    bool anneal = true;
    ManifoldOrder order = ManifoldOrder::alternating;
    /// Keep every n-th iterate in the trace (the final iterate is always kept).
    std::size_t trace_every = 1;

    void validate() const;
};

struct ManifoldTracePoint {
    std::size_t iteration = 0;
    ParamVector phi;
};

/// phi <- (1 - eps) phi + eps P_tau(phi), one task per iteration.
std::vector<ManifoldTracePoint> manifold_sgd_iterate(const ParamVector& phi0,
                                                     const std::vector<AffineManifoldTask>& tasks,
                                                     const ManifoldSgdConfig& cfg, RngStream& rng);

struct FixedPoint {
    ParamVector phi;
    /// The system was singular; phi is the solution closest to the anchor (origin by default).
    bool minimal_norm = false;
};

/// Minimiser of sum_t p_t 1/2 ||phi - P_t(phi)||^2. When the minimiser is not
/// unique the result is the one nearest `anchor`; iterating from phi0 never
/// changes the component outside the span of the normals, so passing phi0 as
/// anchor yields the point the iteration converges to.
FixedPoint manifold_fixed_point_oracle(const std::vector<AffineManifoldTask>& tasks, const std::vector<double>& probs,
                                       const std::optional<ParamVector>& anchor = std::nullopt);

}  // namespace metalearn
