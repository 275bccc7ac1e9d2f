#include "metalearn/manifold.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include "metalearn/errors.hpp"

namespace metalearn {

AffineManifoldTask::AffineManifoldTask(Eigen::MatrixXd m, Eigen::VectorXd q) : m_(std::move(m)), q_(std::move(q)) {
    if (m_.rows() == 0 || m_.cols() == 0) throw ContractError("AffineManifoldTask: empty constraint matrix");
    if (q_.size() != m_.rows()) throw ContractError("AffineManifoldTask: offset length must equal constraint count");
    if (m_.rows() > m_.cols()) throw ContractError("AffineManifoldTask: more constraints than dimensions");
    const Eigen::MatrixXd gram = m_ * m_.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(1e-12);
    if (lu.rank() < m_.rows()) throw ContractError("AffineManifoldTask: constraint matrix is rank deficient");
    gram_inv_ = lu.inverse();
    normal_ = m_.transpose() * gram_inv_ * m_;
}

AffineManifoldTask AffineManifoldTask::random(std::size_t dim, std::size_t constraints, RngStream& rng) {
    if (constraints == 0 || constraints > dim) throw ContractError("AffineManifoldTask::random: need 1 <= constraints <= dim");
    const auto r = static_cast<Eigen::Index>(constraints);
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd m(r, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
    }
    Eigen::VectorXd q(r);
    for (Eigen::Index i = 0; i < r; ++i) q(i) = rng.normal();
    return AffineManifoldTask(std::move(m), std::move(q));
}

ParamVector AffineManifoldTask::project(const ParamVector& phi) const {
    if (phi.dim() != dim()) throw ContractError("manifold_project: dimension mismatch");
    const Eigen::VectorXd& x = phi.eigen();
    return ParamVector(Eigen::VectorXd(x - m_.transpose() * (gram_inv_ * (m_ * x - q_))));
}

ParamVector AffineManifoldTask::anchor() const { return ParamVector(Eigen::VectorXd(m_.transpose() * (gram_inv_ * q_))); }

double AffineManifoldTask::violation(const ParamVector& phi) const {
    return (m_ * phi.eigen() - q_).cwiseAbs().maxCoeff();
}

ParamVector manifold_project(const AffineManifoldTask& task, const ParamVector& phi) { return task.project(phi); }

void ManifoldSgdConfig::validate() const {
    if (!(initial_step > 0.0 && initial_step <= 1.0)) throw ContractError("manifold sgd: step must lie in (0, 1]");
    if (trace_every == 0) throw ContractError("manifold sgd: trace_every must be positive");
}

std::vector<ManifoldTracePoint> manifold_sgd_iterate(const ParamVector& phi0,
                                                     const std::vector<AffineManifoldTask>& tasks,
                                                     const ManifoldSgdConfig& cfg, RngStream& rng) {
    cfg.validate();
    if (tasks.empty()) throw ContractError("manifold_sgd_iterate: no tasks");
    for (const auto& t : tasks) {
        if (t.dim() != phi0.dim()) throw ContractError("manifold_sgd_iterate: dimension mismatch");
    }
    std::vector<ManifoldTracePoint> trace;
    trace.push_back({0, phi0});
    Eigen::VectorXd phi = phi0.eigen();
    const double total = static_cast<double>(cfg.iterations);
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        const double eps = cfg.anneal ? cfg.initial_step * (1.0 - static_cast<double>(i) / total) : cfg.initial_step;
        const std::size_t which = cfg.order == ManifoldOrder::alternating ? i % tasks.size() : rng.index(tasks.size());
        const auto& t = tasks[which];
        // (1 - eps) phi + eps P(phi)
        phi += eps * (t.project(ParamVector(phi)).eigen() - phi);
        const std::size_t n = i + 1;
        if (n % cfg.trace_every == 0 || n == cfg.iterations) trace.push_back({n, ParamVector(phi)});
    }
    return trace;
}

FixedPoint manifold_fixed_point_oracle(const std::vector<AffineManifoldTask>& tasks, const std::vector<double>& probs,
                                       const std::optional<ParamVector>& anchor) {
    if (tasks.empty()) throw ContractError("manifold_fixed_point_oracle: no tasks");
    if (probs.size() != tasks.size()) throw ContractError("manifold_fixed_point_oracle: one probability per task");
    const auto d = static_cast<Eigen::Index>(tasks.front().dim());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].dim() != static_cast<std::size_t>(d)) throw ContractError("manifold_fixed_point_oracle: dimension mismatch");
        if (!(probs[i] >= 0.0)) throw ContractError("manifold_fixed_point_oracle: negative probability");
        a += probs[i] * tasks[i].normal_projector();
        b += probs[i] * (tasks[i].normal_projector() * tasks[i].anchor().eigen());
    }
    Eigen::VectorXd base = Eigen::VectorXd::Zero(d);
    if (anchor) {
        if (anchor->dim() != static_cast<std::size_t>(d)) throw ContractError("manifold_fixed_point_oracle: anchor dimension mismatch");
        base = anchor->eigen();
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    cod.setThreshold(1e-10);
    const Eigen::VectorXd phi = base + cod.solve(Eigen::VectorXd(b - a * base));
    return {ParamVector(phi), cod.rank() < d};
}

}  // namespace metalearn
