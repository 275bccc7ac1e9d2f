#include "metalearn/loss.hpp"

#include <cmath>
#include <string>

#include "metalearn/errors.hpp"

namespace metalearn {

QuadraticLoss::QuadraticLoss(Eigen::MatrixXd a, ParamVector center) : a_(std::move(a)), center_(std::move(center)) {
    const auto d = static_cast<Eigen::Index>(center_.dim());
    if (a_.rows() != d || a_.cols() != d) {
        throw ContractError("QuadraticLoss: matrix must be " + std::to_string(d) + "x" + std::to_string(d));
    }
    if (d > 0 && (a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw ContractError("QuadraticLoss: matrix is not symmetric");
    }
}

QuadraticLoss QuadraticLoss::scalar(double a, double c) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = a;
    return QuadraticLoss(std::move(m), ParamVector{c});
}

double QuadraticLoss::value(const ParamVector& phi) const {
    require_same_dim(phi, center_, "QuadraticLoss::value");
    const Eigen::VectorXd r = phi.eigen() - center_.eigen();
    return 0.5 * r.dot(a_ * r);
}

ParamVector QuadraticLoss::grad(const ParamVector& phi) const { return quadratic_grad(*this, phi); }

ParamVector QuadraticLoss::hvp(const ParamVector& phi, const ParamVector& v) const {
    require_same_dim(phi, center_, "QuadraticLoss::hvp");
    require_same_dim(v, center_, "QuadraticLoss::hvp");
    return ParamVector(Eigen::VectorXd(a_ * v.eigen()));
}

ParamVector quadratic_grad(const QuadraticLoss& loss, const ParamVector& phi) {
    require_same_dim(phi, loss.center(), "quadratic_grad");
    return ParamVector(Eigen::VectorXd(loss.matrix() * (phi.eigen() - loss.center().eigen())));
}

MeanLoss::MeanLoss(std::vector<std::shared_ptr<const DifferentiableLoss>> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw ContractError("MeanLoss: needs at least one component");
    dim_ = parts_.front()->dim();
    for (const auto& p : parts_) {
        if (p->dim() != dim_) throw ContractError("MeanLoss: component dimensions differ");
    }
}

double MeanLoss::value(const ParamVector& phi) const {
    double total = 0.0;
    for (const auto& p : parts_) total += p->value(phi);
    return total / static_cast<double>(parts_.size());
}

ParamVector MeanLoss::grad(const ParamVector& phi) const {
    ParamVector total(dim_);
    for (const auto& p : parts_) total += p->grad(phi);
    total *= 1.0 / static_cast<double>(parts_.size());
    return total;
}

ParamVector MeanLoss::hvp(const ParamVector& phi, const ParamVector& v) const {
    ParamVector total(dim_);
    for (const auto& p : parts_) total += p->hvp(phi, v);
    total *= 1.0 / static_cast<double>(parts_.size());
    return total;
}

ParamVector fd_grad(const DifferentiableLoss& loss, const ParamVector& phi, double h) {
    if (!(h > 0.0)) throw ContractError("fd_grad: step must be positive");
    ParamVector probe = phi;
    ParamVector out(phi.dim());
    for (std::size_t i = 0; i < phi.dim(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double plus = loss.value(probe);
        probe[i] = saved - h;
        const double minus = loss.value(probe);
        probe[i] = saved;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw OracleError("fd_grad: non-finite loss at coordinate " + std::to_string(i));
        }
        out[i] = (plus - minus) / (2.0 * h);
    }
    return out;
}

ParamVector fd_hvp(const DifferentiableLoss& loss, const ParamVector& phi, const ParamVector& v, double h) {
    if (!(h > 0.0)) throw ContractError("fd_hvp: step must be positive");
    require_same_dim(phi, v, "fd_hvp");
    const ParamVector plus = loss.grad(axpy(phi, h, v));
    const ParamVector minus = loss.grad(axpy(phi, -h, v));
    if (!plus.is_finite() || !minus.is_finite()) throw OracleError("fd_hvp: non-finite gradient");
    ParamVector out = plus - minus;
    out *= 1.0 / (2.0 * h);
    return out;
}

}  // namespace metalearn
