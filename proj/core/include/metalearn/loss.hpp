#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "metalearn/param_vector.hpp"

namespace metalearn {

/// Scalar loss over a flat parameter vector with first- and second-order access.
class DifferentiableLoss {
public:
    virtual ~DifferentiableLoss() = default;

    virtual std::size_t dim() const = 0;
    virtual double value(const ParamVector& phi) const = 0;
    virtual ParamVector grad(const ParamVector& phi) const = 0;
    /// Hessian-vector product H(phi) v.
    virtual ParamVector hvp(const ParamVector& phi, const ParamVector& v) const = 0;

    /// Overridden where a fused forward/backward pass is cheaper.
    virtual double value_and_grad(const ParamVector& phi, ParamVector& grad_out) const {
        grad_out = grad(phi);
        return value(phi);
    }
};

/// L(phi) = 1/2 (phi - c)^T A (phi - c). Zero third derivatives make Taylor
/// expansions around any point exact at second order.
class QuadraticLoss final : public DifferentiableLoss {
public:
    QuadraticLoss(Eigen::MatrixXd a, ParamVector center);

    /// Scalar convenience: 1/2 a (phi - c)^2.
    static QuadraticLoss scalar(double a, double c);

    const Eigen::MatrixXd& matrix() const { return a_; }
    const ParamVector& center() const { return center_; }

    std::size_t dim() const override { return center_.dim(); }
    double value(const ParamVector& phi) const override;
    ParamVector grad(const ParamVector& phi) const override;
    ParamVector hvp(const ParamVector& phi, const ParamVector& v) const override;

private:
    Eigen::MatrixXd a_;
    ParamVector center_;
};

/// Arithmetic mean of component losses sharing one parameter space.
class MeanLoss final : public DifferentiableLoss {
public:
    explicit MeanLoss(std::vector<std::shared_ptr<const DifferentiableLoss>> parts);

    std::size_t dim() const override { return dim_; }
    double value(const ParamVector& phi) const override;
    ParamVector grad(const ParamVector& phi) const override;
    ParamVector hvp(const ParamVector& phi, const ParamVector& v) const override;

private:
    std::vector<std::shared_ptr<const DifferentiableLoss>> parts_;
    std::size_t dim_;
};

inline constexpr double kDefaultGradStep = 1e-5;
inline constexpr double kDefaultHvpStep = 1e-5;
inline constexpr double kDefaultUpdateStep = 1e-4;

/// Gradient of L(phi) = 1/2 (phi - c)^T A (phi - c), i.e. A (phi - c).
ParamVector quadratic_grad(const QuadraticLoss& loss, const ParamVector& phi);

/// Central differences: (L(phi + h e_i) - L(phi - h e_i)) / 2h per coordinate.
/// Throws OracleError when any probed loss value is non-finite.
ParamVector fd_grad(const DifferentiableLoss& loss, const ParamVector& phi, double h = kDefaultGradStep);

/// (grad(phi + h v) - grad(phi - h v)) / 2h.
ParamVector fd_hvp(const DifferentiableLoss& loss, const ParamVector& phi, const ParamVector& v,
                   double h = kDefaultHvpStep);

}  // namespace metalearn
