#include "metalearn/param_vector.hpp"

#include <cmath>
#include <string>

#include "metalearn/errors.hpp"

namespace metalearn {

ParamVector::ParamVector(std::size_t dim, double fill)
    : values_(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), fill)) {}

ParamVector::ParamVector(std::initializer_list<double> values)
    : values_(static_cast<Eigen::Index>(values.size())) {
    Eigen::Index i = 0;
    for (double v : values) values_[i++] = v;
}

ParamVector::ParamVector(std::vector<double> values)
    : values_(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))) {}

bool ParamVector::is_finite() const { return values_.allFinite(); }

ParamVector& ParamVector::operator+=(const ParamVector& other) {
    require_same_dim(*this, other, "operator+=");
    values_ += other.values_;
    return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
    require_same_dim(*this, other, "operator-=");
    values_ -= other.values_;
    return *this;
}

ParamVector& ParamVector::operator*=(double s) {
    values_ *= s;
    return *this;
}

bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.dim() == b.dim() && a.values_ == b.values_;
}

void require_same_dim(const ParamVector& a, const ParamVector& b, const char* what) {
    if (a.dim() != b.dim()) {
        throw ContractError(std::string(what) + ": dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()) + ")");
    }
}

double dot(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "dot");
    return a.eigen().dot(b.eigen());
}

ParamVector axpy(const ParamVector& y, double alpha, const ParamVector& x) {
    require_same_dim(y, x, "axpy");
    return ParamVector(Eigen::VectorXd(y.eigen() + alpha * x.eigen()));
}

double norm2(const ParamVector& v) { return v.eigen().norm(); }

double norm_inf(const ParamVector& v) { return v.empty() ? 0.0 : v.eigen().cwiseAbs().maxCoeff(); }

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "max_abs_diff");
    return a.empty() ? 0.0 : (a.eigen() - b.eigen()).cwiseAbs().maxCoeff();
}

ParamVector operator+(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "operator+");
    return ParamVector(Eigen::VectorXd(a.eigen() + b.eigen()));
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "operator-");
    return ParamVector(Eigen::VectorXd(a.eigen() - b.eigen()));
}

ParamVector operator-(const ParamVector& a) { return ParamVector(Eigen::VectorXd(-a.eigen())); }

ParamVector operator*(double s, const ParamVector& v) { return ParamVector(Eigen::VectorXd(s * v.eigen())); }

ParamVector operator*(const ParamVector& v, double s) { return s * v; }

}  // namespace metalearn
