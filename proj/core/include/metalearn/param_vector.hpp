#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace metalearn {

/// Dense flat parameter vector. Every model exposes its state through one of
/// these; meta-updates are plain vector arithmetic on them.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim, double fill = 0.0);
    ParamVector(std::initializer_list<double> values);
    explicit ParamVector(std::vector<double> values);
    explicit ParamVector(Eigen::VectorXd values) : values_(std::move(values)) {}

    static ParamVector zeros(std::size_t dim) { return ParamVector(dim); }

    std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }
    bool empty() const { return values_.size() == 0; }

    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
    double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

    std::span<const double> span() const { return {values_.data(), dim()}; }
    std::span<double> span() { return {values_.data(), dim()}; }
    const double* data() const { return values_.data(); }
    double* data() { return values_.data(); }

    const Eigen::VectorXd& eigen() const { return values_; }
    Eigen::VectorXd& eigen() { return values_; }

    std::vector<double> to_vector() const { return {values_.data(), values_.data() + values_.size()}; }

    bool is_finite() const;

    ParamVector& operator+=(const ParamVector& other);
    ParamVector& operator-=(const ParamVector& other);
    ParamVector& operator*=(double s);

    friend bool operator==(const ParamVector& a, const ParamVector& b);

private:
    Eigen::VectorXd values_;
};

void require_same_dim(const ParamVector& a, const ParamVector& b, const char* what);

double dot(const ParamVector& a, const ParamVector& b);
/// y + alpha * x; inputs are left untouched.
ParamVector axpy(const ParamVector& y, double alpha, const ParamVector& x);

double norm2(const ParamVector& v);
double norm_inf(const ParamVector& v);
double max_abs_diff(const ParamVector& a, const ParamVector& b);

ParamVector operator+(const ParamVector& a, const ParamVector& b);
ParamVector operator-(const ParamVector& a, const ParamVector& b);
ParamVector operator-(const ParamVector& a);
ParamVector operator*(double s, const ParamVector& v);
ParamVector operator*(const ParamVector& v, double s);

}  // namespace metalearn
