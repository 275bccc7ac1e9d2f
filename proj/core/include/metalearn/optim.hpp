#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "metalearn/param_vector.hpp"

namespace metalearn {

struct SgdState {
    double step_size = 0.02;

    void validate() const;
};

/// phi - alpha * g.
ParamVector sgd_step(const SgdState& state, const ParamVector& phi, const ParamVector& g);

struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.0;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// Adam moments. `apply` advances t by exactly one per call.
class AdamState {
public:
    AdamState(AdamConfig config, std::size_t dim);

    const AdamConfig& config() const { return config_; }
    const ParamVector& first_moment() const { return m_; }
    const ParamVector& second_moment() const { return v_; }
    std::uint64_t step_count() const { return t_; }
    std::size_t dim() const { return m_.dim(); }

    /// One bias-corrected Adam update; mutates the moments and returns the new parameters.
    ParamVector apply(const ParamVector& phi, const ParamVector& g);

    /// Replace the moments wholesale (used when merging per-task clones).
    void set_moments(ParamVector m, ParamVector v, std::uint64_t t);

    friend bool operator==(const AdamState& a, const AdamState& b);

private:
    AdamConfig config_;
    ParamVector m_;
    ParamVector v_;
    std::uint64_t t_ = 0;
};

struct AdamStepResult {
    ParamVector params;
    AdamState state;
};

AdamStepResult adam_step(const AdamState& state, const ParamVector& phi, const ParamVector& g);

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);

/// Inner-loop optimizer choice and hyperparameters.
struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double step_size = 0.02;
    double beta1 = 0.0;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerConfig sgd(double step_size);
    static OptimizerConfig adam(double step_size, double beta1 = 0.0, double beta2 = 0.999, double epsilon = 1e-8);

    void validate() const;
};

/// Type-erased inner optimizer state: stateless SGD or Adam moments.
class OptimizerState {
public:
    OptimizerState(const OptimizerConfig& config, std::size_t dim);
    explicit OptimizerState(SgdState sgd) : state_(sgd) {}
    explicit OptimizerState(AdamState adam) : state_(std::move(adam)) {}

    OptimizerKind kind() const;
    double step_size() const;
    const AdamState* adam() const { return std::get_if<AdamState>(&state_); }
    AdamState* adam() { return std::get_if<AdamState>(&state_); }

    ParamVector step(const ParamVector& phi, const ParamVector& g);

    friend bool operator==(const OptimizerState& a, const OptimizerState& b);

private:
    std::variant<SgdState, AdamState> state_;
};

/// Opaque serialized optimizer state.
class StateBlob {
public:
    const std::vector<std::byte>& bytes() const { return bytes_; }
    std::size_t dim() const { return dim_; }

private:
    friend StateBlob snapshot(const OptimizerState& state);
    std::vector<std::byte> bytes_;
    std::size_t dim_ = 0;
};

StateBlob snapshot(const OptimizerState& state);
/// Inverse of snapshot; throws ContractError when the blob was taken from a
/// model of a different dimension or is malformed.
OptimizerState restore(const StateBlob& blob, std::size_t expected_dim);

/// Outer step size annealed linearly to zero: eps(i) = eps0 * (1 - i / total).
struct OuterSchedule {
    double initial_step = 1.0;
    std::size_t total_iters = 1;
    bool anneal = true;

    double step(std::size_t iter) const;
    void validate() const;
};

/// phi + eps(iter) * direction.
ParamVector outer_step(const ParamVector& phi, const ParamVector& direction, const OuterSchedule& schedule,
                       std::size_t iter);

}  // namespace metalearn
