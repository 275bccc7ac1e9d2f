#include "metalearn/optim.hpp"

#include <cmath>
#include <cstring>

#include "metalearn/errors.hpp"

namespace metalearn {

void SgdState::validate() const {
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ContractError("SGD step size must be finite and >= 0");
}

ParamVector sgd_step(const SgdState& state, const ParamVector& phi, const ParamVector& g) {
    require_same_dim(phi, g, "sgd_step");
    if (!g.is_finite()) throw NumericalError("sgd_step: non-finite gradient");
    return axpy(phi, -state.step_size, g);
}

void AdamConfig::validate() const {
    if (!(step_size >= 0.0)) throw ContractError("Adam step size must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ContractError("Adam beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("Adam beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ContractError("Adam epsilon must be positive");
}

AdamState::AdamState(AdamConfig config, std::size_t dim) : config_(config), m_(dim), v_(dim) { config_.validate(); }

ParamVector AdamState::apply(const ParamVector& phi, const ParamVector& g) {
    require_same_dim(phi, m_, "adam_step");
    require_same_dim(g, m_, "adam_step");
    if (!g.is_finite()) throw NumericalError("adam_step: non-finite gradient");
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    m_.eigen() = b1 * m_.eigen() + (1.0 - b1) * g.eigen();
    v_.eigen() = b2 * v_.eigen() + (1.0 - b2) * g.eigen().cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const Eigen::ArrayXd m_hat = m_.eigen().array() / c1;
    const Eigen::ArrayXd v_hat = v_.eigen().array() / c2;
    return ParamVector(Eigen::VectorXd(phi.eigen().array() - config_.step_size * m_hat / (v_hat.sqrt() + config_.epsilon)));
}

void AdamState::set_moments(ParamVector m, ParamVector v, std::uint64_t t) {
    require_same_dim(m, m_, "AdamState::set_moments");
    require_same_dim(v, v_, "AdamState::set_moments");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

bool operator==(const AdamState& a, const AdamState& b) {
    return a.config_.step_size == b.config_.step_size && a.config_.beta1 == b.config_.beta1 &&
           a.config_.beta2 == b.config_.beta2 && a.config_.epsilon == b.config_.epsilon && a.t_ == b.t_ &&
           a.m_ == b.m_ && a.v_ == b.v_;
}

AdamStepResult adam_step(const AdamState& state, const ParamVector& phi, const ParamVector& g) {
    AdamState next = state;
    ParamVector params = next.apply(phi, g);
    return {std::move(params), std::move(next)};
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerConfig OptimizerConfig::sgd(double step_size) {
    OptimizerConfig c;
    c.kind = OptimizerKind::sgd;
    c.step_size = step_size;
    return c;
}

OptimizerConfig OptimizerConfig::adam(double step_size, double beta1, double beta2, double epsilon) {
    OptimizerConfig c;
    c.kind = OptimizerKind::adam;
    c.step_size = step_size;
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.epsilon = epsilon;
    return c;
}

void OptimizerConfig::validate() const {
    if (kind == OptimizerKind::sgd) {
        SgdState{step_size}.validate();
    } else {
        AdamConfig{step_size, beta1, beta2, epsilon}.validate();
    }
}

OptimizerState::OptimizerState(const OptimizerConfig& config, std::size_t dim) {
    config.validate();
    if (config.kind == OptimizerKind::sgd) {
        state_ = SgdState{config.step_size};
    } else {
        state_ = AdamState(AdamConfig{config.step_size, config.beta1, config.beta2, config.epsilon}, dim);
    }
}

OptimizerKind OptimizerState::kind() const {
    return std::holds_alternative<SgdState>(state_) ? OptimizerKind::sgd : OptimizerKind::adam;
}

double OptimizerState::step_size() const {
    if (const auto* s = std::get_if<SgdState>(&state_)) return s->step_size;
    return std::get<AdamState>(state_).config().step_size;
}

ParamVector OptimizerState::step(const ParamVector& phi, const ParamVector& g) {
    if (auto* s = std::get_if<SgdState>(&state_)) return sgd_step(*s, phi, g);
    return std::get<AdamState>(state_).apply(phi, g);
}

bool operator==(const OptimizerState& a, const OptimizerState& b) {
    if (a.kind() != b.kind()) return false;
    if (a.kind() == OptimizerKind::sgd) return a.step_size() == b.step_size();
    return *a.adam() == *b.adam();
}

namespace {

constexpr std::uint32_t kBlobMagic = 0x4d4c4f53;  // "MLOS"

template <typename T>
void put(std::vector<std::byte>& out, const T& value) {
    const auto* p = reinterpret_cast<const std::byte*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::byte>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ContractError("restore: truncated optimizer blob");
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

}  // namespace

StateBlob snapshot(const OptimizerState& state) {
    StateBlob blob;
    auto& out = blob.bytes_;
    put(out, kBlobMagic);
    put(out, static_cast<std::uint32_t>(state.kind()));
    if (const AdamState* adam = state.adam()) {
        blob.dim_ = adam->dim();
        put(out, static_cast<std::uint64_t>(adam->dim()));
        put(out, adam->config().step_size);
        put(out, adam->config().beta1);
        put(out, adam->config().beta2);
        put(out, adam->config().epsilon);
        put(out, adam->step_count());
        for (double x : adam->first_moment().span()) put(out, x);
        for (double x : adam->second_moment().span()) put(out, x);
    } else {
        put(out, static_cast<std::uint64_t>(0));
        put(out, state.step_size());
    }
    return blob;
}

OptimizerState restore(const StateBlob& blob, std::size_t expected_dim) {
    const auto& in = blob.bytes();
    std::size_t pos = 0;
    if (get<std::uint32_t>(in, pos) != kBlobMagic) throw ContractError("restore: not an optimizer blob");
    const auto kind = static_cast<OptimizerKind>(get<std::uint32_t>(in, pos));
    const auto dim = static_cast<std::size_t>(get<std::uint64_t>(in, pos));
    if (kind == OptimizerKind::sgd) return OptimizerState(SgdState{get<double>(in, pos)});
    if (dim != expected_dim) {
        throw ContractError("restore: blob dimension " + std::to_string(dim) + " does not match model dimension " +
                            std::to_string(expected_dim));
    }
    AdamConfig cfg;
    cfg.step_size = get<double>(in, pos);
    cfg.beta1 = get<double>(in, pos);
    cfg.beta2 = get<double>(in, pos);
    cfg.epsilon = get<double>(in, pos);
    const auto t = get<std::uint64_t>(in, pos);
    ParamVector m(dim);
    ParamVector v(dim);
    for (std::size_t i = 0; i < dim; ++i) m[i] = get<double>(in, pos);
    for (std::size_t i = 0; i < dim; ++i) v[i] = get<double>(in, pos);
    AdamState state(cfg, dim);
    state.set_moments(std::move(m), std::move(v), t);
    return OptimizerState(std::move(state));
}

double OuterSchedule::step(std::size_t iter) const {
    if (!anneal) return initial_step;
    const double frac = static_cast<double>(iter) / static_cast<double>(total_iters);
    return std::max(0.0, initial_step * (1.0 - frac));
}

void OuterSchedule::validate() const {
    if (total_iters == 0) throw ContractError("outer schedule needs at least one iteration");
    if (!(initial_step >= 0.0)) throw ContractError("outer step size must be >= 0");
}

ParamVector outer_step(const ParamVector& phi, const ParamVector& direction, const OuterSchedule& schedule,
                       std::size_t iter) {
    if (iter >= schedule.total_iters) throw ContractError("outer_step: iteration beyond schedule");
    return axpy(phi, schedule.step(iter), direction);
}

}  // namespace metalearn
