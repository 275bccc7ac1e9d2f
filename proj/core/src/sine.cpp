#include "metalearn/sine.hpp"

#include <cmath>

#include "metalearn/errors.hpp"

namespace metalearn {

void SineFamilyConfig::validate() const {
    if (!(amplitude_min <= amplitude_max)) throw ContractError("sine family: amplitude_min > amplitude_max");
    if (!(phase_min <= phase_max)) throw ContractError("sine family: phase_min > phase_max");
    if (!(x_min < x_max)) throw ContractError("sine family: x_min must be < x_max");
    if (train_points == 0) throw ContractError("sine family: need at least one training point");
    if (grid_points < 2) throw ContractError("sine family: evaluation grid needs at least 2 points");
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t count) {
    std::vector<double> g(count);
    if (count == 1) {
        g[0] = lo;
        return g;
    }
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) g[i] = lo + step * static_cast<double>(i);
    g.back() = hi;
    return g;
}

SineTask::SineTask(MlpSpec spec, SineFamilyConfig family, double amplitude, double phase, std::vector<double> train_x,
                   std::vector<double> tail_x)
    : spec_(std::move(spec)),
      family_(family),
      amplitude_(amplitude),
      phase_(phase),
      train_x_(std::move(train_x)),
      tail_x_(std::move(tail_x)),
      grid_(uniform_grid(family_.x_min, family_.x_max, family_.grid_points)) {
    spec_.validate();
    if (spec_.input_dim() != 1 || spec_.output_dim() != 1 || spec_.output != OutputKind::linear) {
        throw ContractError("SineTask: model must map 1 input to 1 linear output");
    }
}

double SineTask::target(double x) const { return amplitude_ * std::sin(x + phase_); }

Minibatch SineTask::make_batch(std::span<const std::size_t> ids, DataPool pool) const {
    const auto& xs = pool == DataPool::train ? train_x_ : tail_x_;
    Minibatch b;
    const auto n = static_cast<Eigen::Index>(ids.size());
    b.inputs.resize(n, 1);
    b.targets.resize(n, 1);
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t id = ids[static_cast<std::size_t>(r)];
        if (id >= xs.size()) throw ContractError("SineTask: sample id out of range");
        b.inputs(r, 0) = xs[id];
        b.targets(r, 0) = target(xs[id]);
    }
    b.sample_ids.assign(ids.begin(), ids.end());
    b.pool = pool;
    return b;
}

std::unique_ptr<DifferentiableLoss> SineTask::loss(const Minibatch& batch) const { return mlp_loss(spec_, batch); }

double SineTask::evaluate(const ParamVector& phi) const { return sine_eval_loss(spec_, phi, *this); }

SineTask sine_sample(const SineFamilyConfig& family, const MlpSpec& spec, RngStream& rng) {
    family.validate();
    const double a = rng.uniform(family.amplitude_min, family.amplitude_max);
    const double b = rng.uniform(family.phase_min, family.phase_max);
    std::vector<double> train(family.train_points);
    for (double& x : train) x = rng.uniform(family.x_min, family.x_max);
    std::vector<double> tail(family.tail_points);
    for (double& x : tail) x = rng.uniform(family.x_min, family.x_max);
    return SineTask(spec, family, a, b, std::move(train), std::move(tail));
}

double sine_eval_loss(const MlpSpec& spec, const ParamVector& phi, const SineTask& task) {
    const auto& grid = task.grid();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(grid.size()), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = grid[i];
    const Eigen::MatrixXd f = mlp_predict(spec, phi, x);
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = f(static_cast<Eigen::Index>(i), 0) - task.target(grid[i]);
        total += r * r;
    }
    return total / static_cast<double>(grid.size());
}

SineSampler::SineSampler(SineFamilyConfig family, MlpSpec spec) : family_(family), spec_(std::move(spec)) {
    family_.validate();
    spec_.validate();
}

std::unique_ptr<Task> SineSampler::sample(RngStream& rng) const {
    return std::make_unique<SineTask>(sine_sample(family_, spec_, rng));
}

}  // namespace metalearn
