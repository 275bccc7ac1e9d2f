#pragma once

#include <memory>
#include <numbers>
#include <vector>

#include "metalearn/task.hpp"

namespace metalearn {

struct SineFamilyConfig {
    double amplitude_min = 0.1;
    double amplitude_max = 5.0;
    double phase_min = 0.0;
    double phase_max = 2.0 * std::numbers::pi;
    double x_min = -5.0;
    double x_max = 5.0;
    std::size_t train_points = 10;
    /// Extra points forming the disjoint tail pool (0 disables separate tails).
    std::size_t tail_points = 10;
    std::size_t grid_points = 50;

    void validate() const;
};

/// `count` equally spaced points on [lo, hi], both ends included.
std::vector<double> uniform_grid(double lo, double hi, std::size_t count);

/// Regression onto f(x) = a sin(x + b) from a handful of sampled points.
class SineTask final : public Task {
public:
    SineTask(MlpSpec spec, SineFamilyConfig family, double amplitude, double phase, std::vector<double> train_x,
             std::vector<double> tail_x);

    double amplitude() const { return amplitude_; }
    double phase() const { return phase_; }
    double target(double x) const;
    const std::vector<double>& train_x() const { return train_x_; }
    const std::vector<double>& tail_x() const { return tail_x_; }
    const std::vector<double>& grid() const { return grid_; }
    const MlpSpec& spec() const { return spec_; }

    std::size_t dim() const override { return spec_.param_count(); }
    std::size_t train_size() const override { return train_x_.size(); }
    std::size_t tail_size() const override { return tail_x_.size(); }
    Minibatch make_batch(std::span<const std::size_t> ids, DataPool pool) const override;
    std::unique_ptr<DifferentiableLoss> loss(const Minibatch& batch) const override;
    double evaluate(const ParamVector& phi) const override;
    bool higher_is_better() const override { return false; }

private:
    MlpSpec spec_;
    SineFamilyConfig family_;
    double amplitude_;
    double phase_;
    std::vector<double> train_x_;
    std::vector<double> tail_x_;
    std::vector<double> grid_;
};

/// Draws a ~ U[amplitude_min, amplitude_max], b ~ U[phase_min, phase_max] and the train/tail x's.
SineTask sine_sample(const SineFamilyConfig& family, const MlpSpec& spec, RngStream& rng);

/// Mean squared error of the network against the task's sine over the evaluation grid.
double sine_eval_loss(const MlpSpec& spec, const ParamVector& phi, const SineTask& task);

class SineSampler final : public TaskSampler {
public:
    SineSampler(SineFamilyConfig family, MlpSpec spec);

    std::size_t dim() const override { return spec_.param_count(); }
    std::unique_ptr<Task> sample(RngStream& rng) const override;
    std::string name() const override { return "sine"; }
    const MlpSpec& spec() const { return spec_; }
    const SineFamilyConfig& family() const { return family_; }

private:
    SineFamilyConfig family_;
    MlpSpec spec_;
};

}  // namespace metalearn
