#include <cmath>

#include "common.hpp"
#include "metalearn/sine.hpp"

namespace metalearn::cli {

Schema sine_demo_schema(bool /*paper_scale*/) {
    Schema s{
        {"run.seed", "1", "root seed; every stream derives from it"},
        {"run.algorithms", "random, reptile, maml", "runs to perform: random (untrained control), reptile, maml"},
        {"family.amplitude_min", "0.1", ""},
        {"family.amplitude_max", "5", ""},
        {"family.phase_min", "0", ""},
        {"family.phase_max", "6.283185307179586", ""},
        {"family.x_min", "-5", ""},
        {"family.x_max", "5", ""},
        {"family.train_points", "10", "sampled points per task"},
        {"family.grid_points", "50", "evaluation grid size"},
    };
    add_model_keys(s, "64, 64");
    // Ten steps over batches of five see two distinct halves of the points per
    // pass; full-batch repetition meta-trains far worse.
    add_outer_keys(s, "reptile", "30000", "1", "1");
    add_inner_keys(s, "reptile", "10", "5", "sgd", "0.02");
    // MAML: one adaptation step, meta-gradient on the full point set. Longer
    // inner loops make the second-order direction blow up at this outer step.
    add_outer_keys(s, "maml", "30000", "1", "1");
    add_inner_keys(s, "maml", "2", "10", "sgd", "0.02");
    add_inner_keys(s, "eval", "32", "10", "sgd", "0.02");
    s.push_back({"eval.trials", "100", "held-out tasks"});
    s.push_back({"eval.reduction", "0.9", "fraction of the pre-adaptation loss a task must shed to count as adapted"});
    s.push_back({"log.every", "1000", "outer iterations between log rows (0: last only)"});
    s.push_back({"log.trials", "20", "held-out tasks per logged evaluation"});
    return s;
}

namespace {

SineFamilyConfig sine_family(const Config& cfg) {
    SineFamilyConfig f;
    f.amplitude_min = cfg.real("family.amplitude_min");
    f.amplitude_max = cfg.real("family.amplitude_max");
    f.phase_min = cfg.real("family.phase_min");
    f.phase_max = cfg.real("family.phase_max");
    f.x_min = cfg.real("family.x_min");
    f.x_max = cfg.real("family.x_max");
    f.train_points = cfg.count("family.train_points");
    f.tail_points = 0;
    f.grid_points = cfg.count("family.grid_points");
    checked("family", [&] { f.validate(); });
    return f;
}

Eigen::MatrixXd column(const std::vector<double>& xs) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
    return m;
}

}  // namespace

int run_sine_demo(const Config& cfg, const Context& ctx) {
    const RngStream root = root_stream(cfg);
    const MlpSpec spec = model_from(cfg, 1, 1, OutputKind::linear);
    const SineFamilyConfig family = sine_family(cfg);
    const SineSampler sampler(family, spec);

    RngStream init_rng = root.child(kInitStream);
    const ParamVector phi0 = mlp_init(spec, init_rng);

    EvalConfig eval{inner_from(cfg, "eval"), cfg.count("eval.trials"), ctx.threads};
    if (eval.trials == 0) throw ConfigError("config key 'eval.trials' must be at least 1");
    const double reduction = cfg.real("eval.reduction");
    EvalConfig log_eval = eval;
    log_eval.trials = cfg.count("log.trials");

    RngStream curve_rng = root.child(kCurveStream);
    const SineTask curve_task = sine_sample(family, spec, curve_rng);
    const Eigen::MatrixXd grid = column(curve_task.grid());

    const auto runs = cfg.words("run.algorithms");
    for (const auto& run : runs) {
        if (run != "random" && run != "reptile" && run != "maml") {
            throw ConfigError("config key 'run.algorithms': unknown run '" + run + "'");
        }
    }

    CsvWriter log(ctx.out / "train_log.csv", train_log_header());
    CsvWriter trials(ctx.out / "study_sine_eval.csv", {"run", "task", "pre_loss", "post_loss", "post_over_pre"});
    nlohmann::ordered_json summary;
    summary["reduction_threshold"] = reduction;

    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& run = runs[r];
        ParamVector phi = phi0;
        if (run != "random") {
            MetaTrainConfig mc;
            mc.algorithm = run == "maml" ? MetaAlgorithm::maml() : MetaAlgorithm::reptile();
            mc.inner = inner_from(cfg, run);
            mc.schedule = schedule_from(cfg, run);
            mc.meta_batch = cfg.count(run + ".meta_batch");
            mc.threads = ctx.threads;
            mc.persist_optimizer_state = false;
            mc.log_every = cfg.count("log.every");
            if (log_eval.trials > 0) mc.eval = log_eval;
            checked(run, [&] { mc.validate(); });
            progress(ctx, fmt::format("sine-demo: training {} for {} outer iterations", run, mc.schedule.total_iters));
            const auto res = meta_train(sampler, phi0, mc, root.child(kTrainStream).child(r),
                                        [&](const TrainLogRow& row) { write_log_row(log, run, row); });
            phi = res.phi;
        }

        const EvalSummary s = meta_evaluate(phi, sampler, eval, root.child(kEvalTasksStream));
        std::size_t adapted = 0;
        for (std::size_t t = 0; t < s.trials.size(); ++t) {
            const auto& tr = s.trials[t];
            const bool ok = tr.post <= (1.0 - reduction) * tr.pre;
            adapted += ok;
            trials.row(run, t, tr.pre, tr.post, tr.pre > 0 ? tr.post / tr.pre : 0.0);
        }

        // Pre-adaptation predictions are the same function for every task.
        const Eigen::MatrixXd f_pre = mlp_predict(spec, phi, grid);
        RngStream adapt_rng = root.child(kCurveStream).child(1);
        const Trajectory traj = run_inner(phi, curve_task, eval.inner, adapt_rng);
        const Eigen::MatrixXd f_post = mlp_predict(spec, traj.final(), grid);
        CsvWriter curve(ctx.out / ("study_curve_" + run + ".csv"), {"x", "f_pre", "f_post", "f_true"});
        Series pre{run + " pre", {}, {}}, post{run + " post", {}, {}};
        for (Eigen::Index i = 0; i < grid.rows(); ++i) {
            const double x = grid(i, 0);
            curve.row(x, f_pre(i, 0), f_post(i, 0), curve_task.target(x));
            pre.x.push_back(x);
            pre.y.push_back(f_pre(i, 0));
            post.x.push_back(x);
            post.y.push_back(f_post(i, 0));
        }
        if (ctx.svg) {
            Series truth{"target", pre.x, {}};
            for (double x : truth.x) truth.y.push_back(curve_task.target(x));
            write_svg_chart(ctx.out / ("study_curve_" + run + ".svg"), {pre, post, truth},
                            {"sine adaptation: " + run, "x", "f(x)"});
        }

        auto j = eval_json(s);
        j["tasks_adapted"] = adapted;
        j["mean_abs_f_pre"] = f_pre.cwiseAbs().mean();
        j["curve_task"] = {{"amplitude", curve_task.amplitude()}, {"phase", curve_task.phase()}};
        summary["runs"][run] = j;
        progress(ctx, fmt::format("sine-demo: {:<8} pre loss {:.4f} post loss {:.4f} adapted {}/{} mean|f| {:.3f}", run,
                                  s.pre_mean, s.mean, adapted, s.trials.size(), f_pre.cwiseAbs().mean()));
    }
    write_json(ctx.out / "eval_summary.json", summary);
    return kExitOk;
}

}  // namespace metalearn::cli
