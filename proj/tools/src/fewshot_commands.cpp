#include <charconv>
#include <map>

#include "common.hpp"

namespace metalearn::cli {

namespace {

struct Families {
    FewShotSampler train;
    FewShotSampler test;
    MlpSpec spec;
};

Families make_families(const Config& cfg) {
    const FewShotConfig train = fewshot_train_family(cfg);
    const FewShotConfig test = fewshot_eval_family(cfg);
    const MlpSpec spec = model_from(cfg, train.input_dim, train.ways, OutputKind::softmax);
    return {FewShotSampler(train, spec), FewShotSampler(test, spec), spec};
}

struct Outcome {
    EvalSummary final;
    std::vector<TrainLogRow> log;
};

// One meta-training run followed by the final evaluation on eval-family episodes.
Outcome train_and_evaluate(const Families& fam, const ParamVector& phi0, MetaTrainConfig mc, const EvalConfig& eval,
                           std::size_t log_trials, const RngStream& train_rng, const RngStream& eval_rng,
                           CsvWriter& log, const std::string& label, const Context& ctx) {
    mc.threads = ctx.threads;
    mc.eval_sampler = &fam.test;
    if (log_trials > 0) {
        EvalConfig le = eval;
        le.trials = log_trials;
        mc.eval = le;
    }
    checked(label, [&] {
        mc.validate();
        mc.algorithm.validate(mc.inner.iterations);
    });
    progress(ctx, fmt::format("  {}: {} outer iterations", label, mc.schedule.total_iters));
    const MetaTrainResult res = meta_train(fam.train, phi0, mc, train_rng, [&](const TrainLogRow& row) {
        write_log_row(log, label, row);
    });
    Outcome out;
    out.final = meta_evaluate(res.phi, fam.test, eval, eval_rng, res.state ? &*res.state : nullptr);
    out.log = res.log;
    progress(ctx, fmt::format("  {}: accuracy {:.3f} +- {:.3f}", label, out.final.mean, out.final.std_error));
    return out;
}

Series curve_of(const std::string& name, const std::vector<TrainLogRow>& log) {
    Series s{name, {}, {}};
    for (const auto& r : log) {
        if (!r.has_eval) continue;
        s.x.push_back(static_cast<double>(r.iteration));
        s.y.push_back(r.eval_mean);
    }
    return s;
}

EvalConfig eval_from(const Config& cfg, const InnerLoopConfig& inner, const Context& ctx) {
    EvalConfig e;
    e.inner = inner;
    e.inner.iterations = cfg.count("eval.steps");
    e.inner.batch_size = cfg.count("eval.batch_size");
    e.inner.sampling = Sampling::cycle;
    e.inner.tail = TailMode::none;
    e.trials = cfg.count("eval.trials");
    e.threads = ctx.threads;
    if (e.trials == 0) throw ConfigError("config key 'eval.trials' must be at least 1");
    checked("eval", [&] { e.inner.validate(); });
    return e;
}

void add_eval_keys(Schema& s, const std::string& steps, const std::string& batch, const std::string& trials) {
    s.push_back({"eval.steps", steps, "adaptation steps on each evaluation episode (training optimizer)"});
    s.push_back({"eval.batch_size", batch, "minibatch size during evaluation adaptation"});
    s.push_back({"eval.trials", trials, "evaluation episodes"});
}

void add_log_keys(Schema& s, const std::string& every, const std::string& trials) {
    s.push_back({"log.every", every, "outer iterations between learning-curve points (0: last only)"});
    s.push_back({"log.trials", trials, "evaluation episodes per learning-curve point"});
}

ParamVector init_params(const Config& cfg, const MlpSpec& spec) {
    RngStream r = root_stream(cfg).child(kInitStream);
    return mlp_init(spec, r);
}

}  // namespace

// ---------------------------------------------------------------- fewshot

Schema fewshot_schema(bool paper_scale) {
    Schema s{
        {"run.seed", "1", "root seed; every stream derives from it"},
        {"run.algorithms", "reptile, fomaml, maml, joint", "reptile | fomaml | maml | joint (first inner gradient only)"},
    };
    add_fewshot_keys(s, "10", "2", "1");
    add_model_keys(s, "32");
    add_outer_keys(s, "outer", paper_scale ? "100000" : "10000", "1", "5");
    s.push_back({"outer.persist_optimizer_state", "true", "carry inner Adam moments across outer iterations"});
    add_inner_keys(s, "inner", "5", "10", "adam", "0.03");
    s.push_back({"fomaml.tail", "separate", "tail batch source: shared | separate"});
    s.push_back({"maml.lr", "0.3", "MAML differentiates through plain SGD at this step size, in training and eval"});
    add_eval_keys(s, "50", "5", "1000");
    add_log_keys(s, "1000", "200");
    return s;
}

int run_fewshot(const Config& cfg, const Context& ctx) {
    const Families fam = make_families(cfg);
    const RngStream root = root_stream(cfg);
    const ParamVector phi0 = init_params(cfg, fam.spec);
    const InnerLoopConfig inner = inner_from(cfg, "inner");
    const std::size_t k = inner.iterations;

    CsvWriter log(ctx.out / "train_log.csv", train_log_header());
    CsvWriter table(ctx.out / "study_fewshot.csv", {"algorithm", "accuracy", "stderr", "pre_accuracy", "trials"});
    nlohmann::ordered_json summary;
    summary["ways"] = fam.test.config().ways;
    summary["shots"] = fam.test.config().shots;
    summary["chance"] = 1.0 / static_cast<double>(fam.test.config().ways);
    std::vector<Series> curves;

    const auto algos = cfg.words("run.algorithms");
    for (std::size_t a = 0; a < algos.size(); ++a) {
        const auto& name = algos[a];
        MetaTrainConfig mc;
        mc.algorithm = parse_algorithm("run.algorithms", name, k);
        mc.inner = inner;
        mc.schedule = schedule_from(cfg, "outer");
        mc.meta_batch = cfg.count("outer.meta_batch");
        mc.persist_optimizer_state = cfg.flag("outer.persist_optimizer_state");
        mc.log_every = cfg.count("log.every");
        if (mc.algorithm.kind == MetaKind::fomaml) {
            checked("fomaml", [&] { mc.inner.tail = parse_tail(cfg.text("fomaml.tail")); });
            if (mc.inner.tail == TailMode::none) throw ConfigError("config key 'fomaml.tail': must be shared or separate");
        }
        if (mc.algorithm.kind == MetaKind::maml) {
            mc.inner.optimizer = OptimizerConfig::sgd(cfg.real("maml.lr"));
            mc.persist_optimizer_state = false;
            checked("maml", [&] { mc.inner.optimizer.validate(); });
        }
        const EvalConfig eval = eval_from(cfg, mc.inner, ctx);

        progress(ctx, "fewshot: " + name);
        const Outcome o = train_and_evaluate(fam, phi0, mc, eval, cfg.count("log.trials"), root.child(kTrainStream).child(a),
                                             root.child(kEvalTasksStream), log, name, ctx);
        table.row(name, o.final.mean, o.final.std_error, o.final.pre_mean, o.final.trials.size());
        auto j = eval_json(o.final);
        j["label"] = mc.algorithm.label();
        j["outer_iterations"] = mc.schedule.total_iters;
        summary["algorithms"][name] = j;
        curves.push_back(curve_of(name, o.log));
    }
    write_json(ctx.out / "eval_summary.json", summary);
    if (ctx.svg) write_svg_chart(ctx.out / "learning_curves.svg", curves, {"few-shot accuracy", "outer iteration", "accuracy"});
    return kExitOk;
}

// ---------------------------------------------------------------- combo-sweep

Schema combo_sweep_schema(bool paper_scale) {
    Schema s{
        {"run.seed", "1", "root seed; every stream derives from it"},
        {"combo.sets", "g1, g2, g1+g2, g3, g1+g2+g3, g4, g1+g2+g3+g4", "inner-gradient combinations to train with"},
        {"combo.normalizations", "sum, average", "sum | average (divide by the number of included gradients)"},
    };
    // Four disjoint batches: batch_size * 4 must equal ways * train_shots.
    add_fewshot_keys(s, "20", "1", "5");
    add_model_keys(s, "32");
    add_outer_keys(s, "outer", paper_scale ? "40000" : "4000", "0.25", "1");
    add_inner_keys(s, "inner", "4", "25", "sgd", "0.1");
    add_eval_keys(s, "5", "25", "500");
    add_log_keys(s, "500", "100");
    return s;
}

namespace {

std::vector<double> parse_combo(const std::string& set, std::size_t k) {
    std::vector<double> w(k, 0.0);
    std::size_t pos = 0;
    while (pos <= set.size()) {
        auto end = set.find('+', pos);
        if (end == std::string::npos) end = set.size();
        const std::string term = set.substr(pos, end - pos);
        std::size_t idx = 0;
        if (term.size() < 2 || term[0] != 'g' ||
            std::from_chars(term.data() + 1, term.data() + term.size(), idx).ptr != term.data() + term.size() ||
            idx < 1 || idx > k) {
            throw ConfigError("config key 'combo.sets': cannot parse '" + set + "' (expected terms g1..g" +
                              std::to_string(k) + " joined by '+')");
        }
        w[idx - 1] = 1.0;
        pos = end + 1;
    }
    return w;
}

}  // namespace

int run_combo_sweep(const Config& cfg, const Context& ctx) {
    const Families fam = make_families(cfg);
    const RngStream root = root_stream(cfg);
    const ParamVector phi0 = init_params(cfg, fam.spec);
    InnerLoopConfig inner = inner_from(cfg, "inner");
    const std::size_t train_size = fam.train.config().ways * fam.train.config().shots;
    if (inner.iterations != 4) throw ConfigError("config key 'inner.steps': the combination sweep needs exactly 4 steps");
    if (inner.sampling != Sampling::cycle || inner.batch_size * 4 != train_size) {
        throw ConfigError(fmt::format(
            "config keys 'inner.batch_size', 'inner.sampling': four disjoint batches need cycle sampling and "
            "batch_size * 4 == ways * train_shots ({} * 4 != {})",
            inner.batch_size, train_size));
    }
    const EvalConfig eval = eval_from(cfg, inner, ctx);

    CsvWriter log(ctx.out / "train_log.csv", train_log_header());
    CsvWriter table(ctx.out / "study_combo.csv", {"combination", "normalize", "accuracy", "stderr", "trials"});
    nlohmann::ordered_json summary;
    std::vector<Series> curves;

    std::size_t run_id = 0;
    for (const auto& norm_name : cfg.words("combo.normalizations")) {
        ComboNormalize norm{};
        checked("combo.normalizations", [&] { norm = parse_combo_normalize(norm_name); });
        for (const auto& set : cfg.words("combo.sets")) {
            MetaTrainConfig mc;
            mc.algorithm = MetaAlgorithm::combo(parse_combo(set, 4), norm);
            mc.inner = inner;
            mc.schedule = schedule_from(cfg, "outer");
            mc.meta_batch = cfg.count("outer.meta_batch");
            mc.log_every = cfg.count("log.every");
            const std::string label = set + "/" + norm_name;
            const Outcome o = train_and_evaluate(fam, phi0, mc, eval, cfg.count("log.trials"),
                                                 root.child(kTrainStream).child(run_id++), root.child(kEvalTasksStream),
                                                 log, label, ctx);
            CsvWriter curve(ctx.out / ("study_combo_" + set + "_" + norm_name + ".csv"),
                            {"iteration", "outer_step", "eval_mean", "eval_stderr"});
            for (const auto& r : o.log) {
                if (r.has_eval) curve.row(r.iteration, r.outer_step, r.eval_mean, r.eval_stderr);
            }
            table.row(set, norm_name, o.final.mean, o.final.std_error, o.final.trials.size());
            summary["combinations"][label] = eval_json(o.final);
            curves.push_back(curve_of(label, o.log));
        }
    }
    write_json(ctx.out / "eval_summary.json", summary);
    if (ctx.svg) write_svg_chart(ctx.out / "study_combo.svg", curves, {"gradient combinations", "outer iteration", "accuracy"});
    return kExitOk;
}

// ---------------------------------------------------------------- overlap-sweep

Schema overlap_sweep_schema(bool paper_scale) {
    Schema s{
        {"run.seed", "1", "root seed; every stream derives from it"},
        {"sweep.axis", "iterations", "iterations | batch_size | outer_step"},
        {"sweep.values", "1, 2, 3, 4, 5, 6, 7, 8", "values of the swept quantity"},
        {"sweep.variants", "shared-cycle, shared-replacement, separate-tail, reptile",
         "shared-cycle | shared-replacement | separate-tail (FOMAML tail modes) | reptile"},
    };
    add_fewshot_keys(s, "20", "5", "5");
    add_model_keys(s, "32");
    add_outer_keys(s, "outer", paper_scale ? "100000" : "2000", "1", "5");
    // For FOMAML the steps count includes the tail batch.
    add_inner_keys(s, "inner", "4", "25", "adam", "0.03");
    add_eval_keys(s, "5", "25", "1000");
    add_log_keys(s, "0", "0");
    return s;
}

int run_overlap_sweep(const Config& cfg, const Context& ctx) {
    const Families fam = make_families(cfg);
    const RngStream root = root_stream(cfg);
    const ParamVector phi0 = init_params(cfg, fam.spec);
    const InnerLoopConfig base = inner_from(cfg, "inner");
    const std::string axis = cfg.text("sweep.axis");
    if (axis != "iterations" && axis != "batch_size" && axis != "outer_step") {
        throw ConfigError("config key 'sweep.axis': expected iterations, batch_size or outer_step, got '" + axis + "'");
    }
    const auto values = cfg.reals("sweep.values");
    const auto variants = cfg.words("sweep.variants");
    for (const auto& v : variants) {
        if (v != "shared-cycle" && v != "shared-replacement" && v != "separate-tail" && v != "reptile") {
            throw ConfigError("config key 'sweep.variants': unknown variant '" + v + "'");
        }
    }

    CsvWriter log(ctx.out / "train_log.csv", train_log_header());
    CsvWriter table(ctx.out / "study_overlap.csv",
                    {"axis", "value", "variant", "accuracy", "stderr", "pre_accuracy", "trials"});
    nlohmann::ordered_json summary;
    summary["axis"] = axis;
    std::map<std::string, Series> series;

    std::size_t run_id = 0;
    for (const double value : values) {
        for (const auto& variant : variants) {
            MetaTrainConfig mc;
            mc.inner = base;
            mc.schedule = schedule_from(cfg, "outer");
            mc.meta_batch = cfg.count("outer.meta_batch");
            mc.log_every = cfg.count("log.every");
            if (axis == "outer_step") {
                mc.schedule.initial_step = value;
            } else if (value < 1 || value != static_cast<double>(static_cast<std::size_t>(value))) {
                throw ConfigError("config key 'sweep.values': " + axis + " values must be positive integers");
            } else if (axis == "iterations") {
                mc.inner.iterations = static_cast<std::size_t>(value);
            } else {
                mc.inner.batch_size = static_cast<std::size_t>(value);
            }
            if (variant == "reptile") {
                mc.algorithm = MetaAlgorithm::reptile();
            } else {
                mc.algorithm = MetaAlgorithm::fomaml();
                mc.inner.tail = variant == "separate-tail" ? TailMode::separate : TailMode::shared;
                if (variant == "shared-replacement") mc.inner.sampling = Sampling::replacement;
            }
            const EvalConfig eval = eval_from(cfg, mc.inner, ctx);
            const std::string label = fmt::format("{} {}={}", variant, axis, num(value));
            const Outcome o = train_and_evaluate(fam, phi0, mc, eval, cfg.count("log.trials"),
                                                 root.child(kTrainStream).child(run_id++), root.child(kEvalTasksStream),
                                                 log, label, ctx);
            table.row(axis, value, variant, o.final.mean, o.final.std_error, o.final.pre_mean, o.final.trials.size());
            auto j = eval_json(o.final);
            j["value"] = value;
            summary["cells"][variant].push_back(j);
            auto& s = series[variant];
            s.name = variant;
            s.x.push_back(value);
            s.y.push_back(o.final.mean);
        }
    }
    write_json(ctx.out / "eval_summary.json", summary);
    if (ctx.svg) {
        std::vector<Series> list;
        for (const auto& v : variants) list.push_back(series[v]);
        write_svg_chart(ctx.out / "study_overlap.svg", list,
                        {"tail-batch overlap", axis, "accuracy", axis == "outer_step" || axis == "batch_size"});
    }
    return kExitOk;
}

}  // namespace metalearn::cli
