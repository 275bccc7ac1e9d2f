#include "common.hpp"

#include <cstdio>

namespace metalearn::cli {

RngStream root_stream(const Config& cfg) { return RngStream(cfg.u64("run.seed"), 0); }

void add_model_keys(Schema& s, const std::string& hidden, const std::string& activation) {
    s.push_back({"model.hidden", hidden, "hidden layer widths, comma separated"});
    s.push_back({"model.activation", activation, "tanh | relu"});
}

MlpSpec model_from(const Config& cfg, std::size_t in, std::size_t out, OutputKind output) {
    MlpSpec spec;
    spec.layer_sizes.push_back(in);
    for (auto h : cfg.counts("model.hidden")) spec.layer_sizes.push_back(h);
    spec.layer_sizes.push_back(out);
    spec.output = output;
    checked("model", [&] {
        spec.activation = parse_activation(cfg.text("model.activation"));
        spec.validate();
    });
    return spec;
}

void add_optimizer_keys(Schema& s, const std::string& section, const std::string& kind, const std::string& lr) {
    s.push_back({section + ".optimizer", kind, "sgd | adam"});
    s.push_back({section + ".lr", lr, "inner step size"});
    s.push_back({section + ".beta1", "0", "adam only"});
    s.push_back({section + ".beta2", "0.999", "adam only"});
}

OptimizerConfig optimizer_from(const Config& cfg, const std::string& section) {
    const auto& kind = cfg.text(section + ".optimizer");
    const double lr = cfg.real(section + ".lr");
    OptimizerConfig o;
    if (kind == "sgd") {
        o = OptimizerConfig::sgd(lr);
    } else if (kind == "adam") {
        o = OptimizerConfig::adam(lr, cfg.real(section + ".beta1"), cfg.real(section + ".beta2"));
    } else {
        throw ConfigError("config key '" + section + ".optimizer': expected sgd or adam, got '" + kind + "'");
    }
    checked(section, [&] { o.validate(); });
    return o;
}

void add_inner_keys(Schema& s, const std::string& section, const std::string& steps, const std::string& batch,
                    const std::string& kind, const std::string& lr) {
    s.push_back({section + ".steps", steps, "optimizer steps per task"});
    s.push_back({section + ".batch_size", batch, "examples per minibatch"});
    s.push_back({section + ".sampling", "cycle", "cycle | replacement"});
    add_optimizer_keys(s, section, kind, lr);
}

InnerLoopConfig inner_from(const Config& cfg, const std::string& section) {
    InnerLoopConfig inner;
    inner.iterations = cfg.count(section + ".steps");
    inner.batch_size = cfg.count(section + ".batch_size");
    checked(section, [&] { inner.sampling = parse_sampling(cfg.text(section + ".sampling")); });
    inner.optimizer = optimizer_from(cfg, section);
    inner.record_trajectory = false;
    checked(section, [&] { inner.validate(); });
    return inner;
}

void add_outer_keys(Schema& s, const std::string& section, const std::string& iterations, const std::string& step,
                    const std::string& meta_batch) {
    s.push_back({section + ".iterations", iterations, "outer iterations per training run"});
    s.push_back({section + ".step", step, "initial outer step size"});
    s.push_back({section + ".anneal", "true", "anneal the outer step linearly to zero"});
    s.push_back({section + ".meta_batch", meta_batch, "tasks per outer iteration"});
}

OuterSchedule schedule_from(const Config& cfg, const std::string& section) {
    OuterSchedule s;
    s.initial_step = cfg.real(section + ".step");
    s.total_iters = cfg.count(section + ".iterations");
    s.anneal = cfg.flag(section + ".anneal");
    // Zero iterations is allowed: it evaluates the untrained initialisation.
    if (s.total_iters > 0) checked(section, [&] { s.validate(); });
    return s;
}

void add_fewshot_keys(Schema& s, const std::string& train_shots, const std::string& tail_per_class,
                      const std::string& eval_shots) {
    s.push_back({"family.ways", "5", "classes per episode"});
    s.push_back({"family.input_dim", "80", "input dimension"});
    s.push_back({"family.signal_dim", "4", "rank of the shared prototype subspace"});
    s.push_back({"family.prototype_scale", "1", "prototype spread"});
    s.push_back({"family.noise", "0.4", "per-example noise"});
    s.push_back({"family.basis_seed", "7", "seed of the shared prototype basis"});
    s.push_back({"family.train_shots", train_shots, "examples per class in training episodes"});
    s.push_back({"family.tail_per_class", tail_per_class, "disjoint tail examples per class in training episodes"});
    s.push_back({"family.eval_shots", eval_shots, "examples per class in evaluation episodes (K)"});
    s.push_back({"family.eval_queries", "1", "query examples per class in evaluation episodes"});
}

namespace {

FewShotConfig fewshot_base(const Config& cfg) {
    FewShotConfig f;
    f.ways = cfg.count("family.ways");
    f.input_dim = cfg.count("family.input_dim");
    f.signal_dim = cfg.count("family.signal_dim");
    f.prototype_scale = cfg.real("family.prototype_scale");
    f.noise = cfg.real("family.noise");
    f.basis_seed = cfg.u64("family.basis_seed");
    return f;
}

}  // namespace

FewShotConfig fewshot_train_family(const Config& cfg) {
    FewShotConfig f = fewshot_base(cfg);
    f.shots = cfg.count("family.train_shots");
    f.query_per_class = cfg.count("family.tail_per_class");
    checked("family", [&] { f.validate(); });
    return f;
}

FewShotConfig fewshot_eval_family(const Config& cfg) {
    FewShotConfig f = fewshot_base(cfg);
    f.shots = cfg.count("family.eval_shots");
    f.query_per_class = cfg.count("family.eval_queries");
    checked("family", [&] { f.validate(); });
    return f;
}

MetaAlgorithm parse_algorithm(const std::string& where, const std::string& name, std::size_t k) {
    MetaAlgorithm a;
    if (name == "joint") {
        a = MetaAlgorithm::first_gradient_only(k);
    } else {
        checked(where, [&] { a.kind = parse_meta_kind(name); });
        if (a.kind == MetaKind::combo) throw ConfigError("[" + where + "] combo weights cannot be given by name");
    }
    checked(where, [&] { a.validate(k); });
    return a;
}

const std::vector<std::string>& train_log_header() {
    static const std::vector<std::string> h{"run",         "iteration",       "outer_step", "displacement_norm",
                                            "last_inner_loss", "eval_mean", "eval_stderr"};
    return h;
}

void write_log_row(CsvWriter& csv, const std::string& run, const TrainLogRow& row) {
    csv.row(run, row.iteration, row.outer_step, row.displacement_norm, row.last_inner_loss,
            row.has_eval ? num(row.eval_mean) : std::string(), row.has_eval ? num(row.eval_stderr) : std::string());
}

void progress(const Context& ctx, const std::string& line) {
    if (ctx.quiet) return;
    std::fprintf(stderr, "%s\n", line.c_str());
    std::fflush(stderr);
}

nlohmann::ordered_json eval_json(const EvalSummary& s) {
    return {{"mean", s.mean}, {"stderr", s.std_error}, {"pre_mean", s.pre_mean}, {"trials", s.trials.size()}};
}

}  // namespace metalearn::cli
