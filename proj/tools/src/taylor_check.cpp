#include <cmath>
#include <cstdio>
#include <memory>

#include "common.hpp"
#include "metalearn/analysis.hpp"
#include "metalearn/quadratic_family.hpp"
#include "metalearn/sine.hpp"

namespace metalearn::cli {

Schema taylor_check_schema(bool /*paper_scale*/) {
    Schema s{
        {"run.seed", "42", "root seed; every stream derives from it"},
        {"family.name", "sine", "sine | quadratic"},
        {"sine.amplitude_min", "0.1", ""},
        {"sine.amplitude_max", "5", ""},
        {"sine.x_min", "-5", ""},
        {"sine.x_max", "5", ""},
        {"sine.train_points", "10", "points per task"},
        {"quadratic.dim", "4", ""},
        {"quadratic.samples", "8", "per-sample quadratics per task"},
        {"quadratic.curvature_min", "0.5", ""},
        {"quadratic.curvature_max", "2", ""},
        {"quadratic.center_scale", "1", ""},
        {"quadratic.sample_noise", "0.5", ""},
    };
    add_model_keys(s, "16, 16");
    // A shrunken Glorot point keeps alpha * max curvature below one across the grid.
    s.push_back({"model.init_scale", "0.1", "evaluation point = Glorot initialisation times this factor"});
    s.push_back({"study.algorithms", "maml, fomaml, reptile", "algorithms to expand (fomaml uses the last-gradient form)"});
    s.push_back({"study.k", "2, 3", "inner step counts"});
    s.push_back({"study.batch_size", "5", ""});
    s.push_back({"study.sampling", "cycle", "cycle | replacement"});
    s.push_back({"study.alphas", "0.003, 0.01, 0.03, 0.1", "inner step sizes, at least four, increasing"});
    s.push_back({"study.samples", "2000", "Monte-Carlo samples (shared across step sizes)"});
    s.push_back({"study.average_orders", "true", "average each sample over every batch order"});
    s.push_back({"study.curvature_batches", "20", "batches probed for the largest Hessian eigenvalue"});
    s.push_back({"check.algorithms", "maml, fomaml", "studies that must show second-order residuals"});
    s.push_back({"check.slope", "2", "expected log-log slope of the residual"});
    s.push_back({"check.slope_tolerance", "0.3", ""});
    s.push_back({"check.exact", "", "algorithms whose expansion must be exact (e.g. reptile on quadratics)"});
    return s;
}

namespace {

std::unique_ptr<TaskSampler> make_sampler(const Config& cfg, ParamVector& phi) {
    const std::string family = cfg.text("family.name");
    const RngStream root = root_stream(cfg);
    if (family == "sine") {
        SineFamilyConfig f;
        f.amplitude_min = cfg.real("sine.amplitude_min");
        f.amplitude_max = cfg.real("sine.amplitude_max");
        f.x_min = cfg.real("sine.x_min");
        f.x_max = cfg.real("sine.x_max");
        f.train_points = cfg.count("sine.train_points");
        f.tail_points = 0;
        checked("sine", [&] { f.validate(); });
        const MlpSpec spec = model_from(cfg, 1, 1, OutputKind::linear);
        RngStream init = root.child(kInitStream);
        phi = mlp_init(spec, init);
        phi *= cfg.real("model.init_scale");
        return std::make_unique<SineSampler>(f, spec);
    }
    if (family == "quadratic") {
        QuadraticFamilyConfig q;
        q.dim = cfg.count("quadratic.dim");
        q.samples_per_task = cfg.count("quadratic.samples");
        q.curvature_min = cfg.real("quadratic.curvature_min");
        q.curvature_max = cfg.real("quadratic.curvature_max");
        q.center_scale = cfg.real("quadratic.center_scale");
        q.sample_noise = cfg.real("quadratic.sample_noise");
        checked("quadratic", [&] { q.validate(); });
        phi = ParamVector::zeros(q.dim);
        return std::make_unique<QuadraticSampler>(q);
    }
    throw ConfigError("config key 'family.name': expected sine or quadratic, got '" + family + "'");
}

bool listed(const std::vector<std::string>& names, const std::string& name) {
    return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace

int run_taylor_check(const Config& cfg, const Context& ctx) {
    ParamVector phi;
    const auto sampler = make_sampler(cfg, phi);
    const RngStream study_rng = root_stream(cfg).child(kStudyStream);

    std::vector<MetaAlgorithm> algos;
    for (const auto& name : cfg.words("study.algorithms")) {
        MetaAlgorithm a;
        checked("study.algorithms", [&] { a.kind = parse_meta_kind(name); });
        if (a.kind == MetaKind::combo) throw ConfigError("config key 'study.algorithms': combo is not supported here");
        algos.push_back(a);
    }
    const auto ks = cfg.counts("study.k");
    const auto alphas = cfg.reals("study.alphas");
    const std::size_t n = cfg.count("study.samples");
    const auto must_fit = cfg.words("check.algorithms");
    const auto must_be_exact = cfg.words("check.exact");
    const double target = cfg.real("check.slope");
    const double tol = cfg.real("check.slope_tolerance");
    if (ks.empty()) throw ConfigError("config key 'study.k': at least one value required");

    // Coefficient table, exact.
    CsvWriter coef(ctx.out / "study_taylor_coefficients.csv", {"algorithm", "k", "c_grad", "c_inner", "inner_over_grad"});
    std::size_t kmax = *std::max_element(ks.begin(), ks.end());
    std::string table = "algorithm  k  c_grad  c_inner  c_inner/c_grad\n";
    for (std::size_t k = 1; k <= kmax; ++k) {
        const auto kk = static_cast<std::int64_t>(k);
        for (auto kind : {MetaKind::maml, MetaKind::fomaml, MetaKind::reptile}) {
            Rational g, in;
            switch (kind) {
                case MetaKind::maml: g = make_rational(1, 1), in = make_rational(2 * (kk - 1), 1); break;
                case MetaKind::fomaml: g = make_rational(1, 1), in = make_rational(kk - 1, 1); break;
                default: g = make_rational(kk, 1), in = make_rational(kk * (kk - 1), 2); break;
            }
            const Rational ratio = inner_to_grad_ratio(kind, k);
            coef.row(to_string(kind), k, g.str(), in.str(), ratio.str());
            table += fmt::format("{:<9} {:>2}  {:>6}  {:>7}  {:>14}\n", to_string(kind), k, g.str(), in.str(), ratio.str());
        }
    }
    if (!ctx.quiet) {
        std::fputs(table.c_str(), stdout);
        std::fflush(stdout);
    }

    CsvWriter summary_csv(ctx.out / "study_taylor_summary.csv",
                          {"algorithm", "k", "flag", "slope", "slope_stderr", "max_curvature", "pass"});
    nlohmann::ordered_json summary;
    summary["family"] = sampler->name();
    summary["dim"] = phi.dim();
    bool all_pass = true;
    std::vector<Series> lines;

    for (std::size_t k : ks) {
        TaylorSampling sampling;
        sampling.k = k;
        sampling.batch_size = cfg.count("study.batch_size");
        checked("study", [&] { sampling.sampling = parse_sampling(cfg.text("study.sampling")); });
        sampling.average_orders = cfg.flag("study.average_orders");
        sampling.threads = ctx.threads;
        checked("study", [&] { sampling.validate(); });

        const double lambda =
            max_curvature(phi, *sampler, sampling, cfg.count("study.curvature_batches"), study_rng.child(1000 + k));
        progress(ctx, fmt::format("taylor-check: k={} max curvature {:.4g}, {} samples", k, lambda, n));
        const TaylorStudy study = checked("study", [&] {
            return residual_study(phi, *sampler, algos, sampling, alphas, n, study_rng.child(k), lambda);
        });

        auto& jk = summary["k" + std::to_string(k)];
        jk["max_curvature"] = lambda;
        jk["avg_grad_norm"] = norm2(study.terms.avg_grad);
        jk["avg_grad_inner_norm"] = norm2(study.terms.avg_grad_inner);
        jk["inner_asymmetry_norm"] = norm2(study.terms.inner_12 - study.terms.inner_21);

        for (const auto& st : study.studies) {
            const std::string name = to_string(st.algorithm.kind);
            CsvWriter csv(ctx.out / fmt::format("study_taylor_{}_k{}.csv", name, k),
                          {"alpha", "residual_norm", "stderr", "n", "flag"});
            Series line{fmt::format("{} k={}", name, k), {}, {}};
            for (const auto& p : st.points) {
                csv.row(p.alpha, p.residual_norm, p.stderr_norm, p.n, to_string(p.flag));
                line.x.push_back(p.alpha);
                line.y.push_back(p.residual_norm);
            }
            lines.push_back(line);

            bool pass = true;
            if (listed(must_be_exact, name)) {
                pass = st.flag == StudyFlag::exact;
            } else if (listed(must_fit, name)) {
                pass = st.flag == StudyFlag::exact ||
                       (st.flag == StudyFlag::fit && std::abs(st.slope - target) <= tol);
            }
            all_pass = all_pass && pass;
            summary_csv.row(name, k, to_string(st.flag), st.slope, st.slope_stderr, lambda, pass);
            jk["studies"][name] = {{"flag", to_string(st.flag)},
                                   {"slope", st.slope},
                                   {"slope_stderr", st.slope_stderr},
                                   {"pass", pass}};
            progress(ctx, fmt::format("  {:<8} k={} {:<12} slope {:.3f} +- {:.3f} {}", name, k, to_string(st.flag),
                                      st.slope, st.slope_stderr, pass ? "pass" : "FAIL"));
        }
    }
    summary["pass"] = all_pass;
    write_json(ctx.out / "eval_summary.json", summary);
    if (ctx.svg) {
        write_svg_chart(ctx.out / "study_taylor.svg", lines,
                        {"expansion residual", "alpha", "residual norm", true, true});
    }
    return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace metalearn::cli
