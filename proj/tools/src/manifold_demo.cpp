#include "common.hpp"
#include "metalearn/manifold.hpp"

namespace metalearn::cli {

Schema manifold_demo_schema(bool /*paper_scale*/) {
    return {
        {"run.seed", "1", "root seed; every stream derives from it"},
        {"manifold.case", "lines", "lines (y = 0 and x = 0 in the plane) | random (random affine subspaces)"},
        {"manifold.dim", "10", "ambient dimension (random case)"},
        {"manifold.constraints", "7", "linear constraints per subspace (random case)"},
        {"manifold.count", "2", "number of subspaces (random case)"},
        {"init.scale", "3", "initial point ~ scale * N(0, I)"},
        {"sgd.step", "0.5", "initial step toward the sampled manifold"},
        {"sgd.iterations", "1000000", ""},
        {"sgd.anneal", "true", "anneal the step linearly to zero"},
        {"sgd.order", "alternating", "alternating | random"},
        {"sgd.trace_every", "1000", "iterations between trace rows"},
        {"check.tolerance", "1e-6", "distance to the fixed point that counts as converged"},
    };
}

int run_manifold_demo(const Config& cfg, const Context& ctx) {
    const RngStream root = root_stream(cfg);
    const std::string which = cfg.text("manifold.case");
    std::vector<AffineManifoldTask> tasks;
    checked("manifold", [&] {
        if (which == "lines") {
            tasks.emplace_back(Eigen::MatrixXd{{0.0, 1.0}}, Eigen::VectorXd::Zero(1));
            tasks.emplace_back(Eigen::MatrixXd{{1.0, 0.0}}, Eigen::VectorXd::Zero(1));
        } else if (which == "random") {
            RngStream r = root.child(kStudyStream);
            const std::size_t count = cfg.count("manifold.count");
            if (count == 0) throw ConfigError("config key 'manifold.count' must be at least 1");
            for (std::size_t i = 0; i < count; ++i) {
                tasks.push_back(AffineManifoldTask::random(cfg.count("manifold.dim"), cfg.count("manifold.constraints"), r));
            }
        } else {
            throw ConfigError("config key 'manifold.case': expected lines or random, got '" + which + "'");
        }
    });
    const std::size_t d = tasks.front().dim();

    ManifoldSgdConfig sgd;
    sgd.initial_step = cfg.real("sgd.step");
    sgd.iterations = cfg.count("sgd.iterations");
    sgd.anneal = cfg.flag("sgd.anneal");
    const std::string order = cfg.text("sgd.order");
    if (order == "alternating") {
        sgd.order = ManifoldOrder::alternating;
    } else if (order == "random") {
        sgd.order = ManifoldOrder::random;
    } else {
        throw ConfigError("config key 'sgd.order': expected alternating or random, got '" + order + "'");
    }
    sgd.trace_every = cfg.count("sgd.trace_every");
    checked("sgd", [&] { sgd.validate(); });
    const double tol = cfg.real("check.tolerance");

    RngStream init = root.child(kInitStream);
    ParamVector phi0(d);
    const double scale = cfg.real("init.scale");
    for (std::size_t i = 0; i < d; ++i) phi0[i] = scale * init.normal();

    const std::vector<double> probs(tasks.size(), 1.0 / static_cast<double>(tasks.size()));
    const FixedPoint oracle = manifold_fixed_point_oracle(tasks, probs, phi0);

    progress(ctx, fmt::format("manifold-demo: {} case, dim {}, {} iterations", which, d, sgd.iterations));
    RngStream iter_rng = root.child(kTrainStream);
    const auto trace = manifold_sgd_iterate(phi0, tasks, sgd, iter_rng);

    std::vector<std::string> header{"iter"};
    for (std::size_t i = 0; i < d; ++i) header.push_back("phi_" + std::to_string(i));
    header.push_back("distance");
    CsvWriter csv(ctx.out / "study_manifold_trace.csv", header);
    Series dist{"distance to fixed point", {}, {}};
    for (const auto& p : trace) {
        std::vector<std::string> row{std::to_string(p.iteration)};
        for (std::size_t i = 0; i < d; ++i) row.push_back(num(p.phi[i]));
        const double dd = norm2(p.phi - oracle.phi);
        row.push_back(num(dd));
        csv.write(row);
        if (p.iteration > 0) {
            dist.x.push_back(static_cast<double>(p.iteration));
            dist.y.push_back(dd);
        }
    }

    const double final_distance = norm2(trace.back().phi - oracle.phi);
    const bool converged = final_distance <= tol;
    // A constant step leaves SGD bouncing in a neighbourhood of the fixed point.
    const std::string flag = converged ? "converged" : (sgd.anneal ? "not_converged" : "neighbourhood");

    nlohmann::ordered_json j;
    j["case"] = which;
    j["dim"] = d;
    j["manifolds"] = tasks.size();
    j["oracle"] = std::vector<double>(oracle.phi.eigen().data(), oracle.phi.eigen().data() + d);
    j["oracle_minimal_norm"] = oracle.minimal_norm;
    j["final"] = std::vector<double>(trace.back().phi.eigen().data(), trace.back().phi.eigen().data() + d);
    j["final_distance"] = final_distance;
    j["tolerance"] = tol;
    j["annealed"] = sgd.anneal;
    j["flag"] = flag;
    write_json(ctx.out / "eval_summary.json", j);
    progress(ctx, fmt::format("manifold-demo: distance to fixed point {:.3e} ({})", final_distance, flag));

    if (ctx.svg) {
        write_svg_chart(ctx.out / "study_manifold_distance.svg", {dist},
                        {"distance to the fixed point", "iteration", "distance", true, true});
        if (d == 2) {
            Series path{"iterates", {}, {}};
            for (const auto& p : trace) {
                path.x.push_back(p.phi[0]);
                path.y.push_back(p.phi[1]);
            }
            Series fp{"fixed point", {oracle.phi[0]}, {oracle.phi[1]}};
            write_svg_chart(ctx.out / "study_manifold_path.svg", {path, fp}, {"iterates", "phi_0", "phi_1"});
        }
    }
    return kExitOk;
}

}  // namespace metalearn::cli
