#include "metalearn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metalearn/errors.hpp"
#include "metalearn/parallel.hpp"

namespace metalearn {

std::string Rational::str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

Rational make_rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw ContractError("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    return {num / g, den / g};
}

Coefficients coefficients(const MetaAlgorithm& algo, std::size_t k) {
    if (k == 0) throw ContractError("coefficients: k must be >= 1");
    const double kd = static_cast<double>(k);
    switch (algo.kind) {
        case MetaKind::maml: return {1.0, 2.0 * (kd - 1.0)};
        case MetaKind::fomaml: return {1.0, kd - 1.0};
        case MetaKind::reptile: return {kd, kd * (kd - 1.0) / 2.0};
        case MetaKind::combo: {
            algo.validate(k);
            // g_i = gbar_i - alpha H_i sum_{j<i} gbar_j + O(alpha^2)
            Coefficients c;
            double abs_sum = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                c.grad += algo.weights[i];
                c.inner += algo.weights[i] * static_cast<double>(i);
                abs_sum += std::abs(algo.weights[i]);
            }
            if (algo.normalize == ComboNormalize::average) {
                c.grad /= abs_sum;
                c.inner /= abs_sum;
            }
            return c;
        }
    }
    throw ContractError("coefficients: unknown algorithm");
}

Rational inner_to_grad_ratio(MetaKind kind, std::size_t k) {
    const auto kk = static_cast<std::int64_t>(k);
    switch (kind) {
        case MetaKind::maml: return make_rational(2 * (kk - 1), 1);
        case MetaKind::fomaml: return make_rational(kk - 1, 1);
        case MetaKind::reptile: return make_rational(kk * (kk - 1), 2 * kk);
        case MetaKind::combo: break;
    }
    throw ContractError("inner_to_grad_ratio: only defined for reptile, fomaml and maml");
}

ParamVector predicted_meta_gradient(const TaylorTerms& terms, const MetaAlgorithm& algo, std::size_t k, double alpha) {
    const Coefficients c = coefficients(algo, k);
    return axpy(c.grad * terms.avg_grad, -c.inner * alpha, terms.avg_grad_inner);
}

InnerLoopConfig TaylorSampling::inner(double alpha) const {
    InnerLoopConfig cfg;
    cfg.iterations = k;
    cfg.batch_size = batch_size;
    cfg.sampling = sampling;
    cfg.tail = TailMode::none;
    cfg.optimizer = OptimizerConfig::sgd(alpha);
    cfg.record_trajectory = true;
    return cfg;
}

void TaylorSampling::validate() const {
    if (k == 0) throw ContractError("taylor sampling: k must be >= 1");
    if (batch_size == 0) throw ContractError("taylor sampling: batch size must be positive");
    if (average_orders && k > 6) throw ContractError("taylor sampling: averaging over orders needs k <= 6");
}

namespace {

constexpr std::size_t kChunk = 64;

struct SampleTerms {
    ParamVector avg_grad;
    ParamVector avg_grad_inner;
    ParamVector h2g1;
    ParamVector h1g2;
};

SampleTerms sample_terms(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches) {
    const std::size_t k = batches.size();
    std::vector<std::unique_ptr<DifferentiableLoss>> losses;
    std::vector<ParamVector> grads;
    for (const auto& b : batches) {
        losses.push_back(task.loss(b));
        grads.push_back(losses.back()->grad(phi));
    }
    SampleTerms out;
    out.avg_grad = ParamVector::zeros(phi.dim());
    for (const auto& g : grads) out.avg_grad += g;
    out.avg_grad *= 1.0 / static_cast<double>(k);
    out.avg_grad_inner = ParamVector::zeros(phi.dim());
    if (k < 2) {
        // Degenerate single batch: the cross term is the self term H g.
        out.h2g1 = losses[0]->hvp(phi, grads[0]);
        out.h1g2 = out.h2g1;
        out.avg_grad_inner = out.h2g1;
        return out;
    }
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const ParamVector hj_gi = losses[j]->hvp(phi, grads[i]);
            const ParamVector hi_gj = losses[i]->hvp(phi, grads[j]);
            if (i == 0 && j == 1) {
                out.h2g1 = hj_gi;
                out.h1g2 = hi_gj;
            }
            out.avg_grad_inner += hj_gi;
            out.avg_grad_inner += hi_gj;
            ++pairs;
        }
    }
    out.avg_grad_inner *= 0.5 / static_cast<double>(pairs);
    return out;
}

ParamVector measured_from_trajectory(const Trajectory& traj, const Task& task, const MetaAlgorithm& algo) {
    switch (algo.kind) {
        case MetaKind::reptile: return reptile_gradient(traj);
        case MetaKind::fomaml: return fomaml_last_gradient(traj);
        case MetaKind::maml: return -maml_direction(traj, task).direction;
        case MetaKind::combo: return -combo_direction(traj, algo.weights, algo.normalize).direction;
    }
    throw ContractError("measured_meta_gradient: unknown algorithm");
}

std::vector<std::vector<std::size_t>> batch_orders(std::size_t k, bool all) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<std::vector<std::size_t>> out;
    if (!all) {
        out.push_back(idx);
        return out;
    }
    do {
        out.push_back(idx);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return out;
}

/// Mean measured meta-gradient over batch orders, one per algorithm.
std::vector<ParamVector> order_averaged(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                                        const std::vector<MetaAlgorithm>& algos, double alpha, bool all_orders) {
    const auto orders = batch_orders(batches.size(), all_orders);
    std::vector<ParamVector> out(algos.size(), ParamVector::zeros(phi.dim()));
    for (const auto& order : orders) {
        std::vector<Minibatch> seq;
        seq.reserve(order.size());
        for (std::size_t i : order) seq.push_back(batches[i]);
        OptimizerState state(SgdState{alpha});
        const Trajectory traj = run_on_batches(phi, task, seq, state, true);
        for (std::size_t a = 0; a < algos.size(); ++a) out[a] += measured_from_trajectory(traj, task, algos[a]);
    }
    const double inv = 1.0 / static_cast<double>(orders.size());
    for (auto& v : out) {
        v *= inv;
        if (!v.is_finite()) throw NumericalError("non-finite measured meta-gradient");
    }
    return out;
}

struct MeanAccumulator {
    ParamVector sum;
    ParamVector sumsq;
    std::size_t n = 0;

    explicit MeanAccumulator(std::size_t dim) : sum(ParamVector::zeros(dim)), sumsq(ParamVector::zeros(dim)) {}

    void add(const ParamVector& x) {
        sum += x;
        sumsq.eigen() += x.eigen().cwiseProduct(x.eigen());
        ++n;
    }
    ParamVector mean() const { return (1.0 / static_cast<double>(n)) * sum; }
    ParamVector stderr_vec() const {
        ParamVector out = ParamVector::zeros(sum.dim());
        if (n < 2) return out;
        const double nd = static_cast<double>(n);
        for (std::size_t i = 0; i < sum.dim(); ++i) {
            const double m = sum[i] / nd;
            const double var = std::max(0.0, (sumsq[i] - nd * m * m) / (nd - 1.0));
            out[i] = std::sqrt(var / nd);
        }
        return out;
    }
};

struct DrawnSample {
    std::unique_ptr<Task> task;
    std::vector<Minibatch> batches;
};

DrawnSample draw(const TaskSampler& sampler, const TaylorSampling& sampling, const RngStream& rng, std::size_t s) {
    RngStream r = rng.child(s);
    DrawnSample d;
    d.task = sampler.sample(r);
    d.batches = sample_batches(*d.task, sampling.inner(0.0), r);
    return d;
}

TaylorTerms finish_terms(const MeanAccumulator& g, const MeanAccumulator& agi, const MeanAccumulator& h21,
                         const MeanAccumulator& h12) {
    TaylorTerms t;
    t.avg_grad = g.mean();
    t.avg_grad_inner = agi.mean();
    t.inner_12 = h21.mean();
    t.inner_21 = h12.mean();
    t.avg_grad_stderr = g.stderr_vec();
    t.avg_grad_inner_stderr = agi.stderr_vec();
    t.n_samples = g.n;
    return t;
}

}  // namespace

ParamVector measured_meta_gradient(const ParamVector& phi, const Task& task, const std::vector<Minibatch>& batches,
                                   const MetaAlgorithm& algo, double alpha) {
    OptimizerState state(SgdState{alpha});
    return measured_from_trajectory(run_on_batches(phi, task, batches, state, true), task, algo);
}

TaylorTerms estimate_terms(const ParamVector& phi, const TaskSampler& sampler, const TaylorSampling& sampling,
                           std::size_t n_samples, const RngStream& rng) {
    sampling.validate();
    if (n_samples < 2) throw ContractError("estimate_terms: need at least 2 samples");
    const std::size_t dim = phi.dim();
    MeanAccumulator g(dim), agi(dim), h21(dim), h12(dim);
    for (std::size_t start = 0; start < n_samples; start += kChunk) {
        const std::size_t count = std::min(kChunk, n_samples - start);
        std::vector<SampleTerms> chunk(count);
        parallel_for(count, sampling.threads, [&](std::size_t i) {
            const DrawnSample d = draw(sampler, sampling, rng, start + i);
            chunk[i] = sample_terms(phi, *d.task, d.batches);
        });
        for (const auto& t : chunk) {
            g.add(t.avg_grad);
            agi.add(t.avg_grad_inner);
            h21.add(t.h2g1);
            h12.add(t.h1g2);
        }
    }
    return finish_terms(g, agi, h21, h12);
}

std::string to_string(PointFlag f) {
    switch (f) {
        case PointFlag::ok: return "ok";
        case PointFlag::diverged: return "diverged";
        case PointFlag::unstable: return "unstable";
    }
    return "ok";
}

std::string to_string(StudyFlag f) {
    switch (f) {
        case StudyFlag::fit: return "fit";
        case StudyFlag::exact: return "exact";
        case StudyFlag::insufficient: return "insufficient";
    }
    return "fit";
}

std::pair<double, double> loglog_slope(const std::vector<double>& alphas, const std::vector<double>& residuals) {
    if (alphas.size() != residuals.size() || alphas.size() < 2) throw ContractError("loglog_slope: need >= 2 paired points");
    const std::size_t n = alphas.size();
    double mx = 0.0, my = 0.0;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(alphas[i] > 0.0 && residuals[i] > 0.0)) throw ContractError("loglog_slope: values must be positive");
        x[i] = std::log(alphas[i]);
        y[i] = std::log(residuals[i]);
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    if (n < 3) return {slope, 0.0};
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (my + slope * (x[i] - mx));
        ssr += r * r;
    }
    return {slope, std::sqrt(ssr / static_cast<double>(n - 2) / sxx)};
}

TaylorStudy residual_study(const ParamVector& phi, const TaskSampler& sampler, const std::vector<MetaAlgorithm>& algos,
                           const TaylorSampling& sampling, const std::vector<double>& alphas, std::size_t n_samples,
                           const RngStream& rng, std::optional<double> max_curvature) {
    sampling.validate();
    if (algos.empty()) throw ContractError("residual_study: no algorithms");
    if (alphas.size() < 4) throw ContractError("residual_study: need at least 4 step sizes");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0)) throw ContractError("residual_study: step sizes must be positive");
        if (i > 0 && !(alphas[i] > alphas[i - 1])) throw ContractError("residual_study: step sizes must be strictly increasing");
    }
    if (n_samples < 2) throw ContractError("residual_study: need at least 2 samples");
    for (const auto& a : algos) a.validate(sampling.k);

    const std::size_t dim = phi.dim();
    const std::size_t na = alphas.size();
    MeanAccumulator g(dim), agi(dim), h21(dim), h12(dim);
    // residual and measured accumulators indexed [alpha][algo]
    std::vector<std::vector<MeanAccumulator>> resid(na, std::vector<MeanAccumulator>(algos.size(), MeanAccumulator(dim)));
    std::vector<std::vector<MeanAccumulator>> meas(na, std::vector<MeanAccumulator>(algos.size(), MeanAccumulator(dim)));
    std::vector<bool> diverged(na, false);
    std::vector<Coefficients> coef;
    for (const auto& a : algos) coef.push_back(coefficients(a, sampling.k));

    struct SampleOut {
        SampleTerms terms;
        std::vector<std::optional<std::vector<ParamVector>>> measured;  // per alpha
    };

    for (std::size_t start = 0; start < n_samples; start += kChunk) {
        const std::size_t count = std::min(kChunk, n_samples - start);
        std::vector<SampleOut> chunk(count);
        parallel_for(count, sampling.threads, [&](std::size_t i) {
            const DrawnSample d = draw(sampler, sampling, rng, start + i);
            SampleOut& out = chunk[i];
            out.terms = sample_terms(phi, *d.task, d.batches);
            out.measured.resize(na);
            for (std::size_t ai = 0; ai < na; ++ai) {
                try {
                    out.measured[ai] = order_averaged(phi, *d.task, d.batches, algos, alphas[ai], sampling.average_orders);
                } catch (const NumericalError&) {
                    out.measured[ai].reset();
                }
            }
        });
        for (const auto& s : chunk) {
            g.add(s.terms.avg_grad);
            agi.add(s.terms.avg_grad_inner);
            h21.add(s.terms.h2g1);
            h12.add(s.terms.h1g2);
            for (std::size_t ai = 0; ai < na; ++ai) {
                if (!s.measured[ai]) {
                    diverged[ai] = true;
                    continue;
                }
                for (std::size_t a = 0; a < algos.size(); ++a) {
                    const ParamVector predicted =
                        axpy(coef[a].grad * s.terms.avg_grad, -coef[a].inner * alphas[ai], s.terms.avg_grad_inner);
                    resid[ai][a].add((*s.measured[ai])[a] - predicted);
                    meas[ai][a].add((*s.measured[ai])[a]);
                }
            }
        }
    }

    TaylorStudy out;
    out.terms = finish_terms(g, agi, h21, h12);
    for (std::size_t a = 0; a < algos.size(); ++a) {
        ResidualStudy study;
        study.algorithm = algos[a];
        study.k = sampling.k;
        std::vector<double> xs, ys;
        bool all_exact = true;
        for (std::size_t ai = 0; ai < na; ++ai) {
            ResidualPoint p;
            p.alpha = alphas[ai];
            if (diverged[ai]) {
                p.flag = PointFlag::diverged;
                study.points.push_back(p);
                continue;
            }
            p.n = resid[ai][a].n;
            p.residual_norm = norm2(resid[ai][a].mean());
            p.stderr_norm = norm2(resid[ai][a].stderr_vec());
            p.measured_norm = norm2(meas[ai][a].mean());
            if (max_curvature && alphas[ai] * *max_curvature >= 1.0) p.flag = PointFlag::unstable;
            all_exact = all_exact && p.residual_norm <= kExactTolerance * std::max(1.0, p.measured_norm);
            if (p.residual_norm > 0.0) {
                xs.push_back(p.alpha);
                ys.push_back(p.residual_norm);
            }
            study.points.push_back(p);
        }
        const std::size_t usable = static_cast<std::size_t>(
            std::count_if(study.points.begin(), study.points.end(), [](const ResidualPoint& p) { return p.flag != PointFlag::diverged; }));
        if (usable > 0 && all_exact) {
            study.flag = StudyFlag::exact;
        } else if (xs.size() >= 2) {
            std::tie(study.slope, study.slope_stderr) = loglog_slope(xs, ys);
            study.flag = StudyFlag::fit;
        }
        out.studies.push_back(std::move(study));
    }
    return out;
}

ProbeResult inner_product_probe(const ParamVector& before, const ParamVector& after, const TaskSampler& sampler,
                                const TaylorSampling& sampling, std::size_t n, const RngStream& rng) {
    sampling.validate();
    if (sampling.k < 2) throw ContractError("inner_product_probe: needs two batches per task");
    if (n == 0) throw ContractError("inner_product_probe: need at least one sample");
    struct Pair {
        double before = 0.0;
        double after = 0.0;
    };
    std::vector<Pair> values(n);
    parallel_for(n, sampling.threads, [&](std::size_t s) {
        const DrawnSample d = draw(sampler, sampling, rng, s);
        const auto l1 = d.task->loss(d.batches[0]);
        const auto l2 = d.task->loss(d.batches[1]);
        values[s].before = dot(l1->grad(before), l2->grad(before));
        values[s].after = dot(l1->grad(after), l2->grad(after));
    });
    ProbeResult out;
    out.n = n;
    double mean_diff = 0.0;
    for (const auto& v : values) {
        out.mean_before += v.before;
        out.mean_after += v.after;
        mean_diff += v.after - v.before;
    }
    const double nd = static_cast<double>(n);
    out.mean_before /= nd;
    out.mean_after /= nd;
    mean_diff /= nd;
    if (n > 1) {
        double ss = 0.0;
        for (const auto& v : values) ss += (v.after - v.before - mean_diff) * (v.after - v.before - mean_diff);
        out.diff_stderr = std::sqrt(ss / (nd - 1.0) / nd);
    }
    return out;
}

double GradientInnerProduct::value(const ParamVector& phi) const { return dot(first_.grad(phi), second_.grad(phi)); }

ParamVector GradientInnerProduct::grad(const ParamVector& phi) const {
    return first_.hvp(phi, second_.grad(phi)) + second_.hvp(phi, first_.grad(phi));
}

ParamVector GradientInnerProduct::hvp(const ParamVector&, const ParamVector&) const {
    throw ContractError("GradientInnerProduct: Hessian-vector products are not available");
}

double max_curvature(const ParamVector& phi, const TaskSampler& sampler, const TaylorSampling& sampling,
                     std::size_t n_batches, const RngStream& rng, std::size_t power_iters) {
    if (n_batches == 0 || power_iters == 0) throw ContractError("max_curvature: need at least one batch and iteration");
    std::vector<double> per(n_batches, 0.0);
    parallel_for(n_batches, sampling.threads, [&](std::size_t s) {
        const DrawnSample d = draw(sampler, sampling, rng, s);
        const auto loss = d.task->loss(d.batches[0]);
        RngStream r = rng.child(s).child(1);
        ParamVector v(phi.dim());
        for (std::size_t i = 0; i < v.dim(); ++i) v[i] = r.normal();
        v *= 1.0 / norm2(v);
        double lambda = 0.0;
        for (std::size_t it = 0; it < power_iters; ++it) {
            ParamVector hv = loss->hvp(phi, v);
            lambda = norm2(hv);
            if (lambda == 0.0) break;
            v = (1.0 / lambda) * hv;
        }
        per[s] = lambda;
    });
    return *std::max_element(per.begin(), per.end());
}

}  // namespace metalearn
