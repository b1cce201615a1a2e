#include "xsec/attrib.hpp"

#include "xsec/error.hpp"
#include "xsec/rng.hpp"
#include "xsec/tolerances.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

namespace xsec {

namespace {

// LIME perturbation scale, in input units (inputs here live on unit scales).
constexpr double kLimeNoiseScale = 0.3;

std::size_t resolve_target(const Model& model, const Tensor& x, std::optional<std::size_t> target) {
    if (target) {
        if (*target >= model.n_classes) {
            throw DimensionError("target class " + std::to_string(*target) + " out of range");
        }
        return *target;
    }
    return predict(model, x);
}

Attribution base_attribution(Method m, const Tensor& x, std::size_t target) {
    Attribution a;
    a.method = m;
    a.target_class = target;
    a.input_ref = x;
    return a;
}

void check_baseline_shape(const Tensor& b, std::size_t dim) {
    if (b.size() != dim) {
        throw DimensionError("baseline dimension " + std::to_string(b.size()) +
                             " does not match input dimension " + std::to_string(dim));
    }
}

double shapley_size_weight(std::size_t n, std::size_t s) {
    // s!(n-1-s)!/n! = 1/(n * C(n-1, s))
    double binom = 1.0;
    for (std::size_t i = 1; i <= s; ++i) {
        binom *= static_cast<double>(n - i) / static_cast<double>(i);
    }
    return 1.0 / (static_cast<double>(n) * binom);
}

Tensor masked_input(const Tensor& x, const Tensor& b, const std::vector<char>& keep) {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = keep[i] ? x[i] : b[i];
    return Tensor::vector(std::move(z));
}

} // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::gradient: return "gradient";
        case Method::gradient_x_input: return "gradient_x_input";
        case Method::integrated_gradients: return "ig";
        case Method::deeplift: return "deeplift";
        case Method::gradient_shap: return "gradient_shap";
        case Method::occlusion: return "occlusion";
        case Method::lime: return "lime";
        case Method::kernel_shap: return "kernel_shap";
        case Method::deepaid: return "deepaid";
    }
    return "gradient";
}

Method method_from_name(const std::string& name) {
    if (name == "gradient") return Method::gradient;
    if (name == "gradient_x_input" || name == "gxi") return Method::gradient_x_input;
    if (name == "ig" || name == "integrated_gradients") return Method::integrated_gradients;
    if (name == "deeplift") return Method::deeplift;
    if (name == "gradient_shap") return Method::gradient_shap;
    if (name == "occlusion") return Method::occlusion;
    if (name == "lime") return Method::lime;
    if (name == "kernel_shap" || name == "shap") return Method::kernel_shap;
    if (name == "deepaid") return Method::deepaid;
    throw ValidationError("unknown method '" + name + "'");
}

const std::vector<Method>& attribution_methods() {
    static const std::vector<Method> methods = {
        Method::gradient,      Method::gradient_x_input, Method::integrated_gradients,
        Method::deeplift,      Method::gradient_shap,    Method::occlusion,
        Method::lime,          Method::kernel_shap,
    };
    return methods;
}

Tensor resolve_baseline(const AttribConfig& cfg, std::size_t dim) {
    switch (cfg.baseline) {
        case AttribConfig::Baseline::zeros:
            return Tensor::zeros({dim});
        case AttribConfig::Baseline::train_mean:
        case AttribConfig::Baseline::custom:
            if (!cfg.baseline_tensor) {
                throw ValidationError("baseline kind requires a baseline tensor");
            }
            check_baseline_shape(*cfg.baseline_tensor, dim);
            return *cfg.baseline_tensor;
    }
    return Tensor::zeros({dim});
}

Attribution attr_gradient(const Model& model, const Tensor& x, std::optional<std::size_t> target) {
    const std::size_t cls = resolve_target(model, x, target);
    Attribution a = base_attribution(Method::gradient, x, cls);
    a.scores = input_gradient(model, x, cls);
    return a;
}

Attribution attr_gradient_x_input(const Model& model, const Tensor& x,
                                  std::optional<std::size_t> target) {
    const std::size_t cls = resolve_target(model, x, target);
    Attribution a = base_attribution(Method::gradient_x_input, x, cls);
    a.scores = input_gradient(model, x, cls);
    for (std::size_t i = 0; i < x.size(); ++i) a.scores[i] *= x[i];
    return a;
}

Attribution attr_integrated_gradients(const Model& model, const Tensor& x,
                                      std::optional<std::size_t> target, const AttribConfig& cfg) {
    if (cfg.ig_steps == 0) throw ValidationError("ig_steps must be >= 1");
    const std::size_t cls = resolve_target(model, x, target);
    const Tensor b = resolve_baseline(cfg, x.size());

    std::vector<double> acc(x.size(), 0.0);
    const std::size_t m = cfg.ig_steps;
    for (std::size_t k = 1; k <= m; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(m);
        std::vector<double> p(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) p[i] = b[i] + t * (x[i] - b[i]);
        const Tensor g = input_gradient(model, Tensor::vector(std::move(p)), cls);
        for (std::size_t i = 0; i < x.size(); ++i) acc[i] += g[i];
    }
    Attribution a = base_attribution(Method::integrated_gradients, x, cls);
    std::vector<double> scores(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        scores[i] = (x[i] - b[i]) * acc[i] / static_cast<double>(m);
        total += scores[i];
    }
    a.scores = Tensor::vector(std::move(scores));
    a.completeness_residual = total - (class_score(model, x, cls) - class_score(model, b, cls));
    a.baseline_ref = b;
    return a;
}

Attribution attr_deeplift(const Model& model, const Tensor& x, std::optional<std::size_t> target,
                          const AttribConfig& cfg) {
    const std::size_t cls = resolve_target(model, x, target);
    const Tensor b = resolve_baseline(cfg, x.size());

    const LayerTrace tx = forward_trace(model, x);
    const LayerTrace tb = forward_trace(model, b);

    // Rescale multiplier delta_act / delta_pre per unit of layer l, with the
    // derivative at x's pre-activation as the fallback on tiny deltas.
    auto rescale = [&](std::size_t l, std::size_t i) {
        const Activation act = model.layers[l].activation;
        const double dz = tx.pre[l][i] - tb.pre[l][i];
        if (std::abs(dz) < tol::kRescaleDelta) {
            return activation_derivative(act, tx.pre[l][i], tx.post[l][i]);
        }
        return (tx.post[l][i] - tb.post[l][i]) / dz;
    };

    const std::size_t last = model.layers.size() - 1;
    std::vector<double> mult(model.n_classes, 0.0);
    if (model.layers[last].activation == Activation::softmax) {
        mult[cls] = 1.0; // class score is the pre-softmax logit
    } else {
        mult[cls] = rescale(last, cls);
    }

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const DenseLayer& layer = model.layers[l];
        std::vector<double> m_in(layer.in_dim, 0.0);
        for (std::size_t i = 0; i < layer.out_dim; ++i) {
            const double mi = mult[i];
            if (mi == 0.0) continue;
            const double* wrow = layer.weights.data.data() + i * layer.in_dim;
            for (std::size_t j = 0; j < layer.in_dim; ++j) m_in[j] += wrow[j] * mi;
        }
        if (l > 0) {
            for (std::size_t j = 0; j < m_in.size(); ++j) m_in[j] *= rescale(l - 1, j);
        }
        mult = std::move(m_in);
    }

    Attribution a = base_attribution(Method::deeplift, x, cls);
    std::vector<double> scores(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) scores[i] = mult[i] * (x[i] - b[i]);
    a.scores = Tensor::vector(std::move(scores));
    a.baseline_ref = b;
    return a;
}

Attribution attr_gradient_shap(const Model& model, const Tensor& x,
                               std::optional<std::size_t> target,
                               const std::vector<Tensor>& baselines, const AttribConfig& cfg) {
    if (baselines.empty()) throw ValidationError("gradient_shap needs a non-empty baseline set");
    for (const Tensor& b : baselines) check_baseline_shape(b, x.size());
    const std::size_t cls = resolve_target(model, x, target);
    const std::size_t n = cfg.n_samples.value_or(20);
    if (n == 0) throw ValidationError("n_samples must be >= 1");

    std::vector<double> acc(x.size(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        Rng rng = Rng::derive(cfg.seed, s);
        const Tensor& b = baselines[rng.below(baselines.size())];
        const double t = rng.uniform();
        std::vector<double> point(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double noisy = x[i] + cfg.noise_sigma * rng.normal();
            point[i] = b[i] + t * (noisy - b[i]);
        }
        const Tensor g = input_gradient(model, Tensor::vector(std::move(point)), cls);
        for (std::size_t i = 0; i < x.size(); ++i) acc[i] += (x[i] - b[i]) * g[i];
    }

    Attribution a = base_attribution(Method::gradient_shap, x, cls);
    for (double& v : acc) v /= static_cast<double>(n);
    a.scores = Tensor::vector(std::move(acc));
    return a;
}

Attribution attr_occlusion(const Model& model, const Tensor& x, std::optional<std::size_t> target,
                           const AttribConfig& cfg) {
    if (cfg.occlusion_window == 0) throw ValidationError("occlusion_window must be >= 1");
    const std::size_t cls = resolve_target(model, x, target);
    const Tensor b = resolve_baseline(cfg, x.size());
    const double full = class_score(model, x, cls);

    std::vector<double> scores(x.size(), 0.0);
    for (std::size_t start = 0; start < x.size(); start += cfg.occlusion_window) {
        const std::size_t end = std::min(start + cfg.occlusion_window, x.size());
        Tensor z = x;
        for (std::size_t i = start; i < end; ++i) z[i] = b[i];
        const double diff = full - class_score(model, z, cls);
        for (std::size_t i = start; i < end; ++i) scores[i] = diff;
    }

    Attribution a = base_attribution(Method::occlusion, x, cls);
    a.scores = Tensor::vector(std::move(scores));
    a.baseline_ref = b;
    return a;
}

Attribution attr_lime(const Model& model, const Tensor& x, std::optional<std::size_t> target,
                      const AttribConfig& cfg) {
    const std::size_t cls = resolve_target(model, x, target);
    const std::size_t d = x.size();
    const std::size_t n = cfg.n_samples.value_or(1000);
    if (n == 0) throw ValidationError("n_samples must be >= 1");
    const double kw = cfg.kernel_width ? *cfg.kernel_width : 0.75 * std::sqrt(static_cast<double>(d));
    if (kw <= 0.0) throw ValidationError("kernel_width must be > 0");

    Eigen::MatrixXd design(n, d + 1);
    Eigen::VectorXd y(n);
    Eigen::VectorXd w(n);
    for (std::size_t s = 0; s < n; ++s) {
        Rng rng = Rng::derive(cfg.seed, s);
        std::vector<double> z(d);
        double dist2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double noise = kLimeNoiseScale * rng.normal();
            z[i] = x[i] + noise;
            dist2 += noise * noise;
        }
        const Tensor zt = Tensor::vector(z);
        design(static_cast<Eigen::Index>(s), 0) = 1.0;
        for (std::size_t i = 0; i < d; ++i) design(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i + 1)) = z[i];
        y(static_cast<Eigen::Index>(s)) = class_output(model, zt, cls);
        w(static_cast<Eigen::Index>(s)) = std::exp(-dist2 / (kw * kw));
    }

    if (w.sum() <= 0.0) throw DegenerateError("degenerate-neighborhood");

    // Weighted ridge normal equations; the intercept is not penalized.
    Eigen::MatrixXd m = design.transpose() * w.asDiagonal() * design;
    for (std::size_t i = 1; i <= d; ++i) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += tol::kRidgeLambda;
    }
    const Eigen::VectorXd rhs = design.transpose() * w.asDiagonal() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success) throw DegenerateError("degenerate-neighborhood");
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    if (!beta.allFinite()) throw DegenerateError("degenerate-neighborhood");

    Attribution a = base_attribution(Method::lime, x, cls);
    std::vector<double> scores(d);
    for (std::size_t i = 0; i < d; ++i) scores[i] = beta(static_cast<Eigen::Index>(i + 1));
    a.scores = Tensor::vector(std::move(scores));
    return a;
}

Attribution attr_kernel_shap(const Model& model, const Tensor& x,
                             std::optional<std::size_t> target, const AttribConfig& cfg,
                             bool exact) {
    const std::size_t cls = resolve_target(model, x, target);
    const std::size_t d = x.size();
    const Tensor b = resolve_baseline(cfg, d);

    auto value_of = [&](const std::vector<char>& keep) {
        return class_output(model, masked_input(x, b, keep), cls);
    };

    Attribution a = base_attribution(Method::kernel_shap, x, cls);
    a.baseline_ref = b;

    const double v_empty = value_of(std::vector<char>(d, 0));
    const double v_full = value_of(std::vector<char>(d, 1));
    const double delta = v_full - v_empty;

    if (d == 1) {
        a.scores = Tensor::vector({delta});
        return a;
    }

    if (exact) {
        if (d > 25) {
            throw ValidationError("kernel_shap exact mode supports dim <= 25; use sampling");
        }
        const std::uint32_t n_masks = 1u << d;
        std::vector<double> v(n_masks);
        std::vector<char> keep(d);
        for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
            for (std::size_t i = 0; i < d; ++i) keep[i] = (mask >> i) & 1u;
            v[mask] = value_of(keep);
        }
        std::vector<double> size_weight(d);
        for (std::size_t s = 0; s < d; ++s) size_weight[s] = shapley_size_weight(d, s);

        std::vector<double> phi(d, 0.0);
        for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
            const std::size_t s = static_cast<std::size_t>(__builtin_popcount(mask));
            for (std::size_t i = 0; i < d; ++i) {
                if (mask & (1u << i)) continue;
                phi[i] += size_weight[s] * (v[mask | (1u << i)] - v[mask]);
            }
        }
        a.scores = Tensor::vector(std::move(phi));
        return a;
    }

    const std::size_t n = cfg.n_samples.value_or(1000);
    if (n < 2) throw ValidationError("kernel_shap sampling needs n_samples >= 2");

    // Coalition sizes are drawn with probability proportional to the kernel
    // mass per size, C(d,k) * kern(k) ~ 1/(k(d-k)); each draw contributes the
    // coalition and its complement (same kernel weight by symmetry).
    std::vector<double> size_cdf(d - 1);
    double mass = 0.0;
    for (std::size_t k = 1; k <= d - 1; ++k) {
        mass += 1.0 / (static_cast<double>(k) * static_cast<double>(d - k));
        size_cdf[k - 1] = mass;
    }
    for (double& c : size_cdf) c /= mass;

    const std::size_t n_pairs = n / 2;
    const std::size_t rows = n_pairs * 2;
    Eigen::MatrixXd design(rows, d - 1);
    Eigen::VectorXd y(rows);

    std::vector<std::size_t> pool(d);
    for (std::size_t p = 0; p < n_pairs; ++p) {
        Rng rng = Rng::derive(cfg.seed, p);
        const double u = rng.uniform();
        std::size_t k = 1;
        while (k < d - 1 && u > size_cdf[k - 1]) ++k;

        // Uniform k-subset via partial Fisher-Yates.
        for (std::size_t i = 0; i < d; ++i) pool[i] = i;
        std::vector<char> keep(d, 0);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
            std::swap(pool[i], pool[j]);
            keep[pool[i]] = 1;
        }
        std::vector<char> comp(d);
        for (std::size_t i = 0; i < d; ++i) comp[i] = !keep[i];

        const std::vector<char>* sets[2] = {&keep, &comp};
        for (int half = 0; half < 2; ++half) {
            const std::vector<char>& z = *sets[half];
            const Eigen::Index row = static_cast<Eigen::Index>(2 * p + static_cast<std::size_t>(half));
            const double z_last = z[d - 1] ? 1.0 : 0.0;
            for (std::size_t i = 0; i + 1 < d; ++i) {
                design(row, static_cast<Eigen::Index>(i)) = (z[i] ? 1.0 : 0.0) - z_last;
            }
            y(row) = value_of(z) - v_empty - z_last * delta;
        }
    }

    Eigen::MatrixXd m = design.transpose() * design;
    const double eps = 1e-10 * (m.trace() / static_cast<double>(d - 1) + 1.0);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) += eps;
    const Eigen::VectorXd theta = m.ldlt().solve(design.transpose() * y);

    std::vector<double> phi(d, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < d; ++i) {
        phi[i] = theta(static_cast<Eigen::Index>(i));
        sum += phi[i];
    }
    phi[d - 1] = delta - sum; // efficiency by substitution
    a.scores = Tensor::vector(std::move(phi));
    return a;
}

Counterfactual counterfactual_explain(const Model& model, const Tensor& x,
                                      std::size_t class_benign, CfMode mode,
                                      const CfConfig& cfg) {
    if (class_benign >= model.n_classes) throw DimensionError("benign class out of range");
    if (predict(model, x) == class_benign) throw DegenerateError("nothing-to-explain");

    Counterfactual cf;
    cf.original = x;

    if (mode == CfMode::discrete) {
        if (cfg.vocab_size == 0 || x.size() % cfg.vocab_size != 0) {
            throw DimensionError("discrete mode needs vocab_size dividing the input length");
        }
        const std::size_t vocab = cfg.vocab_size;
        const std::size_t window = x.size() / vocab;

        Tensor cur = x;
        std::vector<char> available(window, 1);
        for (std::size_t pass = 0; pass < window && !cf.success; ++pass) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_pos = window;
            std::size_t best_event = 0;
            for (std::size_t p = 0; p < window; ++p) {
                if (!available[p]) continue;
                for (std::size_t e = 0; e < vocab; ++e) {
                    Tensor z = cur;
                    for (std::size_t i = 0; i < vocab; ++i) z[p * vocab + i] = 0.0;
                    z[p * vocab + e] = 1.0;
                    const double prob = class_output(model, z, class_benign);
                    if (prob > best) {
                        best = prob;
                        best_pos = p;
                        best_event = e;
                    }
                }
            }
            if (best_pos == window) break;
            available[best_pos] = 0;
            for (std::size_t i = 0; i < vocab; ++i) cur[best_pos * vocab + i] = 0.0;
            cur[best_pos * vocab + best_event] = 1.0;
            cf.success = predict(model, cur) == class_benign;
        }
        cf.reference = cur;
        for (std::size_t p = 0; p < window; ++p) {
            for (std::size_t i = 0; i < vocab; ++i) {
                if (cf.reference[p * vocab + i] != x[p * vocab + i]) {
                    cf.diff_positions.push_back(p);
                    break;
                }
            }
        }
        return cf;
    }

    // Continuous: ascend the benign logit with an L1 pull back toward x.
    Tensor cur = x;
    Tensor best = x;
    double best_out = class_output(model, x, class_benign);
    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        const Tensor g = input_gradient(model, cur, class_benign);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const double pull = cur[i] > x[i] ? 1.0 : (cur[i] < x[i] ? -1.0 : 0.0);
            cur[i] += cfg.step * (g[i] - cfg.l1_pull * pull);
        }
        const double out = class_output(model, cur, class_benign);
        if (out > best_out) {
            best_out = out;
            best = cur;
        }
        if (predict(model, cur) == class_benign) {
            cf.success = true;
            best = cur;
            break;
        }
    }
    cf.reference = best;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (cf.reference[i] != x[i]) cf.diff_positions.push_back(i);
    }
    return cf;
}

std::vector<std::pair<std::size_t, double>> rank_features(const Attribution& a, std::size_t k) {
    std::vector<std::pair<std::size_t, double>> ranked;
    ranked.reserve(a.scores.size());
    for (std::size_t i = 0; i < a.scores.size(); ++i) ranked.emplace_back(i, a.scores[i]);
    std::sort(ranked.begin(), ranked.end(), [](const auto& lhs, const auto& rhs) {
        if (lhs.second != rhs.second) return lhs.second > rhs.second;
        return lhs.first < rhs.first;
    });
    ranked.resize(std::min(k, ranked.size()));
    return ranked;
}

Explainer make_explainer(Method m, const AttribConfig& cfg, std::vector<Tensor> gradient_shap_baselines) {
    switch (m) {
        case Method::gradient:
            return [](const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                return attr_gradient(model, x, t);
            };
        case Method::gradient_x_input:
            return [](const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                return attr_gradient_x_input(model, x, t);
            };
        case Method::integrated_gradients:
            return [cfg](const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                return attr_integrated_gradients(model, x, t, cfg);
            };
        case Method::deeplift:
            return [cfg](const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                return attr_deeplift(model, x, t, cfg);
            };
        case Method::gradient_shap:
            return [cfg, baselines = std::move(gradient_shap_baselines)](
                       const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                if (!baselines.empty()) return attr_gradient_shap(model, x, t, baselines, cfg);
                return attr_gradient_shap(model, x, t, {Tensor::zeros({x.size()})}, cfg);
            };
        case Method::occlusion:
            return [cfg](const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                return attr_occlusion(model, x, t, cfg);
            };
        case Method::lime:
            return [cfg](const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                return attr_lime(model, x, t, cfg);
            };
        case Method::kernel_shap:
            return [cfg](const Model& model, const Tensor& x, std::optional<std::size_t> t) {
                return attr_kernel_shap(model, x, t, cfg, false);
            };
        case Method::deepaid:
            break;
    }
    throw ValidationError("deepaid is a counterfactual explainer, not an attribution method");
}

} // namespace xsec
