#pragma once

#include "xsec/net.hpp"
#include "xsec/tensor.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace xsec {

enum class Method {
    gradient,
    gradient_x_input,
    integrated_gradients,
    deeplift,
    gradient_shap,
    occlusion,
    lime,
    kernel_shap,
    deepaid,
};

const char* method_name(Method m);
Method method_from_name(const std::string& name);
// The eight feature-attribution methods (deepaid is counterfactual, not listed).
const std::vector<Method>& attribution_methods();

// Signed per-feature relevance for one explained input.
struct Attribution {
    Tensor scores;
    Method method = Method::gradient;
    std::size_t target_class = 0;
    Tensor input_ref;
    std::optional<Tensor> baseline_ref;
    // Sum(scores) - (score(x) - score(baseline)); integrated gradients only.
    std::optional<double> completeness_residual;
};

struct AttribConfig {
    enum class Baseline { zeros, train_mean, custom };

    Baseline baseline = Baseline::zeros;
    // Required for train_mean/custom; must match the input shape.
    std::optional<Tensor> baseline_tensor;
    std::size_t ig_steps = 50;
    // Monte Carlo budget; defaults to 1000 (lime, kernel_shap) or 20 (gradient_shap).
    std::optional<std::size_t> n_samples;
    // LIME exponential-kernel width; defaults to 0.75 * sqrt(dim).
    std::optional<double> kernel_width;
    std::size_t occlusion_window = 1;
    double noise_sigma = 0.09;
    std::uint64_t seed = 0;
};

Tensor resolve_baseline(const AttribConfig& cfg, std::size_t dim);

// Every method targets the model's predicted class when target is empty.

Attribution attr_gradient(const Model& model, const Tensor& x,
                          std::optional<std::size_t> target = {});

Attribution attr_gradient_x_input(const Model& model, const Tensor& x,
                                  std::optional<std::size_t> target = {});

// Right-Riemann path integral of gradients from the baseline to x over
// cfg.ig_steps points; the quadrature error is exposed as
// completeness_residual on the result.
Attribution attr_integrated_gradients(const Model& model, const Tensor& x,
                                      std::optional<std::size_t> target, const AttribConfig& cfg);

// Rescale-rule DeepLIFT against the resolved baseline. Satisfies
// summation-to-delta: sum(scores) == score(x) - score(baseline) up to fp.
Attribution attr_deeplift(const Model& model, const Tensor& x,
                          std::optional<std::size_t> target, const AttribConfig& cfg);

// Expected gradients over (baseline draw, path position, input noise) triples.
Attribution attr_gradient_shap(const Model& model, const Tensor& x,
                               std::optional<std::size_t> target,
                               const std::vector<Tensor>& baselines, const AttribConfig& cfg);

// Score drop from replacing non-overlapping feature windows with the baseline.
Attribution attr_occlusion(const Model& model, const Tensor& x,
                           std::optional<std::size_t> target, const AttribConfig& cfg);

// Local weighted ridge surrogate of the class output on Gaussian
// perturbations of x. Throws DegenerateError("degenerate-neighborhood") if
// the weighted system cannot be solved.
Attribution attr_lime(const Model& model, const Tensor& x,
                      std::optional<std::size_t> target, const AttribConfig& cfg);

// Shapley values of the class output with absent features set to the
// baseline. exact enumerates all coalitions (dim <= 25); sampling draws
// coalitions proportional to the Shapley kernel and solves a weighted
// least-squares system with the efficiency constraint substituted in, so
// sum(scores) == v(full) - v(empty) holds exactly either way.
Attribution attr_kernel_shap(const Model& model, const Tensor& x,
                             std::optional<std::size_t> target, const AttribConfig& cfg,
                             bool exact = false);

enum class CfMode { discrete, continuous };

struct CfConfig {
    // One-hot block width of sequence inputs; required in discrete mode.
    std::size_t vocab_size = 0;
    double step = 0.05;
    double l1_pull = 0.1;
    std::size_t max_iters = 500;
};

struct Counterfactual {
    Tensor original;
    Tensor reference;
    // Sequence positions (discrete) or feature indices (continuous) where
    // original and reference differ.
    std::vector<std::size_t> diff_positions;
    bool success = false;
};

// DeepAID-style search for the nearest input the model calls benign.
// Throws DegenerateError("nothing-to-explain") if x is already benign.
Counterfactual counterfactual_explain(const Model& model, const Tensor& x,
                                      std::size_t class_benign, CfMode mode,
                                      const CfConfig& cfg);

// Descending by signed score, ties broken by lower index; k clipped to dim.
std::vector<std::pair<std::size_t, double>> rank_features(const Attribution& a, std::size_t k);

using Explainer = std::function<Attribution(const Model&, const Tensor&, std::optional<std::size_t>)>;

// Bundles a method with its config (and baseline pool for gradient_shap)
// into a uniform callable for the metric layer.
Explainer make_explainer(Method m, const AttribConfig& cfg,
                         std::vector<Tensor> gradient_shap_baselines = {});

} // namespace xsec
