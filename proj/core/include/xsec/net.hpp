#pragma once

#include "xsec/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace xsec {

enum class Activation { identity, relu, sigmoid, tanh, softmax };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// One fully connected layer. weights is [out_dim x in_dim], bias [out_dim].
// softmax is only legal as the final layer's activation (checked by Model).
struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Tensor weights;
    Tensor bias;
    Activation activation = Activation::identity;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Tensor w, Tensor b, Activation act);
};

// Ordered dense layers; immutable once built. All query operations are pure
// and safe to call concurrently; training returns a new Model.
struct Model {
    std::vector<DenseLayer> layers;
    std::size_t n_classes = 0;

    Model() = default;
    explicit Model(std::vector<DenseLayer> layers_);

    std::size_t in_dim() const { return layers.front().in_dim; }
};

struct TrainConfig {
    std::size_t epochs = 100;
    double learning_rate = 0.1;   // must be in (0, 10]
    std::size_t batch_size = 32;  // must be <= dataset size
    std::uint64_t seed = 0;
};

// Fresh network with uniform +-1/sqrt(in_dim) weights, seeded.
// dims = {in, hidden..., out}; activations has dims.size()-1 entries.
Model make_mlp(const std::vector<std::size_t>& dims,
               const std::vector<Activation>& activations,
               std::uint64_t seed);

// Post-activation outputs of the final layer.
Tensor forward(const Model& model, const Tensor& x);

// Per-layer pre-activations and activations from one forward pass; what
// reference-based explanation methods walk backwards through.
struct LayerTrace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

LayerTrace forward_trace(const Model& model, const Tensor& x);

// act'(z) given z and a = act(z); relu subgradient at 0 is 0. Throws for
// softmax, which has no elementwise derivative.
double activation_derivative(Activation act, double z, double a);

// Final-layer outputs with a softmax head stripped: the class-score vector
// gradient methods differentiate. Equal to forward() for non-softmax heads.
Tensor logits(const Model& model, const Tensor& x);

double class_score(const Model& model, const Tensor& x, std::size_t class_idx);

// forward(model, x)[class_idx]: the class probability when the head is
// softmax, otherwise the model's raw output for that class.
double class_output(const Model& model, const Tensor& x, std::size_t class_idx);

std::size_t predict(const Model& model, const Tensor& x);

// d class_score / d x via reverse-mode chain rule. ReLU subgradient at 0 is 0.
Tensor input_gradient(const Model& model, const Tensor& x, std::size_t class_idx);

// Cross-entropy of softmax(logits(x)) against the label, and its input
// gradient (the PGD attack direction).
double cross_entropy(const Model& model, const Tensor& x, std::size_t label);
Tensor cross_entropy_input_gradient(const Model& model, const Tensor& x, std::size_t label);

// Mini-batch SGD on cross-entropy. Bit-identical output for identical
// (model, data, cfg). epochs == 0 returns the model unchanged.
Model train_sgd(const Model& model, const std::vector<Tensor>& xs,
                const std::vector<int>& ys, const TrainConfig& cfg);

// Redraw every weight/bias i.i.d. uniform in +-1/sqrt(in_dim); same
// architecture, deterministic per seed.
Model randomize_parameters(const Model& model, std::uint64_t seed);

// Versioned UTF-8 text format; floats as decimal with 17 significant digits,
// so save -> load -> save is byte-identical.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

std::string model_to_string(const Model& model);
Model model_from_string(const std::string& text);

struct ClassifierStats {
    double accuracy = 0.0;
    double precision = 0.0; // class 1 for binary, macro-averaged otherwise
    double recall = 0.0;
};

ClassifierStats evaluate_classifier(const Model& model, const std::vector<Tensor>& xs,
                                    const std::vector<int>& ys);

} // namespace xsec
