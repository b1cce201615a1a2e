#include "xsec/net.hpp"

#include "xsec/error.hpp"
#include "xsec/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

namespace xsec {

namespace {

std::vector<double> apply_activation(Activation act, const std::vector<double>& z) {
    std::vector<double> a(z.size());
    switch (act) {
        case Activation::identity:
            a = z;
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = 1.0 / (1.0 + std::exp(-z[i]));
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::tanh(z[i]);
            break;
        case Activation::softmax: {
            const double m = *std::max_element(z.begin(), z.end());
            double sum = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                a[i] = std::exp(z[i] - m);
                sum += a[i];
            }
            for (double& v : a) v /= sum;
            break;
        }
    }
    return a;
}

struct ForwardTrace {
    std::vector<std::vector<double>> pre;  // z per layer
    std::vector<std::vector<double>> post; // act(z) per layer
};

void check_input(const Model& model, const Tensor& x) {
    if (model.layers.empty()) throw DimensionError("model has no layers");
    if (x.size() != model.in_dim()) {
        throw DimensionError("input dimension " + std::to_string(x.size()) +
                             " does not match model input " + std::to_string(model.in_dim()));
    }
    for (double v : x.data) {
        if (!std::isfinite(v)) throw ValidationError("non-finite input to forward pass");
    }
}

ForwardTrace run_forward(const Model& model, const Tensor& x) {
    check_input(model, x);
    ForwardTrace t;
    t.pre.reserve(model.layers.size());
    t.post.reserve(model.layers.size());
    const std::vector<double>* in = &x.data;
    for (const DenseLayer& layer : model.layers) {
        std::vector<double> z(layer.out_dim);
        for (std::size_t i = 0; i < layer.out_dim; ++i) {
            double s = layer.bias[i];
            const double* wrow = layer.weights.data.data() + i * layer.in_dim;
            for (std::size_t j = 0; j < layer.in_dim; ++j) s += wrow[j] * (*in)[j];
            z[i] = s;
        }
        t.post.push_back(apply_activation(layer.activation, z));
        t.pre.push_back(std::move(z));
        in = &t.post.back();
    }
    return t;
}

// Backpropagates d(target)/d(z_last) to d(target)/d(input).
std::vector<double> backprop_to_input(const Model& model, const ForwardTrace& t,
                                      std::vector<double> g_z) {
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const DenseLayer& layer = model.layers[l];
        std::vector<double> g_in(layer.in_dim, 0.0);
        for (std::size_t i = 0; i < layer.out_dim; ++i) {
            const double gi = g_z[i];
            if (gi == 0.0) continue;
            const double* wrow = layer.weights.data.data() + i * layer.in_dim;
            for (std::size_t j = 0; j < layer.in_dim; ++j) g_in[j] += wrow[j] * gi;
        }
        if (l > 0) {
            const DenseLayer& prev = model.layers[l - 1];
            for (std::size_t j = 0; j < g_in.size(); ++j) {
                g_in[j] *= activation_derivative(prev.activation, t.pre[l - 1][j], t.post[l - 1][j]);
            }
        }
        g_z = std::move(g_in);
    }
    return g_z;
}

std::vector<double> softmax_of(const std::vector<double>& z) {
    return apply_activation(Activation::softmax, z);
}

std::vector<double> logits_from_trace(const Model& model, const ForwardTrace& t) {
    const DenseLayer& last = model.layers.back();
    return last.activation == Activation::softmax ? t.pre.back() : t.post.back();
}

// Seed gradient d(logit vector . coeffs)/d(z_last) for the head convention:
// a softmax head differentiates the pre-activation, any other head the output.
std::vector<double> seed_from_logit_coeffs(const Model& model, const ForwardTrace& t,
                                           std::vector<double> coeffs) {
    const DenseLayer& last = model.layers.back();
    if (last.activation != Activation::softmax) {
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            coeffs[i] *= activation_derivative(last.activation, t.pre.back()[i], t.post.back()[i]);
        }
    }
    return coeffs;
}

struct ParamGradients {
    std::vector<std::vector<double>> dw;
    std::vector<std::vector<double>> db;
};

ParamGradients zero_gradients(const Model& model) {
    ParamGradients g;
    for (const DenseLayer& layer : model.layers) {
        g.dw.emplace_back(layer.weights.size(), 0.0);
        g.db.emplace_back(layer.bias.size(), 0.0);
    }
    return g;
}

// Accumulates d cross_entropy / d params for one sample into g.
void accumulate_ce_gradients(const Model& model, const Tensor& x, std::size_t label,
                             ParamGradients& g) {
    const ForwardTrace t = run_forward(model, x);
    std::vector<double> p = softmax_of(logits_from_trace(model, t));
    p[label] -= 1.0; // dL/dlogit
    std::vector<double> g_z = seed_from_logit_coeffs(model, t, std::move(p));

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const DenseLayer& layer = model.layers[l];
        const std::vector<double>& in = l == 0 ? x.data : t.post[l - 1];
        for (std::size_t i = 0; i < layer.out_dim; ++i) {
            const double gi = g_z[i];
            g.db[l][i] += gi;
            if (gi == 0.0) continue;
            double* grow = g.dw[l].data() + i * layer.in_dim;
            for (std::size_t j = 0; j < layer.in_dim; ++j) grow[j] += gi * in[j];
        }
        if (l == 0) break;
        std::vector<double> g_in(layer.in_dim, 0.0);
        for (std::size_t i = 0; i < layer.out_dim; ++i) {
            const double gi = g_z[i];
            if (gi == 0.0) continue;
            const double* wrow = layer.weights.data.data() + i * layer.in_dim;
            for (std::size_t j = 0; j < layer.in_dim; ++j) g_in[j] += wrow[j] * gi;
        }
        const DenseLayer& prev = model.layers[l - 1];
        for (std::size_t j = 0; j < g_in.size(); ++j) {
            g_in[j] *= activation_derivative(prev.activation, t.pre[l - 1][j], t.post[l - 1][j]);
        }
        g_z = std::move(g_in);
    }
}

void format_double(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_array(std::string& out, const std::vector<double>& values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        format_double(out, values[i]);
    }
    out += ']';
}

} // namespace

double activation_derivative(Activation act, double z, double a) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return a * (1.0 - a);
        case Activation::tanh: return 1.0 - a * a;
        case Activation::softmax: break; // handled jointly, never elementwise
    }
    throw ValidationError("softmax has no elementwise derivative");
}

LayerTrace forward_trace(const Model& model, const Tensor& x) {
    ForwardTrace t = run_forward(model, x);
    return LayerTrace{std::move(t.pre), std::move(t.post)};
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::softmax: return "softmax";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "softmax") return Activation::softmax;
    throw ParseError("unknown activation '" + name + "'");
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Tensor w, Tensor b, Activation act)
    : in_dim(in), out_dim(out), weights(std::move(w)), bias(std::move(b)), activation(act) {
    if (in == 0 || out == 0) throw DimensionError("layer dimensions must be positive");
    if (weights.shape != std::vector<std::size_t>{out, in}) {
        throw DimensionError("weight shape does not match [out_dim x in_dim]");
    }
    if (bias.shape != std::vector<std::size_t>{out}) {
        throw DimensionError("bias shape does not match out_dim");
    }
}

Model::Model(std::vector<DenseLayer> layers_) : layers(std::move(layers_)) {
    if (layers.empty()) throw DimensionError("model needs at least one layer");
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        if (layers[l].out_dim != layers[l + 1].in_dim) {
            throw DimensionError("layer " + std::to_string(l) + " out_dim " +
                                 std::to_string(layers[l].out_dim) + " does not chain into layer " +
                                 std::to_string(l + 1));
        }
        if (layers[l].activation == Activation::softmax) {
            throw ValidationError("softmax is only allowed on the final layer");
        }
    }
    n_classes = layers.back().out_dim;
}

Model make_mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
               std::uint64_t seed) {
    if (dims.size() < 2) throw DimensionError("make_mlp needs at least input and output dims");
    if (activations.size() != dims.size() - 1) {
        throw DimensionError("make_mlp needs one activation per layer");
    }
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in = dims[l], out = dims[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        std::vector<double> w(in * out), b(out);
        for (double& v : w) v = rng.uniform(-scale, scale);
        for (double& v : b) v = rng.uniform(-scale, scale);
        layers.emplace_back(in, out, Tensor::matrix(out, in, std::move(w)),
                            Tensor::vector(std::move(b)), activations[l]);
    }
    return Model(std::move(layers));
}

Tensor forward(const Model& model, const Tensor& x) {
    ForwardTrace t = run_forward(model, x);
    return Tensor::vector(std::move(t.post.back()));
}

Tensor logits(const Model& model, const Tensor& x) {
    ForwardTrace t = run_forward(model, x);
    return Tensor::vector(logits_from_trace(model, t));
}

double class_score(const Model& model, const Tensor& x, std::size_t class_idx) {
    if (class_idx >= model.n_classes) {
        throw DimensionError("class index " + std::to_string(class_idx) + " out of range");
    }
    return logits(model, x)[class_idx];
}

double class_output(const Model& model, const Tensor& x, std::size_t class_idx) {
    if (class_idx >= model.n_classes) {
        throw DimensionError("class index " + std::to_string(class_idx) + " out of range");
    }
    return forward(model, x)[class_idx];
}

std::size_t predict(const Model& model, const Tensor& x) {
    const Tensor out = forward(model, x);
    return static_cast<std::size_t>(
        std::max_element(out.data.begin(), out.data.end()) - out.data.begin());
}

Tensor input_gradient(const Model& model, const Tensor& x, std::size_t class_idx) {
    if (class_idx >= model.n_classes) {
        throw DimensionError("class index " + std::to_string(class_idx) + " out of range");
    }
    const ForwardTrace t = run_forward(model, x);
    std::vector<double> coeffs(model.n_classes, 0.0);
    coeffs[class_idx] = 1.0;
    std::vector<double> g = backprop_to_input(model, t, seed_from_logit_coeffs(model, t, std::move(coeffs)));
    return Tensor::vector(std::move(g));
}

double cross_entropy(const Model& model, const Tensor& x, std::size_t label) {
    if (label >= model.n_classes) throw ValidationError("label out of range");
    const std::vector<double> p = softmax_of(logits(model, x).data);
    return -std::log(std::max(p[label], 1e-300));
}

Tensor cross_entropy_input_gradient(const Model& model, const Tensor& x, std::size_t label) {
    if (label >= model.n_classes) throw ValidationError("label out of range");
    const ForwardTrace t = run_forward(model, x);
    std::vector<double> p = softmax_of(logits_from_trace(model, t));
    p[label] -= 1.0;
    std::vector<double> g = backprop_to_input(model, t, seed_from_logit_coeffs(model, t, std::move(p)));
    return Tensor::vector(std::move(g));
}

Model train_sgd(const Model& model, const std::vector<Tensor>& xs, const std::vector<int>& ys,
                const TrainConfig& cfg) {
    if (xs.empty()) throw ValidationError("empty training set");
    if (xs.size() != ys.size()) throw ValidationError("feature/label count mismatch");
    for (int y : ys) {
        if (y < 0 || static_cast<std::size_t>(y) >= model.n_classes) {
            throw ValidationError("label " + std::to_string(y) + " out of range");
        }
    }
    if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 10.0)) {
        throw ValidationError("learning_rate must be in (0, 10]");
    }
    if (cfg.batch_size == 0 || cfg.batch_size > xs.size()) {
        throw ValidationError("batch_size must be in [1, dataset size]");
    }

    Model m = model;
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            ParamGradients g = zero_gradients(m);
            for (std::size_t k = start; k < end; ++k) {
                accumulate_ce_gradients(m, xs[order[k]], static_cast<std::size_t>(ys[order[k]]), g);
            }
            const double step = cfg.learning_rate / static_cast<double>(end - start);
            for (std::size_t l = 0; l < m.layers.size(); ++l) {
                DenseLayer& layer = m.layers[l];
                for (std::size_t i = 0; i < layer.weights.size(); ++i) {
                    layer.weights[i] -= step * g.dw[l][i];
                }
                for (std::size_t i = 0; i < layer.bias.size(); ++i) {
                    layer.bias[i] -= step * g.db[l][i];
                }
            }
        }
    }
    return m;
}

Model randomize_parameters(const Model& model, std::uint64_t seed) {
    Rng rng(seed);
    Model m = model;
    for (DenseLayer& layer : m.layers) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
        for (double& v : layer.weights.data) v = rng.uniform(-scale, scale);
        for (double& v : layer.bias.data) v = rng.uniform(-scale, scale);
    }
    return m;
}

std::string model_to_string(const Model& model) {
    std::string out;
    out += "{\n";
    out += "  \"version\": 1,\n";
    out += "  \"n_classes\": " + std::to_string(model.n_classes) + ",\n";
    out += "  \"layers\": [\n";
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const DenseLayer& layer = model.layers[l];
        out += "    {\"in\": " + std::to_string(layer.in_dim) +
               ", \"out\": " + std::to_string(layer.out_dim) + ", \"activation\": \"" +
               activation_name(layer.activation) + "\", \"w\": ";
        append_array(out, layer.weights.data);
        out += ", \"b\": ";
        append_array(out, layer.bias.data);
        out += l + 1 < model.layers.size() ? "},\n" : "}\n";
    }
    out += "  ]\n";
    out += "}\n";
    return out;
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    f << model_to_string(model);
    if (!f) throw ValidationError("write to '" + path + "' failed");
}

Model model_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("model file: top level must be an object");
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        throw ParseError("model file: missing integer field 'version'");
    }
    const int version = j["version"].get<int>();
    if (version != 1) {
        throw ParseError("model file version " + std::to_string(version) + " unsupported; expected 1");
    }
    if (!j.contains("n_classes") || !j.contains("layers") || !j["layers"].is_array()) {
        throw ParseError("model file: missing 'n_classes' or 'layers' array");
    }

    std::vector<DenseLayer> layers;
    std::size_t idx = 0;
    for (const auto& lj : j["layers"]) {
        const std::string ctx = "layers[" + std::to_string(idx) + "]";
        for (const char* field : {"in", "out", "activation", "w", "b"}) {
            if (!lj.contains(field)) throw ParseError("model file: " + ctx + " missing '" + field + "'");
        }
        const std::size_t in = lj["in"].get<std::size_t>();
        const std::size_t out = lj["out"].get<std::size_t>();
        const Activation act = activation_from_name(lj["activation"].get<std::string>());
        std::vector<double> w, b;
        try {
            w = lj["w"].get<std::vector<double>>();
            b = lj["b"].get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw ParseError("model file: " + ctx + " has a non-numeric 'w' or 'b' entry");
        }
        if (w.size() != in * out) {
            throw ParseError("model file: " + ctx + ".w expected " + std::to_string(in * out) +
                             " values, got " + std::to_string(w.size()));
        }
        if (b.size() != out) {
            throw ParseError("model file: " + ctx + ".b expected " + std::to_string(out) +
                             " values, got " + std::to_string(b.size()));
        }
        layers.emplace_back(in, out, Tensor::matrix(out, in, std::move(w)),
                            Tensor::vector(std::move(b)), act);
        ++idx;
    }
    Model m(std::move(layers));
    if (j["n_classes"].get<std::size_t>() != m.n_classes) {
        throw ParseError("model file: n_classes does not match final layer out_dim");
    }
    return m;
}

Model load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open model file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return model_from_string(ss.str());
}

ClassifierStats evaluate_classifier(const Model& model, const std::vector<Tensor>& xs,
                                    const std::vector<int>& ys) {
    if (xs.empty() || xs.size() != ys.size()) throw ValidationError("bad evaluation set");
    const std::size_t k = model.n_classes;
    std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::size_t pred = predict(model, xs[i]);
        const std::size_t truth = static_cast<std::size_t>(ys[i]);
        if (pred == truth) {
            ++correct;
            ++tp[truth];
        } else {
            ++fp[pred];
            ++fn[truth];
        }
    }
    ClassifierStats s;
    s.accuracy = static_cast<double>(correct) / static_cast<double>(xs.size());
    auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    if (k == 2) {
        s.precision = ratio(tp[1], tp[1] + fp[1]);
        s.recall = ratio(tp[1], tp[1] + fn[1]);
    } else {
        for (std::size_t c = 0; c < k; ++c) {
            s.precision += ratio(tp[c], tp[c] + fp[c]);
            s.recall += ratio(tp[c], tp[c] + fn[c]);
        }
        s.precision /= static_cast<double>(k);
        s.recall /= static_cast<double>(k);
    }
    return s;
}

} // namespace xsec
