#include "seqcl/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqcl/errors.hpp"
#include "seqcl/ewc.hpp"

namespace seqcl {

std::string activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "aid";
}

Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "aid") return Activation::aid;
    throw ConfigError("unknown activation '" + s + "' (expected relu or aid)");
}

void ModelConfig::validate() const {
    if (input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
    if (num_classes < 1) throw ConfigError("model: num_classes must be >= 1");
    if (hidden_dims.empty()) throw ConfigError("model: hidden_dims must be non-empty");
    for (std::size_t d : hidden_dims) {
        if (d < 1) throw ConfigError("model: hidden dims must be >= 1");
    }
    if (!(aid.p1 >= 0.0 && aid.p1 <= 1.0 && aid.p2 >= 0.0 && aid.p2 <= 1.0)) {
        throw ConfigError("model: aid probabilities must lie in [0, 1]");
    }
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;

    std::vector<std::size_t> dims;
    dims.push_back(config.input_dim);
    dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
    dims.push_back(config.num_classes);

    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        RngStream stream(seed, l, 0, "weight-init");
        const double std = std::sqrt(2.0 / static_cast<double>(dims[l]));
        Layer layer;
        layer.weight = rand_normal(stream, dims[l], dims[l + 1], 0.0, std);
        layer.bias.assign(dims[l + 1], 0.0);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

namespace {

Matrix affine(const Matrix& x, const Layer& layer) {
    Matrix z = matmul(x, layer.weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
    }
    return z;
}

Matrix relu(const Matrix& z) {
    Matrix out = z;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

ForwardTrace run_forward(const Model& m, const Matrix& x, bool capture, Activation act,
                         const AidParams& aid, RngStream* mask_stream) {
    if (x.cols() != m.config.input_dim) {
        throw ShapeError("forward: input has " + std::to_string(x.cols()) +
                         " features, model expects " + std::to_string(m.config.input_dim));
    }
    if (act == Activation::aid && mask_stream == nullptr) {
        throw ConfigError("forward: aid activation requires a mask stream");
    }

    ForwardTrace trace;
    const std::size_t n_hidden = m.layers.size() - 1;
    Matrix cur = x;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        Matrix pre = affine(cur, m.layers[l]);
        Matrix post = act == Activation::relu ? relu(pre) : aid_activate(pre, aid, *mask_stream);
        if (capture) {
            trace.pre_activations.push_back(pre);
            trace.post_activations.push_back(post);
        }
        cur = std::move(post);
    }
    trace.logits = affine(cur, m.layers.back());
    return trace;
}

} // namespace

ForwardTrace forward(const Model& model, const Matrix& batch_x, bool capture,
                     RngStream* mask_stream) {
    return run_forward(model, batch_x, capture, model.config.activation, model.config.aid,
                       mask_stream);
}

ForwardTrace forward_with_activation(const Model& model, const Matrix& batch_x, bool capture,
                                     Activation variant, RngStream* mask_stream) {
    return run_forward(model, batch_x, capture, variant, model.config.aid, mask_stream);
}

Matrix aid_activate(const Matrix& pre, const AidParams& params, RngStream& stream) {
    if (!(params.p1 >= 0.0 && params.p1 <= 1.0 && params.p2 >= 0.0 && params.p2 <= 1.0)) {
        throw DomainError("aid_activate: probabilities must lie in [0, 1]");
    }
    const double keep_neg = 1.0 - params.p1;
    const double keep_pos = params.alt_positive_rule ? params.p2 : 1.0 - params.p2;
    Matrix out = pre;
    for (double& v : out.data()) {
        const double keep_p = v < 0.0 ? keep_neg : keep_pos;
        if (!stream.bernoulli(keep_p)) v = 0.0;
    }
    return out;
}

Matrix aid_activate(const Matrix& pre, double p1, double p2, RngStream& stream) {
    return aid_activate(pre, AidParams{p1, p2, false}, stream);
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        auto row = p.row(r);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double z = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            z += v;
        }
        for (double& v : row) v /= z;
    }
    return p;
}

Gradients backward_from_dlogits(const Model& model, const ForwardTrace& trace, const Matrix& batch_x,
                                const Matrix& dlogits) {
    const std::size_t n_hidden = model.layers.size() - 1;
    if (trace.post_activations.size() != n_hidden) {
        throw StateError("backward: trace is missing captured activations");
    }

    Gradients grads(model.layers.size());
    Matrix dcur = dlogits;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const Matrix& input = l == 0 ? batch_x : trace.post_activations[l - 1];
        Layer& g = grads[l];
        g.weight = matmul_transpose_a(input, dcur);
        g.bias.assign(model.layers[l].bias.size(), 0.0);
        for (std::size_t r = 0; r < dcur.rows(); ++r) {
            const auto row = dcur.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) g.bias[c] += row[c];
        }
        if (l > 0) {
            Matrix dprev = matmul_transpose_b(dcur, model.layers[l].weight);
            const Matrix& pre = trace.pre_activations[l - 1];
            for (std::size_t i = 0; i < dprev.size(); ++i) {
                if (!(pre.data()[i] > 0.0)) dprev.data()[i] = 0.0;
            }
            dcur = std::move(dprev);
        }
    }
    return grads;
}

LossGrads loss_and_grads(const Model& model, const Matrix& batch_x, const std::vector<int>& batch_y,
                         const EwcState* ewc) {
    if (batch_x.rows() != batch_y.size()) {
        throw ShapeError("loss_and_grads: batch rows != label count");
    }
    const int classes = static_cast<int>(model.config.num_classes);
    for (int y : batch_y) {
        if (y < 0 || y >= classes) {
            throw DomainError("loss_and_grads: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
        }
    }

    // Training always uses the deterministic ReLU path.
    const ForwardTrace trace =
        run_forward(model, batch_x, true, Activation::relu, model.config.aid, nullptr);
    const std::size_t batch = batch_x.rows();

    Matrix dlogits = softmax_rows(trace.logits);
    double loss = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        auto row = dlogits.row(r);
        const auto y = static_cast<std::size_t>(batch_y[r]);
        loss -= std::log(std::max(row[y], 1e-300));
        row[y] -= 1.0;
    }
    loss /= static_cast<double>(batch);
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (double& v : dlogits.data()) v *= inv_b;

    LossGrads out;
    out.grads = backward_from_dlogits(model, trace, batch_x, dlogits);
    out.loss = loss;

    if (ewc != nullptr && ewc->lambda > 0.0 && !ewc->anchors.empty()) {
        const auto [penalty, pgrads] = ewc_penalty(model, *ewc);
        out.loss += penalty;
        add_flat_to_grads(out.grads, pgrads);
    }
    return out;
}

Model sgd_step(const Model& model, const Gradients& grads, double learning_rate) {
    if (grads.size() != model.layers.size()) {
        throw ShapeError("sgd_step: gradient layer count mismatch");
    }
    Model out = model;
    for (std::size_t l = 0; l < grads.size(); ++l) {
        const Layer& g = grads[l];
        Layer& p = out.layers[l];
        if (!g.weight.same_shape(p.weight) || g.bias.size() != p.bias.size()) {
            throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < g.weight.size(); ++i) {
            const double gv = g.weight.data()[i];
            if (!std::isfinite(gv)) throw NumericError("sgd_step: non-finite weight gradient");
            p.weight.data()[i] -= learning_rate * gv;
        }
        for (std::size_t i = 0; i < g.bias.size(); ++i) {
            const double gv = g.bias[i];
            if (!std::isfinite(gv)) throw NumericError("sgd_step: non-finite bias gradient");
            p.bias[i] -= learning_rate * gv;
        }
    }
    ++out.step_count;
    return out;
}

double evaluate(const Model& model, const LabeledDataset& dataset) {
    if (dataset.size() == 0) throw DomainError("evaluate: dataset is empty");
    const ForwardTrace trace =
        run_forward(model, dataset.features, false, Activation::relu, model.config.aid, nullptr);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const auto row = trace.logits.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c] > row[best]) best = c; // strict: ties keep the lowest index
        }
        if (static_cast<int>(best) == dataset.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::vector<double> flatten_params(const Model& model) {
    std::vector<double> flat;
    flat.reserve(model.param_count());
    for (const auto& l : model.layers) {
        flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void unflatten_params(Model& model, const std::vector<double>& flat) {
    if (flat.size() != model.param_count()) {
        throw ShapeError("unflatten_params: expected " + std::to_string(model.param_count()) +
                         " values, got " + std::to_string(flat.size()));
    }
    std::size_t pos = 0;
    for (auto& l : model.layers) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                  flat.begin() + static_cast<std::ptrdiff_t>(pos + l.weight.size()),
                  l.weight.data().begin());
        pos += l.weight.size();
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                  flat.begin() + static_cast<std::ptrdiff_t>(pos + l.bias.size()), l.bias.begin());
        pos += l.bias.size();
    }
}

std::vector<double> flatten_grads(const Gradients& grads) {
    std::vector<double> flat;
    for (const auto& l : grads) {
        flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void add_flat_to_grads(Gradients& grads, const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (auto& l : grads) {
        for (double& v : l.weight.data()) v += flat.at(pos++);
        for (double& v : l.bias) v += flat.at(pos++);
    }
    if (pos != flat.size()) throw ShapeError("add_flat_to_grads: size mismatch");
}

} // namespace seqcl
