#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqcl/dataset.hpp"
#include "seqcl/matrix.hpp"
#include "seqcl/rng.hpp"

namespace seqcl {

struct EwcState; // regularizers module; see ewc.hpp

enum class Activation { relu, aid };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);

/// Interval dropout parameters: p1 drops entries in (-inf, 0), p2 drops
/// entries in [0, inf). With alt_positive_rule the probability for the
/// non-negative interval is read as a keep probability instead (an
/// alternative mask convention, off by default).
struct AidParams {
    double p1 = 0.5;
    double p2 = 0.2;
    bool alt_positive_rule = false;
};

struct ModelConfig {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden_dims{64, 64};
    std::size_t num_classes = 20;
    Activation activation = Activation::relu;
    AidParams aid;

    void validate() const;
};

struct Layer {
    Matrix weight;            // in x out
    std::vector<double> bias; // out
};

/// Feed-forward classifier. A plain value: updates return new models.
struct Model {
    ModelConfig config;
    std::vector<Layer> layers;
    std::uint64_t step_count = 0;

    std::size_t param_count() const;
};

/// He-style init: W ~ N(0, sqrt(2 / fan_in)), zero bias, keyed per layer.
Model init_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardTrace {
    Matrix logits; // batch x classes
    // One entry per hidden layer; populated only when capture is on.
    std::vector<Matrix> pre_activations;
    std::vector<Matrix> post_activations;
};

/// Forward pass driven by the model's configured activation. mask_stream is
/// required iff that activation is aid. Logits are identical with capture on
/// or off; capture only records the per-layer activations.
ForwardTrace forward(const Model& model, const Matrix& batch_x, bool capture,
                     RngStream* mask_stream = nullptr);

/// Forward pass with an explicit activation variant, used by the scorer to
/// swap ReLU for AID without touching the model.
ForwardTrace forward_with_activation(const Model& model, const Matrix& batch_x, bool capture,
                                     Activation variant, RngStream* mask_stream);

/// Interval dropout on a pre-activation matrix: entries < 0 are kept with
/// probability 1-p1, entries >= 0 with probability 1-p2; kept entries pass
/// through unscaled, dropped entries become 0.
Matrix aid_activate(const Matrix& pre, double p1, double p2, RngStream& stream);
Matrix aid_activate(const Matrix& pre, const AidParams& params, RngStream& stream);

using Gradients = std::vector<Layer>; // same shapes as Model::layers

struct LossGrads {
    double loss = 0.0;
    Gradients grads;
};

/// Mean softmax cross-entropy plus backprop gradients. Training always runs
/// the plain ReLU path; AID exists only inside scoring. When an EwcState
/// with anchors and lambda > 0 is supplied its quadratic penalty is added to
/// both loss and gradients.
LossGrads loss_and_grads(const Model& model, const Matrix& batch_x, const std::vector<int>& batch_y,
                         const EwcState* ewc = nullptr);

/// Per-sample gradients from an externally chosen dlogits (batch x classes),
/// reusing a captured ReLU forward trace. Backbone for both loss_and_grads
/// and the Fisher estimator.
Gradients backward_from_dlogits(const Model& model, const ForwardTrace& trace, const Matrix& batch_x,
                                const Matrix& dlogits);

/// theta <- theta - lr * g for every parameter; bumps step_count.
/// Throws NumericError on non-finite gradients.
Model sgd_step(const Model& model, const Gradients& grads, double learning_rate);

/// Fraction of argmax-correct predictions; logit ties break toward the
/// lowest class index. Throws DomainError on an empty dataset.
double evaluate(const Model& model, const LabeledDataset& dataset);

/// Softmax probabilities of the logits, row-wise, numerically stable.
Matrix softmax_rows(const Matrix& logits);

// Canonical flat parameter order: per layer, weight row-major then bias.
std::vector<double> flatten_params(const Model& model);
void unflatten_params(Model& model, const std::vector<double>& flat);
std::vector<double> flatten_grads(const Gradients& grads);
void add_flat_to_grads(Gradients& grads, const std::vector<double>& flat);

} // namespace seqcl
