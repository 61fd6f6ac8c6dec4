#include "seqcl/ewc.hpp"

#include <algorithm>
#include <cmath>

#include "seqcl/errors.hpp"

namespace seqcl {

std::string fisher_mode_name(FisherMode m) {
    return m == FisherMode::predictive ? "predictive" : "empirical";
}

FisherMode fisher_mode_from_name(const std::string& s) {
    if (s == "predictive") return FisherMode::predictive;
    if (s == "empirical") return FisherMode::empirical;
    throw ConfigError("unknown fisher mode '" + s + "' (expected predictive or empirical)");
}

void EwcConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("ewc: lambda must be >= 0");
    if (fisher_batches < 1) throw ConfigError("ewc: fisher_batches must be >= 1");
    if (fisher_batch_size < 1) throw ConfigError("ewc: fisher_batch_size must be >= 1");
}

EwcState EwcConfig::make_state() const {
    validate();
    EwcState s;
    s.lambda = lambda;
    s.fisher_batches = fisher_batches;
    s.fisher_batch_size = fisher_batch_size;
    s.fisher_mode = fisher_mode;
    return s;
}

std::vector<double> estimate_fisher(const Model& model, const DataNode& node, int batches,
                                    RngStream& stream, FisherMode mode, int batch_size) {
    if (batches < 1) throw DomainError("estimate_fisher: batches must be >= 1");
    if (node.train_sub.size() == 0) {
        throw DomainError("estimate_fisher: node " + std::to_string(node.node_id) + " is empty");
    }

    const std::size_t n_params = model.param_count();
    std::vector<double> fisher(n_params, 0.0);
    std::size_t n_samples = 0;

    const int classes = static_cast<int>(model.config.num_classes);
    for (int b = 0; b < batches; ++b) {
        auto [x, y] = sample_minibatch(node, static_cast<std::size_t>(batch_size), stream);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            Matrix xi(1, x.cols());
            std::copy(x.row(i).begin(), x.row(i).end(), xi.row(0).begin());
            const ForwardTrace trace = forward_with_activation(model, xi, true, Activation::relu,
                                                               nullptr);
            const Matrix probs = softmax_rows(trace.logits);
            ++n_samples;

            auto accumulate = [&](int label, double weight) {
                Matrix dlogits = probs;
                dlogits(0, static_cast<std::size_t>(label)) -= 1.0;
                const Gradients g = backward_from_dlogits(model, trace, xi, dlogits);
                const std::vector<double> flat = flatten_grads(g);
                for (std::size_t p = 0; p < n_params; ++p) fisher[p] += weight * flat[p] * flat[p];
            };

            if (mode == FisherMode::predictive) {
                for (int c = 0; c < classes; ++c) {
                    const double pc = probs(0, static_cast<std::size_t>(c));
                    if (pc > 0.0) accumulate(c, pc);
                }
            } else {
                accumulate(y[i], 1.0);
            }
        }
    }

    const double inv = 1.0 / static_cast<double>(n_samples);
    for (double& f : fisher) f *= inv;
    return fisher;
}

std::pair<double, std::vector<double>> ewc_penalty(const Model& model, const EwcState& state) {
    const std::vector<double> theta = flatten_params(model);
    double penalty = 0.0;
    std::vector<double> grads(theta.size(), 0.0);
    for (const auto& anchor : state.anchors) {
        if (anchor.theta_star.size() != theta.size() || anchor.fisher.size() != theta.size()) {
            throw ShapeError("ewc_penalty: anchor shape does not match the model");
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double diff = theta[i] - anchor.theta_star[i];
            penalty += anchor.fisher[i] * diff * diff;
            grads[i] += anchor.fisher[i] * diff;
        }
    }
    penalty *= 0.5 * state.lambda;
    for (double& g : grads) g *= state.lambda;
    return {penalty, std::move(grads)};
}

EwcState consolidate(const EwcState& state, const Model& model, const DataNode& node,
                     RngStream& stream) {
    EwcAnchor anchor;
    anchor.theta_star = flatten_params(model);
    anchor.fisher = estimate_fisher(model, node, state.fisher_batches, stream, state.fisher_mode,
                                    state.fisher_batch_size);
    anchor.source_node = node.node_id;

    EwcState out = state;
    auto it = std::find_if(out.anchors.begin(), out.anchors.end(),
                           [&](const EwcAnchor& a) { return a.source_node == node.node_id; });
    if (it != out.anchors.end()) {
        *it = std::move(anchor);
    } else {
        out.anchors.push_back(std::move(anchor));
    }
    return out;
}

} // namespace seqcl
