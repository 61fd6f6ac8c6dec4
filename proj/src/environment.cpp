#include "seqcl/environment.hpp"

#include <algorithm>

#include "seqcl/errors.hpp"

namespace seqcl {

double train_visit(Model& model, const DataNode& node, std::uint64_t iteration,
                   const TrainParams& params, std::uint64_t rng_root, const EwcState* ewc) {
    const auto& train = node.train_sub;
    if (train.size() == 0) {
        throw DomainError("train_visit: node " + std::to_string(node.node_id) + " is empty");
    }

    RngStream shuffle_stream(rng_root, iteration, static_cast<std::uint64_t>(node.node_id),
                             "train-shuffle");
    double loss_sum = 0.0;
    std::size_t sample_count = 0;

    for (int epoch = 0; epoch < params.epochs_per_visit; ++epoch) {
        const auto order = shuffle_stream.permutation(train.size());
        for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
            const std::size_t end = std::min(order.size(), start + params.batch_size);
            const std::size_t b = end - start;
            Matrix x(b, train.features.cols());
            std::vector<int> y(b);
            for (std::size_t i = 0; i < b; ++i) {
                const auto src = train.features.row(order[start + i]);
                std::copy(src.begin(), src.end(), x.row(i).begin());
                y[i] = train.labels[order[start + i]];
            }
            const LossGrads lg = loss_and_grads(model, x, y, ewc);
            model = sgd_step(model, lg.grads, params.learning_rate);
            loss_sum += lg.loss * static_cast<double>(b);
            sample_count += b;
        }
    }
    return loss_sum / static_cast<double>(sample_count);
}

EwcState consolidate_visit(const EwcState& state, const Model& model, const DataNode& node,
                           std::uint64_t iteration, std::uint64_t rng_root) {
    RngStream stream(rng_root, iteration, static_cast<std::uint64_t>(node.node_id),
                     "fisher-sample");
    return consolidate(state, model, node, stream);
}

} // namespace seqcl
