#pragma once

#include <cstdint>
#include <vector>

#include "seqcl/dataset.hpp"
#include "seqcl/ewc.hpp"
#include "seqcl/model.hpp"

namespace seqcl {

struct TrainParams {
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    int epochs_per_visit = 1;
};

/// Deterministic training environment: everything a sequencing decision is
/// evaluated against. Both the episode loop and the exhaustive oracle drive
/// visits through the same train_visit/consolidate_visit pair with
/// (iteration, node)-keyed streams, so a given sequence produces the same
/// model no matter which of the two realized it.
struct Environment {
    std::vector<DataNode> nodes;
    LabeledDataset global_test;
    Model initial_model;
    TrainParams train;
    EwcConfig ewc;
    std::uint64_t rng_root = 0;
    double epsilon = -0.05;
};

/// One visit: epochs_per_visit full passes over the node's train split in a
/// stream-keyed shuffle order, SGD updates in place. Returns the mean
/// training loss over all minibatches. Throws NumericError on divergence.
double train_visit(Model& model, const DataNode& node, std::uint64_t iteration,
                   const TrainParams& params, std::uint64_t rng_root,
                   const EwcState* ewc = nullptr);

/// Post-visit EWC anchor update with the matching (iteration, node) key.
EwcState consolidate_visit(const EwcState& state, const Model& model, const DataNode& node,
                           std::uint64_t iteration, std::uint64_t rng_root);

} // namespace seqcl
