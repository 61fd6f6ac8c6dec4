#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqcl/dataset.hpp"
#include "seqcl/model.hpp"
#include "seqcl/rng.hpp"

namespace seqcl {

enum class FisherMode {
    predictive, // expectation over the model's own predicted label distribution
    empirical,  // dataset labels
};

std::string fisher_mode_name(FisherMode m);
FisherMode fisher_mode_from_name(const std::string& s);

struct EwcAnchor {
    std::vector<double> theta_star; // parameter snapshot, canonical flat order
    std::vector<double> fisher;     // diagonal Fisher, same order, entries >= 0
    int source_node = 0;
};

/// Elastic weight consolidation state: one anchor per distinct node visited,
/// replaced on re-visit. Loss penalty is (lambda/2) * sum_a sum_i
/// F_i (theta_i - theta*_i)^2.
struct EwcState {
    std::vector<EwcAnchor> anchors;
    double lambda = 50.0;
    int fisher_batches = 8;
    int fisher_batch_size = 32;
    FisherMode fisher_mode = FisherMode::predictive;
};

struct EwcConfig {
    bool enabled = false;
    double lambda = 50.0;
    int fisher_batches = 8;
    int fisher_batch_size = 32;
    FisherMode fisher_mode = FisherMode::predictive;

    void validate() const;
    EwcState make_state() const;
};

/// Diagonal Fisher estimate from `batches` minibatches of the node's train
/// split. In predictive mode the inner expectation over labels is taken
/// exactly (class-probability weighted), so the estimate is deterministic
/// given the sampled inputs; empirical mode uses the dataset labels instead.
std::vector<double> estimate_fisher(const Model& model, const DataNode& node, int batches,
                                    RngStream& stream,
                                    FisherMode mode = FisherMode::predictive,
                                    int batch_size = 32);

/// Quadratic anchoring penalty and its gradient (flat parameter order).
std::pair<double, std::vector<double>> ewc_penalty(const Model& model, const EwcState& state);

/// Snapshot the model after finishing a node visit: appends an anchor for
/// the node, or replaces the existing one on a re-visit.
EwcState consolidate(const EwcState& state, const Model& model, const DataNode& node,
                     RngStream& stream);

} // namespace seqcl
