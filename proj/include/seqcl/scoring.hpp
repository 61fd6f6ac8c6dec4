#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "seqcl/dataset.hpp"
#include "seqcl/linalg.hpp"
#include "seqcl/model.hpp"

namespace seqcl {

/// Binary activation pattern of one sample across every captured hidden
/// layer: bit = 1 iff the post-activation value is strictly > 0.
struct ActivationCode {
    std::vector<std::uint8_t> bits;

    std::size_t length() const { return bits.size(); }
};

/// Per-sample concatenated codes for a captured forward trace.
std::vector<ActivationCode> activation_codes(const ForwardTrace& trace);

/// Similarity kernel K[i][j] = N_A - hamming(c_i, c_j). Symmetric with
/// diagonal N_A.
Matrix build_kernel(const std::vector<ActivationCode>& codes);

/// One forward pass with capture (ReLU or AID per variant), codes, kernel,
/// then the jittered log-determinant. Deterministic for a fixed stream.
double nwot_score(const Model& model, const Matrix& minibatch, Activation variant,
                  RngStream& mask_stream, double jitter);

/// R^t: the per-node score set at one step.
struct ScoreSet {
    std::uint64_t step = 0;
    Activation variant = Activation::relu;
    std::map<int, double> scores; // node_id -> r_i^t
    std::size_t minibatch_size = 0;
    std::vector<int> skipped; // nodes with < 2 training samples

    /// Highest-scoring node; ties break toward the lowest node id.
    int argmax_node() const;
};

/// Score every node with minibatch stream (step, node, "score-sample") and
/// AID mask stream (step, node, "aid-mask"), both rooted at rng_root. The
/// keying makes the result independent of evaluation order; with parallel
/// set, nodes are scored concurrently and the ScoreSet is bit-identical.
ScoreSet score_all_nodes(const Model& model, const std::vector<DataNode>& nodes,
                         Activation variant, std::uint64_t step, std::size_t batch_size,
                         std::uint64_t rng_root, double jitter = 0.0, bool parallel = false);

} // namespace seqcl
