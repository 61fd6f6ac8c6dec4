#include "seqcl/scoring.hpp"

#include <future>
#include <string>

#include "seqcl/errors.hpp"

namespace seqcl {

std::vector<ActivationCode> activation_codes(const ForwardTrace& trace) {
    if (trace.post_activations.empty()) {
        throw StateError("activation_codes: trace has no captured activations");
    }
    const std::size_t batch = trace.post_activations.front().rows();
    std::size_t total_units = 0;
    for (const auto& layer : trace.post_activations) {
        if (layer.rows() != batch) {
            throw ShapeError("activation_codes: inconsistent batch size across layers");
        }
        total_units += layer.cols();
    }

    std::vector<ActivationCode> codes(batch);
    for (auto& c : codes) c.bits.reserve(total_units);
    for (const auto& layer : trace.post_activations) {
        for (std::size_t r = 0; r < batch; ++r) {
            const auto row = layer.row(r);
            for (double v : row) codes[r].bits.push_back(v > 0.0 ? 1 : 0);
        }
    }
    return codes;
}

Matrix build_kernel(const std::vector<ActivationCode>& codes) {
    if (codes.size() < 2) throw ShapeError("build_kernel: need at least 2 codes");
    const std::size_t len = codes.front().length();
    for (const auto& c : codes) {
        if (c.length() != len) throw ShapeError("build_kernel: mismatched code lengths");
    }

    const std::size_t n = codes.size();
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = static_cast<double>(len);
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t hamming = 0;
            const auto& a = codes[i].bits;
            const auto& b = codes[j].bits;
            for (std::size_t p = 0; p < len; ++p) hamming += a[p] != b[p];
            const double sim = static_cast<double>(len - hamming);
            k(i, j) = sim;
            k(j, i) = sim;
        }
    }
    return k;
}

double nwot_score(const Model& model, const Matrix& minibatch, Activation variant,
                  RngStream& mask_stream, double jitter) {
    if (minibatch.rows() < 2) throw DomainError("nwot_score: minibatch needs at least 2 rows");
    const ForwardTrace trace = forward_with_activation(model, minibatch, true, variant,
                                                       variant == Activation::aid ? &mask_stream
                                                                                  : nullptr);
    return log_det_psd(build_kernel(activation_codes(trace)), jitter);
}

int ScoreSet::argmax_node() const {
    if (scores.empty()) throw StateError("ScoreSet: empty score set has no argmax");
    int best = scores.begin()->first;
    double best_score = scores.begin()->second;
    for (const auto& [node, score] : scores) {
        if (score > best_score) { // strict: ties keep the lowest node id
            best = node;
            best_score = score;
        }
    }
    return best;
}

ScoreSet score_all_nodes(const Model& model, const std::vector<DataNode>& nodes,
                         Activation variant, std::uint64_t step, std::size_t batch_size,
                         std::uint64_t rng_root, double jitter, bool parallel) {
    if (batch_size < 2) throw DomainError("score_all_nodes: batch_size must be >= 2");

    ScoreSet out;
    out.step = step;
    out.variant = variant;
    out.minibatch_size = batch_size;

    auto score_one = [&](const DataNode& node) -> double {
        RngStream sample_stream(rng_root, step, static_cast<std::uint64_t>(node.node_id),
                                "score-sample");
        auto [x, y] = sample_minibatch(node, batch_size, sample_stream);
        RngStream mask_stream(rng_root, step, static_cast<std::uint64_t>(node.node_id),
                              "aid-mask");
        return nwot_score(model, x, variant, mask_stream, jitter);
    };

    if (parallel) {
        std::vector<std::future<std::pair<int, double>>> futures;
        for (const auto& node : nodes) {
            if (node.train_sub.size() < 2) {
                out.skipped.push_back(node.node_id);
                continue;
            }
            futures.push_back(std::async(std::launch::async, [&, &node = node] {
                return std::make_pair(node.node_id, score_one(node));
            }));
        }
        for (auto& f : futures) {
            const auto [id, score] = f.get();
            out.scores[id] = score;
        }
    } else {
        for (const auto& node : nodes) {
            if (node.train_sub.size() < 2) {
                out.skipped.push_back(node.node_id);
                continue;
            }
            out.scores[node.node_id] = score_one(node);
        }
    }
    return out;
}

} // namespace seqcl
