#include "seqcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "seqcl/errors.hpp"

namespace seqcl {

std::string partition_mode_name(PartitionMode m) {
    switch (m) {
        case PartitionMode::iid: return "iid";
        case PartitionMode::class_noniid: return "class_noniid";
        case PartitionMode::domain_noniid: return "domain_noniid";
    }
    return "?";
}

PartitionMode partition_mode_from_name(const std::string& s) {
    if (s == "iid") return PartitionMode::iid;
    if (s == "class_noniid") return PartitionMode::class_noniid;
    if (s == "domain_noniid") return PartitionMode::domain_noniid;
    throw ConfigError("unknown partition mode '" + s + "'");
}

void LabeledDataset::validate() const {
    if (features.rows() != labels.size()) {
        throw ShapeError("dataset: feature rows != label count");
    }
    for (int y : labels) {
        if (y < 0 || y >= class_count) {
            throw DomainError("dataset: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(class_count) + ")");
        }
    }
}

void PartitionSpec::validate(int class_count) const {
    if (n_nodes < 1) throw ConfigError("partition: n_nodes must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("partition: test_fraction must lie strictly in (0, 1)");
    }
    if (samples_per_node.first < 0 || samples_per_node.second < 0 ||
        (samples_per_node.second != 0 && samples_per_node.first > samples_per_node.second)) {
        throw ConfigError("partition: invalid samples_per_node range");
    }
    if (mode == PartitionMode::class_noniid) {
        const auto [lo, hi] = classes_per_node;
        if (lo < 0 || (hi != 0 && lo > hi)) {
            throw ConfigError("partition: invalid classes_per_node range");
        }
        const int min_c = lo == 0 ? 1 : lo;
        if (static_cast<long long>(n_nodes) * min_c > class_count) {
            throw ConfigError("partition: class_noniid infeasible, n_nodes * min_classes = " +
                              std::to_string(static_cast<long long>(n_nodes) * min_c) +
                              " exceeds class_count = " + std::to_string(class_count));
        }
    }
    if (mode == PartitionMode::domain_noniid && !domain_transforms.empty() &&
        static_cast<int>(domain_transforms.size()) != n_nodes) {
        throw ConfigError("partition: domain_transforms must be empty or have one entry per node");
    }
    for (const auto& t : domain_transforms) {
        if (t.sparsify_fraction < 0.0 || t.sparsify_fraction > 1.0) {
            throw ConfigError("partition: sparsify_fraction outside [0, 1]");
        }
        if (t.bias_scale < 0.0) throw ConfigError("partition: bias_scale must be >= 0");
    }
}

void GlobalDataConfig::validate() const {
    if (class_count < 1 || samples_per_class < 1 || input_dim < 1) {
        throw ConfigError("data: class_count, samples_per_class and input_dim must be >= 1");
    }
    if (noise_std < 0.0) throw ConfigError("data: noise_std must be >= 0");
}

LabeledDataset generate_global(const GlobalDataConfig& cfg) {
    cfg.validate();
    LabeledDataset out;
    out.class_count = cfg.class_count;
    const std::size_t total =
        static_cast<std::size_t>(cfg.class_count) * static_cast<std::size_t>(cfg.samples_per_class);
    out.features = Matrix(total, cfg.input_dim);
    out.labels.resize(total);

    std::size_t row = 0;
    for (int c = 0; c < cfg.class_count; ++c) {
        RngStream mean_stream(cfg.seed, static_cast<std::uint64_t>(c), 0, "class-mean");
        std::vector<double> mean(cfg.input_dim);
        for (double& v : mean) v = cfg.mean_scale * mean_stream.normal();

        RngStream noise_stream(cfg.seed, static_cast<std::uint64_t>(c), 0, "class-noise");
        for (int s = 0; s < cfg.samples_per_class; ++s, ++row) {
            auto dst = out.features.row(row);
            for (int d = 0; d < cfg.input_dim; ++d) {
                dst[d] = mean[d] + noise_stream.normal(0.0, cfg.noise_std);
            }
            out.labels[row] = c;
        }
    }
    out.validate();
    return out;
}

namespace {

LabeledDataset gather(const LabeledDataset& global, const std::vector<int>& idx) {
    LabeledDataset out;
    out.class_count = global.class_count;
    out.features = Matrix(idx.size(), global.features.cols());
    out.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = global.features.row(static_cast<std::size_t>(idx[i]));
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels[i] = global.labels[static_cast<std::size_t>(idx[i])];
    }
    return out;
}

// Split a node's global row indices into (train, test). The shuffle is keyed
// on the node so the split is a pure function of the spec.
void sub_split(const std::vector<int>& rows, double test_fraction, std::uint64_t seed, int node_id,
               std::vector<int>& train, std::vector<int>& test) {
    RngStream stream(seed, static_cast<std::uint64_t>(node_id), 0, "sub-split");
    const auto perm = stream.permutation(rows.size());
    std::size_t n_test =
        static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(rows.size()) + 0.5));
    if (rows.size() >= 2) {
        n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
    } else {
        n_test = 0; // a singleton allocation keeps its sample for training
    }
    train.clear();
    test.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        (i < n_test ? test : train).push_back(rows[perm[i]]);
    }
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian draw.
Matrix random_rotation(std::size_t dim, std::uint64_t seed, int node_id) {
    RngStream stream(seed, static_cast<std::uint64_t>(node_id), 0, "domain-rotation");
    Matrix q = rand_normal(stream, dim, dim, 0.0, 1.0);
    for (std::size_t i = 0; i < dim; ++i) {
        auto qi = q.row(i);
        for (std::size_t j = 0; j < i; ++j) {
            const auto qj = q.row(j);
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) dot += qi[d] * qj[d];
            for (std::size_t d = 0; d < dim; ++d) qi[d] -= dot * qj[d];
        }
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) norm += qi[d] * qi[d];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // Degenerate draw; fall back to a unit basis vector.
            for (std::size_t d = 0; d < dim; ++d) qi[d] = (d == i % dim) ? 1.0 : 0.0;
        } else {
            for (std::size_t d = 0; d < dim; ++d) qi[d] /= norm;
        }
    }
    return q;
}

} // namespace

void apply_node_domain_transform(Matrix& features, const DomainTransform& t, std::uint64_t seed,
                                 int node_id) {
    const std::size_t dim = features.cols();
    const Matrix rot = random_rotation(dim, seed, node_id);

    RngStream bias_stream(seed, static_cast<std::uint64_t>(node_id), 0, "domain-bias");
    std::vector<double> bias(dim, 0.0);
    for (double& b : bias) b = t.bias_scale == 0.0 ? 0.0 : bias_stream.normal(0.0, t.bias_scale);

    std::vector<bool> zeroed(dim, false);
    const auto n_zero = static_cast<std::size_t>(
        std::floor(t.sparsify_fraction * static_cast<double>(dim) + 0.5));
    if (n_zero > 0) {
        RngStream sp_stream(seed, static_cast<std::uint64_t>(node_id), 0, "domain-sparsify");
        const auto perm = sp_stream.permutation(dim);
        for (std::size_t i = 0; i < std::min(n_zero, dim); ++i) zeroed[perm[i]] = true;
    }

    std::vector<double> tmp(dim);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        auto row = features.row(r);
        for (std::size_t i = 0; i < dim; ++i) {
            const auto q = rot.row(i);
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) acc += q[d] * row[d];
            tmp[i] = acc + bias[i];
        }
        for (std::size_t i = 0; i < dim; ++i) row[i] = zeroed[i] ? 0.0 : tmp[i];
    }
}

namespace {

// Spread `class_count` classes over nodes with per-node counts inside
// [min, max]; classes beyond N*max stay unassigned.
std::vector<int> class_counts_per_node(int class_count, int n_nodes, int min_c, int max_c) {
    std::vector<int> counts(static_cast<std::size_t>(n_nodes), min_c);
    int leftover = class_count - n_nodes * min_c;
    bool grew = true;
    while (leftover > 0 && grew) {
        grew = false;
        for (int i = 0; i < n_nodes && leftover > 0; ++i) {
            if (counts[static_cast<std::size_t>(i)] < max_c) {
                ++counts[static_cast<std::size_t>(i)];
                --leftover;
                grew = true;
            }
        }
    }
    return counts;
}

} // namespace

PartitionResult partition(const LabeledDataset& global, const PartitionSpec& spec) {
    global.validate();
    spec.validate(global.class_count);
    const int n = spec.n_nodes;
    const std::size_t dim = global.features.cols();

    // Per-node row allocations.
    std::vector<std::vector<int>> alloc(static_cast<std::size_t>(n));
    std::vector<std::optional<std::string>> tags(static_cast<std::size_t>(n));

    if (spec.mode == PartitionMode::class_noniid) {
        int min_c = spec.classes_per_node.first;
        int max_c = spec.classes_per_node.second;
        if (min_c == 0 && max_c == 0) {
            // Auto: spread all classes as evenly as possible.
            min_c = global.class_count / n;
            max_c = min_c + (global.class_count % n != 0 ? 1 : 0);
            if (min_c == 0) {
                throw ConfigError("partition: fewer classes than nodes in class_noniid mode");
            }
        } else if (max_c == 0) {
            max_c = global.class_count;
        }
        RngStream cls_stream(spec.seed, 0, 0, "class-shuffle");
        const auto class_perm = cls_stream.permutation(static_cast<std::size_t>(global.class_count));
        const auto counts = class_counts_per_node(global.class_count, n, min_c, max_c);

        std::vector<int> owner(static_cast<std::size_t>(global.class_count), -1);
        std::size_t next = 0;
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < counts[static_cast<std::size_t>(i)]; ++k) {
                owner[class_perm[next++]] = i;
            }
        }
        for (std::size_t r = 0; r < global.size(); ++r) {
            const int o = owner[static_cast<std::size_t>(global.labels[r])];
            if (o >= 0) alloc[static_cast<std::size_t>(o)].push_back(static_cast<int>(r));
        }
    } else {
        RngStream assign(spec.seed, 0, 0, "node-assign");
        for (std::size_t r = 0; r < global.size(); ++r) {
            alloc[assign.uniform_below(static_cast<std::uint64_t>(n))].push_back(
                static_cast<int>(r));
        }
    }

    // Optional per-node sample bounds.
    const auto [s_min, s_max] = spec.samples_per_node;
    for (int i = 0; i < n; ++i) {
        auto& rows = alloc[static_cast<std::size_t>(i)];
        if (s_max > 0 && rows.size() > static_cast<std::size_t>(s_max)) {
            RngStream sub(spec.seed, static_cast<std::uint64_t>(i + 1), 0, "node-subsample");
            const auto perm = sub.permutation(rows.size());
            std::vector<int> kept;
            kept.reserve(static_cast<std::size_t>(s_max));
            for (int k = 0; k < s_max; ++k) kept.push_back(rows[perm[static_cast<std::size_t>(k)]]);
            std::sort(kept.begin(), kept.end());
            rows = std::move(kept);
        }
        if (s_min > 0 && rows.size() < static_cast<std::size_t>(s_min)) {
            throw ConfigError("partition: node " + std::to_string(i + 1) + " received " +
                              std::to_string(rows.size()) + " samples, below samples_per_node min " +
                              std::to_string(s_min));
        }
    }

    PartitionResult out;
    out.nodes.resize(static_cast<std::size_t>(n));
    out.train_indices.resize(static_cast<std::size_t>(n));
    out.test_indices.resize(static_cast<std::size_t>(n));

    std::vector<LabeledDataset> test_parts;
    for (int i = 0; i < n; ++i) {
        const int node_id = i + 1;
        std::vector<int> train_rows, test_rows;
        sub_split(alloc[static_cast<std::size_t>(i)], spec.test_fraction, spec.seed, node_id,
                  train_rows, test_rows);

        DataNode node;
        node.node_id = node_id;
        node.train_sub = gather(global, train_rows);
        node.test_sub = gather(global, test_rows);

        if (spec.mode == PartitionMode::domain_noniid) {
            DomainTransform t;
            if (!spec.domain_transforms.empty()) {
                t = spec.domain_transforms[static_cast<std::size_t>(i)];
            }
            apply_node_domain_transform(node.train_sub.features, t, spec.seed, node_id);
            apply_node_domain_transform(node.test_sub.features, t, spec.seed, node_id);
            node.domain_tag = "domain-" + std::to_string(node_id);
        }

        for (int y : node.train_sub.labels) node.class_set.insert(y);
        for (int y : node.test_sub.labels) node.class_set.insert(y);

        out.train_indices[static_cast<std::size_t>(i)] = train_rows;
        out.test_indices[static_cast<std::size_t>(i)] = test_rows;
        test_parts.push_back(node.test_sub);
        out.nodes[static_cast<std::size_t>(i)] = std::move(node);
    }

    // Centralized test set: the union of every node's test split.
    std::size_t total_test = 0;
    for (const auto& p : test_parts) total_test += p.size();
    out.global_test.class_count = global.class_count;
    out.global_test.features = Matrix(total_test, dim);
    out.global_test.labels.reserve(total_test);
    std::size_t row = 0;
    for (const auto& p : test_parts) {
        for (std::size_t r = 0; r < p.size(); ++r, ++row) {
            const auto src = p.features.row(r);
            std::copy(src.begin(), src.end(), out.global_test.features.row(row).begin());
            out.global_test.labels.push_back(p.labels[r]);
        }
    }
    return out;
}

std::pair<Matrix, std::vector<int>> sample_minibatch(const DataNode& node, std::size_t size,
                                                     RngStream& stream) {
    const auto& train = node.train_sub;
    if (train.size() == 0) {
        throw DomainError("sample_minibatch: node " + std::to_string(node.node_id) +
                          " has no training samples");
    }
    if (size == 0) throw DomainError("sample_minibatch: size must be >= 1");

    std::vector<std::size_t> picks;
    picks.reserve(size);
    const std::size_t n = train.size();
    if (size <= n) {
        // Partial Fisher-Yates: first `size` entries of a uniform permutation.
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < size; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(stream.uniform_below(n - i));
            std::swap(idx[i], idx[j]);
            picks.push_back(idx[i]);
        }
    } else {
        for (std::size_t i = 0; i < size; ++i) {
            picks.push_back(static_cast<std::size_t>(stream.uniform_below(n)));
        }
    }

    Matrix x(size, train.features.cols());
    std::vector<int> y(size);
    for (std::size_t i = 0; i < size; ++i) {
        const auto src = train.features.row(picks[i]);
        std::copy(src.begin(), src.end(), x.row(i).begin());
        y[i] = train.labels[picks[i]];
    }
    return {std::move(x), std::move(y)};
}

} // namespace seqcl
