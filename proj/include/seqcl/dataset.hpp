#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seqcl/matrix.hpp"
#include "seqcl/rng.hpp"

namespace seqcl {

struct LabeledDataset {
    Matrix features;         // samples x input_dim
    std::vector<int> labels; // class indices, one per row
    int class_count = 0;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

/// One node of the network: a local train/test sub-split plus identity.
struct DataNode {
    int node_id = 0; // 1-based
    LabeledDataset train_sub;
    LabeledDataset test_sub;
    std::set<int> class_set;
    std::optional<std::string> domain_tag;
};

enum class PartitionMode { iid, class_noniid, domain_noniid };

std::string partition_mode_name(PartitionMode m);
PartitionMode partition_mode_from_name(const std::string& s);

/// Per-node feature-space shift for the domain_noniid mode. Every node gets
/// a fixed random orthogonal rotation; bias_scale sets the magnitude of a
/// per-node additive offset and sparsify_fraction zeroes that share of the
/// coordinates, mimicking a low-variance domain. Labels are untouched.
struct DomainTransform {
    double bias_scale = 1.0;
    double sparsify_fraction = 0.0;
};

struct PartitionSpec {
    PartitionMode mode = PartitionMode::iid;
    int n_nodes = 4;
    std::pair<int, int> classes_per_node{0, 0};  // class_noniid only; 0,0 = auto even split
    std::pair<int, int> samples_per_node{0, 0};  // 0 = unbounded
    double test_fraction = 0.3;
    std::vector<DomainTransform> domain_transforms; // empty = defaults, else one per node
    std::uint64_t seed = 0;

    void validate(int class_count) const;
};

struct GlobalDataConfig {
    int class_count = 20;
    int samples_per_class = 200;
    int input_dim = 16;
    std::uint64_t seed = 0;
    double mean_scale = 3.0; // class means ~ N(0, mean_scale^2) per coordinate
    double noise_std = 1.0;

    void validate() const;
};

/// Balanced Gaussian class blobs; one mean per class drawn once per seed.
LabeledDataset generate_global(const GlobalDataConfig& cfg);

struct PartitionResult {
    std::vector<DataNode> nodes;
    LabeledDataset global_test; // union of every node's test_sub, node order
    // Row indices into the global dataset, for the partition manifest.
    std::vector<std::vector<int>> train_indices;
    std::vector<std::vector<int>> test_indices;
};

/// Pure function of (global, spec): the same seed gives identical nodes.
PartitionResult partition(const LabeledDataset& global, const PartitionSpec& spec);

/// Applies one node's domain transform in place. The rotation, bias and
/// zeroed coordinate set are derived from (seed, node_id), so a partition
/// manifest can rebuild node features from raw global rows.
void apply_node_domain_transform(Matrix& features, const DomainTransform& t, std::uint64_t seed,
                                 int node_id);

/// Uniform minibatch from a node's train split: without replacement when
/// size <= |train_sub| (size == |train_sub| is a full permutation), with
/// replacement otherwise. Deterministic per stream.
std::pair<Matrix, std::vector<int>> sample_minibatch(const DataNode& node, std::size_t size,
                                                     RngStream& stream);

} // namespace seqcl
