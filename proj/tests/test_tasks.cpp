#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "seqcl/dataset.hpp"
#include "seqcl/environment.hpp"
#include "seqcl/errors.hpp"
#include "test_helpers.hpp"

using namespace seqcl;
using namespace seqcl::testing;

namespace {

GlobalDataConfig small_data(int classes, int per_class, int dim, std::uint64_t seed) {
    GlobalDataConfig cfg;
    cfg.class_count = classes;
    cfg.samples_per_class = per_class;
    cfg.input_dim = dim;
    cfg.seed = seed;
    return cfg;
}

std::multiset<int> row_ids(const std::vector<std::vector<int>>& index_lists) {
    std::multiset<int> out;
    for (const auto& rows : index_lists) out.insert(rows.begin(), rows.end());
    return out;
}

} // namespace

TEST_SUITE("tasks") {

TEST_CASE("generate_global counts and balance") {
    const LabeledDataset d = generate_global(small_data(2, 10, 4, 1));
    CHECK(d.size() == 20);
    CHECK(std::count(d.labels.begin(), d.labels.end(), 0) == 10);
    CHECK(std::count(d.labels.begin(), d.labels.end(), 1) == 10);

    const LabeledDataset single = generate_global(small_data(5, 1, 4, 1));
    CHECK(single.size() == 5);
    CHECK(single.features.all_finite());
}

TEST_CASE("blob classes are separable enough to train on") {
    GlobalDataConfig cfg = small_data(4, 60, 8, 3);
    const LabeledDataset global = generate_global(cfg);

    // Mean separation is the margin the blobs are designed around: at least
    // 4 noise sigmas between every pair of class means.
    Matrix means(4, 8, 0.0);
    std::vector<int> counts(4, 0);
    for (std::size_t r = 0; r < global.size(); ++r) {
        const int c = global.labels[r];
        ++counts[static_cast<std::size_t>(c)];
        for (std::size_t d = 0; d < 8; ++d) means(c, d) += global.features(r, d);
    }
    for (int c = 0; c < 4; ++c) {
        for (std::size_t d = 0; d < 8; ++d) means(c, d) /= counts[static_cast<std::size_t>(c)];
    }
    for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) {
            double dist2 = 0.0;
            for (std::size_t d = 0; d < 8; ++d) {
                const double diff = means(a, d) - means(b, d);
                dist2 += diff * diff;
            }
            CHECK(std::sqrt(dist2) >= 4.0 * cfg.noise_std);
        }
    }

    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 1;
    spec.seed = 3;
    const PartitionResult part = partition(global, spec);

    ModelConfig mc;
    mc.input_dim = 8;
    mc.hidden_dims = {16};
    mc.num_classes = 4;
    Model model = init_model(mc, 3);
    TrainParams params{0.05, 16, 1};
    for (int visit = 0; visit < 10; ++visit) {
        train_visit(model, part.nodes[0], static_cast<std::uint64_t>(visit), params, 3);
    }
    CHECK(evaluate(model, part.nodes[0].test_sub) >= 0.9);
}

TEST_CASE("class_noniid: disjoint class sets, full coverage when counts force it") {
    const LabeledDataset global = generate_global(small_data(6, 12, 4, 5));
    PartitionSpec spec;
    spec.mode = PartitionMode::class_noniid;
    spec.n_nodes = 3;
    spec.classes_per_node = {2, 2};
    spec.seed = 5;
    const PartitionResult part = partition(global, spec);

    std::set<int> all;
    for (const auto& node : part.nodes) {
        CHECK(node.class_set.size() == 2);
        for (int c : node.class_set) {
            CHECK(!all.contains(c)); // pairwise disjoint
            all.insert(c);
        }
    }
    CHECK(all.size() == 6);
}

TEST_CASE("class_noniid honors scaled class-count bounds") {
    const LabeledDataset global = generate_global(small_data(20, 8, 4, 7));
    PartitionSpec spec;
    spec.mode = PartitionMode::class_noniid;
    spec.n_nodes = 4;
    spec.classes_per_node = {3, 6};
    spec.seed = 7;
    const PartitionResult part = partition(global, spec);
    for (const auto& node : part.nodes) {
        CHECK(node.class_set.size() >= 3);
        CHECK(node.class_set.size() <= 6);
    }
}

TEST_CASE("class_noniid infeasible spec names the violated bound") {
    const LabeledDataset global = generate_global(small_data(4, 5, 4, 7));
    PartitionSpec spec;
    spec.mode = PartitionMode::class_noniid;
    spec.n_nodes = 3;
    spec.classes_per_node = {2, 2};
    spec.seed = 7;
    CHECK_THROWS_AS(partition(global, spec), ConfigError);
}

TEST_CASE("iid with one node covers the whole global set") {
    const LabeledDataset global = generate_global(small_data(3, 10, 4, 9));
    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 1;
    spec.seed = 9;
    const PartitionResult part = partition(global, spec);

    std::multiset<int> ids = row_ids(part.train_indices);
    const std::multiset<int> test_ids = row_ids(part.test_indices);
    ids.insert(test_ids.begin(), test_ids.end());
    CHECK(ids.size() == global.size());
    std::multiset<int> expected;
    for (int i = 0; i < static_cast<int>(global.size()); ++i) expected.insert(i);
    CHECK(ids == expected);
}

TEST_CASE("partition invariants across random specs") {
    RngStream stream(21, 0, 0, "spec-fuzz");
    for (int trial = 0; trial < 30; ++trial) {
        const int classes = 4 + static_cast<int>(stream.uniform_below(8));
        const int per_class = 10 + static_cast<int>(stream.uniform_below(20));
        const LabeledDataset global =
            generate_global(small_data(classes, per_class, 6, 100 + trial));

        PartitionSpec spec;
        const auto mode = stream.uniform_below(3);
        spec.mode = mode == 0   ? PartitionMode::iid
                    : mode == 1 ? PartitionMode::class_noniid
                                : PartitionMode::domain_noniid;
        spec.n_nodes = 2 + static_cast<int>(stream.uniform_below(3));
        spec.test_fraction = 0.2 + 0.4 * stream.uniform();
        spec.seed = 1000 + trial;
        if (spec.mode == PartitionMode::class_noniid) {
            spec.classes_per_node = {1, classes};
        }
        const PartitionResult part = partition(global, spec);

        std::size_t total_test = 0;
        for (std::size_t i = 0; i < part.nodes.size(); ++i) {
            // Per node: train and test indices disjoint, union = allocation.
            std::set<int> train(part.train_indices[i].begin(), part.train_indices[i].end());
            std::set<int> test(part.test_indices[i].begin(), part.test_indices[i].end());
            for (int r : test) CHECK(!train.contains(r));
            CHECK(train.size() + test.size() ==
                  part.train_indices[i].size() + part.test_indices[i].size());
            CHECK(part.nodes[i].train_sub.size() == part.train_indices[i].size());
            CHECK(part.nodes[i].test_sub.size() == part.test_indices[i].size());
            total_test += test.size();

            if (spec.mode == PartitionMode::domain_noniid) {
                // Transforms must preserve labels.
                for (std::size_t r = 0; r < part.test_indices[i].size(); ++r) {
                    CHECK(part.nodes[i].test_sub.labels[r] ==
                          global.labels[static_cast<std::size_t>(part.test_indices[i][r])]);
                }
            }
        }
        // The centralized test set is the disjoint union of the test subs
        // and contains no training row.
        CHECK(part.global_test.size() == total_test);
        std::set<int> all_train;
        for (const auto& rows : part.train_indices) all_train.insert(rows.begin(), rows.end());
        for (const auto& rows : part.test_indices) {
            for (int r : rows) CHECK(!all_train.contains(r));
        }

        if (spec.mode == PartitionMode::class_noniid) {
            std::set<int> seen;
            for (const auto& node : part.nodes) {
                for (int c : node.class_set) {
                    CHECK(!seen.contains(c));
                    seen.insert(c);
                }
            }
        }

        // Purity: the same spec reproduces the same partition.
        const PartitionResult again = partition(global, spec);
        CHECK(again.train_indices == part.train_indices);
        CHECK(again.test_indices == part.test_indices);
        for (std::size_t i = 0; i < part.nodes.size(); ++i) {
            CHECK(again.nodes[i].train_sub.features.data() ==
                  part.nodes[i].train_sub.features.data());
        }
    }
}

TEST_CASE("domain transform zeroes the requested coordinate share") {
    const LabeledDataset global = generate_global(small_data(4, 20, 8, 11));
    PartitionSpec spec;
    spec.mode = PartitionMode::domain_noniid;
    spec.n_nodes = 2;
    spec.seed = 11;
    spec.domain_transforms = {{1.0, 0.0}, {0.0, 0.5}};
    const PartitionResult part = partition(global, spec);

    // Node 2: half of the coordinates are exactly zero on every sample.
    const Matrix& f = part.nodes[1].train_sub.features;
    int zero_cols = 0;
    for (std::size_t c = 0; c < f.cols(); ++c) {
        bool all_zero = true;
        for (std::size_t r = 0; r < f.rows(); ++r) all_zero &= f(r, c) == 0.0;
        zero_cols += all_zero;
    }
    CHECK(zero_cols == 4);
}

TEST_CASE("sample_minibatch is a permutation at full size and deterministic") {
    const LabeledDataset global = generate_global(small_data(2, 12, 4, 13));
    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 1;
    spec.seed = 13;
    const PartitionResult part = partition(global, spec);
    const DataNode& node = part.nodes[0];
    const std::size_t n = node.train_sub.size();

    RngStream s1(13, 0, 1, "score-sample");
    auto [x1, y1] = sample_minibatch(node, n, s1);
    CHECK(x1.rows() == n);
    std::multiset<double> drawn, original;
    for (std::size_t r = 0; r < n; ++r) {
        drawn.insert(x1(r, 0));
        original.insert(node.train_sub.features(r, 0));
    }
    CHECK(drawn == original);

    RngStream s2(13, 0, 1, "score-sample");
    auto [x2, y2] = sample_minibatch(node, n, s2);
    CHECK(x1.data() == x2.data());
    CHECK(y1 == y2);
}

TEST_CASE("sample_minibatch single draws match node class proportions") {
    const LabeledDataset global = generate_global(small_data(2, 60, 4, 17));
    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 1;
    spec.seed = 17;
    const PartitionResult part = partition(global, spec);
    const DataNode& node = part.nodes[0];

    double node_frac = 0.0;
    for (int y : node.train_sub.labels) node_frac += y == 0;
    node_frac /= static_cast<double>(node.train_sub.size());

    double drawn_frac = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        RngStream s(17, static_cast<std::uint64_t>(i), 1, "freq");
        auto [x, y] = sample_minibatch(node, 1, s);
        drawn_frac += y[0] == 0;
    }
    drawn_frac /= draws;
    CHECK(std::abs(drawn_frac - node_frac) < 0.02);
}

TEST_CASE("sample_minibatch rejects an empty node") {
    DataNode node;
    node.node_id = 1;
    node.train_sub.class_count = 2;
    RngStream s(1, 0, 1, "empty");
    CHECK_THROWS_AS(sample_minibatch(node, 4, s), DomainError);
}

} // TEST_SUITE
