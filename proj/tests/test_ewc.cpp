#include <doctest.h>

#include <cmath>

#include "seqcl/dataset.hpp"
#include "seqcl/environment.hpp"
#include "seqcl/errors.hpp"
#include "seqcl/ewc.hpp"
#include "test_helpers.hpp"

using namespace seqcl;
using namespace seqcl::testing;

namespace {

ModelConfig logistic_config() {
    ModelConfig c;
    c.input_dim = 1;
    c.hidden_dims = {1};
    c.num_classes = 2;
    return c;
}

DataNode node_from(const Matrix& features, const std::vector<int>& labels, int classes,
                   int node_id = 1) {
    DataNode node;
    node.node_id = node_id;
    node.train_sub.features = features;
    node.train_sub.labels = labels;
    node.train_sub.class_count = classes;
    node.test_sub = node.train_sub;
    for (int y : labels) node.class_set.insert(y);
    return node;
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

} // namespace

TEST_SUITE("ewc") {

TEST_CASE("penalty arithmetic on a hand fixture") {
    // 6 parameters; fisher support on the first two only.
    const Model anchor_model = make_model(logistic_config(), {1.0, 0.0, 0.5, -0.5, 0.0, 0.0});
    EwcState state;
    state.lambda = 2.0;
    EwcAnchor anchor;
    anchor.theta_star = flatten_params(anchor_model);
    anchor.fisher = {1.0, 2.0, 0.0, 0.0, 0.0, 0.0};
    anchor.source_node = 1;
    state.anchors.push_back(anchor);

    // theta - theta* = [1, 1, 0, 0, 0, 0].
    Model moved = anchor_model;
    std::vector<double> theta = flatten_params(moved);
    theta[0] += 1.0;
    theta[1] += 1.0;
    unflatten_params(moved, theta);

    const auto [penalty, grads] = ewc_penalty(moved, state);
    CHECK(close(penalty, 3.0, 1e-15)); // (2/2) * (1*1 + 2*1)
    CHECK(close(grads[0], 2.0, 1e-15));
    CHECK(close(grads[1], 4.0, 1e-15));
    CHECK(grads[2] == 0.0);

    const auto [zero, zgrads] = ewc_penalty(anchor_model, state);
    CHECK(zero == 0.0);
    for (double g : zgrads) CHECK(g == 0.0);
}

TEST_CASE("penalty gradient matches central finite differences") {
    RngStream stream(81, 0, 0, "ewc-fd");
    for (int trial = 0; trial < 20; ++trial) {
        ModelConfig cfg;
        cfg.input_dim = 3;
        cfg.hidden_dims = {2};
        cfg.num_classes = 2;
        Model m = init_model(cfg, 300 + static_cast<std::uint64_t>(trial));

        EwcState state;
        state.lambda = 0.5 + stream.uniform();
        for (int a = 0; a < 2; ++a) {
            EwcAnchor anchor;
            const Model other = init_model(cfg, 400 + static_cast<std::uint64_t>(10 * trial + a));
            anchor.theta_star = flatten_params(other);
            anchor.fisher.resize(anchor.theta_star.size());
            for (double& f : anchor.fisher) f = stream.uniform(); // >= 0
            anchor.source_node = a + 1;
            state.anchors.push_back(anchor);
        }

        const auto [penalty, grads] = ewc_penalty(m, state);
        std::vector<double> theta = flatten_params(m);
        const double h = 1e-4;
        double worst = 0.0;
        for (std::size_t p = 0; p < theta.size(); ++p) {
            const double saved = theta[p];
            theta[p] = saved + h;
            unflatten_params(m, theta);
            const double lp = ewc_penalty(m, state).first;
            theta[p] = saved - h;
            unflatten_params(m, theta);
            const double lm = ewc_penalty(m, state).first;
            theta[p] = saved;
            unflatten_params(m, theta);
            worst = std::max(worst, scaled_err((lp - lm) / (2 * h), grads[p]));
        }
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("fisher is zero on parameters that cannot move the logits") {
    // Hidden unit 2's outgoing weights are zero, so its incoming weights and
    // bias have structurally zero gradients.
    ModelConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {2};
    cfg.num_classes = 2;
    // Flat order: W1 (2x2 row-major), b1 (2), W2 (2x2), b2 (2).
    const std::vector<double> params = {0.5, 0.7, -0.3, 0.4, 0.0, 0.0,
                                        1.0, -1.0, 0.0, 0.0, 0.0, 0.0};
    const Model m = make_model(cfg, params);

    RngStream data_stream(83, 0, 0, "fisher-frozen");
    const Matrix x = rand_normal(data_stream, 12, 2, 0.5, 1.0);
    std::vector<int> y(12, 0);
    const DataNode node = node_from(x, y, 2);

    RngStream fisher_stream(83, 0, 1, "fisher-sample");
    const auto fisher = estimate_fisher(m, node, 2, fisher_stream, FisherMode::predictive, 6);
    for (double f : fisher) CHECK(f >= 0.0);
    // Incoming weights of unit 2 sit at flat indices 1 and 3, its bias at 5.
    CHECK(fisher[1] == 0.0);
    CHECK(fisher[3] == 0.0);
    CHECK(fisher[5] == 0.0);
}

TEST_CASE("fisher matches the closed form for a 1-D logistic model") {
    // h = relu(1 * x) = x for x > 0; logits = [w*h, 0]; p = sigmoid(w*x).
    // Fisher for w is p(1-p)x^2.
    const double w = 0.6;
    const double x = 1.7;
    const Model m = make_model(logistic_config(), {1.0, 0.0, w, 0.0, 0.0, 0.0});

    const DataNode node = node_from(Matrix(1, 1, x), {0}, 2);
    RngStream stream(87, 0, 1, "fisher-sample");
    const auto fisher = estimate_fisher(m, node, 1, stream, FisherMode::predictive, 1);

    const double p = 1.0 / (1.0 + std::exp(-w * x));
    const double expected = p * (1.0 - p) * x * x;
    // Flat index 2 is W2[0][0] = w.
    CHECK(close(fisher[2], expected, 1e-6));
}

TEST_CASE("doubling fisher batches stays inside the re-seeding envelope") {
    GlobalDataConfig data;
    data.class_count = 3;
    data.samples_per_class = 40;
    data.input_dim = 4;
    data.seed = 91;
    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 1;
    spec.seed = 91;
    const auto part = partition(generate_global(data), spec);

    ModelConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden_dims = {6};
    cfg.num_classes = 3;
    const Model m = init_model(cfg, 91);

    std::vector<std::vector<double>> f8;
    std::vector<std::vector<double>> f16;
    for (int s = 0; s < 5; ++s) {
        RngStream s8(91, static_cast<std::uint64_t>(s), 1, "fisher-a");
        RngStream s16(91, static_cast<std::uint64_t>(s), 1, "fisher-b");
        f8.push_back(estimate_fisher(m, part.nodes[0], 8, s8, FisherMode::predictive, 16));
        f16.push_back(estimate_fisher(m, part.nodes[0], 16, s16, FisherMode::predictive, 16));
    }

    // Seed-to-seed spread of the 8-batch estimate bounds the Monte Carlo
    // error; doubling the batch count must stay within a few of those.
    double seed_spread = 0.0;
    int pairs = 0;
    for (int a = 0; a < 5; ++a) {
        for (int b = a + 1; b < 5; ++b) {
            seed_spread += l2(f8[static_cast<std::size_t>(a)], f8[static_cast<std::size_t>(b)]);
            ++pairs;
        }
    }
    seed_spread /= pairs;
    for (int s = 0; s < 5; ++s) {
        CHECK(l2(f16[static_cast<std::size_t>(s)], f8[static_cast<std::size_t>(s)]) <=
              4.0 * seed_spread);
    }
}

TEST_CASE("consolidate keeps one anchor per node, newest snapshot wins") {
    GlobalDataConfig data;
    data.class_count = 2;
    data.samples_per_class = 20;
    data.input_dim = 4;
    data.seed = 93;
    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 3;
    spec.seed = 93;
    const auto part = partition(generate_global(data), spec);

    ModelConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden_dims = {4};
    cfg.num_classes = 2;
    Model m = init_model(cfg, 93);

    EwcConfig ewc_cfg;
    ewc_cfg.fisher_batches = 1;
    ewc_cfg.fisher_batch_size = 8;
    EwcState state = ewc_cfg.make_state();

    RngStream s1(93, 0, 1, "fisher-sample");
    state = consolidate(state, m, part.nodes[0], s1);
    CHECK(state.anchors.size() == 1);

    // Re-visit node 1 with changed parameters: still one anchor, new theta*.
    std::vector<double> theta = flatten_params(m);
    theta[0] += 1.0;
    unflatten_params(m, theta);
    RngStream s2(93, 1, 1, "fisher-sample");
    state = consolidate(state, m, part.nodes[0], s2);
    CHECK(state.anchors.size() == 1);
    CHECK(state.anchors[0].theta_star == theta);

    RngStream s3(93, 2, 2, "fisher-sample");
    state = consolidate(state, m, part.nodes[1], s3);
    CHECK(state.anchors.size() == 2);
}

TEST_CASE("a lambda of zero leaves training bit-identical") {
    GlobalDataConfig data;
    data.class_count = 2;
    data.samples_per_class = 30;
    data.input_dim = 4;
    data.seed = 95;
    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 1;
    spec.seed = 95;
    const auto part = partition(generate_global(data), spec);

    ModelConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden_dims = {4};
    cfg.num_classes = 2;
    const Model m0 = init_model(cfg, 95);

    EwcConfig ewc_cfg;
    ewc_cfg.lambda = 0.0;
    ewc_cfg.fisher_batches = 1;
    EwcState state = ewc_cfg.make_state();
    RngStream fs(95, 0, 1, "fisher-sample");
    state = consolidate(state, m0, part.nodes[0], fs);

    Model plain = m0;
    Model with_ewc = m0;
    const TrainParams params{0.05, 8, 1};
    train_visit(plain, part.nodes[0], 1, params, 95, nullptr);
    train_visit(with_ewc, part.nodes[0], 1, params, 95, &state);
    CHECK(flatten_params(plain) == flatten_params(with_ewc));
}

TEST_CASE("zero fisher leaves loss and gradients unchanged") {
    ModelConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dims = {3};
    cfg.num_classes = 2;
    const Model m = init_model(cfg, 97);
    RngStream ds(97, 0, 0, "zf");
    const Matrix x = rand_normal(ds, 6, 3, 0.0, 1.0);
    const std::vector<int> y{0, 1, 0, 1, 0, 1};

    EwcState state;
    state.lambda = 50.0;
    EwcAnchor anchor;
    anchor.theta_star = flatten_params(init_model(cfg, 98));
    anchor.fisher.assign(anchor.theta_star.size(), 0.0);
    anchor.source_node = 1;
    state.anchors.push_back(anchor);

    const LossGrads base = loss_and_grads(m, x, y, nullptr);
    const LossGrads reg = loss_and_grads(m, x, y, &state);
    CHECK(base.loss == reg.loss);
    CHECK(flatten_grads(base.grads) == flatten_grads(reg.grads));
}

TEST_CASE("a large lambda actually anchors") {
    // Task A, then a conflicting task B (labels flipped). The anchor uses a
    // uniform unit Fisher so the spring constant lr*lambda is the same for
    // every parameter; lr sits inside the stable band (lr*lambda in (1,2)),
    // where 100 steps contract the drift to below 1% of the free run.
    GlobalDataConfig data;
    data.class_count = 2;
    data.samples_per_class = 40;
    data.input_dim = 4;
    data.seed = 99;
    data.mean_scale = 2.0;
    PartitionSpec spec;
    spec.mode = PartitionMode::iid;
    spec.n_nodes = 1;
    spec.seed = 99;
    auto part = partition(generate_global(data), spec);

    ModelConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden_dims = {4};
    cfg.num_classes = 2;
    Model m = init_model(cfg, 99);

    const TrainParams warm{0.05, 8, 1};
    for (int v = 0; v < 3; ++v) train_visit(m, part.nodes[0], static_cast<std::uint64_t>(v), warm, 99);

    EwcState state;
    state.lambda = 1e6;
    EwcAnchor anchor;
    anchor.theta_star = flatten_params(m);
    anchor.fisher.assign(anchor.theta_star.size(), 1.0);
    anchor.source_node = 1;
    state.anchors.push_back(anchor);

    DataNode flipped = part.nodes[0];
    for (int& y : flipped.train_sub.labels) y = 1 - y;

    const std::vector<double> start = flatten_params(m);
    const double lr = 1.5e-6; // lr * lambda = 1.5

    Model free_model = m;
    Model anchored = m;
    const Matrix& bx = flipped.train_sub.features; // full batch: deterministic pull
    const std::vector<int>& by = flipped.train_sub.labels;
    for (int step = 0; step < 100; ++step) {
        free_model = sgd_step(free_model, loss_and_grads(free_model, bx, by, nullptr).grads, lr);
        anchored = sgd_step(anchored, loss_and_grads(anchored, bx, by, &state).grads, lr);
    }

    const double free_move = l2(flatten_params(free_model), start);
    const double anchored_move = l2(flatten_params(anchored), start);
    CHECK(anchored_move < 0.01 * free_move);
}

TEST_CASE("estimate_fisher rejects bad inputs") {
    const Model m = init_model(logistic_config(), 1);
    DataNode empty;
    empty.node_id = 1;
    empty.train_sub.class_count = 2;
    RngStream s(1, 0, 1, "f");
    CHECK_THROWS_AS(estimate_fisher(m, empty, 1, s), DomainError);

    const DataNode node = node_from(Matrix(2, 1, 1.0), {0, 1}, 2);
    RngStream s2(1, 0, 1, "f");
    CHECK_THROWS_AS(estimate_fisher(m, node, 0, s2), DomainError);
}

} // TEST_SUITE
