#include "seqcl/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "seqcl/config.hpp"
#include "seqcl/errors.hpp"

namespace seqcl {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("failed to parse '" + path + "': " + e.what());
    }
    return j;
}

} // namespace

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// --- model checkpoint --------------------------------------------------------

void save_model_checkpoint(const Model& model, const std::string& path) {
    json j;
    j["format"] = "seqcl-checkpoint";
    j["format_version"] = 1;
    j["config"] = {
        {"input_dim", model.config.input_dim},
        {"hidden_dims", model.config.hidden_dims},
        {"num_classes", model.config.num_classes},
        {"activation", activation_name(model.config.activation)},
        {"aid_p1", model.config.aid.p1},
        {"aid_p2", model.config.aid.p2},
        {"aid_alt_positive_rule", model.config.aid.alt_positive_rule},
    };
    j["step_count"] = model.step_count;
    j["params"] = flatten_params(model);
    write_text_file(path, j.dump(2) + "\n");
}

Model load_model_checkpoint(const std::string& path) {
    const json j = load_json(path);
    if (j.value("format", "") != "seqcl-checkpoint" || j.value("format_version", 0) != 1) {
        throw ConfigError("'" + path + "' is not a v1 seqcl checkpoint");
    }
    ModelConfig cfg;
    const json& c = j.at("config");
    cfg.input_dim = c.at("input_dim").get<std::size_t>();
    cfg.hidden_dims = c.at("hidden_dims").get<std::vector<std::size_t>>();
    cfg.num_classes = c.at("num_classes").get<std::size_t>();
    cfg.activation = activation_from_name(c.at("activation").get<std::string>());
    cfg.aid.p1 = c.at("aid_p1").get<double>();
    cfg.aid.p2 = c.at("aid_p2").get<double>();
    cfg.aid.alt_positive_rule = c.at("aid_alt_positive_rule").get<bool>();

    Model model = init_model(cfg, 0);
    unflatten_params(model, j.at("params").get<std::vector<double>>());
    model.step_count = j.at("step_count").get<std::uint64_t>();
    return model;
}

// --- dataset CSV -------------------------------------------------------------

void save_dataset_csv(const LabeledDataset& dataset, const std::string& path) {
    std::ostringstream os;
    os << "# seqcl-dataset v1 classes=" << dataset.class_count << "\n";
    const std::size_t dim = dataset.features.cols();
    for (std::size_t d = 0; d < dim; ++d) os << "f" << d << ",";
    os << "label\n";
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const auto row = dataset.features.row(r);
        for (std::size_t d = 0; d < dim; ++d) os << fmt(row[d]) << ",";
        os << dataset.labels[r] << "\n";
    }
    write_text_file(path, os.str());
}

LabeledDataset load_dataset_csv(const std::string& path) {
    std::istringstream is(read_text_file(path));
    std::string line;
    if (!std::getline(is, line) || line.rfind("# seqcl-dataset v1", 0) != 0) {
        throw ConfigError("'" + path + "' is not a v1 seqcl dataset file");
    }
    int class_count = 0;
    const auto pos = line.find("classes=");
    if (pos != std::string::npos) class_count = std::atoi(line.c_str() + pos + 8);

    if (!std::getline(is, line)) throw ConfigError("dataset file missing header row");
    std::size_t dim = 0;
    for (char c : line) {
        if (c == ',') ++dim;
    }

    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(row, cell, ',')) {
            if (col < dim) {
                values.push_back(std::strtod(cell.c_str(), nullptr));
            } else {
                labels.push_back(std::atoi(cell.c_str()));
            }
            ++col;
        }
        if (col != dim + 1) throw ConfigError("dataset file has a ragged row");
    }

    LabeledDataset out;
    out.class_count = class_count;
    out.labels = std::move(labels);
    out.features = Matrix(out.labels.size(), dim);
    out.features.data() = std::move(values);
    out.validate();
    return out;
}

// --- partition manifest --------------------------------------------------------

namespace {

json spec_to_json(const PartitionSpec& spec) {
    json transforms = json::array();
    for (const auto& t : spec.domain_transforms) {
        transforms.push_back({{"bias_scale", t.bias_scale},
                              {"sparsify_fraction", t.sparsify_fraction}});
    }
    return {
        {"mode", partition_mode_name(spec.mode)},
        {"n_nodes", spec.n_nodes},
        {"classes_min", spec.classes_per_node.first},
        {"classes_max", spec.classes_per_node.second},
        {"samples_min", spec.samples_per_node.first},
        {"samples_max", spec.samples_per_node.second},
        {"test_fraction", spec.test_fraction},
        {"seed", spec.seed},
        {"domain_transforms", transforms},
    };
}

PartitionSpec spec_from_json(const json& j) {
    PartitionSpec spec;
    spec.mode = partition_mode_from_name(j.at("mode").get<std::string>());
    spec.n_nodes = j.at("n_nodes").get<int>();
    spec.classes_per_node = {j.at("classes_min").get<int>(), j.at("classes_max").get<int>()};
    spec.samples_per_node = {j.at("samples_min").get<int>(), j.at("samples_max").get<int>()};
    spec.test_fraction = j.at("test_fraction").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("domain_transforms")) {
        spec.domain_transforms.push_back(
            {t.at("bias_scale").get<double>(), t.at("sparsify_fraction").get<double>()});
    }
    return spec;
}

LabeledDataset gather_rows(const LabeledDataset& global, const std::vector<int>& idx) {
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

} // namespace

void save_partition_manifest(const PartitionSpec& spec, const PartitionResult& result,
                             const std::string& path) {
    json nodes = json::array();
    for (std::size_t i = 0; i < result.nodes.size(); ++i) {
        json n = {
            {"node_id", result.nodes[i].node_id},
            {"train_indices", result.train_indices[i]},
            {"test_indices", result.test_indices[i]},
        };
        if (result.nodes[i].domain_tag) n["domain_tag"] = *result.nodes[i].domain_tag;
        nodes.push_back(std::move(n));
    }
    json j = {
        {"format", "seqcl-partition"},
        {"format_version", 1},
        {"spec", spec_to_json(spec)},
        {"nodes", nodes},
    };
    write_text_file(path, j.dump(2) + "\n");
}

LoadedPartition load_partition(const std::string& manifest_path, const LabeledDataset& global) {
    const json j = load_json(manifest_path);
    if (j.value("format", "") != "seqcl-partition" || j.value("format_version", 0) != 1) {
        throw ConfigError("'" + manifest_path + "' is not a v1 seqcl partition manifest");
    }
    LoadedPartition out;
    out.spec = spec_from_json(j.at("spec"));

    std::vector<LabeledDataset> test_parts;
    for (const auto& n : j.at("nodes")) {
        DataNode node;
        node.node_id = n.at("node_id").get<int>();
        node.train_sub = gather_rows(global, n.at("train_indices").get<std::vector<int>>());
        node.test_sub = gather_rows(global, n.at("test_indices").get<std::vector<int>>());
        if (n.contains("domain_tag")) node.domain_tag = n.at("domain_tag").get<std::string>();

        if (out.spec.mode == PartitionMode::domain_noniid) {
            DomainTransform t;
            if (!out.spec.domain_transforms.empty()) {
                t = out.spec.domain_transforms.at(static_cast<std::size_t>(node.node_id - 1));
            }
            apply_node_domain_transform(node.train_sub.features, t, out.spec.seed, node.node_id);
            apply_node_domain_transform(node.test_sub.features, t, out.spec.seed, node.node_id);
        }
        for (int y : node.train_sub.labels) node.class_set.insert(y);
        for (int y : node.test_sub.labels) node.class_set.insert(y);
        test_parts.push_back(node.test_sub);
        out.nodes.push_back(std::move(node));
    }

    std::size_t total = 0;
    for (const auto& p : test_parts) total += p.size();
    out.global_test.class_count = global.class_count;
    out.global_test.features = Matrix(total, global.features.cols());
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

// --- score set / oracle table / manifests -----------------------------------

std::string score_set_to_json(const ScoreSet& scores) {
    json s = json::object();
    for (const auto& [id, v] : scores.scores) s[std::to_string(id)] = v;
    json j = {
        {"step", scores.step},
        {"variant", activation_name(scores.variant)},
        {"minibatch_size", scores.minibatch_size},
        {"scores", s},
        {"skipped", scores.skipped},
    };
    return j.dump(2) + "\n";
}

std::string oracle_table_to_csv(const OracleResult& result) {
    std::ostringstream os;
    const std::size_t horizon = result.table.empty() ? 0 : result.table.front().sequence.size();
    os << "sequence,feasible";
    for (std::size_t h = 1; h <= horizon; ++h) os << ",delta_m_" << h;
    os << ",min_forgetting,final_global_acc,sum_delta_m\n";
    for (const auto& row : result.table) {
        for (std::size_t i = 0; i < row.sequence.size(); ++i) {
            if (i > 0) os << '-';
            os << row.sequence[i];
        }
        os << ',' << (row.feasible ? 1 : 0);
        for (double d : row.delta_m) os << ',' << fmt(d);
        os << ',';
        if (row.min_forgetting) os << fmt(*row.min_forgetting);
        os << ',' << fmt(row.final_global_acc) << ',' << fmt(row.sum_delta_m) << "\n";
    }
    return os.str();
}

std::string run_manifest_json(const RunLog& log, const RunConfig& config,
                              const std::string& checkpoint_ref) {
    json j = {
        {"format", "seqcl-run"},
        {"format_version", 1},
        {"config_fingerprint", log.config_fingerprint},
        {"config_text", canonical_config_text(config)},
        {"policy", log.policy_label},
        {"seed", log.seed},
        {"n_nodes", log.n_nodes},
        {"initial_global_acc", log.initial_global_acc},
        {"steps_completed", log.records.size()},
        {"failed", log.failed},
        {"checkpoint", checkpoint_ref},
        {"wall_seconds", log.wall_seconds},
    };
    if (log.failed) j["failure_reason"] = log.failure_reason;
    return j.dump(2) + "\n";
}

std::string sweep_report_json(const SweepReport& report) {
    json policies = json::array();
    for (std::size_t e = 0; e < report.labels.size(); ++e) {
        json hists = json::array();
        for (const auto& h : report.visit_histograms[e]) {
            json hj = json::object();
            for (const auto& [id, c] : h) hj[std::to_string(id)] = c;
            hists.push_back(std::move(hj));
        }
        policies.push_back({
            {"label", report.labels[e]},
            {"mean_global_acc_by_step", report.mean_acc_by_step[e]},
            {"std_global_acc_by_step", report.std_acc_by_step[e]},
            {"final_accs", report.final_accs[e]},
            {"paired_final_diff_vs_first", report.paired_diff_vs_first[e]},
            {"mean_final_acc", mean_of(report.final_accs[e])},
            {"mean_paired_diff_vs_first", mean_of(report.paired_diff_vs_first[e])},
            {"visit_histograms", hists},
        });
    }
    json j = {
        {"format", "seqcl-sweep"},
        {"format_version", 1},
        {"seeds", report.seeds},
        {"policies", policies},
    };
    return j.dump(2) + "\n";
}

} // namespace seqcl
