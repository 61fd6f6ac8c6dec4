#include "seqcl/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "seqcl/errors.hpp"

namespace seqcl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
    return d;
}

long long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long i = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
    return i;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long i = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
    return i;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Parse-time scratch for the domain-transform convenience keys.
struct TransformStaging {
    double bias_scale = 1.0;
    std::string sparsify;   // "node:fraction,node:fraction"
    std::string transforms; // "bias:sparsify;bias:sparsify;..."
};

void apply_key(FullConfig& cfg, TransformStaging& staging, const std::string& key,
               const std::string& value) {
    RunConfig& run = cfg.run;
    if (key == "seed") run.seed = parse_u64(key, value);
    else if (key == "label") run.label = value;
    else if (key == "horizon") run.horizon = parse_u64(key, value);
    else if (key == "epochs_per_visit") run.epochs_per_visit = static_cast<int>(parse_int(key, value));
    else if (key == "learning_rate") run.learning_rate = parse_double(key, value);
    else if (key == "train_batch_size") run.train_batch_size = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "epsilon") run.epsilon = parse_double(key, value);
    else if (key == "eval_all_nodes") run.eval_all_nodes = parse_bool(key, value);

    else if (key == "data.class_count") run.data.class_count = static_cast<int>(parse_int(key, value));
    else if (key == "data.samples_per_class") run.data.samples_per_class = static_cast<int>(parse_int(key, value));
    else if (key == "data.input_dim") run.data.input_dim = static_cast<int>(parse_int(key, value));
    else if (key == "data.seed") run.data.seed = parse_u64(key, value);
    else if (key == "data.mean_scale") run.data.mean_scale = parse_double(key, value);
    else if (key == "data.noise_std") run.data.noise_std = parse_double(key, value);

    else if (key == "partition.mode") run.partition.mode = partition_mode_from_name(value);
    else if (key == "partition.n_nodes") run.partition.n_nodes = static_cast<int>(parse_int(key, value));
    else if (key == "partition.classes_min") run.partition.classes_per_node.first = static_cast<int>(parse_int(key, value));
    else if (key == "partition.classes_max") run.partition.classes_per_node.second = static_cast<int>(parse_int(key, value));
    else if (key == "partition.samples_min") run.partition.samples_per_node.first = static_cast<int>(parse_int(key, value));
    else if (key == "partition.samples_max") run.partition.samples_per_node.second = static_cast<int>(parse_int(key, value));
    else if (key == "partition.test_fraction") run.partition.test_fraction = parse_double(key, value);
    else if (key == "partition.seed") run.partition.seed = parse_u64(key, value);
    else if (key == "partition.domain_bias_scale") staging.bias_scale = parse_double(key, value);
    else if (key == "partition.domain_sparsify") staging.sparsify = value;
    else if (key == "partition.domain_transforms") staging.transforms = value;

    else if (key == "model.hidden_dims") {
        run.model.hidden_dims.clear();
        for (const auto& tok : split(value, ',')) {
            if (tok.empty()) continue;
            run.model.hidden_dims.push_back(static_cast<std::size_t>(parse_int(key, tok)));
        }
    } else if (key == "model.activation") run.model.activation = activation_from_name(value);
    else if (key == "model.aid_p1") run.model.aid.p1 = parse_double(key, value);
    else if (key == "model.aid_p2") run.model.aid.p2 = parse_double(key, value);
    else if (key == "model.aid_alt_positive_rule") run.model.aid.alt_positive_rule = parse_bool(key, value);

    else if (key == "policy.kind") run.policy.kind = policy_kind_from_name(value);
    else if (key == "policy.candidate_rule") run.policy.candidate_rule = candidate_rule_from_name(value);
    else if (key == "policy.quota") run.policy.scheduler.quota = static_cast<int>(parse_int(key, value));
    else if (key == "policy.cf_trigger") run.policy.scheduler.cf_trigger = parse_bool(key, value);

    else if (key == "scoring.variant") run.scoring.variant = activation_from_name(value);
    else if (key == "scoring.minibatch_size") run.scoring.minibatch_size = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "scoring.jitter") run.scoring.jitter = parse_double(key, value);

    else if (key == "ewc.enabled") run.ewc.enabled = parse_bool(key, value);
    else if (key == "ewc.lambda") run.ewc.lambda = parse_double(key, value);
    else if (key == "ewc.fisher_batches") run.ewc.fisher_batches = static_cast<int>(parse_int(key, value));
    else if (key == "ewc.fisher_batch_size") run.ewc.fisher_batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "ewc.fisher_mode") run.ewc.fisher_mode = fisher_mode_from_name(value);

    else if (key == "sweep.entries") {
        cfg.sweep.entries.clear();
        for (const auto& tok : split(value, ',')) {
            if (!tok.empty()) cfg.sweep.entries.push_back(tok);
        }
    } else if (key == "sweep.seeds") cfg.sweep.seeds = parse_seed_list(value);
    else if (key == "sweep.jobs") cfg.sweep.jobs = static_cast<int>(parse_int(key, value));

    else throw ConfigError("config: unknown key '" + key + "'");
}

std::vector<DomainTransform> build_transforms(const TransformStaging& staging, int n_nodes) {
    std::vector<DomainTransform> out;
    if (!staging.transforms.empty()) {
        for (const auto& tok : split(staging.transforms, ';')) {
            const auto parts = split(tok, ':');
            if (parts.size() != 2) {
                throw ConfigError("config: domain_transforms entries must be 'bias:sparsify'");
            }
            out.push_back({parse_double("partition.domain_transforms", parts[0]),
                           parse_double("partition.domain_transforms", parts[1])});
        }
        return out;
    }
    out.assign(static_cast<std::size_t>(n_nodes), DomainTransform{staging.bias_scale, 0.0});
    if (!staging.sparsify.empty()) {
        for (const auto& tok : split(staging.sparsify, ',')) {
            const auto parts = split(tok, ':');
            if (parts.size() != 2) {
                throw ConfigError("config: domain_sparsify entries must be 'node:fraction'");
            }
            const int node = static_cast<int>(parse_int("partition.domain_sparsify", parts[0]));
            if (node < 1 || node > n_nodes) {
                throw ConfigError("config: domain_sparsify node " + parts[0] + " out of range");
            }
            out[static_cast<std::size_t>(node - 1)].sparsify_fraction =
                parse_double("partition.domain_sparsify", parts[1]);
        }
    }
    return out;
}

} // namespace

FullConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
    FullConfig cfg;
    TransformStaging staging;

    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::vector<std::pair<std::string, std::string>> pairs;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        }
        pairs.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: override '" + ov + "' is not key=value");
        }
        pairs.emplace_back(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }

    for (const auto& [key, value] : pairs) apply_key(cfg, staging, key, value);

    // Derived fields: the model's interface dimensions follow the data.
    cfg.run.model.input_dim = static_cast<std::size_t>(cfg.run.data.input_dim);
    cfg.run.model.num_classes = static_cast<std::size_t>(cfg.run.data.class_count);
    if (cfg.run.partition.mode == PartitionMode::domain_noniid) {
        cfg.run.partition.domain_transforms = build_transforms(staging, cfg.run.partition.n_nodes);
    }
    return cfg;
}

FullConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config_text(os.str(), overrides);
}

std::string canonical_config_text(const RunConfig& c) {
    std::ostringstream os;
    os << "seed = " << c.seed << "\n";
    os << "label = " << c.label << "\n";
    os << "horizon = " << c.horizon << "\n";
    os << "epochs_per_visit = " << c.epochs_per_visit << "\n";
    os << "learning_rate = " << fmt(c.learning_rate) << "\n";
    os << "train_batch_size = " << c.train_batch_size << "\n";
    os << "epsilon = " << fmt(c.epsilon) << "\n";
    os << "eval_all_nodes = " << (c.eval_all_nodes ? "true" : "false") << "\n";
    os << "data.class_count = " << c.data.class_count << "\n";
    os << "data.samples_per_class = " << c.data.samples_per_class << "\n";
    os << "data.input_dim = " << c.data.input_dim << "\n";
    os << "data.seed = " << c.data.seed << "\n";
    os << "data.mean_scale = " << fmt(c.data.mean_scale) << "\n";
    os << "data.noise_std = " << fmt(c.data.noise_std) << "\n";
    os << "partition.mode = " << partition_mode_name(c.partition.mode) << "\n";
    os << "partition.n_nodes = " << c.partition.n_nodes << "\n";
    os << "partition.classes_min = " << c.partition.classes_per_node.first << "\n";
    os << "partition.classes_max = " << c.partition.classes_per_node.second << "\n";
    os << "partition.samples_min = " << c.partition.samples_per_node.first << "\n";
    os << "partition.samples_max = " << c.partition.samples_per_node.second << "\n";
    os << "partition.test_fraction = " << fmt(c.partition.test_fraction) << "\n";
    os << "partition.seed = " << c.partition.seed << "\n";
    os << "partition.domain_transforms = ";
    for (std::size_t i = 0; i < c.partition.domain_transforms.size(); ++i) {
        if (i > 0) os << ";";
        os << fmt(c.partition.domain_transforms[i].bias_scale) << ":"
           << fmt(c.partition.domain_transforms[i].sparsify_fraction);
    }
    os << "\n";
    os << "model.hidden_dims = ";
    for (std::size_t i = 0; i < c.model.hidden_dims.size(); ++i) {
        if (i > 0) os << ",";
        os << c.model.hidden_dims[i];
    }
    os << "\n";
    os << "model.activation = " << activation_name(c.model.activation) << "\n";
    os << "model.aid_p1 = " << fmt(c.model.aid.p1) << "\n";
    os << "model.aid_p2 = " << fmt(c.model.aid.p2) << "\n";
    os << "model.aid_alt_positive_rule = " << (c.model.aid.alt_positive_rule ? "true" : "false")
       << "\n";
    os << "policy.kind = " << policy_kind_name(c.policy.kind) << "\n";
    os << "policy.candidate_rule = " << candidate_rule_name(c.policy.candidate_rule) << "\n";
    os << "policy.quota = " << c.policy.scheduler.quota << "\n";
    os << "policy.cf_trigger = " << (c.policy.scheduler.cf_trigger ? "true" : "false") << "\n";
    os << "scoring.variant = " << activation_name(c.scoring.variant) << "\n";
    os << "scoring.minibatch_size = " << c.scoring.minibatch_size << "\n";
    os << "scoring.jitter = " << fmt(c.scoring.jitter) << "\n";
    os << "ewc.enabled = " << (c.ewc.enabled ? "true" : "false") << "\n";
    os << "ewc.lambda = " << fmt(c.ewc.lambda) << "\n";
    os << "ewc.fisher_batches = " << c.ewc.fisher_batches << "\n";
    os << "ewc.fisher_batch_size = " << c.ewc.fisher_batch_size << "\n";
    os << "ewc.fisher_mode = " << fisher_mode_name(c.ewc.fisher_mode) << "\n";
    return os.str();
}

std::string config_fingerprint(const RunConfig& config) {
    const std::string text = canonical_config_text(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const auto& tok : split(text, ',')) {
        if (tok.empty()) continue;
        const auto dots = tok.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_u64("seeds", tok));
        } else {
            const std::uint64_t a = parse_u64("seeds", trim(tok.substr(0, dots)));
            const std::uint64_t b = parse_u64("seeds", trim(tok.substr(dots + 2)));
            if (b < a) throw ConfigError("config: descending seed range '" + tok + "'");
            for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
        }
    }
    if (out.empty()) throw ConfigError("config: empty seed list");
    return out;
}

} // namespace seqcl
