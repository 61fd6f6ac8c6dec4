#include "seqcl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "seqcl/config.hpp"
#include "seqcl/errors.hpp"

namespace seqcl {

void RunConfig::validate() const {
    data.validate();
    partition.validate(data.class_count);
    model.validate();
    if (model.input_dim != static_cast<std::size_t>(data.input_dim)) {
        throw ConfigError("config: model.input_dim must match data.input_dim");
    }
    if (model.num_classes != static_cast<std::size_t>(data.class_count)) {
        throw ConfigError("config: model.num_classes must match data.class_count");
    }
    if (horizon < 1) throw ConfigError("config: horizon must be >= 1");
    if (epochs_per_visit < 1) throw ConfigError("config: epochs_per_visit must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
    if (train_batch_size < 1) throw ConfigError("config: train_batch_size must be >= 1");
    if (scoring.minibatch_size < 2) throw ConfigError("config: scoring.minibatch_size must be >= 2");
    if (scoring.jitter < 0.0) throw ConfigError("config: scoring.jitter must be >= 0");
    if (!(epsilon < 0.0)) throw ConfigError("config: epsilon must be negative");
    if (policy.kind == PolicyKind::oracle) {
        throw ConfigError("config: the oracle policy runs through the oracle command");
    }
    if (policy.scheduler.quota < 1) throw ConfigError("config: policy.quota must be >= 1");
    ewc.validate();
    if (label.find(',') != std::string::npos || label.find('\n') != std::string::npos) {
        throw ConfigError("config: label must not contain commas or newlines");
    }
}

std::string RunConfig::effective_label() const {
    return label.empty() ? policy_kind_name(policy.kind) : label;
}

Environment build_environment(const RunConfig& config) {
    config.validate();
    const LabeledDataset global = generate_global(config.data);
    PartitionResult part = partition(global, config.partition);

    Environment env;
    env.nodes = std::move(part.nodes);
    env.global_test = std::move(part.global_test);
    env.initial_model = init_model(config.model, config.seed);
    env.train = TrainParams{config.learning_rate, config.train_batch_size, config.epochs_per_visit};
    env.ewc = config.ewc;
    env.rng_root = config.seed;
    env.epsilon = config.epsilon;
    return env;
}

ForgettingResult compute_forgetting(const std::map<int, double>& prev_acc,
                                    const std::map<int, double>& curr_acc,
                                    const std::vector<int>& visited, double epsilon) {
    ForgettingResult out;
    out.epsilon = epsilon;
    const std::set<int> distinct(visited.begin(), visited.end());
    for (int j : distinct) {
        const auto prev = prev_acc.find(j);
        const auto curr = curr_acc.find(j);
        if (prev == prev_acc.end() || curr == curr_acc.end()) {
            throw StateError("compute_forgetting: node " + std::to_string(j) +
                             " missing from an accuracy map");
        }
        const double dw = curr->second - prev->second;
        out.per_node[j] = dw;
        if (!out.min_forgetting || dw < *out.min_forgetting) out.min_forgetting = dw;
    }
    out.ok = !out.min_forgetting || *out.min_forgetting >= epsilon;
    return out;
}

RunLog run_episode(const RunConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();

    Environment env = build_environment(config);

    RunLog log;
    log.config_fingerprint = config_fingerprint(config);
    log.policy_label = config.effective_label();
    log.seed = config.seed;
    log.n_nodes = static_cast<int>(env.nodes.size());

    Model model = env.initial_model;
    EwcState ewc = config.ewc.make_state();

    double prev_global = evaluate(model, env.global_test);
    log.initial_global_acc = prev_global;

    std::vector<int> visited;
    std::map<int, int> counts;
    std::map<int, double> prev_node_accs;
    std::map<int, double> last_forgetting;
    std::optional<ScoreSet> last_scores;
    std::vector<int> rotation_order;

    for (std::uint64_t t = 0; t < config.horizon; ++t) {
        const std::uint64_t h = t + 1;

        ScoreSet scores =
            score_all_nodes(model, env.nodes, config.scoring.variant, t,
                            config.scoring.minibatch_size, config.seed, config.scoring.jitter);
        if (t == 0) rotation_order = score_descending_order(scores);

        SequenceState state;
        state.n_nodes = log.n_nodes;
        state.visited = visited;
        state.step = h;
        state.visit_counts = counts;
        state.last_scores = last_scores;
        state.current_scores = scores;
        state.last_forgetting = last_forgetting;
        state.epsilon = config.epsilon;
        state.rotation_order = rotation_order;

        RngStream select_stream(config.seed, t, 0, "policy-select");
        const int v = select_next(state, config.policy, select_stream);
        const DataNode& node = env.nodes[static_cast<std::size_t>(v - 1)];

        StepRecord rec;
        rec.step = h;
        rec.selected_node = v;
        rec.scores = scores;

        try {
            rec.train_loss = train_visit(model, node, t, env.train, config.seed,
                                         config.ewc.enabled ? &ewc : nullptr);
            if (config.ewc.enabled) {
                ewc = consolidate_visit(ewc, model, node, t, config.seed);
            }
        } catch (const NumericError& e) {
            log.failed = true;
            log.failure_reason = e.what();
            break;
        }

        const std::vector<int> visited_before = visited;
        visited.push_back(v);
        ++counts[v];

        std::map<int, double> node_accs;
        if (config.eval_all_nodes) {
            for (const auto& nd : env.nodes) {
                if (nd.test_sub.size() > 0) node_accs[nd.node_id] = evaluate(model, nd.test_sub);
            }
        } else {
            const std::set<int> distinct(visited.begin(), visited.end());
            for (int id : distinct) {
                const auto& nd = env.nodes[static_cast<std::size_t>(id - 1)];
                if (nd.test_sub.size() > 0) node_accs[id] = evaluate(model, nd.test_sub);
            }
        }
        rec.per_node_acc = node_accs;

        rec.global_acc = evaluate(model, env.global_test);
        rec.delta_m = rec.global_acc - prev_global;

        const ForgettingResult fr =
            compute_forgetting(prev_node_accs, node_accs, visited_before, config.epsilon);
        rec.forgetting = fr.per_node;
        rec.min_forgetting = fr.min_forgetting;
        rec.constraint_ok = fr.ok;

        prev_global = rec.global_acc;
        prev_node_accs = node_accs;
        last_forgetting = fr.per_node;
        last_scores = std::move(scores);
        log.records.push_back(std::move(rec));
    }

    log.final_model = std::move(model);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return log;
}

// --- CSV -------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

std::string csv_rows_to_string(const ParsedCsv& parsed) {
    std::ostringstream os;
    os << "step,policy,seed,selected_node,train_loss,global_acc,delta_m,min_forgetting,"
          "constraint_ok";
    for (int id : parsed.node_ids) os << ",acc_node_" << id;
    for (int id : parsed.node_ids) os << ",score_node_" << id;
    os << "\n";

    for (const CsvRow& r : parsed.rows) {
        os << r.step << ',' << r.policy << ',' << r.seed << ',' << r.selected_node << ','
           << fmt_double(r.train_loss) << ',' << fmt_double(r.global_acc) << ','
           << fmt_double(r.delta_m) << ',';
        if (r.min_forgetting) os << fmt_double(*r.min_forgetting);
        os << ',' << (r.constraint_ok ? 1 : 0);
        for (int id : parsed.node_ids) {
            os << ',';
            const auto it = r.acc_by_node.find(id);
            if (it != r.acc_by_node.end()) os << fmt_double(it->second);
        }
        for (int id : parsed.node_ids) {
            os << ',';
            const auto it = r.score_by_node.find(id);
            if (it != r.score_by_node.end()) os << fmt_double(it->second);
        }
        os << "\n";
    }
    return os.str();
}

namespace {

ParsedCsv run_log_rows(const RunLog& log) {
    ParsedCsv out;
    for (int id = 1; id <= log.n_nodes; ++id) out.node_ids.push_back(id);
    for (const StepRecord& rec : log.records) {
        CsvRow row;
        row.step = rec.step;
        row.policy = log.policy_label;
        row.seed = log.seed;
        row.selected_node = rec.selected_node;
        row.train_loss = rec.train_loss;
        row.global_acc = rec.global_acc;
        row.delta_m = rec.delta_m;
        row.min_forgetting = rec.min_forgetting;
        row.constraint_ok = rec.constraint_ok;
        row.acc_by_node = rec.per_node_acc;
        for (const auto& [id, s] : rec.scores.scores) row.score_by_node[id] = s;
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace

std::string run_log_to_csv(const RunLog& log) { return csv_rows_to_string(run_log_rows(log)); }

ParsedCsv parse_run_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw StateError("parse_run_csv: empty input");
    const auto header = split_line(line);
    if (header.size() < 9) throw StateError("parse_run_csv: malformed header");

    ParsedCsv out;
    std::vector<std::pair<bool, int>> node_cols; // (is_acc, node_id) per extra column
    for (std::size_t i = 9; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h.rfind("acc_node_", 0) == 0) {
            node_cols.emplace_back(true, std::atoi(h.c_str() + 9));
        } else if (h.rfind("score_node_", 0) == 0) {
            node_cols.emplace_back(false, std::atoi(h.c_str() + 11));
        } else {
            throw StateError("parse_run_csv: unexpected column '" + h + "'");
        }
    }
    for (const auto& [is_acc, id] : node_cols) {
        if (is_acc) out.node_ids.push_back(id);
    }

    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_line(line);
        if (f.size() != header.size()) throw StateError("parse_run_csv: ragged row");
        CsvRow row;
        row.step = std::strtoull(f[0].c_str(), nullptr, 10);
        row.policy = f[1];
        row.seed = std::strtoull(f[2].c_str(), nullptr, 10);
        row.selected_node = std::atoi(f[3].c_str());
        row.train_loss = std::strtod(f[4].c_str(), nullptr);
        row.global_acc = std::strtod(f[5].c_str(), nullptr);
        row.delta_m = std::strtod(f[6].c_str(), nullptr);
        if (!f[7].empty()) row.min_forgetting = std::strtod(f[7].c_str(), nullptr);
        row.constraint_ok = f[8] == "1";
        for (std::size_t i = 0; i < node_cols.size(); ++i) {
            const std::string& cell = f[9 + i];
            if (cell.empty()) continue;
            const auto [is_acc, id] = node_cols[i];
            (is_acc ? row.acc_by_node : row.score_by_node)[id] = std::strtod(cell.c_str(), nullptr);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

// --- sweeps ------------------------------------------------------------------

SweepEntry parse_sweep_entry(const std::string& spec) {
    SweepEntry entry;
    entry.name = spec;
    std::vector<std::string> parts;
    std::string cur;
    for (char c : spec) {
        if (c == '@') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    if (parts.empty() || parts[0].empty()) throw ConfigError("sweep entry: missing policy kind");
    entry.policy.kind = policy_kind_from_name(parts[0]);
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const std::string& mod = parts[i];
        if (mod == "aid") {
            entry.scoring_variant = Activation::aid;
        } else if (mod == "relu") {
            entry.scoring_variant = Activation::relu;
        } else if (mod == "ewc") {
            entry.ewc_enabled = true;
        } else if (mod == "noewc") {
            entry.ewc_enabled = false;
        } else {
            throw ConfigError("sweep entry: unknown modifier '@" + mod + "' in '" + spec + "'");
        }
    }
    return entry;
}

namespace {

// Pairing-neutral view for compatibility checks: the per-arm knobs are
// zeroed out so everything else must match exactly.
std::string pairing_key(RunConfig cfg) {
    cfg.seed = 0;
    cfg.partition.seed = 0;
    cfg.label.clear();
    cfg.policy = Policy{};
    cfg.scoring.variant = Activation::relu;
    cfg.ewc.enabled = false;
    return canonical_config_text(cfg);
}

} // namespace

SweepReport sweep(const std::vector<RunConfig>& variants, const std::vector<std::uint64_t>& seeds,
                  int jobs) {
    if (variants.empty()) throw ConfigError("sweep: need at least one policy variant");
    if (seeds.empty()) throw ConfigError("sweep: need at least one seed");
    for (const auto& v : variants) v.validate();

    const std::string key = pairing_key(variants.front());
    for (const auto& v : variants) {
        if (pairing_key(v) != key) {
            throw ConfigError("sweep: variant '" + v.effective_label() +
                              "' differs from the base beyond policy/scoring/EWC; "
                              "pairing would be invalid");
        }
    }

    SweepReport report;
    report.seeds = seeds;
    for (const auto& v : variants) report.labels.push_back(v.effective_label());
    report.runs.assign(variants.size(), std::vector<RunLog>(seeds.size()));

    struct Task {
        std::size_t e, s;
    };
    std::vector<Task> tasks;
    for (std::size_t e = 0; e < variants.size(); ++e) {
        for (std::size_t s = 0; s < seeds.size(); ++s) tasks.push_back({e, s});
    }

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const auto [e, s] = tasks[i];
            RunConfig cfg = variants[e];
            cfg.seed = seeds[s];
            cfg.partition.seed = seeds[s];
            try {
                report.runs[e][s] = run_episode(cfg);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    // Derived statistics over completed steps.
    std::size_t min_t = SIZE_MAX;
    for (const auto& arm : report.runs) {
        for (const auto& run : arm) min_t = std::min(min_t, run.records.size());
    }
    if (min_t == SIZE_MAX) min_t = 0;

    report.mean_acc_by_step.assign(variants.size(), std::vector<double>(min_t, 0.0));
    report.std_acc_by_step.assign(variants.size(), std::vector<double>(min_t, 0.0));
    report.final_accs.assign(variants.size(), {});
    report.paired_diff_vs_first.assign(variants.size(), {});
    report.visit_histograms.assign(variants.size(), {});

    for (std::size_t e = 0; e < variants.size(); ++e) {
        for (std::size_t t = 0; t < min_t; ++t) {
            std::vector<double> xs;
            for (const auto& run : report.runs[e]) xs.push_back(run.records[t].global_acc);
            report.mean_acc_by_step[e][t] = mean_of(xs);
            report.std_acc_by_step[e][t] = stddev_of(xs);
        }
        for (const auto& run : report.runs[e]) {
            report.final_accs[e].push_back(run.records.empty()
                                               ? run.initial_global_acc
                                               : run.records.back().global_acc);
            report.visit_histograms[e].push_back(visit_counts(run));
        }
    }
    for (std::size_t e = 0; e < variants.size(); ++e) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            report.paired_diff_vs_first[e].push_back(report.final_accs[e][s] -
                                                     report.final_accs[0][s]);
        }
    }
    return report;
}

SweepReport sweep(const RunConfig& base, const std::vector<SweepEntry>& entries,
                  const std::vector<std::uint64_t>& seeds, int jobs) {
    std::vector<RunConfig> variants;
    for (const auto& entry : entries) {
        RunConfig cfg = base;
        cfg.label = entry.name;
        cfg.policy = entry.policy;
        if (entry.scoring_variant) cfg.scoring.variant = *entry.scoring_variant;
        if (entry.ewc_enabled) cfg.ewc.enabled = *entry.ewc_enabled;
        variants.push_back(std::move(cfg));
    }
    return sweep(variants, seeds, jobs);
}

std::string sweep_to_csv(const SweepReport& report) {
    std::string out;
    bool first = true;
    for (const auto& arm : report.runs) {
        for (const auto& run : arm) {
            const std::string csv = run_log_to_csv(run);
            if (first) {
                out = csv;
                first = false;
            } else {
                const auto nl = csv.find('\n');
                out.append(csv, nl + 1, std::string::npos); // skip the repeated header
            }
        }
    }
    return out;
}

// --- statistics -------------------------------------------------------------

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

std::map<int, int> visit_counts(const RunLog& log) {
    std::map<int, int> counts;
    for (int id = 1; id <= log.n_nodes; ++id) counts[id] = 0;
    for (const auto& rec : log.records) ++counts[rec.selected_node];
    return counts;
}

double visit_entropy(const std::map<int, int>& counts) {
    double total = 0.0;
    for (const auto& [id, c] : counts) total += c;
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (const auto& [id, c] : counts) {
        if (c > 0) {
            const double p = static_cast<double>(c) / total;
            h -= p * std::log(p);
        }
    }
    return h;
}

double sign_test_p(int wins, int losses) {
    const int m = wins + losses;
    if (m == 0) return 1.0;
    // P(Bin(m, 1/2) >= wins), exact in double at desk-scale m.
    double p = 0.0;
    double coeff = 1.0; // C(m, i), updated incrementally
    for (int i = 0; i <= m; ++i) {
        if (i >= wins) p += coeff;
        coeff = coeff * static_cast<double>(m - i) / static_cast<double>(i + 1);
    }
    return p * std::pow(0.5, m);
}

} // namespace seqcl
