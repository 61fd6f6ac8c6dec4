#include "seqcl/sequencer.hpp"

#include <algorithm>
#include <set>

#include "seqcl/errors.hpp"

namespace seqcl {

std::string policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::random: return "random";
        case PolicyKind::greedy_nwot: return "greedy_nwot";
        case PolicyKind::rotation: return "rotation";
        case PolicyKind::scheduled: return "scheduled";
        case PolicyKind::round_robin: return "round_robin";
        case PolicyKind::oracle: return "oracle";
    }
    return "?";
}

PolicyKind policy_kind_from_name(const std::string& s) {
    if (s == "random") return PolicyKind::random;
    if (s == "greedy_nwot" || s == "greedy") return PolicyKind::greedy_nwot;
    if (s == "rotation") return PolicyKind::rotation;
    if (s == "scheduled") return PolicyKind::scheduled;
    if (s == "round_robin") return PolicyKind::round_robin;
    if (s == "oracle") return PolicyKind::oracle;
    throw ConfigError("unknown policy kind '" + s + "'");
}

std::string candidate_rule_name(CandidateRule r) {
    switch (r) {
        case CandidateRule::all: return "all";
        case CandidateRule::exclude_current: return "exclude_current";
        case CandidateRule::unvisited_only: return "unvisited_only";
    }
    return "?";
}

CandidateRule candidate_rule_from_name(const std::string& s) {
    if (s == "all") return CandidateRule::all;
    if (s == "exclude_current") return CandidateRule::exclude_current;
    if (s == "unvisited_only") return CandidateRule::unvisited_only;
    throw ConfigError("unknown candidate rule '" + s + "'");
}

std::string oracle_objective_name(OracleObjective o) {
    return o == OracleObjective::final_global_acc ? "final_global_acc" : "sum_delta_m";
}

OracleObjective oracle_objective_from_name(const std::string& s) {
    if (s == "final_global_acc") return OracleObjective::final_global_acc;
    if (s == "sum_delta_m") return OracleObjective::sum_delta_m;
    throw ConfigError("unknown oracle objective '" + s + "'");
}

namespace {

std::vector<int> candidate_ids(int n_nodes, const std::vector<int>& visited, CandidateRule rule) {
    std::vector<int> out;
    switch (rule) {
        case CandidateRule::all:
            for (int i = 1; i <= n_nodes; ++i) out.push_back(i);
            break;
        case CandidateRule::exclude_current: {
            const int current = visited.empty() ? 0 : visited.back();
            for (int i = 1; i <= n_nodes; ++i) {
                if (i != current) out.push_back(i);
            }
            break;
        }
        case CandidateRule::unvisited_only: {
            const std::set<int> seen(visited.begin(), visited.end());
            for (int i = 1; i <= n_nodes; ++i) {
                if (!seen.contains(i)) out.push_back(i);
            }
            if (out.empty()) { // every node visited: fall back to all
                for (int i = 1; i <= n_nodes; ++i) out.push_back(i);
            }
            break;
        }
    }
    return out;
}

int greedy_pick(const std::vector<int>& cands, const ScoreSet& scores) {
    int best = -1;
    double best_score = 0.0;
    for (int id : cands) {
        const auto it = scores.scores.find(id);
        if (it == scores.scores.end()) {
            throw StateError("select_next: candidate " + std::to_string(id) +
                             " has no score in the current ScoreSet");
        }
        if (best < 0 || it->second > best_score) {
            best = id;
            best_score = it->second;
        }
    }
    return best;
}

void require_scores(const std::vector<int>& cands, const ScoreSet& scores) {
    for (int id : cands) {
        if (!scores.scores.contains(id)) {
            throw StateError("select_next: candidate " + std::to_string(id) +
                             " has no score in the current ScoreSet");
        }
    }
}

int cycle_pick(const std::vector<int>& order, std::uint64_t step, const std::vector<int>& cands) {
    const std::size_t n = order.size();
    for (std::size_t off = 0; off < n; ++off) {
        const int id = order[(static_cast<std::size_t>(step - 1) + off) % n];
        if (std::find(cands.begin(), cands.end(), id) != cands.end()) return id;
    }
    throw StateError("select_next: no cycle member is a candidate");
}

} // namespace

std::vector<int> candidates(const SequenceState& state, CandidateRule rule) {
    return candidate_ids(state.n_nodes, state.visited, rule);
}

std::vector<int> score_descending_order(const ScoreSet& scores) {
    std::vector<int> order;
    order.reserve(scores.scores.size());
    for (const auto& [id, s] : scores.scores) order.push_back(id);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double sa = scores.scores.at(a);
        const double sb = scores.scores.at(b);
        if (sa != sb) return sa > sb;
        return a < b;
    });
    return order;
}

int select_next(const SequenceState& state, const Policy& policy, RngStream& stream) {
    const std::vector<int> cands = candidates(state, policy.candidate_rule);
    if (cands.empty()) throw StateError("select_next: empty candidate set");

    switch (policy.kind) {
        case PolicyKind::random:
            return cands[stream.uniform_below(cands.size())];

        case PolicyKind::round_robin: {
            std::vector<int> order;
            for (int i = 1; i <= state.n_nodes; ++i) order.push_back(i);
            return cycle_pick(order, state.step, cands);
        }

        case PolicyKind::greedy_nwot:
            return greedy_pick(cands, state.current_scores);

        case PolicyKind::rotation: {
            require_scores(cands, state.current_scores);
            const std::vector<int> order = state.rotation_order.empty()
                                               ? score_descending_order(state.current_scores)
                                               : state.rotation_order;
            return cycle_pick(order, state.step, cands);
        }

        case PolicyKind::scheduled: {
            require_scores(cands, state.current_scores);
            // Tier 1: visit-deficit quota.
            int max_count = 0;
            for (int i = 1; i <= state.n_nodes; ++i) {
                const auto it = state.visit_counts.find(i);
                max_count = std::max(max_count, it == state.visit_counts.end() ? 0 : it->second);
            }
            int deficient = -1;
            int best_deficit = 0;
            for (int id : cands) {
                const auto it = state.visit_counts.find(id);
                const int deficit = max_count - (it == state.visit_counts.end() ? 0 : it->second);
                if (deficit >= policy.scheduler.quota && deficit > best_deficit) {
                    deficient = id;
                    best_deficit = deficit;
                }
            }
            if (deficient >= 0) return deficient;

            // Tier 2: forgetting balance.
            if (policy.scheduler.cf_trigger && !state.last_forgetting.empty()) {
                int worst = -1;
                double worst_dw = 0.0;
                for (const auto& [id, dw] : state.last_forgetting) {
                    if (std::find(cands.begin(), cands.end(), id) == cands.end()) continue;
                    if (worst < 0 || dw < worst_dw) {
                        worst = id;
                        worst_dw = dw;
                    }
                }
                if (worst >= 0 && worst_dw < state.epsilon) return worst;
            }

            // Tier 3: greedy on the current scores.
            return greedy_pick(cands, state.current_scores);
        }

        case PolicyKind::oracle:
            throw StateError("select_next: the oracle policy runs through oracle_search");
    }
    throw StateError("select_next: unhandled policy kind");
}

namespace {

// Exact enumeration count for the rule, without training anything.
std::size_t count_sequences(int n_nodes, std::vector<int>& visited, CandidateRule rule, int depth,
                            int horizon, std::size_t cap) {
    if (depth == horizon) return 1;
    std::size_t total = 0;
    for (int v : candidate_ids(n_nodes, visited, rule)) {
        visited.push_back(v);
        total += count_sequences(n_nodes, visited, rule, depth + 1, horizon, cap);
        visited.pop_back();
        if (total > cap) return total; // early out; caller reports the overflow
    }
    return total;
}

struct DfsFrame {
    Model model;
    EwcState ewc;
    double global_acc = 0.0;
    std::map<int, double> node_accs; // distinct visited nodes -> accuracy
};

} // namespace

OracleResult oracle_search(const Environment& env, int horizon, CandidateRule rule,
                           OracleObjective objective, double epsilon, std::size_t cap) {
    if (horizon < 1) throw ConfigError("oracle_search: horizon must be >= 1");
    const int n = static_cast<int>(env.nodes.size());
    if (n < 1) throw ConfigError("oracle_search: environment has no nodes");

    {
        std::vector<int> scratch;
        const std::size_t total = count_sequences(n, scratch, rule, 0, horizon, cap);
        if (total > cap) {
            throw OracleCapError("oracle_search: enumeration needs " + std::to_string(total) +
                                 " sequences but the cap is " + std::to_string(cap) +
                                 "; raise the cap or shrink the horizon");
        }
    }

    OracleResult result;
    result.epsilon = epsilon;
    result.objective = objective;
    result.initial_global_acc = evaluate(env.initial_model, env.global_test);

    DfsFrame root;
    root.model = env.initial_model;
    root.ewc = env.ewc.make_state();
    root.global_acc = result.initial_global_acc;

    std::vector<int> sequence;
    std::vector<double> deltas;
    std::optional<double> running_min;

    auto dfs = [&](auto&& self, const DfsFrame& frame, int depth) -> void {
        if (depth == horizon) {
            OracleRow row;
            row.sequence = sequence;
            row.delta_m = deltas;
            row.min_forgetting = running_min;
            row.final_global_acc = frame.global_acc;
            double s = 0.0;
            for (double d : deltas) s += d;
            row.sum_delta_m = s;
            row.feasible = !running_min.has_value() || *running_min >= epsilon;
            result.table.push_back(std::move(row));
            return;
        }
        for (int v : candidate_ids(n, sequence, rule)) {
            DfsFrame next = frame;
            const DataNode& node = env.nodes[static_cast<std::size_t>(v - 1)];
            train_visit(next.model, node, static_cast<std::uint64_t>(depth), env.train,
                        env.rng_root, env.ewc.enabled ? &next.ewc : nullptr);
            if (env.ewc.enabled) {
                next.ewc = consolidate_visit(next.ewc, next.model, node,
                                             static_cast<std::uint64_t>(depth), env.rng_root);
            }

            // Forgetting on the distinct previously visited nodes.
            const std::optional<double> saved_min = running_min;
            for (const auto& [j, prev_acc] : frame.node_accs) {
                if (j == v) continue; // the just-trained node is not "previous" here
                const double acc =
                    evaluate(next.model, env.nodes[static_cast<std::size_t>(j - 1)].test_sub);
                const double dw = acc - prev_acc;
                if (!running_min || dw < *running_min) running_min = dw;
                next.node_accs[j] = acc;
            }
            if (frame.node_accs.contains(v)) {
                const double acc = evaluate(next.model, node.test_sub);
                const double dw = acc - frame.node_accs.at(v);
                if (!running_min || dw < *running_min) running_min = dw;
                next.node_accs[v] = acc;
            } else {
                next.node_accs[v] = evaluate(next.model, node.test_sub);
            }

            next.global_acc = evaluate(next.model, env.global_test);
            deltas.push_back(next.global_acc - frame.global_acc);
            sequence.push_back(v);

            self(self, next, depth + 1);

            sequence.pop_back();
            deltas.pop_back();
            running_min = saved_min;
        }
    };
    dfs(dfs, root, 0);

    auto value_of = [&](const OracleRow& row) {
        return objective == OracleObjective::final_global_acc ? row.final_global_acc
                                                              : row.sum_delta_m;
    };
    for (std::size_t i = 0; i < result.table.size(); ++i) {
        const OracleRow& row = result.table[i];
        if (value_of(row) > value_of(result.table[result.best_unconstrained])) {
            result.best_unconstrained = i;
        }
        if (row.feasible &&
            (!result.best_feasible || value_of(row) > value_of(result.table[*result.best_feasible]))) {
            result.best_feasible = i;
        }
    }
    return result;
}

} // namespace seqcl
