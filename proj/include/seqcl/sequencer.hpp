#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqcl/environment.hpp"
#include "seqcl/rng.hpp"
#include "seqcl/scoring.hpp"

namespace seqcl {

enum class PolicyKind { random, greedy_nwot, rotation, scheduled, round_robin, oracle };
enum class CandidateRule { all, exclude_current, unvisited_only };

std::string policy_kind_name(PolicyKind k);
PolicyKind policy_kind_from_name(const std::string& s);
std::string candidate_rule_name(CandidateRule r);
CandidateRule candidate_rule_from_name(const std::string& s);

struct SchedulerParams {
    int quota = 3;          // visit-deficit trigger
    bool cf_trigger = true; // forgetting-balance trigger
};

struct Policy {
    PolicyKind kind = PolicyKind::greedy_nwot;
    CandidateRule candidate_rule = CandidateRule::all;
    SchedulerParams scheduler;
};

/// Everything the selector sees at step h. visited is S^{h-1} in visit
/// order; step == |visited| + 1 at selection time. rotation_order is the
/// fixed descending-R^0 cycle, filled in at the first selection.
struct SequenceState {
    int n_nodes = 0;
    std::vector<int> visited;
    std::uint64_t step = 1;
    std::map<int, int> visit_counts;
    std::optional<ScoreSet> last_scores; // R^{t-1}
    ScoreSet current_scores;             // R^t
    std::map<int, double> last_forgetting;
    double epsilon = -0.05;
    std::vector<int> rotation_order;
};

/// Eligible nodes under the rule. unvisited_only falls back to `all` once
/// every node has been visited so longer horizons stay well-defined.
std::vector<int> candidates(const SequenceState& state, CandidateRule rule);

/// Pick the next node. Deterministic given (state, policy, stream); every
/// tie breaks toward the lowest node id. The scheduled policy applies three
/// tiers: visit-deficit quota, then forgetting balance, then greedy score.
int select_next(const SequenceState& state, const Policy& policy, RngStream& stream);

/// Node ids sorted by descending score, ties toward the lowest id. This is
/// the fixed cycle the rotation policy derives from R^0.
std::vector<int> score_descending_order(const ScoreSet& scores);

enum class OracleObjective { final_global_acc, sum_delta_m };

std::string oracle_objective_name(OracleObjective o);
OracleObjective oracle_objective_from_name(const std::string& s);

struct OracleRow {
    std::vector<int> sequence;
    bool feasible = true; // min forgetting >= epsilon at every step
    std::vector<double> delta_m;
    std::optional<double> min_forgetting; // absent when nothing was revisited
    double final_global_acc = 0.0;
    double sum_delta_m = 0.0;
};

struct OracleResult {
    std::vector<OracleRow> table;
    double initial_global_acc = 0.0;
    double epsilon = 0.0;
    std::optional<std::size_t> best_feasible;
    std::size_t best_unconstrained = 0;
    OracleObjective objective = OracleObjective::final_global_acc;
};

/// Exhaustively trains and evaluates every sequence of length `horizon`
/// honoring the candidate rule. Sequences violating the epsilon constraint
/// are marked infeasible but still reported. Throws OracleCapError when the
/// enumeration would exceed `cap` sequences.
OracleResult oracle_search(const Environment& env, int horizon, CandidateRule rule,
                           OracleObjective objective, double epsilon, std::size_t cap = 2000);

} // namespace seqcl
