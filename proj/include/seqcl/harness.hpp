#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqcl/dataset.hpp"
#include "seqcl/environment.hpp"
#include "seqcl/ewc.hpp"
#include "seqcl/model.hpp"
#include "seqcl/scoring.hpp"
#include "seqcl/sequencer.hpp"

namespace seqcl {

struct ScoringConfig {
    Activation variant = Activation::relu;
    std::size_t minibatch_size = 32;
    double jitter = 0.0;
};

/// Full description of one episode. Everything numeric in the run is a pure
/// function of this value.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string label; // CSV policy column; defaults to the policy kind name
    GlobalDataConfig data;
    PartitionSpec partition;
    ModelConfig model;
    std::uint64_t horizon = 24; // T node visits
    int epochs_per_visit = 1;
    double learning_rate = 0.05;
    std::size_t train_batch_size = 32;
    Policy policy;
    ScoringConfig scoring;
    EwcConfig ewc;
    double epsilon = -0.05;
    bool eval_all_nodes = false;

    void validate() const;
    std::string effective_label() const;
};

/// Data + initial model + training knobs shared by the episode loop and the
/// oracle, derived deterministically from the config.
Environment build_environment(const RunConfig& config);

struct StepRecord {
    std::uint64_t step = 0; // h, 1-based
    int selected_node = 0;
    ScoreSet scores;
    double train_loss = 0.0;
    double global_acc = 0.0;
    double delta_m = 0.0;
    std::map<int, double> per_node_acc; // distinct visited nodes (all nodes when eval_all_nodes)
    std::map<int, double> forgetting;   // Delta W per previously visited node
    std::optional<double> min_forgetting;
    bool constraint_ok = true;
};

struct RunLog {
    std::string config_fingerprint;
    std::string policy_label;
    std::uint64_t seed = 0;
    int n_nodes = 0;
    double initial_global_acc = 0.0;
    std::vector<StepRecord> records;
    bool failed = false;
    std::string failure_reason;
    Model final_model;
    double wall_seconds = 0.0;
};

struct ForgettingResult {
    std::map<int, double> per_node;
    std::optional<double> min_forgetting;
    bool ok = true;
    double epsilon = 0.0;
};

/// Delta W per distinct previously visited node, their minimum, and the
/// epsilon check. Throws StateError if either accuracy map misses a node.
ForgettingResult compute_forgetting(const std::map<int, double>& prev_acc,
                                    const std::map<int, double>& curr_acc,
                                    const std::vector<int>& visited, double epsilon);

/// The full sequenced loop: score -> select -> train -> consolidate ->
/// evaluate -> log, horizon times. Numeric divergence truncates the log and
/// flags the failure instead of throwing.
RunLog run_episode(const RunConfig& config);

// --- step CSV (exact column order; 17 significant digits) ---------------

std::string run_log_to_csv(const RunLog& log);

struct CsvRow {
    std::uint64_t step = 0;
    std::string policy;
    std::uint64_t seed = 0;
    int selected_node = 0;
    double train_loss = 0.0;
    double global_acc = 0.0;
    double delta_m = 0.0;
    std::optional<double> min_forgetting;
    bool constraint_ok = true;
    std::map<int, double> acc_by_node;
    std::map<int, double> score_by_node;
};

struct ParsedCsv {
    std::vector<int> node_ids;
    std::vector<CsvRow> rows;
};

ParsedCsv parse_run_csv(const std::string& text);
std::string csv_rows_to_string(const ParsedCsv& parsed);

// --- sweeps ---------------------------------------------------------------

/// One policy arm of a sweep: the base config with only selection-side
/// knobs changed, so pairing stays valid.
struct SweepEntry {
    std::string name;
    Policy policy;
    std::optional<Activation> scoring_variant;
    std::optional<bool> ewc_enabled;
};

/// Entry spec syntax: kind[@aid|@relu][@ewc|@noewc], e.g. "greedy_nwot@aid".
SweepEntry parse_sweep_entry(const std::string& spec);

struct SweepReport {
    std::vector<std::string> labels;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<RunLog>> runs; // [entry][seed]

    std::vector<std::vector<double>> mean_acc_by_step; // [entry][step]
    std::vector<std::vector<double>> std_acc_by_step;
    std::vector<std::vector<double>> final_accs;            // [entry][seed]
    std::vector<std::vector<double>> paired_diff_vs_first;  // [entry][seed]
    std::vector<std::vector<std::map<int, int>>> visit_histograms; // [entry][seed]
};

/// Paired multi-seed comparison: per seed one shared partition and initial
/// model, then one run per variant. All variants must agree on everything
/// except policy, scoring variant, EWC toggle and label; anything else is
/// refused because the pairing would be invalid.
SweepReport sweep(const std::vector<RunConfig>& variants, const std::vector<std::uint64_t>& seeds,
                  int jobs = 1);

/// Convenience wrapper building the variant configs from entry specs.
SweepReport sweep(const RunConfig& base, const std::vector<SweepEntry>& entries,
                  const std::vector<std::uint64_t>& seeds, int jobs = 1);

std::string sweep_to_csv(const SweepReport& report);

// --- small statistics helpers ----------------------------------------------

double mean_of(const std::vector<double>& xs);
double stddev_of(const std::vector<double>& xs); // population

std::map<int, int> visit_counts(const RunLog& log);

/// Shannon entropy (nats) of the visit frequency distribution.
double visit_entropy(const std::map<int, int>& counts);

/// One-sided sign test: P(Bin(wins + losses, 1/2) >= wins). Ties are
/// excluded by the caller.
double sign_test_p(int wins, int losses);

} // namespace seqcl
