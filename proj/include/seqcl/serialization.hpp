#pragma once

#include <string>
#include <vector>

#include "seqcl/dataset.hpp"
#include "seqcl/harness.hpp"
#include "seqcl/model.hpp"
#include "seqcl/scoring.hpp"
#include "seqcl/sequencer.hpp"

namespace seqcl {

// All file formats are versioned; see the README for field orders.

/// Model checkpoint: JSON with the config, step count and the flat
/// parameter list (per layer: weight row-major, then bias).
void save_model_checkpoint(const Model& model, const std::string& path);
Model load_model_checkpoint(const std::string& path);

/// Global dataset: CSV with a version comment, header f0..f{d-1},label.
void save_dataset_csv(const LabeledDataset& dataset, const std::string& path);
LabeledDataset load_dataset_csv(const std::string& path);

/// Partition manifest: JSON with the spec and per-node row indices into the
/// global dataset file.
void save_partition_manifest(const PartitionSpec& spec, const PartitionResult& result,
                             const std::string& path);

struct LoadedPartition {
    PartitionSpec spec;
    std::vector<DataNode> nodes;
    LabeledDataset global_test;
};

/// Rebuilds nodes from a manifest + the raw global dataset, re-deriving any
/// domain transforms from the stored spec.
LoadedPartition load_partition(const std::string& manifest_path, const LabeledDataset& global);

/// ScoreSet as JSON: {step, variant, minibatch_size, scores, skipped}.
std::string score_set_to_json(const ScoreSet& scores);

/// Oracle table CSV: sequence, feasible, per-step delta_m, min forgetting,
/// final global accuracy, summed delta_m.
std::string oracle_table_to_csv(const OracleResult& result);

/// Per-run manifest: fingerprint, config echo, outcome, checkpoint path.
std::string run_manifest_json(const RunLog& log, const RunConfig& config,
                              const std::string& checkpoint_ref);

/// Sweep summary: per-policy accuracy curves, paired differences, visit
/// histograms.
std::string sweep_report_json(const SweepReport& report);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace seqcl
