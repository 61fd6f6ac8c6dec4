#pragma once

#include <string>
#include <vector>

#include "seqcl/harness.hpp"

namespace seqcl {

struct SweepSpec {
    std::vector<std::string> entries; // e.g. {"greedy_nwot", "random"}
    std::vector<std::uint64_t> seeds;
    int jobs = 1;
};

struct FullConfig {
    RunConfig run;
    SweepSpec sweep;
};

/// Parses the declarative `key = value` config format. Lines starting with
/// '#' are comments; unknown keys are rejected. `overrides` are extra
/// key=value pairs applied after the document (CLI --set).
FullConfig parse_config_text(const std::string& text,
                             const std::vector<std::string>& overrides = {});

FullConfig load_config_file(const std::string& path,
                            const std::vector<std::string>& overrides = {});

/// Every RunConfig field in a fixed order with full precision; the identity
/// the fingerprint is computed over.
std::string canonical_config_text(const RunConfig& config);

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_fingerprint(const RunConfig& config);

/// "1,2,3" or "1..10" (inclusive), mixable: "1..4,9".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

} // namespace seqcl
