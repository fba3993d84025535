#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mlclean/dataset.hpp"
#include "mlclean/sanitize.hpp"

namespace mlclean {

// Two records match when every name column is equal or one value abbreviates
// the other, every numeric feature is within its tolerance, and (optionally)
// the sensitive groups agree. An abbreviation has at least min_prefix
// characters, the same first letter, and its letters appear in order in the
// longer name, so prefixes qualify and "Joe" abbreviates "Joseph".
struct MatchRules {
    std::size_t min_prefix = 3;
    std::vector<double> numeric_tolerance;  // per numeric feature; empty means all 0
    bool require_same_group = true;

    void validate(const Schema& schema) const;
    double tolerance(std::size_t feature) const {
        return numeric_tolerance.empty() ? 0.0 : numeric_tolerance[feature];
    }
};

enum class WeightMode { SumWeights, KeepOne };

// Label: weighted majority, ties go to the constituent with the smallest
// original id. Names: longest string. Numerics: weighted mean.
struct MergePolicy {
    WeightMode weight_mode = WeightMode::SumWeights;
};

struct MergeEntry {
    std::string merged_id;
    std::vector<std::string> constituents;  // ascending
    double weight;
    int label;
};

struct MergeLog {
    std::vector<MergeEntry> entries;
    std::uint64_t pair_comparisons = 0;
};

bool names_match(const std::string& a, const std::string& b, std::size_t min_prefix);
bool match_pair(const Record& a, const Record& b, const MatchRules& rules);

struct ResolveResult {
    Dataset dataset;
    MergeLog log;
};

// Pairwise matching over all pairs, or only within each block when blocks are
// given; connected components of the match graph are merged.
ResolveResult resolve(const Dataset& d, const std::optional<ClusterAssignment>& blocks, const MatchRules& rules,
                      const MergePolicy& policy);

std::uint64_t pair_count(std::size_t n_records);
std::uint64_t pair_count(const ClusterAssignment& blocks);

// CSV: merged_id,constituents,weight,label
void write_merge_log(std::ostream& out, const MergeLog& log);

}  // namespace mlclean
