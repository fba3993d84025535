#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlclean/dataset.hpp"
#include "mlclean/model.hpp"
#include "mlclean/resolve.hpp"
#include "mlclean/reweigh.hpp"
#include "mlclean/sanitize.hpp"

namespace mlclean {

enum class Stage { Sanitize, Clean, Mitigate };

char stage_letter(Stage s);
std::optional<Stage> stage_from_letter(char c);

// Baseline runs no preprocessing (the "None" row of a comparison).
// MlClean runs sanitize and clean fused (clusters reused as ER blocks), then reweigh.
enum class PipelineMode { Baseline, Sequence, MlClean };

struct PipelineConfig {
    PipelineMode mode = PipelineMode::Sequence;
    std::vector<Stage> stages;  // Sequence only

    SanitizeParams sanitize;
    MatchRules rules;
    MergePolicy merge;
    ReweighStrategy reweigh;
    TrainConfig train;

    double test_fraction = 0.2;  // 0: evaluate on the unprocessed input instead of a held-out split
    std::uint64_t split_seed = 0;
    bool sanitize_test = false;

    void validate() const;
    // "None", "S", "<M,S,C>", "MLClean"
    std::string label() const;
    // Parses a method token: None, MLClean, or stage letters such as S, SCM, "M,S,C".
    static PipelineConfig parse_method(const std::string& token, const PipelineConfig& base);
};

struct StageDelta {
    std::vector<std::string> added;
    std::vector<std::string> removed;
    std::vector<std::pair<std::string, std::vector<std::string>>> merged;  // new id -> ids it replaced
    std::size_t reweighted = 0;  // surviving ids whose weight changed
    double weight_before = 0.0;
    double weight_after = 0.0;

    double weight_delta() const { return weight_after - weight_before; }
    bool empty() const { return added.empty() && removed.empty() && merged.empty() && reweighted == 0; }
};

StageDelta stage_delta(const Dataset& before, const Dataset& after);

struct StageReport {
    std::string name;
    std::size_t input_count = 0;
    std::size_t output_count = 0;
    StageDelta delta;
    double seconds = 0.0;
    std::optional<std::uint64_t> pair_comparisons;  // clean stages

    std::optional<SanitizationReport> sanitization;
    std::optional<MergeLog> merges;
    std::optional<ReweighReport> reweighing;
};

struct PreprocessResult {
    Dataset dataset;
    std::vector<StageReport> stages;
};

// Applies the configured stages to a training set. Throws InfeasibleError
// naming the stage when one cannot run.
PreprocessResult preprocess(const Dataset& train, const PipelineConfig& cfg);

struct Split {
    Dataset train;
    Dataset test;
};

Split split_dataset(const Dataset& d, double test_fraction, std::uint64_t seed);

struct PipelineReport {
    std::string method;
    std::vector<StageReport> stages;
    Dataset final_dataset;
    LinearModel model;
    MetricsReport metrics;
    double preprocess_seconds = 0.0;
    double total_seconds = 0.0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

PipelineReport run_pipeline(const Dataset& d, const PipelineConfig& cfg);
PipelineReport run_pipeline(const Dataset& train, const Dataset& test, const PipelineConfig& cfg);

// method,accuracy,fairness,runtime_s
void write_pipeline_csv(std::ostream& out, std::span<const PipelineReport> rows);
void write_stage_table(std::ostream& out, const PipelineReport& report);

std::string format_fairness(const ParityRatio& p);

}  // namespace mlclean
