#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlclean/dataset.hpp"
#include "mlclean/pipeline.hpp"

namespace mlclean {

struct DuplicateSpec {
    double rate = 0.2;            // fraction of records that receive copies
    double zipf_s = 2.0;          // copies ~ truncated Zipf(s) on {1..max_copies}
    std::size_t max_copies = 10;
    double abbreviation_prob = 0.5;
    std::size_t min_prefix = 3;   // abbreviated names keep at least this many characters
    double jitter = 0.0;          // numeric copies move by at most this much
    std::uint64_t seed = 0;

    void validate() const;
};

// Poison records sit alpha standard deviations beyond the clean range of every
// numeric feature and carry the label opposite to the clean majority.
struct PoisonSpec {
    double epsilon = 0.1;
    double alpha = 3.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GroundTruth {
    std::map<std::string, std::vector<std::string>> duplicates;  // original id -> copy ids
    std::vector<std::string> poison_ids;

    void absorb(const GroundTruth& other);
};

struct Injected {
    Dataset dataset;
    GroundTruth truth;
};

// Normalized truncated Zipf mass over {1..max}.
std::vector<double> zipf_pmf(double s, std::size_t max);

Injected inject_duplicates(const Dataset& d, const DuplicateSpec& spec);
Injected inject_poison(const Dataset& d, const PoisonSpec& spec);
std::size_t poison_count(std::size_t n, double epsilon);

void write_ground_truth(std::ostream& out, const GroundTruth& truth);

// Synthetic tabular data: Gaussian blobs in `dims` numeric features, a logistic
// label model, and optional undersampling of groupA's positives.
struct SyntheticSpec {
    std::size_t n = 2000;
    std::size_t clusters = 10;
    std::size_t dims = 4;
    double separation = 10.0;     // cluster centres uniform in [-separation, separation]^dims
    double spread = 1.0;          // per-feature standard deviation inside a cluster
    double label_sharpness = 3.0; // slope of the logistic label model
    double group_a_fraction = 0.5;
    double positive_keep_a = 1.0; // acceptance probability of a groupA positive (0.25 = 4:1 undersampling)
    std::array<std::string, 2> groups{"A", "B"};
    std::uint64_t seed = 0;

    void validate() const;
};

Schema synthetic_schema(const SyntheticSpec& spec);
Dataset generate_synthetic(const SyntheticSpec& spec);

struct BenchSpec {
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
    std::optional<DuplicateSpec> duplicates;
    std::optional<PoisonSpec> poison;
};

struct BenchRow {
    std::string method;
    std::optional<PipelineReport> report;  // nullopt when the row failed
    std::string error;

    std::optional<double> sanitize_precision;
    std::optional<double> sanitize_recall;
    std::optional<double> er_precision;
    std::optional<double> er_recall;

    bool failed() const { return !report.has_value(); }
};

struct ComparisonTable {
    std::vector<BenchRow> rows;
    GroundTruth truth;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

// Runs every configuration on one shared split and one shared injected
// training set. A baseline row is always first; failures are recorded per row.
ComparisonTable bench_orderings(const Dataset& d, const std::vector<PipelineConfig>& configs, const BenchSpec& spec,
                                const std::vector<std::string>& labels = {});
ComparisonTable bench_orderings(const Dataset& train, const Dataset& test, const GroundTruth& truth,
                                const std::vector<PipelineConfig>& configs, const std::vector<std::string>& labels = {});

struct PrecisionRecall {
    std::optional<double> precision;
    std::optional<double> recall;
};

PrecisionRecall sanitization_quality(const PipelineReport& report, const GroundTruth& truth);
PrecisionRecall resolution_quality(const PipelineReport& report, const GroundTruth& truth);

// method,accuracy,fairness,runtime_s,sanitize_precision,sanitize_recall,er_precision,er_recall
void write_comparison_csv(std::ostream& out, const ComparisonTable& table);
void write_comparison_text(std::ostream& out, const ComparisonTable& table);

// Accuracy change on `test` from dropping `ids` out of `train`:
// acc(trained without ids) - acc(trained with ids).
double impact(const Dataset& train, const Dataset& test, const std::vector<std::string>& ids, const TrainConfig& cfg);
double impact(const Dataset& d, const std::vector<std::string>& ids, const PipelineConfig& cfg);

}  // namespace mlclean
