#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlclean/dataset.hpp"

namespace mlclean {

struct ClusterAssignment {
    std::size_t k = 0;
    std::unordered_map<std::string, std::size_t> assignment;  // id -> cluster
    std::vector<std::vector<double>> centroids;
    std::vector<std::vector<std::string>> per_cluster_ids;  // each in feature-matrix row order

    // Lloyd diagnostics: within-cluster sum of squares after every update step.
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
    bool converged = false;

    double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
    std::size_t size() const noexcept { return assignment.size(); }
    std::vector<std::size_t> cluster_sizes() const;
};

// Lloyd's algorithm with k-means++ seeding, best of n_init restarts by final
// inertia. Restarts draw from one generator seeded with `seed`.
ClusterAssignment kmeans(const FeatureMatrix& fm, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100,
                         std::size_t n_init = 10);

std::size_t default_k(std::size_t n_records);

enum class OutlierReason { SmallCluster, FarFromCentroid };
const char* to_string(OutlierReason r);

struct SanitizationPolicy {
    std::size_t min_cluster_size = 2;
    double tau = 3.0;  // distance multiplier; +inf disables the distance rule

    void validate() const;
};

struct FlaggedRecord {
    std::string id;
    OutlierReason reason;
    double distance;
    std::size_t cluster;
};

struct SanitizationReport {
    std::vector<FlaggedRecord> flagged;
    ClusterAssignment surviving;

    std::vector<std::string> flagged_ids() const;
    bool is_flagged(const std::string& id) const;
};

SanitizationReport detect_outliers(const ClusterAssignment& ca, const FeatureMatrix& fm, const SanitizationPolicy& policy);

struct SanitizeParams {
    std::optional<std::size_t> k;  // nullopt: default_k(n)
    std::uint64_t seed = 0;
    std::size_t max_iter = 100;
    std::size_t n_init = 10;
    SanitizationPolicy policy;
};

struct SanitizeResult {
    Dataset dataset;
    SanitizationReport report;
};

SanitizeResult sanitize(const Dataset& d, const SanitizeParams& params);

// CSV: id,reason,distance,cluster
void write_sanitization_report(std::ostream& out, const SanitizationReport& report);

}  // namespace mlclean
