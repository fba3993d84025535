#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlclean/dataset.hpp"

namespace mlclean {

struct GroupStat {
    std::string group;
    double positive = 0.0;  // weight of label-1 records
    double negative = 0.0;  // weight of label-0 records

    double ratio() const { return positive / (positive + negative); }
};

// Indexed in schema sensitive_groups order.
using GroupStats = std::array<GroupStat, 2>;

GroupStats group_stats(const Dataset& d);

enum class ReweighMode { UpweightPositives, DownweightNegatives };

struct ReweighStrategy {
    ReweighMode mode = ReweighMode::DownweightNegatives;
};

struct WeightChange {
    std::string id;
    double old_weight;
    double new_weight;
};

struct ReweighReport {
    std::vector<WeightChange> weights;  // every record, dataset order
    std::array<double, 2> ratio_before{};
    std::array<double, 2> ratio_after{};
    std::array<double, 2> factor{1.0, 1.0};
    std::array<std::string, 2> groups;
    std::size_t reference = 0;
};

struct ReweighResult {
    Dataset dataset;
    ReweighReport report;
};

// Scales one label side of every non-reference group so all weighted positive
// ratios equal the largest one. Ties for the reference go to groupA.
ReweighResult reweigh(const Dataset& d, const ReweighStrategy& strategy);

// CSV: id,old_weight,new_weight then a '#'-prefixed footer of group ratios.
void write_reweigh_report(std::ostream& out, const ReweighReport& report);

}  // namespace mlclean
