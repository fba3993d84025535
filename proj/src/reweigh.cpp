#include "mlclean/reweigh.hpp"

#include <cmath>
#include <ostream>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

namespace {

// Ratios this close are treated as already equal, which keeps reweigh idempotent.
constexpr double kRatioTolerance = 1e-12;

}  // namespace

GroupStats group_stats(const Dataset& d) {
    const Schema& s = d.schema();
    GroupStats stats{GroupStat{s.sensitive_groups[0]}, GroupStat{s.sensitive_groups[1]}};
    for (const auto& r : d.records()) {
        GroupStat& g = r.group == s.sensitive_groups[0] ? stats[0] : stats[1];
        (r.label == 1 ? g.positive : g.negative) += r.weight;
    }
    for (const auto& g : stats) {
        if (!(g.positive + g.negative > 0.0)) {
            throw InfeasibleError("degenerate group: '" + g.group + "' has zero total weight");
        }
    }
    return stats;
}

ReweighResult reweigh(const Dataset& d, const ReweighStrategy& strategy) {
    const GroupStats before = group_stats(d);
    ReweighReport report;
    const std::size_t ref = before[1].ratio() > before[0].ratio() ? 1 : 0;
    const double r_ref = before[ref].ratio();
    const double p_ref = before[ref].positive;
    const double n_ref = before[ref].negative;
    report.reference = ref;

    for (std::size_t g = 0; g < 2; ++g) {
        report.groups[g] = before[g].group;
        report.ratio_before[g] = before[g].ratio();
        if (g == ref || r_ref - before[g].ratio() <= kRatioTolerance) continue;
        const double p = before[g].positive;
        const double n = before[g].negative;
        if (strategy.mode == ReweighMode::UpweightPositives) {
            if (p <= 0.0) {
                throw InfeasibleError("reweigh infeasible: group '" + before[g].group +
                                      "' has no positive weight to scale up");
            }
            if (n_ref <= 0.0) {
                throw InfeasibleError("reweigh infeasible: reference ratio is 1, group '" + before[g].group +
                                      "' cannot reach it by scaling positives");
            }
            // r_ref*N / (P*(1-r_ref)) with r_ref = P_ref/(P_ref+N_ref)
            report.factor[g] = (p_ref * n) / (p * n_ref);
        } else {
            if (n_ref <= 0.0) {
                throw InfeasibleError("reweigh infeasible: reference ratio is 1, group '" + before[g].group +
                                      "' cannot reach it by scaling negatives");
            }
            // P*(1-r_ref) / (r_ref*N)
            report.factor[g] = (p * n_ref) / (p_ref * n);
        }
    }

    const int target_label = strategy.mode == ReweighMode::UpweightPositives ? 1 : 0;
    std::vector<Record> records = d.records();
    report.weights.reserve(records.size());
    for (auto& r : records) {
        const std::size_t g = r.group == before[0].group ? 0 : 1;
        const double old = r.weight;
        if (report.factor[g] != 1.0 && r.label == target_label) r.weight = old * report.factor[g];
        report.weights.push_back({r.id, old, r.weight});
    }
    Dataset out(d.schema(), std::move(records));
    const GroupStats after = group_stats(out);
    for (std::size_t g = 0; g < 2; ++g) report.ratio_after[g] = after[g].ratio();
    return {std::move(out), std::move(report)};
}

void write_reweigh_report(std::ostream& out, const ReweighReport& report) {
    csv::write_row(out, {"id", "old_weight", "new_weight"});
    for (const auto& w : report.weights) {
        csv::write_row(out, {w.id, csv::format_double(w.old_weight), csv::format_double(w.new_weight)});
    }
    out << "# group,ratio_before,ratio_after,factor\n";
    for (std::size_t g = 0; g < 2; ++g) {
        out << "# ";
        csv::write_row(out, {report.groups[g], csv::format_double(report.ratio_before[g]),
                             csv::format_double(report.ratio_after[g]), csv::format_double(report.factor[g])});
    }
}

}  // namespace mlclean
