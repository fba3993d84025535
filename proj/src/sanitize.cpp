#include "mlclean/sanitize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <unordered_set>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

std::vector<std::vector<double>> seed_centroids(const FeatureMatrix& fm, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = fm.rows();
    std::vector<std::vector<double>> centroids;
    std::vector<bool> chosen(n, false);
    auto take = [&](std::size_t i) {
        chosen[i] = true;
        auto r = fm.row(i);
        centroids.emplace_back(r.begin(), r.end());
    };

    take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(fm.row(i), centroids[0]);

    while (centroids.size() < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc >= target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                // rounding left target past the last positive entry
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        take(pick);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(fm.row(i), centroids.back()));
    }
    return centroids;
}

std::size_t nearest(std::span<const double> x, const std::vector<std::vector<double>>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(x, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

void recompute_mean(const FeatureMatrix& fm, const std::vector<std::size_t>& labels, std::size_t cluster,
                    std::vector<double>& centroid) {
    std::vector<double> sum(fm.cols, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != cluster) continue;
        auto r = fm.row(i);
        for (std::size_t j = 0; j < fm.cols; ++j) sum[j] += r[j];
        ++count;
    }
    if (count == 0) return;
    for (std::size_t j = 0; j < fm.cols; ++j) centroid[j] = sum[j] / static_cast<double>(count);
}

ClusterAssignment build_assignment(const FeatureMatrix& fm, const std::vector<std::size_t>& labels,
                                   std::vector<std::vector<double>> centroids) {
    ClusterAssignment ca;
    ca.k = centroids.size();
    ca.centroids = std::move(centroids);
    ca.per_cluster_ids.assign(ca.k, {});
    ca.assignment.reserve(fm.rows());
    for (std::size_t i = 0; i < fm.rows(); ++i) {
        ca.assignment.emplace(fm.row_ids[i], labels[i]);
        ca.per_cluster_ids[labels[i]].push_back(fm.row_ids[i]);
    }
    return ca;
}

}  // namespace

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(per_cluster_ids.size());
    for (const auto& c : per_cluster_ids) sizes.push_back(c.size());
    return sizes;
}

namespace {

ClusterAssignment lloyd(const FeatureMatrix& fm, std::size_t k, std::mt19937_64& rng, std::size_t max_iter) {
    const std::size_t n = fm.rows();
    auto centroids = seed_centroids(fm, k, rng);
    std::vector<std::size_t> labels(n, k);
    std::vector<double> history;
    std::size_t iter = 0;
    bool converged = false;

    for (; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = nearest(fm.row(i), centroids);
            if (c != labels[i]) {
                labels[i] = c;
                changed = true;
            }
        }
        if (!changed) {
            converged = true;
            break;
        }

        std::vector<std::size_t> counts(k, 0);
        for (std::size_t c : labels) ++counts[c];
        for (std::size_t c = 0; c < k; ++c) recompute_mean(fm, labels, c, centroids[c]);

        // An empty cluster takes over the point farthest from its own centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[labels[i]] < 2) continue;
                const double d = squared_distance(fm.row(i), centroids[labels[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) break;
            const std::size_t donor = labels[far];
            --counts[donor];
            labels[far] = c;
            counts[c] = 1;
            auto r = fm.row(far);
            centroids[c].assign(r.begin(), r.end());
            recompute_mean(fm, labels, donor, centroids[donor]);
        }

        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += squared_distance(fm.row(i), centroids[labels[i]]);
        history.push_back(inertia);
    }

    if (history.empty()) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += squared_distance(fm.row(i), centroids[labels[i]]);
        history.push_back(inertia);
    }
    ClusterAssignment ca = build_assignment(fm, labels, std::move(centroids));
    ca.inertia_history = std::move(history);
    ca.iterations = iter;
    ca.converged = converged;
    return ca;
}

}  // namespace

ClusterAssignment kmeans(const FeatureMatrix& fm, std::size_t k, std::uint64_t seed, std::size_t max_iter,
                         std::size_t n_init) {
    const std::size_t n = fm.rows();
    if (n == 0) throw ParameterError("kmeans on an empty feature matrix");
    if (k < 1 || k > n) throw ParameterError("k must be in [1, " + std::to_string(n) + "], got " + std::to_string(k));
    if (max_iter < 1) throw ParameterError("max_iter must be at least 1");
    if (n_init < 1) throw ParameterError("n_init must be at least 1");

    std::mt19937_64 rng(seed);
    ClusterAssignment best = lloyd(fm, k, rng, max_iter);
    for (std::size_t run = 1; run < n_init; ++run) {
        ClusterAssignment next = lloyd(fm, k, rng, max_iter);
        if (next.inertia() < best.inertia()) best = std::move(next);
    }
    return best;
}

std::size_t default_k(std::size_t n_records) {
    if (n_records == 0) return 1;
    const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_records) / 2.0)));
    return std::clamp<std::size_t>(k, 1, n_records);
}

const char* to_string(OutlierReason r) {
    switch (r) {
        case OutlierReason::SmallCluster: return "SMALL_CLUSTER";
        case OutlierReason::FarFromCentroid: return "FAR_FROM_CENTROID";
    }
    return "?";
}

void SanitizationPolicy::validate() const {
    if (min_cluster_size < 1) throw ParameterError("min_cluster_size must be at least 1");
    if (!(tau > 0.0)) throw ParameterError("tau must be positive");
}

std::vector<std::string> SanitizationReport::flagged_ids() const {
    std::vector<std::string> out;
    out.reserve(flagged.size());
    for (const auto& f : flagged) out.push_back(f.id);
    return out;
}

bool SanitizationReport::is_flagged(const std::string& id) const {
    return std::any_of(flagged.begin(), flagged.end(), [&](const FlaggedRecord& f) { return f.id == id; });
}

SanitizationReport detect_outliers(const ClusterAssignment& ca, const FeatureMatrix& fm, const SanitizationPolicy& policy) {
    policy.validate();
    const std::size_t n = fm.rows();
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = ca.assignment.find(fm.row_ids[i]);
        if (it == ca.assignment.end()) throw ParameterError("cluster assignment does not cover id '" + fm.row_ids[i] + "'");
        labels[i] = it->second;
    }

    std::vector<double> dist(n);
    std::vector<std::size_t> sizes(ca.k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        dist[i] = std::sqrt(squared_distance(fm.row(i), ca.centroids[labels[i]]));
        ++sizes[labels[i]];
    }

    std::vector<double> threshold(ca.k, std::numeric_limits<double>::infinity());
    if (std::isfinite(policy.tau)) {
        std::vector<double> sum(ca.k, 0.0), sum_sq(ca.k, 0.0);
        for (std::size_t i = 0; i < n; ++i) sum[labels[i]] += dist[i];
        for (std::size_t c = 0; c < ca.k; ++c) {
            if (sizes[c] > 0) sum[c] /= static_cast<double>(sizes[c]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double dev = dist[i] - sum[labels[i]];
            sum_sq[labels[i]] += dev * dev;
        }
        for (std::size_t c = 0; c < ca.k; ++c) {
            if (sizes[c] < 2) continue;
            const double sd = std::sqrt(sum_sq[c] / static_cast<double>(sizes[c]));
            if (sd > 0.0) threshold[c] = sum[c] + policy.tau * sd;
        }
    }

    SanitizationReport report;
    std::vector<bool> keep(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = labels[i];
        if (sizes[c] < policy.min_cluster_size) {
            report.flagged.push_back({fm.row_ids[i], OutlierReason::SmallCluster, dist[i], c});
            keep[i] = false;
        } else if (dist[i] > threshold[c]) {
            report.flagged.push_back({fm.row_ids[i], OutlierReason::FarFromCentroid, dist[i], c});
            keep[i] = false;
        }
    }

    ClusterAssignment& s = report.surviving;
    s.k = ca.k;
    s.centroids = ca.centroids;
    s.per_cluster_ids.assign(ca.k, {});
    s.inertia_history = ca.inertia_history;
    s.iterations = ca.iterations;
    s.converged = ca.converged;
    std::vector<std::vector<double>> sums(ca.k, std::vector<double>(fm.cols, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        const std::size_t c = labels[i];
        s.assignment.emplace(fm.row_ids[i], c);
        s.per_cluster_ids[c].push_back(fm.row_ids[i]);
        auto r = fm.row(i);
        for (std::size_t j = 0; j < fm.cols; ++j) sums[c][j] += r[j];
    }
    for (std::size_t c = 0; c < ca.k; ++c) {
        const std::size_t m = s.per_cluster_ids[c].size();
        if (m == 0) continue;
        for (std::size_t j = 0; j < fm.cols; ++j) s.centroids[c][j] = sums[c][j] / static_cast<double>(m);
    }
    return report;
}

SanitizeResult sanitize(const Dataset& d, const SanitizeParams& params) {
    params.policy.validate();
    const FeatureMatrix fm = featurize(d);
    const std::size_t k = params.k.value_or(default_k(d.size()));
    const ClusterAssignment ca = kmeans(fm, k, params.seed, params.max_iter, params.n_init);
    SanitizationReport report = detect_outliers(ca, fm, params.policy);

    std::unordered_set<std::string> drop;
    for (const auto& f : report.flagged) drop.insert(f.id);
    std::vector<Record> kept;
    kept.reserve(d.size() - drop.size());
    for (const auto& r : d.records()) {
        if (!drop.count(r.id)) kept.push_back(r);
    }
    return {Dataset(d.schema(), std::move(kept)), std::move(report)};
}

void write_sanitization_report(std::ostream& out, const SanitizationReport& report) {
    csv::write_row(out, {"id", "reason", "distance", "cluster"});
    for (const auto& f : report.flagged) {
        csv::write_row(out, {f.id, to_string(f.reason), csv::format_double(f.distance), std::to_string(f.cluster)});
    }
}

}  // namespace mlclean
