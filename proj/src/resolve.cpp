#include "mlclean/resolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> rank_;
};

const std::string& smallest_original(const Record& r) { return r.provenance.front(); }

Record merge_component(const Dataset& d, const std::vector<std::size_t>& members, const MergePolicy& policy) {
    const Schema& s = d.schema();
    // representative: constituent holding the lexicographically smallest original id
    std::size_t rep = members.front();
    for (std::size_t i : members) {
        if (smallest_original(d[i]) < smallest_original(d[rep])) rep = i;
    }

    Record out;
    std::vector<std::string> constituent_ids;
    double total = 0.0;
    for (std::size_t i : members) {
        constituent_ids.push_back(d[i].id);
        out.provenance.insert(out.provenance.end(), d[i].provenance.begin(), d[i].provenance.end());
        total += d[i].weight;
    }
    std::sort(constituent_ids.begin(), constituent_ids.end());
    std::sort(out.provenance.begin(), out.provenance.end());
    out.id = "m:" + csv::join(constituent_ids, ";");
    out.weight = policy.weight_mode == WeightMode::SumWeights ? total : d[rep].weight;

    // weighted vote over a string-valued attribute; ties go to the representative
    auto vote = [&](auto value_of) {
        std::map<std::string, double> mass;
        for (std::size_t i : members) mass[value_of(d[i])] += d[i].weight;
        std::string best = value_of(d[rep]);
        double best_mass = mass[best];
        for (const auto& [v, m] : mass) {
            if (m > best_mass) {
                best = v;
                best_mass = m;
            }
        }
        return best;
    };

    double pos = 0.0, neg = 0.0;
    for (std::size_t i : members) (d[i].label == 1 ? pos : neg) += d[i].weight;
    out.label = pos > neg ? 1 : (neg > pos ? 0 : d[rep].label);
    out.group = vote([](const Record& r) { return r.group; });

    for (std::size_t c = 0; c < s.name_columns.size(); ++c) {
        std::string best = d[members.front()].names[c];
        for (std::size_t i : members) {
            const std::string& v = d[i].names[c];
            if (v.size() > best.size() || (v.size() == best.size() && v < best)) best = v;
        }
        out.names.push_back(best);
    }

    for (std::size_t j = 0; j < s.numeric_features.size(); ++j) {
        double num = 0.0, plain = 0.0;
        for (std::size_t i : members) {
            num += d[i].weight * d[i].numeric[j];
            plain += d[i].numeric[j];
        }
        out.numeric.push_back(total > 0.0 ? num / total : plain / static_cast<double>(members.size()));
    }

    const auto sensitive_cat = s.categorical_index(s.sensitive_column);
    for (std::size_t c = 0; c < s.categorical_features.size(); ++c) {
        if (sensitive_cat && *sensitive_cat == c) {
            out.categorical.push_back(out.group);
        } else {
            out.categorical.push_back(vote([c](const Record& r) { return r.categorical[c]; }));
        }
    }
    return out;
}

}  // namespace

void MatchRules::validate(const Schema& schema) const {
    if (min_prefix < 1) throw ParameterError("min_prefix must be at least 1");
    if (!numeric_tolerance.empty() && numeric_tolerance.size() != schema.numeric_features.size()) {
        throw ParameterError("numeric_tolerance needs one entry per numeric feature");
    }
    for (double t : numeric_tolerance) {
        if (!(t >= 0.0)) throw ParameterError("numeric tolerances must be nonnegative");
    }
}

bool names_match(const std::string& a, const std::string& b, std::size_t min_prefix) {
    if (a == b) return true;
    const std::string& shorter = a.size() < b.size() ? a : b;
    const std::string& longer = a.size() < b.size() ? b : a;
    if (shorter.size() < min_prefix || shorter.empty() || shorter[0] != longer[0]) return false;
    // abbreviation: same first letter, remaining letters appear in order ("Joe" for "Joseph")
    std::size_t j = 1;
    for (std::size_t i = 1; i < longer.size() && j < shorter.size(); ++i) {
        if (longer[i] == shorter[j]) ++j;
    }
    return j == shorter.size();
}

bool match_pair(const Record& a, const Record& b, const MatchRules& rules) {
    if (rules.require_same_group && a.group != b.group) return false;
    for (std::size_t j = 0; j < a.numeric.size(); ++j) {
        if (!(std::fabs(a.numeric[j] - b.numeric[j]) <= rules.tolerance(j))) return false;
    }
    for (std::size_t c = 0; c < a.names.size(); ++c) {
        if (!names_match(a.names[c], b.names[c], rules.min_prefix)) return false;
    }
    return true;
}

std::uint64_t pair_count(std::size_t n) { return static_cast<std::uint64_t>(n) * (n > 0 ? n - 1 : 0) / 2; }

std::uint64_t pair_count(const ClusterAssignment& blocks) {
    std::uint64_t total = 0;
    for (const auto& ids : blocks.per_cluster_ids) total += pair_count(ids.size());
    return total;
}

ResolveResult resolve(const Dataset& d, const std::optional<ClusterAssignment>& blocks, const MatchRules& rules,
                      const MergePolicy& policy) {
    rules.validate(d.schema());
    const std::size_t n = d.size();
    DisjointSets sets(n);
    MergeLog log;

    if (blocks) {
        if (blocks->size() != n) throw ParameterError("blocks do not cover exactly the dataset ids");
        std::vector<std::vector<std::size_t>> members(blocks->per_cluster_ids.size());
        std::size_t covered = 0;
        for (std::size_t c = 0; c < blocks->per_cluster_ids.size(); ++c) {
            for (const auto& id : blocks->per_cluster_ids[c]) {
                auto idx = d.index_of(id);
                if (!idx) throw ParameterError("block id '" + id + "' is not in the dataset");
                members[c].push_back(*idx);
                ++covered;
            }
            std::sort(members[c].begin(), members[c].end());
        }
        if (covered != n) throw ParameterError("blocks do not cover exactly the dataset ids");
        for (const auto& m : members) {
            for (std::size_t x = 0; x < m.size(); ++x) {
                for (std::size_t y = x + 1; y < m.size(); ++y) {
                    ++log.pair_comparisons;
                    if (match_pair(d[m[x]], d[m[y]], rules)) sets.unite(m[x], m[y]);
                }
            }
        }
    } else {
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t y = x + 1; y < n; ++y) {
                ++log.pair_comparisons;
                if (match_pair(d[x], d[y], rules)) sets.unite(x, y);
            }
        }
    }

    // components keyed by root, listed in ascending position of their first member
    std::vector<std::vector<std::size_t>> components;
    std::vector<std::size_t> slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = sets.find(i);
        if (slot[root] == n) {
            slot[root] = components.size();
            components.emplace_back();
        }
        components[slot[root]].push_back(i);
    }

    std::vector<Record> out;
    out.reserve(components.size());
    for (const auto& comp : components) {
        if (comp.size() == 1) {
            out.push_back(d[comp.front()]);
            continue;
        }
        Record merged = merge_component(d, comp, policy);
        MergeEntry entry{merged.id, {}, merged.weight, merged.label};
        for (std::size_t i : comp) entry.constituents.push_back(d[i].id);
        std::sort(entry.constituents.begin(), entry.constituents.end());
        log.entries.push_back(std::move(entry));
        out.push_back(std::move(merged));
    }
    return {Dataset(d.schema(), std::move(out)), std::move(log)};
}

void write_merge_log(std::ostream& out, const MergeLog& log) {
    csv::write_row(out, {"merged_id", "constituents", "weight", "label"});
    for (const auto& e : log.entries) {
        csv::write_row(out, {e.merged_id, csv::join(e.constituents, ";"), csv::format_double(e.weight),
                             std::to_string(e.label)});
    }
}

}  // namespace mlclean
