#include "mlclean/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

namespace {

std::string fresh_id(const std::string& base, const std::unordered_set<std::string>& taken) {
    if (!taken.count(base)) return base;
    for (std::size_t i = 2;; ++i) {
        std::string candidate = base + "_" + std::to_string(i);
        if (!taken.count(candidate)) return candidate;
    }
}

using PairSet = std::set<std::pair<std::string, std::string>>;

void add_pairs(const std::vector<std::string>& ids, PairSet& out) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) out.emplace(std::min(ids[i], ids[j]), std::max(ids[i], ids[j]));
    }
}

std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

}  // namespace

void DuplicateSpec::validate() const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ParameterError("duplication rate must be in [0, 1]");
    if (!(zipf_s > 1.0)) throw ParameterError("zipf_s must exceed 1");
    if (max_copies < 1) throw ParameterError("max_copies must be at least 1");
    if (!(abbreviation_prob >= 0.0 && abbreviation_prob <= 1.0)) throw ParameterError("abbreviation_prob must be in [0, 1]");
    if (min_prefix < 1) throw ParameterError("min_prefix must be at least 1");
    if (!(jitter >= 0.0)) throw ParameterError("jitter must be nonnegative");
}

void PoisonSpec::validate() const {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ParameterError("epsilon must be in [0, 1)");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
}

void GroundTruth::absorb(const GroundTruth& other) {
    for (const auto& [k, v] : other.duplicates) duplicates[k].insert(duplicates[k].end(), v.begin(), v.end());
    poison_ids.insert(poison_ids.end(), other.poison_ids.begin(), other.poison_ids.end());
}

std::vector<double> zipf_pmf(double s, std::size_t max) {
    std::vector<double> pmf(max);
    double total = 0.0;
    for (std::size_t r = 1; r <= max; ++r) {
        pmf[r - 1] = std::pow(static_cast<double>(r), -s);
        total += pmf[r - 1];
    }
    for (double& p : pmf) p /= total;
    return pmf;
}

Injected inject_duplicates(const Dataset& d, const DuplicateSpec& spec) {
    spec.validate();
    Injected out{d, {}};
    const auto n_pick = static_cast<std::size_t>(std::llround(spec.rate * static_cast<double>(d.size())));
    if (n_pick == 0) return out;

    std::mt19937_64 rng(spec.seed);
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_pick));
    std::sort(picked.begin(), picked.end());

    const auto pmf = zipf_pmf(spec.zipf_s, spec.max_copies);
    std::discrete_distribution<std::size_t> copies_dist(pmf.begin(), pmf.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> jitter(-spec.jitter, spec.jitter);

    std::unordered_set<std::string> taken;
    for (const auto& r : d.records()) taken.insert(r.id);
    std::vector<Record> records = d.records();
    for (std::size_t idx : picked) {
        const Record& src = d[idx];
        const std::size_t copies = copies_dist(rng) + 1;
        auto& truth = out.truth.duplicates[src.id];
        for (std::size_t c = 1; c <= copies; ++c) {
            Record copy = src;
            copy.id = fresh_id(src.id + "~d" + std::to_string(c), taken);
            taken.insert(copy.id);
            copy.weight = 1.0;
            copy.provenance = {copy.id};
            for (auto& name : copy.names) {
                const bool abbreviate = unit(rng) < spec.abbreviation_prob;
                if (abbreviate && name.size() > spec.min_prefix) {
                    std::uniform_int_distribution<std::size_t> len(spec.min_prefix, name.size() - 1);
                    name.resize(len(rng));
                }
            }
            if (spec.jitter > 0.0) {
                for (double& v : copy.numeric) v += jitter(rng);
            }
            truth.push_back(copy.id);
            records.push_back(std::move(copy));
        }
    }
    out.dataset = Dataset(d.schema(), std::move(records));
    return out;
}

std::size_t poison_count(std::size_t n, double epsilon) {
    return static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(n) - 1e-9));
}

Injected inject_poison(const Dataset& d, const PoisonSpec& spec) {
    spec.validate();
    Injected out{d, {}};
    const std::size_t count = poison_count(d.size(), spec.epsilon);
    if (count == 0 || d.empty()) return out;

    const std::size_t dims = d.schema().numeric_features.size();
    std::vector<double> lo(dims, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dims, -std::numeric_limits<double>::infinity());
    std::vector<double> mean(dims, 0.0), sd(dims, 0.0);
    for (const auto& r : d.records()) {
        for (std::size_t j = 0; j < dims; ++j) {
            lo[j] = std::min(lo[j], r.numeric[j]);
            hi[j] = std::max(hi[j], r.numeric[j]);
            mean[j] += r.numeric[j];
        }
    }
    for (std::size_t j = 0; j < dims; ++j) mean[j] /= static_cast<double>(d.size());
    for (const auto& r : d.records()) {
        for (std::size_t j = 0; j < dims; ++j) sd[j] += (r.numeric[j] - mean[j]) * (r.numeric[j] - mean[j]);
    }
    for (std::size_t j = 0; j < dims; ++j) {
        sd[j] = std::sqrt(sd[j] / static_cast<double>(d.size()));
        if (sd[j] == 0.0) sd[j] = 1.0;
    }
    double pos = 0.0, neg = 0.0;
    for (const auto& r : d.records()) (r.label == 1 ? pos : neg) += r.weight;
    const int poison_label = pos >= neg ? 0 : 1;

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    std::bernoulli_distribution coin(0.5);
    std::unordered_set<std::string> taken;
    for (const auto& r : d.records()) taken.insert(r.id);

    const std::size_t width = std::to_string(count).size();
    std::vector<Record> records = d.records();
    for (std::size_t i = 0; i < count; ++i) {
        Record p = d[pick(rng)];
        std::string num = std::to_string(i + 1);
        num.insert(0, width - num.size(), '0');
        p.id = fresh_id("poison-" + num, taken);
        taken.insert(p.id);
        p.weight = 1.0;
        p.provenance = {p.id};
        p.label = poison_label;
        for (std::size_t j = 0; j < dims; ++j) {
            p.numeric[j] = coin(rng) ? hi[j] + spec.alpha * sd[j] : lo[j] - spec.alpha * sd[j];
        }
        out.truth.poison_ids.push_back(p.id);
        records.push_back(std::move(p));
    }
    out.dataset = Dataset(d.schema(), std::move(records));
    return out;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
    csv::write_row(out, {"kind", "id", "copies"});
    for (const auto& [orig, copies] : truth.duplicates) csv::write_row(out, {"duplicate", orig, csv::join(copies, ";")});
    for (const auto& id : truth.poison_ids) csv::write_row(out, {"poison", id, ""});
}

// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
    if (n < 1) throw ParameterError("synthetic n must be positive");
    if (clusters < 1 || dims < 1) throw ParameterError("synthetic clusters and dims must be positive");
    if (!(spread >= 0.0) || !(separation >= 0.0)) throw ParameterError("synthetic spread/separation must be nonnegative");
    if (!(group_a_fraction > 0.0 && group_a_fraction < 1.0)) throw ParameterError("group_a_fraction must be in (0, 1)");
    if (!(positive_keep_a > 0.0 && positive_keep_a <= 1.0)) throw ParameterError("positive_keep_a must be in (0, 1]");
}

Schema synthetic_schema(const SyntheticSpec& spec) {
    Schema s;
    s.id_column = "id";
    s.weight_column = "weight";
    s.name_columns = {"name"};
    for (std::size_t j = 0; j < spec.dims; ++j) s.numeric_features.push_back("x" + std::to_string(j + 1));
    s.categorical_features = {"group"};
    s.sensitive_column = "group";
    s.sensitive_groups = spec.groups;
    s.label_column = "label";
    return s;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> centre(-spec.separation, spec.separation);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> which(0, spec.clusters - 1);
    std::uniform_int_distribution<int> letter(0, 25);

    std::vector<std::vector<double>> centres(spec.clusters, std::vector<double>(spec.dims));
    for (auto& c : centres) {
        for (double& v : c) v = centre(rng);
    }
    std::vector<double> direction(spec.dims);
    double norm = 0.0;
    for (double& v : direction) {
        v = noise(rng);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    const double scale = spec.separation > 0.0 ? spec.separation : 1.0;
    for (double& v : direction) v /= norm * scale / 2.0;

    std::unordered_set<std::string> names;
    std::vector<Record> records;
    records.reserve(spec.n);
    while (records.size() < spec.n) {
        Record r;
        const auto& c = centres[which(rng)];
        double score = 0.0;
        for (std::size_t j = 0; j < spec.dims; ++j) {
            r.numeric.push_back(c[j] + spec.spread * noise(rng));
            score += direction[j] * r.numeric[j];
        }
        r.group = unit(rng) < spec.group_a_fraction ? spec.groups[0] : spec.groups[1];
        r.label = unit(rng) < 1.0 / (1.0 + std::exp(-spec.label_sharpness * score)) ? 1 : 0;
        std::string name;
        do {
            name.assign(1, static_cast<char>('A' + letter(rng)));
            for (int k = 0; k < 7; ++k) name.push_back(static_cast<char>('a' + letter(rng)));
        } while (names.count(name));
        if (r.group == spec.groups[0] && r.label == 1 && unit(rng) >= spec.positive_keep_a) continue;
        names.insert(name);
        r.names = {name};
        r.categorical = {r.group};
        r.id = "r" + std::to_string(records.size() + 1);
        r.provenance = {r.id};
        records.push_back(std::move(r));
    }
    return Dataset(synthetic_schema(spec), std::move(records));
}

// ---------------------------------------------------------------------------

PrecisionRecall sanitization_quality(const PipelineReport& report, const GroundTruth& truth) {
    PrecisionRecall pr;
    bool ran = false;
    std::set<std::string> flagged;
    for (const auto& s : report.stages) {
        if (!s.sanitization) continue;
        ran = true;
        for (const auto& f : s.sanitization->flagged) flagged.insert(f.id);
    }
    if (!ran) return pr;
    std::size_t hit = 0;
    for (const auto& id : truth.poison_ids) hit += flagged.count(id);
    if (!flagged.empty()) pr.precision = static_cast<double>(hit) / static_cast<double>(flagged.size());
    if (!truth.poison_ids.empty()) pr.recall = static_cast<double>(hit) / static_cast<double>(truth.poison_ids.size());
    return pr;
}

PrecisionRecall resolution_quality(const PipelineReport& report, const GroundTruth& truth) {
    PrecisionRecall pr;
    bool ran = false;
    PairSet predicted;
    for (const auto& s : report.stages) {
        if (!s.merges) continue;
        ran = true;
        for (const auto& e : s.merges->entries) add_pairs(e.constituents, predicted);
    }
    if (!ran) return pr;
    PairSet actual;
    for (const auto& [orig, copies] : truth.duplicates) {
        std::vector<std::string> ids{orig};
        ids.insert(ids.end(), copies.begin(), copies.end());
        add_pairs(ids, actual);
    }
    std::size_t hit = 0;
    for (const auto& p : predicted) hit += actual.count(p);
    if (!predicted.empty()) pr.precision = static_cast<double>(hit) / static_cast<double>(predicted.size());
    if (!actual.empty()) pr.recall = static_cast<double>(hit) / static_cast<double>(actual.size());
    return pr;
}

ComparisonTable bench_orderings(const Dataset& d, const std::vector<PipelineConfig>& configs, const BenchSpec& spec,
                                const std::vector<std::string>& labels) {
    Split split = split_dataset(d, spec.test_fraction, spec.split_seed);
    GroundTruth truth;
    Dataset train = split.train;
    if (spec.duplicates) {
        Injected inj = inject_duplicates(train, *spec.duplicates);
        train = std::move(inj.dataset);
        truth.absorb(inj.truth);
    }
    if (spec.poison) {
        Injected inj = inject_poison(train, *spec.poison);
        train = std::move(inj.dataset);
        truth.absorb(inj.truth);
    }
    return bench_orderings(train, split.test, truth, configs, labels);
}

ComparisonTable bench_orderings(const Dataset& train, const Dataset& test, const GroundTruth& truth,
                                const std::vector<PipelineConfig>& configs, const std::vector<std::string>& labels) {
    if (configs.empty()) throw ParameterError("bench needs at least one configuration");
    if (!labels.empty() && labels.size() != configs.size()) throw ParameterError("one label per configuration required");

    std::vector<PipelineConfig> plan;
    std::vector<std::string> names;
    if (configs.front().mode != PipelineMode::Baseline) {
        PipelineConfig base = configs.front();
        base.mode = PipelineMode::Baseline;
        base.stages.clear();
        plan.push_back(base);
        names.push_back("None");
    }
    for (std::size_t i = 0; i < configs.size(); ++i) {
        plan.push_back(configs[i]);
        names.push_back(labels.empty() ? configs[i].label() : labels[i]);
    }

    ComparisonTable table;
    table.truth = truth;
    table.train_size = train.size();
    table.test_size = test.size();
    for (std::size_t i = 0; i < plan.size(); ++i) {
        BenchRow row;
        row.method = names[i];
        try {
            PipelineReport rep = run_pipeline(train, test, plan[i]);
            rep.method = names[i];
            auto s = sanitization_quality(rep, truth);
            auto c = resolution_quality(rep, truth);
            row.sanitize_precision = s.precision;
            row.sanitize_recall = s.recall;
            row.er_precision = c.precision;
            row.er_recall = c.recall;
            row.report = std::move(rep);
        } catch (const Error& e) {
            row.error = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
    csv::write_row(out, {"method", "accuracy", "fairness", "runtime_s", "sanitize_precision", "sanitize_recall",
                         "er_precision", "er_recall"});
    for (const auto& row : table.rows) {
        if (row.failed()) {
            csv::write_row(out, {row.method, "FAILED", "FAILED", "FAILED", "", "", "", ""});
            continue;
        }
        const auto& r = *row.report;
        csv::write_row(out, {row.method, csv::format_double(r.metrics.accuracy), format_fairness(r.metrics.parity),
                             r.stages.empty() ? std::string("n/a") : csv::format_double(r.preprocess_seconds),
                             opt(row.sanitize_precision), opt(row.sanitize_recall), opt(row.er_precision),
                             opt(row.er_recall)});
    }
}

void write_comparison_text(std::ostream& out, const ComparisonTable& table) {
    out << "train " << table.train_size << " records (" << table.truth.poison_ids.size() << " poison, "
        << table.truth.duplicates.size() << " duplicated originals), test " << table.test_size << " records\n";
    out << std::left << std::setw(12) << "Method" << std::right << std::setw(10) << "Accuracy" << std::setw(11)
        << "Fairness" << std::setw(12) << "Runtime(s)" << std::setw(9) << "S-prec" << std::setw(9) << "S-rec"
        << std::setw(9) << "C-prec" << std::setw(9) << "C-rec" << '\n';
    auto cell = [](const std::optional<double>& v) {
        std::ostringstream s;
        if (v) {
            s << std::fixed << std::setprecision(3) << *v;
        } else {
            s << "-";
        }
        return s.str();
    };
    for (const auto& row : table.rows) {
        out << std::left << std::setw(12) << row.method << std::right;
        if (row.failed()) {
            out << "  FAILED: " << row.error << '\n';
            continue;
        }
        const auto& r = *row.report;
        std::ostringstream fair, runtime;
        if (r.metrics.parity.value) {
            fair << std::fixed << std::setprecision(3) << *r.metrics.parity.value;
        } else {
            fair << "UNDEF";
        }
        if (r.stages.empty()) {
            runtime << "n/a";
        } else {
            runtime << std::fixed << std::setprecision(3) << r.preprocess_seconds;
        }
        out << std::setw(10) << cell(r.metrics.accuracy) << std::setw(11) << fair.str() << std::setw(12)
            << runtime.str() << std::setw(9) << cell(row.sanitize_precision) << std::setw(9)
            << cell(row.sanitize_recall) << std::setw(9) << cell(row.er_precision) << std::setw(9)
            << cell(row.er_recall) << '\n';
    }
}

double impact(const Dataset& train, const Dataset& test, const std::vector<std::string>& ids, const TrainConfig& cfg) {
    if (ids.empty()) return 0.0;
    std::unordered_set<std::string> drop;
    for (const auto& id : ids) {
        if (!train.index_of(id)) throw ParameterError("impact: id '" + id + "' is not in the training data");
        drop.insert(id);
    }
    std::vector<Record> kept;
    for (const auto& r : train.records()) {
        if (!drop.count(r.id)) kept.push_back(r);
    }
    const Dataset reduced(train.schema(), std::move(kept));
    const double with = evaluate(mlclean::train(train, cfg), test).accuracy;
    const double without = evaluate(mlclean::train(reduced, cfg), test).accuracy;
    return without - with;
}

double impact(const Dataset& d, const std::vector<std::string>& ids, const PipelineConfig& cfg) {
    for (const auto& id : ids) {
        if (!d.index_of(id)) throw ParameterError("impact: id '" + id + "' is not in the dataset");
    }
    if (cfg.test_fraction == 0.0) return impact(d, d, ids, cfg.train);
    Split split = split_dataset(d, cfg.test_fraction, cfg.split_seed);
    std::vector<std::string> in_train;
    for (const auto& id : ids) {
        if (split.train.index_of(id)) in_train.push_back(id);
    }
    return impact(split.train, split.test, in_train, cfg.train);
}

}  // namespace mlclean
