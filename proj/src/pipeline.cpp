#include "mlclean/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), "stage " + name + ": " + e.what());
    }
}

StageReport make_report(std::string name, const Dataset& before, const Dataset& after, double seconds) {
    StageReport r;
    r.name = std::move(name);
    r.input_count = before.size();
    r.output_count = after.size();
    r.delta = stage_delta(before, after);
    r.seconds = seconds;
    return r;
}

}  // namespace

char stage_letter(Stage s) {
    switch (s) {
        case Stage::Sanitize: return 'S';
        case Stage::Clean: return 'C';
        case Stage::Mitigate: return 'M';
    }
    return '?';
}

std::optional<Stage> stage_from_letter(char c) {
    switch (c) {
        case 'S': case 's': return Stage::Sanitize;
        case 'C': case 'c': return Stage::Clean;
        case 'M': case 'm': return Stage::Mitigate;
        default: return std::nullopt;
    }
}

void PipelineConfig::validate() const {
    if (mode == PipelineMode::Sequence) {
        if (stages.empty()) throw ConfigError("a stage sequence needs at least one stage");
        std::set<Stage> seen;
        for (Stage s : stages) {
            if (!seen.insert(s).second) throw ConfigError(std::string("stage ") + stage_letter(s) + " repeated in sequence");
        }
    } else if (!stages.empty()) {
        throw ConfigError("stage lists are only valid in sequence mode");
    }
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in [0, 1)");
    sanitize.policy.validate();
    train.validate();
}

std::string PipelineConfig::label() const {
    switch (mode) {
        case PipelineMode::Baseline: return "None";
        case PipelineMode::MlClean: return "MLClean";
        case PipelineMode::Sequence: break;
    }
    if (stages.size() == 1) return std::string(1, stage_letter(stages[0]));
    std::string out = "<";
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (i) out += ',';
        out += stage_letter(stages[i]);
    }
    return out + ">";
}

PipelineConfig PipelineConfig::parse_method(const std::string& token, const PipelineConfig& base) {
    PipelineConfig cfg = base;
    cfg.stages.clear();
    std::string t;
    for (char c : token) {
        if (c != '<' && c != '>' && c != ',' && c != ' ' && c != '\t') t.push_back(c);
    }
    std::string lower;
    for (char c : t) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "none") {
        cfg.mode = PipelineMode::Baseline;
    } else if (lower == "mlclean") {
        cfg.mode = PipelineMode::MlClean;
    } else {
        cfg.mode = PipelineMode::Sequence;
        for (char c : t) {
            auto s = stage_from_letter(c);
            if (!s) throw ConfigError("unknown method '" + token + "'");
            cfg.stages.push_back(*s);
        }
    }
    cfg.validate();
    return cfg;
}

StageDelta stage_delta(const Dataset& before, const Dataset& after) {
    StageDelta delta;
    delta.weight_before = before.total_weight();
    delta.weight_after = after.total_weight();

    std::unordered_map<std::string, std::string> origin;  // original id -> id in `before`
    for (const auto& r : before.records()) {
        for (const auto& p : r.provenance) origin.emplace(p, r.id);
    }
    std::unordered_set<std::string> consumed;
    for (const auto& r : after.records()) {
        if (auto i = before.index_of(r.id)) {
            consumed.insert(r.id);
            if (before[*i].weight != r.weight) ++delta.reweighted;
            continue;
        }
        std::set<std::string> sources;
        for (const auto& p : r.provenance) {
            if (auto it = origin.find(p); it != origin.end()) sources.insert(it->second);
        }
        if (sources.empty()) {
            delta.added.push_back(r.id);
        } else {
            consumed.insert(sources.begin(), sources.end());
            delta.merged.emplace_back(r.id, std::vector<std::string>(sources.begin(), sources.end()));
        }
    }
    for (const auto& r : before.records()) {
        if (!consumed.count(r.id)) delta.removed.push_back(r.id);
    }
    return delta;
}

PreprocessResult preprocess(const Dataset& train, const PipelineConfig& cfg) {
    cfg.validate();
    PreprocessResult out{train, {}};

    auto do_sanitize = [&](const char* name) {
        const auto start = Clock::now();
        SanitizeResult res = run_stage(name, [&] { return sanitize(out.dataset, cfg.sanitize); });
        StageReport rep = make_report(name, out.dataset, res.dataset, seconds_since(start));
        rep.sanitization = std::move(res.report);
        out.dataset = std::move(res.dataset);
        out.stages.push_back(std::move(rep));
    };
    auto do_clean = [&](const char* name, const std::optional<ClusterAssignment>& blocks) {
        const auto start = Clock::now();
        ResolveResult res = run_stage(name, [&] { return resolve(out.dataset, blocks, cfg.rules, cfg.merge); });
        StageReport rep = make_report(name, out.dataset, res.dataset, seconds_since(start));
        rep.pair_comparisons = res.log.pair_comparisons;
        rep.merges = std::move(res.log);
        out.dataset = std::move(res.dataset);
        out.stages.push_back(std::move(rep));
    };
    auto do_mitigate = [&](const char* name) {
        const auto start = Clock::now();
        ReweighResult res = run_stage(name, [&] { return reweigh(out.dataset, cfg.reweigh); });
        StageReport rep = make_report(name, out.dataset, res.dataset, seconds_since(start));
        rep.reweighing = std::move(res.report);
        out.dataset = std::move(res.dataset);
        out.stages.push_back(std::move(rep));
    };

    switch (cfg.mode) {
        case PipelineMode::Baseline:
            break;
        case PipelineMode::Sequence:
            for (Stage s : cfg.stages) {
                switch (s) {
                    case Stage::Sanitize: do_sanitize("S"); break;
                    case Stage::Clean: do_clean("C", std::nullopt); break;
                    case Stage::Mitigate: do_mitigate("M"); break;
                }
            }
            break;
        case PipelineMode::MlClean: {
            do_sanitize("S");
            const ClusterAssignment blocks = out.stages.back().sanitization->surviving;
            do_clean("C", blocks);
            do_mitigate("M");
            break;
        }
    }
    return out;
}

Split split_dataset(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ParameterError("test_fraction must be in [0, 1)");
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(d.size())));
    std::vector<bool> is_test(d.size(), false);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
    std::vector<Record> train, test;
    for (std::size_t i = 0; i < d.size(); ++i) (is_test[i] ? test : train).push_back(d[i]);
    return {Dataset(d.schema(), std::move(train)), Dataset(d.schema(), std::move(test))};
}

PipelineReport run_pipeline(const Dataset& d, const PipelineConfig& cfg) {
    cfg.validate();
    if (d.empty()) throw ParameterError("pipeline input is empty");
    if (cfg.test_fraction == 0.0) return run_pipeline(d, d, cfg);
    Split split = split_dataset(d, cfg.test_fraction, cfg.split_seed);
    return run_pipeline(split.train, split.test, cfg);
}

PipelineReport run_pipeline(const Dataset& train, const Dataset& test, const PipelineConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ParameterError("pipeline training input is empty");
    const auto start = Clock::now();
    PipelineReport report;
    report.method = cfg.label();

    PreprocessResult pre = preprocess(train, cfg);
    for (const auto& s : pre.stages) report.preprocess_seconds += s.seconds;

    Dataset eval = test;
    if (cfg.sanitize_test) eval = run_stage("S(test)", [&] { return sanitize(test, cfg.sanitize).dataset; });

    report.model = run_stage("train", [&] { return mlclean::train(pre.dataset, cfg.train); });
    report.metrics = run_stage("evaluate", [&] { return evaluate(report.model, eval); });
    report.stages = std::move(pre.stages);
    report.final_dataset = std::move(pre.dataset);
    report.train_size = train.size();
    report.test_size = eval.size();
    report.total_seconds = seconds_since(start);
    return report;
}

std::string format_fairness(const ParityRatio& p) {
    return p.value ? csv::format_double(*p.value) : std::string("UNDEFINED");
}

void write_pipeline_csv(std::ostream& out, std::span<const PipelineReport> rows) {
    csv::write_row(out, {"method", "accuracy", "fairness", "runtime_s"});
    for (const auto& r : rows) {
        const bool baseline = r.stages.empty();
        csv::write_row(out, {r.method, csv::format_double(r.metrics.accuracy), format_fairness(r.metrics.parity),
                             baseline ? std::string("n/a") : csv::format_double(r.preprocess_seconds)});
    }
}

void write_stage_table(std::ostream& out, const PipelineReport& report) {
    out << "method: " << report.method << "  (train " << report.train_size << ", test " << report.test_size << ")\n";
    out << std::left << std::setw(8) << "stage" << std::right << std::setw(8) << "in" << std::setw(8) << "out"
        << std::setw(9) << "removed" << std::setw(8) << "merged" << std::setw(11) << "reweighed" << std::setw(14)
        << "weight_delta" << std::setw(14) << "pairs" << std::setw(12) << "seconds" << '\n';
    for (const auto& s : report.stages) {
        out << std::left << std::setw(8) << s.name << std::right << std::setw(8) << s.input_count << std::setw(8)
            << s.output_count << std::setw(9) << s.delta.removed.size() << std::setw(8) << s.delta.merged.size()
            << std::setw(11) << s.delta.reweighted << std::setw(14) << std::setprecision(6) << s.delta.weight_delta()
            << std::setw(14) << (s.pair_comparisons ? std::to_string(*s.pair_comparisons) : std::string("-"))
            << std::setw(12) << std::fixed << std::setprecision(4) << s.seconds << std::defaultfloat << '\n';
    }
    out << "accuracy " << std::setprecision(4) << std::fixed << report.metrics.accuracy << std::defaultfloat
        << "  fairness " << format_fairness(report.metrics.parity) << "  preprocess_s " << std::fixed
        << std::setprecision(4) << report.preprocess_seconds << std::defaultfloat << '\n';
}

}  // namespace mlclean
