#include "mlclean/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

ConfigFile ConfigFile::parse(std::string_view text) {
    ConfigFile cfg;
    std::string section;
    std::size_t lineno = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++lineno;
        if (lineno == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) raw.erase(0, 3);
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = csv::trim(raw);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = csv::trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            cfg.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        if (section.empty()) throw ConfigError(where + ": key outside of any section");
        const std::string key = csv::trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        auto [it, inserted] = cfg.sections[section].emplace(key, Entry{csv::trim(std::string_view(line).substr(eq + 1)), lineno});
        if (!inserted) throw ConfigError(where + ": duplicate key '" + key + "' in [" + section + "]");
    }
    return cfg;
}

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> list(const std::string& v) {
    std::vector<std::string> out;
    if (csv::trim(v).empty()) return out;
    for (auto& part : csv::split(v, ',')) out.push_back(csv::trim(part));
    return out;
}

class SectionReader {
public:
    SectionReader(const std::string& name, const std::map<std::string, ConfigFile::Entry>& entries)
        : name_(name), entries_(entries) {}

    // Every key in the section must be claimed by exactly one handler.
    void on(const std::string& key, const std::function<void(const std::string&)>& fn) { handlers_[key] = fn; }

    void run() const {
        for (const auto& [key, entry] : entries_) {
            auto h = handlers_.find(key);
            if (h == handlers_.end()) {
                throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key + "' in [" + name_ + "]");
            }
            try {
                h->second(entry.value);
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw ConfigError("line " + std::to_string(entry.line) + ": " + e.what());
            }
        }
    }

    double real(const std::string& v, const std::string& key) const {
        if (lower(v) == "inf") return std::numeric_limits<double>::infinity();
        auto d = csv::parse_double(v);
        if (!d) throw ConfigError("[" + name_ + "] " + key + ": not a number: '" + v + "'");
        return *d;
    }

    std::uint64_t integer(const std::string& v, const std::string& key) const {
        std::uint64_t out = 0;
        auto res = std::from_chars(v.data(), v.data() + v.size(), out);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
            throw ConfigError("[" + name_ + "] " + key + ": not a nonnegative integer: '" + v + "'");
        }
        return out;
    }

    bool boolean(const std::string& v, const std::string& key) const {
        const std::string l = lower(v);
        if (l == "true" || l == "yes" || l == "1") return true;
        if (l == "false" || l == "no" || l == "0") return false;
        throw ConfigError("[" + name_ + "] " + key + ": not a boolean: '" + v + "'");
    }

private:
    std::string name_;
    const std::map<std::string, ConfigFile::Entry>& entries_;
    std::map<std::string, std::function<void(const std::string&)>> handlers_;
};

template <typename Fn>
void as_config_error(const std::string& section, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("[" + section + "] " + e.what());
    }
}

}  // namespace

void RunConfig::override_seed(std::uint64_t seed) {
    pipeline.split_seed = seed;
    pipeline.sanitize.seed = seed;
    pipeline.train.seed = seed;
    duplicates.seed = seed;
    poison.seed = seed;
    synthetic.seed = seed;
}

const Schema& RunConfig::require_schema() const {
    if (!schema) throw ConfigError("a [schema] section is required");
    return *schema;
}

BenchSpec RunConfig::bench_spec() const {
    BenchSpec spec;
    spec.test_fraction = pipeline.test_fraction;
    spec.split_seed = pipeline.split_seed;
    if (bench_inject_duplicates) spec.duplicates = duplicates;
    if (bench_inject_poison) spec.poison = poison;
    return spec;
}

RunConfig parse_config(std::string_view text) {
    const ConfigFile file = ConfigFile::parse(text);
    RunConfig rc;
    PipelineConfig& p = rc.pipeline;
    std::vector<std::string> tolerance_spec;

    for (const auto& [name, entries] : file.sections) {
        SectionReader r(name, entries);
        if (name == "schema") {
            Schema s;
            r.on("id", [&](const std::string& v) { s.id_column = v; });
            r.on("weight", [&](const std::string& v) { s.weight_column = v; });
            r.on("names", [&](const std::string& v) { s.name_columns = list(v); });
            r.on("numeric", [&](const std::string& v) { s.numeric_features = list(v); });
            r.on("categorical", [&](const std::string& v) { s.categorical_features = list(v); });
            r.on("sensitive", [&](const std::string& v) { s.sensitive_column = v; });
            r.on("groups", [&](const std::string& v) {
                auto g = list(v);
                if (g.size() != 2) throw ConfigError("[schema] groups must list exactly two groups");
                s.sensitive_groups = {g[0], g[1]};
            });
            r.on("label", [&](const std::string& v) { s.label_column = v; });
            r.run();
            as_config_error("schema", [&] { s.validate(); });
            rc.schema = s;
        } else if (name == "sanitize") {
            r.on("k", [&](const std::string& v) {
                if (lower(v) == "auto") {
                    p.sanitize.k.reset();
                } else {
                    p.sanitize.k = r.integer(v, "k");
                }
            });
            r.on("seed", [&](const std::string& v) { p.sanitize.seed = r.integer(v, "seed"); });
            r.on("max_iter", [&](const std::string& v) { p.sanitize.max_iter = r.integer(v, "max_iter"); });
            r.on("min_cluster_size", [&](const std::string& v) { p.sanitize.policy.min_cluster_size = r.integer(v, "min_cluster_size"); });
            r.on("tau", [&](const std::string& v) { p.sanitize.policy.tau = r.real(v, "tau"); });
            r.run();
            as_config_error("sanitize", [&] { p.sanitize.policy.validate(); });
        } else if (name == "resolve") {
            r.on("min_prefix", [&](const std::string& v) { p.rules.min_prefix = r.integer(v, "min_prefix"); });
            r.on("numeric_tolerance", [&](const std::string& v) { tolerance_spec = list(v); });
            r.on("require_same_group", [&](const std::string& v) { p.rules.require_same_group = r.boolean(v, "require_same_group"); });
            r.on("weight_mode", [&](const std::string& v) {
                const std::string l = lower(v);
                if (l == "sum_weights") {
                    p.merge.weight_mode = WeightMode::SumWeights;
                } else if (l == "keep_one") {
                    p.merge.weight_mode = WeightMode::KeepOne;
                } else {
                    throw ConfigError("[resolve] weight_mode must be sum_weights or keep_one");
                }
            });
            r.run();
        } else if (name == "reweigh") {
            r.on("mode", [&](const std::string& v) {
                const std::string l = lower(v);
                if (l == "upweight_positives") {
                    p.reweigh.mode = ReweighMode::UpweightPositives;
                } else if (l == "downweight_negatives") {
                    p.reweigh.mode = ReweighMode::DownweightNegatives;
                } else {
                    throw ConfigError("[reweigh] mode must be upweight_positives or downweight_negatives");
                }
            });
            r.run();
        } else if (name == "train") {
            r.on("learning_rate", [&](const std::string& v) { p.train.learning_rate = r.real(v, "learning_rate"); });
            r.on("epochs", [&](const std::string& v) { p.train.epochs = r.integer(v, "epochs"); });
            r.on("l2_lambda", [&](const std::string& v) { p.train.l2_lambda = r.real(v, "l2_lambda"); });
            r.on("seed", [&](const std::string& v) { p.train.seed = r.integer(v, "seed"); });
            r.on("convergence_tol", [&](const std::string& v) { p.train.convergence_tol = r.real(v, "convergence_tol"); });
            r.run();
            as_config_error("train", [&] { p.train.validate(); });
        } else if (name == "pipeline") {
            std::string mode = "sequence";
            std::string stages;
            r.on("mode", [&](const std::string& v) { mode = lower(v); });
            r.on("stages", [&](const std::string& v) { stages = v; });
            r.on("test_fraction", [&](const std::string& v) { p.test_fraction = r.real(v, "test_fraction"); });
            r.on("split_seed", [&](const std::string& v) { p.split_seed = r.integer(v, "split_seed"); });
            r.on("sanitize_test", [&](const std::string& v) { p.sanitize_test = r.boolean(v, "sanitize_test"); });
            r.run();
            if (!(p.test_fraction >= 0.0 && p.test_fraction < 1.0)) throw ConfigError("[pipeline] test_fraction must be in [0, 1)");
            if (mode == "mlclean") {
                if (!stages.empty()) throw ConfigError("[pipeline] stages cannot be combined with mode = mlclean");
                p.mode = PipelineMode::MlClean;
            } else if (mode == "none") {
                p.mode = PipelineMode::Baseline;
            } else if (mode == "sequence") {
                p.mode = PipelineMode::Sequence;
                p.stages.clear();
                for (char c : stages) {
                    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) continue;
                    auto s = stage_from_letter(c);
                    if (!s) throw ConfigError(std::string("[pipeline] unknown stage '") + c + "'");
                    p.stages.push_back(*s);
                }
            } else {
                throw ConfigError("[pipeline] mode must be sequence, mlclean or none");
            }
        } else if (name == "duplicates") {
            auto& d = rc.duplicates;
            r.on("rate", [&](const std::string& v) { d.rate = r.real(v, "rate"); });
            r.on("zipf_s", [&](const std::string& v) { d.zipf_s = r.real(v, "zipf_s"); });
            r.on("max_copies", [&](const std::string& v) { d.max_copies = r.integer(v, "max_copies"); });
            r.on("abbreviation_prob", [&](const std::string& v) { d.abbreviation_prob = r.real(v, "abbreviation_prob"); });
            r.on("min_prefix", [&](const std::string& v) { d.min_prefix = r.integer(v, "min_prefix"); });
            r.on("jitter", [&](const std::string& v) { d.jitter = r.real(v, "jitter"); });
            r.on("seed", [&](const std::string& v) { d.seed = r.integer(v, "seed"); });
            r.run();
            as_config_error("duplicates", [&] { d.validate(); });
        } else if (name == "poison") {
            auto& q = rc.poison;
            r.on("epsilon", [&](const std::string& v) { q.epsilon = r.real(v, "epsilon"); });
            r.on("alpha", [&](const std::string& v) { q.alpha = r.real(v, "alpha"); });
            r.on("label_mode", [&](const std::string& v) {
                if (lower(v) != "flip_majority") throw ConfigError("[poison] label_mode must be flip_majority");
            });
            r.on("seed", [&](const std::string& v) { q.seed = r.integer(v, "seed"); });
            r.run();
            as_config_error("poison", [&] { q.validate(); });
        } else if (name == "synthetic") {
            auto& g = rc.synthetic;
            r.on("n", [&](const std::string& v) { g.n = r.integer(v, "n"); });
            r.on("clusters", [&](const std::string& v) { g.clusters = r.integer(v, "clusters"); });
            r.on("dims", [&](const std::string& v) { g.dims = r.integer(v, "dims"); });
            r.on("separation", [&](const std::string& v) { g.separation = r.real(v, "separation"); });
            r.on("spread", [&](const std::string& v) { g.spread = r.real(v, "spread"); });
            r.on("label_sharpness", [&](const std::string& v) { g.label_sharpness = r.real(v, "label_sharpness"); });
            r.on("group_a_fraction", [&](const std::string& v) { g.group_a_fraction = r.real(v, "group_a_fraction"); });
            r.on("positive_keep_a", [&](const std::string& v) { g.positive_keep_a = r.real(v, "positive_keep_a"); });
            r.on("groups", [&](const std::string& v) {
                auto gs = list(v);
                if (gs.size() != 2) throw ConfigError("[synthetic] groups must list exactly two groups");
                g.groups = {gs[0], gs[1]};
            });
            r.on("seed", [&](const std::string& v) { g.seed = r.integer(v, "seed"); });
            r.run();
            as_config_error("synthetic", [&] { g.validate(); });
        } else if (name == "bench") {
            r.on("methods", [&](const std::string& v) { rc.bench_methods = list(v); });
            r.on("inject_duplicates", [&](const std::string& v) { rc.bench_inject_duplicates = r.boolean(v, "inject_duplicates"); });
            r.on("inject_poison", [&](const std::string& v) { rc.bench_inject_poison = r.boolean(v, "inject_poison"); });
            r.run();
            if (rc.bench_methods.empty()) throw ConfigError("[bench] methods must not be empty");
        } else {
            throw ConfigError("unknown section [" + name + "]");
        }
    }

    if (!tolerance_spec.empty()) {
        // either one value for every numeric feature, or feature:value pairs
        const bool named = tolerance_spec.front().find(':') != std::string::npos;
        if (!named) {
            if (tolerance_spec.size() != 1) throw ConfigError("[resolve] numeric_tolerance: give one value or feature:value pairs");
            auto v = csv::parse_double(tolerance_spec.front());
            if (!v) throw ConfigError("[resolve] numeric_tolerance: not a number");
            // without a [schema] the synthetic generator's features are the ones being matched
            const std::size_t dims = rc.schema ? rc.schema->numeric_features.size() : rc.synthetic.dims;
            p.rules.numeric_tolerance.assign(dims, *v);
        } else {
            const Schema& s = rc.require_schema();
            p.rules.numeric_tolerance.assign(s.numeric_features.size(), 0.0);
            for (const auto& item : tolerance_spec) {
                const auto colon = item.rfind(':');
                if (colon == std::string::npos) throw ConfigError("[resolve] numeric_tolerance: expected feature:value");
                const std::string feature = csv::trim(std::string_view(item).substr(0, colon));
                auto it = std::find(s.numeric_features.begin(), s.numeric_features.end(), feature);
                if (it == s.numeric_features.end()) throw ConfigError("[resolve] numeric_tolerance: unknown feature '" + feature + "'");
                auto v = csv::parse_double(std::string_view(item).substr(colon + 1));
                if (!v) throw ConfigError("[resolve] numeric_tolerance: not a number for '" + feature + "'");
                p.rules.numeric_tolerance[static_cast<std::size_t>(it - s.numeric_features.begin())] = *v;
            }
        }
    }
    if (rc.schema) as_config_error("resolve", [&] { p.rules.validate(*rc.schema); });
    if (p.mode != PipelineMode::Sequence || !p.stages.empty()) as_config_error("pipeline", [&] { p.validate(); });
    return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace mlclean
