// mlclean command-line front end.
//
// Exit codes: 0 ok, 1 validation or configuration error, 2 a stage could not
// run on the data, 3 I/O error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mlclean/config.hpp"
#include "mlclean/csv.hpp"
#include "mlclean/dataset.hpp"
#include "mlclean/errors.hpp"
#include "mlclean/harness.hpp"
#include "mlclean/model.hpp"
#include "mlclean/pipeline.hpp"
#include "mlclean/resolve.hpp"
#include "mlclean/reweigh.hpp"
#include "mlclean/sanitize.hpp"

namespace fs = std::filesystem;
using namespace mlclean;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

class Context {
public:
    explicit Context(const Globals& g) : out_dir_(g.out_dir) {
        if (!g.config.empty()) rc_ = load_config(g.config);
        if (g.seed) rc_.override_seed(*g.seed);
    }

    RunConfig& config() { return rc_; }

    // The [schema] section, or the synthetic generator's layout when absent.
    Schema schema() const { return rc_.schema ? *rc_.schema : synthetic_schema(rc_.synthetic); }

    Dataset load(const std::string& path) const { return load_dataset(path, schema()); }

    fs::path out(const std::string& name) const {
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + out_dir_.string() + "': " + ec.message());
        return out_dir_ / name;
    }

    template <typename Fn>
    void write(const std::string& name, Fn&& fn) const {
        const fs::path p = out(name);
        std::ofstream f(p, std::ios::binary);
        if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
        fn(f);
        f.flush();
        if (!f) throw IoError("write failed for '" + p.string() + "'");
        std::cerr << "wrote " << p.string() << '\n';
    }

    void save(const Dataset& d, const std::string& name) const {
        save_dataset(d, out(name));
        std::cerr << "wrote " << out(name).string() << " (" << d.size() << " records)\n";
    }

private:
    RunConfig rc_;
    fs::path out_dir_;
};

std::vector<std::string> read_ids(const std::string& list, const std::string& file) {
    std::vector<std::string> ids;
    for (auto& s : csv::split(list, ',')) {
        auto t = csv::trim(s);
        if (!t.empty()) ids.push_back(t);
    }
    if (file.empty()) return ids;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open id file '" + file + "'");
    csv::Reader reader(in);
    csv::Row row;
    bool first = true;
    bool truth_format = false;
    while (reader.next(row)) {
        if (row.empty() || (row.size() == 1 && csv::trim(row[0]).empty())) continue;
        if (first) {
            first = false;
            // a ground-truth file contributes its poison ids
            if (row.size() >= 2 && row[0] == "kind" && row[1] == "id") {
                truth_format = true;
                continue;
            }
        }
        if (truth_format) {
            if (row.size() >= 2 && row[0] == "poison") ids.push_back(row[1]);
        } else {
            ids.push_back(csv::trim(row[0]));
        }
    }
    return ids;
}

void print_metrics(std::ostream& out, const MetricsReport& m) {
    out << "accuracy " << csv::format_double(m.accuracy) << "  fairness " << format_fairness(m.parity) << "  (rate "
        << m.parity.rate_a << " vs " << m.parity.rate_b << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Preprocessing pipeline for weighted tabular training data: sanitize, clean, reweigh, train, compare"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "Configuration file");
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed for every random component");
    app.add_option("--out-dir", g.out_dir, "Directory for all outputs")->capture_default_str();

    std::string input, dups_out, poison_out, synth_out, model_out, model_path, method, test_input, ids_list, ids_file;
    std::optional<std::size_t> k_override;
    std::string reweigh_mode;

    auto* inject_dups = app.add_subcommand("inject-dups", "Append Zipf-distributed duplicate copies");
    inject_dups->add_option("-i,--input", input, "Dataset CSV")->required();
    inject_dups->add_option("-o,--output", dups_out, "Output file name")->default_val("duplicated.csv");

    auto* inject_poison_cmd = app.add_subcommand("inject-poison", "Append out-of-range poison records");
    inject_poison_cmd->add_option("-i,--input", input, "Dataset CSV")->required();
    inject_poison_cmd->add_option("-o,--output", poison_out, "Output file name")->default_val("poisoned.csv");

    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset from the [synthetic] section");
    generate->add_option("-o,--output", synth_out, "Output file name")->default_val("synthetic.csv");

    auto* sanitize_cmd = app.add_subcommand("sanitize", "Remove k-means outliers");
    sanitize_cmd->add_option("-i,--input", input, "Dataset CSV")->required();
    sanitize_cmd->add_option("-k", k_override, "Cluster count (default from config or round(sqrt(n/2)))");

    auto* clean_cmd = app.add_subcommand("clean", "Merge duplicate records");
    clean_cmd->add_option("-i,--input", input, "Dataset CSV")->required();

    auto* reweigh_cmd = app.add_subcommand("reweigh", "Equalize group positive ratios by reweighing");
    reweigh_cmd->add_option("-i,--input", input, "Dataset CSV")->required();
    reweigh_cmd->add_option("--mode", reweigh_mode, "upweight_positives or downweight_negatives")
        ->check(CLI::IsMember({"upweight_positives", "downweight_negatives"}));

    auto* train_cmd = app.add_subcommand("train", "Train the weighted logistic model");
    train_cmd->add_option("-i,--input", input, "Training CSV")->required();
    train_cmd->add_option("-m,--model", model_out, "Model file name")->default_val("model.txt");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Accuracy and parity ratio of a saved model");
    evaluate_cmd->add_option("-i,--input", input, "Evaluation CSV")->required();
    evaluate_cmd->add_option("-m,--model", model_path, "Model file")->required();

    auto* pipeline_cmd = app.add_subcommand("pipeline", "Run one preprocessing pipeline, then train and evaluate");
    pipeline_cmd->add_option("-i,--input", input, "Dataset CSV")->required();
    pipeline_cmd->add_option("--method", method, "None, MLClean, or stage letters such as SCM");
    pipeline_cmd->add_option("--test", test_input, "Separate evaluation CSV (otherwise split by test_fraction)");

    auto* bench_cmd = app.add_subcommand("bench", "Compare orderings on one split and one injected training set");
    bench_cmd->add_option("-i,--input", input, "Dataset CSV (default: synthetic data from [synthetic])");

    auto* impact_cmd = app.add_subcommand("impact", "Accuracy change from dropping records out of training");
    impact_cmd->add_option("-i,--input", input, "Dataset CSV")->required();
    impact_cmd->add_option("--ids", ids_list, "Comma-separated ids");
    impact_cmd->add_option("--ids-file", ids_file, "One id per line, or a ground-truth CSV (poison ids)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorKind::Validation);
    }
    if (*seed_opt) g.seed = seed_value;

    try {
        Context ctx(g);
        RunConfig& rc = ctx.config();

        if (*generate) {
            ctx.save(generate_synthetic(rc.synthetic), synth_out);
        } else if (*inject_dups) {
            const Injected inj = inject_duplicates(ctx.load(input), rc.duplicates);
            ctx.save(inj.dataset, dups_out);
            ctx.write(fs::path(dups_out).stem().string() + ".truth.csv", [&](std::ostream& o) { write_ground_truth(o, inj.truth); });
        } else if (*inject_poison_cmd) {
            const Injected inj = inject_poison(ctx.load(input), rc.poison);
            ctx.save(inj.dataset, poison_out);
            ctx.write(fs::path(poison_out).stem().string() + ".truth.csv", [&](std::ostream& o) { write_ground_truth(o, inj.truth); });
        } else if (*sanitize_cmd) {
            SanitizeParams params = rc.pipeline.sanitize;
            if (k_override) params.k = *k_override;
            const SanitizeResult res = sanitize(ctx.load(input), params);
            ctx.save(res.dataset, "sanitized.csv");
            ctx.write("sanitization_report.csv", [&](std::ostream& o) { write_sanitization_report(o, res.report); });
            std::cout << "flagged " << res.report.flagged.size() << " of " << res.report.flagged.size() + res.dataset.size()
                      << " records\n";
        } else if (*clean_cmd) {
            const ResolveResult res = resolve(ctx.load(input), std::nullopt, rc.pipeline.rules, rc.pipeline.merge);
            ctx.save(res.dataset, "cleaned.csv");
            ctx.write("merge_log.csv", [&](std::ostream& o) { write_merge_log(o, res.log); });
            std::cout << "merged " << res.log.entries.size() << " groups using " << res.log.pair_comparisons
                      << " pair comparisons\n";
        } else if (*reweigh_cmd) {
            ReweighStrategy st = rc.pipeline.reweigh;
            if (reweigh_mode == "upweight_positives") st.mode = ReweighMode::UpweightPositives;
            if (reweigh_mode == "downweight_negatives") st.mode = ReweighMode::DownweightNegatives;
            const ReweighResult res = reweigh(ctx.load(input), st);
            ctx.save(res.dataset, "reweighed.csv");
            ctx.write("reweigh_report.csv", [&](std::ostream& o) { write_reweigh_report(o, res.report); });
            for (std::size_t i = 0; i < 2; ++i) {
                std::cout << res.report.groups[i] << ": ratio " << res.report.ratio_before[i] << " -> "
                          << res.report.ratio_after[i] << " (factor " << res.report.factor[i] << ")\n";
            }
        } else if (*train_cmd) {
            const LinearModel m = train(ctx.load(input), rc.pipeline.train);
            ctx.write(model_out, [&](std::ostream& o) { write_model(o, m); });
            std::cout << "trained " << m.coefficients.size() << " coefficients, final loss "
                      << (m.loss_history.empty() ? 0.0 : m.loss_history.back()) << '\n';
        } else if (*evaluate_cmd) {
            std::ifstream in(model_path, std::ios::binary);
            if (!in) throw IoError("cannot open model '" + model_path + "'");
            const LinearModel m = read_model(in);
            const MetricsReport r = evaluate(m, ctx.load(input));
            print_metrics(std::cout, r);
            ctx.write("metrics.csv", [&](std::ostream& o) {
                csv::write_row(o, {"accuracy", "fairness", "rate_a", "rate_b"});
                csv::write_row(o, {csv::format_double(r.accuracy), format_fairness(r.parity),
                                   csv::format_double(r.parity.rate_a), csv::format_double(r.parity.rate_b)});
            });
        } else if (*pipeline_cmd) {
            PipelineConfig cfg = rc.pipeline;
            if (!method.empty()) cfg = PipelineConfig::parse_method(method, cfg);
            const Dataset d = ctx.load(input);
            const PipelineReport rep = test_input.empty() ? run_pipeline(d, cfg) : run_pipeline(d, ctx.load(test_input), cfg);
            write_stage_table(std::cout, rep);
            ctx.save(rep.final_dataset, "final.csv");
            ctx.write("pipeline.csv", [&](std::ostream& o) { write_pipeline_csv(o, std::span(&rep, 1)); });
            ctx.write("stages.txt", [&](std::ostream& o) { write_stage_table(o, rep); });
            ctx.write("model.txt", [&](std::ostream& o) { write_model(o, rep.model); });
        } else if (*bench_cmd) {
            const Dataset d = input.empty() ? generate_synthetic(rc.synthetic) : ctx.load(input);
            std::vector<PipelineConfig> configs;
            for (const auto& m : rc.bench_methods) configs.push_back(PipelineConfig::parse_method(m, rc.pipeline));
            const ComparisonTable t = bench_orderings(d, configs, rc.bench_spec(), rc.bench_methods);
            write_comparison_text(std::cout, t);
            ctx.write("comparison.csv", [&](std::ostream& o) { write_comparison_csv(o, t); });
            ctx.write("comparison.txt", [&](std::ostream& o) { write_comparison_text(o, t); });
            ctx.write("ground_truth.csv", [&](std::ostream& o) { write_ground_truth(o, t.truth); });
        } else if (*impact_cmd) {
            const std::vector<std::string> ids = read_ids(ids_list, ids_file);
            const double delta = impact(ctx.load(input), ids, rc.pipeline);
            std::cout << "dropping " << ids.size() << " records changes accuracy by " << csv::format_double(delta) << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Validation);
    }
    return 0;
}
