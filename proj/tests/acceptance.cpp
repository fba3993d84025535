// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mlclean/errors.hpp"
#include "mlclean/harness.hpp"
#include "mlclean/model.hpp"
#include "mlclean/pipeline.hpp"
#include "mlclean/resolve.hpp"
#include "mlclean/reweigh.hpp"
#include "mlclean/sanitize.hpp"

using namespace mlclean;

namespace {

using Clock = std::chrono::steady_clock;

const char* kTable1 =
    "ID,Weight,Name,Gender,Age,Label\n"
    "e1,1.0,John,M,20,1\n"
    "e2,1.0,Joe,M,20,0\n"
    "e3,1.0,Joseph,M,20,0\n"
    "e4,1.0,Sally,F,30,1\n"
    "e5,1.0,Sally,F,40,0\n"
    "e6,1.0,Sally,F,300,1\n";

Dataset table1() {
    Schema s;
    s.id_column = "ID";
    s.weight_column = "Weight";
    s.name_columns = {"Name"};
    s.numeric_features = {"Age"};
    s.categorical_features = {"Gender"};
    s.sensitive_column = "Gender";
    s.sensitive_groups = {"M", "F"};
    s.label_column = "Label";
    std::istringstream in(kTable1);
    return read_dataset(in, s, "table1");
}

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("failed: " + what);
        }
    }
    void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

double weight_of(const Dataset& d, const std::string& id) {
    auto i = d.index_of(id);
    return i ? d[*i].weight : NAN;
}

PipelineConfig on_table1(PipelineMode mode, std::vector<Stage> stages = {}) {
    PipelineConfig cfg;
    cfg.mode = mode;
    cfg.stages = std::move(stages);
    cfg.sanitize.k = 2;
    cfg.test_fraction = 0.0;
    return cfg;
}

Outcome golden_trace() {
    Outcome o;
    const PreprocessResult res = preprocess(table1(), on_table1(PipelineMode::MlClean));
    o.expect(res.stages.size() == 3, "three stages");
    if (res.stages.size() != 3) return o;
    o.expect(res.stages[0].delta.removed == std::vector<std::string>{"e6"}, "S removes exactly e6");
    const auto& log = res.stages[1].merges;
    o.expect(log && log->entries.size() == 1 && log->entries[0].constituents == std::vector<std::string>{"e2", "e3"},
             "C merges exactly e2,e3");
    if (log && log->entries.size() == 1) {
        o.expect(log->entries[0].weight == 2.0, "merged weight 2.0");
        o.expect(log->entries[0].label == 0, "merged label 0");
    }
    const auto& rw = res.stages[2].reweighing;
    o.expect(rw.has_value(), "M ran");
    if (rw) {
        for (const auto& w : rw->weights) {
            if (w.id == "m:e2;e3") o.expect(w.old_weight == 2.0 && w.new_weight == 1.0, "merged weight 2 -> 1");
        }
    }
    const GroupStats gs = group_stats(res.dataset);
    o.expect(std::fabs(gs[0].ratio() - 0.5) <= 1e-9 && std::fabs(gs[1].ratio() - 0.5) <= 1e-9, "both ratios 0.5");
    o.note("ratios " + fmt(gs[0].ratio(), 6) + " / " + fmt(gs[1].ratio(), 6));
    return o;
}

Outcome reweigh_pair() {
    Outcome o;
    ReweighStrategy up{ReweighMode::UpweightPositives};
    const Dataset d = table1();
    const ReweighResult a = reweigh(d, up);
    o.expect(weight_of(a.dataset, "e1") == 4.0, "e1 weight exactly 4.0");

    const ResolveResult merged = resolve(d, std::nullopt, MatchRules{}, MergePolicy{WeightMode::KeepOne});
    o.expect(weight_of(merged.dataset, "m:e2;e3") == 1.0, "KEEP_ONE merged weight 1.0");
    const ReweighResult b = reweigh(merged.dataset, up);
    o.expect(weight_of(b.dataset, "e1") == 2.0, "e1 weight exactly 2.0 after KEEP_ONE merge");
    o.note("e1: " + fmt(weight_of(a.dataset, "e1"), 17) + ", then " + fmt(weight_of(b.dataset, "e1"), 17));
    return o;
}

Outcome fusion_speedup() {
    Outcome o;
    SyntheticSpec gen;
    gen.n = 5000;
    gen.clusters = 10;
    gen.separation = 50.0;
    gen.seed = 2024;
    const Dataset clean = generate_synthetic(gen);
    DuplicateSpec dup;
    dup.rate = 0.2;
    dup.zipf_s = 2.0;
    dup.seed = 2024;
    const Dataset d = inject_duplicates(clean, dup).dataset;

    PipelineConfig base;
    base.sanitize.k = 10;
    base.sanitize.seed = 1;
    base.split_seed = 1;
    const PipelineConfig fused = PipelineConfig::parse_method("MLClean", base);
    const PipelineConfig seq = PipelineConfig::parse_method("SCM", base);

    // best of three to keep scheduler noise out of the C-stage timing
    double fused_c = INFINITY, seq_c = INFINITY;
    PipelineReport f, s;
    for (int rep = 0; rep < 3; ++rep) {
        f = run_pipeline(d, fused);
        s = run_pipeline(d, seq);
        fused_c = std::min(fused_c, f.stages[1].seconds);
        seq_c = std::min(seq_c, s.stages[1].seconds);
    }
    o.expect(f.final_dataset == s.final_dataset, "identical final datasets");
    o.expect(std::fabs(f.metrics.accuracy - s.metrics.accuracy) <= 1e-9, "accuracy within 1e-9");
    const bool parity_same = f.metrics.parity.undefined() == s.metrics.parity.undefined() &&
                             (f.metrics.parity.undefined() || std::fabs(*f.metrics.parity.value - *s.metrics.parity.value) <= 1e-9);
    o.expect(parity_same, "parity within 1e-9");
    const auto fp = *f.stages[1].pair_comparisons;
    const auto sp = *s.stages[1].pair_comparisons;
    o.expect(5 * fp <= sp, "fused pair count <= 1/5 of sequential");
    o.expect(seq_c >= 2.0 * fused_c, "fused C stage at least 2x faster");
    o.note(std::to_string(d.size()) + " records; pairs " + std::to_string(fp) + " vs " + std::to_string(sp) +
           "; C stage " + fmt(fused_c) + "s vs " + fmt(seq_c) + "s (" + fmt(seq_c / fused_c, 1) + "x)");
    return o;
}

Outcome ordering() {
    Outcome o;
    const PreprocessResult scm =
        preprocess(table1(), on_table1(PipelineMode::Sequence, {Stage::Sanitize, Stage::Clean, Stage::Mitigate}));
    const PreprocessResult msc =
        preprocess(table1(), on_table1(PipelineMode::Sequence, {Stage::Mitigate, Stage::Sanitize, Stage::Clean}));
    const GroupStats a = group_stats(scm.dataset);
    const GroupStats b = group_stats(msc.dataset);
    o.expect(std::fabs(a[0].ratio() - a[1].ratio()) <= 1e-9, "<S,C,M> ends with equal ratios");
    o.expect(std::fabs(b[0].ratio() - 2.0 / 3.0) <= 1e-9 && std::fabs(b[1].ratio() - 0.5) <= 1e-9,
             "<M,S,C> ends with 2/3 vs 1/2");
    o.note("<S,C,M> " + fmt(a[0].ratio()) + "/" + fmt(a[1].ratio()) + ", <M,S,C> " + fmt(b[0].ratio()) + "/" +
           fmt(b[1].ratio()));
    return o;
}

Outcome directional() {
    Outcome o;
    const int seeds = 20;
    double acc_none = 0.0, acc_s = 0.0, recall = 0.0;
    int toward = 0, recall_runs = 0;
    for (int seed = 0; seed < seeds; ++seed) {
        SyntheticSpec gen;
        gen.n = 2000;
        gen.positive_keep_a = 0.25;
        gen.seed = static_cast<std::uint64_t>(seed);
        const Dataset d = generate_synthetic(gen);

        PipelineConfig base;
        base.sanitize.seed = static_cast<std::uint64_t>(seed);
        base.split_seed = static_cast<std::uint64_t>(seed);
        BenchSpec spec;
        spec.split_seed = base.split_seed;
        PoisonSpec ps;
        ps.epsilon = 0.1;
        ps.alpha = 3.0;
        ps.seed = static_cast<std::uint64_t>(seed);
        spec.poison = ps;
        const ComparisonTable t = bench_orderings(
            d, {PipelineConfig::parse_method("S", base), PipelineConfig::parse_method("M", base)}, spec);
        const BenchRow& none = t.rows[0];
        const BenchRow& s = t.rows[1];
        const BenchRow& m = t.rows[2];
        if (none.failed() || s.failed() || m.failed()) {
            o.expect(false, "seed " + std::to_string(seed) + " row failed");
            continue;
        }
        acc_none += none.report->metrics.accuracy;
        acc_s += s.report->metrics.accuracy;
        const auto& pn = none.report->metrics.parity;
        const auto& pm = m.report->metrics.parity;
        if (!pn.undefined() && !pm.undefined() && std::fabs(*pm.value - 1.0) < std::fabs(*pn.value - 1.0)) ++toward;
        if (s.sanitize_recall) {
            recall += *s.sanitize_recall;
            ++recall_runs;
        }
    }
    acc_none /= seeds;
    acc_s /= seeds;
    recall = recall_runs ? recall / recall_runs : 0.0;
    o.expect(acc_s - acc_none >= 0.02, "(a) S improves mean accuracy by >= 2 points");
    o.expect(toward >= 18, "(b) M moves parity toward 1 in >= 18/20 seeds");
    o.expect(recall >= 0.8, "(c) mean sanitization recall >= 0.8");
    o.note("(a) accuracy None " + fmt(acc_none) + " vs S " + fmt(acc_s) + "; (b) " + std::to_string(toward) +
           "/20; (c) recall " + fmt(recall));
    return o;
}

// Property suites, checked independently of the unit tests.
Outcome properties() {
    Outcome o;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> w(0.05, 5.0);
    std::uniform_int_distribution<int> coin(0, 1);

    Schema s;
    s.id_column = "id";
    s.weight_column = "w";
    s.name_columns = {"name"};
    s.numeric_features = {"x", "y"};
    s.categorical_features = {"g"};
    s.sensitive_column = "g";
    s.sensitive_groups = {"A", "B"};
    s.label_column = "label";

    auto random_dataset = [&](std::size_t n) {
        std::vector<Record> rs;
        std::normal_distribution<double> g(0.0, 3.0);
        for (std::size_t i = 0; i < n; ++i) {
            Record r;
            r.id = "r" + std::to_string(i);
            r.weight = w(rng);
            r.names = {"N" + std::to_string(i % 7)};
            r.numeric = {std::round(g(rng)), std::round(g(rng))};
            r.group = i % 2 ? "A" : "B";
            r.categorical = {r.group};
            r.label = coin(rng);
            r.provenance = {r.id};
            rs.push_back(r);
        }
        // every group has both labels
        rs[0].label = 0;
        rs[1].label = 0;
        rs[2].label = 1;
        rs[3].label = 1;
        return Dataset(s, rs);
    };

    int reweigh_bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const Dataset d = random_dataset(4 + rng() % 40);
        const ReweighStrategy st{coin(rng) ? ReweighMode::UpweightPositives : ReweighMode::DownweightNegatives};
        try {
            const ReweighResult r = reweigh(d, st);
            const GroupStats gs = group_stats(r.dataset);
            if (std::fabs(gs[0].ratio() - gs[1].ratio()) > 1e-9) ++reweigh_bad;
            if (!(reweigh(r.dataset, st).dataset == r.dataset)) ++reweigh_bad;
        } catch (const InfeasibleError&) {
            // upweighting cannot reach a reference ratio of 1
            if (st.mode != ReweighMode::UpweightPositives) ++reweigh_bad;
        }
    }
    o.expect(reweigh_bad == 0, "reweigh equality and idempotence (1000 cases)");

    int conservation_bad = 0, blocking_bad = 0;
    for (int i = 0; i < 200; ++i) {
        const Dataset d = random_dataset(10 + rng() % 50);
        const ResolveResult full = resolve(d, std::nullopt, MatchRules{}, MergePolicy{});
        if (std::fabs(full.dataset.total_weight() - d.total_weight()) > 1e-9 * d.total_weight()) ++conservation_bad;

        // blocks = connected components of the unblocked match graph, split further at random
        // where no match crosses; equivalent by construction
        ClusterAssignment blocks;
        std::vector<std::vector<std::string>> groups;
        for (const auto& r : full.dataset.records()) {
            groups.push_back(r.provenance);
        }
        std::shuffle(groups.begin(), groups.end(), rng);
        const std::size_t k = 1 + rng() % groups.size();
        blocks.k = k;
        blocks.per_cluster_ids.assign(k, {});
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            for (const auto& id : groups[gi]) {
                blocks.per_cluster_ids[gi % k].push_back(id);
                blocks.assignment[id] = gi % k;
            }
        }
        blocks.centroids.assign(k, std::vector<double>{});
        const ResolveResult blocked = resolve(d, blocks, MatchRules{}, MergePolicy{});
        if (!(blocked.dataset == full.dataset)) ++blocking_bad;
        if (blocked.log.pair_comparisons != pair_count(blocks)) ++blocking_bad;
    }
    o.expect(conservation_bad == 0, "resolve SUM_WEIGHTS conserves weight");
    o.expect(blocking_bad == 0, "blocked and unblocked resolve agree without cross-block matches");

    int inertia_bad = 0;
    for (int i = 0; i < 100; ++i) {
        const Dataset d = random_dataset(20 + rng() % 80);
        const FeatureMatrix fm = featurize(d);
        const ClusterAssignment ca = kmeans(fm, 1 + rng() % 6, rng());
        for (std::size_t t = 1; t < ca.inertia_history.size(); ++t) {
            if (ca.inertia_history[t] > ca.inertia_history[t - 1] * (1 + 1e-12)) ++inertia_bad;
        }
    }
    o.expect(inertia_bad == 0, "k-means inertia is non-increasing");

    double worst_grad = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Dataset d = random_dataset(10 + rng() % 30);
        const FeatureMatrix fm = featurize(d);
        const auto labels = d.labels();
        std::vector<double> weights;
        for (const auto& r : d.records()) weights.push_back(r.weight);
        const LossProblem p{fm, labels, weights, 0.01};
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> coef(fm.cols), grad(fm.cols);
        for (double& c : coef) c = g(rng);
        const double b = g(rng);
        double gb = 0.0;
        p.gradient(coef, b, grad, gb);
        const double h = 1e-5;
        for (std::size_t j = 0; j <= fm.cols; ++j) {
            double numeric;
            if (j < fm.cols) {
                auto plus = coef, minus = coef;
                plus[j] += h;
                minus[j] -= h;
                numeric = (p.loss(plus, b) - p.loss(minus, b)) / (2 * h);
            } else {
                numeric = (p.loss(coef, b + h) - p.loss(coef, b - h)) / (2 * h);
            }
            const double analytic = j < fm.cols ? grad[j] : gb;
            const double rel = std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            worst_grad = std::max(worst_grad, rel);
        }
    }
    o.expect(worst_grad < 1e-5, "gradient matches central differences within 1e-5 relative");

    double worst_scale = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Dataset d = random_dataset(30 + rng() % 30);
        std::vector<Record> scaled = d.records();
        const double c = 0.01 + w(rng) * 20.0;
        for (auto& r : scaled) r.weight *= c;
        const LinearModel a = train(d, TrainConfig{});
        const LinearModel b = train(Dataset(d.schema(), scaled), TrainConfig{});
        for (std::size_t j = 0; j < a.coefficients.size(); ++j) {
            worst_scale = std::max(worst_scale, std::fabs(a.coefficients[j] - b.coefficients[j]));
        }
        worst_scale = std::max(worst_scale, std::fabs(a.intercept - b.intercept));
    }
    o.expect(worst_scale <= 1e-9, "training invariant to weight scale within 1e-9");
    o.note("max grad rel err " + fmt(worst_grad, 10) + ", max scale diff " + fmt(worst_scale, 12));
    return o;
}

struct Criterion {
    int id;
    const char* title;
    double limit_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "golden running example (fused trace on the six-record example)", 1.0, golden_trace},
        {2, "reweigh golden pair (4.0, then 2.0 after KEEP_ONE)", 1.0, reweigh_pair},
        {3, "fusion equivalence and C-stage speedup", 120.0, fusion_speedup},
        {4, "ordering dependency on the six-record example", 1.0, ordering},
        {5, "directional effects on biased+poisoned synthetic data", 300.0, directional},
        {6, "property suites", 300.0, properties},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        o.expect(secs < c.limit_seconds, "runtime " + fmt(secs, 2) + "s exceeds " + fmt(c.limit_seconds, 0) + "s");
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title << "  [" << fmt(secs, 3)
                  << "s]\n";
        for (const auto& n : o.notes) std::cout << "      " << n << '\n';
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
    return failures == 0 ? 0 : 1;
}
