#include "mlclean/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

constexpr std::size_t kMaxHalvings = 60;

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
    if (!(l2_lambda >= 0.0)) throw ParameterError("l2_lambda must be nonnegative");
    if (!(convergence_tol >= 0.0)) throw ParameterError("convergence_tol must be nonnegative");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double LossProblem::loss(std::span<const double> coef, double intercept) const {
    double total_w = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const double z = dot(coef, features.row(i)) + intercept;
        acc += weights[i] * (softplus(z) - labels[i] * z);
        total_w += weights[i];
    }
    return acc / total_w + l2_lambda * dot(coef, coef);
}

double LossProblem::gradient(std::span<const double> coef, double intercept, std::span<double> grad_coef,
                             double& grad_intercept) const {
    std::fill(grad_coef.begin(), grad_coef.end(), 0.0);
    grad_intercept = 0.0;
    double total_w = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto x = features.row(i);
        const double z = dot(coef, x) + intercept;
        acc += weights[i] * (softplus(z) - labels[i] * z);
        total_w += weights[i];
        const double r = weights[i] * (sigmoid(z) - labels[i]);
        for (std::size_t j = 0; j < x.size(); ++j) grad_coef[j] += r * x[j];
        grad_intercept += r;
    }
    for (std::size_t j = 0; j < coef.size(); ++j) grad_coef[j] = grad_coef[j] / total_w + 2.0 * l2_lambda * coef[j];
    grad_intercept /= total_w;
    return acc / total_w + l2_lambda * dot(coef, coef);
}

LinearModel train(const Dataset& d, const TrainConfig& cfg) {
    cfg.validate();
    if (d.empty()) throw InfeasibleError("training error: empty dataset");
    bool has0 = false, has1 = false;
    for (const auto& r : d.records()) (r.label == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw InfeasibleError("training error: dataset contains a single label");
    if (!(d.total_weight() > 0.0)) throw InfeasibleError("training error: total example weight is zero");

    const FeatureMatrix fm = featurize(d);
    const std::vector<int> labels = d.labels();
    std::vector<double> weights;
    weights.reserve(d.size());
    for (const auto& r : d.records()) weights.push_back(r.weight);
    const LossProblem problem{fm, labels, weights, cfg.l2_lambda};

    LinearModel m;
    m.columns = fm.column_names;
    m.stats = fm.stats;
    m.coefficients.assign(fm.cols, 0.0);

    std::vector<double> grad(fm.cols), next(fm.cols);
    double grad_b = 0.0;
    double step = cfg.learning_rate;
    double current = problem.loss(m.coefficients, m.intercept);
    m.loss_history.push_back(current);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        problem.gradient(m.coefficients, m.intercept, grad, grad_b);
        double next_b = 0.0, next_loss = 0.0;
        std::size_t halvings = 0;
        for (;;) {
            for (std::size_t j = 0; j < fm.cols; ++j) next[j] = m.coefficients[j] - step * grad[j];
            next_b = m.intercept - step * grad_b;
            next_loss = problem.loss(next, next_b);
            if (next_loss <= current || halvings == kMaxHalvings) break;
            step *= 0.5;
            ++halvings;
            ++m.step_halvings;
        }
        if (next_loss > current) break;  // no descent step exists at machine precision
        m.coefficients.swap(next);
        m.intercept = next_b;
        const double delta = current - next_loss;
        current = next_loss;
        m.loss_history.push_back(current);
        if (std::fabs(delta) < cfg.convergence_tol) break;
    }
    return m;
}

std::vector<double> predict_proba(const LinearModel& m, const Dataset& d) {
    const FeatureMatrix fm = featurize(d, m.stats);
    if (fm.cols != m.coefficients.size()) throw ValidationError("feature width does not match the model");
    std::vector<double> out;
    out.reserve(fm.rows());
    for (std::size_t i = 0; i < fm.rows(); ++i) out.push_back(sigmoid(dot(m.coefficients, fm.row(i)) + m.intercept));
    return out;
}

std::vector<int> predict(const LinearModel& m, const Dataset& d) {
    std::vector<int> out;
    for (double p : predict_proba(m, d)) out.push_back(p >= m.threshold ? 1 : 0);
    return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size()) throw ParameterError("accuracy: prediction and label counts differ");
    if (predicted.empty()) throw ParameterError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == actual[i];
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

ParityRatio parity_ratio(std::span<const int> predicted, std::span<const std::string> groups, const Schema& schema) {
    if (predicted.size() != groups.size()) throw ParameterError("parity_ratio: prediction and group counts differ");
    ParityRatio pr;
    std::size_t pos_a = 0, pos_b = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (groups[i] == schema.sensitive_groups[0]) {
            ++pr.count_a;
            pos_a += predicted[i] == 1;
        } else if (groups[i] == schema.sensitive_groups[1]) {
            ++pr.count_b;
            pos_b += predicted[i] == 1;
        } else {
            throw ParameterError("parity_ratio: unknown group '" + groups[i] + "'");
        }
    }
    if (pr.count_a == 0 || pr.count_b == 0) return pr;  // a missing group leaves the ratio undefined
    pr.rate_a = static_cast<double>(pos_a) / static_cast<double>(pr.count_a);
    pr.rate_b = static_cast<double>(pos_b) / static_cast<double>(pr.count_b);
    if (pr.rate_b > 0.0) pr.value = pr.rate_a / pr.rate_b;
    return pr;
}

MetricsReport evaluate(const LinearModel& m, const Dataset& d) {
    const std::vector<int> pred = predict(m, d);
    const std::vector<int> actual = d.labels();
    const std::vector<std::string> groups = d.groups();
    return {accuracy(pred, actual), parity_ratio(pred, groups, d.schema())};
}

// ---------------------------------------------------------------------------
// Text serialization: "[section]" headers and key=value lines.

void write_model(std::ostream& out, const LinearModel& m) {
    out << "[model]\n";
    out << "intercept=" << csv::format_double(m.intercept) << '\n';
    out << "threshold=" << csv::format_double(m.threshold) << '\n';
    out << "[coefficients]\n";
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
        out << m.columns[j] << '=' << csv::format_double(m.coefficients[j]) << '\n';
    }
    out << "[numeric]\n";
    for (std::size_t j = 0; j < m.stats.numeric_names.size(); ++j) {
        out << m.stats.numeric_names[j] << '=' << csv::format_double(m.stats.mean[j]) << ';'
            << csv::format_double(m.stats.stddev[j]) << '\n';
    }
    out << "[categorical]\n";
    for (std::size_t c = 0; c < m.stats.categorical_names.size(); ++c) {
        out << m.stats.categorical_names[c] << '=' << csv::join(m.stats.levels[c], ";") << '\n';
    }
}

LinearModel read_model(std::istream& in) {
    LinearModel m;
    std::string line, section;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw ValidationError("model file line " + std::to_string(lineno) + ": " + msg);
    };
    auto number = [&](const std::string& s) {
        auto v = csv::parse_double(s);
        if (!v) fail("not a number: '" + s + "'");
        return *v;
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = csv::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            continue;
        }
        const auto eq = t.rfind('=');
        if (eq == std::string::npos) fail("expected key=value");
        const std::string key = t.substr(0, eq);
        const std::string value = t.substr(eq + 1);
        if (section == "model") {
            if (key == "intercept") {
                m.intercept = number(value);
            } else if (key == "threshold") {
                m.threshold = number(value);
            } else {
                fail("unknown key '" + key + "'");
            }
        } else if (section == "coefficients") {
            m.columns.push_back(key);
            m.coefficients.push_back(number(value));
        } else if (section == "numeric") {
            auto parts = csv::split(value, ';');
            if (parts.size() != 2) fail("expected mean;stddev");
            m.stats.numeric_names.push_back(key);
            m.stats.mean.push_back(number(parts[0]));
            m.stats.stddev.push_back(number(parts[1]));
        } else if (section == "categorical") {
            m.stats.categorical_names.push_back(key);
            m.stats.levels.push_back(value.empty() ? std::vector<std::string>{} : csv::split(value, ';'));
        } else {
            fail("unknown section '" + section + "'");
        }
    }
    if (m.stats.column_names() != m.columns) throw ValidationError("model coefficients do not match its feature stats");
    return m;
}

}  // namespace mlclean
