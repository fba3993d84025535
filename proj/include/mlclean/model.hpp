#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlclean/dataset.hpp"

namespace mlclean {

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 500;
    double l2_lambda = 1e-4;
    std::uint64_t seed = 0;  // full-batch descent from zero is deterministic; kept for config symmetry
    double convergence_tol = 1e-8;

    void validate() const;
};

struct LinearModel {
    std::vector<std::string> columns;
    std::vector<double> coefficients;
    double intercept = 0.0;
    FeatureStats stats;
    double threshold = 0.5;

    // training diagnostics, not serialized
    std::vector<double> loss_history;  // loss before the first step, then after each accepted step
    std::size_t step_halvings = 0;
};

// Weighted, weight-normalized logistic loss with L2 on the coefficients only:
//   L = sum_i w_i * ce(y_i, sigmoid(theta.x_i + b)) / sum_i w_i + lambda * |theta|^2
struct LossProblem {
    const FeatureMatrix& features;
    std::span<const int> labels;
    std::span<const double> weights;
    double l2_lambda;

    double loss(std::span<const double> coef, double intercept) const;
    // Returns the loss; writes d/dcoef into grad_coef and d/dintercept into grad_intercept.
    double gradient(std::span<const double> coef, double intercept, std::span<double> grad_coef,
                    double& grad_intercept) const;
};

double sigmoid(double z);

LinearModel train(const Dataset& d, const TrainConfig& cfg);
std::vector<double> predict_proba(const LinearModel& m, const Dataset& d);
std::vector<int> predict(const LinearModel& m, const Dataset& d);

double accuracy(std::span<const int> predicted, std::span<const int> actual);

struct ParityRatio {
    std::optional<double> value;  // nullopt when groupB's positive rate is 0 or a group is absent
    double rate_a = 0.0;
    double rate_b = 0.0;
    std::size_t count_a = 0;
    std::size_t count_b = 0;

    bool undefined() const { return !value.has_value(); }
};

// Positive-prediction rate of groupA divided by that of groupB.
ParityRatio parity_ratio(std::span<const int> predicted, std::span<const std::string> groups, const Schema& schema);

struct MetricsReport {
    double accuracy = 0.0;
    ParityRatio parity;
};

MetricsReport evaluate(const LinearModel& m, const Dataset& d);

void write_model(std::ostream& out, const LinearModel& m);
LinearModel read_model(std::istream& in);

}  // namespace mlclean
