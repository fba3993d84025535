#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mlclean {

// Column roles of a tabular training set. The sensitive column may also be
// listed as a categorical feature; every other column name must be unique.
struct Schema {
    std::string id_column;
    std::optional<std::string> weight_column;
    std::vector<std::string> name_columns;
    std::vector<std::string> numeric_features;
    std::vector<std::string> categorical_features;
    std::string sensitive_column;
    std::array<std::string, 2> sensitive_groups;  // (groupA, groupB); fixes parity orientation
    std::string label_column;

    void validate() const;

    // Column order used when writing a dataset, without the provenance column.
    std::vector<std::string> csv_columns() const;
    std::optional<std::size_t> categorical_index(const std::string& column) const;
    bool has_group(const std::string& g) const { return g == sensitive_groups[0] || g == sensitive_groups[1]; }

    bool operator==(const Schema&) const = default;
};

inline constexpr const char* kProvenanceColumn = "provenance";

struct Record {
    std::string id;
    double weight = 1.0;
    std::vector<std::string> names;
    std::vector<double> numeric;
    std::vector<std::string> categorical;
    std::string group;
    int label = 0;
    std::vector<std::string> provenance;  // original ids, ascending

    bool operator==(const Record&) const = default;
};

// An immutable, validated collection of records. Transformations build a new
// Dataset rather than editing one in place.
class Dataset {
public:
    Dataset() = default;
    Dataset(Schema schema, std::vector<Record> records);

    const Schema& schema() const noexcept { return schema_; }
    const std::vector<Record>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const Record& operator[](std::size_t i) const { return records_[i]; }

    std::optional<std::size_t> index_of(const std::string& id) const;
    const Record& at(const std::string& id) const;
    double total_weight() const;
    std::vector<int> labels() const;
    std::vector<std::string> groups() const;
    std::vector<std::string> ids() const;

    bool operator==(const Dataset& o) const { return schema_ == o.schema_ && records_ == o.records_; }

private:
    Schema schema_;
    std::vector<Record> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Standardization and encoding parameters fitted on one dataset and reusable
// on another (e.g. a held-out split).
struct FeatureStats {
    std::vector<std::string> numeric_names;
    std::vector<double> mean;
    std::vector<double> stddev;  // population; 0 for constant columns
    std::vector<std::string> categorical_names;
    std::vector<std::vector<std::string>> levels;  // sorted per categorical column

    std::size_t width() const;
    std::vector<std::string> column_names() const;
    double unstandardize(std::size_t numeric_col, double z) const;

    bool operator==(const FeatureStats&) const = default;
};

struct FeatureMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> column_names;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major
    FeatureStats stats;

    std::size_t rows() const noexcept { return row_ids.size(); }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

FeatureStats fit_features(const Dataset& d);
FeatureMatrix featurize(const Dataset& d);
// Unseen categorical levels encode as all-zero indicator columns.
FeatureMatrix featurize(const Dataset& d, const FeatureStats& stats);

Dataset read_dataset(std::istream& in, const Schema& schema, const std::string& source = "<stream>");
Dataset load_dataset(const std::filesystem::path& path, const Schema& schema);
void write_dataset(std::ostream& out, const Dataset& d);
void save_dataset(const Dataset& d, const std::filesystem::path& path);

}  // namespace mlclean
