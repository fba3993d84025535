#include "mlclean/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mlclean/csv.hpp"
#include "mlclean/errors.hpp"

namespace mlclean {

void Schema::validate() const {
    std::set<std::string> seen;
    auto add = [&](const std::string& name, const char* role) {
        if (name.empty()) throw SchemaError(std::string("empty column name for ") + role);
        if (!seen.insert(name).second) throw SchemaError("column '" + name + "' is used more than once");
    };
    add(id_column, "id");
    if (weight_column) add(*weight_column, "weight");
    for (const auto& c : name_columns) add(c, "name");
    for (const auto& c : numeric_features) add(c, "numeric feature");
    for (const auto& c : categorical_features) add(c, "categorical feature");
    if (!categorical_index(sensitive_column)) add(sensitive_column, "sensitive");
    add(label_column, "label");
    if (seen.count(kProvenanceColumn)) throw SchemaError("column name 'provenance' is reserved");
    if (sensitive_groups[0].empty() || sensitive_groups[1].empty() || sensitive_groups[0] == sensitive_groups[1]) {
        throw SchemaError("sensitive_groups must name two distinct groups");
    }
}

std::vector<std::string> Schema::csv_columns() const {
    std::vector<std::string> cols{id_column, weight_column.value_or("weight")};
    cols.insert(cols.end(), name_columns.begin(), name_columns.end());
    cols.insert(cols.end(), numeric_features.begin(), numeric_features.end());
    cols.insert(cols.end(), categorical_features.begin(), categorical_features.end());
    if (!categorical_index(sensitive_column)) cols.push_back(sensitive_column);
    cols.push_back(label_column);
    return cols;
}

std::optional<std::size_t> Schema::categorical_index(const std::string& column) const {
    auto it = std::find(categorical_features.begin(), categorical_features.end(), column);
    if (it == categorical_features.end()) return std::nullopt;
    return static_cast<std::size_t>(it - categorical_features.begin());
}

namespace {

void check_record(const Schema& s, const Record& r) {
    auto fail = [&](const std::string& msg) { throw ValidationError("record '" + r.id + "': " + msg); };
    if (r.id.empty()) throw ValidationError("record with empty id");
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight)) fail("weight must be finite and nonnegative");
    if (r.names.size() != s.name_columns.size()) fail("name field count does not match schema");
    if (r.numeric.size() != s.numeric_features.size()) fail("numeric field count does not match schema");
    if (r.categorical.size() != s.categorical_features.size()) fail("categorical field count does not match schema");
    if (!s.has_group(r.group)) fail("group '" + r.group + "' is not a sensitive group");
    if (r.label != 0 && r.label != 1) fail("label must be 0 or 1");
    if (r.provenance.empty()) fail("empty provenance");
    if (auto ci = s.categorical_index(s.sensitive_column); ci && r.categorical[*ci] != r.group) {
        fail("sensitive categorical value disagrees with group");
    }
}

}  // namespace

Dataset::Dataset(Schema schema, std::vector<Record> records) : schema_(std::move(schema)), records_(std::move(records)) {
    schema_.validate();
    index_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        check_record(schema_, records_[i]);
        if (!index_.emplace(records_[i].id, i).second) throw ValidationError("duplicate id '" + records_[i].id + "'");
    }
}

std::optional<std::size_t> Dataset::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const Record& Dataset::at(const std::string& id) const {
    auto i = index_of(id);
    if (!i) throw ParameterError("unknown id '" + id + "'");
    return records_[*i];
}

double Dataset::total_weight() const {
    double total = 0.0;
    for (const auto& r : records_) total += r.weight;
    return total;
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.label);
    return out;
}

std::vector<std::string> Dataset::groups() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.group);
    return out;
}

std::vector<std::string> Dataset::ids() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.id);
    return out;
}

// ---------------------------------------------------------------------------
// Features

std::size_t FeatureStats::width() const {
    std::size_t w = numeric_names.size();
    for (const auto& l : levels) w += l.size();
    return w;
}

std::vector<std::string> FeatureStats::column_names() const {
    std::vector<std::string> out = numeric_names;
    for (std::size_t c = 0; c < categorical_names.size(); ++c) {
        for (const auto& level : levels[c]) out.push_back(categorical_names[c] + ":" + level);
    }
    return out;
}

double FeatureStats::unstandardize(std::size_t numeric_col, double z) const {
    return z * stddev[numeric_col] + mean[numeric_col];
}

FeatureStats fit_features(const Dataset& d) {
    if (d.empty()) throw ParameterError("cannot featurize an empty dataset");
    const Schema& s = d.schema();
    FeatureStats st;
    st.numeric_names = s.numeric_features;
    st.categorical_names = s.categorical_features;
    const double n = static_cast<double>(d.size());
    for (std::size_t j = 0; j < s.numeric_features.size(); ++j) {
        double sum = 0.0;
        for (const auto& r : d.records()) sum += r.numeric[j];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : d.records()) ss += (r.numeric[j] - mean) * (r.numeric[j] - mean);
        st.mean.push_back(mean);
        st.stddev.push_back(std::sqrt(ss / n));
    }
    for (std::size_t c = 0; c < s.categorical_features.size(); ++c) {
        std::set<std::string> levels;
        for (const auto& r : d.records()) levels.insert(r.categorical[c]);
        st.levels.emplace_back(levels.begin(), levels.end());
    }
    return st;
}

FeatureMatrix featurize(const Dataset& d) { return featurize(d, fit_features(d)); }

FeatureMatrix featurize(const Dataset& d, const FeatureStats& stats) {
    const Schema& s = d.schema();
    if (s.numeric_features != stats.numeric_names || s.categorical_features != stats.categorical_names) {
        throw ValidationError("feature columns do not match the fitted feature statistics");
    }
    FeatureMatrix fm;
    fm.stats = stats;
    fm.column_names = stats.column_names();
    fm.cols = stats.width();
    fm.row_ids = d.ids();
    fm.values.assign(d.size() * fm.cols, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Record& r = d[i];
        double* row = fm.values.data() + i * fm.cols;
        std::size_t col = 0;
        for (std::size_t j = 0; j < stats.numeric_names.size(); ++j, ++col) {
            row[col] = stats.stddev[j] > 0.0 ? (r.numeric[j] - stats.mean[j]) / stats.stddev[j] : 0.0;
        }
        for (std::size_t c = 0; c < stats.levels.size(); ++c) {
            const auto& lv = stats.levels[c];
            auto it = std::lower_bound(lv.begin(), lv.end(), r.categorical[c]);
            if (it != lv.end() && *it == r.categorical[c]) row[col + static_cast<std::size_t>(it - lv.begin())] = 1.0;
            col += lv.size();
        }
    }
    return fm;
}

// ---------------------------------------------------------------------------
// CSV I/O

Dataset read_dataset(std::istream& in, const Schema& schema, const std::string& source) {
    schema.validate();
    csv::Reader reader(in);
    csv::Row header;
    if (!reader.next(header)) throw ValidationError(source + ": missing header row");
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = csv::trim(header[i]);
        if (!pos.emplace(name, i).second) throw SchemaError(source + ": duplicate header column '" + name + "'");
    }
    auto column = [&](const std::string& name) {
        auto it = pos.find(name);
        if (it == pos.end()) throw SchemaError(source + ": missing column '" + name + "'");
        return it->second;
    };
    const std::size_t id_col = column(schema.id_column);
    std::optional<std::size_t> weight_col;
    if (schema.weight_column && pos.count(*schema.weight_column)) weight_col = pos.at(*schema.weight_column);
    std::vector<std::size_t> name_cols, num_cols, cat_cols;
    for (const auto& c : schema.name_columns) name_cols.push_back(column(c));
    for (const auto& c : schema.numeric_features) num_cols.push_back(column(c));
    for (const auto& c : schema.categorical_features) cat_cols.push_back(column(c));
    const std::size_t group_col = column(schema.sensitive_column);
    const std::size_t label_col = column(schema.label_column);
    std::optional<std::size_t> prov_col;
    if (pos.count(kProvenanceColumn)) prov_col = pos.at(kProvenanceColumn);

    std::vector<Record> records;
    csv::Row row;
    while (reader.next(row)) {
        const std::string where = source + " line " + std::to_string(reader.line());
        if (row.size() == 1 && csv::trim(row[0]).empty()) continue;
        if (row.size() != header.size()) {
            throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(row.size()));
        }
        auto cell = [&](std::size_t c, const std::string& name) {
            if (csv::trim(row[c]).empty()) throw ValidationError(where + ": missing value in column '" + name + "'");
            return row[c];
        };
        Record r;
        r.id = csv::trim(cell(id_col, schema.id_column));
        if (weight_col) {
            auto w = csv::parse_double(cell(*weight_col, *schema.weight_column));
            if (!w || *w < 0.0 || !std::isfinite(*w)) {
                throw ValidationError(where + ": invalid weight in column '" + *schema.weight_column + "'");
            }
            r.weight = *w;
        }
        for (std::size_t j = 0; j < name_cols.size(); ++j) r.names.push_back(cell(name_cols[j], schema.name_columns[j]));
        for (std::size_t j = 0; j < num_cols.size(); ++j) {
            auto v = csv::parse_double(cell(num_cols[j], schema.numeric_features[j]));
            if (!v || !std::isfinite(*v)) {
                throw ValidationError(where + ": non-numeric value in column '" + schema.numeric_features[j] + "'");
            }
            r.numeric.push_back(*v);
        }
        for (std::size_t j = 0; j < cat_cols.size(); ++j) {
            r.categorical.push_back(csv::trim(cell(cat_cols[j], schema.categorical_features[j])));
        }
        r.group = csv::trim(cell(group_col, schema.sensitive_column));
        if (!schema.has_group(r.group)) {
            throw ValidationError(where + ": value '" + r.group + "' in column '" + schema.sensitive_column +
                                  "' is not one of the sensitive groups");
        }
        const std::string label = csv::trim(cell(label_col, schema.label_column));
        if (label == "0") {
            r.label = 0;
        } else if (label == "1") {
            r.label = 1;
        } else {
            throw ValidationError(where + ": label '" + label + "' is not binary (expected 0 or 1)");
        }
        if (prov_col && !csv::trim(row[*prov_col]).empty()) {
            for (auto& p : csv::split(row[*prov_col], ';')) r.provenance.push_back(csv::trim(p));
        } else {
            r.provenance = {r.id};
        }
        records.push_back(std::move(r));
    }
    try {
        return Dataset(schema, std::move(records));
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return read_dataset(in, schema, path.string());
}

void write_dataset(std::ostream& out, const Dataset& d) {
    const Schema& s = d.schema();
    csv::Row header = s.csv_columns();
    header.emplace_back(kProvenanceColumn);
    csv::write_row(out, header);
    const bool sensitive_separate = !s.categorical_index(s.sensitive_column);
    for (const auto& r : d.records()) {
        csv::Row row{r.id, csv::format_double(r.weight)};
        row.insert(row.end(), r.names.begin(), r.names.end());
        for (double v : r.numeric) row.push_back(csv::format_double(v));
        row.insert(row.end(), r.categorical.begin(), r.categorical.end());
        if (sensitive_separate) row.push_back(r.group);
        row.push_back(std::to_string(r.label));
        row.push_back(csv::join(r.provenance, ";"));
        csv::write_row(out, row);
    }
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_dataset(out, d);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace mlclean
