#pragma once

#include <sstream>
#include <string>

#include "mlclean/dataset.hpp"

namespace mlclean::testing {

inline Schema table1_schema() {
    Schema s;
    s.id_column = "ID";
    s.weight_column = "Weight";
    s.name_columns = {"Name"};
    s.numeric_features = {"Age"};
    s.categorical_features = {"Gender"};
    s.sensitive_column = "Gender";
    s.sensitive_groups = {"M", "F"};
    s.label_column = "Label";
    return s;
}

inline const char* kTable1Csv =
    "ID,Weight,Name,Gender,Age,Label\n"
    "e1,1.0,John,M,20,1\n"
    "e2,1.0,Joe,M,20,0\n"
    "e3,1.0,Joseph,M,20,0\n"
    "e4,1.0,Sally,F,30,1\n"
    "e5,1.0,Sally,F,40,0\n"
    "e6,1.0,Sally,F,300,1\n";

inline Dataset table1() {
    std::istringstream in(kTable1Csv);
    return read_dataset(in, table1_schema(), "table1");
}

inline Dataset parse(const std::string& text, const Schema& schema = table1_schema()) {
    std::istringstream in(text);
    return read_dataset(in, schema, "inline");
}

inline Dataset without(const Dataset& d, const std::string& id) {
    std::vector<Record> rs;
    for (const auto& r : d.records()) {
        if (r.id != id) rs.push_back(r);
    }
    return Dataset(d.schema(), rs);
}

}  // namespace mlclean::testing
