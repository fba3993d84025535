#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mlclean/dataset.hpp"
#include "mlclean/harness.hpp"
#include "mlclean/pipeline.hpp"

namespace mlclean {

// UTF-8 text, "[section]" headers, one "key = value" per line, '#' comments.
struct ConfigFile {
    struct Entry {
        std::string value;
        std::size_t line;
    };
    std::map<std::string, std::map<std::string, Entry>> sections;

    static ConfigFile parse(std::string_view text);
};

struct RunConfig {
    std::optional<Schema> schema;
    PipelineConfig pipeline;  // [sanitize] [resolve] [reweigh] [train] [pipeline]
    DuplicateSpec duplicates;
    PoisonSpec poison;
    SyntheticSpec synthetic;

    // [bench]
    std::vector<std::string> bench_methods{"None", "S", "C", "M", "MSC", "SCM", "MLClean"};
    bool bench_inject_duplicates = true;
    bool bench_inject_poison = true;

    // Sets every seed (split, k-means, training, injectors, generator).
    void override_seed(std::uint64_t seed);
    const Schema& require_schema() const;
    BenchSpec bench_spec() const;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace mlclean
