#include "doctest.h"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mlclean/errors.hpp"
#include "mlclean/resolve.hpp"

using namespace mlclean;
using mlclean::testing::parse;
using mlclean::testing::table1;
using mlclean::testing::without;

namespace {

ClusterAssignment blocks_of(const std::vector<std::vector<std::string>>& groups) {
    ClusterAssignment ca;
    ca.k = groups.size();
    ca.per_cluster_ids = groups;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        for (const auto& id : groups[c]) ca.assignment.emplace(id, c);
    }
    return ca;
}

// Brute-force oracle: repeated relaxation of component labels over all pairs.
std::vector<std::set<std::string>> oracle_components(const Dataset& d, const MatchRules& rules) {
    std::vector<std::size_t> label(d.size());
    std::iota(label.begin(), label.end(), 0);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < d.size(); ++i) {
            for (std::size_t j = 0; j < d.size(); ++j) {
                if (i != j && match_pair(d[i], d[j], rules) && label[j] < label[i]) {
                    label[i] = label[j];
                    changed = true;
                }
            }
        }
    }
    std::map<std::size_t, std::set<std::string>> comps;
    for (std::size_t i = 0; i < d.size(); ++i) comps[label[i]].insert(d[i].id);
    std::vector<std::set<std::string>> out;
    for (auto& [k, v] : comps) {
        if (v.size() > 1) out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::set<std::string>> merged_sets(const MergeLog& log) {
    std::vector<std::set<std::string>> out;
    for (const auto& e : log.entries) out.emplace_back(e.constituents.begin(), e.constituents.end());
    std::sort(out.begin(), out.end());
    return out;
}

Schema people_schema() {
    Schema s;
    s.id_column = "id";
    s.weight_column = "w";
    s.name_columns = {"first", "last"};
    s.numeric_features = {"age"};
    s.categorical_features = {"city"};
    s.sensitive_column = "g";
    s.sensitive_groups = {"A", "B"};
    s.label_column = "y";
    return s;
}

Dataset random_people(std::mt19937_64& rng, std::size_t n) {
    static const std::vector<std::string> firsts{"Jo", "Joe", "Joseph", "Ann", "Anna", "Annabel", "Bo", "Bob"};
    static const std::vector<std::string> lasts{"Li", "Lim", "Lime", "Kay", "Kaye"};
    std::vector<Record> rs;
    for (std::size_t i = 0; i < n; ++i) {
        Record r;
        r.id = "r" + std::to_string(i);
        r.weight = static_cast<double>(1 + rng() % 4) / 2.0;
        r.names = {firsts[rng() % firsts.size()], lasts[rng() % lasts.size()]};
        r.numeric = {static_cast<double>(20 + rng() % 4)};
        r.categorical = {rng() % 2 ? "x" : "y"};
        r.group = rng() % 3 ? "A" : "B";
        r.label = static_cast<int>(rng() % 2);
        r.provenance = {r.id};
        rs.push_back(r);
    }
    return Dataset(people_schema(), rs);
}

}  // namespace

TEST_CASE("match_pair on the running example") {
    const Dataset d = table1();
    MatchRules rules;
    CHECK(match_pair(d.at("e2"), d.at("e3"), rules));
    CHECK(match_pair(d.at("e3"), d.at("e2"), rules));
    CHECK_FALSE(match_pair(d.at("e4"), d.at("e5"), rules));
    CHECK_FALSE(match_pair(d.at("e1"), d.at("e2"), rules));
    for (const auto& r : d.records()) CHECK(match_pair(r, r, rules));
}

TEST_CASE("name rule") {
    CHECK(names_match("Joe", "Joseph", 3));
    CHECK_FALSE(names_match("Jo", "Joseph", 3));
    CHECK(names_match("Jo", "Joseph", 2));
    CHECK(names_match("x", "x", 5));
    CHECK_FALSE(names_match("Joe", "Jon", 1));
    CHECK(names_match("Sal", "Sally", 3));
    CHECK_FALSE(names_match("John", "Joseph", 3));
    CHECK_FALSE(names_match("Joe", "John", 3));
    CHECK_FALSE(names_match("oseph", "Joseph", 3));
    CHECK(names_match("Jsph", "Joseph", 3) == names_match("Joseph", "Jsph", 3));
}

TEST_CASE("group rule and numeric tolerance") {
    const Dataset d = parse("ID,Weight,Name,Gender,Age,Label\na,1,Sam,M,30,1\nb,1,Sam,F,30,1\nc,1,Sam,M,30.5,1\n");
    MatchRules rules;
    CHECK_FALSE(match_pair(d.at("a"), d.at("b"), rules));
    rules.require_same_group = false;
    CHECK(match_pair(d.at("a"), d.at("b"), rules));
    CHECK_FALSE(match_pair(d.at("a"), d.at("c"), rules));
    rules.numeric_tolerance = {0.5};
    CHECK(match_pair(d.at("a"), d.at("c"), rules));
}

TEST_CASE("resolve with blocks {e1,e2,e3},{e4,e5} merges e2 and e3") {
    const Dataset d = without(table1(), "e6");
    const auto blocks = blocks_of({{"e1", "e2", "e3"}, {"e4", "e5"}});
    const ResolveResult res = resolve(d, blocks, MatchRules{}, MergePolicy{});
    REQUIRE(res.dataset.size() == 4);
    REQUIRE(res.log.entries.size() == 1);
    CHECK(res.log.entries[0].constituents == std::vector<std::string>{"e2", "e3"});
    CHECK(res.log.pair_comparisons == 4);
    const Record& m = res.dataset[1];
    CHECK(m.id == "m:e2;e3");
    CHECK(m.weight == 2.0);
    CHECK(m.label == 0);
    CHECK(m.names[0] == "Joseph");
    CHECK(m.numeric[0] == 20.0);
    CHECK(m.group == "M");
    CHECK(m.provenance == std::vector<std::string>{"e2", "e3"});
    CHECK(res.dataset[0].id == "e1");
    CHECK(res.dataset[2].id == "e4");
    CHECK(res.dataset.total_weight() == d.total_weight());
}

TEST_CASE("KEEP_ONE keeps the representative's weight") {
    const ResolveResult res = resolve(without(table1(), "e6"), std::nullopt, MatchRules{}, {WeightMode::KeepOne});
    CHECK(res.dataset.at("m:e2;e3").weight == 1.0);
    CHECK(res.log.pair_comparisons == 10);
}

TEST_CASE("no matching pair is the identity") {
    const Dataset d = parse("ID,Weight,Name,Gender,Age,Label\na,1,Ann,F,30,1\nb,1,Bob,M,31,0\n");
    const ResolveResult res = resolve(d, std::nullopt, MatchRules{}, MergePolicy{});
    CHECK(res.dataset == d);
    CHECK(res.log.entries.empty());
}

TEST_CASE("transitive closure merges chains") {
    SUBCASE("Jo, Joe, Joseph with min_prefix 2") {
        const Dataset d = parse("ID,Weight,Name,Gender,Age,Label\na,1,Jo,M,20,1\nb,1,Joe,M,20,0\nc,1,Joseph,M,20,0\n");
        MatchRules rules;
        rules.min_prefix = 2;
        const ResolveResult res = resolve(d, std::nullopt, rules, MergePolicy{});
        REQUIRE(res.dataset.size() == 1);
        CHECK(res.dataset[0].weight == 3.0);
        CHECK(res.dataset[0].label == 0);
        CHECK(merged_sets(res.log) == oracle_components(d, rules));
    }
    SUBCASE("a~b, b~c, a!~c through numeric tolerance") {
        const Dataset d = parse("ID,Weight,Name,Gender,Age,Label\na,1,Sam,M,20,1\nb,1,Sam,M,21,1\nc,1,Sam,M,22,0\n");
        MatchRules rules;
        rules.numeric_tolerance = {1.0};
        REQUIRE(match_pair(d[0], d[1], rules));
        REQUIRE(match_pair(d[1], d[2], rules));
        REQUIRE_FALSE(match_pair(d[0], d[2], rules));
        const ResolveResult res = resolve(d, std::nullopt, rules, MergePolicy{});
        REQUIRE(res.dataset.size() == 1);
        CHECK(res.dataset[0].weight == 3.0);
        CHECK(res.dataset[0].label == 1);
        CHECK(res.dataset[0].numeric[0] == 21.0);
    }
}

TEST_CASE("label ties go to the smallest original id") {
    const Dataset d = parse("ID,Weight,Name,Gender,Age,Label\nb,1,Sam,M,20,1\na,1,Sam,M,20,0\n");
    const ResolveResult res = resolve(d, std::nullopt, MatchRules{}, MergePolicy{});
    REQUIRE(res.dataset.size() == 1);
    CHECK(res.dataset[0].label == 0);
    CHECK(res.dataset[0].id == "m:a;b");
}

TEST_CASE("weighted majority label and weighted mean numerics") {
    const Dataset d = parse("ID,Weight,Name,Gender,Age,Label\na,1,Sam,M,20,0\nb,3,Sam,M,24,1\n");
    MatchRules rules;
    rules.numeric_tolerance = {5.0};
    const ResolveResult res = resolve(d, std::nullopt, rules, MergePolicy{});
    CHECK(res.dataset[0].label == 1);
    CHECK(res.dataset[0].numeric[0] == 23.0);
}

TEST_CASE("block mismatch is a parameter error") {
    const Dataset d = without(table1(), "e6");
    CHECK_THROWS_AS(resolve(d, blocks_of({{"e1", "e2"}, {"e4", "e5"}}), MatchRules{}, MergePolicy{}), ParameterError);
    CHECK_THROWS_AS(resolve(d, blocks_of({{"e1", "e2", "e3"}, {"e4", "e6"}}), MatchRules{}, MergePolicy{}),
                    ParameterError);
}

TEST_CASE("pair_count") {
    CHECK(pair_count(6) == 15);
    CHECK(pair_count(0) == 0);
    CHECK(pair_count(1) == 0);
    CHECK(pair_count(blocks_of({{"a", "b", "c"}, {"d", "e"}})) == 4);
    CHECK(pair_count(blocks_of({{"a"}, {"b"}, {"c"}})) == 0);
}

TEST_CASE("randomized: conservation, oracle agreement, comparison counts") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const Dataset d = random_people(rng, 10 + rng() % 40);
        MatchRules rules;
        rules.min_prefix = 2 + rng() % 2;
        rules.numeric_tolerance = {static_cast<double>(rng() % 2)};
        const ResolveResult res = resolve(d, std::nullopt, rules, MergePolicy{});
        CHECK(res.dataset.total_weight() == doctest::Approx(d.total_weight()).epsilon(1e-15));
        CHECK(merged_sets(res.log) == oracle_components(d, rules));
        CHECK(res.log.pair_comparisons == pair_count(d.size()));

        // constituent sets are disjoint
        std::set<std::string> seen;
        for (const auto& e : res.log.entries) {
            for (const auto& id : e.constituents) CHECK(seen.insert(id).second);
        }
    }
}

TEST_CASE("randomized: blocked merges are a subset of unblocked merges; equal when no match crosses blocks") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const Dataset d = random_people(rng, 10 + rng() % 40);
        MatchRules rules;
        rules.min_prefix = 2;
        const ResolveResult full = resolve(d, std::nullopt, rules, MergePolicy{});

        // arbitrary blocks: any blocked merge must lie inside an unblocked one
        std::vector<std::vector<std::string>> arbitrary(3);
        for (const auto& r : d.records()) arbitrary[rng() % 3].push_back(r.id);
        const ResolveResult part = resolve(d, blocks_of(arbitrary), rules, MergePolicy{});
        CHECK(part.log.pair_comparisons == pair_count(blocks_of(arbitrary)));
        for (const auto& e : part.log.entries) {
            const bool inside = std::any_of(full.log.entries.begin(), full.log.entries.end(), [&](const MergeEntry& f) {
                return std::includes(f.constituents.begin(), f.constituents.end(), e.constituents.begin(),
                                     e.constituents.end());
            });
            CHECK(inside);
        }

        // blocks built from the unblocked components, then randomly grouped: no match crosses
        std::map<std::string, std::size_t> comp_of;
        std::size_t next = 0;
        for (const auto& r : full.dataset.records()) {
            for (const auto& p : r.provenance) comp_of[p] = next;
            ++next;
        }
        std::vector<std::size_t> bucket(next);
        for (auto& b : bucket) b = rng() % 4;
        std::vector<std::vector<std::string>> aligned(4);
        for (const auto& r : d.records()) aligned[bucket[comp_of.at(r.id)]].push_back(r.id);
        const ResolveResult blocked = resolve(d, blocks_of(aligned), rules, MergePolicy{});
        CHECK(blocked.dataset == full.dataset);
        CHECK(blocked.log.pair_comparisons <= full.log.pair_comparisons);
    }
}

TEST_CASE("idempotence under exact matching") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const Dataset d = random_people(rng, 30);
        MatchRules exact;
        exact.min_prefix = 1000;  // equality only
        const ResolveResult once = resolve(d, std::nullopt, exact, MergePolicy{});
        const ResolveResult twice = resolve(once.dataset, std::nullopt, exact, MergePolicy{});
        CHECK(twice.dataset == once.dataset);
    }
    // shipped abbreviation example
    const ResolveResult once = resolve(without(table1(), "e6"), std::nullopt, MatchRules{}, MergePolicy{});
    CHECK(resolve(once.dataset, std::nullopt, MatchRules{}, MergePolicy{}).dataset == once.dataset);
}

TEST_CASE("merge log CSV") {
    const ResolveResult res = resolve(without(table1(), "e6"), std::nullopt, MatchRules{}, MergePolicy{});
    std::ostringstream out;
    write_merge_log(out, res.log);
    CHECK(out.str() == "merged_id,constituents,weight,label\nm:e2;e3,e2;e3,2,0\n");
}
