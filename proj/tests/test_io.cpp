#include <doctest.h>

#include "fourierlab/io.hpp"

using namespace fl;

TEST_CASE("csv layout") {
    CsvTable t({"x1", "kinetic_T", "note"});
    t.add_row(std::vector<std::string>{"0", "1.5", "a,b"});
    t.add_row(std::vector<std::string>{"1", "0.25", "say \"hi\""});
    CHECK(t.str() == "x1,kinetic_T,note\n0,1.5,\"a,b\"\n1,0.25,\"say \"\"hi\"\"\"\n");
    CsvTable e({"a"});
    CHECK(e.str() == "a\n");
    CHECK_THROWS_AS(e.add_row(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("number formatting round trips and never uses a locale") {
    for (double x : {0.1, -3.25e-17, 1e300, 12345678.875, 1.0 / 3.0}) CHECK(std::stod(format_double(x)) == x);
    CHECK(format_double(1234567.0).find(',') == std::string::npos);
}

TEST_CASE("git blob hash") {
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("manifest round trip") {
    RunManifest m;
    m.suite = "kernel";
    m.config = {{"seed", 3}};
    m.seed = 3;
    m.grid = {{"N", 4}};
    m.input_hash = "abc";
    m.checks.push_back({"a", true, "ok"});
    m.reports.push_back({"b", false, "far"});
    m.artifacts = {"x.csv"};
    const RunManifest r = RunManifest::from_json(nlohmann::json::parse(m.to_json().dump()));
    CHECK(r.suite == m.suite);
    CHECK(r.seed == 3);
    CHECK(r.checks.size() == 1);
    CHECK(r.reports.size() == 1);
    CHECK(r.artifacts == m.artifacts);
    CHECK(r.tool_version == FOURIERLAB_VERSION);
    CHECK(m.all_pass());
    m.checks.push_back({"c", false, ""});
    CHECK_FALSE(m.all_pass());
}

TEST_CASE("config parsing") {
    std::vector<std::string> errors;
    RunConfig c = parse_config(nlohmann::json::parse(R"({"seed": 5, "spec": {"n": 6, "dim": 1, "lambda": 0.05}})"), errors);
    CHECK(errors.empty());
    CHECK(c.seed == 5);
    CHECK(c.sim.seed == 5);
    CHECK(c.spec.m_transverse == 1);
    CHECK(c.spec.gamma == doctest::Approx(default_gamma(6)));
    CHECK(c.kernel.epsilon == doctest::Approx(c.spec.epsilon));

    errors.clear();
    parse_config(nlohmann::json::parse(R"({"spec": {"t1": -1, "n": "x"}, "sim": {"steps": 0}})"), errors);
    auto has = [&errors](const std::string& prefix) {
        for (const auto& e : errors)
            if (e.rfind(prefix, 0) == 0) return true;
        return false;
    };
    CHECK(has("spec.t1"));
    CHECK(has("spec.n"));
    CHECK(has("sim.steps"));

    errors.clear();
    parse_config(nlohmann::json::parse(R"({"kernel": {"orientation": 0.5}})"), errors);
    CHECK(has("kernel.orientation"));
}

TEST_CASE("resolved config echo parses back to the same config") {
    std::vector<std::string> errors;
    const RunConfig a = parse_config(nlohmann::json::parse(R"({"spec": {"n": 5, "dim": 2, "m_transverse": 3}})"), errors);
    const RunConfig b = parse_config(a.to_json(), errors);
    CHECK(errors.empty());
    CHECK(a.to_json() == b.to_json());
}
