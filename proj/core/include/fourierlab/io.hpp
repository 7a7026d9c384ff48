#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fourierlab/closure.hpp"
#include "fourierlab/collision.hpp"
#include "fourierlab/lattice.hpp"
#include "fourierlab/sde.hpp"

namespace fl {

// Column-oriented CSV table: '.' decimal point, LF endings, header always
// written.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add_row(const std::vector<double>& row);
    void add_row(const std::vector<std::string>& row);
    std::string str() const;
    void write(const std::filesystem::path& path) const;
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Shortest round-trip representation of x, locale independent.
std::string format_double(double x);

// git blob hash: sha1("blob <size>\0" + content), lowercase hex
std::string git_blob_sha1(const std::string& content);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunManifest {
    std::string suite;
    nlohmann::json config;
    std::uint64_t seed = 0;
    nlohmann::json grid;
    std::string tool_version = FOURIERLAB_VERSION;
    std::string input_hash;
    std::string started, finished;
    std::vector<CheckResult> checks;
    std::vector<CheckResult> reports;  // informational, never affect the exit status
    std::vector<std::string> artifacts;  // relative to the manifest directory

    bool all_pass() const;
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

// UTC time, ISO 8601
std::string utc_now();

nlohmann::json grid_summary(const LatticeSpec& spec, int n_max = 0);

// Resolved run configuration. The JSON document has the sections
// "spec", "sim", "kernel", "linop" and "closure" plus a top-level "seed";
// every key is optional. gamma and epsilon left at 0 take their defaults.
struct RunConfig {
    LatticeSpec spec;
    std::uint64_t seed = 1;

    SimConfig sim;
    int replicas = 1;

    KernelConfig kernel;
    int projection_probes = 20;
    double projection_tol = 1e-10;
    double gibbs_tol = 1e-6;  // max |r| / scale

    int sign_probes = 10;
    double zero_mode_tol = 1e-3;  // relative to ||L22 omega^-4||
    double offdiag_tol = 1e-10;

    double B = 5.0;
    RefineConfig refine;
    double compare_tol = 0.1;  // relative, bulk layers

    nlohmann::json to_json() const;
};

// Parses and validates; every violated invariant is appended to errors as
// "<section>.<key>: <message>".
RunConfig parse_config(const nlohmann::json& j, std::vector<std::string>& errors);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace fl
