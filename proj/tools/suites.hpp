#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fourierlab/io.hpp"

namespace fl::suites {

enum ExitCode : int { kPass = 0, kCheckFailure = 1, kConfigError = 2, kNumericalFailure = 3 };

struct Options {
    std::filesystem::path out = "out";
    int threads = 1;

    bool energy_projection = false;
    std::optional<std::array<double, 2>> gibbs;  // (T, A)
    bool theta = false;

    bool zero_modes = false;
    bool signs = false;
    std::optional<std::array<double, 3>> sweep;  // p_min, p_max, steps

    bool zeroth_order = false;
    bool refine = false;
    std::filesystem::path compare_sde;  // manifest of a simulate run

    std::filesystem::path sde_manifest, closure_manifest;  // for compare
};

// Runs one suite, writing its artifacts and manifest.json into opt.out.
// config_text is the raw configuration document; its hash goes into the
// manifest.
int run_suite(const std::string& name, const RunConfig& cfg, const std::string& config_text, const Options& opt);

// Thread count from FOURIERLAB_THREADS, 1 when unset or invalid.
int threads_from_env();

}  // namespace fl::suites
