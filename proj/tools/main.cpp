#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fourierlab/io.hpp"
#include "suites.hpp"

namespace fs = std::filesystem;
using fl::suites::ExitCode;

int main(int argc, char** argv) {
    CLI::App app{"fourierlab: boundary driven anharmonic lattice, SDE and kinetic closure"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(FOURIERLAB_VERSION));

    std::string config_path;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    app.add_option("-c,--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
    app.add_option("-o,--out", out, "output directory");
    app.add_option("--seed", seed, "overrides the config seed");

    fl::suites::Options opt;
    std::vector<double> gibbs, sweep;

    auto* sim = app.add_subcommand("simulate", "Langevin simulation of the chain");
    auto* ker = app.add_subcommand("kernel", "collision kernel checks");
    ker->add_flag("--check-energy-projection,--check-lemma71", opt.energy_projection, "energy projection of N22 on random fields");
    ker->add_option("--check-gibbs", gibbs, "residuals of the (T, A) Gibbs state")->expected(2);
    ker->add_flag("--theta", opt.theta, "theta(p) on a random field");
    auto* lin = app.add_subcommand("linop", "linearized collision operator");
    lin->add_flag("--zero-modes", opt.zero_modes, "L22(0) on omega^-2, omega^-3 and the off-diagonal blocks");
    lin->add_flag("--signs", opt.signs, "signs of the quadratic forms");
    lin->add_option("--sweep", sweep, "p_min p_max steps")->expected(3);
    auto* clo = app.add_subcommand("closure", "zeroth order closure");
    clo->add_flag("--zeroth-order", opt.zeroth_order, "profile and kappa checks");
    clo->add_flag("--refine", opt.refine, "Newton refinement of the stationary equations");
    clo->add_option("--compare-sde", opt.compare_sde, "manifest of a simulate run")->check(CLI::ExistingFile);
    auto* cmp = app.add_subcommand("compare", "join SDE and closure profiles");
    cmp->add_option("--sde", opt.sde_manifest, "simulate manifest")->required()->check(CLI::ExistingFile);
    cmp->add_option("--closure", opt.closure_manifest, "closure manifest")->required()->check(CLI::ExistingFile);
    app.add_subcommand("all", "every suite with its default checks");
    (void)sim;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ExitCode::kConfigError;
    }

    std::string text = "{}";
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
        text = fl::read_text(config_path);
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            std::cerr << "config: " << e.what() << "\n";
            return ExitCode::kConfigError;
        }
    }
    if (seed) doc["seed"] = *seed;

    std::vector<std::string> errors;
    fl::RunConfig cfg = fl::parse_config(doc, errors);
    if (!gibbs.empty()) {
        opt.gibbs = std::array<double, 2>{gibbs[0], gibbs[1]};
        if (!(gibbs[0] > 0.0)) errors.emplace_back("--check-gibbs T: must be > 0");
        if (!(gibbs[1] < cfg.spec.m2)) errors.emplace_back("--check-gibbs A: must be < m2");
    }
    if (!sweep.empty()) {
        opt.sweep = std::array<double, 3>{sweep[0], sweep[1], sweep[2]};
        if (!(sweep[2] >= 1.0)) errors.emplace_back("--sweep steps: must be >= 1");
        if (!(sweep[0] <= sweep[1])) errors.emplace_back("--sweep: p_min must be <= p_max");
    }
    if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
        return ExitCode::kConfigError;
    }

    opt.out = out;
    opt.threads = fl::suites::threads_from_env();
    const std::string suite = app.get_subcommands().front()->get_name();
    const int rc = fl::suites::run_suite(suite, cfg, text, opt);
    const char* label[] = {"pass", "check failure", "config error", "numerical failure"};
    // "all" leaves one manifest per suite in its subdirectories
    const fs::path where = suite == "all" ? fs::path(out) : fs::path(out) / "manifest.json";
    std::cout << suite << ": " << label[rc] << " (" << where.string() << ")\n";
    return rc;
}
