#include "suites.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fourierlab/closure.hpp"
#include "fourierlab/collision.hpp"
#include "fourierlab/linop.hpp"
#include "fourierlab/sde.hpp"

namespace fl::suites {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string num(double x) { return format_double(x); }

struct Run {
    RunManifest m;
    fs::path dir;
    int status = kPass;

    void artifact(const std::string& name, const std::string& content) {
        write_text(dir / name, content);
        m.artifacts.push_back(name);
    }
    void check(const std::string& name, bool pass, const std::string& detail) {
        m.checks.push_back({name, pass, detail});
        if (!pass) status = std::max(status, static_cast<int>(kCheckFailure));
    }
    void report(const std::string& name, bool ok, const std::string& detail) { m.reports.push_back({name, ok, detail}); }
    void numerical(const std::string& name, const std::string& detail) {
        m.checks.push_back({name, false, detail});
        status = kNumericalFailure;
    }
};

double t_plus(const LatticeSpec& s) { return 0.5 * (s.t1 + s.t2); }

LinopConfig linop_cfg(const RunConfig& cfg) {
    LinopConfig lc;
    lc.epsilon = cfg.spec.epsilon;
    lc.prefactor = cfg.spec.lambda > 0.0;
    lc.lambda = cfg.spec.lambda;
    lc.orientation = cfg.kernel.orientation;
    return lc;
}

// ---------------------------------------------------------------- simulate

void simulate_suite(const RunConfig& cfg, const Options& opt, Run& run) {
    SimResult r;
    try {
        r = simulate_replicas(cfg.spec, cfg.sim, cfg.replicas, opt.threads);
    } catch (const BlowUp& e) {
        run.numerical("blow_up", e.what());
        return;
    }
    const LayerEstimate T = kinetic_profile(r.acc);
    const LayerEstimate j = heat_current_profile(r.acc, cfg.spec);
    CsvTable prof({"x1", "kinetic_T", "stderr", "current_j", "stderr_j"});
    for (std::size_t x = 0; x < T.mean.size(); ++x) prof.add_row({double(x), T.mean[x], T.se[x], j.mean[x], j.se[x]});
    run.artifact("profile.csv", prof.str());

    const BoundaryFlux f = boundary_flux(r.acc, cfg.spec, cfg.sim.noise_factor);
    // bonds (x1-1, x1) for x1 = 1..N lie inside the strip
    double jb = 0.0, jb_se = 0.0;
    for (int x = 1; x <= cfg.spec.n; ++x) {
        jb += j.mean[std::size_t(x)];
        jb_se += j.se[std::size_t(x)];
    }
    jb /= cfg.spec.n;
    jb_se /= cfg.spec.n;
    json fj = {{"flux1", f.flux1}, {"stderr1", f.se1}, {"flux2", f.flux2},   {"stderr2", f.se2},
               {"sum", f.sum},     {"stderr_sum", f.se_sum}, {"bulk_j", jb}, {"stderr_bulk_j", jb_se},
               {"energy_start", r.energy_start}, {"energy_end", r.energy_end}, {"dt", r.dt}};
    run.artifact("flux.json", fj.dump(2) + "\n");

    const bool balanced = std::abs(f.sum) <= std::max(3.0 * f.se_sum, 1e-12);
    run.check("flux_balance", balanced, "flux1 + flux2 = " + num(f.sum) + " +- " + num(f.se_sum));
    // layer 0 feeds both halves of the ring, so flux1 = j(1) - j(0) = 2 j
    const double se = std::hypot(f.se1, 2.0 * jb_se);
    run.report("flux1_vs_bulk_current", std::abs(f.flux1 - 2.0 * jb) <= 3.0 * se,
               "flux1 = " + num(f.flux1) + ", 2 j_bulk = " + num(2.0 * jb) + " +- " + num(se));
}

// ------------------------------------------------------------------ kernel

void kernel_suite(const RunConfig& cfg, const Options& opt, Run& run) {
    const Grid g(cfg.spec);
    // The projection and theta are scale free; use a unit coupling so lambda = 0 specs work.
    KernelConfig raw = cfg.kernel;
    raw.lambda = 1.0;

    if (opt.energy_projection) {
        CsvTable t({"probe", "c", "p", "int_N22_dk", "max_abs_N22", "relative"});
        double worst = 0.0;
        for (int r = 0; r < cfg.projection_probes; ++r) {
            const CorrelationField w = random_field(g, cfg.seed + std::uint64_t(r));
            const NFields nf = assemble_N(g, w, raw);
            const auto e = energy_projection(g, nf.N22);
            const double mx = max_abs(nf.N22);
            for (int c = 0; c < g.n2(); ++c) {
                const double rel = mx > 0.0 ? std::abs(e[std::size_t(c)]) / mx : 0.0;
                worst = std::max(worst, rel);
                t.add_row({double(r), double(c), kPi * c / g.n2(), e[std::size_t(c)], mx, rel});
            }
        }
        run.artifact("energy_projection.csv", t.str());
        run.check("energy_projection_vanishes", worst <= cfg.projection_tol,
                  "max |int N22 dk| / max |N22| = " + num(worst) + " (tol " + num(cfg.projection_tol) + ")");
    }

    if (opt.theta) {
        const CorrelationField w = random_field(g, cfg.seed);
        const NFields nf = assemble_N(g, w, raw);
        const auto th = theta(g, nf.N22);
        const auto e = energy_projection(g, nf.N22);
        CsvTable t({"c", "p_half", "theta", "int_N22_dk"});
        for (int c = 0; c < g.n2(); ++c)
            t.add_row({double(c), kPi * c / g.n2(), th[std::size_t(c)], e[std::size_t(c)]});
        run.artifact("theta.csv", t.str());
    }

    if (opt.gibbs) {
        const double T = (*opt.gibbs)[0], A = (*opt.gibbs)[1];
        LatticeSpec s0 = cfg.spec;
        s0.gamma = 0.0;
        const KernelConfig kp = physical(cfg.kernel, s0);
        const CorrelationField gb = gibbs_state(g, T, A, &kp);
        const std::vector<int> slots = g.slots_at(0);
        const Residuals res = stationary_residual(g, gb, s0, cfg.kernel, &slots);
        const double rel = std::max({res.n1, res.n2, res.n3}) / res.scale;
        CsvTable t({"T", "A", "r1", "r2", "r3", "scale", "relative"});
        t.add_row({T, A, res.n1, res.n2, res.n3, res.scale, rel});
        run.artifact("gibbs.csv", t.str());
        run.check("gibbs_residual", rel <= cfg.gibbs_tol,
                  "max |r| / scale = " + num(rel) + " (tol " + num(cfg.gibbs_tol) + ")");
    }
}

// ------------------------------------------------------------------- linop

struct Spectra {
    double max_l11 = 0.0, min_l22 = 0.0;
};

Spectra spectra(const LinearizedBlocks& b) {
    Spectra s;
    const Eigen::MatrixXd O = odd_basis(b), E = even_basis(b, true);
    const ProjectorSpec ps = make_projector(b);
    auto sym_eigs = [](const Eigen::MatrixXd& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    };
    if (O.cols() > 0) s.max_l11 = sym_eigs(O.transpose() * b.weight.asDiagonal() * b.L11 * O).maxCoeff();
    if (E.cols() > 0)
        s.min_l22 = sym_eigs(E.transpose() * b.weight.asDiagonal() * ps.P_perp * b.L22 * ps.P_perp * E).minCoeff();
    return s;
}

void linop_suite(const RunConfig& cfg, const Options& opt, Run& run) {
    const Grid g(cfg.spec);
    const LinopConfig lc = linop_cfg(cfg);
    const double T0 = t_plus(cfg.spec);

    if (opt.zero_modes || opt.signs) {
        const LinearizedBlocks b = build_Lp(g, 0, T0, lc);
        if (opt.zero_modes) {
            const ZeroModes z = zero_mode_residuals(b);
            CsvTable t({"c", "p", "L22_omega-2", "L22_omega-3", "L22_omega-4", "L12_norm", "L21_norm"});
            t.add_row({0.0, 0.0, z.r2, z.r3, z.r4, z.l12, z.l21});
            run.artifact("zero_modes.csv", t.str());
            run.check("energy_zero_mode", z.r2 <= cfg.zero_mode_tol * z.r4,
                      "||L22 omega^-2|| / ||L22 omega^-4|| = " + num(z.r2 / z.r4));
            run.check("number_zero_mode", z.r3 <= cfg.zero_mode_tol * z.r4,
                      "||L22 omega^-3|| / ||L22 omega^-4|| = " + num(z.r3 / z.r4));
            run.check("offdiagonal_blocks", z.l12 <= cfg.offdiag_tol && z.l21 <= cfg.offdiag_tol,
                      "||L12|| = " + num(z.l12) + ", ||L21|| = " + num(z.l21));
        }
        if (opt.signs) {
            std::mt19937_64 rng(cfg.seed);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            std::vector<Eigen::VectorXd> jp, qp;
            for (int r = 0; r < cfg.sign_probes; ++r) {
                Eigen::VectorXd a(b.size()), c(b.size());
                for (int i = 0; i < b.size(); ++i) a(i) = u(rng);
                for (int i = 0; i < b.size(); ++i) c(i) = u(rng);
                jp.push_back(a);
                qp.push_back(c);
            }
            const QuadForms qf = quadratic_forms(b, jp, qp);
            CsvTable t({"probe", "J_L11_J", "Q_L22_Q"});
            bool neg = true, pos = true;
            for (int r = 0; r < cfg.sign_probes; ++r) {
                t.add_row({double(r), qf.jl11j[std::size_t(r)], qf.ql22q[std::size_t(r)]});
                neg = neg && qf.jl11j[std::size_t(r)] < 0.0;
                pos = pos && qf.ql22q[std::size_t(r)] > 0.0;
            }
            run.artifact("signs.csv", t.str());
            run.check("L11_negative_on_odd", neg, std::to_string(cfg.sign_probes) + " probes");
            run.check("L22_positive_on_projected_even", pos, std::to_string(cfg.sign_probes) + " probes");
        }
    }

    if (opt.sweep) {
        const double pmin = (*opt.sweep)[0], pmax = (*opt.sweep)[1];
        const int steps = static_cast<int>((*opt.sweep)[2]);
        std::set<int> classes;
        for (int i = 0; i < steps; ++i) {
            const double p = steps > 1 ? pmin + (pmax - pmin) * i / (steps - 1) : pmin;
            const int c = static_cast<int>(std::lround(p * g.n2() / kPi));
            if (c >= 0 && c < g.n2()) classes.insert(c);
        }
        std::vector<LinearizedBlocks> blocks;
        CsvTable t({"c", "p", "in_E0", "L22_omega-2", "L22_omega-3", "L22_omega-4", "L12_norm", "L21_norm",
                    "max_eig_L11_odd", "min_eig_L22_even"});
        for (int c : classes) {
            blocks.push_back(build_Lp(g, c, T0, lc));
            const auto& b = blocks.back();
            const ZeroModes z = zero_mode_residuals(b);
            const Spectra s = spectra(b);
            t.add_row({double(c), b.p, in_E0(b.p, cfg.spec.lambda, cfg.B) ? 1.0 : 0.0, z.r2, z.r3, z.r4, z.l12,
                       z.l21, s.max_l11, s.min_l22});
        }
        run.artifact("sweep.csv", t.str());
        if (!blocks.empty()) {
            const MultiplierBounds mb = multiplier_bounds(blocks, cfg.spec.lambda);
            json bj = {{"floor", mb.floor},           {"fitted_c", mb.fitted_c}, {"m11_negative", mb.m11_negative},
                       {"m22_positive", mb.m22_positive}, {"max_m11", mb.max_m11}, {"min_m22", mb.min_m22}};
            run.artifact("multiplier_bounds.json", bj.dump(2) + "\n");
            run.check("multiplier_floor_positive", mb.fitted_c > 0.0, "fitted c = " + num(mb.fitted_c));
        }
    }
}

// ----------------------------------------------------------------- closure

struct ProfileRow {
    double x1, T, se, j;
};

std::vector<ProfileRow> read_sde_profile(const fs::path& manifest_path, const LatticeSpec& spec) {
    const RunManifest m = RunManifest::from_json(json::parse(read_text(manifest_path)));
    if (m.suite != "simulate") throw ConfigError("compare: " + manifest_path.string() + " is not a simulate manifest");
    if (m.config.contains("spec") && m.config["spec"] != json(spec))
        throw ConfigError("compare: spec of " + manifest_path.string() + " differs from this run");
    const fs::path csv = manifest_path.parent_path() / "profile.csv";
    std::istringstream is(read_text(csv));
    std::string line;
    std::getline(is, line);
    std::vector<ProfileRow> rows;
    while (std::getline(is, line)) {
        std::vector<double> v;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 5) throw ConfigError("compare: malformed row in " + csv.string());
        rows.push_back({v[0], v[1], v[2], v[3]});
    }
    return rows;
}

// Joins an SDE profile with the predicted one over the bulk layers 1..N-1.
void profile_difference(Run& run, const std::vector<ProfileRow>& sde, const std::vector<double>& T_pred,
                        const std::vector<double>& j_pred, int n, double tol) {
    if (sde.size() != T_pred.size()) throw ConfigError("compare: profiles have different lengths");
    CsvTable t({"x1", "T_sde", "stderr", "T_pred", "T_diff", "T_rel_diff", "j_sde", "j_pred"});
    double worst = 0.0;
    for (std::size_t x = 0; x < sde.size(); ++x) {
        const double d = sde[x].T - T_pred[x];
        const double rel = d / T_pred[x];
        t.add_row({double(x), sde[x].T, sde[x].se, T_pred[x], d, rel, sde[x].j, j_pred[x]});
        if (x >= 1 && x + 1 <= std::size_t(n)) worst = std::max(worst, std::abs(rel));
    }
    run.artifact("profile_diff.csv", t.str());
    run.report("closure_vs_sde_bulk", worst <= tol,
               "max bulk |T_sde - T_pred| / T_pred = " + num(worst) + " (tol " + num(tol) + ")");
}

void write_closure_profile(Run& run, const ZerothOrder& z) {
    CsvTable t({"x1", "T_pred", "A_pred", "j_pred", "jprime_pred"});
    for (std::size_t x = 0; x < z.T_pred.size(); ++x) {
        const double jp = x < z.j_pred.size() ? z.j_pred[x] : 0.0;
        const double jpp = x < z.jp_pred.size() ? z.jp_pred[x] : 0.0;
        t.add_row({double(x), z.T_pred[x], z.A_pred[x], jp, jpp});
    }
    run.artifact("profile.csv", t.str());
}

void closure_suite(const RunConfig& cfg, const Options& opt, Run& run) {
    const Grid g(cfg.spec);
    ClosureState cs;
    try {
        cs = zeroth_order_state(g, cfg.spec, cfg.kernel, cfg.B);
    } catch (const std::domain_error& e) {
        run.numerical("zeroth_order", e.what());
        return;
    }
    const ZerothOrder& z = cs.zeroth;
    write_closure_profile(run, z);

    json kj = {{"tau0", z.tau0},
               {"zeta0", z.zeta0},
               {"tau0_finite", z.tau0_finite},
               {"zeta0_finite", z.zeta0_finite},
               {"I_plus", z.sums.i_plus},
               {"I_minus", z.sums.i_minus},
               {"classes_in_E0", cs.classes_in_E0},
               {"max_imag", cs.max_imag}};
    if (cs.kappa) {
        const auto& k = *cs.kappa;
        kj["kappa"] = {{k.kappa(0, 0), k.kappa(0, 1)}, {k.kappa(1, 0), k.kappa(1, 1)}};
        kj["det"] = k.det;
        kj["beta"] = {k.beta0, k.beta1, k.beta2};
        kj["symmetric_part_positive_definite"] = k.positive_definite;
        kj["min_symmetric_eigenvalue"] = k.min_sym_eigenvalue;
    } else {
        kj["kappa"] = nullptr;
    }
    run.artifact("kappa.json", kj.dump(2) + "\n");
    if (opt.zeroth_order) {
        run.check("kappa_invertible", cs.kappa && cs.kappa->det != 0.0,
                  cs.kappa ? "det = " + num(cs.kappa->det) : "L11(0) singular");
        run.check("kappa_symmetric_part_positive", cs.kappa && cs.kappa->positive_definite,
                  cs.kappa ? "min eigenvalue = " + num(cs.kappa->min_sym_eigenvalue) : "L11(0) singular");
    }

    if (opt.refine) {
        CsvTable t({"iter", "residual", "ratio"});
        try {
            const RefineResult rr = refine(g, cs.field, cfg.spec, cfg.kernel, cfg.refine);
            for (const auto& s : rr.trace) t.add_row({double(s.iter), s.residual, s.ratio});
            run.artifact("trace.csv", t.str());
            run.check("refine_converged", rr.converged,
                      "final residual " + num(rr.trace.empty() ? 0.0 : rr.trace.back().residual));
        } catch (const DivergenceError& e) {
            for (const auto& s : e.trace()) t.add_row({double(s.iter), s.residual, s.ratio});
            run.artifact("trace.csv", t.str());
            run.numerical("refine_diverged", e.what());
        }
    }

    if (!opt.compare_sde.empty())
        profile_difference(run, read_sde_profile(opt.compare_sde, cfg.spec), z.T_pred, z.j_pred, cfg.spec.n,
                           cfg.compare_tol);
}

// ----------------------------------------------------------------- compare

void compare_suite(const RunConfig& cfg, const Options& opt, Run& run) {
    if (opt.sde_manifest.empty() || opt.closure_manifest.empty())
        throw ConfigError("compare: both --sde and --closure manifests are required");
    const auto sde = read_sde_profile(opt.sde_manifest, cfg.spec);
    const RunManifest cm = RunManifest::from_json(json::parse(read_text(opt.closure_manifest)));
    if (cm.suite != "closure") throw ConfigError("compare: " + opt.closure_manifest.string() + " is not a closure manifest");
    if (cm.config.contains("spec") && cm.config["spec"] != json(cfg.spec))
        throw ConfigError("compare: spec of " + opt.closure_manifest.string() + " differs from this run");
    std::istringstream is(read_text(opt.closure_manifest.parent_path() / "profile.csv"));
    std::string line;
    std::getline(is, line);
    std::vector<double> T, j;
    while (std::getline(is, line)) {
        std::vector<double> v;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 5) throw ConfigError("compare: malformed closure profile");
        T.push_back(v[1]);
        j.push_back(v[3]);
    }
    profile_difference(run, sde, T, j, cfg.spec.n, cfg.compare_tol);
}

int run_one(const std::string& name, const RunConfig& cfg, const std::string& config_text, const Options& opt) {
    Run run;
    run.dir = opt.out;
    run.m.suite = name;
    run.m.config = cfg.to_json();
    run.m.seed = cfg.seed;
    run.m.grid = grid_summary(cfg.spec);
    run.m.input_hash = git_blob_sha1(config_text);
    run.m.started = utc_now();
    fs::create_directories(run.dir);
    try {
        if (name == "simulate")
            simulate_suite(cfg, opt, run);
        else if (name == "kernel")
            kernel_suite(cfg, opt, run);
        else if (name == "linop")
            linop_suite(cfg, opt, run);
        else if (name == "closure")
            closure_suite(cfg, opt, run);
        else if (name == "compare")
            compare_suite(cfg, opt, run);
        else
            throw ConfigError("unknown suite " + name);
    } catch (const ConfigError& e) {
        run.m.checks.push_back({"config", false, e.what()});
        run.status = kConfigError;
    } catch (const std::exception& e) {
        run.numerical("exception", e.what());
    }
    run.m.finished = utc_now();
    write_text(run.dir / "manifest.json", run.m.to_json().dump(2) + "\n");
    return run.status;
}

}  // namespace

int run_suite(const std::string& name, const RunConfig& cfg, const std::string& config_text, const Options& opt) {
    if (name != "all") return run_one(name, cfg, config_text, opt);

    Options o = opt;
    o.energy_projection = o.theta = o.zero_modes = o.signs = o.zeroth_order = true;
    int status = kPass;
    auto sub = [&](const std::string& suite) {
        Options so = o;
        so.out = opt.out / suite;
        if (suite == "closure") so.compare_sde = opt.out / "simulate" / "manifest.json";
        if (suite == "compare") {
            so.sde_manifest = opt.out / "simulate" / "manifest.json";
            so.closure_manifest = opt.out / "closure" / "manifest.json";
        }
        status = std::max(status, run_one(suite, cfg, config_text, so));
    };
    for (const char* s : {"simulate", "kernel", "linop", "closure", "compare"}) sub(s);
    return status;
}

int threads_from_env() {
    const char* v = std::getenv("FOURIERLAB_THREADS");
    if (!v) return 1;
    try {
        return std::max(1, std::stoi(v));
    } catch (const std::exception&) {
        return 1;
    }
}

}  // namespace fl::suites
