#include "fourierlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/sha.h>

namespace fl {

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

void CsvTable::add_row(const std::vector<double>& row) {
    std::vector<std::string> s;
    s.reserve(row.size());
    for (double v : row) s.push_back(format_double(v));
    add_row(s);
}

void CsvTable::add_row(const std::vector<std::string>& row) {
    if (row.size() != header_.size()) throw std::invalid_argument("CsvTable: row width does not match header");
    rows_.push_back(row);
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
            if (quote) {
                out += '"';
                for (char ch : cells[i]) {
                    if (ch == '"') out += '"';
                    out += ch;
                }
                out += '"';
            } else {
                out += cells[i];
            }
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, str()); }

std::string git_blob_sha1(const std::string& content) {
    std::string data = "blob " + std::to_string(content.size());
    data.push_back('\0');
    data += content;
    unsigned char md[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
    std::ostringstream os;
    for (unsigned char c : md) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
    return os.str();
}

bool RunManifest::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["suite"] = suite;
    j["config_echo"] = config;
    j["seed"] = seed;
    j["grid_summary"] = grid;
    j["tool_version"] = tool_version;
    j["input_hash"] = input_hash;
    j["started"] = started;
    j["finished"] = finished;
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["checks"] = cs;
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& c : reports) rs.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["reports"] = rs;
    j["artifacts"] = artifacts;
    j["all_pass"] = all_pass();
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    m.suite = j.value("suite", "");
    m.config = j.value("config_echo", nlohmann::json::object());
    m.seed = j.value("seed", std::uint64_t{0});
    m.grid = j.value("grid_summary", nlohmann::json::object());
    m.tool_version = j.value("tool_version", "");
    m.input_hash = j.value("input_hash", "");
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    for (const auto& c : j.value("checks", nlohmann::json::array()))
        m.checks.push_back({c.value("name", ""), c.value("pass", false), c.value("detail", "")});
    for (const auto& c : j.value("reports", nlohmann::json::array()))
        m.reports.push_back({c.value("name", ""), c.value("pass", false), c.value("detail", "")});
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
    return m;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json grid_summary(const LatticeSpec& spec, int n_max) {
    return {{"N", spec.n}, {"M", spec.m_transverse}, {"d", spec.dim}, {"epsilon", spec.epsilon}, {"n_max", n_max}};
}

namespace {

template <class T>
void read_key(const nlohmann::json& obj, const std::string& section, const char* key, T& out,
              std::vector<std::string>& errors) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        errors.push_back(section + "." + key + ": wrong type");
    }
}

nlohmann::json section_of(const nlohmann::json& j, const char* name, std::vector<std::string>& errors) {
    if (!j.contains(name)) return nlohmann::json::object();
    if (!j.at(name).is_object()) {
        errors.push_back(std::string(name) + ": must be an object");
        return nlohmann::json::object();
    }
    return j.at(name);
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j, std::vector<std::string>& errors) {
    RunConfig c;
    if (!j.is_object()) {
        errors.emplace_back("config: must be a JSON object");
        return c;
    }
    read_key(j, "config", "seed", c.seed, errors);

    const auto sp = section_of(j, "spec", errors);
    read_key(sp, "spec", "n", c.spec.n, errors);
    read_key(sp, "spec", "m_transverse", c.spec.m_transverse, errors);
    read_key(sp, "spec", "dim", c.spec.dim, errors);
    read_key(sp, "spec", "m2", c.spec.m2, errors);
    read_key(sp, "spec", "lambda", c.spec.lambda, errors);
    read_key(sp, "spec", "gamma", c.spec.gamma, errors);
    read_key(sp, "spec", "t1", c.spec.t1, errors);
    read_key(sp, "spec", "t2", c.spec.t2, errors);
    read_key(sp, "spec", "epsilon", c.spec.epsilon, errors);
    if (c.spec.dim == 1) c.spec.m_transverse = 1;
    if (c.spec.n >= 1 && c.spec.m_transverse >= 1) c.spec = with_defaults(c.spec);
    for (const auto& e : c.spec.validate()) errors.push_back("spec." + e);

    const auto sim = section_of(j, "sim", errors);
    read_key(sim, "sim", "dt", c.sim.dt, errors);
    read_key(sim, "sim", "steps", c.sim.steps, errors);
    read_key(sim, "sim", "burn_in", c.sim.burn_in, errors);
    read_key(sim, "sim", "thinning", c.sim.thinning, errors);
    read_key(sim, "sim", "batches", c.sim.batches, errors);
    read_key(sim, "sim", "noise_factor", c.sim.noise_factor, errors);
    read_key(sim, "sim", "blowup", c.sim.blowup, errors);
    c.sim.init_temperature = std::max(0.0, 0.5 * (c.spec.t1 + c.spec.t2));
    read_key(sim, "sim", "init_temperature", c.sim.init_temperature, errors);
    read_key(sim, "sim", "replicas", c.replicas, errors);
    for (const auto& e : c.sim.validate()) errors.push_back("sim." + e);
    if (c.sim.init_temperature < 0.0) errors.emplace_back("sim.init_temperature: must be >= 0");
    if (c.replicas < 1) errors.emplace_back("sim.replicas: must be >= 1");
    c.sim.seed = c.seed;

    const auto ker = section_of(j, "kernel", errors);
    std::string quad = "grid";
    read_key(ker, "kernel", "quadrature", quad, errors);
    if (quad == "grid")
        c.kernel.quadrature = KernelConfig::Quadrature::Grid;
    else if (quad == "monte_carlo")
        c.kernel.quadrature = KernelConfig::Quadrature::MonteCarlo;
    else
        errors.emplace_back("kernel.quadrature: must be \"grid\" or \"monte_carlo\"");
    read_key(ker, "kernel", "mc_samples", c.kernel.mc_samples, errors);
    read_key(ker, "kernel", "orientation", c.kernel.orientation, errors);
    read_key(ker, "kernel", "probes", c.projection_probes, errors);
    read_key(ker, "kernel", "projection_tol", c.projection_tol, errors);
    read_key(ker, "kernel", "gibbs_tol", c.gibbs_tol, errors);
    c.kernel.epsilon = c.spec.epsilon;
    c.kernel.lambda = c.spec.lambda;
    c.kernel.mc_seed = c.seed;
    if (c.kernel.orientation != 1.0 && c.kernel.orientation != -1.0)
        errors.emplace_back("kernel.orientation: must be +1 or -1");
    if (c.kernel.quadrature == KernelConfig::Quadrature::MonteCarlo && c.kernel.mc_samples < 1)
        errors.emplace_back("kernel.mc_samples: must be >= 1 for monte_carlo");
    if (c.projection_probes < 1) errors.emplace_back("kernel.probes: must be >= 1");

    const auto lin = section_of(j, "linop", errors);
    read_key(lin, "linop", "probes", c.sign_probes, errors);
    read_key(lin, "linop", "zero_mode_tol", c.zero_mode_tol, errors);
    read_key(lin, "linop", "offdiag_tol", c.offdiag_tol, errors);
    if (c.sign_probes < 1) errors.emplace_back("linop.probes: must be >= 1");

    const auto clo = section_of(j, "closure", errors);
    read_key(clo, "closure", "B", c.B, errors);
    read_key(clo, "closure", "damping", c.refine.damping, errors);
    read_key(clo, "closure", "max_iter", c.refine.max_iter, errors);
    read_key(clo, "closure", "tol", c.refine.tol, errors);
    read_key(clo, "closure", "patience", c.refine.patience, errors);
    read_key(clo, "closure", "compare_tol", c.compare_tol, errors);
    if (!(c.B > 0.0)) errors.emplace_back("closure.B: must be > 0");
    if (!(c.refine.damping > 0.0 && c.refine.damping <= 1.0)) errors.emplace_back("closure.damping: must be in (0, 1]");
    if (c.refine.max_iter < 1) errors.emplace_back("closure.max_iter: must be >= 1");
    if (c.refine.patience < 1) errors.emplace_back("closure.patience: must be >= 1");
    return c;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["spec"] = spec;
    j["sim"] = {{"dt", sim.dt > 0.0 ? sim.dt : default_dt(spec)},
                {"steps", sim.steps},
                {"burn_in", sim.burn_in},
                {"thinning", sim.thinning},
                {"batches", sim.batches},
                {"noise_factor", sim.noise_factor},
                {"blowup", sim.blowup},
                {"init_temperature", sim.init_temperature},
                {"replicas", replicas}};
    j["kernel"] = {{"quadrature", kernel.quadrature == KernelConfig::Quadrature::Grid ? "grid" : "monte_carlo"},
                   {"mc_samples", kernel.mc_samples},
                   {"orientation", kernel.orientation},
                   {"probes", projection_probes},
                   {"projection_tol", projection_tol},
                   {"gibbs_tol", gibbs_tol}};
    j["linop"] = {{"probes", sign_probes}, {"zero_mode_tol", zero_mode_tol}, {"offdiag_tol", offdiag_tol}};
    j["closure"] = {{"B", B},
                    {"damping", refine.damping},
                    {"max_iter", refine.max_iter},
                    {"tol", refine.tol},
                    {"patience", refine.patience},
                    {"compare_tol", compare_tol}};
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace fl
