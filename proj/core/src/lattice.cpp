#include "fourierlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fl {

int LatticeSpec::n_transverse() const {
    int r = 1;
    for (int i = 1; i < dim; ++i) r *= m_transverse;
    return r;
}

std::vector<std::string> LatticeSpec::validate() const {
    std::vector<std::string> errs;
    if (n < 2) errs.push_back("n: must be >= 2");
    if (m_transverse < 1) errs.push_back("m_transverse: must be >= 1");
    if (dim < 1 || dim > 3) errs.push_back("dim: must be 1, 2 or 3");
    if (!(m2 > 0.0)) errs.push_back("m2: must be > 0");
    if (!(lambda >= 0.0)) errs.push_back("lambda: must be >= 0");
    if (!(gamma > 0.0)) errs.push_back("gamma: must be > 0");
    if (!(t1 > 0.0)) errs.push_back("t1: must be > 0");
    if (!(t2 > 0.0)) errs.push_back("t2: must be > 0");
    if (!(epsilon > 0.0)) errs.push_back("epsilon: must be > 0");
    return errs;
}

double default_gamma(int n, double alpha) { return std::pow(static_cast<double>(n), -1.0 + alpha / 4.0); }

double default_epsilon(int n, int m_transverse, int dim, double factor) {
    double e = kPi / n;
    if (dim > 1) e = std::max(e, 2.0 * kPi / m_transverse);
    return factor * e;
}

LatticeSpec with_defaults(LatticeSpec spec, double alpha, double eps_factor) {
    if (spec.gamma == 0.0) spec.gamma = default_gamma(spec.n, alpha);
    if (spec.epsilon == 0.0) spec.epsilon = default_epsilon(spec.n, spec.m_transverse, spec.dim, eps_factor);
    return spec;
}

void to_json(nlohmann::json& j, const LatticeSpec& s) {
    j = nlohmann::json{{"n", s.n},           {"m_transverse", s.m_transverse}, {"dim", s.dim},
                       {"m2", s.m2},         {"lambda", s.lambda},             {"gamma", s.gamma},
                       {"t1", s.t1},         {"t2", s.t2},                     {"epsilon", s.epsilon}};
}

void from_json(const nlohmann::json& j, LatticeSpec& s) {
    LatticeSpec d;
    s.n = j.value("n", d.n);
    s.m_transverse = j.value("m_transverse", d.m_transverse);
    s.dim = j.value("dim", d.dim);
    s.m2 = j.value("m2", d.m2);
    s.lambda = j.value("lambda", d.lambda);
    s.gamma = j.value("gamma", 0.0);
    s.t1 = j.value("t1", d.t1);
    s.t2 = j.value("t2", d.t2);
    s.epsilon = j.value("epsilon", 0.0);
}

double dispersion(const double* k, int dim, double m2) {
    double w = m2;
    for (int a = 0; a < dim; ++a) w += 2.0 * (1.0 - std::cos(k[a]));
    return w;
}

double delta_omega2(double p, const std::vector<double>& k, double m2) {
    std::vector<double> kp = k, km = k;
    kp[0] = p + k[0];
    km[0] = p - k[0];
    const double wp = dispersion(kp, m2), wm = dispersion(km, m2);
    return wp * wp - wm * wm;
}

double delta_omega2_product(double p, const std::vector<double>& k, double m2) {
    std::vector<double> kp = k, km = k;
    kp[0] = p + k[0];
    km[0] = p - k[0];
    return 4.0 * std::sin(p) * std::sin(k[0]) * (dispersion(kp, m2) + dispersion(km, m2));
}

MassGap mass_gap_check(const LatticeSpec& spec) {
    Grid g(spec);
    const auto& w = g.omega_table();
    const double lo = *std::min_element(w.begin(), w.end());
    const double hi = *std::max_element(w.begin(), w.end());
    // Patterns with sum s = +-4 have |sum| >= 4 lo; with sum s = +-2 the
    // range is [3 lo - hi, 3 hi - lo].
    MassGap r;
    r.margin = std::min(4.0 * lo, std::max(0.0, 3.0 * lo - hi));
    r.ok = r.margin > 0.0;
    r.analytic = 2.0 * spec.m2 - 4.0 * spec.dim;
    r.rho_condition = spec.m2 > 2.0 * (hi - spec.m2);
    return r;
}

namespace {
int lattice_index(double x, double step, const char* what) {
    const double r = x / step;
    const double ri = std::round(r);
    if (std::abs(r - ri) > 1e-9) throw std::invalid_argument(std::string(what) + ": momentum off the lattice");
    return static_cast<int>(ri);
}
double wrap_angle(double x) {
    double r = std::fmod(x, 2.0 * kPi);
    if (r < 0) r += 2.0 * kPi;
    return r;
}
}  // namespace

PK to_pk(double q, double q_prime, int n) {
    const double step = kPi / n;
    const int a = lattice_index(q, step, "q");
    const int b = lattice_index(q_prime, step, "q_prime");
    return {wrap_angle((a + b) * step / 2.0), std::remainder((a - b) * step / 2.0, 2.0 * kPi)};
}

std::array<double, 2> from_pk(double p, double k, int n) {
    const double half = kPi / (2.0 * n);
    const int pi_ = lattice_index(p, half, "p");
    const int ki = lattice_index(k, half, "k");
    if (((pi_ + ki) % 2 + 2) % 2 != 0) throw std::invalid_argument("p + k: off the checkerboard");
    return {wrap_angle((pi_ + ki) * half), wrap_angle((pi_ - ki) * half)};
}

Grid::Grid(const LatticeSpec& spec) : spec_(spec), nt_(spec.n_transverse()) {
    if (spec.n < 1 || spec.dim < 1 || spec.dim > 3 || spec.m_transverse < 1)
        throw std::invalid_argument("Grid: invalid lattice geometry");
    const int m = spec.m_transverse;
    tcoord_.resize(static_cast<std::size_t>(nt_));
    for (int t = 0; t < nt_; ++t) {
        tcoord_[static_cast<std::size_t>(t)] = {spec.dim > 1 ? t % m : 0, spec.dim > 2 ? t / m : 0};
    }
    auto encode = [&](int c1, int c2) {
        c1 = ((c1 % m) + m) % m;
        c2 = ((c2 % m) + m) % m;
        if (spec.dim < 2) return 0;
        if (spec.dim < 3) return c1;
        return c1 + m * c2;
    };
    tneg_.resize(static_cast<std::size_t>(nt_));
    tadd_.resize(static_cast<std::size_t>(nt_) * nt_);
    for (int t = 0; t < nt_; ++t) {
        const auto& c = tcoord_[static_cast<std::size_t>(t)];
        tneg_[static_cast<std::size_t>(t)] = encode(-c[0], -c[1]);
        for (int u = 0; u < nt_; ++u) {
            const auto& e = tcoord_[static_cast<std::size_t>(u)];
            tadd_[static_cast<std::size_t>(t * nt_ + u)] = encode(c[0] + e[0], c[1] + e[1]);
        }
    }
    omega_.resize(static_cast<std::size_t>(nq()));
    for (int a = 0; a < n2(); ++a)
        for (int t = 0; t < nt_; ++t) omega_[static_cast<std::size_t>(qi(a, t))] = dispersion(momentum(a, t), spec.m2);
}

std::vector<double> Grid::momentum(int a, int t) const {
    std::vector<double> k(static_cast<std::size_t>(spec_.dim), 0.0);
    k[0] = q_first(a);
    const auto& c = tcoord_[static_cast<std::size_t>(t)];
    for (int i = 1; i < spec_.dim; ++i) k[static_cast<std::size_t>(i)] = 2.0 * kPi * c[static_cast<std::size_t>(i - 1)] / spec_.m_transverse;
    return k;
}

double Grid::omega_pk(int a, int b, int t) const {
    const double w1 = omega(a, t), w2 = omega(b, t);
    return std::sqrt(0.5 * (w1 * w1 + w2 * w2));
}

double Grid::delta_omega2(int a, int b, int t) const {
    const double w1 = omega(a, t), w2 = omega(b, t);
    return w1 * w1 - w2 * w2;
}

int Grid::reflect_k(int f) const {
    const int t = f % nt_;
    const int ab = f / nt_;
    const int a = ab / n2(), b = ab % n2();
    return fi(b, a, t_neg(t));
}

int Grid::reflect_p(int f) const {
    const int t = f % nt_;
    const int ab = f / nt_;
    const int a = ab / n2(), b = ab % n2();
    return fi(-b, -a, t);
}

std::vector<int> Grid::slots_at(int c) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(nq()));
    for (int a = 0; a < n2(); ++a)
        for (int t = 0; t < nt_; ++t) out.push_back(fi(a, c - a, t));
    return out;
}

}  // namespace fl
