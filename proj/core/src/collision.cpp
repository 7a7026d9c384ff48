#include "fourierlab/collision.hpp"

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fl {

double collision_prefactor(int dim, double lambda) {
    return 9.0 / 8.0 * std::pow(2.0 * kPi, 3.0 * dim) * lambda * lambda;
}

namespace {

struct Pair {
    int a1, t1, a2, t2;
};

// Accumulates the kernel for one (q1, q2) pair into the requested outputs.
class KernelAccumulator {
public:
    KernelAccumulator(const Grid& g, const std::vector<double>& Q, const std::vector<double>& J, double eps)
        : g_(g), Q_(Q), J_(J), eps_(eps), n2_(g.n2()) {
        for (auto& v : conv_) v.assign(static_cast<std::size_t>(n2_), 0.0);
    }

    // (1/2N)^2 sum_{q1' + q2' = r} W1 W2 split into its four real parts
    void load_pair(const Pair& pr) {
        pr_ = pr;
        w1_ = g_.omega(pr.a1, pr.t1);
        w2_ = g_.omega(pr.a2, pr.t2);
        const double h = 1.0 / (static_cast<double>(n2_) * n2_);
        for (auto& v : conv_) std::fill(v.begin(), v.end(), 0.0);
        for (int b1 = 0; b1 < n2_; ++b1) {
            const int f1 = g_.fi(pr.a1, b1, pr.t1);
            const double q1 = Q_[static_cast<std::size_t>(f1)], j1 = J_[static_cast<std::size_t>(f1)] / w1_;
            if (q1 == 0.0 && j1 == 0.0) continue;
            for (int b2 = 0; b2 < n2_; ++b2) {
                const int f2 = g_.fi(pr.a2, b2, pr.t2);
                const double q2 = Q_[static_cast<std::size_t>(f2)], j2 = J_[static_cast<std::size_t>(f2)] / w2_;
                const auto r = static_cast<std::size_t>(g_.wrap(b1 + b2));
                conv_[0][r] += h * q1 * q2;
                conv_[1][r] += h * j1 * j2;
                conv_[2][r] += h * j1 * q2;
                conv_[3][r] += h * q1 * j2;
            }
        }
    }

    // Real parts of n1, n2 at output slot (a, b, t) from the loaded pair,
    // also the mollified on-shell mass of the sum s = 0 patterns.
    void eval(int a, int b, int t, double& n1, double& n2, double& mass) const {
        const int a3 = g_.wrap(a - pr_.a1 - pr_.a2);
        const int t3 = g_.t_sub(g_.t_sub(t, pr_.t1), pr_.t2);
        const int t4 = g_.t_neg(t);
        const double w3 = g_.omega(a3, t3), w4 = g_.omega(b, t4);
        // term 1: W4(q4, q3 - r); term 2: W3(q3, q4 - r)
        std::array<double, 8> x{}, y{};
        for (int r = 0; r < n2_; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            const int f4 = g_.fi(b, a3 - r, t4);
            const int f3 = g_.fi(a3, b - r, t3);
            const double q4 = Q_[static_cast<std::size_t>(f4)], j4 = J_[static_cast<std::size_t>(f4)] / w4;
            const double q3 = Q_[static_cast<std::size_t>(f3)], j3 = J_[static_cast<std::size_t>(f3)] / w3;
            for (int c = 0; c < 4; ++c) {
                const double v = conv_[static_cast<std::size_t>(c)][ru];
                x[static_cast<std::size_t>(c)] += v * q4;
                x[static_cast<std::size_t>(c + 4)] += v * j4;
                y[static_cast<std::size_t>(c)] += v * q3;
                y[static_cast<std::size_t>(c + 4)] += v * j3;
            }
        }
        const double i3 = 1.0 / (w3 * w3), i4 = 1.0 / (w4 * w4);
        const double e2 = eps_ * eps_;
        double s1n = 0.0, s2n = 0.0, m = 0.0;
        // s1 = +1; the s -> -s partner is the complex conjugate
        for (int s2 = -1; s2 <= 1; s2 += 2)
            for (int s3 = -1; s3 <= 1; s3 += 2)
                for (int s4 = -1; s4 <= 1; s4 += 2) {
                    const double s12 = s2;
                    // X_{s1 s2 s4}
                    const double xr = x[0] - s12 * x[1] - s4 * (x[6] + s2 * x[7]);
                    const double xi = x[2] + s2 * x[3] + s4 * (x[4] - s12 * x[5]);
                    // Y_{s1 s2 s3}
                    const double yr = y[0] - s12 * y[1] - s3 * (y[6] + s2 * y[7]);
                    const double yi = y[2] + s2 * y[3] + s3 * (y[4] - s12 * y[5]);
                    const double zr = i3 * xr - i4 * yr, zi = i3 * xi - i4 * yi;
                    const double xs = w1_ + s2 * w2_ + s3 * w3 + s4 * w4;
                    const double den = 1.0 / (xs * xs + e2);
                    // R = (xs - i eps) / (xs^2 + eps^2)
                    const double rr = xs * den, ri = -eps_ * den;
                    const double pr = rr * zr - ri * zi, pi = rr * zi + ri * zr;
                    const double f = s3 * w3;
                    s1n += f * pr;
                    s2n -= s4 * w4 * f * pi;
                    if (1 + s2 + s3 + s4 == 0) m += 2.0 * eps_ * den / kPi;
                }
        n1 = 2.0 * s1n;
        n2 = 2.0 * s2n;
        mass = m;
    }

private:
    const Grid& g_;
    const std::vector<double>& Q_;
    const std::vector<double>& J_;
    double eps_;
    int n2_;
    Pair pr_{};
    double w1_ = 0.0, w2_ = 0.0;
    std::array<std::vector<double>, 4> conv_;
};

struct Out {
    int slot, a, b, t;
};

std::vector<Out> outputs(const Grid& g, const std::vector<int>* slots) {
    std::vector<Out> out;
    if (slots) {
        for (int s : *slots) {
            const int t = s % g.nt();
            const int ab = s / g.nt();
            out.push_back({s, ab / g.n2(), ab % g.n2(), t});
        }
    } else {
        for (int a = 0; a < g.n2(); ++a)
            for (int b = 0; b < g.n2(); ++b)
                for (int t = 0; t < g.nt(); ++t) out.push_back({g.fi(a, b, t), a, b, t});
    }
    return out;
}

}  // namespace

CollisionField collision_field(const Grid& g, const std::vector<double>& Q, const std::vector<double>& J,
                               const KernelConfig& cfg, const std::vector<int>* slots) {
    const auto outs = outputs(g, slots);
    const auto nf = static_cast<std::size_t>(g.nfield());
    CollisionField res;
    res.n1.assign(nf, 0.0);
    res.n2.assign(nf, 0.0);
    KernelAccumulator acc(g, Q, J, cfg.epsilon);
    double mass = 0.0;

    if (cfg.quadrature == KernelConfig::Quadrature::Grid) {
        const double w = g.wq() * g.wq();
        std::vector<double> c1(outs.size(), 0.0), c2(outs.size(), 0.0);
        for (int a1 = 0; a1 < g.n2(); ++a1)
            for (int t1 = 0; t1 < g.nt(); ++t1)
                for (int a2 = 0; a2 < g.n2(); ++a2)
                    for (int t2 = 0; t2 < g.nt(); ++t2) {
                        acc.load_pair({a1, t1, a2, t2});
                        for (std::size_t o = 0; o < outs.size(); ++o) {
                            double n1, n2, m;
                            acc.eval(outs[o].a, outs[o].b, outs[o].t, n1, n2, m);
                            c1[o] += w * n1;
                            c2[o] += w * n2;
                            mass += w * m;
                        }
                    }
        for (std::size_t o = 0; o < outs.size(); ++o) {
            res.n1[static_cast<std::size_t>(outs[o].slot)] = c1[o];
            res.n2[static_cast<std::size_t>(outs[o].slot)] = c2[o];
        }
    } else {
        if (cfg.mc_samples <= 0) throw std::invalid_argument("monte-carlo quadrature needs samples > 0");
        res.n1_se.assign(nf, 0.0);
        res.n2_se.assign(nf, 0.0);
        std::mt19937_64 rng(cfg.mc_seed);
        std::uniform_int_distribution<int> ua(0, g.n2() - 1), ut(0, g.nt() - 1);
        const std::size_t no = outs.size();
        std::vector<double> s1(no, 0.0), s2(no, 0.0), q1(no, 0.0), q2(no, 0.0);
        for (int s = 0; s < cfg.mc_samples; ++s) {
            Pair pr{ua(rng), ut(rng), ua(rng), ut(rng)};
            acc.load_pair(pr);
            for (std::size_t o = 0; o < no; ++o) {
                double n1, n2, m;
                acc.eval(outs[o].a, outs[o].b, outs[o].t, n1, n2, m);
                s1[o] += n1;
                s2[o] += n2;
                q1[o] += n1 * n1;
                q2[o] += n2 * n2;
                mass += m;
            }
        }
        const double S = cfg.mc_samples;
        for (std::size_t o = 0; o < no; ++o) {
            const auto sl = static_cast<std::size_t>(outs[o].slot);
            const double m1 = s1[o] / S, m2 = s2[o] / S;
            res.n1[sl] = m1;
            res.n2[sl] = m2;
            res.n1_se[sl] = S > 1 ? std::sqrt(std::max(0.0, (q1[o] / S - m1 * m1) / (S - 1))) : 0.0;
            res.n2_se[sl] = S > 1 ? std::sqrt(std::max(0.0, (q2[o] / S - m2 * m2) / (S - 1))) : 0.0;
        }
        mass /= S;
    }
    res.onshell_mass = outs.empty() ? 0.0 : mass / static_cast<double>(outs.size());
    res.resolved = res.onshell_mass >= cfg.resolvability_floor;
    const double c = cfg.orientation * (cfg.prefactor ? collision_prefactor(g.dim(), cfg.lambda) : 1.0);
    for (auto* v : {&res.n1, &res.n2})
        for (auto& x : *v) x *= c;
    for (auto* v : {&res.n1_se, &res.n2_se})
        for (auto& x : *v) x *= std::abs(c);
    return res;
}

CollisionPoint collision_n(const Grid& g, const CorrelationField& w, int slot, const KernelConfig& cfg) {
    std::vector<int> one{slot};
    const auto r = collision_field(g, w.Q, w.J, cfg, &one);
    return {r.n1[static_cast<std::size_t>(slot)], r.n2[static_cast<std::size_t>(slot)]};
}

NFields assemble_N(const Grid& g, const CorrelationField& w, const KernelConfig& cfg) {
    KernelConfig raw_cfg = cfg;
    raw_cfg.prefactor = false;
    NFields out;
    out.raw = collision_field(g, w.Q, w.J, raw_cfg);
    const double c = collision_prefactor(g.dim(), cfg.lambda);
    const auto nf = static_cast<std::size_t>(g.nfield());
    out.N12.assign(nf, 0.0);
    out.N22.assign(nf, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
        const auto rk = static_cast<std::size_t>(g.reflect_k(static_cast<int>(f)));
        out.N12[f] = c * out.raw.n1[rk];
        out.N22[f] = c * (out.raw.n2[f] + out.raw.n2[rk]);
    }
    return out;
}

std::vector<double> energy_projection(const Grid& g, const std::vector<double>& N22) {
    std::vector<double> e(static_cast<std::size_t>(g.n2()), 0.0);
    for (int c = 0; c < g.n2(); ++c) {
        double s = 0.0;
        for (int f : g.slots_at(c)) s += N22[static_cast<std::size_t>(f)];
        e[static_cast<std::size_t>(c)] = g.wq() * s;
    }
    return e;
}

std::vector<double> theta(const Grid& g, const std::vector<double>& N22) {
    std::vector<double> th(static_cast<std::size_t>(g.n2()), 0.0);
    for (int c = 0; c < g.n2(); ++c) {
        double s = 0.0;
        for (int a = 0; a < g.n2(); ++a)
            for (int t = 0; t < g.nt(); ++t) {
                const int f = g.fi(a, c - a, t);
                s += N22[static_cast<std::size_t>(f)] / g.omega_pk(a, c - a, t);
            }
        th[static_cast<std::size_t>(c)] = g.wq() * s;
    }
    return th;
}

CorrelationField gibbs_state(const Grid& g, double T, double A, const KernelConfig* cfg) {
    if (!(A < g.spec().m2)) throw std::invalid_argument("gibbs_state: A must be < m2");
    CorrelationField f(g);
    for (int a = 0; a < g.n2(); ++a)
        for (int t = 0; t < g.nt(); ++t) {
            const double w = g.omega(a, t);
            f.Q[static_cast<std::size_t>(g.fi(a, -a, t))] = T / (w * w - A * w) * g.n2();
        }
    std::vector<double> N12(f.Q.size(), 0.0);
    if (cfg && cfg->lambda != 0.0) {
        // Q lives on the p = 0 class, so the collision terms vanish elsewhere
        KernelConfig kc = *cfg;
        kc.prefactor = true;
        const std::vector<int> slots = g.slots_at(0);
        const CollisionField cf = collision_field(g, f.Q, f.J, kc, &slots);
        for (int sl : slots) N12[static_cast<std::size_t>(g.reflect_k(sl))] = cf.n1[static_cast<std::size_t>(sl)];
    }
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t) {
                const auto s = static_cast<std::size_t>(g.fi(a, b, t));
                const auto rk = static_cast<std::size_t>(g.reflect_k(static_cast<int>(s)));
                const double wpk = g.omega_pk(a, b, t);
                f.P[s] = wpk * wpk * f.Q[s] - 0.5 * (N12[s] + N12[rk]);
            }
    return f;
}

double onshell_mass(const Grid& g, double epsilon) {
    std::vector<double> zero(static_cast<std::size_t>(g.nfield()), 0.0);
    KernelConfig cfg;
    cfg.epsilon = epsilon;
    cfg.orientation = 1.0;
    std::vector<int> one{g.fi(0, 0, 0)};
    return collision_field(g, zero, zero, cfg, &one).onshell_mass;
}

}  // namespace fl
