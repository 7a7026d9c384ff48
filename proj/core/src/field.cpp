#include "fourierlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fl {

namespace {
template <class F>
void for_each_slot(const Grid& g, F&& f) {
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t) f(a, b, t, g.fi(a, b, t));
}

void sym_one(const Grid& g, std::vector<double>& v, double parity) {
    std::vector<double> out(v.size());
    for_each_slot(g, [&](int, int, int, int f) {
        const int rk = g.reflect_k(f);
        const int rp = g.reflect_p(f);
        const int rb = g.reflect_p(rk);
        out[static_cast<std::size_t>(f)] = 0.25 * (v[static_cast<std::size_t>(f)] + parity * v[static_cast<std::size_t>(rk)] +
                                                   parity * v[static_cast<std::size_t>(rp)] + v[static_cast<std::size_t>(rb)]);
    });
    v.swap(out);
}

double defect_one(const Grid& g, const std::vector<double>& v, double parity) {
    double d = 0.0;
    for_each_slot(g, [&](int, int, int, int f) {
        d = std::max(d, std::abs(v[static_cast<std::size_t>(f)] - parity * v[static_cast<std::size_t>(g.reflect_k(f))]));
        d = std::max(d, std::abs(v[static_cast<std::size_t>(f)] - parity * v[static_cast<std::size_t>(g.reflect_p(f))]));
    });
    return d;
}
}  // namespace

void symmetrize(const Grid& g, CorrelationField& f) {
    sym_one(g, f.Q, 1.0);
    sym_one(g, f.J, -1.0);
    sym_one(g, f.P, 1.0);
}

double symmetry_defect(const Grid& g, const CorrelationField& f) {
    return std::max({defect_one(g, f.Q, 1.0), defect_one(g, f.J, -1.0), defect_one(g, f.P, 1.0)});
}

CorrelationField random_field(const Grid& g, std::uint64_t seed, double amp) {
    CorrelationField f(g);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    for (auto* v : {&f.Q, &f.J, &f.P})
        for (auto& x : *v) x = u(rng);
    symmetrize(g, f);
    return f;
}

CorrelationField equilibrium_field(const Grid& g, double T) {
    CorrelationField f(g);
    for (int a = 0; a < g.n2(); ++a)
        for (int t = 0; t < g.nt(); ++t) {
            const double w = g.omega(a, t);
            const int s = g.fi(a, -a, t);
            f.Q[static_cast<std::size_t>(s)] = T / (w * w) * g.n2();
            f.P[static_cast<std::size_t>(s)] = T * g.n2();
        }
    return f;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace fl
