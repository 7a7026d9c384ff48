#include <doctest.h>

#include <cmath>
#include <complex>

#include "fourierlab/collision.hpp"
#include "fourierlab/field.hpp"

using namespace fl;
using cd = std::complex<double>;

namespace {

LatticeSpec small(int n, int m, int dim, double eps) {
    LatticeSpec s;
    s.n = n;
    s.m_transverse = m;
    s.dim = dim;
    s.m2 = 10.0;
    s.epsilon = eps;
    s.gamma = 0.1;
    return s;
}

int md(int x, int m) {
    const int r = x % m;
    return r < 0 ? r + m : r;
}

// Literal sextuple sum on the doubled (p,k) lattice for d = 1, written
// independently of the library: every (p_i, k_i) tuple is enumerated and the
// three Kronecker constraints are applied as factors.
void oracle(const Grid& g, const CorrelationField& w, double eps, int P, int K, cd& n1, cd& n2) {
    const int N = g.n(), L = 4 * N;
    auto om = [&](int k) { return 2 * (1 - std::cos(kPi * k / (2.0 * N))) + g.spec().m2; };
    auto W = [&](int s, int p, int kap) {
        const int qa = p + kap, qb = p - kap;
        const int f = g.fi(md(qa / 2, 2 * N), md(qb / 2, 2 * N), 0);
        return cd(w.Q[std::size_t(f)], s * w.J[std::size_t(f)] / om(qa));
    };
    auto del = [&](int x) { return md(x, L) == 0 ? 2.0 * N : 0.0; };
    const double wt = 1.0 / (8.0 * N * N);
    n1 = n2 = 0.0;
    for (int P1 = 0; P1 < L; ++P1)
        for (int K1 = 0; K1 < L; K1 += 2)
            for (int P2 = 0; P2 < L; ++P2)
                for (int K2 = 0; K2 < L; K2 += 2)
                    for (int P3 = 0; P3 < L; ++P3)
                        for (int K3 = 0; K3 < L; K3 += 2)
                            for (int P4 = 0; P4 < L; ++P4)
                                for (int K4 = 0; K4 < L; K4 += 2) {
                                    const double d = del(2 * (P - P1 - P2 - P3 - P4)) * del(2 * P - K1 - K2 - K3 - K4) *
                                                     del(P - K - K4);
                                    if (d == 0.0) continue;
                                    const double w1 = om(K1), w2 = om(K2), w3 = om(K3), w4 = om(K4);
                                    for (int s1 = -1; s1 <= 1; s1 += 2)
                                        for (int s2 = -1; s2 <= 1; s2 += 2)
                                            for (int s3 = -1; s3 <= 1; s3 += 2)
                                                for (int s4 = -1; s4 <= 1; s4 += 2) {
                                                    const cd R = 1.0 / cd(s1 * w1 + s2 * w2 + s3 * w3 + s4 * w4, eps);
                                                    const cd br = del(2 * P3) * W(s4, P4, K4 - P4) / (w3 * w3) -
                                                                  del(2 * P4) * W(s3, P3, K3 - P3) / (w4 * w4);
                                                    const cd base = W(s1, P1, K1 - P1) * W(s2, P2, K2 - P2) *
                                                                    (s3 * w3) * br * R * d * std::pow(wt, 4);
                                                    n1 += base;
                                                    n2 += base * cd(0, s4 * w4);
                                                }
                                }
}

}  // namespace

TEST_CASE("kernel matches the brute-force oracle, both orientations") {
    const double eps = 0.3;
    const Grid g(small(2, 1, 1, eps));
    const CorrelationField w = random_field(g, 11);
    for (double orient : {1.0, -1.0}) {
        KernelConfig cfg;
        cfg.epsilon = eps;
        cfg.orientation = orient;
        const CollisionField cf = collision_field(g, w.Q, w.J, cfg);
        const int L = 4 * g.n();
        for (int P = 0; P < L; ++P)
            for (int K = 0; K < L; ++K) {
                if ((P + K) % 2) continue;
                cd n1, n2;
                oracle(g, w, eps, P, K, n1, n2);
                const int f = g.fi(md((P + K) / 2, g.n2()), md((P - K) / 2, g.n2()), 0);
                CHECK(std::abs(n1.imag()) < 1e-15);
                CHECK(std::abs(n2.imag()) < 1e-15);
                CHECK(cf.n1[std::size_t(f)] == doctest::Approx(orient * n1.real()).epsilon(1e-10));
                CHECK(cf.n2[std::size_t(f)] == doctest::Approx(orient * n2.real()).epsilon(1e-10));
            }
    }
}

TEST_CASE("energy projection vanishes for every field") {
    for (auto s : {small(4, 1, 1, 0.4), small(2, 3, 2, 2.0)}) {
        const Grid g(s);
        KernelConfig cfg;
        cfg.epsilon = s.epsilon;
        cfg.lambda = 1.0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const NFields nf = assemble_N(g, random_field(g, seed), cfg);
            const double mx = max_abs(nf.N22);
            REQUIRE(mx > 0.0);
            for (double e : energy_projection(g, nf.N22)) CHECK(std::abs(e) <= 1e-12 * mx);
            CHECK(nf.raw.imag_residual <= 1e-12 * mx);
        }
        const CorrelationField zero(g);
        for (double e : energy_projection(g, assemble_N(g, zero, cfg).N22)) CHECK(e == 0.0);
    }
}

TEST_CASE("lambda = 0 switches the collision terms off") {
    const Grid g(small(4, 1, 1, 0.4));
    KernelConfig cfg;
    cfg.epsilon = 0.4;
    cfg.lambda = 0.0;
    const NFields nf = assemble_N(g, random_field(g, 3), cfg);
    CHECK(max_abs(nf.N12) == 0.0);
    CHECK(max_abs(nf.N22) == 0.0);
}

TEST_CASE("equilibrium is a fixed point of the collision map") {
    const Grid g(small(4, 1, 1, 0.4));
    KernelConfig cfg;
    cfg.epsilon = 0.4;
    cfg.lambda = 1.0;
    const double scale = max_abs(assemble_N(g, random_field(g, 2), cfg).N22);
    const NFields nf = assemble_N(g, equilibrium_field(g, 1.3), cfg);
    CHECK(max_abs(nf.N12) <= 1e-12 * scale);
    CHECK(max_abs(nf.N22) <= 1e-12 * scale);
    for (double t : theta(g, nf.N22)) CHECK(std::abs(t) <= 1e-12 * scale);
}

TEST_CASE("N22 keeps the parities of Q") {
    const Grid g(small(4, 1, 1, 0.4));
    KernelConfig cfg;
    cfg.epsilon = 0.4;
    cfg.lambda = 1.0;
    const NFields nf = assemble_N(g, random_field(g, 5), cfg);
    const double mx = max_abs(nf.N22);
    for (int f = 0; f < g.nfield(); ++f) {
        CHECK(std::abs(nf.N22[std::size_t(f)] - nf.N22[std::size_t(g.reflect_k(f))]) <= 1e-12 * mx);
        CHECK(std::abs(nf.N22[std::size_t(f)] - nf.N22[std::size_t(g.reflect_p(f))]) <= 1e-12 * mx);
    }
}

TEST_CASE("Monte Carlo quadrature agrees with the grid sum") {
    const Grid g(small(2, 3, 2, 2.0));
    const CorrelationField w = random_field(g, 8);
    KernelConfig grid;
    grid.epsilon = 2.0;
    KernelConfig mc = grid;
    mc.quadrature = KernelConfig::Quadrature::MonteCarlo;
    mc.mc_samples = 4000;
    mc.mc_seed = 17;
    const std::vector<int> slots = {g.fi(0, 0, 0), g.fi(1, 0, 1), g.fi(2, 1, 2), g.fi(3, 3, 0)};
    const CollisionField a = collision_field(g, w.Q, w.J, grid, &slots);
    const CollisionField b = collision_field(g, w.Q, w.J, mc, &slots);
    for (int s : slots) {
        const auto u = std::size_t(s);
        INFO("slot " << s);
        CHECK(std::abs(a.n1[u] - b.n1[u]) <= 3.0 * b.n1_se[u] + 1e-14);
        CHECK(std::abs(a.n2[u] - b.n2[u]) <= 3.0 * b.n2_se[u] + 1e-14);
    }
}

TEST_CASE("generalized Gibbs state") {
    const Grid g(small(4, 1, 1, 0.4));
    const CorrelationField e = equilibrium_field(g, 1.0), q = gibbs_state(g, 1.0, 0.0);
    for (std::size_t i = 0; i < e.Q.size(); ++i) CHECK(q.Q[i] == doctest::Approx(e.Q[i]));
    const CorrelationField a = gibbs_state(g, 1.0, 0.5);
    for (int s : g.slots_at(0)) CHECK(a.Q[std::size_t(s)] > 0.0);
    CHECK_THROWS_AS(gibbs_state(g, 1.0, 10.0), std::invalid_argument);
}
