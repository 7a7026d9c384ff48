#include <doctest.h>

#include <cmath>
#include <random>

#include "fourierlab/lattice.hpp"

using namespace fl;

namespace {

LatticeSpec spec(int n, int m, int dim, double m2 = 10.0) {
    LatticeSpec s;
    s.n = n;
    s.m_transverse = m;
    s.dim = dim;
    s.m2 = m2;
    return with_defaults(s);
}

}  // namespace

TEST_CASE("dispersion values") {
    const double z[3] = {0, 0, 0}, pi3[3] = {kPi, kPi, kPi}, half[3] = {kPi / 2, 0, 0};
    CHECK(dispersion(z, 3, 10.0) == doctest::Approx(10.0));
    CHECK(dispersion(pi3, 3, 10.0) == doctest::Approx(22.0));
    CHECK(dispersion(half, 3, 10.0) == doctest::Approx(12.0));
}

TEST_CASE("dispersion is even and periodic") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int i = 0; i < 50; ++i) {
        const double k[3] = {u(rng), u(rng), u(rng)};
        const double mk[3] = {-k[0], -k[1], -k[2]};
        const double sk[3] = {k[0] + 2 * kPi, k[1], k[2] - 2 * kPi};
        const double w = dispersion(k, 3, 10.0);
        CHECK(w >= 10.0);
        CHECK(dispersion(mk, 3, 10.0) == doctest::Approx(w).epsilon(1e-14));
        CHECK(dispersion(sk, 3, 10.0) == doctest::Approx(w).epsilon(1e-12));
    }
}

TEST_CASE("delta omega2 product identity") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    CHECK(delta_omega2(0.0, {0.3, 0.2, 1.0}, 10.0) == doctest::Approx(0.0));
    CHECK(std::abs(delta_omega2(kPi, {0.3, 0.2, 1.0}, 10.0)) < 1e-12);
    for (int i = 0; i < 100; ++i) {
        const double p = u(rng);
        const std::vector<double> k = {u(rng), u(rng), u(rng)};
        const double a = delta_omega2(p, k, 10.0), b = delta_omega2_product(p, k, 10.0);
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("mass gap") {
    auto g3 = mass_gap_check(spec(2, 2, 3, 10.0));
    CHECK(g3.ok);
    CHECK(g3.margin == doctest::Approx(8.0));
    CHECK(g3.analytic == doctest::Approx(8.0));
    auto g6 = mass_gap_check(spec(2, 2, 3, 6.0));
    CHECK_FALSE(g6.ok);
    CHECK(g6.margin == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(mass_gap_check(spec(4, 1, 1, 10.0)).ok);
}

TEST_CASE("to_pk examples and exhaustive round trip") {
    const int n = 4;
    auto pk = to_pk(0.0, 0.0, n);
    CHECK(pk.p == doctest::Approx(0.0));
    CHECK(pk.k == doctest::Approx(0.0));
    pk = to_pk(kPi / n, 0.0, n);
    CHECK(pk.p == doctest::Approx(kPi / (2 * n)));
    CHECK(pk.k == doctest::Approx(kPi / (2 * n)));
    for (int a = 0; a < 2 * n; ++a)
        for (int b = 0; b < 2 * n; ++b) {
            const double q = a * kPi / n, qp = b * kPi / n;
            const PK r = to_pk(q, qp, n);
            const auto back = from_pk(r.p, r.k, n);
            CHECK(std::remainder(back[0] - q, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(std::remainder(back[1] - qp, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
            // (p + pi, k + pi) names the same pair
            const auto img = from_pk(r.p + kPi, r.k + kPi, n);
            CHECK(std::remainder(img[0] - q, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(std::remainder(img[1] - qp, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
        }
    CHECK_THROWS_AS(from_pk(kPi / (2 * n), 0.0, n), std::invalid_argument);
}

TEST_CASE("grid invariants") {
    for (int dim : {1, 2, 3}) {
        const Grid g(spec(4, 3, dim));
        double integral = 0.0;
        for (int q = 0; q < g.nq(); ++q) integral += g.wq();
        CHECK(integral == doctest::Approx(1.0));
        for (int a = 0; a < g.n2(); ++a)
            for (int b = 0; b < g.n2(); ++b)
                for (int t = 0; t < g.nt(); ++t) {
                    const double wp = g.omega(a, t), wm = g.omega(b, g.t_neg(t));
                    const double wpk = g.omega_pk(a, b, t);
                    CHECK(wpk * wpk == doctest::Approx(0.5 * (wp * wp + wm * wm)).epsilon(1e-14));
                    CHECK(g.delta_omega2(a, b, t) == doctest::Approx(wp * wp - wm * wm).epsilon(1e-12));
                    const int f = g.fi(a, b, t);
                    CHECK(g.reflect_k(g.reflect_k(f)) == f);
                    CHECK(g.reflect_p(g.reflect_p(f)) == f);
                }
        // every slot belongs to exactly one class
        std::vector<int> seen(static_cast<std::size_t>(g.nfield()), 0);
        for (int c = 0; c < g.n2(); ++c)
            for (int s : g.slots_at(c)) ++seen[static_cast<std::size_t>(s)];
        for (int v : seen) CHECK(v == 1);
    }
}

TEST_CASE("spec validation names every field") {
    LatticeSpec s;
    s.n = 1;
    s.t1 = 0.0;
    s.t2 = -1.0;
    s.gamma = 0.1;
    s.epsilon = 0.1;
    const auto e = s.validate();
    auto has = [&e](const std::string& f) {
        for (const auto& m : e)
            if (m.rfind(f + ":", 0) == 0) return true;
        return false;
    };
    CHECK(has("n"));
    CHECK(has("t1"));
    CHECK(has("t2"));
    CHECK_FALSE(has("m2"));
}

TEST_CASE("defaults") {
    CHECK(default_gamma(16) == doctest::Approx(std::pow(16.0, -0.875)));
    CHECK(default_epsilon(8, 1, 1) == doctest::Approx(kPi / 8));
    CHECK(default_epsilon(4, 4, 3) == doctest::Approx(kPi / 2));
}
