#include <doctest.h>

#include <cmath>
#include <random>

#include "fourierlab/linop.hpp"

using namespace fl;

namespace {

LatticeSpec small(int n, int m, int dim) {
    LatticeSpec s;
    s.n = n;
    s.m_transverse = m;
    s.dim = dim;
    s.m2 = 10.0;
    return with_defaults(s);
}

Eigen::VectorXd random_vec(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

}  // namespace

TEST_CASE("central differences of the collision map converge to L_p at second order") {
    for (auto s : {small(4, 1, 1), small(2, 3, 2)})
        for (int c : {0, 1}) {
            const Grid g(s);
            const double T0 = 1.0;
            LinopConfig lc;
            lc.epsilon = s.epsilon;
            KernelConfig kc;
            kc.epsilon = s.epsilon;
            const LinearizedBlocks b = build_Lp(g, c, T0, lc);
            const int n = b.size();
            std::mt19937_64 rng(3);
            const Eigen::VectorXd dj = random_vec(n, rng), dq = random_vec(n, rng);
            Eigen::VectorXd lin(2 * n);
            lin << b.L11 * dj + b.L12 * dq, b.L21 * dj + b.L22 * dq;
            const CorrelationField eq = equilibrium_field(g, T0);
            std::vector<double> err;
            for (double h : {0.4, 0.2, 0.1}) {
                CorrelationField wp = eq, wm = eq;
                for (int i = 0; i < n; ++i) {
                    const auto sl = std::size_t(b.slots[std::size_t(i)]);
                    wp.Q[sl] += h * dq(i);
                    wp.J[sl] += h * dj(i);
                    wm.Q[sl] -= h * dq(i);
                    wm.J[sl] -= h * dj(i);
                }
                const Eigen::VectorXd fd = (collision_rows(g, wp, c, kc) - collision_rows(g, wm, c, kc)) / (2 * h);
                err.push_back((fd - lin).norm());
            }
            INFO("dim " << s.dim << " c " << c << " errors " << err[0] << " " << err[1] << " " << err[2]);
            // for c != 0, N the cubic terms cannot feed back into class c and the difference is exact
            if (err[0] <= 1e-12 * lin.norm()) {
                CHECK(err[2] <= 1e-12 * lin.norm());
                continue;
            }
            CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.25));
            CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.25));
        }
}

TEST_CASE("block structure") {
    const Grid g(small(4, 1, 1));
    LinopConfig lc;
    lc.epsilon = g.spec().epsilon;
    for (int c : {0, 3}) {
        const LinearizedBlocks b = build_Lp(g, c, 1.0, lc);
        CHECK((b.L11 - b.M11 - b.K11).norm() <= 1e-14 * b.L11.norm());
        CHECK((b.L22 - b.M22 - b.K22).norm() <= 1e-14 * b.L22.norm());
        CHECK((b.L12 - b.M12 - b.K12).norm() <= 1e-14 * (b.L12.norm() + b.L22.norm()));
        CHECK((b.L21 - b.M21 - b.K21).norm() <= 1e-14 * (b.L21.norm() + b.L22.norm()));
    }
}

TEST_CASE("zero modes and vanishing off-diagonal blocks at p = 0") {
    for (auto s : {small(8, 1, 1), small(2, 2, 3)}) {
        const Grid g(s);
        LinopConfig lc;
        lc.epsilon = s.epsilon;
        const LinearizedBlocks b = build_Lp(g, 0, 1.0, lc);
        const ZeroModes z = zero_mode_residuals(b);
        CHECK(z.r2 <= 1e-10 * z.r4);
        CHECK(z.r3 < z.r4);
        CHECK(z.l12 <= 1e-12 * z.r4);
        CHECK(z.l21 <= 1e-12 * z.r4);
    }
}

TEST_CASE("sign structure of the diagonal blocks") {
    const Grid g(small(8, 1, 1));
    LinopConfig lc;
    lc.epsilon = g.spec().epsilon;
    for (int c : {0, 2, 5}) {
        const LinearizedBlocks b = build_Lp(g, c, 1.0, lc);
        std::mt19937_64 rng(7);
        std::vector<Eigen::VectorXd> jp, qp;
        for (int i = 0; i < 10; ++i) {
            jp.push_back(random_vec(b.size(), rng));
            qp.push_back(random_vec(b.size(), rng));
        }
        const QuadForms qf = quadratic_forms(b, jp, qp);
        for (double v : qf.jl11j) CHECK(v < 0.0);
        for (double v : qf.ql22q) CHECK(v > 0.0);
    }
}

TEST_CASE("multiplier bounds on a p sweep") {
    const Grid g(small(8, 1, 1));
    LinopConfig lc;
    lc.epsilon = g.spec().epsilon;
    std::vector<LinearizedBlocks> sweep;
    for (int c = 0; c < g.n2(); ++c) sweep.push_back(build_Lp(g, c, 1.0, lc));
    const MultiplierBounds mb = multiplier_bounds(sweep, 0.1);
    CHECK(mb.m11_negative);
    CHECK(mb.m22_positive);
    CHECK(mb.fitted_c > 0.0);
}

TEST_CASE("prefactored blocks scale as lambda^2") {
    const Grid g(small(4, 1, 1));
    LinopConfig a;
    a.epsilon = g.spec().epsilon;
    a.prefactor = true;
    a.lambda = 0.02;
    LinopConfig b2 = a;
    b2.lambda = 0.04;
    const LinearizedBlocks x = build_Lp(g, 1, 1.0, a), y = build_Lp(g, 1, 1.0, b2);
    CHECK((y.L22 - 4.0 * x.L22).norm() <= 1e-12 * y.L22.norm());
    CHECK((y.L11 - 4.0 * x.L11).norm() <= 1e-12 * y.L11.norm());
}

TEST_CASE("E0 membership and the projected solve") {
    CHECK(in_E0(0.0, 0.1, 5.0));
    CHECK(in_E0(kPi, 0.1, 5.0));
    CHECK(in_E0(0.05, 0.1, 5.0));
    CHECK_FALSE(in_E0(0.06, 0.1, 5.0));
    CHECK(in_E0(2 * kPi - 0.04, 0.1, 5.0));

    const Grid g(small(8, 1, 1));
    LinopConfig lc;
    lc.epsilon = g.spec().epsilon;
    lc.prefactor = true;
    lc.lambda = 0.1;
    for (int c : {0, 3}) {
        const LinearizedBlocks b = build_Lp(g, c, 1.0, lc);
        const ProjectedOperator op = build_Dp(b, 5.0, 0.1);
        std::mt19937_64 rng(2);
        const DpSolution sol = solve_Dp(op, random_vec(b.size(), rng), random_vec(b.size(), rng));
        CHECK(sol.residual < 1e-8);
        CHECK(sol.smallest_sv > 0.0);
    }
}
