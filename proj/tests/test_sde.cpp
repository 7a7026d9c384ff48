#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "fourierlab/sde.hpp"

using namespace fl;

namespace {

LatticeSpec chain(int n, double lambda, double t1, double t2) {
    LatticeSpec s;
    s.n = n;
    s.m_transverse = 1;
    s.dim = 1;
    s.m2 = 10.0;
    s.lambda = lambda;
    s.t1 = t1;
    s.t2 = t2;
    return with_defaults(s);
}

}  // namespace

TEST_CASE("force of a point source matches the dense matrix square") {
    const LatticeSpec s = chain(2, 0.0, 1.0, 1.0);  // 2N = 4 sites
    const SiteLattice lat(s);
    Eigen::MatrixXd om = Eigen::MatrixXd::Zero(4, 4);
    for (int x = 0; x < 4; ++x) {
        om(x, x) = 2.0 + s.m2;
        om(x, (x + 1) % 4) -= 1.0;
        om(x, (x + 3) % 4) -= 1.0;
    }
    const Eigen::MatrixXd om2 = om * om;
    CHECK(om2(0, 0) == doctest::Approx(146.0));
    std::vector<double> q(4, 0.0);
    q[0] = 1.0;
    const auto f = force(lat, q);
    for (int x = 0; x < 4; ++x) CHECK(f[std::size_t(x)] == doctest::Approx(-om2(x, 0)));
    CHECK(force(lat, std::vector<double>(4, 0.0)) == std::vector<double>(4, 0.0));
}

TEST_CASE("plane waves are eigenvectors of the force") {
    for (int dim : {1, 3}) {
        LatticeSpec s = chain(4, 0.0, 1.0, 1.0);
        s.dim = dim;
        s.m_transverse = dim == 1 ? 1 : 4;
        const SiteLattice lat(s);
        const int L = 2 * s.n, M = s.m_transverse;
        const double k1 = 2 * kPi * 3 / L, k2 = dim > 1 ? 2 * kPi / M : 0.0;
        std::vector<double> q(std::size_t(lat.volume()));
        for (int i = 0; i < lat.volume(); ++i) {
            const int x1 = i / lat.per_layer(), x2 = dim > 1 ? (i % lat.per_layer()) / M : 0;
            q[std::size_t(i)] = std::cos(k1 * x1 + k2 * x2);
        }
        const double w = 2 * (1 - std::cos(k1)) + (dim > 1 ? 2 * (1 - std::cos(k2)) : 0.0) + s.m2;
        const auto f = force(lat, q);
        for (int i = 0; i < lat.volume(); ++i) CHECK(f[std::size_t(i)] == doctest::Approx(-w * w * q[std::size_t(i)]));
    }
}

TEST_CASE("harmonic chain without baths conserves energy") {
    LatticeSpec s = chain(4, 0.0, 1.0, 1.0);
    s.gamma = 1e-300;  // the spec requires gamma > 0; this is zero in double precision
    SimConfig c;
    c.dt = 0.01;
    c.steps = 2000;
    c.burn_in = 100;
    c.batches = 2;
    const PhaseState init = harmonic_gibbs_state(s, 1.0, 5);
    const SimResult r = simulate(s, c, &init);
    CHECK(std::abs(r.energy_end - r.energy_start) < 1e-3 * r.energy_start);
}

TEST_CASE("config validation and blow-up") {
    SimConfig c;
    c.dt = -1.0;
    CHECK_FALSE(c.validate().empty());
    CHECK_THROWS_AS(simulate(chain(2, 0.0, 1, 1), c), std::invalid_argument);
    SimConfig big;
    big.dt = 1.0;
    big.steps = 1000;
    big.burn_in = 10;
    CHECK_THROWS_AS(simulate(chain(2, 0.0, 1, 1), big), BlowUp);
}

TEST_CASE("same seed gives identical accumulators") {
    const LatticeSpec s = chain(4, 0.1, 1.2, 0.8);
    SimConfig c;
    c.dt = 0.02;
    c.steps = 20000;
    c.burn_in = 2000;
    c.seed = 9;
    c.init_temperature = 1.0;
    const SimResult a = simulate(s, c), b = simulate(s, c);
    CHECK(a.acc.p2 == b.acc.p2);
    CHECK(a.acc.qp == b.acc.qp);
    c.seed = 10;
    CHECK(simulate(s, c).acc.p2 != a.acc.p2);
}

TEST_CASE("harmonic equilibrium: Gibbs law at the bath temperature") {
    const LatticeSpec s = chain(4, 0.0, 1.0, 1.0);
    SimConfig c;
    c.dt = 0.02;
    c.steps = 400000;
    c.burn_in = 1000;
    c.thinning = 5;
    c.batches = 2;
    c.seed = 100;
    c.init_temperature = 1.0;  // fills the modes that never touch a bath
    const SimResult r = simulate_replicas(s, c, 40, 1);
    const LayerEstimate T = kinetic_profile(r.acc);
    for (std::size_t x = 0; x < T.mean.size(); ++x) {
        INFO("layer " << x << ": " << T.mean[x] << " +- " << T.se[x]);
        CHECK(std::abs(T.mean[x] - 1.0) <= 3.0 * T.se[x]);
    }
    for (const auto& d : stencil_offsets(1)) {
        const LayerEstimate h = qp_profile(r.acc, d);
        for (std::size_t x = 0; x < h.mean.size(); ++x) CHECK(std::abs(h.mean[x]) <= 3.0 * h.se[x]);
    }
}

TEST_CASE("harmonic, T1 = T2: no current") {
    const LatticeSpec s = chain(4, 0.0, 1.0, 1.0);
    SimConfig c;
    c.dt = 0.02;
    c.steps = 1000000;
    c.seed = 4;
    const SimResult r = simulate(s, c);
    const LayerEstimate j = heat_current_profile(r.acc, s);
    for (std::size_t x = 0; x < j.mean.size(); ++x) CHECK(std::abs(j.mean[x]) <= 3.0 * j.se[x]);
    const BoundaryFlux f = boundary_flux(r.acc, s);
    CHECK(std::abs(f.flux1) <= 3.0 * f.se1);
    CHECK(std::abs(f.flux2) <= 3.0 * f.se2);
}

TEST_CASE("harmonic, T1 != T2: piecewise constant current and flux balance") {
    const LatticeSpec s = chain(4, 0.0, 2.0, 1.0);
    SimConfig c;
    c.dt = 0.02;
    c.steps = 1000000;
    c.seed = 8;
    const SimResult r = simulate(s, c);
    const LayerEstimate j = heat_current_profile(r.acc, s);
    const int n = s.n;
    for (int x = 1; x <= n; ++x)
        CHECK(std::abs(j.mean[std::size_t(x)] - j.mean[1]) <= 3.0 * std::hypot(j.se[std::size_t(x)], j.se[1]));
    // the ring is mirror symmetric: the other half carries -j
    for (int x = n + 1; x < 2 * n; ++x)
        CHECK(std::abs(j.mean[std::size_t(x)] + j.mean[1]) <= 3.0 * std::hypot(j.se[std::size_t(x)], j.se[1]));
    double tele = 0.0;
    for (int x = 0; x < 2 * n; ++x) tele += j.mean[std::size_t((x + 1) % (2 * n))] - j.mean[std::size_t(x)];
    CHECK(std::abs(tele) < 1e-12);
    const BoundaryFlux f = boundary_flux(r.acc, s);
    CHECK(f.flux1 > 0.0);
    CHECK(std::abs(f.sum) <= 3.0 * f.se_sum);
    // layer 0 feeds both halves of the ring
    CHECK(std::abs(f.flux1 - 2.0 * j.mean[1]) <= 3.0 * std::hypot(f.se1, 2.0 * j.se[1]));
}
