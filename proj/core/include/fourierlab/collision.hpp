#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "fourierlab/field.hpp"
#include "fourierlab/lattice.hpp"

namespace fl {

struct KernelConfig {
    enum class Quadrature { Grid, MonteCarlo };
    double epsilon = 0.1;
    Quadrature quadrature = Quadrature::Grid;
    int mc_samples = 0;
    std::uint64_t mc_seed = 1;
    // multiply by (9/8) (2 pi)^(3d) lambda^2
    bool prefactor = false;
    double lambda = 0.0;
    // below this on-shell mass the mollified delta is reported as unresolved
    double resolvability_floor = 1e-3;
    // +1: kernel bracket [w3^-2 W4 - w4^-2 W3] as written in the kernel
    // definition; -1: reversed bracket, the orientation under which
    // L11(0) < 0 < L22(0) (see README)
    double orientation = -1.0;
};

double collision_prefactor(int dim, double lambda);

// n1, n2 on every storage slot (or on the requested slots only).
struct CollisionField {
    std::vector<double> n1, n2;
    std::vector<double> n1_se, n2_se;  // Monte Carlo standard errors
    double imag_residual = 0.0;        // largest |Im| left after the s-sum
    double onshell_mass = 0.0;         // integral of the mollified delta
    bool resolved = true;
};

CollisionField collision_field(const Grid& g, const std::vector<double>& Q, const std::vector<double>& J,
                               const KernelConfig& cfg, const std::vector<int>* slots = nullptr);

struct CollisionPoint {
    double n1 = 0.0, n2 = 0.0;
};
// Single (p,k) point given by its storage slot.
CollisionPoint collision_n(const Grid& g, const CorrelationField& w, int slot, const KernelConfig& cfg);

struct NFields {
    std::vector<double> N12, N22;  // N12 at (p,k), N22 at (p,k)
    CollisionField raw;
};
// N12(p,-k) = c n1(p,k), N22(p,k) = c (n2(p,k) + n2(p,-k)), c the prefactor
NFields assemble_N(const Grid& g, const CorrelationField& w, const KernelConfig& cfg);

// int N22(p,k) dk for every p mod pi, indexed by c = (a+b) mod 2N
std::vector<double> energy_projection(const Grid& g, const std::vector<double>& N22);

// int rho(p/2,k) N22(p/2,k) dk for p in (pi/N) Z_2N, rho = omega(p,k)^-1
std::vector<double> theta(const Grid& g, const std::vector<double>& N22);

// Q = T (omega^2 - A omega)^-1 delta(2p), J = 0, P from the Q equation
// (gamma = 0). Throws on A >= m2.
CorrelationField gibbs_state(const Grid& g, double T, double A, const KernelConfig* cfg = nullptr);

// Mass of the on-shell mollified delta for patterns with sum s = 0,
// averaged over output points. Used to flag unresolved epsilon.
double onshell_mass(const Grid& g, double epsilon);

}  // namespace fl
