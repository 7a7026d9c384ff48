#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <stdexcept>
#include <vector>

#include "fourierlab/lattice.hpp"

namespace fl {

// Sites are row-major over (x1, x2, ..., xd), x1 in Z_{2N} slowest.
struct PhaseState {
    std::vector<double> q, p;
};

struct SimConfig {
    double dt = 0.0;           // 0: use default_dt(spec)
    long steps = 100000;
    long burn_in = 10000;
    std::uint64_t seed = 1;
    int thinning = 10;
    int batches = 20;          // batch means for standard errors
    double noise_factor = 2.0; // noise variance noise_factor * gamma * T * dt
    double blowup = 1e6;
    // > 0: start from a harmonic Gibbs sample at this temperature instead of
    // q = p = 0. Modes odd under x1 -> -x1 never see the baths, so a zero
    // start leaves them empty forever.
    double init_temperature = 0.0;

    std::vector<std::string> validate() const;
};

// 0.01 / max omega
double default_dt(const LatticeSpec& spec);

// largest omega = m2 + 4d
double omega_max(const LatticeSpec& spec);

class BlowUp : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SiteLattice {
public:
    explicit SiteLattice(const LatticeSpec& spec);
    int volume() const { return volume_; }
    int layers() const { return 2 * spec_.n; }
    int per_layer() const { return per_layer_; }
    int layer_of(int site) const { return site / per_layer_; }
    // site shifted by offset (periodic in every direction)
    int shift(int site, const std::array<int, 3>& off) const;
    const LatticeSpec& spec() const { return spec_; }

private:
    LatticeSpec spec_;
    int volume_, per_layer_;
    std::array<int, 3> ext_{1, 1, 1};
};

// (-Delta + m2) q
void apply_omega(const SiteLattice& lat, const std::vector<double>& q, std::vector<double>& out);
// -(-Delta + m2)^2 q - lambda q^3
std::vector<double> force(const SiteLattice& lat, const std::vector<double>& q);
double energy(const SiteLattice& lat, const PhaseState& s);

// Sample of the harmonic Gibbs law at temperature T: p ~ N(0, T),
// q ~ N(0, T omega^-2) with omega = -Delta + m2.
PhaseState harmonic_gibbs_state(const LatticeSpec& spec, double T, std::uint64_t seed);

// Offsets d with |d|_1 <= 2, the first being 0.
std::vector<std::array<int, 3>> stencil_offsets(int dim);

struct Accumulators {
    int layers = 0;
    int per_layer = 1;  // sites per layer
    std::vector<std::array<int, 3>> offsets;
    int batches = 0;
    // per batch: counts, sum of p^2 per layer, sum of q_x p_{x+d} per (layer, offset)
    std::vector<long> count;
    std::vector<double> p2;
    std::vector<double> qp;

    void init(int layers_, int per_layer_, std::vector<std::array<int, 3>> offs, int batches_);
    double& p2_at(int b, int x1) { return p2[static_cast<std::size_t>(b * layers + x1)]; }
    double& qp_at(int b, int x1, int o) {
        return qp[(static_cast<std::size_t>(b) * layers + x1) * offsets.size() + static_cast<std::size_t>(o)];
    }
    double p2_at(int b, int x1) const { return p2[static_cast<std::size_t>(b * layers + x1)]; }
    double qp_at(int b, int x1, int o) const {
        return qp[(static_cast<std::size_t>(b) * layers + x1) * offsets.size() + static_cast<std::size_t>(o)];
    }
    int offset_index(const std::array<int, 3>& d) const;
};

// Concatenates the batches of b after those of a.
Accumulators merge(const Accumulators& a, const Accumulators& b);

class Stepper {
public:
    Stepper(const LatticeSpec& spec, const SimConfig& cfg);
    void step(PhaseState& s, std::mt19937_64& rng);
    const SiteLattice& lattice() const { return lat_; }
    double dt() const { return dt_; }

private:
    LatticeSpec spec_;
    SimConfig cfg_;
    SiteLattice lat_;
    double dt_;
    std::vector<int> nbr_;  // volume x 2d neighbor table
    std::vector<double> f_, tmp_;
    double decay_, sd1_, sd2_;
    std::normal_distribution<double> normal_;
};

struct SimResult {
    Accumulators acc;
    PhaseState final_state;
    double energy_start = 0.0, energy_end = 0.0;
    double dt = 0.0;
};

// Starts from the given state, else from cfg.init_temperature, else from zero.
SimResult simulate(const LatticeSpec& spec, const SimConfig& cfg, const PhaseState* init = nullptr);

// Independent replicas with seeds derived from cfg.seed; merged accumulators.
SimResult simulate_replicas(const LatticeSpec& spec, const SimConfig& cfg, int replicas, int threads);

struct LayerEstimate {
    std::vector<double> mean, se;
};

// E p_x^2 per layer
LayerEstimate kinetic_profile(const Accumulators& acc);
// j(x1) = transverse average of J'(x - e1, x), J' = omega J + J omega, J = (H - H^T)/2
LayerEstimate heat_current_profile(const Accumulators& acc, const LatticeSpec& spec);
// H(x1; d) = <q_x p_{x+d}> per layer for offset d
LayerEstimate qp_profile(const Accumulators& acc, const std::array<int, 3>& d);

struct BoundaryFlux {
    double flux1 = 0.0, flux2 = 0.0, se1 = 0.0, se2 = 0.0;
    double sum = 0.0, se_sum = 0.0;  // flux1 + flux2
};
// gamma (T_b - P) at the two bath layers; T_b is scaled by noise_factor / 2
// so that the flux is the energy injection rate under either noise convention
BoundaryFlux boundary_flux(const Accumulators& acc, const LatticeSpec& spec, double noise_factor = 2.0);

}  // namespace fl
