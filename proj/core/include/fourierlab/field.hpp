#pragma once

#include <cstdint>
#include <vector>

#include "fourierlab/lattice.hpp"

namespace fl {

// (Q, J, P) on the storage slots of a Grid. Values are real in this
// representation for fields that are real and even in x-space.
struct CorrelationField {
    std::vector<double> Q, J, P;

    CorrelationField() = default;
    explicit CorrelationField(const Grid& g)
        : Q(static_cast<std::size_t>(g.nfield()), 0.0),
          J(static_cast<std::size_t>(g.nfield()), 0.0),
          P(static_cast<std::size_t>(g.nfield()), 0.0) {}
};

// Projects onto Q(p,k) = Q(p,-k) = Q(-p,k), J(p,k) = -J(p,-k) = -J(-p,k),
// P with the same parities as Q.
void symmetrize(const Grid& g, CorrelationField& f);

// Largest violation of the parity symmetries.
double symmetry_defect(const Grid& g, const CorrelationField& f);

// Uniform entries in [-amp, amp], then symmetrized.
CorrelationField random_field(const Grid& g, std::uint64_t seed, double amp = 1.0);

// T omega(q)^-2 delta(2p) with delta(p) = 2N [p = 0 mod 2 pi]
CorrelationField equilibrium_field(const Grid& g, double T);

double max_abs(const std::vector<double>& v);

}  // namespace fl
