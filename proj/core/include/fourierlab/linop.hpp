#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fourierlab/collision.hpp"
#include "fourierlab/lattice.hpp"

namespace fl {

// Linearization of the collision map at T0 omega^-2 delta(2p), restricted to
// one p (mod pi). Rows: (n1(k) - n1(-k), n2(k) + n2(-k)); columns: (J, Q).
// Matrices act on plain slot values in the order of `slots`.
struct LinearizedBlocks {
    int c = 0;                // p = c pi / 2N (mod pi)
    double p = 0.0;
    double T0 = 1.0;
    bool includes_lambda_prefactor = false;
    double lambda = 0.0;
    std::vector<int> slots;   // k-slots of this p
    std::vector<int> reflect; // index of -k within slots
    Eigen::MatrixXd L11, L12, L21, L22;
    Eigen::MatrixXd M11, M12, M21, M22;  // coefficients of w(p, +-k)
    Eigen::MatrixXd K11, K12, K21, K22;  // k3-integral kernel
    Eigen::VectorXd weight;   // wq omega(p,k)^2
    Eigen::VectorXd omega_pk;
    Eigen::VectorXd domega2;  // delta omega^2(p,k)
    Eigen::VectorXd k_first;  // first component of k

    int size() const { return static_cast<int>(slots.size()); }
};

struct LinopConfig {
    double epsilon = 0.1;
    bool prefactor = false;
    double lambda = 0.0;
    double orientation = -1.0;  // same meaning as KernelConfig::orientation
};

LinearizedBlocks build_Lp(const Grid& g, int c, double T0, const LinopConfig& cfg);

// Row-combined collision map restricted to the slots of class c, for the
// finite-difference oracle: (n1(k) - n1(-k), n2(k) + n2(-k)).
Eigen::VectorXd collision_rows(const Grid& g, const CorrelationField& w, int c, const KernelConfig& cfg);

double weighted_norm(const LinearizedBlocks& b, const Eigen::VectorXd& f);
double weighted_dot(const LinearizedBlocks& b, const Eigen::VectorXd& f, const Eigen::VectorXd& h);

// omega(p,k)^-j on the slots of b
Eigen::VectorXd omega_power(const LinearizedBlocks& b, double j);

struct ZeroModes {
    double r2 = 0.0, r3 = 0.0, r4 = 0.0;  // ||L22 v|| / ||v|| for v = omega^-j, weighted norm
    double l12 = 0.0, l21 = 0.0;          // weighted operator norms: L12 on even, L21 on odd functions
};
ZeroModes zero_mode_residuals(const LinearizedBlocks& b);

struct ProjectorSpec {
    Eigen::VectorXd weight;
    Eigen::MatrixXd span;  // columns omega^-2, omega^-3
    Eigen::MatrixXd P, P_perp;
};
ProjectorSpec make_projector(const LinearizedBlocks& b);

// Orthonormal bases (weighted inner product) of odd and even k-functions.
Eigen::MatrixXd odd_basis(const LinearizedBlocks& b);
Eigen::MatrixXd even_basis(const LinearizedBlocks& b, bool remove_zero_modes);

struct QuadForms {
    std::vector<double> jl11j;    // (J, L11 J)
    std::vector<double> ql22q;    // (Q, Pperp L22 Pperp Q)
};
// Probes: J odd, Q even (projected internally).
QuadForms quadratic_forms(const LinearizedBlocks& b, const std::vector<Eigen::VectorXd>& j_probes,
                          const std::vector<Eigen::VectorXd>& q_probes);

struct MultiplierBounds {
    double floor = 0.0;          // min smallest singular value of dw2 sigma1 + M(p,k)
    double fitted_c = 0.0;       // min of floor(p,k) / (lambda^2 + |sin p sin k|)
    bool m11_negative = true;
    bool m22_positive = true;
    double max_m11 = 0.0, min_m22 = 0.0;
};
MultiplierBounds multiplier_bounds(const std::vector<LinearizedBlocks>& sweep, double lambda);

struct ProjectedOperator {
    double p = 0.0;
    bool in_E0 = false;
    double B = 5.0;
    Eigen::MatrixXd D;      // full (J,Q) operator on slot values, 2n x 2n
    Eigen::MatrixXd basis;  // columns spanning the admissible (J,Q) subspace
    Eigen::MatrixXd reduced;  // basis^T W D basis
    Eigen::VectorXd weight2;  // weights for (J,Q)
};

bool in_E0(double p, double lambda, double B);
ProjectedOperator build_Dp(const LinearizedBlocks& b, double B, double lambda);

struct DpSolution {
    Eigen::VectorXd J, Q;
    double smallest_sv = 0.0;
    double largest_sv = 0.0;
    double residual = 0.0;  // relative, in the reduced space
    bool near_singular = false;
    int deflated = 0;
};
DpSolution solve_Dp(const ProjectedOperator& op, const Eigen::VectorXd& rhs_J, const Eigen::VectorXd& rhs_Q,
                    double floor = 1e-12);

}  // namespace fl
