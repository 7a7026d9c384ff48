#pragma once

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fourierlab/collision.hpp"
#include "fourierlab/field.hpp"
#include "fourierlab/lattice.hpp"
#include "fourierlab/linop.hpp"

namespace fl {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

// Functions on the momentum lattice p = c pi/N, c in Z_2N.
// f(p) = sum_x e^{-ipx} f(x);  inverse (1/2N) sum_p e^{ipx} f(p).
CVec fourier(const std::vector<double>& fx);
CVec inverse_fourier(const CVec& fp);
std::vector<double> inverse_fourier_real(const CVec& fp);
// (f*g)(p) = (1/2N) sum_p' f(p') g(p - p')
CVec convolve(const CVec& f, const CVec& g);
// d(p) = e^{ip} - 1 at p = c pi/N
cplx d_of(int c, int n);

struct ProfileParams {
    double T0 = 0.0, A0 = 0.0;  // mean values
    std::vector<double> T_x, A_x;
    CVec T, A;  // Fourier transforms
    CVec t, a;  // d(-p) T(p), d(-p) A(p)
    CVec S, s;  // T*A and d(-p) (T*A)(p)
};
ProfileParams profile_from_x(const std::vector<double>& T_x, const std::vector<double>& A_x);

struct Q0Result {
    std::vector<double> Q;
    int terms = 0;
    double ratio = 0.0;       // ||A|| / min omega
    double tail_bound = 0.0;  // geometric bound on the dropped terms
    double imag_residual = 0.0;
};
// sum_n (T * A^{*n})(2p) omega(p,k)^{-2-n}; throws std::domain_error when
// the series does not converge.
Q0Result build_Q0(const Grid& g, const ProfileParams& prof, double tol = 1e-12, int max_terms = 400);

struct RhoFields {
    CVec rho1, rho2;  // on storage slots
};
// rho_j = d(-2p)^{-1} domega2 omega(p,k)^{-1-j}, with the p -> 0 limit
// 4i sin k omega^{-j} on the p = 0 class.
RhoFields rhs_gradient_fields(const Grid& g);

struct FourierLawResult {
    Eigen::VectorXcd J, r;  // on the slots of the class, in LinearizedBlocks order
    DpSolution re, im;
};
// (J0, r0) = -D_p^{-1} Pi (rho1 t + rho2 s, 0)
FourierLawResult fourier_law(const Grid& g, const LinearizedBlocks& b, const ProjectedOperator& op,
                             const RhoFields& rho, cplx t_val, cplx s_val, double floor = 1e-12);

// First row only, with Q held at local equilibrium:
// J = -L11^{-1} (rho1 t + rho2 s) on odd functions. Used outside E0, where
// the full D_p solve would also absorb the gradient into Q.
Eigen::VectorXcd local_fourier_law(const LinearizedBlocks& b, const RhoFields& rho, cplx t_val, cplx s_val);

struct Currents {
    CVec j, j_prime;                 // per p = c pi/N
    std::vector<double> j_x, jp_x;   // x-space, layer x1
};
// j(p) = -i int dk e^{-ip/2} sin k (omega(p/2+k) + omega(p/2-k)) J(p/2,k);
// j' carries the extra weight eta = rho - int rho.
Currents currents_from_J(const Grid& g, const std::vector<cplx>& J);
Currents currents_from_J(const Grid& g, const std::vector<double>& J);

// Storage values of a kernel G(x, y) that is translation invariant in the
// transverse directions: G(x1, y1, r) with r = x_perp - y_perp.
// ghat(a,b,t) = sum e^{-i(q1 x1 + q1' y1)} e^{-i q_perp r} G(x1, y1, r).
using XKernel = std::function<double(int x1, int y1, const std::array<int, 3>& r)>;
std::vector<cplx> transform_xspace(const Grid& g, const XKernel& G);

// P(x,x) per layer from the storage values of P
std::vector<double> diagonal_profile(const Grid& g, const std::vector<double>& P);

struct ConductivityMatrix {
    Eigen::Matrix2d kappa = Eigen::Matrix2d::Zero();
    double beta0 = 0.0, beta1 = 0.0, beta2 = 0.0;
    double det = 0.0;
    bool positive_definite = false;  // symmetric part
    double min_sym_eigenvalue = 0.0;
};
// kappa^0 in the omega^2 dk inner product; throws if L11(0) is singular.
ConductivityMatrix kappa0(const LinearizedBlocks& b0);

// kappa(p) at class c from the Fourier law and the current formulas,
// probing with unit t and s.
Eigen::Matrix2cd kappa_at(const Grid& g, const LinearizedBlocks& b, const ProjectedOperator& op,
                          const RhoFields& rho);

struct LatticeSums {
    double i_plus = 0.0, i_minus = 0.0;  // 2 int_{+-} |d(q)|^-2 dq / N
};
LatticeSums lattice_sums(int n);

struct ZerothOrder {
    double T_plus = 0.0, T_minus = 0.0;
    double tau0 = 0.0, zeta0 = 0.0;
    double tau0_finite = 0.0, zeta0_finite = 0.0;  // with the boundary term and kappa(0)
    LatticeSums sums;
    ProfileParams profile;
    std::vector<double> T_pred, A_pred, j_pred, jp_pred;
    CVec U_T, U_S;  // U(p) components
};
// kappa0 may be null; then the currents are left at zero and only the
// asymptotic solve is reported.
ZerothOrder solve_conservation_zeroth(const LatticeSpec& spec, const ConductivityMatrix* kappa);

// cfg with the lambda^2 prefactor switched on at spec.lambda
KernelConfig physical(KernelConfig cfg, const LatticeSpec& spec);

struct Residuals {
    std::vector<double> r1, r2, r3;
    double n1 = 0.0, n2 = 0.0, n3 = 0.0;  // max |.| of each
    double scale = 0.0;                    // max |entries of Q omega^2|, P
};
// Friction convolutions: (Gamma G)(a,b,t) = (gamma/N) sum_j G(a-2j, b, t).
std::vector<double> friction_left(const Grid& g, const std::vector<double>& G, double gamma);
std::vector<double> friction_right(const Grid& g, const std::vector<double>& G, double gamma);
std::vector<double> noise_covariance(const Grid& g, double gamma, double T1, double T2);

// Residuals of the three stationary equations in the storage
// representation; the collision terms use physical(cfg, spec). When
// collision_slots is given (closed under k -> -k), the collision terms are
// evaluated there only and taken as zero elsewhere, which is exact for
// translation invariant fields restricted to the p = 0 class.
Residuals stationary_residual(const Grid& g, const CorrelationField& w, const LatticeSpec& spec,
                              const KernelConfig& cfg, const std::vector<int>* collision_slots = nullptr);

struct RefineConfig {
    double damping = 1.0;
    int max_iter = 30;
    double tol = 1e-10;
    int patience = 3;
    double T_ref = 0.0;  // linearization temperature; 0 means (T1+T2)/2
};

struct RefineStep {
    int iter = 0;
    double residual = 0.0;
    double ratio = 0.0;
};

struct RefineResult {
    CorrelationField state;
    std::vector<RefineStep> trace;
    bool converged = false;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, std::vector<RefineStep> trace)
        : std::runtime_error(msg), trace_(std::move(trace)) {}
    const std::vector<RefineStep>& trace() const { return trace_; }

private:
    std::vector<RefineStep> trace_;
};

double residual_norm(const Residuals& r);

RefineResult refine(const Grid& g, const CorrelationField& start, const LatticeSpec& spec, const KernelConfig& cfg,
                    const RefineConfig& rc);

// Zeroth-order closure state: Q0 from the profile, (J, r) from the Fourier
// law on the classes in E0 and from local_fourier_law elsewhere, P from the
// Q equation.
struct ClosureState {
    CorrelationField field;
    ZerothOrder zeroth;
    std::optional<ConductivityMatrix> kappa;  // empty when L11(0) is singular
    double max_imag = 0.0;
    int classes_in_E0 = 0;
};
ClosureState zeroth_order_state(const Grid& g, const LatticeSpec& spec, const KernelConfig& kcfg, double B = 5.0);

}  // namespace fl
