#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fl {

inline constexpr double kPi = 3.14159265358979323846;

// Model parameters. Sites live on Z_{2n} x Z_m^{dim-1}, baths sit on the
// layers x1 = 0 and x1 = n.
struct LatticeSpec {
    int n = 4;
    int m_transverse = 4;
    int dim = 3;
    double m2 = 10.0;
    double lambda = 0.05;
    double gamma = 0.0;
    double t1 = 1.1;
    double t2 = 0.9;
    double epsilon = 0.0;

    // One message per violated invariant; empty when the spec is valid.
    std::vector<std::string> validate() const;
    int n_transverse() const;  // m^(dim-1)
};

double default_gamma(int n, double alpha = 0.5);
double default_epsilon(int n, int m_transverse, int dim, double factor = 1.0);

// Fills gamma and epsilon with their defaults when they are left at zero.
LatticeSpec with_defaults(LatticeSpec spec, double alpha = 0.5, double eps_factor = 1.0);

void to_json(nlohmann::json& j, const LatticeSpec& s);
void from_json(const nlohmann::json& j, LatticeSpec& s);

// omega(k) = 2 sum_a (1 - cos k_a) + m2
double dispersion(const double* k, int dim, double m2);
inline double dispersion(const std::vector<double>& k, double m2) {
    return dispersion(k.data(), static_cast<int>(k.size()), m2);
}

// omega(p+k)^2 - omega(p-k)^2, p shifting only the first component.
double delta_omega2(double p, const std::vector<double>& k, double m2);
// 4 sin p sin k1 (omega(p+k) + omega(p-k))
double delta_omega2_product(double p, const std::vector<double>& k, double m2);

struct MassGap {
    bool ok = false;
    double margin = 0.0;      // min |sum s_i omega| over patterns with sum s != 0
    double analytic = 0.0;    // 2 m2 - 4 dim
    bool rho_condition = false;  // m2 > 2 sup(omega - m2), reported only
};
MassGap mass_gap_check(const LatticeSpec& spec);

struct PK {
    double p;
    double k;
};
// First components only. q, q' must sit on (pi/N) Z.
PK to_pk(double q, double q_prime, int n);
std::array<double, 2> from_pk(double p, double k, int n);

// Discrete momentum tables.
//
// Two-point functions are stored in the (q, q') representation: first
// components a, b in Z_{2N} (q = a pi/N), transverse index t for q, and
// q'_perp = -q_perp. A (p,k) point on the checkerboard is p = (a+b) pi/2N,
// k = (a-b) pi/2N; its image (p+pi, k+pi) is the same storage slot.
class Grid {
public:
    explicit Grid(const LatticeSpec& spec);

    const LatticeSpec& spec() const { return spec_; }
    int n() const { return spec_.n; }
    int n2() const { return 2 * spec_.n; }
    int nt() const { return nt_; }
    int dim() const { return spec_.dim; }
    int nq() const { return n2() * nt_; }           // momentum points
    int nfield() const { return n2() * n2() * nt_; }  // (q,q') slots

    int wrap(int a) const { int r = a % n2(); return r < 0 ? r + n2() : r; }
    int qi(int a, int t) const { return wrap(a) * nt_ + t; }
    int fi(int a, int b, int t) const { return (wrap(a) * n2() + wrap(b)) * nt_ + t; }

    int t_neg(int t) const { return tneg_[static_cast<std::size_t>(t)]; }
    int t_add(int t1, int t2) const { return tadd_[static_cast<std::size_t>(t1 * nt_ + t2)]; }
    int t_sub(int t1, int t2) const { return t_add(t1, t_neg(t2)); }

    double q_first(int a) const { return kPi * wrap(a) / spec_.n; }
    // Full momentum vector of (a, t), first component in [0, 2pi).
    std::vector<double> momentum(int a, int t) const;

    double omega(int a, int t) const { return omega_[static_cast<std::size_t>(qi(a, t))]; }
    double omega_q(int q) const { return omega_[static_cast<std::size_t>(q)]; }
    const std::vector<double>& omega_table() const { return omega_; }

    // (p,k) helpers on storage slots
    double omega_pk(int a, int b, int t) const;
    double delta_omega2(int a, int b, int t) const;
    // reflection k -> -k and p -> -p
    int reflect_k(int f) const;
    int reflect_p(int f) const;

    // int dk weight (1/2N per first direction, 1/M per transverse one)
    double wq() const { return 1.0 / (n2() * nt_); }

    // k-slots at fixed p: index c = (a+b) mod 2N selects p mod pi
    std::vector<int> slots_at(int c) const;

    double p_of(int a, int b) const { return kPi * (wrap(a) + wrap(b)) / (2.0 * spec_.n); }
    double k_of(int a, int b) const { return kPi * (wrap(a) - wrap(b)) / (2.0 * spec_.n); }

private:
    LatticeSpec spec_;
    int nt_;
    std::vector<int> tneg_, tadd_;
    std::vector<std::array<int, 2>> tcoord_;
    std::vector<double> omega_;
};

}  // namespace fl
