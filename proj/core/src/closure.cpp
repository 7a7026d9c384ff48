#include "fourierlab/closure.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace fl {

namespace {

constexpr cplx kI{0.0, 1.0};

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

int n_of(std::size_t len) { return static_cast<int>(len / 2); }

LinopConfig linop_config(const KernelConfig& k) {
    LinopConfig c;
    c.epsilon = k.epsilon;
    c.prefactor = k.prefactor;
    c.lambda = k.lambda;
    c.orientation = k.orientation;
    return c;
}

// sin of the first k component at a slot of class c, k = (2a - c) pi/2N
double sin_k(const Grid& g, int a, int c) { return std::sin(kPi * (2 * a - c) / (2.0 * g.n())); }

}  // namespace

KernelConfig physical(KernelConfig cfg, const LatticeSpec& spec) {
    cfg.prefactor = true;
    cfg.lambda = spec.lambda;
    return cfg;
}

CVec fourier(const std::vector<double>& fx) {
    const int n2 = static_cast<int>(fx.size());
    const int n = n_of(fx.size());
    CVec out(fx.size());
    for (int c = 0; c < n2; ++c) {
        cplx s = 0.0;
        for (int x = 0; x < n2; ++x) s += std::polar(fx[uz(x)], -kPi * c * x / n);
        out[uz(c)] = s;
    }
    return out;
}

CVec inverse_fourier(const CVec& fp) {
    const int n2 = static_cast<int>(fp.size());
    const int n = n_of(fp.size());
    CVec out(fp.size());
    for (int x = 0; x < n2; ++x) {
        cplx s = 0.0;
        for (int c = 0; c < n2; ++c) s += fp[uz(c)] * std::polar(1.0, kPi * c * x / n);
        out[uz(x)] = s / static_cast<double>(n2);
    }
    return out;
}

std::vector<double> inverse_fourier_real(const CVec& fp) {
    const CVec z = inverse_fourier(fp);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
    return out;
}

CVec convolve(const CVec& f, const CVec& g) {
    const int n2 = static_cast<int>(f.size());
    CVec out(f.size(), 0.0);
    for (int c = 0; c < n2; ++c) {
        cplx s = 0.0;
        for (int c2 = 0; c2 < n2; ++c2) s += f[uz(c2)] * g[uz(((c - c2) % n2 + n2) % n2)];
        out[uz(c)] = s / static_cast<double>(n2);
    }
    return out;
}

cplx d_of(int c, int n) { return std::polar(1.0, kPi * c / n) - 1.0; }

ProfileParams profile_from_x(const std::vector<double>& T_x, const std::vector<double>& A_x) {
    if (T_x.size() != A_x.size() || T_x.size() < 4 || T_x.size() % 2 != 0)
        throw std::invalid_argument("profile_from_x: T and A need the same even length >= 4");
    ProfileParams pp;
    const int n2 = static_cast<int>(T_x.size());
    const int n = n2 / 2;
    pp.T_x = T_x;
    pp.A_x = A_x;
    pp.T = fourier(T_x);
    pp.A = fourier(A_x);
    std::vector<double> S_x(T_x.size());
    for (std::size_t i = 0; i < S_x.size(); ++i) S_x[i] = T_x[i] * A_x[i];
    pp.S = fourier(S_x);
    pp.T0 = pp.T[0].real() / n2;
    pp.A0 = pp.A[0].real() / n2;
    pp.t.resize(T_x.size());
    pp.a.resize(T_x.size());
    pp.s.resize(T_x.size());
    for (int c = 0; c < n2; ++c) {
        const cplx dm = d_of(-c, n);
        pp.t[uz(c)] = dm * pp.T[uz(c)];
        pp.a[uz(c)] = dm * pp.A[uz(c)];
        pp.s[uz(c)] = dm * pp.S[uz(c)];
    }
    return pp;
}

Q0Result build_Q0(const Grid& g, const ProfileParams& prof, double tol, int max_terms) {
    if (static_cast<int>(prof.T.size()) != g.n2()) throw std::invalid_argument("build_Q0: profile size != 2N");
    Q0Result res;
    double a_max = 0.0;
    for (double v : prof.A_x) a_max = std::max(a_max, std::abs(v));
    double t_max = 0.0;
    for (double v : prof.T_x) t_max = std::max(t_max, std::abs(v));
    const double w_min = g.spec().m2;
    res.ratio = a_max / w_min;
    if (res.ratio >= 1.0)
        throw std::domain_error("build_Q0: series diverges, max|A| = " + std::to_string(a_max) +
                                " >= min omega = " + std::to_string(w_min));

    std::vector<cplx> acc(uz(g.nfield()), 0.0);
    CVec term = prof.T;  // T * A^{*n}
    // |(T*A^n)(p) omega^{-2-n}| <= 2N max|T| max|A|^n / w_min^{2+n}
    const double base = g.n2() * t_max / (w_min * w_min);
    int n = 0;
    for (; n < max_terms; ++n) {
        for (int a = 0; a < g.n2(); ++a)
            for (int b = 0; b < g.n2(); ++b) {
                const int c = g.wrap(a + b);
                for (int t = 0; t < g.nt(); ++t) {
                    const double w = g.omega_pk(a, b, t);
                    acc[uz(g.fi(a, b, t))] += term[uz(c)] * std::pow(w, -2.0 - n);
                }
            }
        const double tail = res.ratio > 0.0 ? base * std::pow(res.ratio, n + 1) / (1.0 - res.ratio) : 0.0;
        res.tail_bound = tail;
        if (tail <= tol * std::max(base, 1e-300)) {
            ++n;
            break;
        }
        term = convolve(term, prof.A);
    }
    res.terms = n;
    res.Q.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        res.Q[i] = acc[i].real();
        res.imag_residual = std::max(res.imag_residual, std::abs(acc[i].imag()));
    }
    return res;
}

RhoFields rhs_gradient_fields(const Grid& g) {
    RhoFields r;
    r.rho1.assign(uz(g.nfield()), 0.0);
    r.rho2.assign(uz(g.nfield()), 0.0);
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b) {
            const int c = g.wrap(a + b);
            for (int t = 0; t < g.nt(); ++t) {
                const auto f = uz(g.fi(a, b, t));
                const double w = g.omega_pk(a, b, t);
                if (c == 0) {
                    // k = a pi/N on this class
                    const cplx lim = 4.0 * kI * std::sin(kPi * a / g.n());
                    r.rho1[f] = lim / w;
                    r.rho2[f] = lim / (w * w);
                } else {
                    const cplx base = g.delta_omega2(a, b, t) / d_of(-c, g.n());
                    r.rho1[f] = base / (w * w);
                    r.rho2[f] = base / (w * w * w);
                }
            }
        }
    return r;
}

FourierLawResult fourier_law(const Grid& g, const LinearizedBlocks& b, const ProjectedOperator& op,
                             const RhoFields& rho, cplx t_val, cplx s_val, double floor) {
    (void)g;
    const int n = b.size();
    Eigen::VectorXcd rhs(n);
    for (int i = 0; i < n; ++i) {
        const auto s = uz(b.slots[uz(i)]);
        rhs(i) = -(rho.rho1[s] * t_val + rho.rho2[s] * s_val);
    }
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    FourierLawResult out;
    out.re = solve_Dp(op, rhs.real(), zero, floor);
    out.im = solve_Dp(op, rhs.imag(), zero, floor);
    out.J = out.re.J.cast<cplx>() + kI * out.im.J.cast<cplx>();
    out.r = out.re.Q.cast<cplx>() + kI * out.im.Q.cast<cplx>();
    return out;
}

Eigen::VectorXcd local_fourier_law(const LinearizedBlocks& b, const RhoFields& rho, cplx t_val, cplx s_val) {
    const int n = b.size();
    Eigen::VectorXcd rhs(n);
    for (int i = 0; i < n; ++i) {
        const auto s = uz(b.slots[uz(i)]);
        rhs(i) = -(rho.rho1[s] * t_val + rho.rho2[s] * s_val);
    }
    const Eigen::MatrixXd O = odd_basis(b);
    if (O.cols() == 0) return Eigen::VectorXcd::Zero(n);
    const Eigen::MatrixXd R = O.transpose() * b.weight.asDiagonal() * b.L11 * O;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(R);
    const Eigen::MatrixXd OtW = O.transpose() * b.weight.asDiagonal();
    const Eigen::VectorXd re = O * cod.solve(OtW * rhs.real());
    const Eigen::VectorXd im = O * cod.solve(OtW * rhs.imag());
    return re.cast<cplx>() + kI * im.cast<cplx>();
}

Currents currents_from_J(const Grid& g, const std::vector<cplx>& J) {
    Currents cur;
    cur.j.assign(uz(g.n2()), 0.0);
    cur.j_prime.assign(uz(g.n2()), 0.0);
    for (int c = 0; c < g.n2(); ++c) {
        double rho_mean = 0.0;
        for (int a = 0; a < g.n2(); ++a)
            for (int t = 0; t < g.nt(); ++t) rho_mean += 1.0 / g.omega_pk(a, c - a, t);
        rho_mean *= g.wq();
        cplx sj = 0.0, sjp = 0.0;
        for (int a = 0; a < g.n2(); ++a) {
            const double sk = sin_k(g, a, c);
            for (int t = 0; t < g.nt(); ++t) {
                const int b = c - a;
                const cplx v = J[uz(g.fi(a, b, t))] * sk * (g.omega(a, t) + g.omega(b, t));
                const double eta = 1.0 / g.omega_pk(a, b, t) - rho_mean;
                sj += v;
                sjp += eta * v;
            }
        }
        const cplx phase = -kI * std::polar(g.wq(), -kPi * c / (2.0 * g.n()));
        cur.j[uz(c)] = phase * sj;
        cur.j_prime[uz(c)] = phase * sjp;
    }
    cur.j_x = inverse_fourier_real(cur.j);
    cur.jp_x = inverse_fourier_real(cur.j_prime);
    return cur;
}

Currents currents_from_J(const Grid& g, const std::vector<double>& J) {
    return currents_from_J(g, std::vector<cplx>(J.begin(), J.end()));
}

std::vector<cplx> transform_xspace(const Grid& g, const XKernel& G) {
    const int n2 = g.n2(), m = g.spec().m_transverse, dim = g.dim();
    // transverse displacements enumerated in the order of the t index
    std::vector<std::array<int, 3>> rs;
    const int nt = g.nt();
    for (int t = 0; t < nt; ++t) {
        std::array<int, 3> r{0, 0, 0};
        int rem = t;
        for (int ax = dim - 1; ax >= 1; --ax) {
            r[uz(ax)] = rem % m;
            rem /= m;
        }
        rs.push_back(r);
    }
    // cache G values
    std::vector<double> gv(uz(n2 * n2 * nt));
    for (int x = 0; x < n2; ++x)
        for (int y = 0; y < n2; ++y)
            for (int t = 0; t < nt; ++t) gv[uz((x * n2 + y) * nt + t)] = G(x, y, rs[uz(t)]);
    std::vector<cplx> out(uz(g.nfield()), 0.0);
    for (int a = 0; a < n2; ++a)
        for (int t = 0; t < nt; ++t) {
            const auto q = g.momentum(a, t);
            for (int b = 0; b < n2; ++b) {
                cplx s = 0.0;
                for (int rt = 0; rt < nt; ++rt) {
                    double ph_perp = 0.0;
                    for (int ax = 1; ax < dim; ++ax) ph_perp += q[uz(ax)] * rs[uz(rt)][uz(ax)];
                    for (int x = 0; x < n2; ++x)
                        for (int y = 0; y < n2; ++y) {
                            const double ph = kPi * (a * x + b * y) / g.n() + ph_perp;
                            s += std::polar(gv[uz((x * n2 + y) * nt + rt)], -ph);
                        }
                }
                out[uz(g.fi(a, b, t))] = s;
            }
        }
    return out;
}

std::vector<double> diagonal_profile(const Grid& g, const std::vector<double>& P) {
    CVec pbar(uz(g.n2()), 0.0);
    for (int c = 0; c < g.n2(); ++c) {
        double s = 0.0;
        for (int a = 0; a < g.n2(); ++a)
            for (int t = 0; t < g.nt(); ++t) s += P[uz(g.fi(a, c - a, t))];
        pbar[uz(c)] = g.wq() * s;
    }
    return inverse_fourier_real(pbar);
}

ConductivityMatrix kappa0(const LinearizedBlocks& b0) {
    if (b0.c != 0) throw std::invalid_argument("kappa0: blocks must be built at p = 0");
    ConductivityMatrix km;
    const int n = b0.size();
    Eigen::VectorXd psi1(n), psi2(n);
    for (int i = 0; i < n; ++i) {
        const double w = b0.omega_pk(i);
        const double sk = std::sin(b0.k_first(i));
        psi1(i) = 4.0 * sk / w;
        psi2(i) = 4.0 * sk / (w * w);
    }
    const Eigen::MatrixXd O = odd_basis(b0);
    const Eigen::MatrixXd R = O.transpose() * b0.weight.asDiagonal() * b0.L11 * O;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
    if (R.size() == 0 || !lu.isInvertible())
        throw std::runtime_error("kappa0: L11(0) is singular on odd functions");
    auto inv = [&](const Eigen::VectorXd& f) -> Eigen::VectorXd {
        return O * lu.solve(O.transpose() * (b0.weight.asDiagonal() * f));
    };
    const Eigen::VectorXd x1 = inv(psi1), x2 = inv(psi2);
    Eigen::Matrix2d G;
    G(0, 0) = -0.5 * weighted_dot(b0, psi1, x1);
    G(0, 1) = -0.5 * weighted_dot(b0, psi1, x2);
    G(1, 0) = -0.5 * weighted_dot(b0, psi2, x1);
    G(1, 1) = -0.5 * weighted_dot(b0, psi2, x2);

    const double wq = b0.weight(0) / (b0.omega_pk(0) * b0.omega_pk(0));
    double b0s = 0.0, i2 = 0.0;
    for (int i = 0; i < n; ++i) {
        b0s += wq / b0.omega_pk(i);
        i2 += wq / (b0.omega_pk(i) * b0.omega_pk(i));
    }
    km.beta0 = b0s;
    km.beta1 = b0s;
    km.beta2 = i2 - b0s * b0s;
    km.kappa << G(0, 0), G(0, 1), G(1, 0) - km.beta0 * G(0, 0), G(1, 1) - km.beta0 * G(0, 1);
    km.det = km.kappa.determinant();
    const Eigen::Matrix2d sym = 0.5 * (km.kappa + km.kappa.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
    km.min_sym_eigenvalue = es.eigenvalues()(0);
    km.positive_definite = km.min_sym_eigenvalue > 0.0;
    return km;
}

Eigen::Matrix2cd kappa_at(const Grid& g, const LinearizedBlocks& b, const ProjectedOperator& op,
                          const RhoFields& rho) {
    Eigen::Matrix2cd k;
    for (int col = 0; col < 2; ++col) {
        const auto fl = fourier_law(g, b, op, rho, col == 0 ? 1.0 : 0.0, col == 1 ? 1.0 : 0.0);
        std::vector<cplx> J(uz(g.nfield()), 0.0);
        for (int i = 0; i < b.size(); ++i) J[uz(b.slots[uz(i)])] = fl.J(i);
        const Currents cur = currents_from_J(g, J);
        k(0, col) = cur.j[uz(b.c)];
        k(1, col) = cur.j_prime[uz(b.c)];
    }
    return k;
}

LatticeSums lattice_sums(int n) {
    LatticeSums ls;
    double even = 0.0, odd = 0.0;
    for (int c = 1; c < 2 * n; ++c) {
        const double v = 1.0 / std::norm(d_of(c, n));
        (c % 2 == 0 ? even : odd) += v;
    }
    // 2 int dq = (1/N) sum
    ls.i_plus = even / (static_cast<double>(n) * n);
    ls.i_minus = odd / (static_cast<double>(n) * n);
    return ls;
}

ZerothOrder solve_conservation_zeroth(const LatticeSpec& spec, const ConductivityMatrix* kappa) {
    ZerothOrder z;
    const int n = spec.n, n2 = 2 * n;
    z.T_plus = 0.5 * (spec.t1 + spec.t2);
    z.T_minus = 0.5 * (spec.t1 - spec.t2);
    z.sums = lattice_sums(n);
    z.tau0 = z.T_minus / (n * z.sums.i_minus);
    z.zeta0 = 0.0;
    if (kappa) {
        const double gam = spec.gamma > 0.0 ? spec.gamma : default_gamma(n);
        Eigen::Matrix2d Bm;
        Bm << 1.0, kappa->beta1, 0.0, kappa->beta2;
        const Eigen::Matrix2d lhs = 2.0 * gam * n * z.sums.i_minus * Bm + kappa->kappa;
        const Eigen::Vector2d sol = lhs.fullPivLu().solve(Eigen::Vector2d(2.0 * gam * z.T_minus, 0.0));
        z.tau0_finite = sol(0);
        z.zeta0_finite = sol(1);
    }
    z.U_T.assign(uz(n2), 0.0);
    z.U_S.assign(uz(n2), 0.0);
    z.U_T[0] = z.T_plus * n2;
    for (int c = 1; c < n2; c += 2) {
        const double inv = 2.0 / std::norm(d_of(c, n));  // sigma_- = 2 on the odd sublattice
        z.U_T[uz(c)] = z.tau0 * inv;
        z.U_S[uz(c)] = z.zeta0 * inv;
    }
    z.T_pred = inverse_fourier_real(z.U_T);
    const auto S = inverse_fourier_real(z.U_S);
    z.A_pred.resize(uz(n2));
    for (int x = 0; x < n2; ++x) z.A_pred[uz(x)] = S[uz(x)] / z.T_pred[uz(x)];
    z.profile = profile_from_x(z.T_pred, z.A_pred);
    z.j_pred.assign(uz(n2), 0.0);
    z.jp_pred.assign(uz(n2), 0.0);
    if (kappa) {
        CVec j(uz(n2)), jp(uz(n2));
        for (int c = 0; c < n2; ++c) {
            const cplx t = z.profile.t[uz(c)], s = z.profile.s[uz(c)];
            j[uz(c)] = kappa->kappa(0, 0) * t + kappa->kappa(0, 1) * s;
            jp[uz(c)] = kappa->kappa(1, 0) * t + kappa->kappa(1, 1) * s;
        }
        z.j_pred = inverse_fourier_real(j);
        z.jp_pred = inverse_fourier_real(jp);
    }
    return z;
}

std::vector<double> friction_left(const Grid& g, const std::vector<double>& G, double gamma) {
    std::vector<double> out(G.size(), 0.0);
    const double f = gamma / g.n();
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t) {
                double s = 0.0;
                for (int j = 0; j < g.n(); ++j) s += G[uz(g.fi(a - 2 * j, b, t))];
                out[uz(g.fi(a, b, t))] = f * s;
            }
    return out;
}

std::vector<double> friction_right(const Grid& g, const std::vector<double>& G, double gamma) {
    std::vector<double> out(G.size(), 0.0);
    const double f = gamma / g.n();
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t) {
                double s = 0.0;
                for (int j = 0; j < g.n(); ++j) s += G[uz(g.fi(a, b - 2 * j, t))];
                out[uz(g.fi(a, b, t))] = f * s;
            }
    return out;
}

std::vector<double> noise_covariance(const Grid& g, double gamma, double T1, double T2) {
    std::vector<double> out(uz(g.nfield()));
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t)
                out[uz(g.fi(a, b, t))] = 2.0 * gamma * (T1 + ((a + b) % 2 == 0 ? T2 : -T2));
    return out;
}

Residuals stationary_residual(const Grid& g, const CorrelationField& w, const LatticeSpec& spec,
                              const KernelConfig& cfg, const std::vector<int>* collision_slots) {
    const std::size_t nf = uz(g.nfield());
    std::vector<double> N12(nf, 0.0), N22(nf, 0.0);
    if (spec.lambda != 0.0 && collision_slots) {
        const KernelConfig kc = physical(cfg, spec);
        // the slots are closed under k -> -k, so both n(p,k) and n(p,-k) are available
        const CollisionField cf = collision_field(g, w.Q, w.J, kc, collision_slots);
        for (int s : *collision_slots) {
            const auto su = uz(s), rk = uz(g.reflect_k(s));
            N12[rk] = cf.n1[su];
            N22[su] = cf.n2[su] + cf.n2[rk];
        }
    } else if (spec.lambda != 0.0) {
        const NFields nfld = assemble_N(g, w, physical(cfg, spec));
        N12 = nfld.N12;
        N22 = nfld.N22;
    }
    const double gam = spec.gamma;
    const auto JG = friction_right(g, w.J, gam), GJ = friction_left(g, w.J, gam);
    const auto PG = friction_right(g, w.P, gam), GP = friction_left(g, w.P, gam);
    const auto C = noise_covariance(g, gam, spec.t1, spec.t2);
    Residuals r;
    r.r1.resize(nf);
    r.r2.resize(nf);
    r.r3.resize(nf);
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t) {
                const auto s = uz(g.fi(a, b, t));
                const auto rk = uz(g.reflect_k(static_cast<int>(s)));
                const double wpk = g.omega_pk(a, b, t), dw = g.delta_omega2(a, b, t);
                r.r1[s] = wpk * wpk * w.Q[s] + 0.5 * (JG[s] - GJ[s] - N12[s] - N12[rk]) - w.P[s];
                r.r2[s] = dw * w.Q[s] + JG[s] + GJ[s] + N12[rk] - N12[s];
                r.r3[s] = dw * w.J[s] + PG[s] + GP[s] - N22[s] - C[s];
                r.scale = std::max({r.scale, std::abs(wpk * wpk * w.Q[s]), std::abs(w.P[s])});
            }
    r.n1 = max_abs(r.r1);
    r.n2 = max_abs(r.r2);
    r.n3 = max_abs(r.r3);
    return r;
}

double residual_norm(const Residuals& r) { return std::max({r.n1, r.n2, r.n3}); }

namespace {

// Jacobian of (r1, r2, r3) with respect to (Q, J, P) at the flat
// equilibrium; collision parts of r1 are dropped.
Eigen::MatrixXd frozen_jacobian(const Grid& g, const LatticeSpec& spec, const KernelConfig& cfg, double T_ref) {
    const int nf = g.nfield();
    Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(3 * nf, 3 * nf);
    const double f = spec.gamma / g.n();
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t) {
                const int s = g.fi(a, b, t);
                const double wpk = g.omega_pk(a, b, t), dw = g.delta_omega2(a, b, t);
                Jm(s, s) = wpk * wpk;            // r1 / Q
                Jm(s, 2 * nf + s) = -1.0;        // r1 / P
                Jm(nf + s, s) = dw;              // r2 / Q
                Jm(2 * nf + s, nf + s) = dw;     // r3 / J
                for (int j = 0; j < g.n(); ++j) {
                    const int left = g.fi(a - 2 * j, b, t), right = g.fi(a, b - 2 * j, t);
                    Jm(s, nf + right) += 0.5 * f;
                    Jm(s, nf + left) -= 0.5 * f;
                    Jm(nf + s, nf + right) += f;
                    Jm(nf + s, nf + left) += f;
                    Jm(2 * nf + s, 2 * nf + right) += f;
                    Jm(2 * nf + s, 2 * nf + left) += f;
                }
            }
    if (spec.lambda != 0.0) {
        const LinopConfig lc = linop_config(physical(cfg, spec));
        for (int c = 0; c < g.n2(); ++c) {
            const LinearizedBlocks bl = build_Lp(g, c, T_ref, lc);
            const int n = bl.size();
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) {
                    const int si = bl.slots[uz(i)], sk = bl.slots[uz(k)];
                    Jm(nf + si, nf + sk) += bl.L11(i, k);
                    Jm(nf + si, sk) += bl.L12(i, k);
                    Jm(2 * nf + si, nf + sk) -= bl.L21(i, k);
                    Jm(2 * nf + si, sk) -= bl.L22(i, k);
                }
        }
    }
    return Jm;
}

}  // namespace

RefineResult refine(const Grid& g, const CorrelationField& start, const LatticeSpec& spec, const KernelConfig& cfg,
                    const RefineConfig& rc) {
    RefineResult out;
    out.state = start;
    symmetrize(g, out.state);
    Residuals res = stationary_residual(g, out.state, spec, cfg);
    double rn = residual_norm(res);
    out.trace.push_back({0, rn, 0.0});
    if (rn < rc.tol) {
        out.converged = true;
        return out;
    }
    const double T_ref = rc.T_ref > 0.0 ? rc.T_ref : 0.5 * (spec.t1 + spec.t2);
    const Eigen::MatrixXd Jm = frozen_jacobian(g, spec, cfg, T_ref);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Jm);
    const int nf = g.nfield();
    int growth = 0;
    for (int it = 1; it <= rc.max_iter; ++it) {
        Eigen::VectorXd F(3 * nf);
        for (int i = 0; i < nf; ++i) {
            F(i) = res.r1[uz(i)];
            F(nf + i) = res.r2[uz(i)];
            F(2 * nf + i) = res.r3[uz(i)];
        }
        const Eigen::VectorXd dx = cod.solve(F);
        for (int i = 0; i < nf; ++i) {
            out.state.Q[uz(i)] -= rc.damping * dx(i);
            out.state.J[uz(i)] -= rc.damping * dx(nf + i);
            out.state.P[uz(i)] -= rc.damping * dx(2 * nf + i);
        }
        symmetrize(g, out.state);
        res = stationary_residual(g, out.state, spec, cfg);
        const double prev = rn;
        rn = residual_norm(res);
        out.trace.push_back({it, rn, prev > 0 ? rn / prev : 0.0});
        if (!std::isfinite(rn)) throw DivergenceError("refine: non-finite residual", out.trace);
        if (rn < rc.tol) {
            out.converged = true;
            return out;
        }
        growth = rn > prev ? growth + 1 : 0;
        if (growth >= rc.patience)
            throw DivergenceError("refine: residual grew for " + std::to_string(growth) + " iterations", out.trace);
    }
    return out;
}

ClosureState zeroth_order_state(const Grid& g, const LatticeSpec& spec, const KernelConfig& kcfg, double B) {
    ClosureState cs;
    const KernelConfig kc = physical(kcfg, spec);
    const LinopConfig lc = linop_config(kc);
    const RhoFields rho = rhs_gradient_fields(g);
    const double T_plus = 0.5 * (spec.t1 + spec.t2);

    std::vector<LinearizedBlocks> blocks;
    for (int c = 0; c < g.n2(); ++c) blocks.push_back(build_Lp(g, c, T_plus, lc));
    std::optional<ConductivityMatrix> km;
    try {
        km = kappa0(blocks[0]);
    } catch (const std::runtime_error&) {
    }
    cs.kappa = km;
    cs.zeroth = solve_conservation_zeroth(spec, km ? &*km : nullptr);
    const ProfileParams& prof = cs.zeroth.profile;
    const Q0Result q0 = build_Q0(g, prof);
    CorrelationField f(g);
    f.Q = q0.Q;
    cs.max_imag = q0.imag_residual;
    for (int c = 0; c < g.n2(); ++c) {
        const LinearizedBlocks& b = blocks[uz(c)];
        const ProjectedOperator op = build_Dp(b, B, spec.lambda);
        Eigen::VectorXcd J, r;
        if (op.in_E0) {
            const auto law = fourier_law(g, b, op, rho, prof.t[uz(c)], prof.s[uz(c)]);
            J = law.J;
            r = law.r;
            ++cs.classes_in_E0;
        } else {
            J = local_fourier_law(b, rho, prof.t[uz(c)], prof.s[uz(c)]);
            r = Eigen::VectorXcd::Zero(b.size());
        }
        for (int i = 0; i < b.size(); ++i) {
            const auto s = uz(b.slots[uz(i)]);
            f.J[s] = J(i).real();
            f.Q[s] += r(i).real();
            cs.max_imag = std::max({cs.max_imag, std::abs(J(i).imag()), std::abs(r(i).imag())});
        }
    }
    // P from the Q equation
    std::vector<double> N12(f.Q.size(), 0.0);
    if (spec.lambda != 0.0) N12 = assemble_N(g, f, kc).N12;
    const auto JG = friction_right(g, f.J, spec.gamma), GJ = friction_left(g, f.J, spec.gamma);
    for (int a = 0; a < g.n2(); ++a)
        for (int b = 0; b < g.n2(); ++b)
            for (int t = 0; t < g.nt(); ++t) {
                const auto s = uz(g.fi(a, b, t));
                const auto rk = uz(g.reflect_k(static_cast<int>(s)));
                const double wpk = g.omega_pk(a, b, t);
                f.P[s] = wpk * wpk * f.Q[s] + 0.5 * (JG[s] - GJ[s] - N12[s] - N12[rk]);
            }
    symmetrize(g, f);
    cs.field = std::move(f);
    return cs;
}

}  // namespace fl
