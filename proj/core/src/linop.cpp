#include "fourierlab/linop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fl {

namespace {

struct Raw {
    Eigen::MatrixXd q1, j1, q2, j2;  // n1 / n2 responses to Q / J, per output slot
    explicit Raw(int n)
        : q1(Eigen::MatrixXd::Zero(n, n)), j1(Eigen::MatrixXd::Zero(n, n)),
          q2(Eigen::MatrixXd::Zero(n, n)), j2(Eigen::MatrixXd::Zero(n, n)) {}
};

Eigen::MatrixXd combine(const Eigen::MatrixXd& raw, const std::vector<int>& refl, double sign) {
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (int i = 0; i < raw.rows(); ++i) out.row(i) = raw.row(i) + sign * raw.row(refl[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace

LinearizedBlocks build_Lp(const Grid& g, int c, double T0, const LinopConfig& cfg) {
    if (!(T0 > 0.0)) throw std::invalid_argument("build_Lp: T0 must be > 0");
    LinearizedBlocks b;
    b.c = g.wrap(c);
    b.p = kPi * b.c / (2.0 * g.n());
    b.T0 = T0;
    b.includes_lambda_prefactor = cfg.prefactor;
    b.lambda = cfg.lambda;
    b.slots = g.slots_at(b.c);
    const int n = b.size();

    std::vector<int> index(static_cast<std::size_t>(g.nfield()), -1);
    for (int i = 0; i < n; ++i) index[static_cast<std::size_t>(b.slots[static_cast<std::size_t>(i)])] = i;
    b.reflect.resize(static_cast<std::size_t>(n));
    b.weight.resize(n);
    b.omega_pk.resize(n);
    b.domega2.resize(n);
    b.k_first.resize(n);
    struct Abt { int a, bb, t; };
    std::vector<Abt> abt(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int s = b.slots[static_cast<std::size_t>(i)];
        const int t = s % g.nt(), ab = s / g.nt();
        abt[static_cast<std::size_t>(i)] = {ab / g.n2(), ab % g.n2(), t};
        b.reflect[static_cast<std::size_t>(i)] = index[static_cast<std::size_t>(g.reflect_k(s))];
        const auto& x = abt[static_cast<std::size_t>(i)];
        b.omega_pk(i) = g.omega_pk(x.a, x.bb, x.t);
        b.weight(i) = g.wq() * b.omega_pk(i) * b.omega_pk(i);
        b.domega2(i) = g.delta_omega2(x.a, x.bb, x.t);
        b.k_first(i) = g.k_of(x.a, x.bb);
    }

    Raw rm(n), rk(n);
    const double wpair = g.wq() * g.wq();
    const double eps = cfg.epsilon, e2 = eps * eps;
    for (int i = 0; i < n; ++i) {
        const auto [a, bb, t] = abt[static_cast<std::size_t>(i)];
        const int t4 = g.t_neg(t);
        const double w4 = g.omega(bb, t4);
        const int ri = b.reflect[static_cast<std::size_t>(i)];
        double m_q1 = 0, m_j1 = 0, m_q2 = 0, m_j2 = 0;
        for (int a1 = 0; a1 < g.n2(); ++a1)
            for (int t1 = 0; t1 < g.nt(); ++t1) {
                const double w1 = g.omega(a1, t1);
                for (int a2 = 0; a2 < g.n2(); ++a2)
                    for (int t2 = 0; t2 < g.nt(); ++t2) {
                        const double w2 = g.omega(a2, t2);
                        const int a3 = g.wrap(a - a1 - a2);
                        const int t3 = g.t_sub(g.t_sub(t, t1), t2);
                        const double w3 = g.omega(a3, t3);
                        const int j = index[static_cast<std::size_t>(g.fi(a3, bb + a1 + a2, t3))];
                        const double c0 = wpair * T0 * T0 / (w1 * w1 * w2 * w2);
                        double k_q1 = 0, k_j1 = 0, k_q2 = 0, k_j2 = 0;
                        for (int s2 = -1; s2 <= 1; s2 += 2)
                            for (int s3 = -1; s3 <= 1; s3 += 2)
                                for (int s4 = -1; s4 <= 1; s4 += 2) {
                                    const double xs = w1 + s2 * w2 + s3 * w3 + s4 * w4;
                                    const double den = 1.0 / (xs * xs + e2);
                                    const double rr = xs * den, ri_ = -eps * den;
                                    // slot-4 response (w at (p,-k))
                                    const double cm = c0 * s3 / w3;
                                    const double cmr = cm * rr, cmi = cm * ri_;
                                    m_q1 += 2.0 * cmr;
                                    m_j1 += -2.0 * s4 * cmi / w4;
                                    m_q2 += -2.0 * s4 * w4 * cmi;
                                    m_j2 += -2.0 * cmr;
                                    // slot-3 response (k3 integral)
                                    const double ck = -c0 * s3 * w3 / (w4 * w4);
                                    const double ckr = ck * rr, cki = ck * ri_;
                                    k_q1 += 2.0 * ckr;
                                    k_j1 += -2.0 * s3 * cki / w3;
                                    k_q2 += -2.0 * s4 * w4 * cki;
                                    k_j2 += -2.0 * s3 * s4 * (w4 / w3) * ckr;
                                }
                        rk.q1(i, j) += k_q1;
                        rk.j1(i, j) += k_j1;
                        rk.q2(i, j) += k_q2;
                        rk.j2(i, j) += k_j2;
                    }
            }
        rm.q1(i, ri) += m_q1;
        rm.j1(i, ri) += m_j1;
        rm.q2(i, ri) += m_q2;
        rm.j2(i, ri) += m_j2;
    }

    const double pref = cfg.orientation * (cfg.prefactor ? collision_prefactor(g.dim(), cfg.lambda) : 1.0);
    const auto& rf = b.reflect;
    b.M11 = pref * combine(rm.j1, rf, -1.0);
    b.M12 = pref * combine(rm.q1, rf, -1.0);
    b.M21 = pref * combine(rm.j2, rf, +1.0);
    b.M22 = pref * combine(rm.q2, rf, +1.0);
    b.K11 = pref * combine(rk.j1, rf, -1.0);
    b.K12 = pref * combine(rk.q1, rf, -1.0);
    b.K21 = pref * combine(rk.j2, rf, +1.0);
    b.K22 = pref * combine(rk.q2, rf, +1.0);
    b.L11 = b.M11 + b.K11;
    b.L12 = b.M12 + b.K12;
    b.L21 = b.M21 + b.K21;
    b.L22 = b.M22 + b.K22;
    return b;
}

Eigen::VectorXd collision_rows(const Grid& g, const CorrelationField& w, int c, const KernelConfig& cfg) {
    const auto slots = g.slots_at(g.wrap(c));
    const auto r = collision_field(g, w.Q, w.J, cfg, &slots);
    const int n = static_cast<int>(slots.size());
    Eigen::VectorXd out(2 * n);
    for (int i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(slots[static_cast<std::size_t>(i)]);
        const auto rs = static_cast<std::size_t>(g.reflect_k(static_cast<int>(s)));
        out(i) = r.n1[s] - r.n1[rs];
        out(n + i) = r.n2[s] + r.n2[rs];
    }
    return out;
}

double weighted_dot(const LinearizedBlocks& b, const Eigen::VectorXd& f, const Eigen::VectorXd& h) {
    return (b.weight.array() * f.array() * h.array()).sum();
}

double weighted_norm(const LinearizedBlocks& b, const Eigen::VectorXd& f) {
    return std::sqrt(weighted_dot(b, f, f));
}

Eigen::VectorXd omega_power(const LinearizedBlocks& b, double j) {
    return b.omega_pk.array().pow(-j).matrix();
}

Eigen::MatrixXd odd_basis(const LinearizedBlocks& b) {
    const int n = b.size();
    std::vector<Eigen::VectorXd> cols;
    for (int i = 0; i < n; ++i) {
        const int r = b.reflect[static_cast<std::size_t>(i)];
        if (r <= i) continue;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        v(i) = 1.0;
        v(r) = -1.0;
        cols.push_back(v / weighted_norm(b, v));
    }
    Eigen::MatrixXd B(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = cols[k];
    return B;
}

Eigen::MatrixXd even_basis(const LinearizedBlocks& b, bool remove_zero_modes) {
    const int n = b.size();
    std::vector<Eigen::VectorXd> cols;
    for (int i = 0; i < n; ++i) {
        const int r = b.reflect[static_cast<std::size_t>(i)];
        if (r < i) continue;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        v(i) = 1.0;
        v(r) = 1.0;
        cols.push_back(v / weighted_norm(b, v));
    }
    Eigen::MatrixXd E(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) E.col(static_cast<Eigen::Index>(k)) = cols[k];
    if (!remove_zero_modes) return E;
    Eigen::MatrixXd Z(n, 2);
    Z.col(0) = omega_power(b, 2.0);
    Z.col(1) = omega_power(b, 3.0);
    const Eigen::MatrixXd C = E.transpose() * b.weight.asDiagonal() * Z;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
    const Eigen::MatrixXd Qf = qr.householderQ();
    const Eigen::Index keep = E.cols() - 2;
    return E * Qf.rightCols(keep);
}

ZeroModes zero_mode_residuals(const LinearizedBlocks& b) {
    ZeroModes z;
    auto r = [&b](double j) {
        const Eigen::VectorXd v = omega_power(b, j);
        return weighted_norm(b, b.L22 * v) / weighted_norm(b, v);
    };
    z.r2 = r(2.0);
    z.r3 = r(3.0);
    z.r4 = r(4.0);
    // operator norms of L12 on even and L21 on odd functions
    const Eigen::VectorXd sw = b.weight.array().sqrt().matrix();
    const Eigen::MatrixXd E = even_basis(b, false), O = odd_basis(b);
    if (E.cols() > 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> s(sw.asDiagonal() * b.L12 * E);
        z.l12 = s.singularValues()(0);
    }
    if (O.cols() > 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> s(sw.asDiagonal() * b.L21 * O);
        z.l21 = s.singularValues()(0);
    }
    return z;
}

ProjectorSpec make_projector(const LinearizedBlocks& b) {
    ProjectorSpec ps;
    const int n = b.size();
    ps.weight = b.weight;
    ps.span.resize(n, 2);
    ps.span.col(0) = omega_power(b, 2.0);
    ps.span.col(1) = omega_power(b, 3.0);
    const Eigen::MatrixXd ZtW = ps.span.transpose() * b.weight.asDiagonal();
    const Eigen::Matrix2d G = ZtW * ps.span;
    ps.P = ps.span * G.inverse() * ZtW;
    ps.P_perp = Eigen::MatrixXd::Identity(n, n) - ps.P;
    return ps;
}

QuadForms quadratic_forms(const LinearizedBlocks& b, const std::vector<Eigen::VectorXd>& j_probes,
                          const std::vector<Eigen::VectorXd>& q_probes) {
    QuadForms out;
    const Eigen::MatrixXd O = odd_basis(b);
    const Eigen::MatrixXd E = even_basis(b, true);
    const Eigen::VectorXd& w = b.weight;
    for (const auto& j : j_probes) {
        const Eigen::VectorXd jo = O * (O.transpose() * (w.asDiagonal() * j));
        out.jl11j.push_back(weighted_dot(b, jo, b.L11 * jo));
    }
    const ProjectorSpec ps = make_projector(b);
    for (const auto& q : q_probes) {
        const Eigen::VectorXd qe = E * (E.transpose() * (w.asDiagonal() * q));
        out.ql22q.push_back(weighted_dot(b, qe, ps.P_perp * (b.L22 * (ps.P_perp * qe))));
    }
    return out;
}

MultiplierBounds multiplier_bounds(const std::vector<LinearizedBlocks>& sweep, double lambda) {
    MultiplierBounds mb;
    mb.floor = std::numeric_limits<double>::infinity();
    mb.fitted_c = std::numeric_limits<double>::infinity();
    mb.max_m11 = -std::numeric_limits<double>::infinity();
    mb.min_m22 = std::numeric_limits<double>::infinity();
    for (const auto& b : sweep) {
        const int n = b.size();
        for (int i = 0; i < n; ++i) {
            const int r = b.reflect[static_cast<std::size_t>(i)];
            // effective multipliers on odd J / even Q
            auto odd = [&](const Eigen::MatrixXd& m) { return r == i ? m(i, i) : m(i, i) - m(i, r); };
            auto even = [&](const Eigen::MatrixXd& m) { return r == i ? m(i, i) : m(i, i) + m(i, r); };
            const double m11 = odd(b.M11), m12 = even(b.M12), m21 = odd(b.M21), m22 = even(b.M22);
            const double d = b.domega2(i);
            Eigen::Matrix2d A;
            A << m11, d + m12, d + m21, m22;
            // odd functions vanish where k = -k, leaving the Q multiplier alone
            const double smin = r == i ? std::abs(m22) : Eigen::JacobiSVD<Eigen::Matrix2d>(A).singularValues()(1);
            mb.floor = std::min(mb.floor, smin);
            const double scale = lambda * lambda + std::abs(std::sin(b.p) * std::sin(b.k_first(i)));
            if (scale > 0.0) mb.fitted_c = std::min(mb.fitted_c, smin / scale);
            if (r != i) {
                mb.max_m11 = std::max(mb.max_m11, m11);
                if (m11 >= 0.0) mb.m11_negative = false;
            }
            mb.min_m22 = std::min(mb.min_m22, m22);
            if (m22 <= 0.0) mb.m22_positive = false;
        }
    }
    return mb;
}

bool in_E0(double p, double lambda, double B) {
    const double p0 = B * lambda * lambda;
    const double pm = std::fmod(std::fmod(p, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
    const double d0 = std::min(pm, 2.0 * kPi - pm);
    const double dpi = std::abs(pm - kPi);
    return d0 <= p0 + 1e-15 || dpi <= p0 + 1e-15;
}

ProjectedOperator build_Dp(const LinearizedBlocks& b, double B, double lambda) {
    ProjectedOperator op;
    const int n = b.size();
    op.p = b.p;
    op.B = B;
    op.in_E0 = in_E0(b.p, lambda, B);
    const Eigen::MatrixXd Dw = b.domega2.asDiagonal();
    Eigen::MatrixXd A(2 * n, 2 * n);
    A << b.L11, Dw + b.L12, Dw + b.L21, b.L22;
    op.weight2.resize(2 * n);
    op.weight2 << b.weight, b.weight;
    const Eigen::MatrixXd O = odd_basis(b);
    Eigen::MatrixXd Eq = even_basis(b, op.in_E0);
    if (op.in_E0) {
        const ProjectorSpec ps = make_projector(b);
        Eigen::MatrixXd Pi = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        Pi.topLeftCorner(n, n).setIdentity();
        Pi.bottomRightCorner(n, n) = ps.P_perp;
        op.D = Pi * A * Pi;
    } else {
        op.D = A;
    }
    op.basis = Eigen::MatrixXd::Zero(2 * n, O.cols() + Eq.cols());
    op.basis.topLeftCorner(n, O.cols()) = O;
    op.basis.bottomRightCorner(n, Eq.cols()) = Eq;
    op.reduced = op.basis.transpose() * op.weight2.asDiagonal() * op.D * op.basis;
    return op;
}

DpSolution solve_Dp(const ProjectedOperator& op, const Eigen::VectorXd& rhs_J, const Eigen::VectorXd& rhs_Q,
                    double floor) {
    const Eigen::Index n = rhs_J.size();
    Eigen::VectorXd rhs(2 * n);
    rhs << rhs_J, rhs_Q;
    const Eigen::VectorXd r = op.basis.transpose() * (op.weight2.asDiagonal() * rhs);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(op.reduced, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    DpSolution out;
    if (sv.size() == 0) {
        out.J = Eigen::VectorXd::Zero(n);
        out.Q = Eigen::VectorXd::Zero(n);
        return out;
    }
    out.largest_sv = sv(0);
    const double cut = floor * sv(0);
    Eigen::Index keep = sv.size();
    while (keep > 0 && sv(keep - 1) < cut) --keep;
    out.deflated = static_cast<int>(sv.size() - keep);
    out.near_singular = out.deflated > 0;
    out.smallest_sv = keep > 0 ? sv(keep - 1) : 0.0;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(op.reduced.cols());
    if (keep > 0) {
        const Eigen::VectorXd ur = svd.matrixU().leftCols(keep).transpose() * r;
        y = svd.matrixV().leftCols(keep) * (ur.array() / sv.head(keep).array()).matrix();
    }
    const double rn = r.norm();
    out.residual = rn > 0 ? (op.reduced * y - r).norm() / rn : 0.0;
    const Eigen::VectorXd x = op.basis * y;
    out.J = x.head(n);
    out.Q = x.tail(n);
    return out;
}

}  // namespace fl
