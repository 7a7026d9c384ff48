#include "fourierlab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace fl {

std::vector<std::string> SimConfig::validate() const {
    std::vector<std::string> e;
    if (dt < 0.0) e.emplace_back("dt: must be > 0 (or 0 for the default)");
    if (steps <= 0) e.emplace_back("steps: must be > 0");
    if (burn_in < 0 || burn_in >= steps) e.emplace_back("burn_in: must satisfy 0 <= burn_in < steps");
    if (thinning < 1) e.emplace_back("thinning: must be >= 1");
    if (batches < 2) e.emplace_back("batches: must be >= 2");
    if (!(noise_factor > 0.0)) e.emplace_back("noise_factor: must be > 0");
    if (!(blowup > 0.0)) e.emplace_back("blowup: must be > 0");
    return e;
}

double omega_max(const LatticeSpec& spec) { return spec.m2 + 4.0 * spec.dim; }

double default_dt(const LatticeSpec& spec) { return 0.01 / omega_max(spec); }

SiteLattice::SiteLattice(const LatticeSpec& spec) : spec_(spec) {
    ext_[0] = 2 * spec.n;
    for (int a = 1; a < spec.dim; ++a) ext_[static_cast<std::size_t>(a)] = spec.m_transverse;
    per_layer_ = ext_[1] * ext_[2];
    volume_ = ext_[0] * per_layer_;
}

int SiteLattice::shift(int site, const std::array<int, 3>& off) const {
    int x[3];
    x[2] = site % ext_[2];
    x[1] = (site / ext_[2]) % ext_[1];
    x[0] = site / (ext_[1] * ext_[2]);
    int idx = 0;
    for (int a = 0; a < 3; ++a) {
        const int e = ext_[static_cast<std::size_t>(a)];
        int y = (x[a] + off[static_cast<std::size_t>(a)]) % e;
        if (y < 0) y += e;
        idx = idx * e + y;
    }
    return idx;
}

namespace {

std::vector<int> neighbor_table(const SiteLattice& lat) {
    const int d = lat.spec().dim, w = 2 * d;
    std::vector<int> idx(static_cast<std::size_t>(lat.volume() * w));
    for (int s = 0; s < lat.volume(); ++s)
        for (int a = 0; a < d; ++a)
            for (int sg = 0; sg < 2; ++sg) {
                std::array<int, 3> off{0, 0, 0};
                off[static_cast<std::size_t>(a)] = sg == 0 ? 1 : -1;
                idx[static_cast<std::size_t>(s * w + 2 * a + sg)] = lat.shift(s, off);
            }
    return idx;
}

void omega_apply(const SiteLattice& lat, const std::vector<int>& nb, const std::vector<double>& q, std::vector<double>& out) {
    const int w = 2 * lat.spec().dim;
    const double diag = lat.spec().m2 + 2.0 * lat.spec().dim;
    out.resize(q.size());
    for (int s = 0; s < lat.volume(); ++s) {
        double v = diag * q[static_cast<std::size_t>(s)];
        const int* n = &nb[static_cast<std::size_t>(s * w)];
        for (int k = 0; k < w; ++k) v -= q[static_cast<std::size_t>(n[k])];
        out[static_cast<std::size_t>(s)] = v;
    }
}

void force_into(const SiteLattice& lat, const std::vector<int>& nb, const std::vector<double>& q, std::vector<double>& tmp,
                std::vector<double>& f) {
    omega_apply(lat, nb, q, tmp);
    omega_apply(lat, nb, tmp, f);
    const double lam = lat.spec().lambda;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = -f[i] - lam * q[i] * q[i] * q[i];
}

}  // namespace

void apply_omega(const SiteLattice& lat, const std::vector<double>& q, std::vector<double>& out) {
    const auto nb = neighbor_table(lat);
    omega_apply(lat, nb, q, out);
}

std::vector<double> force(const SiteLattice& lat, const std::vector<double>& q) {
    const auto nb = neighbor_table(lat);
    std::vector<double> tmp, f;
    force_into(lat, nb, q, tmp, f);
    return f;
}

double energy(const SiteLattice& lat, const PhaseState& s) {
    std::vector<double> w;
    apply_omega(lat, s.q, w);
    double e = 0.0;
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        const double q2 = s.q[i] * s.q[i];
        e += 0.5 * s.p[i] * s.p[i] + 0.5 * w[i] * w[i] + 0.25 * lat.spec().lambda * q2 * q2;
    }
    return e;
}

PhaseState harmonic_gibbs_state(const LatticeSpec& spec, double T, std::uint64_t seed) {
    if (!(T >= 0.0)) throw std::invalid_argument("harmonic_gibbs_state: T must be >= 0");
    const SiteLattice lat(spec);
    const auto nb = neighbor_table(lat);
    const std::size_t V = static_cast<std::size_t>(lat.volume());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    PhaseState s;
    s.p.resize(V);
    std::vector<double> xi(V);
    for (auto& v : s.p) v = std::sqrt(T) * nd(rng);
    for (auto& v : xi) v = std::sqrt(T) * nd(rng);
    // q = omega^-1 xi by Jacobi iteration (omega is diagonally dominant)
    const int w = 2 * spec.dim;
    const double diag = spec.m2 + 2.0 * spec.dim;
    std::vector<double> q(V, 0.0), nq(V);
    for (int it = 0; it < 10000; ++it) {
        double change = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < V; ++i) {
            double acc = xi[i];
            for (int k = 0; k < w; ++k) acc += q[static_cast<std::size_t>(nb[i * static_cast<std::size_t>(w) + static_cast<std::size_t>(k)])];
            nq[i] = acc / diag;
            change = std::max(change, std::abs(nq[i] - q[i]));
            scale = std::max(scale, std::abs(nq[i]));
        }
        q.swap(nq);
        if (change <= 1e-15 * std::max(scale, 1e-300)) break;
    }
    s.q = std::move(q);
    return s;
}

std::vector<std::array<int, 3>> stencil_offsets(int dim) {
    std::vector<std::array<int, 3>> out{{0, 0, 0}};
    const int r = 2;
    for (int a = -r; a <= r; ++a)
        for (int b = (dim > 1 ? -r : 0); b <= (dim > 1 ? r : 0); ++b)
            for (int c = (dim > 2 ? -r : 0); c <= (dim > 2 ? r : 0); ++c) {
                if (a == 0 && b == 0 && c == 0) continue;
                if (std::abs(a) + std::abs(b) + std::abs(c) <= 2) out.push_back({a, b, c});
            }
    return out;
}

void Accumulators::init(int layers_, int per_layer_, std::vector<std::array<int, 3>> offs, int batches_) {
    layers = layers_;
    per_layer = per_layer_;
    offsets = std::move(offs);
    batches = batches_;
    count.assign(static_cast<std::size_t>(batches), 0);
    p2.assign(static_cast<std::size_t>(batches * layers), 0.0);
    qp.assign(static_cast<std::size_t>(batches * layers) * offsets.size(), 0.0);
}

int Accumulators::offset_index(const std::array<int, 3>& d) const {
    for (std::size_t i = 0; i < offsets.size(); ++i)
        if (offsets[i] == d) return static_cast<int>(i);
    return -1;
}

Accumulators merge(const Accumulators& a, const Accumulators& b) {
    if (a.batches == 0) return b;
    if (b.batches == 0) return a;
    if (a.layers != b.layers || a.per_layer != b.per_layer || a.offsets != b.offsets) throw std::invalid_argument("merge: incompatible accumulators");
    Accumulators m = a;
    m.batches = a.batches + b.batches;
    m.count.insert(m.count.end(), b.count.begin(), b.count.end());
    m.p2.insert(m.p2.end(), b.p2.begin(), b.p2.end());
    m.qp.insert(m.qp.end(), b.qp.begin(), b.qp.end());
    return m;
}

Stepper::Stepper(const LatticeSpec& spec, const SimConfig& cfg)
    : spec_(spec), cfg_(cfg), lat_(spec), dt_(cfg.dt > 0.0 ? cfg.dt : default_dt(spec)), nbr_(neighbor_table(lat_)) {
    if (!(dt_ > 0.0)) throw std::invalid_argument("dt: must be > 0");
    decay_ = std::exp(-spec.gamma * dt_);
    const double v = 1.0 - decay_ * decay_;
    sd1_ = std::sqrt(0.5 * cfg.noise_factor * spec.t1 * v);
    sd2_ = std::sqrt(0.5 * cfg.noise_factor * spec.t2 * v);
}

void Stepper::step(PhaseState& s, std::mt19937_64& rng) {
    const std::size_t V = s.q.size();
    const double h = 0.5 * dt_;
    force_into(lat_, nbr_, s.q, tmp_, f_);
    for (std::size_t i = 0; i < V; ++i) s.p[i] += h * f_[i];
    for (std::size_t i = 0; i < V; ++i) s.q[i] += dt_ * s.p[i];
    force_into(lat_, nbr_, s.q, tmp_, f_);
    for (std::size_t i = 0; i < V; ++i) s.p[i] += h * f_[i];
    if (spec_.gamma > 0.0) {
        const int pl = lat_.per_layer();
        const int l2 = spec_.n * pl;
        for (int k = 0; k < pl; ++k) {
            auto& a = s.p[static_cast<std::size_t>(k)];
            a = decay_ * a + sd1_ * normal_(rng);
            auto& b = s.p[static_cast<std::size_t>(l2 + k)];
            b = decay_ * b + sd2_ * normal_(rng);
        }
    }
}

SimResult simulate(const LatticeSpec& spec, const SimConfig& cfg, const PhaseState* init) {
    const auto errs = cfg.validate();
    if (!errs.empty()) throw std::invalid_argument(errs.front());
    Stepper st(spec, cfg);
    const SiteLattice& lat = st.lattice();
    const int V = lat.volume();
    PhaseState s;
    if (init) {
        s = *init;
        if (static_cast<int>(s.q.size()) != V || static_cast<int>(s.p.size()) != V)
            throw std::invalid_argument("simulate: initial state has the wrong size");
    } else if (cfg.init_temperature > 0.0) {
        s = harmonic_gibbs_state(spec, cfg.init_temperature, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    } else {
        s.q.assign(static_cast<std::size_t>(V), 0.0);
        s.p.assign(static_cast<std::size_t>(V), 0.0);
    }
    SimResult res;
    res.dt = st.dt();
    res.energy_start = energy(lat, s);
    const auto offs = stencil_offsets(spec.dim);
    res.acc.init(lat.layers(), lat.per_layer(), offs, cfg.batches);
    std::vector<int> partner(static_cast<std::size_t>(V) * offs.size());
    for (int x = 0; x < V; ++x)
        for (std::size_t o = 0; o < offs.size(); ++o) partner[static_cast<std::size_t>(x) * offs.size() + o] = lat.shift(x, offs[o]);

    std::mt19937_64 rng(cfg.seed);
    const long total = (cfg.steps - cfg.burn_in) / cfg.thinning;
    long sample = 0;
    const int pl = lat.per_layer();
    for (long n = 1; n <= cfg.steps; ++n) {
        st.step(s, rng);
        double mx = 0.0;
        for (int i = 0; i < V; ++i)
            mx = std::max({mx, std::abs(s.q[static_cast<std::size_t>(i)]), std::abs(s.p[static_cast<std::size_t>(i)])});
        if (!(mx < cfg.blowup)) throw BlowUp("simulate: state exceeded the blow-up bound at step " + std::to_string(n));
        if (n <= cfg.burn_in || (n - cfg.burn_in) % cfg.thinning != 0 || sample >= total) continue;
        const int b = static_cast<int>(sample * cfg.batches / std::max(1L, total));
        ++sample;
        res.acc.count[static_cast<std::size_t>(b)] += 1;
        for (int x = 0; x < V; ++x) {
            const int x1 = x / pl;
            const double px = s.p[static_cast<std::size_t>(x)], qx = s.q[static_cast<std::size_t>(x)];
            res.acc.p2_at(b, x1) += px * px;
            for (std::size_t o = 0; o < offs.size(); ++o)
                res.acc.qp_at(b, x1, static_cast<int>(o)) +=
                    qx * s.p[static_cast<std::size_t>(partner[static_cast<std::size_t>(x) * offs.size() + o])];
        }
    }
    res.energy_end = energy(lat, s);
    res.final_state = std::move(s);
    return res;
}

SimResult simulate_replicas(const LatticeSpec& spec, const SimConfig& cfg, int replicas, int threads) {
    if (replicas < 1) throw std::invalid_argument("replicas: must be >= 1");
    std::vector<SimResult> out(static_cast<std::size_t>(replicas));
    std::vector<std::exception_ptr> err(static_cast<std::size_t>(replicas));
    auto run = [&](int r) {
        SimConfig c = cfg;
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(r)};
        std::uint32_t w[2];
        seq.generate(w, w + 2);
        c.seed = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
        try {
            out[static_cast<std::size_t>(r)] = simulate(spec, c);
        } catch (...) {
            err[static_cast<std::size_t>(r)] = std::current_exception();
        }
    };
    const int nt = std::max(1, std::min(threads, replicas));
    for (int base = 0; base < replicas; base += nt) {
        std::vector<std::thread> pool;
        for (int r = base; r < std::min(replicas, base + nt); ++r) pool.emplace_back(run, r);
        for (auto& t : pool) t.join();
    }
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
    SimResult m = out[0];
    for (int r = 1; r < replicas; ++r) m.acc = merge(m.acc, out[static_cast<std::size_t>(r)].acc);
    return m;
}

namespace {

LayerEstimate from_batches(const std::vector<std::vector<double>>& per_batch) {
    LayerEstimate e;
    const std::size_t B = per_batch.size();
    if (B == 0) return e;
    const std::size_t L = per_batch[0].size();
    e.mean.assign(L, 0.0);
    e.se.assign(L, 0.0);
    for (std::size_t x = 0; x < L; ++x) {
        double m = 0.0;
        for (const auto& v : per_batch) m += v[x];
        m /= static_cast<double>(B);
        double var = 0.0;
        for (const auto& v : per_batch) var += (v[x] - m) * (v[x] - m);
        var /= static_cast<double>(B > 1 ? B - 1 : 1);
        e.mean[x] = m;
        e.se[x] = std::sqrt(var / static_cast<double>(B));
    }
    return e;
}

void require_samples(const Accumulators& acc) {
    int used = 0;
    for (long c : acc.count) used += c > 0;
    if (used < 2) throw std::runtime_error("insufficient samples: need at least two non-empty batches");
}

// batch-mean H(x1; d) = <q_x p_{x+d}>, averaged over the transverse sites
double H(const Accumulators& acc, int b, int x1, int o) {
    return acc.qp_at(b, x1, o) / (static_cast<double>(acc.count[static_cast<std::size_t>(b)]) * acc.per_layer);
}

std::vector<int> used_batches(const Accumulators& acc) {
    std::vector<int> u;
    for (int b = 0; b < acc.batches; ++b)
        if (acc.count[static_cast<std::size_t>(b)] > 0) u.push_back(b);
    return u;
}

}  // namespace

LayerEstimate kinetic_profile(const Accumulators& acc) {
    require_samples(acc);
    std::vector<std::vector<double>> pb;
    for (int b : used_batches(acc)) {
        const double n = static_cast<double>(acc.count[static_cast<std::size_t>(b)]) * acc.per_layer;
        std::vector<double> v(static_cast<std::size_t>(acc.layers));
        for (int x = 0; x < acc.layers; ++x) v[static_cast<std::size_t>(x)] = acc.p2_at(b, x) / n;
        pb.push_back(std::move(v));
    }
    return from_batches(pb);
}

LayerEstimate qp_profile(const Accumulators& acc, const std::array<int, 3>& d) {
    require_samples(acc);
    const int o = acc.offset_index(d);
    if (o < 0) throw std::runtime_error("qp_profile: offset not in the accumulated stencil");
    std::vector<std::vector<double>> pb;
    for (int b : used_batches(acc)) {
        std::vector<double> v(static_cast<std::size_t>(acc.layers));
        for (int x = 0; x < acc.layers; ++x) v[static_cast<std::size_t>(x)] = H(acc, b, x, o);
        pb.push_back(std::move(v));
    }
    return from_batches(pb);
}

LayerEstimate heat_current_profile(const Accumulators& acc, const LatticeSpec& spec) {
    require_samples(acc);
    const int d = spec.dim, L = acc.layers;
    // every offset e1 +- e with e in {0, +-e_a} must be present
    auto idx = [&](std::array<int, 3> off) {
        const int o = acc.offset_index(off);
        if (o < 0) throw std::runtime_error("insufficient stencil: need all q_x p_y pairs with |x - y|_1 <= 2");
        return o;
    };
    std::vector<std::array<int, 3>> es{{0, 0, 0}};
    for (int a = 0; a < d; ++a)
        for (int sg : {1, -1}) {
            std::array<int, 3> e{0, 0, 0};
            e[static_cast<std::size_t>(a)] = sg;
            es.push_back(e);
        }
    const double diag = spec.m2 + 2.0 * d;
    auto wgt = [&](std::size_t k) { return k == 0 ? diag : -1.0; };
    auto neg = [](std::array<int, 3> v) { return std::array<int, 3>{-v[0], -v[1], -v[2]}; };
    auto add = [](std::array<int, 3> a, std::array<int, 3> b) { return std::array<int, 3>{a[0] + b[0], a[1] + b[1], a[2] + b[2]}; };
    const std::array<int, 3> e1{1, 0, 0};
    std::vector<std::vector<double>> pb;
    for (int b : used_batches(acc)) {
        // J(layer of u, v - u) = (H(u,v) - H(v,u)) / 2
        auto J = [&](int lu, const std::array<int, 3>& off) {
            const int lv = ((lu + off[0]) % L + L) % L;
            const int luw = ((lu % L) + L) % L;
            return 0.5 * (H(acc, b, luw, idx(off)) - H(acc, b, lv, idx(neg(off))));
        };
        std::vector<double> v(static_cast<std::size_t>(L));
        for (int x1 = 0; x1 < L; ++x1) {
            const int lu = x1 - 1;  // u = x - e1, v = x
            double s = 0.0;
            for (std::size_t k = 0; k < es.size(); ++k) {
                const auto& e = es[k];
                // sum_w omega(u,w) J(w,v), w = u + e
                s += wgt(k) * J(lu + e[0], add(e1, neg(e)));
                // sum_w J(u,w) omega(w,v), w = v + e
                s += wgt(k) * J(lu, add(e1, e));
            }
            v[static_cast<std::size_t>(x1)] = s;
        }
        pb.push_back(std::move(v));
    }
    return from_batches(pb);
}

BoundaryFlux boundary_flux(const Accumulators& acc, const LatticeSpec& spec, double noise_factor) {
    const double noise_scale = 0.5 * noise_factor;
    require_samples(acc);
    BoundaryFlux f;
    std::vector<std::vector<double>> pb;
    for (int b : used_batches(acc)) {
        const double c = static_cast<double>(acc.count[static_cast<std::size_t>(b)]);
        const double P0 = acc.p2_at(b, 0) / c / acc.per_layer;
        const double PN = acc.p2_at(b, spec.n) / c / acc.per_layer;
        const double f1 = spec.gamma * (noise_scale * spec.t1 - P0), f2 = spec.gamma * (noise_scale * spec.t2 - PN);
        pb.push_back({f1, f2, f1 + f2});
    }
    const auto e = from_batches(pb);
    f.flux1 = e.mean[0];
    f.flux2 = e.mean[1];
    f.sum = e.mean[2];
    f.se1 = e.se[0];
    f.se2 = e.se[1];
    f.se_sum = e.se[2];
    return f;
}

}  // namespace fl
