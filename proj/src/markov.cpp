#include "treegibbs/markov.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include <Eigen/Sparse>

#include "treegibbs/errors.hpp"
#include "treegibbs/numerics.hpp"

namespace treegibbs {

std::optional<std::size_t> MarkovChain::find(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
}

std::size_t MarkovChain::state(const std::string& label) const {
    auto s = find(label);
    if (!s) throw InvalidArgument("unknown chain state '" + label + "'");
    return *s;
}

std::vector<std::size_t> MarkovChain::successors(std::size_t s) const {
    std::vector<std::size_t> out;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        if (p(static_cast<Eigen::Index>(s), j) > 0) out.push_back(static_cast<std::size_t>(j));
    return out;
}

StateSet make_set(const MarkovChain& mc, const std::vector<std::size_t>& states) {
    StateSet b(mc.size(), false);
    for (auto s : states) b.at(s) = true;
    return b;
}

StateSet core_states(const MarkovChain& mc) {
    StateSet b(mc.size(), false);
    for (std::size_t s = 0; s < mc.size(); ++s) b[s] = mc.is_core(s);
    return b;
}

double MarkovReport::max() const {
    return std::max({row_residual, stationarity_residual, cylinder_residual});
}

namespace {

// Per-tail closed-form quantities on the materialized window and beyond.
struct TailMass {
    TailPattern pattern;
    double n_attach = 0;  // N(attach vertex)
    const TailShadow* up = nullptr;
    const TailShadow* down = nullptr;
    double delta = 0;
    double ratio = 0;  // mass scaling per period past the prefix

    // N(a_n) for n ≥ 0
    double vertex_order(std::size_t n) const {
        double v = n_attach;
        for (std::size_t k = 1; k <= n; ++k) {
            const auto st = pattern.at(k);
            v *= static_cast<double>(st.ie) / static_cast<double>(st.irev);
        }
        return v;
    }
    // λ([e_n]) and λ([ē_n]) given N(a_{n-1}) and N(a_n)
    std::pair<double, double> masses(std::size_t n, double n_prev, double n_here) const {
        const auto st = pattern.at(n);
        const auto xp = up->at(n), xm = down->at(n);
        const double out = xm[1] * xp[0] * std::exp(st.fe - delta) / (n_here / static_cast<double>(st.ie));
        const double in = xm[0] * xp[1] * std::exp(st.frev - delta) / (n_prev / static_cast<double>(st.irev));
        return {out, in};
    }
    // Σ_{n > d} (λ([e_n]) + λ([ē_n])), for d ≥ prefix.
    double remainder(std::size_t d) const {
        double n_prev = vertex_order(d), s = 0;
        for (std::size_t n = d + 1; n <= d + pattern.period; ++n) {
            const auto st = pattern.at(n);
            const double n_here = n_prev * static_cast<double>(st.ie) / static_cast<double>(st.irev);
            auto [a, b] = masses(n, n_prev, n_here);
            s += a + b;
            n_prev = n_here;
        }
        return s / (1.0 - ratio);
    }
    double total() const { return remainder(pattern.prefix) + head_sum(pattern.prefix); }
    double head_sum(std::size_t d) const {
        double n_prev = n_attach, s = 0;
        for (std::size_t n = 1; n <= d; ++n) {
            const auto st = pattern.at(n);
            const double n_here = n_prev * static_cast<double>(st.ie) / static_cast<double>(st.irev);
            auto [a, b] = masses(n, n_prev, n_here);
            s += a + b;
            n_prev = n_here;
        }
        return s;
    }
};

std::vector<double> core_orders(const IndexedGraph& g) {
    const OrderGrading og = propagate_orders(g);
    std::vector<double> out;
    for (const auto& r : og.vertex_order) out.push_back(r.convert_to<double>());
    return out;
}

std::vector<TailMass> tail_masses(const IndexedGraph& g, const GibbsData& gd,
                                  const std::vector<double>& vorder) {
    std::vector<TailMass> out;
    for (std::size_t t = 0; t < g.tails().size(); ++t) {
        TailMass tm;
        tm.pattern = tail_pattern(g, gd.potential, t);
        tm.n_attach = vorder[g.tails()[t].attach];
        tm.up = &gd.u_plus.tails.at(t);
        tm.down = &gd.u_minus.tails.at(t);
        tm.delta = gd.delta;
        double q = 1;
        for (std::size_t n = tm.pattern.prefix + 1; n <= tm.pattern.prefix + tm.pattern.period; ++n) {
            const auto st = tm.pattern.at(n);
            q *= static_cast<double>(st.irev) / static_cast<double>(st.ie);
        }
        tm.ratio = tm.up->lambda * tm.down->lambda * q;
        if (!(tm.ratio < 1.0))
            throw Diverges("tail " + std::to_string(t) + " carries infinite cylinder mass (period ratio " +
                           std::to_string(tm.ratio) + ")");
        out.push_back(tm);
    }
    return out;
}

// Edges from which an infinite non-backtracking path of positive multiplicity starts.
// Outward edges at the truncation depth count as live.
std::vector<bool> live_edges(const MaterializedGraph& m) {
    const IndexedGraph& h = m.graph;
    std::vector<bool> live(h.num_edges(), true);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t e = 0; e < h.num_edges(); ++e) {
            if (!live[e]) continue;
            const auto& o = m.origin[e];
            if (o.tail >= 0 && o.outward && o.depth == m.depth) continue;
            bool any = false;
            for (auto f : h.out_edges(h.edge(e).to))
                if (live[f] && edge_multiplicity(h, e, f) > 0) {
                    any = true;
                    break;
                }
            if (!any) {
                live[e] = false;
                changed = true;
            }
        }
    }
    return live;
}

double edge_order_of(const MaterializedGraph& m, std::size_t e, const std::vector<double>& core_vorder,
                     const std::vector<TailMass>& tails) {
    const Edge& ed = m.graph.edge(e);
    const auto& o = m.origin[e];
    if (o.tail < 0) return core_vorder[ed.to] / static_cast<double>(ed.index);
    const auto& tm = tails[static_cast<std::size_t>(o.tail)];
    const double nv = tm.vertex_order(o.outward ? o.depth : o.depth - 1);
    return nv / static_cast<double>(ed.index);
}

Eigen::MatrixXd sparse_free_power(const Eigen::MatrixXd& p, long k) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p.rows(), p.cols());
    for (long i = 0; i < k; ++i) r = r * p;
    return r;
}

}  // namespace

std::vector<double> cylinder_masses(const MaterializedGraph& m, const GibbsData& gd) {
    const IndexedGraph& h = m.graph;
    const auto up = gd.u_plus.on(m), um = gd.u_minus.on(m);
    const auto pot = gd.potential.on(m);
    const OrderGrading og = propagate_orders(h);
    std::vector<double> out(h.num_edges());
    for (std::size_t e = 0; e < h.num_edges(); ++e)
        out[e] = um[h.edge(e).rev] * up[e] * std::exp(pot[e] - gd.delta) / og.edge_order[e].convert_to<double>();
    return out;
}

double total_cylinder_mass(const IndexedGraph& g, const GibbsData& gd) {
    const auto vorder = core_orders(g);
    const auto tails = tail_masses(g, gd, vorder);
    double total = 0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edge(e);
        total += gd.u_minus.core[ed.rev] * gd.u_plus.core[e] * std::exp(gd.potential.core(e) - gd.delta) /
                 (vorder[ed.to] / static_cast<double>(ed.index));
    }
    for (const auto& tm : tails) total += tm.total();
    return total;
}

MarkovChain build_chain(const IndexedGraph& g, const GibbsData& gd, std::size_t min_depth) {
    const auto vorder = core_orders(g);
    const auto tails = tail_masses(g, gd, vorder);

    double total = 0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edge(e);
        total += gd.u_minus.core[ed.rev] * gd.u_plus.core[e] * std::exp(gd.potential.core(e) - gd.delta) /
                 (vorder[ed.to] / static_cast<double>(ed.index));
    }
    for (const auto& tm : tails) total += tm.total();

    std::size_t depth = 0, prefix_max = 0, period = 1;
    if (!tails.empty()) {
        for (const auto& tm : tails) {
            prefix_max = std::max(prefix_max, tm.pattern.prefix);
            period = std::lcm(period, tm.pattern.period);
        }
        // three full periodic blocks past the prefix, plus the folded edge
        depth = std::max(min_depth, prefix_max + 3 * period + 2);
        constexpr std::size_t kMaxDepth = 20000;
        auto beyond = [&](std::size_t d) {
            double r = 0;
            for (const auto& tm : tails) r += tm.remainder(d);
            return r;
        };
        while (beyond(depth) >= kTailMassCut * total) {
            if (++depth > kMaxDepth) throw ResourceLimit("tail window exceeds depth " + std::to_string(kMaxDepth));
        }
    }

    MarkovChain mc;
    mc.graph = materialize(g, depth);
    mc.depth = depth;
    mc.delta = gd.delta;
    mc.tail_prefix_max = prefix_max;
    mc.tail_period = period;
    mc.total_mass = total;
    const IndexedGraph& h = mc.graph.graph;
    const auto up = gd.u_plus.on(mc.graph), um = gd.u_minus.on(mc.graph);
    const auto pot = gd.potential.on(mc.graph);

    const auto live = live_edges(mc.graph);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        if (g.is_funnel_edge(e) || !live[e]) continue;
        if (up[e] == 0 || um[e] == 0)
            throw ZeroShadow("edge '" + g.edge(e).id + "' lies on a geodesic but has zero shadow mass");
    }

    std::vector<long> state_of(h.num_edges(), -1);
    for (std::size_t e = 0; e < h.num_edges(); ++e) {
        const double n_e = edge_order_of(mc.graph, e, vorder, tails);
        const double lam = um[h.edge(e).rev] * up[e] * std::exp(pot[e] - gd.delta) / n_e;
        if (!(lam > 0)) continue;
        state_of[e] = static_cast<long>(mc.labels.size());
        const auto& o = mc.graph.origin[e];
        mc.labels.push_back(h.edge(e).id);
        mc.edge_of.push_back(e);
        mc.tail_of.push_back(o.tail);
        mc.depth_of.push_back(o.tail < 0 ? 0 : o.depth);
        mc.outward.push_back(o.outward);
        mc.boundary.push_back(o.tail >= 0 && o.outward && o.depth == depth);
        mc.mass.push_back(lam);
        mc.edge_order.push_back(n_e);
        mc.potential.push_back(pot[e]);
        mc.u_plus.push_back(up[e]);
        mc.u_minus_rev.push_back(um[h.edge(e).rev]);
    }
    const auto n = static_cast<Eigen::Index>(mc.labels.size());
    if (n == 0) throw NoClosedGeodesic("no edge carries positive cylinder mass");
    mc.p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t e = mc.edge_of[static_cast<std::size_t>(i)];
        for (auto f : h.out_edges(h.edge(e).to)) {
            const long m = edge_multiplicity(h, e, f);
            if (m <= 0 || state_of[f] < 0) continue;
            mc.p(i, state_of[f]) += static_cast<double>(m) * std::exp(pot[f] - gd.delta) * up[f] / up[e];
        }
        if (mc.boundary[static_cast<std::size_t>(i)]) {
            // forward continuation e_D -> e_{D+1}, folded onto ē_D
            const auto& o = mc.graph.origin[e];
            const auto& tm = tails[static_cast<std::size_t>(o.tail)];
            const auto next = tm.pattern.at(depth + 1);
            const double fwd = static_cast<double>(next.irev) * std::exp(next.fe - gd.delta) *
                               tm.up->at(depth + 1)[0] / up[e];
            const long back = state_of[h.edge(e).rev];
            if (back < 0) throw NotConverged("truncation edge has no live reversal");
            mc.p(i, back) += fwd;
        }
        // rows agree with 1 to the shadow residual; exact sums keep long powers from drifting
        const double rs = mc.p.row(i).sum();
        if (rs > 0) mc.p.row(i) /= rs;
    }
    mc.window_mass = std::accumulate(mc.mass.begin(), mc.mass.end(), 0.0);
    mc.pi.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) mc.pi(i) = mc.mass[static_cast<std::size_t>(i)] / mc.window_mass;
    mc.tail_mass_beyond = (total - mc.window_mass) / total;
    if (mc.tail_mass_beyond < 0) mc.tail_mass_beyond = 0;
    return mc;
}

MarkovChain chain_from_kernel(std::vector<std::string> labels, Eigen::MatrixXd p,
                              std::optional<Eigen::VectorXd> pi) {
    const auto n = p.rows();
    if (p.cols() != n || static_cast<Eigen::Index>(labels.size()) != n)
        throw InvalidArgument("kernel shape does not match labels");
    if ((p.array() < 0).any()) throw InvalidArgument("kernel has negative entries");
    MarkovChain mc;
    mc.labels = std::move(labels);
    mc.p = std::move(p);
    mc.boundary.assign(static_cast<std::size_t>(n), false);
    if (pi) {
        mc.pi = *pi;
    } else {
        Eigen::VectorXd x = null_vector(mc.p.transpose(), Eigen::VectorXd::Ones(n));
        for (Eigen::Index i = 0; i < n; ++i)
            if (x(i) < 0 && x(i) > -1e-13) x(i) = 0;
        if ((x.array() < 0).any()) throw NoPositiveSolution("kernel has no nonnegative stationary vector");
        mc.pi = x / x.sum();
    }
    mc.mass.assign(mc.pi.data(), mc.pi.data() + n);
    mc.window_mass = 1;
    mc.total_mass = 1;
    return mc;
}

MarkovReport check_markov_property(const MarkovChain& mc, const GibbsData* gd, const IndexedGraph* g) {
    (void)g;
    MarkovReport r;
    const auto n = static_cast<Eigen::Index>(mc.size());
    for (Eigen::Index i = 0; i < n; ++i) r.row_residual = std::max(r.row_residual, std::abs(mc.p.row(i).sum() - 1.0));
    Eigen::VectorXd flow = mc.p.transpose() * mc.pi;
    r.column_residuals.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        const double d = std::abs(flow(j) - mc.pi(j));
        r.column_residuals[static_cast<std::size_t>(j)] = d;
        if (d > r.stationarity_residual) {
            r.stationarity_residual = d;
            r.worst_column = static_cast<std::size_t>(j);
        }
    }
    r.stationarity_residual = std::max(r.stationarity_residual, std::abs(mc.pi.sum() - 1.0));
    if (gd && !mc.edge_of.empty()) {
        const IndexedGraph& h = mc.graph.graph;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            const std::size_t e = mc.edge_of[sj];
            for (Eigen::Index k = 0; k < n; ++k) {
                const auto sk = static_cast<std::size_t>(k);
                const std::size_t f = mc.edge_of[sk];
                if (h.edge(f).from != h.edge(e).to) continue;
                if (mc.boundary[sj] && f == h.edge(e).rev) continue;  // folded entry
                const long m = edge_multiplicity(h, e, f);
                const double direct = mc.u_minus_rev[sj] * mc.u_plus[sk] *
                                      std::exp(mc.potential[sj] + mc.potential[sk] - 2 * gd->delta) *
                                      static_cast<double>(m) / mc.edge_order[sj] / mc.window_mass;
                r.cylinder_residual = std::max(r.cylinder_residual, std::abs(direct - mc.pi(j) * mc.p(j, k)));
            }
        }
    }
    return r;
}

PeriodicClasses periodic_classes(const MarkovChain& mc) {
    const std::size_t n = mc.size();
    PeriodicClasses pc;
    if (n == 0) return pc;
    std::vector<long> level(n, -1);
    std::deque<std::size_t> q{0};
    level[0] = 0;
    while (!q.empty()) {
        auto i = q.front();
        q.pop_front();
        for (auto j : mc.successors(i))
            if (level[j] < 0) {
                level[j] = level[i] + 1;
                q.push_back(j);
            }
    }
    // reverse reachability
    std::vector<bool> back(n, false);
    back[0] = true;
    q.push_back(0);
    while (!q.empty()) {
        auto j = q.front();
        q.pop_front();
        for (std::size_t i = 0; i < n; ++i)
            if (!back[i] && mc.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0) {
                back[i] = true;
                q.push_back(i);
            }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (level[i] < 0 || !back[i])
            throw Reducible("state '" + mc.labels[i] + "' does not communicate with '" + mc.labels[0] + "'");
    long k = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : mc.successors(i)) k = std::gcd(k, std::abs(level[i] + 1 - level[j]));
    if (k == 0) k = 1;
    pc.k = k;
    pc.class_of.resize(n);
    pc.classes.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        pc.class_of[i] = static_cast<int>(level[i] % k);
        pc.classes[static_cast<std::size_t>(pc.class_of[i])].push_back(i);
    }
    const Eigen::MatrixXd pk = sparse_free_power(mc.p, k);
    for (const auto& cls : pc.classes) {
        const auto m = static_cast<Eigen::Index>(cls.size());
        Eigen::MatrixXd sub(m, m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b)
                sub(a, b) = pk(static_cast<Eigen::Index>(cls[static_cast<std::size_t>(a)]),
                               static_cast<Eigen::Index>(cls[static_cast<std::size_t>(b)]));
        pc.kstep.push_back(std::move(sub));
    }
    return pc;
}

namespace {

std::vector<Eigen::VectorXd> restricted_column(const MarkovChain& mc, const StateSet& forbidden, std::size_t j,
                                               std::size_t n_max, bool first_passage) {
    const auto n = static_cast<Eigen::Index>(mc.size());
    if (j >= mc.size()) throw InvalidArgument("state index out of range");
    if (forbidden.size() != mc.size()) throw InvalidArgument("state set size does not match the chain");
    std::vector<Eigen::VectorXd> out;
    Eigen::VectorXd h0 = Eigen::VectorXd::Zero(n);
    if (!first_passage) h0(static_cast<Eigen::Index>(j)) = 1.0;
    out.push_back(h0);
    if (n_max == 0) return out;
    const Eigen::SparseMatrix<double> sp = mc.p.sparseView();
    Eigen::VectorXd h = mc.p.col(static_cast<Eigen::Index>(j));
    out.push_back(h);
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (forbidden[static_cast<std::size_t>(i)] || (first_passage && i == static_cast<Eigen::Index>(j)))
            mask(i) = 0;
    for (std::size_t step = 2; step <= n_max; ++step) {
        h = sp * h.cwiseProduct(mask);
        out.push_back(h);
    }
    return out;
}

}  // namespace

std::vector<Eigen::VectorXd> taboo_column(const MarkovChain& mc, const StateSet& b, std::size_t j,
                                          std::size_t n_max) {
    return restricted_column(mc, b, j, n_max, false);
}

std::vector<Eigen::VectorXd> first_passage_column(const MarkovChain& mc, const StateSet& b, std::size_t j,
                                                  std::size_t n_max) {
    return restricted_column(mc, b, j, n_max, true);
}

TabooTable taboo_probability(const MarkovChain& mc, const StateSet& b, std::size_t i, std::size_t j,
                             std::size_t n_max) {
    TabooTable t{b, n_max, i, j, {}, {}};
    for (const auto& col : taboo_column(mc, b, j, n_max)) t.p.push_back(col(static_cast<Eigen::Index>(i)));
    return t;
}

TabooTable first_passage(const MarkovChain& mc, const StateSet& b, std::size_t i, std::size_t j,
                         std::size_t n_max) {
    TabooTable t = taboo_probability(mc, b, i, j, n_max);
    for (const auto& col : first_passage_column(mc, b, j, n_max)) t.f.push_back(col(static_cast<Eigen::Index>(i)));
    return t;
}

ConvolutionCheck convolution_check(const MarkovChain& mc, const StateSet& b, std::size_t n_max) {
    ConvolutionCheck c;
    const std::size_t n = mc.size();
    std::vector<std::vector<Eigen::VectorXd>> pcol(n), fcol(n);
    for (std::size_t j = 0; j < n; ++j) {
        pcol[j] = taboo_column(mc, b, j, n_max);
        fcol[j] = first_passage_column(mc, b, j, n_max);
    }
    auto P = [&](std::size_t i, std::size_t j, std::size_t m) { return pcol[j][m](static_cast<Eigen::Index>(i)); };
    auto F = [&](std::size_t i, std::size_t j, std::size_t m) { return fcol[j][m](static_cast<Eigen::Index>(i)); };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t m = 1; m <= n_max; ++m) {
                ++c.checked;
                if (!b[j]) {
                    double s = 0;
                    for (std::size_t r = 1; r <= m; ++r) s += F(i, j, r) * P(j, j, m - r);
                    c.first_passage_residual = std::max(c.first_passage_residual, std::abs(P(i, j, m) - s));
                } else {
                    // j ∈ B cannot be visited in between: taboo and first passage coincide
                    c.first_passage_residual = std::max(c.first_passage_residual, std::abs(P(i, j, m) - F(i, j, m)));
                }
                if (!b[i]) {
                    double s = 0;
                    for (std::size_t r = 1; r <= m; ++r) s += F(i, i, r) * P(i, j, m - r);
                    const double d = std::abs(P(i, j, m) - s);
                    if (i == j)
                        c.diagonal_residual = std::max(c.diagonal_residual, d);
                    else
                        c.literal_offdiag_residual = std::max(c.literal_offdiag_residual, d);
                }
            }
    return c;
}

ReturnTime mean_return_time(const MarkovChain& mc, std::size_t j, std::size_t n_max,
                            std::optional<std::pair<double, double>> geometric) {
    ReturnTime rt;
    rt.pi = mc.pi(static_cast<Eigen::Index>(j));
    const StateSet none(mc.size(), false);
    const auto f = first_passage_column(mc, none, j, n_max);
    double last = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const double v = f[n](static_cast<Eigen::Index>(j));
        rt.mass += v;
        rt.mean += static_cast<double>(n) * v;
        last = v;
    }
    if (geometric) {
        const auto [rho, c] = *geometric;
        const double nn = static_cast<double>(n_max);
        // Σ_{n > N} n c ρ^n
        rt.tail_bound = c * std::pow(rho, nn + 1) * ((nn + 1) - nn * rho) / ((1 - rho) * (1 - rho));
        rt.resolved = true;
    } else {
        rt.resolved = 1.0 - rt.mass < 1e-12;
        if (rt.resolved) rt.tail_bound = 1e-12 * static_cast<double>(n_max);
    }
    rt.defective = rt.mass < 1.0 - 1e-9 && last < 1e-15;
    return rt;
}

MixingFit mixing_rate_estimate(const MarkovChain& mc, std::size_t i, std::size_t j, std::size_t n_max) {
    const PeriodicClasses pc = periodic_classes(mc);
    if (pc.class_of.at(i) != pc.class_of.at(j))
        throw InvalidArgument("states '" + mc.labels[i] + "' and '" + mc.labels[j] + "' lie in different classes");
    const auto& cls = pc.classes[static_cast<std::size_t>(pc.class_of[i])];
    const Eigen::MatrixXd& q = pc.kstep[static_cast<std::size_t>(pc.class_of[i])];
    const auto pos = [&](std::size_t s) {
        return static_cast<Eigen::Index>(std::find(cls.begin(), cls.end(), s) - cls.begin());
    };
    double class_mass = 0;
    for (auto s : cls) class_mass += mc.pi(static_cast<Eigen::Index>(s));
    MixingFit fit;
    fit.period = pc.k;
    fit.pi_class = mc.pi(static_cast<Eigen::Index>(j)) / class_mass;
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(q.rows());
    x(pos(i)) = 1.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double v = x(pos(j));
        fit.p.push_back(v);
        fit.diff.push_back(std::abs(v - fit.pi_class));
        x = x * q;
    }
    const auto mod = eigen_moduli(q);
    fit.second_modulus = mod.size() > 1 ? mod[1] : 0.0;
    if (std::all_of(fit.diff.begin() + 1, fit.diff.end(), [](double d) { return d < kExactCut; }))
        throw AlreadyExact("k-step chain reaches stationarity at n=1");
    // Fit the tail supremum sup_{m>=n} |p - pi|: complex subdominant eigenvalues make the raw
    // differences oscillate, while the bound being estimated is on the decay envelope.
    // The range ends where the raw difference first reaches the rounding floor.
    auto collect = [&](std::size_t start, std::vector<double>& xs, std::vector<double>& ys) {
        xs.clear();
        ys.clear();
        std::size_t cut = start;
        while (cut <= n_max && fit.diff[cut] > kMixingFloor) ++cut;
        fit.sup_tail.assign(fit.diff.size(), 0.0);
        double run = 0;
        for (std::size_t n = cut; n-- > start;) fit.sup_tail[n] = run = std::max(run, fit.diff[n]);
        for (std::size_t n = start; n < cut; ++n) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::log(fit.sup_tail[n]));
        }
    };
    std::vector<double> xs, ys;
    collect(kMixingSkip + 1, xs, ys);
    if (xs.size() < 3) collect(1, xs, ys);
    if (xs.size() < 2) throw NotConverged("too few points above the numerical floor to fit a rate");
    const LineFit lf = fit_line(xs, ys);
    fit.theta = std::exp(lf.slope);
    fit.c = std::exp(lf.intercept);
    fit.r2 = lf.r2;
    fit.first_n = static_cast<std::size_t>(xs.front());
    fit.last_n = static_cast<std::size_t>(xs.back());
    fit.c_env = fit.c;
    for (std::size_t n = 0; n <= fit.last_n; ++n)
        fit.c_env = std::max(fit.c_env, fit.diff[n] / std::pow(fit.theta, static_cast<double>(n)));
    return fit;
}

double word_mass(const MarkovChain& mc, const std::vector<std::size_t>& w) {
    if (w.empty()) return 1.0;
    double m = mc.pi(static_cast<Eigen::Index>(w.at(0)));
    for (std::size_t t = 1; t < w.size(); ++t) {
        const double p = mc.p(static_cast<Eigen::Index>(w[t - 1]), static_cast<Eigen::Index>(w.at(t)));
        if (!(p > 0))
            throw InvalidArgument("inadmissible word: '" + mc.labels[w[t - 1]] + "' -> '" + mc.labels[w[t]] + "'");
        m *= p;
    }
    return m;
}

CovarianceSeries correlation_decay(const MarkovChain& mc, const std::vector<std::size_t>& a,
                                   const std::vector<std::size_t>& b, std::size_t n_max, const MixingFit* fit) {
    CovarianceSeries cs;
    cs.lambda_a = word_mass(mc, a);
    cs.lambda_b = word_mass(mc, b);
    const std::size_t k = a.size();
    if (a.empty() || b.empty()) {
        for (std::size_t n = k; n <= n_max; ++n) {
            cs.n.push_back(n);
            cs.cov.push_back(0.0);
            cs.envelope.push_back(0.0);
        }
        return cs;
    }
    const PeriodicClasses pc = periodic_classes(mc);
    const auto kk = static_cast<std::size_t>(pc.k);
    const std::size_t from = a.back(), to = b.front();
    const double pib = mc.pi(static_cast<Eigen::Index>(to));
    // class-conditioned stationary value: each cyclic class carries mass 1/k
    const double target = pib * static_cast<double>(pc.k);
    double c_env = 0, theta = 0;
    if (fit) {
        theta = fit->theta;
        c_env = fit->c_env;
    }
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(mc.size()));
    x(static_cast<Eigen::Index>(from)) = 1.0;
    std::size_t steps = 0;
    for (std::size_t n = k; n <= n_max; ++n) {
        const std::size_t want = n - k + 1;
        while (steps < want) {
            x = x * mc.p;
            ++steps;
        }
        const int cls_from = pc.class_of[from], cls_to = pc.class_of[to];
        if ((static_cast<std::size_t>(cls_from) + steps) % kk != static_cast<std::size_t>(cls_to)) continue;
        cs.n.push_back(n);
        cs.cov.push_back(cs.lambda_a * (x(static_cast<Eigen::Index>(to)) - target) * cs.lambda_b / pib);
        const double m = static_cast<double>(steps / kk);
        cs.envelope.push_back(fit ? cs.lambda_a * cs.lambda_b / pib * c_env * std::pow(theta, m)
                                  : std::numeric_limits<double>::quiet_NaN());
    }
    return cs;
}

namespace {

std::vector<double> counterexample_betas(const CounterexampleSpec& spec, long truncation) {
    if (truncation < 0) throw InvalidArgument("truncation must be nonnegative");
    std::vector<double> beta;
    double sum = 0;
    for (long s = -truncation; s <= truncation; ++s) {
        const double b = spec.beta(s);
        const double g = spec.gamma(s);
        if (!(b >= 0) || !std::isfinite(b)) throw InvalidArgument("beta_" + std::to_string(s) + " is not a weight");
        if (!(g >= 0 && g < 1)) throw InvalidArgument("gamma_" + std::to_string(s) + " is outside [0,1)");
        beta.push_back(b);
        sum += b;
    }
    if (!(sum > 0)) throw InvalidArgument("beta has zero total weight");
    for (auto& b : beta) b /= sum;
    return beta;
}

}  // namespace

MarkovChain counterexample_chain(const CounterexampleSpec& spec, long truncation) {
    const auto beta = counterexample_betas(spec, truncation);
    const auto m = static_cast<Eigen::Index>(beta.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m + 1, m + 1);
    std::vector<std::string> labels;
    Eigen::VectorXd pi(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        const long s = static_cast<long>(i) - truncation;
        const double g = spec.gamma(s);
        labels.push_back("n" + std::to_string(s));
        p(i, i) = g;
        p(i, m) = 1.0 - g;
        p(m, i) = beta[static_cast<std::size_t>(i)];
        pi(i) = beta[static_cast<std::size_t>(i)] / (1.0 - g);
    }
    labels.push_back("inf");
    pi(m) = 1.0;
    pi /= pi.sum();
    return chain_from_kernel(std::move(labels), std::move(p), pi);
}

double counterexample_mean_return(const CounterexampleSpec& spec, long truncation) {
    const auto beta = counterexample_betas(spec, truncation);
    double mean = 0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        const long s = static_cast<long>(i) - truncation;
        mean += beta[i] * (1.0 / (1.0 - spec.gamma(s)) + 1.0);
    }
    return mean;
}

}  // namespace treegibbs
