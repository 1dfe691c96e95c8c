#include "treegibbs/counting.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include <Eigen/Dense>

#include "treegibbs/errors.hpp"
#include "treegibbs/markov.hpp"
#include "treegibbs/numerics.hpp"

namespace treegibbs {

BiregularParams biregular_params(const IndexedGraph& g, std::size_t base) {
    if (g.has_tails()) throw InvalidArgument("biregular parameters need a tail-free quotient");
    const std::size_t nv = g.num_vertices();
    std::vector<int> side(nv, -1);
    side.at(base) = 0;
    std::vector<std::size_t> stack{base};
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (auto e : g.out_edges(v)) {
            auto w = g.edge(e).to;
            if (side[w] < 0) {
                side[w] = 1 - side[v];
                stack.push_back(w);
            } else if (side[w] == side[v]) {
                // odd cycle: regular covers still qualify
                side.assign(nv, 0);
                stack.clear();
                break;
            }
        }
    }
    long deg[2] = {-1, -1};
    for (std::size_t v = 0; v < nv; ++v) {
        const long d = lift_degree(g, v);
        long& slot = deg[side[v] < 0 ? 0 : side[v]];
        if (slot < 0) slot = d;
        if (slot != d) throw InvalidArgument("cover is not biregular at vertex '" + g.vertex_name(v) + "'");
    }
    if (deg[1] < 0) deg[1] = deg[0];
    if (deg[0] < 3 || deg[1] < 3) throw InvalidArgument("biregular parameters need degrees at least 3");
    return BiregularParams{deg[0] - 1, deg[1] - 1};
}

Integer sphere_size(const BiregularParams& p, std::size_t j) {
    if (j == 0) return 1;
    // (qd+1)·qd^{j-1}·qdp^{j}
    Integer r = p.qd + 1;
    for (std::size_t k = 0; k + 1 < j; ++k) r *= p.qd;
    for (std::size_t k = 0; k < j; ++k) r *= p.qdp;
    return r;
}

double mgamma_ball_measure(const BiregularParams& p, double delta, std::size_t r, double m_mass) {
    if (!(delta > 0) || !(m_mass > 0)) throw InvalidArgument("ball measure needs delta > 0 and m_mass > 0");
    const double e2 = std::exp(2 * delta);
    const double geo = e2 * (std::exp(2 * delta * static_cast<double>(r)) - 1.0) / (e2 - 1.0);
    return (1.0 + static_cast<double>(p.qd + 1) / static_cast<double>(p.qd) * geo) / m_mass;
}

OrbitCounts orbit_oracle(const IndexedGraph& g, const Potential& f, std::size_t base, std::size_t n_max,
                         const std::vector<std::size_t>& first_path) {
    if (n_max > kOracleMaxLength) throw ResourceLimit("orbit oracle length exceeds " + std::to_string(kOracleMaxLength));
    if (base >= g.num_vertices()) throw InvalidArgument("unknown base vertex");
    OrbitCounts oc;
    oc.graph = materialize(g, g.has_tails() ? n_max + 1 : 0);
    oc.base = base;
    const IndexedGraph& h = oc.graph.graph;
    const auto pot = f.on(oc.graph);
    const Rational n_base = propagate_orders(g).vertex_order[base];
    oc.exact = f.is_zero();
    const std::size_t ne = h.num_edges();

    // continuation lists with multiplicities
    std::vector<std::vector<std::pair<std::size_t, long>>> next(ne);
    for (std::size_t e = 0; e < ne; ++e)
        for (auto x : h.out_edges(h.edge(e).to)) {
            const long m = edge_multiplicity(h, e, x);
            if (m > 0) next[e].push_back({x, m});
        }

    std::vector<Integer> cnt(ne, 0);
    std::vector<double> wt(ne, 0.0);
    std::size_t start = 1;
    if (first_path.empty()) {
        for (auto e : h.out_edges(base)) {
            cnt[e] = h.edge(h.edge(e).rev).index;
            wt[e] = static_cast<double>(h.edge(h.edge(e).rev).index) * std::exp(pot[e]);
        }
    } else {
        std::size_t at = base;
        Integer c = 0;
        double w = 0;
        for (std::size_t t = 0; t < first_path.size(); ++t) {
            const std::size_t e = first_path[t];
            if (e >= g.num_edges() || h.edge(e).from != at) throw InvalidArgument("first path is not composable from the base");
            if (t == 0) {
                c = h.edge(h.edge(e).rev).index;
                w = static_cast<double>(h.edge(h.edge(e).rev).index) * std::exp(pot[e]);
            } else {
                const long m = edge_multiplicity(h, first_path[t - 1], e);
                if (m == 0) throw InvalidArgument("first path has zero multiplicity");
                c *= m;
                w *= static_cast<double>(m) * std::exp(pot[e]);
            }
            at = h.edge(e).to;
        }
        start = first_path.size();
        cnt[first_path.back()] = c;
        wt[first_path.back()] = w;
    }

    oc.lifts.assign(n_max + 1, std::vector<Integer>(h.num_vertices(), 0));
    oc.sphere.assign(n_max + 1, 0.0);
    if (oc.exact) oc.exact_sphere.assign(n_max + 1, Rational(0));
    if (first_path.empty()) {
        oc.lifts[0][base] = 1;
        oc.sphere[0] = n_base.convert_to<double>();
        if (oc.exact) oc.exact_sphere[0] = n_base;
    }
    for (std::size_t n = start; n <= n_max; ++n) {
        Integer at_base = 0;
        double w_base = 0;
        for (std::size_t e = 0; e < ne; ++e) {
            if (cnt[e] == 0 && wt[e] == 0) continue;
            oc.lifts[n][h.edge(e).to] += cnt[e];
            if (h.edge(e).to == base) {
                at_base += cnt[e];
                w_base += wt[e];
            }
        }
        oc.sphere[n] = n_base.convert_to<double>() * w_base;
        if (oc.exact) oc.exact_sphere[n] = n_base * Rational(at_base);
        if (n == n_max) break;
        std::vector<Integer> c2(ne, 0);
        std::vector<double> w2(ne, 0.0);
        for (std::size_t e = 0; e < ne; ++e) {
            if (cnt[e] == 0 && wt[e] == 0) continue;
            for (auto [x, m] : next[e]) {
                c2[x] += cnt[e] * m;
                w2[x] += wt[e] * static_cast<double>(m) * std::exp(pot[x]);
            }
        }
        cnt.swap(c2);
        wt.swap(w2);
    }
    oc.cumulative.resize(n_max + 1);
    std::partial_sum(oc.sphere.begin(), oc.sphere.end(), oc.cumulative.begin());
    if (oc.exact) {
        oc.exact_cumulative.resize(n_max + 1);
        Rational acc = 0;
        for (std::size_t n = 0; n <= n_max; ++n) oc.exact_cumulative[n] = acc += oc.exact_sphere[n];
    }
    return oc;
}

std::vector<double> orbit_weights(const IndexedGraph& g, const Potential& f, std::size_t base, std::size_t n_max) {
    return orbit_oracle(g, f, base, n_max).sphere;
}

double shadow_measure(const GibbsData& gd, const IndexedGraph& g, std::size_t base,
                      const std::vector<std::size_t>& edge_path) {
    if (edge_path.empty()) return 1.0;
    std::size_t at = base;
    double mult = 0, pot = 0;
    for (std::size_t t = 0; t < edge_path.size(); ++t) {
        const std::size_t e = edge_path[t];
        if (e >= g.num_edges() || g.edge(e).from != at) throw InvalidArgument("path is not composable from the base");
        // one lift of the first edge; later steps count every continuation
        const double m = t == 0 ? 1.0 : static_cast<double>(edge_multiplicity(g, edge_path[t - 1], e));
        if (m == 0) throw InvalidArgument("path has zero multiplicity at step " + std::to_string(t));
        mult = t == 0 ? m : mult * m;
        pot += gd.potential.core(e) - gd.delta;
        at = g.edge(e).to;
    }
    return mult * std::exp(pot) * gd.u_plus.core.at(edge_path.back());
}

MainTerms main_term(const BiregularParams& p, const GibbsData& gd, const Rational& base_order, double m_mass,
                    std::size_t n, double omega_mass) {
    if (!(m_mass > 0)) throw InvalidArgument("m_mass must be positive");
    const double e2 = std::exp(2 * gd.delta);
    const double nx = base_order.convert_to<double>();
    const double qd = static_cast<double>(p.qd);
    MainTerms mt;
    mt.const57 = e2 * (qd + 1) * nx / (qd * (e2 - 1) * m_mass) * omega_mass;
    mt.const58 = e2 * nx / ((e2 - 1) * m_mass);  // ‖ν⁻‖ = ‖ν⁺‖ = 1
    const double grow = std::exp(2 * gd.delta * static_cast<double>(n));
    mt.main57 = mt.const57 * (grow - 1.0);
    mt.main58 = mt.const58 * grow;
    return mt;
}

namespace {

using RMat = std::vector<std::vector<Rational>>;

RMat rmul(const RMat& a, const RMat& b) {
    const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
    RMat c(n, std::vector<Rational>(m, Rational(0)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            if (a[i][t] == 0) continue;
            for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][t] * b[t][j];
        }
    return c;
}

RMat transpose(const RMat& a) {
    if (a.empty()) return {};
    RMat t(a[0].size(), std::vector<Rational>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
    return t;
}

// Basis of {x : a x = 0} as columns.
RMat nullspace(RMat a) {
    const std::size_t n = a.size(), m = a.empty() ? 0 : a[0].size();
    std::vector<long> pivot_col;
    std::size_t row = 0;
    for (std::size_t col = 0; col < m && row < n; ++col) {
        std::size_t piv = row;
        while (piv < n && a[piv][col] == 0) ++piv;
        if (piv == n) continue;
        std::swap(a[piv], a[row]);
        const Rational inv = Rational(1) / a[row][col];
        for (auto& x : a[row]) x *= inv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == row || a[r][col] == 0) continue;
            const Rational fct = a[r][col];
            for (std::size_t c = 0; c < m; ++c) a[r][c] -= fct * a[row][c];
        }
        pivot_col.push_back(static_cast<long>(col));
        ++row;
    }
    std::vector<bool> is_pivot(m, false);
    for (auto c : pivot_col) is_pivot[static_cast<std::size_t>(c)] = true;
    RMat basis(m);
    for (std::size_t free = 0; free < m; ++free) {
        if (is_pivot[free]) continue;
        std::vector<Rational> v(m, Rational(0));
        v[free] = 1;
        for (std::size_t r = 0; r < pivot_col.size(); ++r) v[static_cast<std::size_t>(pivot_col[r])] = -a[r][free];
        for (std::size_t i = 0; i < m; ++i) basis[i].push_back(v[i]);
    }
    return basis;
}

RMat inverse(RMat a) {
    const std::size_t n = a.size();
    RMat inv(n, std::vector<Rational>(n, Rational(0)));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && a[piv][col] == 0) ++piv;
        if (piv == n) throw NotConverged("singular rational matrix");
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        const Rational s = Rational(1) / a[col][col];
        for (std::size_t c = 0; c < n; ++c) {
            a[col][c] *= s;
            inv[col][c] *= s;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0) continue;
            const Rational fct = a[r][col];
            for (std::size_t c = 0; c < n; ++c) {
                a[r][c] -= fct * a[col][c];
                inv[r][c] -= fct * inv[col][c];
            }
        }
    }
    return inv;
}

struct CountingData {
    std::vector<std::vector<long>> mult;  // m(e,f)
    std::vector<long> first;              // i(ē) on edges leaving the base, else 0
    std::vector<bool> ends_at_base;
};

CountingData counting_data(const IndexedGraph& g, std::size_t base) {
    const std::size_t ne = g.num_edges();
    CountingData cd;
    cd.mult.assign(ne, std::vector<long>(ne, 0));
    cd.first.assign(ne, 0);
    cd.ends_at_base.assign(ne, false);
    for (std::size_t e = 0; e < ne; ++e) {
        for (auto x : g.out_edges(g.edge(e).to)) cd.mult[e][x] = edge_multiplicity(g, e, x);
        if (g.edge(e).from == base) cd.first[e] = g.edge(g.edge(e).rev).index;
        cd.ends_at_base[e] = g.edge(e).to == base;
    }
    return cd;
}

}  // namespace

RenewalConstant renewal_constant(const IndexedGraph& g, const Potential& f, std::size_t base, double delta,
                                 bool exact) {
    if (g.has_tails()) {
        // extrapolation from the oracle sequence
        RenewalConstant rc;
        rc.method = "extrapolation";
        const std::size_t n_hi = 60;
        const auto oc = orbit_oracle(g, f, base, 2 * n_hi);
        double prev = 0, cur = 0;
        for (std::size_t n = n_hi - 1; n <= n_hi; ++n) {
            prev = cur;
            cur = oc.cumulative[2 * n] * std::exp(-2.0 * delta * static_cast<double>(n));
        }
        if (!(std::abs(cur - prev) <= 1e-6 * std::abs(cur)))
            throw NotConverged("renewal constant extrapolation did not settle");
        rc.value = cur;
        return rc;
    }
    const long k = length_spectrum_period(g);
    if (k != 1 && k != 2)
        throw InvalidArgument("even-radius counts have no limit when the length period is " + std::to_string(k));
    const Rational n_base = propagate_orders(g).vertex_order.at(base);
    const auto cd = counting_data(g, base);
    const std::size_t ne = g.num_edges();
    RenewalConstant rc;
    if (exact) {
        if (!f.is_zero()) throw InvalidArgument("exact renewal constant needs a zero potential");
        RMat m(ne, std::vector<Rational>(ne));
        for (std::size_t i = 0; i < ne; ++i)
            for (std::size_t j = 0; j < ne; ++j) m[i][j] = cd.mult[i][j];
        const RMat m2 = rmul(m, m);
        const Rational lam(static_cast<long long>(std::llround(std::exp(2 * delta))));
        RMat shifted = m2;
        for (std::size_t i = 0; i < ne; ++i) shifted[i][i] -= lam;
        const RMat right = nullspace(shifted);
        const RMat left = nullspace(transpose(shifted));
        if (right.empty() || right[0].empty())
            throw NotConverged("e^{2δ} is not an integer eigenvalue; exact mode unavailable");
        const RMat proj = rmul(rmul(right, inverse(rmul(transpose(left), right))), transpose(left));
        std::vector<Rational> w(ne, Rational(0));  // (I + M) 1_b
        for (std::size_t i = 0; i < ne; ++i) {
            if (cd.ends_at_base[i]) w[i] += 1;
            for (std::size_t j = 0; j < ne; ++j)
                if (cd.ends_at_base[j]) w[i] += m[i][j];
        }
        Rational acc = 0;
        for (std::size_t i = 0; i < ne; ++i) {
            if (cd.first[i] == 0) continue;
            for (std::size_t j = 0; j < ne; ++j) acc += Rational(cd.first[i]) * proj[i][j] * w[j];
        }
        const Rational cstar = n_base * acc / (lam - 1);
        rc.exact = cstar;
        rc.lambda = lam;
        rc.value = cstar.convert_to<double>();
        rc.method = "rational spectral projector";
        return rc;
    }
    const auto n = static_cast<Eigen::Index>(ne);
    Eigen::MatrixXd m(n, n);
    Eigen::VectorXd v1 = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = static_cast<double>(cd.mult[si][static_cast<std::size_t>(j)]) * std::exp(f.core(static_cast<std::size_t>(j)));
        v1(i) = static_cast<double>(cd.first[si]) * std::exp(f.core(si));
        b(i) = cd.ends_at_base[si] ? 1.0 : 0.0;
    }
    const double lam = std::exp(2 * delta);
    const Eigen::MatrixXd m2 = m * m;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m2);
    const Eigen::MatrixXcd v = es.eigenvectors();
    const Eigen::MatrixXcd vinv = v.inverse();
    Eigen::MatrixXcd sel = Eigen::MatrixXcd::Zero(n, n);
    int hits = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(es.eigenvalues()(i) - std::complex<double>(lam, 0)) < 1e-7 * lam) {
            sel(i, i) = 1;
            ++hits;
        }
    if (hits == 0) throw NotConverged("e^{2δ} is not an eigenvalue of the two-step counting matrix");
    const Eigen::MatrixXcd proj = v * sel * vinv;
    const Eigen::VectorXd w = b + m * b;
    const std::complex<double> acc = v1.cast<std::complex<double>>().dot(proj * w.cast<std::complex<double>>());
    rc.value = n_base.convert_to<double>() * acc.real() / (lam - 1.0);
    rc.method = "spectral projector";
    return rc;
}

std::vector<BoundaryRow> boundary_ratio(const IndexedGraph& g, std::size_t base, VertexFamily family,
                                        const std::vector<std::size_t>& radii, double beta) {
    std::vector<BoundaryRow> out;
    for (auto r : radii) {
        const CoverBall ball = build_cover_ball(g, base, r + 1);
        const auto kids = ball.children();
        BoundaryRow row;
        row.r = r;
        if (family == VertexFamily::Ball) {
            for (const auto& nd : ball.nodes) {
                if (nd.dist <= r) ++row.set_size;
                else if (nd.dist == r + 1) ++row.boundary_size;
            }
        } else {
            std::vector<std::size_t> path{0};
            while (path.size() < r + 1) {
                const auto& ch = kids[path.back()];
                if (ch.empty()) throw InvalidArgument("no geodesic segment of length " + std::to_string(r));
                path.push_back(ch.front());
            }
            row.set_size = static_cast<long long>(path.size());
            for (std::size_t t = 0; t < path.size(); ++t) {
                for (auto c : kids[path[t]])
                    if (t + 1 >= path.size() || c != path[t + 1]) ++row.boundary_size;
            }
        }
        row.ratio = static_cast<double>(row.boundary_size) / static_cast<double>(row.set_size);
        row.meets_criterion = r > 0 && row.ratio <= std::pow(static_cast<double>(r), -beta);
        out.push_back(row);
    }
    return out;
}

CountReport error_decay_report(const IndexedGraph& g, const GibbsData& gd, std::size_t n_lo, std::size_t n_hi) {
    if (n_lo > n_hi) throw InvalidArgument("empty n range");
    const std::size_t base = gd.base_vertex;
    CountReport rep;
    rep.params = biregular_params(g, base);
    rep.delta = gd.delta;
    rep.m_mass = total_cylinder_mass(g, gd);
    rep.normalization = gd.normalization;
    const bool exact = gd.potential.is_zero();
    rep.cstar = renewal_constant(g, gd.potential, base, gd.delta, exact);
    const Rational n_base = propagate_orders(g).vertex_order.at(base);
    rep.constants = main_term(rep.params, gd, n_base, rep.m_mass, 0);
    rep.const_ratio = rep.constants.const57 / rep.constants.const58;
    rep.literal_over_cstar = rep.constants.const58 / rep.cstar.value;
    const auto oc = orbit_oracle(g, gd.potential, base, 2 * n_hi);
    std::vector<double> xs, ys;
    double r57_lo = INFINITY, r57_hi = 0, r58_lo = INFINITY, r58_hi = 0;
    for (std::size_t n = n_lo; n <= n_hi; ++n) {
        CountRow row;
        row.n = n;
        const auto mt = main_term(rep.params, gd, n_base, rep.m_mass, n);
        row.main57 = mt.main57;
        row.main58 = mt.main58;
        row.cstar_term = rep.cstar.value * std::exp(2 * gd.delta * static_cast<double>(n));
        if (exact && rep.cstar.exact) {
            Rational pw = 1;
            for (std::size_t t = 0; t < n; ++t) pw *= *rep.cstar.lambda;
            row.oracle = oc.exact_cumulative[2 * n].convert_to<double>();
            row.residual = Rational(oc.exact_cumulative[2 * n] - *rep.cstar.exact * pw).convert_to<double>();
        } else {
            row.oracle = oc.cumulative[2 * n];
            row.residual = row.oracle - row.cstar_term;
        }
        row.ratio57 = row.main57 / row.oracle;
        row.ratio58 = row.main58 / row.oracle;
        r57_lo = std::min(r57_lo, row.ratio57);
        r57_hi = std::max(r57_hi, row.ratio57);
        r58_lo = std::min(r58_lo, row.ratio58);
        r58_hi = std::max(r58_hi, row.ratio58);
        const bool resolved = exact || std::abs(row.residual) > 1e-11 * row.oracle;
        if (row.residual != 0 && resolved) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::log(std::abs(row.residual)));
        }
        rep.rows.push_back(row);
    }
    rep.ratio57_variation = r57_hi / r57_lo - 1.0;
    rep.ratio58_variation = r58_hi / r58_lo - 1.0;
    if (xs.size() >= 2) {
        rep.kappa_hat = 2 * gd.delta - fit_line(xs, ys).slope;
    } else {
        rep.kappa_hat = std::numeric_limits<double>::infinity();  // residual vanishes in range
    }
    return rep;
}

}  // namespace treegibbs
