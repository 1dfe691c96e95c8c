#include "treegibbs/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "treegibbs/counting.hpp"
#include "treegibbs/errors.hpp"
#include "treegibbs/numerics.hpp"

namespace treegibbs {

// ---------------------------------------------------------------- Potential

double Potential::core(std::size_t e) const {
    return e < edge_values.size() ? edge_values[e] : 0.0;
}

std::pair<double, double> Potential::tail(std::size_t t, std::size_t n) const {
    if (t >= tails.size() || n == 0) return {0.0, 0.0};
    const auto& tp = tails[t];
    if (n <= tp.prefix.size()) return tp.prefix[n - 1];
    if (tp.period.empty()) return {0.0, 0.0};
    return tp.period[(n - tp.prefix.size() - 1) % tp.period.size()];
}

std::size_t Potential::tail_prefix_len(std::size_t t) const {
    return t < tails.size() ? tails[t].prefix.size() : 0;
}

std::size_t Potential::tail_period_len(std::size_t t) const {
    return t < tails.size() ? std::max<std::size_t>(1, tails[t].period.size()) : 1;
}

Potential Potential::reversed(const IndexedGraph& g) const {
    Potential r;
    r.edge_values.resize(g.num_edges());
    for (std::size_t e = 0; e < g.num_edges(); ++e) r.edge_values[e] = core(g.edge(e).rev);
    r.tails = tails;
    for (auto& tp : r.tails) {
        for (auto& p : tp.prefix) std::swap(p.first, p.second);
        for (auto& p : tp.period) std::swap(p.first, p.second);
    }
    return r;
}

Potential Potential::shifted(double c, const IndexedGraph& g) const {
    Potential r;
    r.edge_values.resize(g.num_edges());
    for (std::size_t e = 0; e < g.num_edges(); ++e) r.edge_values[e] = core(e) + c;
    r.tails.resize(g.tails().size());
    for (std::size_t t = 0; t < g.tails().size(); ++t) {
        if (t < tails.size()) r.tails[t] = tails[t];
        auto& tp = r.tails[t];
        if (tp.period.empty()) tp.period.push_back({0.0, 0.0});
        for (auto& p : tp.prefix) p = {p.first + c, p.second + c};
        for (auto& p : tp.period) p = {p.first + c, p.second + c};
    }
    return r;
}

bool Potential::is_zero() const {
    auto zero_pair = [](const std::pair<double, double>& p) { return p.first == 0 && p.second == 0; };
    if (std::any_of(edge_values.begin(), edge_values.end(), [](double v) { return v != 0; }))
        return false;
    for (const auto& tp : tails)
        if (!std::all_of(tp.prefix.begin(), tp.prefix.end(), zero_pair) ||
            !std::all_of(tp.period.begin(), tp.period.end(), zero_pair))
            return false;
    return true;
}

std::vector<double> Potential::on(const MaterializedGraph& m) const {
    std::vector<double> out(m.graph.num_edges());
    for (std::size_t e = 0; e < out.size(); ++e) {
        const auto& o = m.origin[e];
        if (o.tail < 0) {
            out[e] = core(e);
        } else {
            auto p = tail(static_cast<std::size_t>(o.tail), o.depth);
            out[e] = o.outward ? p.first : p.second;
        }
    }
    return out;
}

// ---------------------------------------------------------------- tails

TailStep TailPattern::at(std::size_t n) const {
    if (n == 0) throw InvalidArgument("tail positions start at 1");
    if (n <= prefix) return steps[n - 1];
    return steps[prefix + (n - prefix - 1) % period];
}

TailPattern tail_pattern(const IndexedGraph& g, const Potential& f, std::size_t t) {
    const TailSpec& ts = g.tails().at(t);
    TailPattern p;
    p.prefix = std::max(ts.prefix.size(), f.tail_prefix_len(t));
    p.period = std::lcm(ts.period.size(), f.tail_period_len(t));
    for (std::size_t n = 1; n <= p.prefix + p.period; ++n) {
        auto idx = ts.at(n);
        auto pot = f.tail(t, n);
        p.steps.push_back(TailStep{idx.ie, idx.irev, pot.first, pot.second});
    }
    return p;
}

std::array<double, 2> TailShadow::at(std::size_t n) const {
    if (n == 0) throw InvalidArgument("tail positions start at 1");
    if (n <= head.size()) return head[n - 1];
    const std::size_t k = (n - prefix - 1) / period;
    const std::size_t j = (n - prefix - 1) % period;
    const double scale = std::pow(lambda, static_cast<double>(k));
    return {head[prefix + j][0] * scale, head[prefix + j][1] * scale};
}

namespace {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

// Transfer x_n -> x_{n+1} of the two-term shadow recurrence on a ray.
Mat2 ray_step(const TailPattern& p, std::size_t n, double s) {
    const TailStep a = p.at(n), b = p.at(n + 1);
    const double w_back = std::exp(a.frev - s);   // w(ē_n)
    const double w_next = std::exp(b.fe - s);     // w(e_{n+1})
    Mat2 m;
    // u(e_n) = i(ē_{n+1}) w(e_{n+1}) u(e_{n+1}) + (i(e_n)-1) w(ē_n) u(ē_n)
    m(0, 0) = 1.0 / (static_cast<double>(b.irev) * w_next);
    m(0, 1) = -static_cast<double>(a.ie - 1) * w_back / (static_cast<double>(b.irev) * w_next);
    // u(ē_{n+1}) = i(e_n) w(ē_n) u(ē_n) + (i(ē_{n+1})-1) w(e_{n+1}) u(e_{n+1})
    const double c = static_cast<double>(b.irev - 1) * w_next;
    m(1, 0) = c * m(0, 0);
    m(1, 1) = static_cast<double>(a.ie) * w_back + c * m(0, 1);
    return m;
}

struct TailSolve {
    bool ok = false;
    std::string why;
    TailShadow shadow;  // scaled so that u(ē_1) = 1
};

TailSolve solve_tail(const TailPattern& p, double s) {
    TailSolve r;
    Mat2 prod = Mat2::Identity();
    for (std::size_t n = p.prefix + 1; n <= p.prefix + p.period; ++n) prod = ray_step(p, n, s) * prod;
    const double tr = prod.trace(), det = prod.determinant();
    const double disc = tr * tr - 4 * det;
    if (!(disc > 1e-14 * tr * tr)) {
        r.why = "period recurrence has no real distinct roots";
        return r;
    }
    const double sq = std::sqrt(disc);
    const double r1 = (tr + sq) / 2, r2 = (tr - sq) / 2;
    const double small = std::abs(r1) < std::abs(r2) ? r1 : r2;
    const double big = std::abs(r1) < std::abs(r2) ? r2 : r1;
    if (!(std::abs(big) > std::abs(small)) || !(small > 0)) {
        r.why = "decaying root is not positive or ties in modulus";
        return r;
    }
    // Eigenvector of `small`, using the better conditioned row.
    Vec2 v1(prod(0, 1), small - prod(0, 0));
    Vec2 v2(small - prod(1, 1), prod(1, 0));
    Vec2 v = v1.norm() >= v2.norm() ? v1 : v2;
    if (v.norm() == 0) v = Vec2(1, 0);
    if (v(0) < 0 || v(1) < 0) v = -v;
    std::vector<std::array<double, 2>> head(p.prefix + p.period);
    Vec2 x = v;
    head[p.prefix] = {x(0), x(1)};
    for (std::size_t j = 1; j < p.period; ++j) {
        x = ray_step(p, p.prefix + j, s) * x;
        head[p.prefix + j] = {x(0), x(1)};
    }
    x = v;
    for (std::size_t n = p.prefix; n >= 1; --n) {
        x = ray_step(p, n, s).partialPivLu().solve(x);
        head[n - 1] = {x(0), x(1)};
    }
    for (const auto& h : head)
        if (!(h[0] > 0 && h[1] > 0)) {
            r.why = "decaying branch is not positive";
            return r;
        }
    const double scale = 1.0 / head[0][1];
    for (auto& h : head) h = {h[0] * scale, h[1] * scale};
    r.ok = true;
    r.shadow.prefix = p.prefix;
    r.shadow.period = p.period;
    r.shadow.head = std::move(head);
    r.shadow.lambda = small;
    return r;
}

// Effective state layout: core edges, then (e_1, ē_1) per tail.
struct Layout {
    const IndexedGraph* g;
    std::vector<TailPattern> patterns;
    std::size_t ne() const { return g->num_edges(); }
    std::size_t size() const { return ne() + 2 * patterns.size(); }
    bool is_tail_out(std::size_t x) const { return x >= ne() && (x - ne()) % 2 == 0; }
    std::size_t tail_of(std::size_t x) const { return (x - ne()) / 2; }
    std::size_t rev(std::size_t x) const {
        if (x < ne()) return g->edge(x).rev;
        return is_tail_out(x) ? x + 1 : x - 1;
    }
    long index(std::size_t x) const {
        if (x < ne()) return g->edge(x).index;
        auto st = patterns[tail_of(x)].at(1);
        return is_tail_out(x) ? st.ie : st.irev;
    }
    double pot(const Potential& f, std::size_t x) const {
        if (x < ne()) return f.core(x);
        auto st = patterns[tail_of(x)].at(1);
        return is_tail_out(x) ? st.fe : st.frev;
    }
    // Continuations at a core vertex.
    std::vector<std::size_t> out_states(std::size_t v) const {
        std::vector<std::size_t> out = g->out_edges(v);
        for (std::size_t t = 0; t < patterns.size(); ++t)
            if (g->tails()[t].attach == v) out.push_back(ne() + 2 * t);
        return out;
    }
    // Core head vertex of a state, or npos for e_1 (which heads into the ray).
    std::size_t head(std::size_t x) const {
        if (x < ne()) return g->edge(x).to;
        if (is_tail_out(x)) return static_cast<std::size_t>(-1);
        return g->tails()[tail_of(x)].attach;
    }
};

Layout make_layout(const IndexedGraph& g, const Potential& f) {
    Layout l{&g, {}};
    for (std::size_t t = 0; t < g.tails().size(); ++t) l.patterns.push_back(tail_pattern(g, f, t));
    return l;
}

Eigen::MatrixXd build_effective(const Layout& l, const Potential& f, double s,
                                std::vector<TailSolve>* solves) {
    const std::size_t n = l.size();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < n; ++x) {
        const std::size_t v = l.head(x);
        if (v == static_cast<std::size_t>(-1)) continue;
        for (auto y : l.out_states(v)) {
            const long m = (y == l.rev(x)) ? l.index(x) - 1 : l.index(l.rev(y));
            if (m > 0)
                k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) +=
                    static_cast<double>(m) * std::exp(l.pot(f, y) - s);
        }
    }
    for (std::size_t t = 0; t < l.patterns.size(); ++t) {
        TailSolve ts = solve_tail(l.patterns[t], s);
        if (!ts.ok)
            throw Diverges("tail " + std::to_string(t) + " at s=" + std::to_string(s) + ": " + ts.why);
        const std::size_t x = l.ne() + 2 * t;
        k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x + 1)) = ts.shadow.head[0][0];
        if (solves) solves->push_back(std::move(ts));
    }
    return k;
}

double max_lift_degree(const IndexedGraph& g) {
    long d = 1;
    for (std::size_t v = 0; v < g.num_vertices(); ++v) d = std::max(d, lift_degree(g, v));
    for (const auto& t : g.tails())
        for (std::size_t n = 1; n <= t.prefix.size() + t.period.size(); ++n)
            d = std::max(d, t.at(n).ie + t.at(n + 1).irev);
    return static_cast<double>(d);
}

double max_potential(const IndexedGraph& g, const Potential& f) {
    double m = 0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) m = std::max(m, std::abs(f.core(e)));
    for (std::size_t t = 0; t < g.tails().size(); ++t) {
        auto p = tail_pattern(g, f, t);
        for (const auto& st : p.steps) m = std::max({m, std::abs(st.fe), std::abs(st.frev)});
    }
    return m;
}

bool tail_valid(const TailPattern& p, double s) { return solve_tail(p, s).ok; }

// Infimum of s at which the tail admits a positive decaying shadow branch.
double tail_critical(const TailPattern& p, double s_hi) {
    if (!tail_valid(p, s_hi)) throw Diverges("tail has no decaying branch even at s=" + std::to_string(s_hi));
    double step = 1.0, lo = s_hi - step;
    while (tail_valid(p, lo)) {
        step *= 2;
        lo = s_hi - step;
        if (step > 256) return -std::numeric_limits<double>::infinity();
    }
    double hi = s_hi;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        (tail_valid(p, mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

Eigen::MatrixXd effective_matrix(const IndexedGraph& g, const Potential& f, double s) {
    return build_effective(make_layout(g, f), f, s, nullptr);
}

TransferMatrix transfer_matrix(const IndexedGraph& g, const Potential& f, double s,
                               std::size_t tail_depth) {
    TransferMatrix tm;
    tm.graph = materialize(g, g.has_tails() ? tail_depth : 0);
    const IndexedGraph& h = tm.graph.graph;
    const auto pot = f.on(tm.graph);
    const auto n = static_cast<Eigen::Index>(h.num_edges());
    tm.t = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t e = 0; e < h.num_edges(); ++e)
        for (auto x : h.out_edges(h.edge(e).to)) {
            long m = edge_multiplicity(h, e, x);
            if (m > 0)
                tm.t(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(x)) =
                    static_cast<double>(m) * std::exp(pot[x] - s);
        }
    return tm;
}

ExponentReport critical_exponent_report(const IndexedGraph& g, const Potential& f) {
    ExponentReport rep;
    const Layout layout = make_layout(g, f);
    if (!g.has_tails()) {
        auto pr = perron_power(build_effective(layout, f, 0.0, nullptr));
        if (!(pr.value > 0)) throw NoClosedGeodesic("transfer matrix is nilpotent");
        rep.delta = std::log(pr.value);
        rep.method = "power-iteration";
        rep.iterations = pr.iterations;
        return rep;
    }
    double s_hi = std::log(max_lift_degree(g)) + max_potential(g, f) + 1.0;
    double s_tail = -std::numeric_limits<double>::infinity();
    for (const auto& p : layout.patterns) s_tail = std::max(s_tail, tail_critical(p, s_hi));
    rep.tail_critical = s_tail;
    auto rho_at = [&](double s) { return perron_power(build_effective(layout, f, s, nullptr)).value; };
    for (int guard = 0; rho_at(s_hi) >= 1.0; ++guard) {
        if (guard > 60) throw NotConverged("no upper bracket for the critical exponent");
        s_hi += 1.0;
    }
    auto tails_valid = [&](double s) {
        return std::all_of(layout.patterns.begin(), layout.patterns.end(),
                           [&](const TailPattern& p) { return tail_valid(p, s); });
    };
    double lo;
    if (std::isfinite(s_tail)) {
        lo = s_tail;
        for (double eps = 1e-14; !tails_valid(lo) && eps < 1e-3; eps *= 10)
            lo = s_tail + eps * std::max(1.0, std::abs(s_tail));
    } else {
        lo = s_hi - 1.0;
        while (rho_at(lo) <= 1.0) lo -= 1.0;
    }
    if (rho_at(lo) <= 1.0) {
        std::ostringstream os;
        os.precision(12);
        os << "exponent dominated by a tail (tail critical value " << s_tail << ")";
        throw Diverges(os.str());
    }
    double hi = s_hi;
    std::size_t it = 0;
    for (; it < 300 && hi - lo > 2e-16 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (rho_at(mid) > 1.0 ? lo : hi) = mid;
    }
    rep.delta = 0.5 * (lo + hi);
    rep.method = "bisection on resummed core";
    rep.iterations = it;
    auto tm = transfer_matrix(g, f, 0.0, 200);
    auto pr = perron_power(tm.t);
    rep.truncated_delta = pr.value > 0 ? std::log(pr.value) : -std::numeric_limits<double>::infinity();
    return rep;
}

double critical_exponent(const IndexedGraph& g, const Potential& f) {
    return critical_exponent_report(g, f).delta;
}

double ShadowVector::value(const MaterializedGraph& m, std::size_t e) const {
    const auto& o = m.origin.at(e);
    if (o.tail < 0) return core.at(e);
    auto x = tails.at(static_cast<std::size_t>(o.tail)).at(o.depth);
    return o.outward ? x[0] : x[1];
}

std::vector<double> ShadowVector::on(const MaterializedGraph& m) const {
    std::vector<double> out(m.graph.num_edges());
    for (std::size_t e = 0; e < out.size(); ++e) out[e] = value(m, e);
    return out;
}

ShadowVector shadow_vector(const IndexedGraph& g, const Potential& f, double delta, Direction dir) {
    const Potential pf = dir == Direction::Forward ? f : f.reversed(g);
    const Layout layout = make_layout(g, pf);
    std::vector<TailSolve> solves;
    const Eigen::MatrixXd k = build_effective(layout, pf, delta, &solves);
    const std::size_t n = layout.size();
    const std::size_t a0 = g.orders().base_vertex;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (auto x : layout.out_states(a0))
        c(static_cast<Eigen::Index>(x)) =
            static_cast<double>(layout.index(layout.rev(x))) * std::exp(layout.pot(pf, x) - delta);
    Eigen::VectorXd u = null_vector(k, c);
    const double scale = u.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u(i) < -1e-9 * scale)
            throw NoPositiveSolution("shadow equation has no nonnegative solution at delta=" +
                                     std::to_string(delta));
        if (u(i) < 1e-14 * scale) u(i) = 0;
    }
    ShadowVector sv;
    sv.core.assign(u.data(), u.data() + g.num_edges());
    double res = (u - k * u).cwiseAbs().maxCoeff();
    for (std::size_t t = 0; t < solves.size(); ++t) {
        TailShadow ts = solves[t].shadow;
        const double ub = u(static_cast<Eigen::Index>(g.num_edges() + 2 * t + 1));
        for (auto& h : ts.head) h = {h[0] * ub, h[1] * ub};
        // replay the ray equations over a couple of periods
        const auto& p = layout.patterns[t];
        for (std::size_t m = 1; m <= p.prefix + 2 * p.period; ++m) {
            auto x = ts.at(m), y = ts.at(m + 1);
            auto a = p.at(m), b = p.at(m + 1);
            const double wb = std::exp(a.frev - delta), wn = std::exp(b.fe - delta);
            double r1 = x[0] - (b.irev * wn * y[0] + (a.ie - 1) * wb * x[1]);
            double r2 = y[1] - (a.ie * wb * x[1] + (b.irev - 1) * wn * y[0]);
            res = std::max({res, std::abs(r1), std::abs(r2)});
        }
        sv.tails.push_back(std::move(ts));
    }
    sv.residual = res;
    return sv;
}

GibbsData compute_gibbs(const IndexedGraph& g, const Potential& f) {
    require_valid(g);
    GibbsData gd;
    gd.potential = f;
    gd.base_vertex = g.orders().base_vertex;
    gd.exponent = critical_exponent_report(g, f);
    gd.delta = gd.exponent.delta;
    gd.delta_minus = critical_exponent(g, f.reversed(g));
    if (std::abs(gd.delta - gd.delta_minus) > kExponentAgreement) {
        std::ostringstream os;
        os.precision(15);
        os << "exponents of F and its reversal differ: " << gd.delta << " vs " << gd.delta_minus;
        throw InconsistentExponent(os.str());
    }
    gd.delta_zero = f.is_zero() ? gd.delta : critical_exponent(g, Potential{});
    gd.u_plus = shadow_vector(g, f, gd.delta, Direction::Forward);
    gd.u_minus = shadow_vector(g, f, gd.delta_minus, Direction::Backward);
    gd.normalization = "||nu_a0|| = 1 at base vertex " + g.vertex_name(gd.base_vertex);
    return gd;
}

CocycleValue gibbs_cocycle(const IndexedGraph& g, const Potential& f, double delta, std::size_t x,
                           const std::vector<std::size_t>& path_x_to_v, std::size_t y,
                           const std::vector<std::size_t>& path_y_to_v) {
    auto walk = [&](std::size_t start, const std::vector<std::size_t>& path, double& sum) {
        std::size_t at = start;
        sum = 0;
        for (auto e : path) {
            if (g.edge(e).from != at) throw InvalidArgument("path is not composable");
            sum += f.core(e);
            at = g.edge(e).to;
        }
        return at;
    };
    double sx = 0, sy = 0;
    const auto vx = walk(x, path_x_to_v, sx);
    const auto vy = walk(y, path_y_to_v, sy);
    if (vx != vy) throw InvalidArgument("paths do not share terminal vertex");
    CocycleValue c;
    c.plain = sy - sx;
    c.busemann = static_cast<long>(path_x_to_v.size()) - static_cast<long>(path_y_to_v.size());
    c.normalized = c.plain + delta * static_cast<double>(c.busemann);
    return c;
}

double poincare_partial_sum(const IndexedGraph& g, const Potential& f, double s, std::size_t n_max,
                            std::size_t base) {
    auto w = orbit_weights(g, f, base, n_max);
    double sum = 0;
    for (std::size_t n = 0; n <= n_max; ++n) sum += w[n] * std::exp(-s * static_cast<double>(n));
    return sum;
}

double cusp_exponent_bound(const TailSpec& ray, const TailPotential& potential) {
    if (!ray.is_cuspidal()) throw InvalidArgument("non-cuspidal ray: some i(ē_n) != 1");
    Potential f;
    f.tails.push_back(potential);
    const std::size_t prefix = std::max(ray.prefix.size(), f.tail_prefix_len(0));
    const std::size_t period = std::lcm(ray.period.size(), f.tail_period_len(0));
    double acc = 0;
    bool branching = false;
    for (std::size_t n = prefix + 1; n <= prefix + period; ++n) {
        const long r = ray.at(n).ie;
        const auto pot = f.tail(0, n);
        if (r > 1) branching = true;
        acc += std::log(static_cast<double>(r)) + pot.first + pot.second;
    }
    if (!branching) return -std::numeric_limits<double>::infinity();
    return 0.5 * acc / static_cast<double>(period);
}

}  // namespace treegibbs
