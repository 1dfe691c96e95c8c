#include "treegibbs/indexed_graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>

#include "treegibbs/errors.hpp"

namespace treegibbs {

IndexPair TailSpec::at(std::size_t n) const {
    if (n == 0) throw InvalidArgument("tail positions start at 1");
    if (n <= prefix.size()) return prefix[n - 1];
    if (period.empty()) throw InvalidArgument("tail period is empty");
    return period[(n - prefix.size() - 1) % period.size()];
}

bool TailSpec::is_cuspidal() const {
    auto unit = [](const IndexPair& p) { return p.irev == 1; };
    return std::all_of(prefix.begin(), prefix.end(), unit) &&
           std::all_of(period.begin(), period.end(), unit);
}

IndexedGraph::IndexedGraph(std::vector<std::string> vertices, std::vector<Edge> edges,
                           std::vector<TailSpec> tails, std::vector<FunnelSpec> funnels,
                           OrderSpec orders)
    : vertices_(std::move(vertices)),
      edges_(std::move(edges)),
      tails_(std::move(tails)),
      funnels_(std::move(funnels)),
      orders_(std::move(orders)),
      out_(vertices_.size()) {
    for (std::size_t v = 0; v < vertices_.size(); ++v) vertex_lookup_.emplace(vertices_[v], v);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        edge_lookup_.emplace(edges_[e].id, e);
        if (edges_[e].from < out_.size()) out_[edges_[e].from].push_back(e);
    }
}

std::vector<std::size_t> IndexedGraph::tails_at(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < tails_.size(); ++t)
        if (tails_[t].attach == v) out.push_back(t);
    return out;
}

std::optional<std::size_t> IndexedGraph::find_vertex(const std::string& name) const {
    auto it = vertex_lookup_.find(name);
    if (it == vertex_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> IndexedGraph::find_edge(const std::string& id) const {
    auto it = edge_lookup_.find(id);
    if (it == edge_lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t IndexedGraph::vertex_index(const std::string& name) const {
    auto v = find_vertex(name);
    if (!v) throw InvalidArgument("unknown vertex '" + name + "'");
    return *v;
}

std::size_t IndexedGraph::edge_index(const std::string& id) const {
    auto e = find_edge(id);
    if (!e) throw InvalidArgument("unknown edge '" + id + "'");
    return *e;
}

bool IndexedGraph::is_funnel_edge(std::size_t e) const {
    for (const auto& f : funnels_)
        if (f.entry_edge == e || (f.entry_edge < edges_.size() && edges_[f.entry_edge].rev == e))
            return true;
    return false;
}

const FunnelSpec* IndexedGraph::funnel_entered_by(std::size_t e) const {
    for (const auto& f : funnels_)
        if (f.entry_edge == e) return &f;
    return nullptr;
}

namespace {

long tail_lift_contribution(const IndexedGraph& g, std::size_t v) {
    long s = 0;
    for (auto t : g.tails_at(v)) s += g.tails()[t].at(1).irev;
    return s;
}

}  // namespace

long lift_degree(const IndexedGraph& g, std::size_t a) {
    if (a >= g.num_vertices()) throw InvalidArgument("unknown vertex index " + std::to_string(a));
    long d = 0;
    for (auto e : g.out_edges(a)) d += g.edge(g.edge(e).rev).index;
    return d + tail_lift_contribution(g, a);
}

long edge_multiplicity(const IndexedGraph& g, std::size_t e, std::size_t f) {
    const Edge& ee = g.edge(e);
    const Edge& ff = g.edge(f);
    if (ff.from != ee.to)
        throw InvalidArgument("edge '" + ff.id + "' does not continue edge '" + ee.id + "'");
    if (f == ee.rev) return ee.index - 1;
    return g.edge(ff.rev).index;
}

ValidationReport validate_graph(const IndexedGraph& g) {
    ValidationReport r;
    auto bad = [&](const std::string& s) { r.violations.push_back(s); };
    const std::size_t nv = g.num_vertices(), ne = g.num_edges();
    if (nv == 0) bad("graph has no vertices");
    {
        std::vector<std::string> names = g.vertex_names();
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end())
            bad("duplicate vertex id");
        std::vector<std::string> ids;
        for (const auto& e : g.edges()) ids.push_back(e.id);
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) bad("duplicate edge id");
    }
    bool structural = true;
    for (std::size_t e = 0; e < ne; ++e) {
        const Edge& ed = g.edge(e);
        if (ed.from >= nv || ed.to >= nv) {
            bad("edge '" + ed.id + "' has an unknown endpoint");
            structural = false;
            continue;
        }
        if (ed.rev >= ne) {
            bad("edge '" + ed.id + "' has an unknown reversal");
            structural = false;
            continue;
        }
        if (ed.rev == e) bad("involution has fixpoint at edge '" + ed.id + "'");
        const Edge& rv = g.edge(ed.rev);
        if (rv.rev != e) bad("reversal of '" + ed.id + "' is not an involution");
        if (rv.from != ed.to || rv.to != ed.from)
            bad("endpoints of '" + ed.id + "' and its reversal do not match");
        if (ed.index < 1) bad("edge '" + ed.id + "' has index < 1");
    }
    if (!structural) return r;

    if (nv > 0) {
        std::vector<bool> seen(nv, false);
        std::deque<std::size_t> queue{0};
        seen[0] = true;
        while (!queue.empty()) {
            auto v = queue.front();
            queue.pop_front();
            for (auto e : g.out_edges(v)) {
                auto w = g.edge(e).to;
                if (!seen[w]) {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end()) bad("core not connected");
    }

    for (std::size_t t = 0; t < g.tails().size(); ++t) {
        const TailSpec& ts = g.tails()[t];
        const std::string tag = "tail " + std::to_string(t);
        if (ts.attach >= nv) {
            bad(tag + " attaches to an unknown vertex");
            continue;
        }
        if (ts.period.empty()) {
            bad(tag + " has an empty period");
            continue;
        }
        bool indices_ok = true;
        for (const auto* seq : {&ts.prefix, &ts.period})
            for (const auto& p : *seq)
                if (p.ie < 1 || p.irev < 1) indices_ok = false;
        if (!indices_ok) {
            bad(tag + " has an index < 1");
            continue;
        }
        const std::size_t span = ts.prefix.size() + ts.period.size();
        for (std::size_t n = 1; n <= span; ++n) {
            long d = ts.at(n).ie + ts.at(n + 1).irev;
            if (d < 2) {
                bad(tag + " has a ray vertex of lift-degree < 2 at depth " + std::to_string(n));
                break;
            }
        }
    }

    for (std::size_t k = 0; k < g.funnels().size(); ++k) {
        const FunnelSpec& f = g.funnels()[k];
        const std::string tag = "funnel " + std::to_string(k);
        if (f.entry_edge >= ne) {
            bad(tag + " has an unknown entry edge");
            continue;
        }
        if (f.branching.empty() ||
            std::any_of(f.branching.begin(), f.branching.end(), [](long b) { return b < 1; }))
            bad(tag + " needs a nonempty branching list of positive integers");
        const Edge& en = g.edge(f.entry_edge);
        if (en.index != 1) bad(tag + " entry edge must have index 1");
        if (g.out_edges(en.to).size() != 1 || !g.tails_at(en.to).empty())
            bad(tag + " entry vertex must be a leaf of the core");
    }

    for (std::size_t v = 0; v < nv; ++v) {
        long d = lift_degree(g, v);
        if (d < 1) bad("vertex '" + g.vertex_name(v) + "' has lift-degree 0");
        else if (d == 1)
            r.warnings.push_back("vertex '" + g.vertex_name(v) + "' has lift-degree 1");
    }

    if (g.orders().base_vertex >= nv) bad("orders.base_vertex is unknown");
    if (g.orders().base_value <= 0) bad("orders.base_value must be positive");
    return r;
}

void require_valid(const IndexedGraph& g) {
    auto r = validate_graph(g);
    if (r.ok()) return;
    std::ostringstream os;
    for (std::size_t i = 0; i < r.violations.size(); ++i)
        os << (i ? "; " : "") << r.violations[i];
    throw ConfigError(os.str());
}

MaterializedGraph materialize(const IndexedGraph& g, std::size_t depth) {
    MaterializedGraph m;
    m.depth = depth;
    std::vector<std::string> vertices = g.vertex_names();
    std::vector<Edge> edges = g.edges();
    m.origin.assign(edges.size(), EdgeOrigin{});
    m.core_edge_map.resize(edges.size());
    std::iota(m.core_edge_map.begin(), m.core_edge_map.end(), std::size_t{0});
    m.tail_edges.resize(g.tails().size());
    if (depth > 0) {
        for (std::size_t t = 0; t < g.tails().size(); ++t) {
            const TailSpec& ts = g.tails()[t];
            std::size_t prev = ts.attach;
            const std::string stem = g.vertex_name(ts.attach) + "~t" + std::to_string(t) + ".";
            for (std::size_t n = 1; n <= depth; ++n) {
                const std::size_t v = vertices.size();
                vertices.push_back(stem + std::to_string(n));
                const IndexPair p = ts.at(n);
                const std::size_t e = edges.size();
                const std::string eid = "~t" + std::to_string(t) + ".";
                edges.push_back(Edge{eid + "e" + std::to_string(n), e + 1, prev, v, p.ie});
                edges.push_back(Edge{eid + "eb" + std::to_string(n), e, v, prev, p.irev});
                m.origin.push_back(EdgeOrigin{static_cast<int>(t), n, true});
                m.origin.push_back(EdgeOrigin{static_cast<int>(t), n, false});
                m.tail_edges[t].push_back(e);
                m.tail_edges[t].push_back(e + 1);
                prev = v;
            }
            m.truncated.push_back(prev);
        }
    }
    m.graph = IndexedGraph(std::move(vertices), std::move(edges), {}, g.funnels(), g.orders());
    return m;
}

OrderGrading propagate_orders(const IndexedGraph& g, std::size_t base_vertex,
                              const Rational& base_value) {
    const std::size_t nv = g.num_vertices();
    if (base_vertex >= nv) throw InvalidArgument("orders base vertex is unknown");
    if (base_value <= 0) throw InvalidArgument("orders base value must be positive");
    OrderGrading og;
    og.vertex_order.assign(nv, Rational(0));
    std::vector<bool> seen(nv, false);
    std::deque<std::size_t> queue{base_vertex};
    og.vertex_order[base_vertex] = base_value;
    seen[base_vertex] = true;
    while (!queue.empty()) {
        auto x = queue.front();
        queue.pop_front();
        for (auto e : g.out_edges(x)) {
            const Edge& ed = g.edge(e);
            if (seen[ed.to]) continue;
            // N(∂0e) = N(∂1e)·i(ē)/i(e)  =>  N(∂1e) = N(∂0e)·i(e)/i(ē)
            og.vertex_order[ed.to] =
                og.vertex_order[x] * Rational(ed.index) / Rational(g.edge(ed.rev).index);
            seen[ed.to] = true;
            queue.push_back(ed.to);
        }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw InvalidArgument("cannot propagate orders: core not connected");
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edge(e);
        Rational lhs = og.vertex_order[ed.from];
        Rational rhs = og.vertex_order[ed.to] * Rational(g.edge(ed.rev).index) / Rational(ed.index);
        if (lhs != rhs)
            throw NonUnimodular("cycle through edge '" + ed.id + "' has index ratio product " +
                                Rational(lhs / rhs).str() + " != 1");
    }
    og.edge_order.resize(g.num_edges());
    for (std::size_t e = 0; e < g.num_edges(); ++e)
        og.edge_order[e] = og.vertex_order[g.edge(e).to] / Rational(g.edge(e).index);
    return og;
}

OrderGrading propagate_orders(const IndexedGraph& g) {
    return propagate_orders(g, g.orders().base_vertex, g.orders().base_value);
}

namespace {

// Strongly connected components (iterative Tarjan) of a digraph given as adjacency lists.
std::vector<int> scc_ids(const std::vector<std::vector<std::size_t>>& adj, int& count) {
    const std::size_t n = adj.size();
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    int next = 0;
    count = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (index[s] >= 0) continue;
        std::vector<std::pair<std::size_t, std::size_t>> work{{s, 0}};
        index[s] = low[s] = next++;
        stack.push_back(s);
        on_stack[s] = true;
        while (!work.empty()) {
            auto& [v, pos] = work.back();
            if (pos < adj[v].size()) {
                auto w = adj[v][pos++];
                if (index[w] < 0) {
                    index[w] = low[w] = next++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    work.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
            } else {
                if (low[v] == index[v]) {
                    while (true) {
                        auto w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = count;
                        if (w == v) break;
                    }
                    ++count;
                }
                auto done = v;
                work.pop_back();
                if (!work.empty()) low[work.back().first] = std::min(low[work.back().first], low[done]);
            }
        }
    }
    return comp;
}

}  // namespace

long length_spectrum_period(const IndexedGraph& g) {
    std::size_t depth = 0;
    for (const auto& t : g.tails())
        depth = std::max(depth, t.prefix.size() + 2 * t.period.size() + 2);
    MaterializedGraph m = materialize(g, depth);
    const IndexedGraph& h = m.graph;
    const std::size_t ne = h.num_edges();
    std::vector<std::vector<std::size_t>> adj(ne);
    for (std::size_t e = 0; e < ne; ++e)
        for (auto f : h.out_edges(h.edge(e).to))
            if (edge_multiplicity(h, e, f) > 0) adj[e].push_back(f);
    int ncomp = 0;
    auto comp = scc_ids(adj, ncomp);
    long k = 0;
    for (int c = 0; c < ncomp; ++c) {
        std::vector<long> level(ne, -1);
        std::size_t start = ne;
        for (std::size_t e = 0; e < ne; ++e)
            if (comp[e] == c) {
                start = e;
                break;
            }
        level[start] = 0;
        std::deque<std::size_t> queue{start};
        long gc = 0;
        while (!queue.empty()) {
            auto e = queue.front();
            queue.pop_front();
            for (auto f : adj[e]) {
                if (comp[f] != c) continue;
                if (level[f] < 0) {
                    level[f] = level[e] + 1;
                    queue.push_back(f);
                } else {
                    gc = std::gcd(gc, std::labs(level[e] + 1 - level[f]));
                }
            }
        }
        if (gc > 0) k = std::gcd(k, gc);
    }
    if (k == 0) throw NoClosedGeodesic("no closed non-backtracking path of positive multiplicity");
    return k;
}

std::vector<std::vector<long long>> CoverBall::label_counts() const {
    std::vector<std::vector<long long>> counts(radius + 1,
                                               std::vector<long long>(quotient.graph.num_vertices(), 0));
    for (const auto& n : nodes)
        if (n.label >= 0) ++counts[n.dist][static_cast<std::size_t>(n.label)];
    return counts;
}

std::vector<std::vector<std::size_t>> CoverBall::children() const {
    std::vector<std::vector<std::size_t>> ch(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].parent >= 0) ch[static_cast<std::size_t>(nodes[i].parent)].push_back(i);
    return ch;
}

CoverBall build_cover_ball(const IndexedGraph& g, std::size_t base, std::size_t radius,
                           std::size_t guard) {
    if (base >= g.num_vertices()) throw InvalidArgument("unknown base vertex");
    for (const auto& f : g.funnels())
        if (f.entry_edge < g.num_edges() && g.edge(f.entry_edge).to == base)
            throw InvalidArgument("base vertex lies at a funnel entry");
    CoverBall ball;
    ball.quotient = materialize(g, g.has_tails() ? radius + 1 : 0);
    ball.base = base;
    ball.radius = radius;
    const IndexedGraph& h = ball.quotient.graph;
    auto& nodes = ball.nodes;
    auto push = [&](CoverNode node) {
        if (nodes.size() >= guard)
            throw ResourceLimit("cover ball exceeds " + std::to_string(guard) + " vertices");
        nodes.push_back(node);
    };
    push(CoverNode{-1, static_cast<long>(base), -1, 0, -1, 0});
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const CoverNode cur = nodes[i];
        if (cur.dist >= radius) continue;
        const long parent = static_cast<long>(i);
        if (cur.funnel >= 0) {
            const auto& br = h.funnels()[static_cast<std::size_t>(cur.funnel)].branching;
            long kids = br[cur.funnel_depth % br.size()];
            for (long c = 0; c < kids; ++c)
                push(CoverNode{parent, -1, -1, cur.dist + 1, cur.funnel, cur.funnel_depth + 1});
            continue;
        }
        const auto v = static_cast<std::size_t>(cur.label);
        for (auto f : h.out_edges(v)) {
            long mult = cur.via_edge < 0 ? h.edge(h.edge(f).rev).index
                                         : edge_multiplicity(h, static_cast<std::size_t>(cur.via_edge), f);
            for (long c = 0; c < mult; ++c)
                push(CoverNode{parent, static_cast<long>(h.edge(f).to), static_cast<long>(f),
                               cur.dist + 1, -1, 0});
        }
        if (cur.via_edge >= 0) {
            for (std::size_t k = 0; k < h.funnels().size(); ++k) {
                const auto& fs = h.funnels()[k];
                if (fs.entry_edge != static_cast<std::size_t>(cur.via_edge)) continue;
                for (long c = 0; c < fs.branching[0]; ++c)
                    push(CoverNode{parent, -1, -1, cur.dist + 1, static_cast<int>(k), 1});
            }
        }
    }
    return ball;
}

}  // namespace treegibbs
