#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "common.hpp"
#include "treegibbs/errors.hpp"
#include "treegibbs/indexed_graph.hpp"

using namespace treegibbs;

namespace {

bool has_violation(const ValidationReport& r, const std::string& text) {
    return std::any_of(r.violations.begin(), r.violations.end(),
                       [&](const std::string& v) { return v.find(text) != std::string::npos; });
}

// m(e,f) straight from the index data.
long raw_multiplicity(const IndexedGraph& g, std::size_t e, std::size_t f) {
    if (g.edge(e).rev == f) return g.edge(e).index - 1;
    return g.edge(g.edge(f).rev).index;
}

}  // namespace

TEST_CASE("validate_graph accepts the single edge and flags broken axioms") {
    CHECK(validate_graph(tgtest::single_edge(3, 3)).ok());

    IndexedGraph fix({"a"}, {Edge{"e", 0, 0, 0, 3}});
    CHECK(has_violation(validate_graph(fix), "involution has fixpoint"));

    IndexedGraph split({"a", "b", "c", "d"}, {Edge{"e", 1, 0, 1, 3}, Edge{"eb", 0, 1, 0, 3},
                                              Edge{"f", 3, 2, 3, 3}, Edge{"fb", 2, 3, 2, 3}});
    CHECK(has_violation(validate_graph(split), "core not connected"));
    CHECK_THROWS_AS(require_valid(split), ConfigError);

    for (const auto& name : tgtest::all_fixtures()) {
        INFO(name);
        const auto g = tgtest::load_graph(name);
        CHECK(validate_graph(g).ok());
        for (std::size_t e = 0; e < g.num_edges(); ++e) {
            const auto r = g.edge(e).rev;
            CHECK(r != e);
            CHECK(g.edge(r).rev == e);
        }
    }
}

TEST_CASE("edge multiplicities") {
    const auto g = tgtest::single_edge(3, 3);
    CHECK(edge_multiplicity(g, 0, 1) == 2);
    CHECK(edge_multiplicity(g, 1, 0) == 2);
    CHECK_THROWS_AS(edge_multiplicity(g, 0, 0), InvalidArgument);

    // e: b -> a followed by f: a -> c with i(f̄) = 5
    IndexedGraph h({"a", "b", "c"}, {Edge{"e", 1, 1, 0, 2}, Edge{"eb", 0, 0, 1, 1},
                                     Edge{"f", 3, 0, 2, 1}, Edge{"fb", 2, 2, 0, 5}});
    CHECK(edge_multiplicity(h, 0, 2) == 5);

    for (const auto& name : tgtest::all_fixtures()) {
        INFO(name);
        const auto m = materialize(tgtest::load_graph(name), 6);
        const auto& q = m.graph;
        for (std::size_t e = 0; e < q.num_edges(); ++e) {
            const auto v = q.edge(e).to;
            if (std::find(m.truncated.begin(), m.truncated.end(), v) != m.truncated.end()) continue;
            long sum = 0;
            for (auto f : q.out_edges(v)) {
                CHECK(edge_multiplicity(q, e, f) == raw_multiplicity(q, e, f));
                sum += edge_multiplicity(q, e, f);
            }
            CHECK(sum == lift_degree(q, v) - 1);
        }
    }
}

TEST_CASE("lift degrees") {
    const auto g = tgtest::single_edge(3, 3);
    CHECK(lift_degree(g, 0) == 3);
    CHECK(lift_degree(g, 1) == 3);
    CHECK_THROWS_AS(lift_degree(g, 2), InvalidArgument);

    for (auto [r, s] : std::vector<std::pair<long, long>>{{2, 4}, {4, 4}, {3, 2}}) {
        // i(e) = s+1, i(ē) = r+1
        const auto b = tgtest::single_edge(s + 1, r + 1);
        CHECK(lift_degree(b, 0) == r + 1);
        CHECK(lift_degree(b, 1) == s + 1);
    }

    // ray of type (2, q-1) with q = 5: every ray vertex has degree q + 1
    const auto ray = tgtest::load_graph("ray_q5");
    const auto m = materialize(ray, 8);
    for (std::size_t n = 1; n < 8; ++n) {
        const auto v = m.graph.vertex_index("a0~t0." + std::to_string(n));
        CHECK(lift_degree(m.graph, v) == 6);
    }
    CHECK(lift_degree(ray, 0) == lift_degree(m.graph, 0));
}

TEST_CASE("materialize expands tails to the requested depth") {
    const auto g = tgtest::load_graph("lattice_ray_q3");
    const auto m = materialize(g, 7);
    CHECK(m.graph.num_vertices() == g.num_vertices() + 7);
    CHECK(m.graph.num_edges() == g.num_edges() + 14);
    CHECK(m.truncated.size() == 1);
    for (std::size_t n = 1; n <= 7; ++n) {
        const auto e = m.tail_edges[0][2 * (n - 1)];
        const auto p = g.tails()[0].at(n);
        CHECK(m.graph.edge(e).index == p.ie);
        CHECK(m.graph.edge(m.graph.edge(e).rev).index == p.irev);
        CHECK(m.origin[e].depth == n);
    }
    CHECK(materialize(g, 0).graph.num_edges() == g.num_edges());
}

TEST_CASE("order propagation") {
    const auto g = tgtest::single_edge(3, 3, 3);
    const auto o = propagate_orders(g);
    CHECK(o.vertex_order[0] == 3);
    CHECK(o.vertex_order[1] == 3);
    CHECK(o.edge_order[0] == 1);
    CHECK(o.edge_order[1] == 1);

    IndexedGraph flat({"a", "b"}, {Edge{"e", 1, 0, 1, 1}, Edge{"eb", 0, 1, 0, 1}});
    const auto of = propagate_orders(flat, 0, Rational(7, 2));
    CHECK(of.vertex_order[0] == Rational(7, 2));
    CHECK(of.vertex_order[1] == Rational(7, 2));

    IndexedGraph cyc({"a", "b"}, {Edge{"e1", 1, 0, 1, 2}, Edge{"e1b", 0, 1, 0, 3},
                                  Edge{"e2", 3, 0, 1, 1}, Edge{"e2b", 2, 1, 0, 1}});
    CHECK_THROWS_AS(propagate_orders(cyc, 0, 1), NonUnimodular);

    for (const auto& name : tgtest::finite_fixtures()) {
        INFO(name);
        const auto h = tgtest::load_graph(name);
        const auto a = propagate_orders(h, 0, 1);
        for (std::size_t e = 0; e < h.num_edges(); ++e) {
            const auto& ed = h.edge(e);
            CHECK(a.edge_order[e] == a.edge_order[ed.rev]);
            CHECK(a.vertex_order[ed.to] == ed.index * a.edge_order[e]);
        }
        const std::size_t other = h.num_vertices() - 1;
        const auto b = propagate_orders(h, other, 1);
        const Rational scale = b.vertex_order[0] / a.vertex_order[0];
        for (std::size_t v = 0; v < h.num_vertices(); ++v) CHECK(b.vertex_order[v] == scale * a.vertex_order[v]);
    }
}

TEST_CASE("order products along a ray") {
    const auto g = tgtest::load_graph("ray_q5");
    const auto m = materialize(g, 6);
    const auto o = propagate_orders(m.graph, 0, 1);
    // N(e_n) = N(v_n)/i(e_n) = N(v_{n-1})/i(ē_n), so N(v_n) = 2^n
    for (std::size_t n = 1; n <= 6; ++n) {
        const auto v = m.graph.vertex_index("a0~t0." + std::to_string(n));
        Rational expect = 1;
        for (std::size_t k = 0; k < n; ++k) expect *= Rational(4, 2);
        CHECK(o.vertex_order[v] == expect);
    }
}

TEST_CASE("length spectrum period") {
    CHECK(length_spectrum_period(tgtest::single_edge(3, 3)) == 2);
    CHECK(length_spectrum_period(tgtest::load_graph("loop_lattice")) == 1);
    CHECK(length_spectrum_period(tgtest::load_graph("path_lattice")) == 2);
    CHECK_THROWS_AS(length_spectrum_period(tgtest::single_edge(1, 1)), NoClosedGeodesic);

    // a 3-loop and a 2-loop at one vertex
    IndexedGraph tri({"a", "b", "c"},
                     {Edge{"x", 1, 0, 1, 2}, Edge{"xb", 0, 1, 0, 2}, Edge{"y", 3, 1, 2, 2}, Edge{"yb", 2, 2, 1, 2},
                      Edge{"z", 5, 2, 0, 2}, Edge{"zb", 4, 0, 2, 2}});
    CHECK(length_spectrum_period(tri) == 1);
}

TEST_CASE("cover balls") {
    const auto g = tgtest::single_edge(3, 3);
    CHECK(build_cover_ball(g, 0, 2).nodes.size() == 10);
    const auto r0 = build_cover_ball(g, 0, 0);
    CHECK(r0.nodes.size() == 1);
    CHECK(r0.nodes[0].parent == -1);
    CHECK_THROWS_AS(build_cover_ball(g, 0, 6, 50), ResourceLimit);

    for (const auto& name : tgtest::all_fixtures()) {
        INFO(name);
        const auto h = tgtest::load_graph(name);
        const auto ball = build_cover_ball(h, h.orders().base_vertex, 4);
        const auto& q = ball.quotient.graph;
        const auto kids = ball.children();
        for (std::size_t i = 0; i < ball.nodes.size(); ++i) {
            const auto& node = ball.nodes[i];
            if (node.dist >= ball.radius || node.label < 0) continue;
            const auto v = static_cast<std::size_t>(node.label);
            // the tree is locally a copy of the lift star
            const long deg = static_cast<long>(kids[i].size()) + (node.parent >= 0 ? 1 : 0);
            CHECK(deg == lift_degree(q, v));
            std::map<long, long> per_edge;
            for (auto c : kids[i]) per_edge[ball.nodes[c].via_edge]++;
            for (auto f : q.out_edges(v)) {
                const long expect = node.via_edge < 0
                                        ? q.edge(q.edge(f).rev).index
                                        : raw_multiplicity(q, static_cast<std::size_t>(node.via_edge), f);
                CHECK(per_edge[static_cast<long>(f)] == expect);
            }
        }
    }
}
