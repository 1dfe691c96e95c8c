#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace treegibbs {

using Rational = boost::multiprecision::cpp_rational;

struct Edge {
    std::string id;
    std::size_t rev = 0;
    std::size_t from = 0;
    std::size_t to = 0;
    long index = 1;  // i(e)
};

/// Index data (i(e_n), i(ē_n)) of one ray edge.
struct IndexPair {
    long ie = 1;
    long irev = 1;
    bool operator==(const IndexPair&) const = default;
};

/// Eventually periodic ray hanging off a core vertex. Ray edges are e_1, e_2, ...
/// with e_1 leaving the attach vertex.
struct TailSpec {
    std::size_t attach = 0;
    std::vector<IndexPair> prefix;
    std::vector<IndexPair> period;

    /// Index pair of e_n, n >= 1.
    IndexPair at(std::size_t n) const;
    bool is_cuspidal() const;  // i(ē_n) = 1 throughout
};

/// A funnel is entered through `entry_edge`; interior vertices at funnel depth d
/// have branching[d mod size] children in the cover.
struct FunnelSpec {
    std::size_t entry_edge = 0;
    std::vector<long> branching;
};

struct OrderSpec {
    std::size_t base_vertex = 0;
    Rational base_value = 1;
};

/// Quotient edge-indexed graph: a finite core plus ray tails and funnel markers.
/// Edge indices refer to core edges only; tails are expanded by `materialize`.
class IndexedGraph {
public:
    IndexedGraph() = default;
    IndexedGraph(std::vector<std::string> vertices, std::vector<Edge> edges,
                 std::vector<TailSpec> tails = {}, std::vector<FunnelSpec> funnels = {},
                 OrderSpec orders = {});

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    const std::string& vertex_name(std::size_t v) const { return vertices_.at(v); }
    const std::vector<std::string>& vertex_names() const { return vertices_; }
    const Edge& edge(std::size_t e) const { return edges_.at(e); }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<TailSpec>& tails() const { return tails_; }
    const std::vector<FunnelSpec>& funnels() const { return funnels_; }
    const OrderSpec& orders() const { return orders_; }

    /// Core edges with from == v, in id order.
    const std::vector<std::size_t>& out_edges(std::size_t v) const { return out_.at(v); }
    std::vector<std::size_t> tails_at(std::size_t v) const;

    std::optional<std::size_t> find_vertex(const std::string& name) const;
    std::optional<std::size_t> find_edge(const std::string& id) const;
    std::size_t vertex_index(const std::string& name) const;  // throws InvalidArgument
    std::size_t edge_index(const std::string& id) const;      // throws InvalidArgument

    /// True for a funnel entry edge or its reversal.
    bool is_funnel_edge(std::size_t e) const;
    const FunnelSpec* funnel_entered_by(std::size_t e) const;

    bool has_tails() const { return !tails_.empty(); }

private:
    std::vector<std::string> vertices_;
    std::vector<Edge> edges_;
    std::vector<TailSpec> tails_;
    std::vector<FunnelSpec> funnels_;
    OrderSpec orders_;
    std::vector<std::vector<std::size_t>> out_;
    std::map<std::string, std::size_t> vertex_lookup_;
    std::map<std::string, std::size_t> edge_lookup_;
};

struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;  // e.g. core vertices of lift-degree 1
    bool ok() const { return violations.empty(); }
};

/// Where a materialized edge came from.
struct EdgeOrigin {
    int tail = -1;          // -1 for core edges
    std::size_t depth = 0;  // n for e_n / ē_n
    bool outward = true;    // e_n (away from the core) vs ē_n
};

/// Finite graph with every tail expanded to a fixed depth. The last ray vertex
/// of each tail is missing its outward edge; it is listed in `truncated`.
struct MaterializedGraph {
    IndexedGraph graph;
    std::vector<EdgeOrigin> origin;          // per materialized edge
    std::vector<std::size_t> core_edge_map;  // core edge -> materialized edge
    std::vector<std::vector<std::size_t>> tail_edges;  // [tail][2(n-1)+{0,1}] -> e_n, ē_n
    std::vector<std::size_t> truncated;      // truncated end vertices
    std::size_t depth = 0;
};

ValidationReport validate_graph(const IndexedGraph& g);

/// Throws ConfigError listing violations when validation fails.
void require_valid(const IndexedGraph& g);

/// m(e,f): lifts of f continuing a fixed lift of e without backtracking.
long edge_multiplicity(const IndexedGraph& g, std::size_t e, std::size_t f);

/// Degree of any lift of `a` in the universal cover (tails included).
long lift_degree(const IndexedGraph& g, std::size_t a);

MaterializedGraph materialize(const IndexedGraph& g, std::size_t depth);

struct OrderGrading {
    std::vector<Rational> vertex_order;
    std::vector<Rational> edge_order;
};

/// N(∂0e) = N(∂1e)·i(ē)/i(e) along a spanning tree; NonUnimodular on inconsistent cycles.
OrderGrading propagate_orders(const IndexedGraph& g, std::size_t base_vertex,
                              const Rational& base_value);
/// Uses the graph's own OrderSpec.
OrderGrading propagate_orders(const IndexedGraph& g);

/// gcd of closed non-backtracking path lengths with positive multiplicity.
long length_spectrum_period(const IndexedGraph& g);

struct CoverNode {
    long parent = -1;
    long label = -1;         // quotient vertex (materialized index), -1 inside a funnel
    long via_edge = -1;      // quotient edge from the parent, -1 at the root / in funnels
    std::size_t dist = 0;
    int funnel = -1;         // funnel index when inside a funnel interior
    std::size_t funnel_depth = 0;
};

struct CoverBall {
    MaterializedGraph quotient;
    std::size_t base = 0;  // materialized index of the root label
    std::size_t radius = 0;
    std::vector<CoverNode> nodes;

    /// counts[n][v]: cover vertices at distance n with quotient label v.
    std::vector<std::vector<long long>> label_counts() const;
    /// Children per node, computed from parent links.
    std::vector<std::vector<std::size_t>> children() const;
};

inline constexpr std::size_t kCoverGuard = 10'000'000;

CoverBall build_cover_ball(const IndexedGraph& g, std::size_t base, std::size_t radius,
                           std::size_t guard = kCoverGuard);

}  // namespace treegibbs
