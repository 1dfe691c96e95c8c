#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "treegibbs/gibbs.hpp"
#include "treegibbs/indexed_graph.hpp"

namespace treegibbs {

using Integer = boost::multiprecision::cpp_int;

/// Cover is (qd+1, qdp+1)-biregular with the base vertex of degree qd+1.
struct BiregularParams {
    long qd = 2;
    long qdp = 2;
};

/// Reads the parameters off a tail-free graph; InvalidArgument if the cover is not biregular.
BiregularParams biregular_params(const IndexedGraph& g, std::size_t base);

/// Δ(2j): vertices at distance 2j from a degree-(qd+1) vertex.
Integer sphere_size(const BiregularParams& p, std::size_t j);

/// (1 + ((qd+1)/qd)·e^{2δ}(e^{2δR}−1)/(e^{2δ}−1)) / m_mass.
double mgamma_ball_measure(const BiregularParams& p, double delta, std::size_t r, double m_mass);

struct OrbitCounts {
    std::vector<std::vector<Integer>> lifts;  // [n][materialized vertex]: cover vertices at distance n
    std::vector<double> sphere;               // N(base)·(weighted base-labelled lifts at distance n)
    std::vector<double> cumulative;           // N_x(n)
    std::vector<Rational> exact_sphere;       // F ≡ 0 only
    std::vector<Rational> exact_cumulative;
    bool exact = false;
    std::size_t base = 0;                     // materialized index of the base vertex
    MaterializedGraph graph;
};

inline constexpr std::size_t kOracleMaxLength = 20000;

/// Weighted orbit counts by dynamic programming over (current edge, length).
/// `first_path`, when nonempty, restricts to paths beginning with that edge path
/// (the shadow set of its last edge seen from the base).
OrbitCounts orbit_oracle(const IndexedGraph& g, const Potential& f, std::size_t base, std::size_t n_max,
                         const std::vector<std::size_t>& first_path = {});

/// sphere[n] of `orbit_oracle`, n = 0..n_max.
std::vector<double> orbit_weights(const IndexedGraph& g, const Potential& f, std::size_t base, std::size_t n_max);

/// ν_base of the shadow cast by one cover lift of the path (first edge fixed, later
/// edges summed over their lifts).
double shadow_measure(const GibbsData& gd, const IndexedGraph& g, std::size_t base,
                      const std::vector<std::size_t>& edge_path);

struct MainTerms {
    double main57 = 0;   // with ν_x(Ω)
    double main58 = 0;
    double const57 = 0;  // coefficient of e^{2δn}
    double const58 = 0;
};

/// Paper-literal main terms of the ball-count corollaries; ‖ν±‖ = 1 by the GibbsData normalization.
MainTerms main_term(const BiregularParams& p, const GibbsData& gd, const Rational& base_order, double m_mass,
                    std::size_t n, double omega_mass = 1.0);

struct RenewalConstant {
    double value = 0;
    std::optional<Rational> exact;
    std::optional<Rational> lambda;  // e^{2δ} in exact mode
    std::string method;
};

/// C* = lim N_x(2n) e^{-2nδ}. `exact` requests rational arithmetic (F ≡ 0, tail-free).
RenewalConstant renewal_constant(const IndexedGraph& g, const Potential& f, std::size_t base, double delta,
                                 bool exact = false);

enum class VertexFamily { Ball, Path };

struct BoundaryRow {
    std::size_t r = 0;
    long long set_size = 0;
    long long boundary_size = 0;
    double ratio = 0;
    bool meets_criterion = false;  // ratio ≤ r^{-β}
};

std::vector<BoundaryRow> boundary_ratio(const IndexedGraph& g, std::size_t base, VertexFamily family,
                                        const std::vector<std::size_t>& radii, double beta = 1.0);

struct CountRow {
    std::size_t n = 0;
    double oracle = 0;      // N_x(2n)
    double main57 = 0;
    double main58 = 0;
    double cstar_term = 0;  // C*·e^{2δn}
    double residual = 0;    // oracle − C*·e^{2δn}
    double ratio57 = 0;     // main57 / oracle
    double ratio58 = 0;
};

struct CountReport {
    BiregularParams params;
    double delta = 0;
    double m_mass = 0;
    RenewalConstant cstar;
    MainTerms constants;
    double const_ratio = 0;        // const57 / const58
    double literal_over_cstar = 0;   // const58 / C*
    std::vector<CountRow> rows;
    double kappa_hat = 0;
    double ratio57_variation = 0;  // max/min − 1 over the rows
    double ratio58_variation = 0;
    std::string normalization;
};

CountReport error_decay_report(const IndexedGraph& g, const GibbsData& gd, std::size_t n_lo, std::size_t n_hi);

}  // namespace treegibbs
