#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "treegibbs/indexed_graph.hpp"

namespace treegibbs {

/// Per-tail potential values [F(e_n), F(ē_n)], eventually periodic.
struct TailPotential {
    std::vector<std::pair<double, double>> prefix;
    std::vector<std::pair<double, double>> period;
};

/// Real weight per quotient oriented edge. Missing entries read as zero.
struct Potential {
    std::vector<double> edge_values;     // per core edge
    std::vector<TailPotential> tails;    // per tail

    double core(std::size_t e) const;
    std::pair<double, double> tail(std::size_t t, std::size_t n) const;
    std::size_t tail_prefix_len(std::size_t t) const;
    std::size_t tail_period_len(std::size_t t) const;

    /// F⁻(e) = F(ē).
    Potential reversed(const IndexedGraph& g) const;
    Potential shifted(double c, const IndexedGraph& g) const;
    bool is_zero() const;
    /// Values on every edge of a materialized graph.
    std::vector<double> on(const MaterializedGraph& m) const;
};

/// One ray step: indices and potential values of e_n and ē_n.
struct TailStep {
    long ie = 1, irev = 1;
    double fe = 0, frev = 0;
};

/// Joint eventual periodicity of a tail's indices and potential.
struct TailPattern {
    std::size_t prefix = 0;
    std::size_t period = 1;
    std::vector<TailStep> steps;  // positions 1..prefix+period
    TailStep at(std::size_t n) const;
};

TailPattern tail_pattern(const IndexedGraph& g, const Potential& f, std::size_t t);

/// Analytic shadow values on a tail: x_n = (u(e_n), u(ē_n)).
struct TailShadow {
    std::size_t prefix = 0;
    std::size_t period = 1;
    std::vector<std::array<double, 2>> head;   // x_1 .. x_{prefix+period}
    double lambda = 0;                          // x_{n+period} = lambda·x_n past the prefix
    std::array<double, 2> at(std::size_t n) const;
};

struct ShadowVector {
    std::vector<double> core;          // per core edge
    std::vector<TailShadow> tails;
    double residual = 0;               // sup-norm of the fixed-point residual
    double value(const MaterializedGraph& m, std::size_t e) const;
    std::vector<double> on(const MaterializedGraph& m) const;
};

enum class Direction { Forward, Backward };

struct TransferMatrix {
    MaterializedGraph graph;
    Eigen::MatrixXd t;
};

/// T(s)[e,f] = m(e,f)·exp(F(f) − s) on core edges plus tails truncated at `tail_depth`.
TransferMatrix transfer_matrix(const IndexedGraph& g, const Potential& f, double s,
                               std::size_t tail_depth = 32);

struct ExponentReport {
    double delta = 0;
    double tail_critical = -std::numeric_limits<double>::infinity();
    double truncated_delta = std::numeric_limits<double>::quiet_NaN();  // tails only
    std::string method;
    std::size_t iterations = 0;
};

ExponentReport critical_exponent_report(const IndexedGraph& g, const Potential& f);
double critical_exponent(const IndexedGraph& g, const Potential& f);

/// Effective core matrix at s: core edges plus (e_1, ē_1) per tail, with the tail
/// resummed into u(e_1) = κ(s)·u(ē_1). Throws Diverges when s is below a tail's
/// own critical value.
Eigen::MatrixXd effective_matrix(const IndexedGraph& g, const Potential& f, double s);

/// Normalized fixed vector of the shadow equation; `f` is the forward potential
/// (the backward direction uses F⁻ internally).
ShadowVector shadow_vector(const IndexedGraph& g, const Potential& f, double delta,
                           Direction dir);

struct GibbsData {
    double delta = 0;        // δ_{Γ,F}
    double delta_minus = 0;  // exponent of F⁻ (must agree)
    double delta_zero = 0;   // δ_{Γ,0}
    ShadowVector u_plus, u_minus;
    Potential potential;
    std::size_t base_vertex = 0;
    std::string normalization;  // text record of the scaling convention
    ExponentReport exponent;
};

inline constexpr double kExponentAgreement = 1e-9;

GibbsData compute_gibbs(const IndexedGraph& g, const Potential& f);

struct CocycleValue {
    double plain = 0;       // C_F
    double normalized = 0;  // C_{F-δ} = C_F + δ·β
    long busemann = 0;      // β = d(x,v) − d(y,v)
};

/// Paths are quotient edge sequences from x (resp. y) to a common vertex v.
CocycleValue gibbs_cocycle(const IndexedGraph& g, const Potential& f, double delta,
                           std::size_t x, const std::vector<std::size_t>& path_x_to_v,
                           std::size_t y, const std::vector<std::size_t>& path_y_to_v);

/// Σ_{n ≤ n_max} (orbit weight at distance n)·e^{−sn}.
double poincare_partial_sum(const IndexedGraph& g, const Potential& f, double s, std::size_t n_max,
                            std::size_t base);

/// ½·log limsup c_n^{1/n} for a cuspidal ray; −∞ when no branching recurs.
double cusp_exponent_bound(const TailSpec& ray, const TailPotential& potential = {});

}  // namespace treegibbs
