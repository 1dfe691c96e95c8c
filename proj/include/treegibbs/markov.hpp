#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "treegibbs/gibbs.hpp"
#include "treegibbs/indexed_graph.hpp"

namespace treegibbs {

/// Finite window of the countable chain on quotient oriented edges. Tail states
/// are materialized to `depth`; the outward edge at the last depth sends its
/// forward mass back along its reversal, which preserves stationarity exactly.
struct MarkovChain {
    std::vector<std::string> labels;
    std::vector<std::size_t> edge_of;    // materialized edge per state (graph chains)
    std::vector<int> tail_of;            // -1 for core states
    std::vector<std::size_t> depth_of;   // ray depth for tail states
    std::vector<bool> outward;           // e_n vs ē_n for tail states
    std::vector<bool> boundary;          // rows redirected at the truncation depth
    MaterializedGraph graph;
    Eigen::MatrixXd p;
    Eigen::VectorXd pi;
    std::vector<double> mass;            // λ([s]) before normalization
    std::vector<double> edge_order;      // N(s)
    std::vector<double> potential;       // F(s)
    std::vector<double> u_plus;          // u⁺(s)
    std::vector<double> u_minus_rev;     // u⁻(s̄)
    double delta = 0;
    double window_mass = 0;              // Σ mass over the window
    double total_mass = 0;               // ‖m‖, tails summed in closed form
    double tail_mass_beyond = 0;         // normalized π-mass beyond the window
    std::size_t depth = 0;
    std::size_t tail_prefix_max = 0;     // largest tail pattern prefix
    std::size_t tail_period = 1;         // lcm of tail pattern periods

    std::size_t size() const { return labels.size(); }
    std::optional<std::size_t> find(const std::string& label) const;
    std::size_t state(const std::string& label) const;  // throws InvalidArgument
    bool is_core(std::size_t s) const { return tail_of.empty() || tail_of[s] < 0; }
    std::vector<std::size_t> successors(std::size_t s) const;
};

using StateSet = std::vector<bool>;  // indicator over chain states

StateSet make_set(const MarkovChain& mc, const std::vector<std::size_t>& states);
StateSet core_states(const MarkovChain& mc);

/// λ_F([e]) = u⁻(ē)·u⁺(e)·exp(F(e)−δ)/N(e) on a materialized graph.
std::vector<double> cylinder_masses(const MaterializedGraph& m, const GibbsData& gd);

/// ‖m‖ with the periodic part of every tail summed in closed form.
double total_cylinder_mass(const IndexedGraph& g, const GibbsData& gd);

inline constexpr double kTailMassCut = 1e-14;

MarkovChain build_chain(const IndexedGraph& g, const GibbsData& gd, std::size_t min_depth = 0);

/// Generic chain from an explicit kernel (π solved when not supplied).
MarkovChain chain_from_kernel(std::vector<std::string> labels, Eigen::MatrixXd p,
                              std::optional<Eigen::VectorXd> pi = std::nullopt);

struct MarkovReport {
    double row_residual = 0;
    double stationarity_residual = 0;
    double cylinder_residual = 0;   // graph chains only
    std::vector<double> column_residuals;
    std::size_t worst_column = 0;
    double max() const;
};

MarkovReport check_markov_property(const MarkovChain& mc, const GibbsData* gd = nullptr,
                                   const IndexedGraph* g = nullptr);

struct PeriodicClasses {
    long k = 1;
    std::vector<int> class_of;
    std::vector<std::vector<std::size_t>> classes;
    std::vector<Eigen::MatrixXd> kstep;  // P^k restricted to each class
};

PeriodicClasses periodic_classes(const MarkovChain& mc);

/// p^{(n),B}_{ij} for n = 0..n_max, all i (column j).
std::vector<Eigen::VectorXd> taboo_column(const MarkovChain& mc, const StateSet& b, std::size_t j,
                                          std::size_t n_max);
/// f^{(n),B}_{ij} for n = 0..n_max, all i (column j).
std::vector<Eigen::VectorXd> first_passage_column(const MarkovChain& mc, const StateSet& b,
                                                  std::size_t j, std::size_t n_max);

struct TabooTable {
    StateSet b;
    std::size_t horizon = 0;
    std::size_t i = 0, j = 0;
    std::vector<double> p;  // p^{(n),B}_{ij}
    std::vector<double> f;  // f^{(n),B}_{ij}
};

TabooTable taboo_probability(const MarkovChain& mc, const StateSet& b, std::size_t i, std::size_t j,
                             std::size_t n_max);
TabooTable first_passage(const MarkovChain& mc, const StateSet& b, std::size_t i, std::size_t j,
                         std::size_t n_max);

struct ConvolutionCheck {
    double first_passage_residual = 0;  // Σ_r f_ij^{(r)} p_jj^{(n-r)}, j ∉ B
    double diagonal_residual = 0;       // Σ_r f_ii^{(r)} p_ii^{(n-r)}, i ∉ B
    double literal_offdiag_residual = 0;  // Σ_r f_ii^{(r)} p_ij^{(n-r)}, i ≠ j
    std::size_t checked = 0;
};

/// Replays the renewal decompositions over every (i, j) pair and n ≤ n_max.
ConvolutionCheck convolution_check(const MarkovChain& mc, const StateSet& b, std::size_t n_max);

struct ReturnTime {
    double mean = 0;        // Σ n f_jj^{(n)}
    double mass = 0;        // Σ f_jj^{(n)}
    double tail_bound = std::numeric_limits<double>::infinity();
    double pi = 0;
    bool defective = false;
    bool resolved = false;
};

/// With `rho_t` = (ρ, t_j) of a certificate, the f-tail is bounded geometrically.
ReturnTime mean_return_time(const MarkovChain& mc, std::size_t j, std::size_t n_max,
                            std::optional<std::pair<double, double>> geometric = std::nullopt);

struct MixingFit {
    double theta = 0;
    double c = 0;
    double r2 = 0;
    std::size_t first_n = 0, last_n = 0;
    long period = 1;
    double pi_class = 0;              // class-conditioned stationary value of j
    std::vector<double> p;            // p^{(kn)}_{ij}, n = 0..n_max
    std::vector<double> diff;         // |p − π|
    std::vector<double> sup_tail;     // sup_{m ≥ n} diff_m, the fitted series
    double c_env = 0;                 // diff_n ≤ c_env θ^n for n ≤ last_n
    double second_modulus = 0;        // of the k-step kernel on the class
};

inline constexpr std::size_t kMixingSkip = 5;
inline constexpr double kMixingFloor = 1e-14;
/// Below this for every n ≥ 1 the row is stationary up to accumulated rounding.
inline constexpr double kExactCut = 1e-12;

MixingFit mixing_rate_estimate(const MarkovChain& mc, std::size_t i, std::size_t j, std::size_t n_max);

struct CovarianceSeries {
    std::vector<std::size_t> n;
    std::vector<double> cov;       // exact, via the chain formula
    std::vector<double> envelope;  // λ(a)λ(b) C θ^m / π_{b0}
    double lambda_a = 0, lambda_b = 0;
};

/// Covariance of cylinder indicators [a] and σ^{-n}[b] for in-phase n ≥ |a|.
CovarianceSeries correlation_decay(const MarkovChain& mc, const std::vector<std::size_t>& a,
                                   const std::vector<std::size_t>& b, std::size_t n_max,
                                   const MixingFit* fit = nullptr);

/// λ([w]) = π_{w0}·Π p along the word.
double word_mass(const MarkovChain& mc, const std::vector<std::size_t>& w);

struct CounterexampleSpec {
    std::function<double(long)> gamma;
    std::function<double(long)> beta;  // unnormalized weights
};

/// States -N..N and ∞ (last); p_{∞n}=β_n, p_{nn}=γ_n, p_{n∞}=1−γ_n.
MarkovChain counterexample_chain(const CounterexampleSpec& spec, long truncation);

/// Mean return time to ∞ from the closed form Σβ_n(1/(1−γ_n)+1).
double counterexample_mean_return(const CounterexampleSpec& spec, long truncation);

}  // namespace treegibbs
