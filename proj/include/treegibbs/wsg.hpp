#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "treegibbs/markov.hpp"

namespace treegibbs {

enum class Provenance { User, AnalyticTail, Search };

std::string to_string(Provenance p);

/// Weights on the periodic part of one tail: the block of depths
/// start + kL .. start + kL + L − 1 carries mu^k · block.
struct GeometricTail {
    std::size_t tail = 0;
    std::size_t start = 1;
    std::size_t period = 1;
    double mu = 1;
    std::vector<double> block;   // interleaved (e_n, ē_n) weights of block 0
    Eigen::MatrixXd a_minus, a_zero, a_plus;  // one-block transfer pieces
    double rho = 0;              // drift bound of the block recurrence

    double weight(std::size_t depth, bool outward) const;
    /// A(μ) = A₋/μ + A₀ + μA₊.
    Eigen::MatrixXd pencil(double mu) const;
};

struct DriftCertificate {
    double rho = 0;
    StateSet b;
    std::vector<double> t;  // per chain state
    std::vector<GeometricTail> tails;
    Provenance provenance = Provenance::User;
};

struct VerifyReport {
    bool pass = false;
    double max_ratio = 0;
    std::size_t worst_state = 0;
    std::vector<double> ratios;       // NaN for B and skipped rows
    std::size_t skipped_boundary = 0;
    bool symbolic_ok = true;          // periodic tail blocks
    double symbolic_max_ratio = 0;
    std::string message;
};

inline constexpr double kDriftTolerance = 1e-10;

VerifyReport verify_certificate(const MarkovChain& mc, const DriftCertificate& cert, double tol = kDriftTolerance);

/// Periodic block pieces A₋, A₀, A₊ of one tail read off the chain window (weights unset).
GeometricTail tail_blocks(const MarkovChain& mc, std::size_t tail);

/// Geometric weights on the periodic part of one tail; B = every non-periodic state.
DriftCertificate tail_certificate(const MarkovChain& mc, std::size_t tail);

/// All tails at once; ρ is the largest per-tail value.
DriftCertificate tail_certificates(const MarkovChain& mc);

struct SearchResult {
    bool found = false;
    DriftCertificate cert;
    double infimum_rho = 1.0;
    std::string method;
    std::string message;
};

inline constexpr double kWeightCap = 1e9;

/// Without `b0` a tailed chain uses the analytic tail weights with B = the non-periodic
/// states; otherwise the minimal super-solution is bisected on the finite window.
SearchResult search_certificate(const MarkovChain& mc, std::optional<StateSet> b0 = std::nullopt);

struct LemmaReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double max_slack = 0;             // max p^{(n),B}_{ij} / (t_i t_j^{-1} ρ^n)
    std::size_t return_checked = 0;
    std::size_t return_violations = 0;
    double return_max_slack = 0;      // against M t_i ρ^n
    std::size_t excluded_states = 0;  // rows that can reach the truncation within n_max steps
    std::size_t max_checked_depth = 0;
};

LemmaReport lemma_bound_check(const MarkovChain& mc, const DriftCertificate& cert, std::size_t n_max);

struct ProbeRow {
    long truncation = 0;
    double rho = 0;        // best feasible ρ_N
    double sup_gamma = 0;  // sup over satellites of γ_n
    bool lower_bound_ok = false;
    bool verified = false;
};

std::vector<ProbeRow> degradation_probe(const CounterexampleSpec& spec, const std::vector<long>& truncations);

}  // namespace treegibbs
