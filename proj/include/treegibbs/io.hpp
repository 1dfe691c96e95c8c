#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treegibbs/gibbs.hpp"
#include "treegibbs/indexed_graph.hpp"
#include "treegibbs/markov.hpp"
#include "treegibbs/wsg.hpp"

namespace treegibbs::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "treegibbs 0.1.0";

json load_json(const std::string& path);

/// `where` prefixes field paths in error messages ("graph." etc).
IndexedGraph graph_from_json(const json& j, const std::string& where = "");
json graph_to_json(const IndexedGraph& g);

Potential potential_from_json(const json& j, const IndexedGraph& g, const std::string& where = "");
json potential_to_json(const Potential& f, const IndexedGraph& g);

json gibbs_to_json(const GibbsData& gd, const IndexedGraph& g);

json certificate_to_json(const MarkovChain& mc, const DriftCertificate& cert);
/// Core weights by state label; geometric tails filled from their block weights.
DriftCertificate certificate_from_json(const json& j, const MarkovChain& mc, const std::string& where = "");

struct ProbeConfig {
    std::string gamma_form = "harmonic";  // γ_n = 1 − 1/(1+|n|)
    double gamma_value = 0.5;             // for "constant"
    std::string beta_form = "geometric";  // β_n ∝ ratio^{|n|}
    double beta_ratio = 0.5;
    std::vector<long> truncations{10, 20, 40, 80};

    CounterexampleSpec spec() const;
};

ProbeConfig probe_from_json(const json& j, const std::string& where = "");
json probe_to_json(const ProbeConfig& p);

/// 64-bit FNV-1a, hex.
std::string fnv1a_hex(const std::string& bytes);

struct RunConfig {
    std::optional<IndexedGraph> graph;
    Potential potential;
    bool potential_given = false;
    double tol = 1e-10;
    std::size_t n_max = 40;
    std::size_t radius = 4;
    std::size_t depth = 0;  // minimum chain window depth
    std::string out_dir;

    std::optional<std::string> mix_i, mix_j;
    std::vector<std::string> word_a, word_b;

    std::optional<std::vector<std::string>> wsg_b;
    std::optional<json> certificate;
    std::size_t lemma_n = 60;

    std::size_t count_lo = 10, count_hi = 25;

    std::optional<ProbeConfig> probe;

    json resolved;     // canonical form of everything above
    std::string hash;  // fnv1a of resolved.dump()
};

/// Recomputes `resolved` and `hash` after fields were overridden.
void rehash(RunConfig& c);

inline constexpr std::size_t kMaxHorizon = 10000;
inline constexpr std::size_t kMaxRadius = 12;

/// Accepts a run config ({"graph": ...}) or a bare graph file (minimal config).
/// Relative paths inside the file resolve against its directory.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_json(const json& j, const std::string& base_dir = ".");

}  // namespace treegibbs::io
