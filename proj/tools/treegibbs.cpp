// treegibbs <analyze|chain|wsg|mix|count|probe> --config <path> [--out <dir>] [--nmax N] [--tol X]

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "treegibbs/counting.hpp"
#include "treegibbs/errors.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/indexed_graph.hpp"
#include "treegibbs/io.hpp"
#include "treegibbs/markov.hpp"
#include "treegibbs/wsg.hpp"

namespace fs = std::filesystem;
using namespace treegibbs;
using io::json;

namespace {

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(); }

class Report {
public:
    Report(std::string command, const io::RunConfig& cfg, fs::path dir)
        : command_(std::move(command)), cfg_(cfg), dir_(std::move(dir)) {
        doc_["tool"] = io::kToolVersion;
        doc_["command"] = command_;
        doc_["config_hash"] = cfg.hash;
        doc_["config"] = cfg.resolved;
    }

    json& doc() { return doc_; }

    void normalization(const std::string& n) {
        normalization_ = n;
        doc_["normalization"] = n;
    }

    void line(const std::string& s) { summary_.push_back(s); }

    /// CSV with a provenance comment line.
    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<std::string>>& rows) {
        std::ostringstream os;
        os << "# " << io::kToolVersion << " config_hash=" << cfg_.hash;
        if (!normalization_.empty()) os << " normalization=\"" << normalization_ << "\"";
        os << "\n";
        for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
        os << "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << "\n";
        }
        files_.emplace_back(name, os.str());
        doc_["artifacts"].push_back(name);
    }

    void extra_json(const std::string& name, const json& j) {
        files_.emplace_back(name, j.dump(2) + "\n");
        doc_["artifacts"].push_back(name);
    }

    void write() {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("output directory '" + dir_.string() + "' is not writable: " + ec.message());
        std::ostringstream summary;
        summary << io::kToolVersion << " " << command_ << "\nconfig_hash " << cfg_.hash << "\n";
        if (!normalization_.empty()) summary << "normalization " << normalization_ << "\n";
        summary << "sections " << summary_.size() << "\n";
        for (const auto& s : summary_) summary << s << "\n";
        doc_["summary"] = summary_;
        files_.emplace_back(command_ + ".json", doc_.dump(2) + "\n");
        files_.emplace_back(command_ + "_summary.txt", summary.str());
        for (const auto& [name, body] : files_) {
            std::ofstream out(dir_ / name, std::ios::binary);
            if (!out) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
            out << body;
        }
        std::cout << summary.str();
    }

private:
    std::string command_;
    const io::RunConfig& cfg_;
    fs::path dir_;
    json doc_;
    std::string normalization_;
    std::vector<std::string> summary_;
    std::vector<std::pair<std::string, std::string>> files_;
};

const IndexedGraph& need_graph(const io::RunConfig& cfg) {
    if (!cfg.graph) throw ConfigError("graph: this command needs a graph");
    return *cfg.graph;
}

StateSet state_set(const MarkovChain& mc, const std::vector<std::string>& labels) {
    StateSet b(mc.size(), false);
    for (const auto& l : labels) {
        auto s = mc.find(l);
        if (!s) throw ConfigError("wsg.B: unknown chain state '" + l + "'");
        b[*s] = true;
    }
    return b;
}

std::vector<std::size_t> word(const MarkovChain& mc, const std::vector<std::string>& labels, const std::string& key) {
    std::vector<std::size_t> w;
    for (const auto& l : labels) {
        auto s = mc.find(l);
        if (!s) throw ConfigError(key + ": unknown chain state '" + l + "'");
        w.push_back(*s);
    }
    return w;
}

void analyze(const io::RunConfig& cfg, Report& rep) {
    const auto& g = need_graph(cfg);
    const auto val = validate_graph(g);
    rep.doc()["validation"] = {{"violations", val.violations}, {"warnings", val.warnings}};
    const auto gd = compute_gibbs(g, cfg.potential);
    rep.normalization(gd.normalization);
    const long k = length_spectrum_period(g);
    rep.doc()["gibbs"] = io::gibbs_to_json(gd, g);
    rep.doc()["period"] = k;
    json cusp = json::array();
    for (std::size_t t = 0; t < g.tails().size(); ++t) {
        if (!g.tails()[t].is_cuspidal()) continue;
        const TailPotential tp = t < cfg.potential.tails.size() ? cfg.potential.tails[t] : TailPotential{};
        const double b = cusp_exponent_bound(g.tails()[t], tp);
        cusp.push_back({{"tail", t}, {"bound", finite_or_null(b)}, {"margin", finite_or_null(gd.delta - b)}});
    }
    rep.doc()["cusp_bounds"] = cusp;
    rep.line("delta " + num(gd.delta));
    rep.line("delta_minus " + num(gd.delta_minus));
    rep.line("period " + std::to_string(k));
    rep.line("warnings " + std::to_string(val.warnings.size()));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t e = 0; e < g.num_edges(); ++e)
        rows.push_back({g.edge(e).id, num(gd.u_plus.core[e]), num(gd.u_minus.core[e])});
    rep.csv("shadows.csv", {"edge", "u_plus", "u_minus"}, rows);
}

void chain(const io::RunConfig& cfg, Report& rep) {
    const auto& g = need_graph(cfg);
    const auto gd = compute_gibbs(g, cfg.potential);
    rep.normalization(gd.normalization);
    const auto mc = build_chain(g, gd, cfg.depth);
    const auto mr = check_markov_property(mc, &gd, &g);
    rep.doc()["chain"] = {{"states", mc.size()},
                          {"depth", mc.depth},
                          {"delta", mc.delta},
                          {"total_mass", mc.total_mass},
                          {"tail_mass_beyond", mc.tail_mass_beyond}};
    rep.doc()["markov_report"] = {{"row_residual", mr.row_residual},
                                  {"stationarity_residual", mr.stationarity_residual},
                                  {"cylinder_residual", mr.cylinder_residual},
                                  {"worst_column", mc.labels.at(mr.worst_column)},
                                  {"pass", mr.max() <= 1e-12}};
    rep.line("states " + std::to_string(mc.size()));
    rep.line("markov_residual " + num(mr.max()));
    std::vector<std::vector<std::string>> states, trans;
    for (std::size_t s = 0; s < mc.size(); ++s) {
        states.push_back({mc.labels[s], num(mc.pi(static_cast<Eigen::Index>(s)))});
        for (auto y : mc.successors(s))
            trans.push_back({mc.labels[s], mc.labels[y],
                             num(mc.p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(y)))});
    }
    rep.csv("states.csv", {"state", "pi"}, states);
    rep.csv("transitions.csv", {"from", "to", "p"}, trans);
}

void wsg(const io::RunConfig& cfg, Report& rep) {
    const auto& g = need_graph(cfg);
    const auto gd = compute_gibbs(g, cfg.potential);
    rep.normalization(gd.normalization);
    // rows closer than lemma_n steps to the truncation are excluded from the lemma check
    const auto mc = build_chain(g, gd, std::max(cfg.depth, 2 * cfg.lemma_n));
    DriftCertificate cert;
    std::string method;
    if (cfg.certificate) {
        cert = io::certificate_from_json(*cfg.certificate, mc, "wsg.certificate");
        method = "user";
    } else {
        std::optional<StateSet> b0;
        if (cfg.wsg_b) b0 = state_set(mc, *cfg.wsg_b);
        auto res = search_certificate(mc, b0);
        if (!res.found) throw NoGeometricDrift(res.message);
        cert = res.cert;
        method = res.method;
        rep.doc()["infimum_rho"] = res.infimum_rho;
    }
    const auto vr = verify_certificate(mc, cert, cfg.tol);
    const auto lr = lemma_bound_check(mc, cert, cfg.lemma_n);
    rep.doc()["method"] = method;
    rep.doc()["verify"] = {{"pass", vr.pass},
                           {"max_ratio", vr.max_ratio},
                           {"worst_state", mc.labels.at(vr.worst_state)},
                           {"symbolic_ok", vr.symbolic_ok},
                           {"symbolic_max_ratio", vr.symbolic_max_ratio},
                           {"skipped_boundary", vr.skipped_boundary},
                           {"message", vr.message}};
    rep.doc()["lemma"] = {{"n_max", cfg.lemma_n},
                          {"checked", lr.checked},
                          {"violations", lr.violations},
                          {"max_slack", lr.max_slack},
                          {"return_checked", lr.return_checked},
                          {"return_violations", lr.return_violations},
                          {"excluded_states", lr.excluded_states}};
    rep.extra_json("certificate.json", io::certificate_to_json(mc, cert));
    rep.line("rho " + num(cert.rho));
    rep.line("verified " + std::string(vr.pass ? "yes" : "no"));
    rep.line("lemma_violations " + std::to_string(lr.violations));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t s = 0; s < mc.size(); ++s)
        rows.push_back({mc.labels[s], cert.b[s] ? "1" : "0", num(cert.t[s]), num(vr.ratios.at(s))});
    rep.csv("verify.csv", {"state", "in_B", "t", "drift_ratio"}, rows);
    if (!vr.pass) throw NoGeometricDrift("certificate fails verification: " + vr.message);
}

void mix(const io::RunConfig& cfg, Report& rep) {
    const auto& g = need_graph(cfg);
    const auto gd = compute_gibbs(g, cfg.potential);
    rep.normalization(gd.normalization);
    const auto mc = build_chain(g, gd, cfg.depth);
    const std::size_t i = cfg.mix_i ? mc.state(*cfg.mix_i) : 0;
    const std::size_t j = cfg.mix_j ? mc.state(*cfg.mix_j) : i;
    const auto fit = mixing_rate_estimate(mc, i, j, cfg.n_max);
    rep.doc()["mixing"] = {{"i", mc.labels[i]},
                           {"j", mc.labels[j]},
                           {"period", fit.period},
                           {"theta", fit.theta},
                           {"c", fit.c},
                           {"c_env", fit.c_env},
                           {"r2", fit.r2},
                           {"first_n", fit.first_n},
                           {"last_n", fit.last_n},
                           {"second_modulus", fit.second_modulus},
                           {"pi_class", fit.pi_class}};
    rep.line("theta " + num(fit.theta));
    rep.line("r2 " + num(fit.r2));
    rep.line("second_modulus " + num(fit.second_modulus));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t n = 0; n < fit.p.size(); ++n)
        rows.push_back({std::to_string(n), num(fit.p[n]), num(fit.pi_class), num(fit.diff[n]),
                        num(fit.c_env * std::pow(fit.theta, static_cast<double>(n)))});
    rep.csv("mixing.csv", {"n", "p_ij", "pi_j", "abs_diff", "envelope"}, rows);

    // first passage into j (B = {j})
    StateSet b(mc.size(), false);
    if (cfg.wsg_b) b = state_set(mc, *cfg.wsg_b);
    else b[j] = true;
    const auto tt = first_passage(mc, b, i, j, cfg.n_max);
    json bl = json::array();
    for (std::size_t s = 0; s < mc.size(); ++s)
        if (b[s]) bl.push_back(mc.labels[s]);
    rep.extra_json("taboo.json", {{"B", bl},
                                  {"horizon", tt.horizon},
                                  {"i", mc.labels[i]},
                                  {"j", mc.labels[j]},
                                  {"p", tt.p},
                                  {"f", tt.f},
                                  {"input_hash", cfg.hash}});
    if (!cfg.word_a.empty() && !cfg.word_b.empty()) {
        const auto a = word(mc, cfg.word_a, "mix.a"), bw = word(mc, cfg.word_b, "mix.b");
        const auto fa = mixing_rate_estimate(mc, bw.front(), bw.front(), cfg.n_max);
        const auto cs = correlation_decay(mc, a, bw, cfg.n_max, &fa);
        std::vector<std::vector<std::string>> crow;
        for (std::size_t k = 0; k < cs.n.size(); ++k)
            crow.push_back({std::to_string(cs.n[k]), num(cs.cov[k]), num(cs.envelope[k])});
        rep.csv("covariance.csv", {"n", "cov", "envelope"}, crow);
        rep.line("covariance_rows " + std::to_string(cs.n.size()));
    }
}

void count(const io::RunConfig& cfg, Report& rep, std::optional<std::size_t> nmax_flag) {
    const auto& g = need_graph(cfg);
    const auto gd = compute_gibbs(g, cfg.potential);
    rep.normalization(gd.normalization);
    const std::size_t hi = nmax_flag.value_or(cfg.count_hi);
    const std::size_t lo = std::min(cfg.count_lo, hi);
    const auto cr = error_decay_report(g, gd, lo, hi);
    json cstar = {{"value", cr.cstar.value}, {"method", cr.cstar.method}};
    if (cr.cstar.exact) cstar["exact"] = cr.cstar.exact->str();
    rep.doc()["count"] = {{"qd", cr.params.qd},
                          {"qdp", cr.params.qdp},
                          {"delta", cr.delta},
                          {"m_mass", cr.m_mass},
                          {"cstar", cstar},
                          {"const57", cr.constants.const57},
                          {"const58", cr.constants.const58},
                          {"const_ratio", cr.const_ratio},
                          {"literal_over_cstar", cr.literal_over_cstar},
                          {"kappa_hat", cr.kappa_hat},
                          {"ratio57_variation", cr.ratio57_variation},
                          {"ratio58_variation", cr.ratio58_variation}};
    rep.line("cstar " + num(cr.cstar.value) + (cr.cstar.exact ? " (exact " + cr.cstar.exact->str() + ")" : ""));
    rep.line("const_ratio " + num(cr.const_ratio));
    rep.line("kappa_hat " + num(cr.kappa_hat));
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : cr.rows)
        rows.push_back({std::to_string(r.n), num(r.oracle), num(r.main57), num(r.main58), num(r.cstar_term),
                        num(r.residual), num(r.ratio57), num(r.ratio58)});
    rep.csv("count.csv", {"n", "oracle", "main57", "main58", "cstar_term", "residual", "ratio57", "ratio58"}, rows);
}

void probe(const io::RunConfig& cfg, Report& rep) {
    const io::ProbeConfig pc = cfg.probe.value_or(io::ProbeConfig{});
    const auto rows = degradation_probe(pc.spec(), pc.truncations);
    json arr = json::array();
    std::vector<std::vector<std::string>> csv;
    for (const auto& r : rows) {
        arr.push_back({{"truncation", r.truncation},
                       {"rho", r.rho},
                       {"sup_gamma", r.sup_gamma},
                       {"lower_bound_ok", r.lower_bound_ok},
                       {"verified", r.verified}});
        csv.push_back({std::to_string(r.truncation), num(r.rho), num(r.sup_gamma), r.lower_bound_ok ? "1" : "0",
                       r.verified ? "1" : "0"});
        rep.line("N=" + std::to_string(r.truncation) + " rho " + num(r.rho));
    }
    rep.doc()["probe"] = arr;
    rep.csv("probe.csv", {"truncation", "rho", "sup_gamma", "lower_bound_ok", "verified"}, csv);
}

int exit_code(const Error& e) {
    switch (e.error_class()) {
        case ErrorClass::Config: return 2;
        case ErrorClass::Numeric: return 3;
        case ErrorClass::Resource: return 4;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gibbs data, Markov chains, drift certificates and orbit counts for edge-indexed graphs"};
    app.require_subcommand(1);
    std::string config, out;
    std::optional<std::size_t> nmax;
    std::optional<double> tol;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"analyze", "validate the graph, critical exponent, shadows, period"},
        {"chain", "build the Markov chain and check the Markov property"},
        {"wsg", "verify or search drift certificates"},
        {"mix", "first-passage tables, mixing fit, covariance series"},
        {"count", "orbit counts, main terms and error decay"},
        {"probe", "degradation probe on the star chain"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "config file")->required();
        sub->add_option("--out", out, "output directory");
        sub->add_option("--nmax", nmax, "horizon");
        sub->add_option("--tol", tol, "tolerance");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        auto cfg = io::parse_config(config);
        if (nmax) {
            if (*nmax < 1 || *nmax > io::kMaxHorizon) throw ConfigError("--nmax: must lie in [1, 10000]");
            cfg.n_max = *nmax;
        }
        if (tol) {
            if (!(*tol > 0)) throw ConfigError("--tol: must be positive");
            cfg.tol = *tol;
        }
        io::rehash(cfg);
        fs::path dir = !out.empty() ? fs::path(out) : !cfg.out_dir.empty() ? fs::path(cfg.out_dir) : fs::path("out");
        Report rep(command, cfg, dir);
        try {
            if (command == "analyze") analyze(cfg, rep);
            else if (command == "chain") chain(cfg, rep);
            else if (command == "wsg") wsg(cfg, rep);
            else if (command == "mix") mix(cfg, rep);
            else if (command == "count") count(cfg, rep, nmax);
            else probe(cfg, rep);
        } catch (const Error& e) {
            rep.doc()["error"] = {{"kind", e.kind()}, {"message", e.what()}};
            rep.write();
            throw;
        }
        rep.write();
        return 0;
    } catch (const Error& e) {
        std::cerr << "treegibbs " << command << ": " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "treegibbs " << command << ": internal error: " << e.what() << "\n";
        return 1;
    }
}
