#include "treegibbs/wsg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include <Eigen/Sparse>

#include "treegibbs/errors.hpp"
#include "treegibbs/numerics.hpp"

namespace treegibbs {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::User: return "user";
        case Provenance::AnalyticTail: return "analytic-tail";
        case Provenance::Search: return "search";
    }
    return "user";
}

double GeometricTail::weight(std::size_t depth, bool outward) const {
    if (depth < start) throw InvalidArgument("depth lies before the periodic part of the tail");
    const std::size_t k = (depth - start) / period, j = (depth - start) % period;
    return std::pow(mu, static_cast<double>(k)) * block.at(2 * j + (outward ? 0 : 1));
}

Eigen::MatrixXd GeometricTail::pencil(double m) const { return a_minus / m + a_zero + a_plus * m; }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Chain state of (tail, depth, outward), or -1.
std::map<std::tuple<int, std::size_t, bool>, std::size_t> tail_index(const MarkovChain& mc) {
    std::map<std::tuple<int, std::size_t, bool>, std::size_t> idx;
    for (std::size_t s = 0; s < mc.size(); ++s)
        if (!mc.is_core(s)) idx[{mc.tail_of[s], mc.depth_of[s], static_cast<bool>(mc.outward[s])}] = s;
    return idx;
}

bool periodic_state(const MarkovChain& mc, std::size_t s, std::size_t start) {
    return !mc.is_core(s) && mc.depth_of[s] >= start && !mc.boundary[s];
}

}  // namespace

GeometricTail tail_blocks(const MarkovChain& mc, std::size_t tail) {
    if (mc.tail_of.empty() || std::none_of(mc.tail_of.begin(), mc.tail_of.end(),
                                           [&](int t) { return t == static_cast<int>(tail); }))
        throw InvalidArgument("chain has no tail " + std::to_string(tail));
    GeometricTail gt;
    gt.tail = tail;
    gt.start = mc.tail_prefix_max + 1;
    gt.period = mc.tail_period;
    const std::size_t l = gt.period, start = gt.start;
    if (mc.depth < start + 3 * l) throw InvalidArgument("chain window too shallow for a tail certificate");
    const auto idx = tail_index(mc);
    const auto n2 = static_cast<Eigen::Index>(2 * l);
    gt.a_minus = gt.a_zero = gt.a_plus = Eigen::MatrixXd::Zero(n2, n2);
    for (std::size_t j = 0; j < l; ++j)
        for (int o = 0; o < 2; ++o) {
            auto it = idx.find({static_cast<int>(tail), start + l + j, o == 0});
            if (it == idx.end()) throw NoGeometricDrift("tail state missing from the chain window");
            const std::size_t x = it->second;
            const auto row = static_cast<Eigen::Index>(2 * j + static_cast<std::size_t>(o));
            for (auto y : mc.successors(x)) {
                const double p = mc.p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                if (mc.is_core(y) || mc.tail_of[y] != static_cast<int>(tail) || mc.depth_of[y] < start)
                    throw NoGeometricDrift("tail transition leaves the periodic part");
                const std::size_t ky = (mc.depth_of[y] - start) / l, jy = (mc.depth_of[y] - start) % l;
                const auto col = static_cast<Eigen::Index>(2 * jy + (mc.outward[y] ? 0 : 1));
                if (ky == 0) gt.a_minus(row, col) += p;
                else if (ky == 1) gt.a_zero(row, col) += p;
                else gt.a_plus(row, col) += p;
            }
        }
    return gt;
}

namespace {

GeometricTail solve_geometric_tail(const MarkovChain& mc, std::size_t tail) {
    GeometricTail gt = tail_blocks(mc, tail);
    const auto n2 = gt.a_zero.rows();
    // ρ(A(μ)) is log-convex in log μ; golden-section search
    auto rho_at = [&](double lm) { return eigen_moduli(gt.pencil(std::exp(lm))).front(); };
    double a = -12, b = 12;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = rho_at(c), fd = rho_at(d);
    for (int it = 0; it < 200 && b - a > 1e-10; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = rho_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = rho_at(d);
        }
    }
    const double lm = 0.5 * (a + b);
    gt.mu = std::exp(lm);
    const double rho_min = rho_at(lm);
    if (!(rho_min < 1.0 - 1e-12))
        throw NoGeometricDrift("periodic block recurrence has drift ratio " + std::to_string(rho_min) +
                               " >= 1 for every growth factor");
    // Reducible pencils (inward states never reach outward ones) are defective where the
    // class roots cross, so the computed modulus is only good to ~sqrt(eps); widen the margin
    // until the resolvent weights actually satisfy A v <= rho v.
    const Eigen::MatrixXd am = gt.pencil(gt.mu);
    for (double margin = 1e-9; margin < 1e-4; margin *= 10) {
        gt.rho = rho_min + margin;
        if (!(gt.rho < 1.0)) break;
        const Eigen::VectorXd v =
            (gt.rho * Eigen::MatrixXd::Identity(n2, n2) - am).fullPivLu().solve(Eigen::VectorXd::Ones(n2));
        if (!(v.minCoeff() > 0)) continue;
        if (((am * v).array() > gt.rho * v.array()).any()) continue;
        gt.block.assign(v.data(), v.data() + v.size());
        return gt;
    }
    throw NoGeometricDrift("block weights are not positive near the optimal growth factor");
}

// Writes tail weights into `cert` and tightens B weights reached from the first block.
void apply_tail(const MarkovChain& mc, const GeometricTail& gt, std::vector<double>& t) {
    for (std::size_t s = 0; s < mc.size(); ++s) {
        if (mc.is_core(s) || mc.tail_of[s] != static_cast<int>(gt.tail) || mc.depth_of[s] < gt.start) continue;
        const double w = gt.weight(mc.depth_of[s], mc.outward[s]);
        if (!std::isfinite(w)) throw ResourceLimit("tail weight overflows at depth " + std::to_string(mc.depth_of[s]));
        t[s] = w;
    }
    const auto idx = tail_index(mc);
    for (std::size_t j = 0; j < gt.period; ++j)
        for (int o = 0; o < 2; ++o) {
            auto it = idx.find({static_cast<int>(gt.tail), gt.start + j, o == 0});
            if (it == idx.end()) continue;
            const std::size_t x = it->second;
            const auto row = static_cast<Eigen::Index>(2 * j + static_cast<std::size_t>(o));
            double virt = 0;
            for (Eigen::Index c = 0; c < gt.a_minus.cols(); ++c)
                virt += gt.a_minus(row, c) * gt.block[static_cast<std::size_t>(c)] / gt.mu;
            double q = 0;
            std::vector<std::size_t> outside;
            for (auto z : mc.successors(x)) {
                if (!mc.is_core(z) && mc.tail_of[z] == static_cast<int>(gt.tail) && mc.depth_of[z] >= gt.start)
                    continue;
                q += mc.p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z));
                outside.push_back(z);
            }
            for (auto z : outside) t[z] = std::min(t[z], virt / q);
        }
}

DriftCertificate assemble(const MarkovChain& mc, const std::vector<GeometricTail>& tails) {
    DriftCertificate cert;
    cert.provenance = Provenance::AnalyticTail;
    cert.t.assign(mc.size(), kInf);
    cert.b.assign(mc.size(), true);
    for (const auto& gt : tails) {
        cert.rho = std::max(cert.rho, gt.rho);
        for (std::size_t s = 0; s < mc.size(); ++s)
            if (!mc.is_core(s) && mc.tail_of[s] == static_cast<int>(gt.tail) && periodic_state(mc, s, gt.start))
                cert.b[s] = false;
    }
    for (const auto& gt : tails) apply_tail(mc, gt, cert.t);
    for (auto& w : cert.t)
        if (w == kInf) w = 1.0;
    cert.tails = tails;
    return cert;
}

struct SparseRows {
    std::vector<std::vector<std::pair<std::size_t, double>>> off;
    std::vector<double> diag;
};

SparseRows sparse_rows(const MarkovChain& mc) {
    SparseRows r;
    r.off.resize(mc.size());
    r.diag.assign(mc.size(), 0.0);
    for (std::size_t i = 0; i < mc.size(); ++i)
        for (auto j : mc.successors(i)) {
            const double p = mc.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (i == j) r.diag[i] = p;
            else r.off[i].push_back({j, p});
        }
    return r;
}

// Minimal super-solution of t_i ≥ ρ⁻¹ Σ_j p_ij t_j off B with t = 1 on B, by Gauss–Seidel
// sweeps that solve each self-loop exactly. False when the weights pass the cap.
bool minimal_supersolution(const SparseRows& rows, const StateSet& b, double rho, std::vector<double>& t) {
    const std::size_t n = rows.diag.size();
    t.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (b[i]) t[i] = 1.0;
    constexpr std::size_t kSweeps = 200000;
    for (std::size_t sweep = 0; sweep < kSweeps; ++sweep) {
        double change = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (b[i]) continue;
            if (rows.diag[i] >= rho) return false;
            double s = 0;
            for (auto [j, p] : rows.off[i]) s += p * t[j];
            const double v = s / (rho - rows.diag[i]);
            if (v > kWeightCap) return false;
            if (v > 0) change = std::max(change, std::abs(v - t[i]) / v);
            t[i] = v;
        }
        if (change < 1e-15) {
            for (std::size_t i = 0; i < n; ++i)
                if (!b[i] && !(t[i] > 0)) return false;
            return true;
        }
    }
    return false;
}

std::vector<std::size_t> distance_to_boundary(const MarkovChain& mc) {
    const std::size_t n = mc.size();
    std::vector<std::size_t> dist(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::vector<std::size_t>> pred(n);
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : mc.successors(i)) pred[j].push_back(i);
    std::deque<std::size_t> q;
    for (std::size_t i = 0; i < n; ++i)
        if (mc.boundary[i]) {
            dist[i] = 0;
            q.push_back(i);
        }
    while (!q.empty()) {
        auto j = q.front();
        q.pop_front();
        for (auto i : pred[j])
            if (dist[i] == std::numeric_limits<std::size_t>::max()) {
                dist[i] = dist[j] + 1;
                q.push_back(i);
            }
    }
    return dist;
}

}  // namespace

VerifyReport verify_certificate(const MarkovChain& mc, const DriftCertificate& cert, double tol) {
    if (cert.t.size() != mc.size() || cert.b.size() != mc.size())
        throw InvalidArgument("certificate does not match the chain size");
    VerifyReport r;
    r.ratios.assign(mc.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < mc.size(); ++i) {
        if (cert.b[i]) continue;
        if (mc.boundary[i]) {
            ++r.skipped_boundary;
            continue;
        }
        if (!(cert.t[i] > 0) || !std::isfinite(cert.t[i]))
            throw InvalidArgument("certificate weight at '" + mc.labels[i] + "' is not a positive number");
        double s = 0;
        for (auto j : mc.successors(i)) {
            if (!std::isfinite(cert.t[j]) || cert.t[j] < 0)
                throw InvalidArgument("undefined weight on reachable state '" + mc.labels[j] + "'");
            s += mc.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * cert.t[j];
        }
        r.ratios[i] = s / cert.t[i];
        if (r.ratios[i] > r.max_ratio) {
            r.max_ratio = r.ratios[i];
            r.worst_state = i;
        }
    }
    for (const auto& gt : cert.tails) {
        const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(gt.block.data(), static_cast<Eigen::Index>(gt.block.size()));
        const Eigen::VectorXd av = gt.pencil(gt.mu) * v;
        for (Eigen::Index k = 0; k < v.size(); ++k) r.symbolic_max_ratio = std::max(r.symbolic_max_ratio, av(k) / v(k));
    }
    r.symbolic_ok = r.symbolic_max_ratio <= cert.rho + tol;
    r.pass = r.max_ratio <= cert.rho + tol && r.symbolic_ok;
    if (!r.pass) {
        r.message = r.symbolic_ok ? "drift ratio " + std::to_string(r.max_ratio) + " at '" + mc.labels[r.worst_state] +
                                        "' exceeds rho"
                                  : "periodic tail block violates the drift bound";
    }
    return r;
}

DriftCertificate tail_certificate(const MarkovChain& mc, std::size_t tail) {
    return assemble(mc, {solve_geometric_tail(mc, tail)});
}

DriftCertificate tail_certificates(const MarkovChain& mc) {
    std::vector<GeometricTail> tails;
    int n_tails = 0;
    for (auto t : mc.tail_of) n_tails = std::max(n_tails, t + 1);
    if (n_tails == 0) throw InvalidArgument("chain has no tails");
    for (int t = 0; t < n_tails; ++t) tails.push_back(solve_geometric_tail(mc, static_cast<std::size_t>(t)));
    return assemble(mc, tails);
}

SearchResult search_certificate(const MarkovChain& mc, std::optional<StateSet> b0) {
    SearchResult res;
    const bool tailed = std::any_of(mc.tail_of.begin(), mc.tail_of.end(), [](int t) { return t >= 0; });
    if (!b0 && tailed) {
        res.method = "analytic tail weights, B = non-periodic states";
        try {
            res.cert = tail_certificates(mc);
        } catch (const NoGeometricDrift& e) {
            res.message = std::string(e.what()).substr(e.kind().size() + 2);
            return res;
        }
        res.cert.provenance = Provenance::Search;
        res.infimum_rho = res.cert.rho;
        const auto v = verify_certificate(mc, res.cert);
        res.found = v.pass;
        res.message = v.message;
        return res;
    }
    StateSet b = b0 ? *b0 : make_set(mc, {0});
    if (b.size() != mc.size()) throw InvalidArgument("state set size does not match the chain");
    res.method = "value iteration with bisection on rho";
    if (tailed) res.message = "certificate covers the materialized window only";
    DriftCertificate cert;
    cert.provenance = Provenance::Search;
    cert.b = b;
    if (std::all_of(b.begin(), b.end(), [](bool x) { return x; })) {
        cert.t.assign(mc.size(), 1.0);
        cert.rho = 0;
        res.infimum_rho = 0;
        res.found = true;
        res.cert = cert;
        return res;
    }
    const SparseRows rows = sparse_rows(mc);
    std::vector<double> t;
    if (!minimal_supersolution(rows, b, 1.0, t)) {
        res.message = "no super-solution at rho = 1";
        return res;
    }
    double lo = 0, hi = 1;
    std::vector<double> best = t;
    for (int it = 0; it < 80 && hi - lo > 1e-11; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (minimal_supersolution(rows, b, mid, t)) {
            hi = mid;
            best = t;
        } else {
            lo = mid;
        }
    }
    cert.t = best;
    cert.rho = hi * (1 + 1e-9);  // strict margin over the equality solution
    res.infimum_rho = hi;
    res.cert = cert;
    const auto v = verify_certificate(mc, cert);
    res.found = v.pass && cert.rho < 1.0;
    if (!v.pass) res.message = v.message;
    return res;
}

LemmaReport lemma_bound_check(const MarkovChain& mc, const DriftCertificate& cert, std::size_t n_max) {
    LemmaReport r;
    const std::size_t n = mc.size();
    const auto dist = distance_to_boundary(mc);
    std::vector<bool> rows(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (cert.b[i]) continue;
        if (dist[i] < n_max) {
            ++r.excluded_states;
            continue;
        }
        rows[i] = true;
        if (!mc.is_core(i)) r.max_checked_depth = std::max(r.max_checked_depth, mc.depth_of[i]);
    }
    const Eigen::SparseMatrix<double> sp = mc.p.sparseView();
    Eigen::VectorXd mask(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) mask(static_cast<Eigen::Index>(i)) = cert.b[i] ? 0.0 : 1.0;
    std::vector<double> rho_pow(n_max + 1, 1.0);
    for (std::size_t k = 1; k <= n_max; ++k) rho_pow[k] = rho_pow[k - 1] * cert.rho;

    for (std::size_t j = 0; j < n; ++j) {
        if (!(cert.t[j] > 0) || !std::isfinite(cert.t[j])) continue;
        Eigen::VectorXd h = mc.p.col(static_cast<Eigen::Index>(j));
        for (std::size_t step = 1; step <= n_max; ++step) {
            if (step > 1) h = sp * h.cwiseProduct(mask);
            for (std::size_t i = 0; i < n; ++i) {
                if (!rows[i]) continue;
                const double bound = cert.t[i] / cert.t[j] * rho_pow[step];
                const double v = h(static_cast<Eigen::Index>(i));
                ++r.checked;
                if (v > bound) ++r.violations;
                if (bound > 0) r.max_slack = std::max(r.max_slack, v / bound);
            }
        }
    }
    // return to B: p^{(n),B}_{i,B} ≤ M t_i ρ^n
    double m = 0;
    Eigen::VectorXd ind = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
        if (cert.b[j]) {
            ind(static_cast<Eigen::Index>(j)) = 1.0;
            m = std::max(m, 1.0 / cert.t[j]);
        }
    Eigen::VectorXd h = sp * ind;
    for (std::size_t step = 1; step <= n_max; ++step) {
        if (step > 1) h = sp * h.cwiseProduct(mask);
        for (std::size_t i = 0; i < n; ++i) {
            if (!rows[i]) continue;
            const double bound = m * cert.t[i] * rho_pow[step];
            const double v = h(static_cast<Eigen::Index>(i));
            ++r.return_checked;
            if (v > bound) ++r.return_violations;
            if (bound > 0) r.return_max_slack = std::max(r.return_max_slack, v / bound);
        }
    }
    return r;
}

std::vector<ProbeRow> degradation_probe(const CounterexampleSpec& spec, const std::vector<long>& truncations) {
    std::vector<ProbeRow> out;
    for (long nt : truncations) {
        const MarkovChain mc = counterexample_chain(spec, nt);
        const StateSet b = make_set(mc, {mc.size() - 1});
        const SearchResult sr = search_certificate(mc, b);
        ProbeRow row;
        row.truncation = nt;
        row.rho = sr.infimum_rho;
        for (long s = -nt; s <= nt; ++s) row.sup_gamma = std::max(row.sup_gamma, spec.gamma(s));
        row.lower_bound_ok = row.rho >= row.sup_gamma;
        row.verified = sr.found;
        out.push_back(row);
    }
    return out;
}

}  // namespace treegibbs
