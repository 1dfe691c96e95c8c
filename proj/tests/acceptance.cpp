// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "common.hpp"
#include "treegibbs/counting.hpp"
#include "treegibbs/errors.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/markov.hpp"
#include "treegibbs/wsg.hpp"

using namespace treegibbs;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome o;
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
}

Eigen::MatrixXd power(const Eigen::MatrixXd& p, long n) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p.rows(), p.cols());
    for (long k = 0; k < n; ++k) r = r * p;
    return r;
}

double second_modulus(const MarkovChain& mc, std::size_t s) {
    const auto pc = periodic_classes(mc);
    const Eigen::MatrixXd pk = power(mc.p, pc.k);
    const auto& cls = pc.classes[static_cast<std::size_t>(pc.class_of[s])];
    Eigen::MatrixXd sub(cls.size(), cls.size());
    for (std::size_t a = 0; a < cls.size(); ++a)
        for (std::size_t b = 0; b < cls.size(); ++b)
            sub(Eigen::Index(a), Eigen::Index(b)) = pk(Eigen::Index(cls[a]), Eigen::Index(cls[b]));
    Eigen::EigenSolver<Eigen::MatrixXd> es(sub, false);
    std::vector<double> mods;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) mods.push_back(std::abs(es.eigenvalues()(k)));
    std::sort(mods.rbegin(), mods.rend());
    return mods.size() > 1 ? mods[1] : 0.0;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

}  // namespace

int main() {
    criterion(1, "critical exponent closed forms", [](Outcome& o) {
        struct Case {
            long ie, irev;
            double expect;
        };
        for (const auto& c : {Case{3, 3, std::log(2.0)}, Case{5, 3, 0.5 * std::log(8.0)},
                              Case{5, 5, 0.5 * std::log(16.0)}}) {
            const auto g = tgtest::single_edge(c.ie, c.irev);
            const auto t0 = std::chrono::steady_clock::now();
            const double d = critical_exponent(g, Potential{});
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const std::string tag = "(" + std::to_string(c.ie) + "," + std::to_string(c.irev) + ")";
            o.require(std::abs(d - c.expect) <= 1e-10, tag + " delta " + fmt(d));
            o.require(secs < 1.0, tag + " runtime " + fmt(secs) + "s");
        }
    });

    criterion(2, "Markov property residuals <= 1e-12 on every fixture", [](Outcome& o) {
        double worst = 0;
        for (const auto& name : tgtest::all_fixtures()) {
            const auto g = tgtest::load_graph(name);
            const auto gd = compute_gibbs(g, Potential{});
            const auto mc = build_chain(g, gd);
            const auto r = check_markov_property(mc, &gd, &g);
            const double m = std::max(r.row_residual, r.stationarity_residual);
            worst = std::max(worst, m);
            o.require(m <= 1e-12, name + " residual " + fmt(m));
        }
        o.detail << " max " << fmt(worst);
    });

    criterion(3, "cuspidal ray transitions match the closed forms", [](Outcome& o) {
        for (auto [r, s] : std::vector<std::pair<long, long>>{{2, 2}, {2, 4}, {4, 4}}) {
            const auto g = tgtest::cusp_ray(r, s);
            const auto gd = compute_gibbs(g, Potential{});
            const auto mc = build_chain(g, gd, 12);
            const double w = std::exp(-2 * gd.delta), R = double(r), S = double(s);
            const double odd = ((S - 1) * R * w + (R - 1) * R * S * w * w) / ((R - 1) + (S - 1) * R * w);
            const double even = ((R - 1) * S * w + (S - 1) * R * S * w * w) / ((S - 1) + (R - 1) * S * w);
            auto P = [&](const std::string& x, const std::string& y) {
                return mc.p(Eigen::Index(mc.state(x)), Eigen::Index(mc.state(y)));
            };
            double worst = 0;
            for (std::size_t n = 1; n <= 8; ++n) {
                const auto e = "~t0.e" + std::to_string(n), en = "~t0.e" + std::to_string(n + 1);
                const auto eb = "~t0.eb" + std::to_string(n), ebn = "~t0.eb" + std::to_string(n + 1);
                const double expect = n % 2 == 1 ? odd : even;
                worst = std::max({worst, std::abs(P(e, en) - expect), std::abs(P(ebn, eb) - 1.0)});
            }
            o.require(worst <= 1e-8, "(" + std::to_string(r) + "," + std::to_string(s) + ") err " + fmt(worst));
        }
    });

    criterion(4, "convolution identity and taboo monotonicity", [](Outcome& o) {
        for (auto name : {"path_lattice", "loop_lattice", "cusp_ray_2_2", "biregular_2_4"}) {
            const auto g = tgtest::load_graph(name);
            const auto chain = build_chain(g, compute_gibbs(g, Potential{}));
            const std::size_t n = chain.size();
            std::vector<StateSet> bs{StateSet(n, false), StateSet(n, false), StateSet(n, false)};
            bs[1][0] = true;
            for (std::size_t s = 0; s < n; s += 2) bs[2][s] = true;
            for (const auto& b : bs) {
                const auto c = convolution_check(chain, b, 40);
                o.require(c.first_passage_residual <= 1e-12 && c.diagonal_residual <= 1e-12,
                          std::string(name) + " residual " + fmt(std::max(c.first_passage_residual, c.diagonal_residual)));
            }
            // nested sets: {} ⊂ {0} ⊂ even states
            for (std::size_t j = 0; j < n; ++j) {
                const auto c0 = taboo_column(chain, bs[0], j, 40);
                const auto c1 = taboo_column(chain, bs[1], j, 40);
                const auto c2 = taboo_column(chain, bs[2], j, 40);
                for (std::size_t m = 0; m <= 40; ++m)
                    o.require((c1[m] - c0[m]).maxCoeff() <= 1e-15 && (c2[m] - c1[m]).maxCoeff() <= 1e-15,
                              std::string(name) + " monotonicity");
            }
        }
    });

    criterion(5, "drift certificates on cuspidal and periodic rays", [](Outcome& o) {
        for (auto name : {"cusp_ray_2_2", "cusp_ray_2_4", "cusp_ray_4_4", "ray_q5"}) {
            const auto g = tgtest::load_graph(name);
            const auto mc = build_chain(g, compute_gibbs(g, Potential{}), 120);
            const auto res = search_certificate(mc);
            o.require(res.found && res.cert.rho < 1.0, std::string(name) + " rho " + fmt(res.cert.rho));
            const auto lr = lemma_bound_check(mc, res.cert, 60);
            o.require(lr.checked > 0 && lr.violations == 0,
                      std::string(name) + " violations " + std::to_string(lr.violations) + "/" +
                          std::to_string(lr.checked));
            o.detail << " " << name << ":rho=" << fmt(res.cert.rho);
        }
    });

    criterion(6, "mixing rate fits on finite-core chains", [](Outcome& o) {
        for (auto name : {"path_lattice", "loop_lattice"}) {
            const auto g = tgtest::load_graph(name);
            const auto mc = build_chain(g, compute_gibbs(g, Potential{}));
            const auto s = mc.state("f");
            const auto fit = mixing_rate_estimate(mc, s, s, 60);
            const double lam2 = second_modulus(mc, s);
            o.require(fit.theta > 0 && fit.theta < 1, std::string(name) + " theta " + fmt(fit.theta));
            o.require(fit.r2 >= 0.99, std::string(name) + " R2 " + fmt(fit.r2));
            o.require(std::abs(fit.theta - lam2) <= 0.02 * lam2,
                      std::string(name) + " theta " + fmt(fit.theta) + " vs " + fmt(lam2));
            o.detail << " " << name << ":theta=" << fmt(fit.theta) << "/" << fmt(lam2);
        }
        // two-state chains reach stationarity within one period: no rate to fit
        for (auto name : {"single_edge", "biregular_2_4", "biregular_4_4"}) {
            const auto g = tgtest::load_graph(name);
            const auto mc = build_chain(g, compute_gibbs(g, Potential{}));
            bool exact = false;
            try {
                mixing_rate_estimate(mc, 0, 0, 40);
            } catch (const AlreadyExact&) {
                exact = true;
            }
            o.require(exact && second_modulus(mc, 0) <= 1e-12, std::string(name) + " expected exact mixing");
        }
    });

    criterion(7, "degradation probe", [](Outcome& o) {
        CounterexampleSpec harm{[](long n) { return 1.0 - 1.0 / (1.0 + std::abs(double(n))); },
                                [](long n) { return std::pow(0.5, std::abs(double(n))); }};
        const auto rows = degradation_probe(harm, {10, 20, 40, 80});
        o.require(rows.size() == 4, "row count");
        for (std::size_t k = 0; k < rows.size(); ++k) {
            o.require(rows[k].lower_bound_ok && rows[k].verified && rows[k].rho >= rows[k].sup_gamma,
                      "N=" + std::to_string(rows[k].truncation) + " lower bound");
            if (k > 0) o.require(rows[k].rho > rows[k - 1].rho, "not strictly increasing");
            o.detail << " N" << rows[k].truncation << "=" << fmt(rows[k].rho);
        }
        o.require(!rows.empty() && rows.back().rho > 0.95, "rho at N=80");
    });

    criterion(8, "counting: spheres, orbit oracle, renewal constant", [](Outcome& o) {
        for (long qd : {2, 3})
            for (long qdp : {2, 3}) {
                const auto g = tgtest::single_edge(qdp + 1, qd + 1);
                const auto ball = build_cover_ball(g, 0, 12);
                std::vector<long long> at(13, 0);
                for (const auto& n : ball.nodes) at[n.dist]++;
                for (std::size_t j = 0; j <= 6; ++j)
                    o.require(sphere_size({qd, qdp}, j) == Integer(at[2 * j]),
                              "Delta(" + std::to_string(2 * j) + ") q=" + std::to_string(qd) + "," + std::to_string(qdp));
            }
        for (const auto& name : tgtest::all_fixtures()) {
            const auto g = tgtest::load_graph(name);
            const auto base = g.orders().base_vertex;
            const auto oc = orbit_oracle(g, Potential{}, base, 4);
            const auto ball = build_cover_ball(g, base, 4);
            const auto counts = ball.label_counts();
            const auto& qb = ball.quotient.graph;
            for (std::size_t n = 0; n <= 4; ++n)
                for (std::size_t v = 0; v < qb.num_vertices(); ++v) {
                    const auto w = oc.graph.graph.find_vertex(qb.vertex_name(v));
                    const Integer ours = w ? oc.lifts[n][*w] : Integer(0);
                    o.require(ours == Integer(counts[n][v]), name + " oracle at radius " + std::to_string(n));
                }
        }
        const auto g = tgtest::load_graph("single_edge");
        const double d = std::log(2.0);
        const auto c = renewal_constant(g, Potential{}, 0, d, true);
        o.require(c.exact && *c.exact == 6, "C* exact");
        const auto oc = orbit_oracle(g, Potential{}, 0, 50);
        const double err = std::abs(oc.cumulative[50] * std::exp(-50 * d) - 6.0);
        o.require(err <= 1e-9, "N(50) err " + fmt(err));
        o.detail << " C*=6 N(2n)e^{-2n delta} err at n=25 " << fmt(err);
    });

    criterion(9, "main-term ratio constancy and corollary constant ratio", [](Outcome& o) {
        for (auto name : {"single_edge", "biregular_2_4", "biregular_4_4", "path_lattice"}) {
            const auto g = tgtest::load_graph(name);
            const auto r = error_decay_report(g, compute_gibbs(g, Potential{}), 10, 25);
            const double q = double(r.params.qd);
            const double var = std::max(r.ratio57_variation, r.ratio58_variation);
            o.require(var <= 1e-6, std::string(name) + " variation " + fmt(var));
            o.require(std::abs(r.const_ratio - (q + 1) / q) <= 1e-9, std::string(name) + " const ratio " + fmt(r.const_ratio));
        }
        // the loop lattice carries a subdominant eigenvalue of modulus √2·e^{-δ}: reported only
        const auto g = tgtest::load_graph("loop_lattice");
        const auto r = error_decay_report(g, compute_gibbs(g, Potential{}), 10, 25);
        std::printf("INFO  9 loop_lattice ratio variation %s (excluded: Ramanujan subdominant term)\n",
                    fmt(std::max(r.ratio57_variation, r.ratio58_variation)).c_str());
    });

    criterion(10, "cusp exponent bound is strict", [](Outcome& o) {
        for (auto [r, s] : std::vector<std::pair<long, long>>{{2, 2}, {2, 4}, {4, 4}}) {
            const auto g = tgtest::cusp_ray(r, s);
            const double d = critical_exponent(g, Potential{});
            const double b = cusp_exponent_bound(g.tails()[0]);
            o.require(d - b > 1e-6, "(" + std::to_string(r) + "," + std::to_string(s) + ") margin " + fmt(d - b));
            o.detail << " (" << r << "," << s << "):" << fmt(d - b);
        }
    });

    return failures == 0 ? 0 : 1;
}
