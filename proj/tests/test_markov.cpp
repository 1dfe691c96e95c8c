#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "common.hpp"
#include "treegibbs/errors.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/markov.hpp"

using namespace treegibbs;
using doctest::Approx;

namespace {

MarkovChain chain_of(const std::string& name) {
    const auto g = tgtest::load_graph(name);
    return build_chain(g, compute_gibbs(g, Potential{}));
}

MarkovChain two_state() {
    Eigen::MatrixXd p(2, 2);
    p << 0, 1, 1, 0;
    return chain_from_kernel({"e", "eb"}, p);
}

Eigen::MatrixXd power(const Eigen::MatrixXd& p, int n) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p.rows(), p.cols());
    for (int k = 0; k < n; ++k) r = r * p;
    return r;
}

// p^{(n),B} = P (D P)^{n-1} with D killing B at intermediate times.
Eigen::MatrixXd taboo_matrix(const Eigen::MatrixXd& p, const StateSet& b, int n) {
    if (n == 0) return Eigen::MatrixXd::Identity(p.rows(), p.cols());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    for (Eigen::Index s = 0; s < p.rows(); ++s) d(s, s) = b[static_cast<std::size_t>(s)] ? 0.0 : 1.0;
    Eigen::MatrixXd r = p;
    for (int k = 1; k < n; ++k) r = r * d * p;
    return r;
}

// f^{(n),B}_{·j}: as above with j also forbidden in between.
Eigen::MatrixXd first_passage_matrix(const Eigen::MatrixXd& p, StateSet b, std::size_t j, int n) {
    if (n == 0) return Eigen::MatrixXd::Zero(p.rows(), p.cols());
    b[j] = true;
    return taboo_matrix(p, b, n);
}

double w2_of(double delta) { return std::exp(-2 * delta); }

}  // namespace

TEST_CASE("single edge chain") {
    const auto mc = chain_of("single_edge");
    const auto e = mc.state("e"), eb = mc.state("eb");
    CHECK(mc.p(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(eb)) == Approx(1.0).epsilon(1e-14));
    CHECK(mc.p(static_cast<Eigen::Index>(eb), static_cast<Eigen::Index>(e)) == Approx(1.0).epsilon(1e-14));
    CHECK(mc.pi(static_cast<Eigen::Index>(e)) == Approx(0.5).epsilon(1e-14));
    CHECK(mc.pi(static_cast<Eigen::Index>(eb)) == Approx(0.5).epsilon(1e-14));
    CHECK(check_markov_property(two_state()).max() <= 1e-15);
}

TEST_CASE("Markov property on every fixture") {
    for (const auto& name : tgtest::all_fixtures()) {
        INFO(name);
        const auto g = tgtest::load_graph(name);
        const auto gd = compute_gibbs(g, Potential{});
        const auto mc = build_chain(g, gd);
        const auto r = check_markov_property(mc, &gd, &g);
        CHECK(r.row_residual <= 1e-12);
        CHECK(r.stationarity_residual <= 1e-12);
        CHECK(r.cylinder_residual <= 1e-12);
        // support: p_ij > 0 only along composable edges with positive multiplicity
        const auto& q = mc.graph.graph;
        for (std::size_t i = 0; i < mc.size(); ++i)
            for (std::size_t j = 0; j < mc.size(); ++j) {
                if (mc.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= 0) continue;
                const auto e = mc.edge_of[i], f = mc.edge_of[j];
                CHECK(q.edge(f).from == q.edge(e).to);
                if (!mc.boundary[i]) CHECK(edge_multiplicity(q, e, f) > 0);
            }
    }
}

TEST_CASE("corrupting one entry shows up in its column") {
    auto mc = chain_of("path_lattice");
    const auto i = mc.state("f"), j = mc.state("fb");
    mc.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1e-3;
    const auto r = check_markov_property(mc);
    CHECK(r.worst_column == j);
    CHECK(r.row_residual == Approx(1e-3).epsilon(1e-9));
    for (std::size_t c = 0; c < mc.size(); ++c)
        if (c != j) CHECK(r.column_residuals[c] <= 1e-12);
}

TEST_CASE("constant potential leaves the kernel unchanged") {
    for (const auto& name : tgtest::all_fixtures()) {
        INFO(name);
        const auto g = tgtest::load_graph(name);
        Potential c;
        c.edge_values.assign(g.num_edges(), 0.9);
        for (std::size_t t = 0; t < g.tails().size(); ++t) c.tails.push_back(TailPotential{{}, {{0.9, 0.9}}});
        const auto a = build_chain(g, compute_gibbs(g, Potential{}));
        const auto b = build_chain(g, compute_gibbs(g, c));
        REQUIRE(a.size() == b.size());
        CHECK((a.p - b.p).cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("cuspidal ray transitions match the closed forms") {
    for (auto [r, s] : std::vector<std::pair<double, double>>{{2, 2}, {2, 4}, {4, 4}}) {
        const auto g = tgtest::cusp_ray(static_cast<long>(r), static_cast<long>(s));
        const auto gd = compute_gibbs(g, Potential{});
        const auto mc = build_chain(g, gd, 12);
        const double w = w2_of(gd.delta);
        const double odd = ((s - 1) * r * w + (r - 1) * r * s * w * w) / ((r - 1) + (s - 1) * r * w);
        const double even = ((r - 1) * s * w + (s - 1) * r * s * w * w) / ((s - 1) + (r - 1) * s * w);
        auto P = [&](const std::string& x, const std::string& y) {
            return mc.p(static_cast<Eigen::Index>(mc.state(x)), static_cast<Eigen::Index>(mc.state(y)));
        };
        auto e = [](std::size_t n) { return "~t0.e" + std::to_string(n); };
        auto eb = [](std::size_t n) { return "~t0.eb" + std::to_string(n); };
        for (std::size_t n = 1; n <= 8; ++n) {
            INFO("r=" << r << " s=" << s << " n=" << n);
            const double expect = n % 2 == 1 ? odd : even;
            CHECK(std::abs(P(e(n), e(n + 1)) - expect) <= 1e-8);
            CHECK(std::abs(P(e(n), eb(n)) - (1 - expect)) <= 1e-8);
            CHECK(P(eb(n + 1), eb(n)) == Approx(1.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("periodic classes") {
    const auto two = periodic_classes(two_state());
    CHECK(two.k == 2);
    CHECK(two.classes.size() == 2);
    CHECK(two.classes[0].size() == 1);
    CHECK(periodic_classes(chain_of("loop_lattice")).k == 1);
    for (const auto& name : tgtest::all_fixtures()) {
        INFO(name);
        CHECK(periodic_classes(chain_of(name)).k == length_spectrum_period(tgtest::load_graph(name)));
    }
    Eigen::MatrixXd split = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(periodic_classes(chain_from_kernel({"x", "y"}, split, Eigen::Vector2d(0.5, 0.5))), Reducible);
}

TEST_CASE("taboo probabilities against matrix products") {
    const auto two = two_state();
    StateSet bb{false, true};
    CHECK(taboo_probability(two, bb, 0, 0, 2).p[2] == 0.0);
    const auto fp = first_passage(two, StateSet{false, false}, 0, 0, 4);
    CHECK(fp.f[1] == 0.0);
    CHECK(fp.f[2] == 1.0);
    CHECK(fp.f[3] == 0.0);
    CHECK(fp.f[0] == 0.0);

    for (auto name : {"path_lattice", "loop_lattice", "cusp_ray_2_4"}) {
        INFO(name);
        const auto mc = chain_of(name);
        const std::size_t n = mc.size();
        const StateSet none(n, false);
        StateSet b1(n, false), b2(n, false);
        b1[0] = true;
        b2[0] = b2[1] = true;
        for (std::size_t j = 0; j < n; j += std::max<std::size_t>(1, n / 7)) {
            const auto c0 = taboo_column(mc, none, j, 20);
            const auto c1 = taboo_column(mc, b1, j, 20);
            const auto c2 = taboo_column(mc, b2, j, 20);
            const auto f1 = first_passage_column(mc, b1, j, 20);
            CHECK((c0[0] - Eigen::VectorXd::Unit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)))
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
            CHECK(f1[0].cwiseAbs().maxCoeff() == 0.0);
            CHECK((c1[1] - mc.p.col(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff() <= 1e-15);
            CHECK((f1[1] - mc.p.col(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff() <= 1e-15);
            for (int m = 1; m <= 20; ++m) {
                const auto jj = static_cast<Eigen::Index>(j);
                CHECK((c0[m] - power(mc.p, m).col(jj)).cwiseAbs().maxCoeff() <= 1e-12);
                CHECK((c1[m] - taboo_matrix(mc.p, b1, m).col(jj)).cwiseAbs().maxCoeff() <= 1e-12);
                CHECK((f1[m] - first_passage_matrix(mc.p, b1, j, m).col(jj)).cwiseAbs().maxCoeff() <= 1e-12);
                // enlarging B never increases the table
                CHECK((c1[m] - c0[m]).maxCoeff() <= 1e-15);
                CHECK((c2[m] - c1[m]).maxCoeff() <= 1e-15);
                CHECK(c1[m].minCoeff() >= 0.0);
                CHECK(c1[m].maxCoeff() <= 1.0 + 1e-15);
            }
        }
    }
}

TEST_CASE("Chapman-Kolmogorov") {
    for (auto name : {"path_lattice", "ray_q5"}) {
        const auto mc = chain_of(name);
        const StateSet none(mc.size(), false);
        for (std::size_t j = 0; j < mc.size(); j += 3) {
            const auto col = taboo_column(mc, none, j, 12);
            const Eigen::MatrixXd p5 = power(mc.p, 5);
            CHECK((col[12] - p5 * power(mc.p, 7).col(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("convolution identity") {
    for (auto name : {"path_lattice", "loop_lattice", "cusp_ray_2_2", "biregular_2_4"}) {
        INFO(name);
        const auto mc = chain_of(name);
        const std::size_t n = mc.size();
        std::vector<StateSet> bs{StateSet(n, false), StateSet(n, false), StateSet(n, false)};
        bs[1][0] = true;
        for (std::size_t s = 0; s < n; s += 2) bs[2][s] = true;
        for (const auto& b : bs) {
            const auto c = convolution_check(mc, b, 40);
            CHECK(c.first_passage_residual <= 1e-12);
            CHECK(c.diagonal_residual <= 1e-12);
            // replay in test code for the diagonal pattern p_ii = Σ f_ii p_ii
            for (std::size_t i = 0; i < n; ++i) {
                if (b[i]) continue;
                const auto p = taboo_probability(mc, b, i, i, 40);
                const auto f = first_passage(mc, b, i, i, 40);
                for (std::size_t m = 1; m <= 40; ++m) {
                    double s = 0;
                    for (std::size_t r = 1; r <= m; ++r) s += f.f[r] * p.p[m - r];
                    CHECK(std::abs(s - p.p[m]) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("mean return times") {
    const auto two = two_state();
    const auto rt = mean_return_time(two, 0, 10);
    CHECK(rt.mean == Approx(2.0));
    CHECK(1.0 / rt.mean == Approx(two.pi(0)));

    for (auto name : {"path_lattice", "loop_lattice", "biregular_2_4"}) {
        INFO(name);
        const auto mc = chain_of(name);
        for (std::size_t j = 0; j < mc.size(); ++j) {
            const auto r = mean_return_time(mc, j, 2000);
            CHECK(r.resolved);
            CHECK(!r.defective);
            CHECK(std::abs(1.0 / r.mean - r.pi) <= 1e-9);
        }
    }

    // a leaky kernel: the return mass stays below one
    Eigen::MatrixXd leak(2, 2);
    leak << 0.5, 0.5, 0, 1;
    const auto lk = mean_return_time(chain_from_kernel({"x", "y"}, leak, Eigen::Vector2d(0, 1)), 0, 200);
    CHECK(lk.mass == Approx(0.5));
    CHECK(lk.defective);
}

TEST_CASE("mixing fits on tail-free chains") {
    for (auto [name, i] : std::vector<std::pair<std::string, std::string>>{{"path_lattice", "f"},
                                                                            {"loop_lattice", "f"}}) {
        INFO(name);
        const auto mc = chain_of(name);
        const auto s = mc.state(i);
        const auto fit = mixing_rate_estimate(mc, s, s, 60);
        CHECK(fit.theta > 0);
        CHECK(fit.theta < 1);
        CHECK(fit.r2 >= 0.99);
        // second eigenvalue modulus of the k-step kernel on the class, computed here
        const auto pc = periodic_classes(mc);
        const Eigen::MatrixXd pk = power(mc.p, static_cast<int>(pc.k));
        const auto& cls = pc.classes[static_cast<std::size_t>(pc.class_of[s])];
        Eigen::MatrixXd sub(cls.size(), cls.size());
        for (std::size_t a = 0; a < cls.size(); ++a)
            for (std::size_t b = 0; b < cls.size(); ++b)
                sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                    pk(static_cast<Eigen::Index>(cls[a]), static_cast<Eigen::Index>(cls[b]));
        Eigen::EigenSolver<Eigen::MatrixXd> es(sub, false);
        std::vector<double> mods;
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) mods.push_back(std::abs(es.eigenvalues()(k)));
        std::sort(mods.rbegin(), mods.rend());
        CHECK(mods[0] == Approx(1.0).epsilon(1e-10));
        CHECK(std::abs(fit.theta - mods[1]) <= 0.02 * mods[1]);
        // the envelope dominates the data it was fitted on
        for (std::size_t n = 1; n <= fit.last_n; ++n)
            CHECK(fit.diff[n] <= fit.c_env * std::pow(fit.theta, double(n)) * (1 + 1e-12));
    }
    CHECK_THROWS_AS(mixing_rate_estimate(chain_of("single_edge"), 0, 0, 40), AlreadyExact);
    CHECK_THROWS_AS(mixing_rate_estimate(chain_of("biregular_2_4"), 0, 0, 40), AlreadyExact);
    Eigen::MatrixXd half = Eigen::MatrixXd::Constant(2, 2, 0.5);
    CHECK_THROWS_AS(mixing_rate_estimate(chain_from_kernel({"x", "y"}, half), 0, 1, 20), AlreadyExact);
}

TEST_CASE("covariance of cylinders") {
    const auto mc = chain_of("path_lattice");
    const std::vector<std::size_t> a{mc.state("f"), mc.state("fb")}, b{mc.state("g")};
    const auto fit = mixing_rate_estimate(mc, b[0], b[0], 60);
    const auto cs = correlation_decay(mc, a, b, 40, &fit);
    REQUIRE(!cs.n.empty());
    CHECK(cs.n.front() == a.size());
    const long k = periodic_classes(mc).k;
    // base case: direct cylinder masses
    std::vector<std::size_t> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    CHECK(cs.cov.front() == Approx(word_mass(mc, ab) - double(k) * cs.lambda_a * cs.lambda_b).epsilon(1e-12));
    CHECK(cs.lambda_a == Approx(mc.pi(static_cast<Eigen::Index>(a[0])) *
                                mc.p(static_cast<Eigen::Index>(a[0]), static_cast<Eigen::Index>(a[1]))));
    for (std::size_t r = 0; r < cs.n.size(); ++r) {
        INFO("n=" << cs.n[r]);
        CHECK(std::abs(cs.cov[r]) <= cs.envelope[r] * (1 + 1e-9) + 1e-16);
        // exact value from a matrix power
        const int steps = static_cast<int>(cs.n[r] - a.size() + 1);
        const double pij = power(mc.p, steps)(static_cast<Eigen::Index>(a.back()), static_cast<Eigen::Index>(b[0]));
        const double pib = mc.pi(static_cast<Eigen::Index>(b[0]));
        CHECK(cs.cov[r] == Approx(cs.lambda_a * (pij - double(k) * pib) * cs.lambda_b / pib).epsilon(1e-10));
    }
    const auto empty = correlation_decay(mc, {}, {}, 10);
    for (double c : empty.cov) CHECK(c == 0.0);
}

TEST_CASE("star chain with holding times") {
    CounterexampleSpec spec{[](long) { return 0.5; }, [](long n) { return std::abs(n) <= 1 ? 1.0 : 0.0; }};
    const auto mc = counterexample_chain(spec, 1);
    CHECK(mc.size() == 4);
    CHECK(check_markov_property(mc).max() <= 1e-14);
    const auto inf = mc.size() - 1;
    CHECK(counterexample_mean_return(spec, 1) == Approx(3.0));
    CHECK(mc.pi(static_cast<Eigen::Index>(inf)) == Approx(1.0 / 3.0));
    const auto rt = mean_return_time(mc, inf, 400);
    CHECK(rt.mean == Approx(3.0).epsilon(1e-10));

    CounterexampleSpec harm{[](long n) { return 1.0 - 1.0 / (1.0 + std::abs(double(n))); },
                            [](long n) { return std::pow(0.5, std::abs(double(n))); }};
    const auto h = counterexample_chain(harm, 6);
    CHECK(check_markov_property(h).max() <= 1e-12);
    const auto hr = mean_return_time(h, h.size() - 1, 4000);
    CHECK(hr.mean == Approx(counterexample_mean_return(harm, 6)).epsilon(1e-9));

    const auto single = counterexample_chain(spec, 0);
    CHECK(single.size() == 2);
    CHECK(single.p(0, 0) == 0.5);
    CHECK(single.p(1, 0) == 1.0);
}
