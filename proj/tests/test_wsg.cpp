#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "treegibbs/errors.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/io.hpp"
#include "treegibbs/markov.hpp"
#include "treegibbs/wsg.hpp"

using namespace treegibbs;
using doctest::Approx;

namespace {

MarkovChain chain_of(const std::string& name) {
    const auto g = tgtest::load_graph(name);
    return build_chain(g, compute_gibbs(g, Potential{}));
}

// States 0..n-1; up 1/3, down 2/3, reflecting at both ends.
MarkovChain birth_death(int n) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) {
        labels.push_back("s" + std::to_string(i));
        p(i, std::min(i + 1, n - 1)) += 1.0 / 3.0;
        p(i, std::max(i - 1, 0)) += 2.0 / 3.0;
    }
    return chain_from_kernel(std::move(labels), p);
}

DriftCertificate power_weights(const MarkovChain& mc, double base, double rho) {
    DriftCertificate c;
    c.rho = rho;
    c.b.assign(mc.size(), false);
    c.b[0] = true;
    for (std::size_t i = 0; i < mc.size(); ++i) c.t.push_back(std::pow(base, double(i)));
    return c;
}

}  // namespace

TEST_CASE("birth-death drift") {
    const auto mc = birth_death(40);
    const auto good = power_weights(mc, std::sqrt(2.0), 0.943);
    const auto vr = verify_certificate(mc, good);
    CHECK(vr.pass);
    const double expect = std::sqrt(2.0) / 3.0 + (2.0 / 3.0) / std::sqrt(2.0);
    CHECK(expect == Approx(2 * std::sqrt(2.0) / 3).epsilon(1e-15));
    for (std::size_t i = 1; i + 1 < mc.size(); ++i) CHECK(vr.ratios[i] == Approx(expect).epsilon(1e-13));
    CHECK(std::isnan(vr.ratios[0]));
    const auto lr = lemma_bound_check(mc, good, 60);
    CHECK(lr.violations == 0);
    CHECK(lr.return_violations == 0);
    CHECK(lr.checked > 0);

    const auto bad = power_weights(mc, 2.0, 0.99);
    const auto vb = verify_certificate(mc, bad);
    CHECK(!vb.pass);
    for (std::size_t i = 1; i + 1 < mc.size(); ++i) CHECK(vb.ratios[i] == Approx(1.0).epsilon(1e-13));
}

TEST_CASE("vacuous certificates") {
    for (auto name : {"path_lattice", "cusp_ray_2_4"}) {
        const auto mc = chain_of(name);
        DriftCertificate c;
        c.rho = 0.1;
        c.b.assign(mc.size(), true);
        c.t.assign(mc.size(), 1.0);
        CHECK(verify_certificate(mc, c).pass);
        const auto lr = lemma_bound_check(mc, c, 10);
        CHECK(lr.violations == 0);
        CHECK(lr.return_violations == 0);
    }
    const auto mc = chain_of("path_lattice");
    DriftCertificate wrong;
    wrong.rho = 0.5;
    wrong.b.assign(2, true);
    wrong.t.assign(2, 1.0);
    CHECK_THROWS_AS(verify_certificate(mc, wrong), InvalidArgument);
}

TEST_CASE("search results re-verify and satisfy the taboo bound") {
    for (const auto& name : tgtest::all_fixtures()) {
        INFO(name);
        const auto g = tgtest::load_graph(name);
        // deep enough that tail rows sit more than 60 steps from the truncation
        const auto mc = build_chain(g, compute_gibbs(g, Potential{}), 120);
        const auto res = search_certificate(mc);
        REQUIRE(res.found);
        CHECK(res.cert.rho < 1.0);
        const auto vr = verify_certificate(mc, res.cert);
        CHECK(vr.pass);
        const auto lr = lemma_bound_check(mc, res.cert, 60);
        CHECK(lr.violations == 0);
        CHECK(lr.return_violations == 0);
        CHECK(lr.checked > 0);
        if (g.has_tails()) CHECK(lr.max_checked_depth >= 40);
    }
}

TEST_CASE("explicit B on a tailed window gives a sound certificate") {
    const auto mc = chain_of("cusp_ray_2_4");
    const auto analytic = tail_certificate(mc, 0);
    const auto res = search_certificate(mc, analytic.b);
    REQUIRE(res.found);
    CHECK(res.cert.rho < 1.0);
    CHECK(verify_certificate(mc, res.cert).pass);
    CHECK(lemma_bound_check(mc, res.cert, 20).violations == 0);
}

TEST_CASE("tampering breaks verification") {
    for (auto name : {"loop_lattice", "cusp_ray_2_2"}) {
        INFO(name);
        const auto mc = chain_of(name);
        auto cert = search_certificate(mc).cert;
        auto lower = cert;
        lower.rho = cert.rho * 0.5;
        CHECK(!verify_certificate(mc, lower).pass);
        // shrink the weight of one state outside B: its own drift ratio grows
        auto heavy = cert;
        for (std::size_t s = 0; s < mc.size(); ++s)
            if (!heavy.b[s] && !mc.boundary[s]) {
                heavy.t[s] *= 1e-3;
                break;
            }
        CHECK(!verify_certificate(mc, heavy).pass);
    }
}

TEST_CASE("enlarging B never raises the best rho") {
    for (auto name : {"path_lattice", "loop_lattice", "biregular_4_4"}) {
        INFO(name);
        const auto mc = chain_of(name);
        StateSet b(mc.size(), false);
        double prev = 1.0;
        for (std::size_t s = 0; s + 1 < mc.size(); ++s) {
            b[s] = true;
            const auto res = search_certificate(mc, b);
            REQUIRE(res.found);
            CHECK(res.cert.rho <= prev + 1e-9);
            prev = res.cert.rho;
        }
    }
}

TEST_CASE("cuspidal ray: search agrees with the analytic tail certificate") {
    for (auto name : {"cusp_ray_2_2", "cusp_ray_2_4", "cusp_ray_4_4"}) {
        INFO(name);
        const auto mc = chain_of(name);
        const auto analytic = tail_certificate(mc, 0);
        CHECK(analytic.rho < 1.0);
        CHECK(analytic.provenance == Provenance::AnalyticTail);
        CHECK(verify_certificate(mc, analytic).pass);
        const auto res = search_certificate(mc);
        REQUIRE(res.found);
        CHECK(std::abs(res.cert.rho - analytic.rho) <= 1e-6);
        // every core state is in B by default
        for (std::size_t s = 0; s < mc.size(); ++s)
            if (mc.is_core(s)) CHECK(res.cert.b[s]);
    }
}

TEST_CASE("ray of type (2, q-1) has a certificate") {
    const auto mc = chain_of("ray_q5");
    const auto c = tail_certificate(mc, 0);
    CHECK(c.rho < 1.0);
    CHECK(verify_certificate(mc, c).pass);
}

TEST_CASE("tail drift fails when the forward probability tends to one") {
    // ray where almost all mass moves outward: a birth-death block with up 0.9
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(30, 30);
    std::vector<std::string> labels;
    for (int i = 0; i < 30; ++i) {
        labels.push_back("s" + std::to_string(i));
        p(i, std::min(i + 1, 29)) += 0.9;
        p(i, std::max(i - 1, 0)) += 0.1;
    }
    const auto mc = chain_from_kernel(labels, p);
    // any increasing weights: drift at least 0.9·c > 1 for c > 1/0.9
    for (double c : {1.01, 1.2, 1.5, 2.0}) {
        auto cert = power_weights(mc, c, 0.999);
        CHECK(!verify_certificate(mc, cert).pass);
    }
}

TEST_CASE("certificate JSON round trip") {
    for (auto name : {"cusp_ray_2_4", "path_lattice", "lattice_ray_q3"}) {
        INFO(name);
        const auto mc = chain_of(name);
        const auto cert = search_certificate(mc).cert;
        const auto j = io::certificate_to_json(mc, cert);
        const auto back = io::certificate_from_json(j, mc);
        CHECK(verify_certificate(mc, back).pass);
        CHECK(back.rho == cert.rho);
        CHECK(io::certificate_to_json(mc, back).dump() == j.dump());
    }
}

TEST_CASE("degradation probe") {
    CounterexampleSpec harm{[](long n) { return 1.0 - 1.0 / (1.0 + std::abs(double(n))); },
                            [](long n) { return std::pow(0.5, std::abs(double(n))); }};
    const auto rows = degradation_probe(harm, {10, 20, 40, 80});
    REQUIRE(rows.size() == 4);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        CHECK(rows[k].lower_bound_ok);
        CHECK(rows[k].verified);
        CHECK(rows[k].rho >= rows[k].sup_gamma);
        CHECK(rows[k].sup_gamma == Approx(1.0 - 1.0 / (1.0 + double(rows[k].truncation))));
        if (k > 0) CHECK(rows[k].rho > rows[k - 1].rho);
    }
    CHECK(rows.back().rho > 0.95);

    CounterexampleSpec flat{[](long) { return 0.5; }, [](long n) { return std::pow(0.5, std::abs(double(n))); }};
    const auto fr = degradation_probe(flat, {10, 20, 40});
    for (const auto& r : fr) {
        CHECK(r.rho < 0.9);
        CHECK(r.verified);
    }
    CHECK(std::abs(fr[2].rho - fr[1].rho) <= 1e-6);

    const auto zero = degradation_probe(flat, {0});
    CHECK(zero[0].rho >= 0.5);
    CHECK(zero[0].rho < 1.0);
}
