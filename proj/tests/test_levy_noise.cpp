#include <doctest.h>

#include <cmath>
#include <vector>

#include "htol/error.hpp"
#include "htol/estimators.hpp"
#include "htol/levy_noise.hpp"
#include "htol/quadrature.hpp"
#include "htol/rng.hpp"

using namespace htol;
using levy::Vec;

namespace {

// C(d, alpha) straight from the gamma function
double kernel_oracle(int d, double a) {
    return a * std::pow(2.0, a - 1.0) * std::tgamma((a + d) / 2.0) /
           (std::pow(M_PI, d / 2.0) * std::tgamma(1.0 - a / 2.0));
}

Vec e1() {
    Vec w = Vec::Zero(2);
    w(0) = 1.0;
    return w;
}

struct MeanSe {
    double mean, se;
};

MeanSe mean_se(const std::vector<double>& x) {
    double s = 0, s2 = 0;
    for (double v : x) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(x.size());
    const double m = s / n;
    return {m, std::sqrt((s2 / n - m * m) / n)};
}

}  // namespace

TEST_SUITE("levy_noise") {

TEST_CASE("stable kernel constant") {
    CHECK(levy::stable_kernel_constant(1, 1.0) == doctest::Approx(1.0 / M_PI).epsilon(1e-12));
    CHECK(levy::stable_kernel_constant(1, 1.5) == doctest::Approx(0.29923).epsilon(1e-4));
    for (int d = 1; d <= 4; ++d)
        for (double a : {0.3, 0.8, 1.2, 1.7})
            CHECK(levy::stable_kernel_constant(d, a) == doctest::Approx(kernel_oracle(d, a)).epsilon(1e-12));
    // (2 - alpha) d is exact only on the line; the general limit is 2 Gamma(1 + d/2) (2 - alpha) / pi^{d/2}
    CHECK(levy::stable_kernel_constant(1, 1.999) / (2.0 - 1.999) == doctest::Approx(1.0).epsilon(0.02));
    for (int d = 1; d <= 3; ++d) {
        const double lim = 2.0 * std::tgamma(1.0 + d / 2.0) * (2.0 - 1.999) / std::pow(M_PI, d / 2.0);
        CHECK(levy::stable_kernel_constant(d, 1.999) / lim == doctest::Approx(1.0).epsilon(0.02));
    }
    CHECK(levy::stable_kernel_constant(2, 2.0) == 0.0);
}

TEST_CASE("symmetric stable CF at xi = 1") {
    rng::Stream s(101);
    std::vector<double> c(1000000);
    for (auto& v : c) v = std::cos(levy::sample_stable_1d(1.5, 1.0, 1.0, s));
    const auto m = mean_se(c);
    CHECK(std::abs(m.mean - std::exp(-1.0)) <= 3.0 * m.se);
}

TEST_CASE("alpha = 2 is Gaussian") {
    rng::Stream s(7);
    std::vector<double> x(200000), c(200000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = levy::sample_stable_1d(2.0, 0.5, 1.0, s);
        c[i] = x[i] * x[i];
    }
    const auto m2 = mean_se(c);
    CHECK(std::abs(m2.mean - 1.0) <= 3.0 * m2.se);
    CHECK_THROWS_AS(levy::sample_stable_1d(2.5, 1.0, 1.0, s), ValueError);
    CHECK_THROWS_AS(levy::sample_stable_1d(0.0, 1.0, 1.0, s), ValueError);
}

TEST_CASE("self-similarity of increments") {
    rng::Stream s(11);
    const double a = 1.3, dt = 0.01;
    std::vector<double> small(100000), unit(100000);
    for (auto& v : small) v = levy::sample_stable_1d(a, 1.0, dt, s) / std::pow(dt, 1.0 / a);
    for (auto& v : unit) v = levy::sample_stable_1d(a, 1.0, 1.0, s);
    CHECK(lab::ks_distance(small, unit) < 0.01);
}

TEST_CASE("compound Poisson counts and support") {
    levy::CompoundPoissonSpec cp;
    cp.rate = 2.0;
    cp.direction = e1();
    cp.jump.law = levy::JumpLaw::deterministic;
    cp.jump.size = 1.0;
    rng::Stream s(3);
    std::vector<double> counts(100000);
    for (auto& k : counts) {
        const auto inc = levy::sample_compound_poisson(cp, 1.0, s);
        k = static_cast<double>(inc.events.size());
        CHECK(inc.increment(0) == k);
        CHECK(inc.increment(1) == 0.0);
        for (const auto& e : inc.events) CHECK((e.time >= 0.0 && e.time <= 1.0));
    }
    const auto m = mean_se(counts);
    CHECK(std::abs(m.mean - 2.0) <= 3.0 * m.se);
}

TEST_CASE("Pareto jump sizes have mean beta u0 / (beta - 1)") {
    levy::JumpSizeLaw law;
    law.law = levy::JumpLaw::pareto;
    law.tail_index = 2.5;
    law.minimum = 1.0;
    rng::Stream s(9);
    std::vector<double> x(400000);
    for (auto& v : x) v = law.sample(s);
    const auto m = mean_se(x);
    CHECK(std::abs(m.mean - 5.0 / 3.0) <= 3.0 * m.se);
    CHECK(law.mean_size() == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("theta_c intervals") {
    levy::LevySpec iso;
    iso.drift = Vec::Zero(2);
    iso.components.emplace_back(levy::IsotropicStableSpec{1.5, 1.0});
    auto t = levy::theta_c(iso);
    CHECK(t.sup == 1.5);
    CHECK_FALSE(t.closed_at_sup);

    levy::LevySpec mix;
    mix.drift = Vec::Zero(2);
    mix.components.emplace_back(levy::StableAxisSpec{1.5, Vec::Ones(2), 0.0});
    levy::CompoundPoissonSpec cp;
    cp.direction = e1();
    cp.jump.law = levy::JumpLaw::exponential;
    mix.components.emplace_back(cp);
    t = levy::theta_c(mix);
    CHECK(t.sup == 1.5);
    CHECK_FALSE(t.closed_at_sup);

    levy::LevySpec det;
    det.drift = Vec::Zero(2);
    cp.jump.law = levy::JumpLaw::deterministic;
    det.components.emplace_back(cp);
    CHECK(levy::theta_c(det).unbounded());

    cp.jump.law = levy::JumpLaw::empirical;
    cp.jump.samples = {1.0, 2.0};
    det.components.emplace_back(cp);
    CHECK_THROWS_AS(levy::theta_c(det), UnsupportedAnalyticError);
}

TEST_CASE("adding a component never enlarges theta_c") {
    levy::LevySpec spec;
    spec.drift = Vec::Zero(2);
    double prev = levy::theta_c(spec).sup;
    std::vector<levy::Component> comps;
    levy::CompoundPoissonSpec cp;
    cp.direction = e1();
    cp.jump.law = levy::JumpLaw::pareto;
    cp.jump.tail_index = 1.8;
    comps.emplace_back(levy::StableAxisSpec{1.9, Vec::Ones(2), 0.0});
    comps.emplace_back(cp);
    comps.emplace_back(levy::IsotropicStableSpec{1.2, 1.0});
    for (const auto& c : comps) {
        spec.components.push_back(c);
        const double now = levy::theta_c(spec).sup;
        CHECK(now <= prev);
        prev = now;
    }
    CHECK(prev == 1.2);
}

TEST_CASE("effective drift") {
    Vec ell(2);
    ell << -1.0, 0.5;
    levy::LevySpec sym;
    sym.drift = Vec::Zero(2);
    sym.components.emplace_back(levy::StableAxisSpec{1.5, Vec::Ones(2), 0.0});
    sym.components.emplace_back(levy::IsotropicStableSpec{1.3, 2.0});
    auto ed = levy::effective_drift(sym, ell);
    CHECK((ed.ell_tilde - ell).norm() == 0.0);
    CHECK(ed.first_moment_finite);

    levy::LevySpec cps;
    cps.drift = Vec::Constant(2, 0.1);
    levy::CompoundPoissonSpec cp;
    cp.rate = 1.0;
    cp.direction = e1();
    cp.jump.law = levy::JumpLaw::exponential;
    cp.jump.mean = 1.0;
    cps.components.emplace_back(cp);
    const auto tail = quad::integrate([](double u) { return u * std::exp(-u); }, 1.0, 60.0, 1e-12, 1e-14);
    CHECK(tail.value == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-10));
    ed = levy::effective_drift(cps, ell);
    CHECK(ed.ell_tilde(0) == doctest::Approx(ell(0) + 0.1 + tail.value).epsilon(1e-10));
    CHECK(ed.ell_tilde(1) == doctest::Approx(ell(1) + 0.1));

    levy::LevySpec heavy;
    heavy.drift = Vec::Constant(2, 0.2);
    heavy.components.emplace_back(levy::StableAxisSpec{0.8, Vec::Ones(2), 0.0});
    ed = levy::effective_drift(heavy, ell);
    CHECK_FALSE(ed.first_moment_finite);
    CHECK((ed.ell_tilde - (ell + heavy.drift)).norm() < 1e-15);
}

TEST_CASE("streams are reproducible") {
    rng::Stream a(42, 3, 7, rng::kLevyBase), b(42, 3, 7, rng::kLevyBase), c(42, 4, 7, rng::kLevyBase);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = levy::sample_stable_1d(1.5, 1.0, 0.01, a);
        CHECK(x == levy::sample_stable_1d(1.5, 1.0, 0.01, b));
        differs = differs || x != levy::sample_stable_1d(1.5, 1.0, 0.01, c);
    }
    CHECK(differs);
}

}  // TEST_SUITE
