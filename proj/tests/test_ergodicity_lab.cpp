#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "htol/error.hpp"
#include "htol/estimators.hpp"
#include "htol/generator.hpp"
#include "htol/matrix_core.hpp"
#include "htol/regime.hpp"
#include "htol/rng.hpp"

using namespace htol;
using lab::Mat;
using lab::Vec;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

sde::PiecewiseOUModel axis_model(const Vec& ell, double gamma, double alpha = 1.5) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = 2.0;
    auto model = sde::make_model(ell, m, Vec::Constant(2, gamma), v2(0.5, 0.5));
    model.levy.drift = Vec::Zero(2);
    model.levy.components.emplace_back(levy::StableAxisSpec{alpha, Vec::Ones(2), 0.0});
    return model;
}

Vec random_direction(rng::Stream& s, int d) {
    Vec u(d);
    for (int i = 0; i < d; ++i) u(i) = s.normal();
    return u / u.norm();
}

}  // namespace

TEST_SUITE("ergodicity_lab") {

TEST_CASE("spare capacity") {
    auto model = axis_model(Vec::Zero(2), 0.0);
    CHECK(lab::spare_capacity(model) == 0.0);
    model.ell = v2(-1, -1);
    CHECK(lab::spare_capacity(model) == doctest::Approx(1.5));
    // independent solve
    const Vec y = model.m.fullPivLu().solve(model.ell);
    CHECK(lab::spare_capacity(model) == doctest::Approx(-y.sum()).epsilon(1e-14));
    CHECK(lab::spare_capacity_queue(v2(-1, -2), v2(1, 2)) == doctest::Approx(2.0));
}

TEST_CASE("symmetric stable components leave the spare capacity alone") {
    auto model = axis_model(v2(-1, -1), 0.0);
    const double base = lab::spare_capacity(model);
    model.levy.components.emplace_back(levy::IsotropicStableSpec{1.2, 3.0});
    model.levy.components.emplace_back(levy::StableAxisSpec{0.7, v2(2, 0.5), 0.0});
    CHECK(lab::spare_capacity(model) == base);
}

TEST_CASE("classification examples") {
    auto poly = lab::classify(axis_model(v2(-1, -1), 0.0));
    CHECK(poly.regime == lab::Regime::polynomial);
    CHECK(poly.rate_exponent == doctest::Approx(0.5));
    CHECK(poly.moment_finite(0.3));
    CHECK_FALSE(poly.moment_finite(0.8));

    CHECK(lab::classify(axis_model(v2(0.25, 0.5), 0.0)).regime == lab::Regime::transient_predicted);

    auto ab = lab::classify(axis_model(v2(-1, -1), 1.0));
    CHECK(ab.regime == lab::Regime::exponential);
    CHECK(ab.moment_finite(1.0));
    CHECK_FALSE(ab.moment_finite(1.8));

    // zero spare capacity
    auto zero = axis_model(Vec::Zero(2), 0.0);
    CHECK(lab::classify(zero).regime == lab::Regime::not_positive_recurrent);

    // state-dependent control is outside the theory
    auto markov = axis_model(v2(-1, -1), 0.0);
    markov.control = sde::Control::state_dependent([](const Vec& x) { return x(0) > 0 ? v2(1, 0) : v2(0, 1); });
    CHECK(lab::classify(markov).regime == lab::Regime::outside_theory);
}

TEST_CASE("classify is a pure function") {
    const auto model = axis_model(v2(-1, -1), 0.0);
    const auto a = lab::classify(model), b = lab::classify(model);
    CHECK(a.regime == b.regime);
    CHECK(std::memcmp(&a.spare_capacity, &b.spare_capacity, sizeof(double)) == 0);
    CHECK(a.theta_c.sup == b.theta_c.sup);
    CHECK(a.ell_tilde == b.ell_tilde);
    CHECK(a.w_tilde == b.w_tilde);
    CHECK(a.rate_exponent == b.rate_exponent);
    CHECK(a.reasons == b.reasons);
    CHECK(a.irreducibility == b.irreducibility);
}

TEST_CASE("generator examples") {
    auto model = axis_model(v2(-1, -1), 0.0);
    CHECK(lab::eval_generator(model, lab::constant_function(3.0), v2(0.7, -2.0)).total == 0.0);

    // b(x) = -x, a = 2I, |x|^2 at the origin
    auto diff = sde::make_model(Vec::Zero(2), Mat::Identity(2, 2), Vec::Ones(2), v2(0.5, 0.5));
    diff.levy.drift = Vec::Zero(2);
    diff.diffusion = sde::Diffusion::constant_matrix(std::sqrt(2.0) * Mat::Identity(2, 2));
    CHECK(lab::eval_generator(diff, lab::quadratic_function(2), Vec::Zero(2)).total == doctest::Approx(4.0));

    Mat one = Mat::Ones(1, 1);
    auto line = sde::make_model(Vec::Zero(1), one, Vec::Zero(1), Vec::Ones(1));
    line.levy.drift = Vec::Zero(1);
    line.levy.components.emplace_back(levy::StableAxisSpec{1.5, Vec::Ones(1), 0.0});
    const auto g = lab::eval_generator(line, lab::truncated_coordinate(1, 0, 2.0), Vec::Zero(1));
    CHECK(std::abs(g.nonlocal) < 1e-6);
}

TEST_CASE("nonlocal term of V scales like |x|^(theta - alpha)") {
    const auto model = axis_model(v2(-1, -1), 0.0);
    const auto cert = matrix::find_q(model.m, model.gamma, model.control.constant,
                                     matrix::CertificateMode::no_abandonment);
    const double theta = 1.2;
    lab::LyapunovFunctionSpec spec;
    spec.q = cert.q;
    spec.theta = theta;
    const auto v = lab::lyapunov_function(spec);
    rng::Stream s(21);
    std::vector<Vec> dirs;
    for (int i = 0; i < 12; ++i) dirs.push_back(random_direction(s, 2));
    std::vector<double> scaled, envelope;
    for (double r : {1.0, 3.16, 10.0, 31.6, 100.0, 200.0, 400.0, 800.0, 1000.0}) {
        double peak = 0.0;
        for (const auto& u : dirs) peak = std::max(peak, std::abs(lab::eval_generator(model, v, r * u).nonlocal));
        scaled.push_back(std::pow(r, 1.5 - theta) * peak);
        if (r >= 100.0) envelope.push_back(peak);
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    CHECK(*lo > 0.0);
    CHECK(*hi / *lo < 10.0);
    for (std::size_t i = 1; i < envelope.size(); ++i) CHECK(envelope[i] < envelope[i - 1]);
}

TEST_CASE("Foster-Lyapunov verification") {
    lab::SamplePlan plan;
    plan.directions = 32;
    auto ab = axis_model(v2(-1, -1), 1.0);
    auto cert = matrix::find_q(ab.m, ab.gamma, ab.control.constant, matrix::CertificateMode::abandonment);
    auto rep = lab::verify_foster_lyapunov(ab, cert, 1.2, plan);
    CHECK(rep.violations == 0);
    CHECK(rep.c1 > 0.0);
    CHECK(rep.shells.back().radius == doctest::Approx(160.0));

    auto poly = axis_model(v2(-1, -1), 0.0);
    cert = matrix::find_q(poly.m, poly.gamma, poly.control.constant, matrix::CertificateMode::no_abandonment);
    rep = lab::verify_foster_lyapunov(poly, cert, 1.0, plan);
    CHECK(rep.violations == 0);

    auto tr = axis_model(v2(0.25, 0.5), 0.0);
    rep = lab::verify_foster_lyapunov(tr, cert, 1.0, plan);
    CHECK(rep.violations > 0);
    CHECK(std::any_of(rep.violating.begin(), rep.violating.end(), [](const lab::DriftPoint& p) { return p.in_cone; }));
}

TEST_CASE("idleness of a nonnegative sample is zero") {
    sde::StationaryEstimate st;
    st.dim = 2;
    rng::Stream s(4);
    for (int k = 0; k < 1000; ++k) {
        st.states.push_back(std::abs(s.normal()));
        st.states.push_back(std::abs(s.normal()));
        st.weights.push_back(1.0);
    }
    st.path_offsets = {0, 1000};
    CHECK(lab::mean_idleness(st).value == 0.0);
}

TEST_CASE("idleness identity for a Brownian model") {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = 2.0;
    auto model = sde::make_model(v2(-0.5, -1.0), m, Vec::Zero(2), v2(0.5, 0.5));
    model.levy.drift = Vec::Zero(2);
    model.diffusion = sde::Diffusion::constant_matrix(Mat::Identity(2, 2));
    CHECK(lab::spare_capacity(model) == doctest::Approx(1.0));
    sde::PathConfig c;
    c.dt = 0.01;
    c.horizon = 1000.0;
    c.n_paths = 40;
    c.burn_in = 20.0;
    c.thin_stride = 100;
    c.x0 = Vec::Zero(2);
    c.keep_jump_log = false;
    const auto st = sde::stationary_sample(model, c, 2);
    const auto e = lab::mean_idleness(st);
    CHECK(e.value == doctest::Approx(1.0).epsilon(0.05));
    CHECK(e.se < 0.02);
}

TEST_CASE("Hill estimator") {
    rng::Stream s(8);
    std::vector<double> pareto(1000000), expo(1000000);
    for (auto& x : pareto) x = std::pow(s.uniform(), -0.5);
    for (auto& x : expo) x = s.exponential();
    const auto tp = lab::tail_index(pareto);
    CHECK(tp.index == doctest::Approx(2.0).epsilon(0.05));
    CHECK(tp.power_law);
    CHECK_FALSE(lab::tail_index(expo).power_law);
    CHECK_THROWS_AS(lab::tail_index(std::vector<double>(50, 1.0)), SizeError);
}

TEST_CASE("projected TV") {
    rng::Stream s(12);
    const std::size_t n = 1000000;
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = s.normal();
    for (auto& x : b) x = 1.0 + s.normal();
    CHECK(lab::projected_tv(a, b) == doctest::Approx(2.0 * 0.5 * std::erfc(-0.5 / std::sqrt(2.0)) - 1.0).epsilon(0.01 / 0.38292));
    const int bins = lab::default_tv_bins(n);
    CHECK(lab::projected_tv(a, a) <= lab::tv_noise_floor(n, bins));
}

TEST_CASE("split-half TV stays at the noise floor") {
    const auto model = axis_model(v2(-1, -1), 1.0);
    const std::vector<double> times = {0.5, 1.0, 2.0, 4.0};
    sde::PathConfig c;
    c.dt = 0.01;
    c.n_paths = 4000;
    c.keep_jump_log = false;
    c.x0 = v2(3, 3);
    c.master_seed = 1;
    const auto a = lab::projected_marginals(model, Vec::Ones(2), c.x0, times, c, 2);
    c.master_seed = 2;
    const auto b = lab::projected_marginals(model, Vec::Ones(2), c.x0, times, c, 2);
    const int bins = lab::default_tv_bins(4000);
    for (std::size_t i = 0; i < times.size(); ++i)
        CHECK(lab::projected_tv(a[i], b[i], bins) <= 2.0 * lab::tv_noise_floor(4000, bins));
}

TEST_CASE("TV fit needs four points") {
    lab::TVDecayEstimate est;
    est.times = {1, 2, 3};
    est.tv = {0.5, 0.3, 0.2};
    est.noise_floor = {0.01, 0.01, 0.01};
    CHECK_THROWS_AS(lab::fit_tv(est, {}), FitError);
}

TEST_CASE("moment probe on light tails") {
    rng::Stream s(31);
    std::vector<double> g(1000000);
    for (auto& x : g) x = std::abs(s.normal());
    const auto probes = lab::moment_probe(g, {1, 2, 4, 8});
    for (const auto& p : probes) CHECK_FALSE(p.divergent);
    CHECK(probes[1].estimate == doctest::Approx(1.0).epsilon(0.01));

    std::vector<double> heavy(1000000);
    for (auto& x : heavy) x = std::pow(s.uniform(), -1.0 / 1.5);
    const auto hp = lab::moment_probe(heavy, {1.0, 1.8});
    CHECK_FALSE(hp[0].divergent);
    CHECK(hp[1].divergent);
}

}  // TEST_SUITE
