#include <doctest.h>

#include <cmath>

#include "htol/error.hpp"
#include "htol/estimators.hpp"
#include "htol/rng.hpp"
#include "htol/sde_engine.hpp"

using namespace htol;
using sde::Mat;
using sde::Vec;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Mat m2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

sde::PiecewiseOUModel stable_model(const Vec& ell, double gamma) {
    auto m = sde::make_model(ell, m2(1, 0, 0, 2), Vec::Constant(2, gamma), v2(0.5, 0.5));
    m.levy.drift = Vec::Zero(2);
    m.levy.components.emplace_back(levy::StableAxisSpec{1.5, Vec::Ones(2), 0.0});
    return m;
}

bool same_paths(const sde::PathEnsemble& a, const sde::PathEnsemble& b) {
    if (a.paths.size() != b.paths.size()) return false;
    for (std::size_t p = 0; p < a.paths.size(); ++p)
        if (a.paths[p].states != b.paths[p].states || a.paths[p].times != b.paths[p].times) return false;
    return true;
}

}  // namespace

TEST_SUITE("sde_engine") {

TEST_CASE("drift examples") {
    auto m = sde::make_model(v2(0.1, -0.2), m2(1, -0.5, 0, 2), v2(0.5, 1.0), v2(1, 0));
    CHECK((sde::drift(m, Vec::Zero(2)) - m.ell).norm() == 0.0);
    const Vec b = sde::drift(m, v2(1, 1));
    CHECK(b(0) == doctest::Approx(0.6));
    CHECK(b(1) == doctest::Approx(-2.2));
    // second branch written out independently
    const Vec e = Vec::Ones(2), x = v2(1, 1);
    const Mat g = m.gamma.asDiagonal();
    const Vec alt = m.ell - (m.m + (g - m.m) * m.control.constant * e.transpose()) * x;
    CHECK((alt - b).norm() < 1e-14);
}

TEST_CASE("branches agree on the hyperplane") {
    auto m = sde::make_model(v2(0.1, -0.2), m2(1, -0.5, 0, 2), v2(0.5, 1.0), v2(0.3, 0.7));
    rng::Stream s(5);
    const Vec e = Vec::Ones(2);
    const Mat g = m.gamma.asDiagonal();
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double a = 10.0 * (s.uniform() - 0.5);
        const Vec x = v2(a, -a);
        const Vec lower = m.ell - m.m * x;
        const Vec upper = m.ell - (m.m + (g - m.m) * m.control.constant * e.transpose()) * x;
        const Vec b = sde::drift(m, x);
        worst = std::max({worst, (b - lower).norm(), (b - upper).norm()});
    }
    CHECK(worst < 1e-13);
}

TEST_CASE("deterministic path converges to the ODE at first order") {
    const Mat m = m2(1, -0.5, 0, 2);
    const Vec ell = v2(-1, -1), x0 = v2(-2, -1);
    auto model = sde::make_model(ell, m, Vec::Zero(2), v2(0.5, 0.5));
    model.levy.drift = Vec::Zero(2);
    const double t = 2.0;
    // exp(-Mt) for the triangular M
    Mat ex(2, 2);
    ex << std::exp(-t), -0.5 * (std::exp(-2 * t) - std::exp(-t)), 0, std::exp(-2 * t);
    const Vec exact = ex * x0 + m.inverse() * (Mat::Identity(2, 2) - ex) * ell;
    std::vector<double> err;
    for (double dt : {1e-2, 1e-3}) {
        sde::PathConfig c;
        c.dt = dt;
        c.horizon = t;
        c.x0 = x0;
        const auto p = sde::simulate_path(model, c, 0);
        for (std::size_t k = 0; k < p.size(); ++k) CHECK(p.state(k).sum() < 0.0);
        err.push_back((p.final_state() - exact).norm());
    }
    const double order = std::log10(err[0] / err[1]);
    CHECK(order >= 0.9);
}

TEST_CASE("zero model stays at zero") {
    auto model = sde::make_model(Vec::Zero(2), Mat::Identity(2, 2), Vec::Zero(2), v2(0.5, 0.5));
    model.levy.drift = Vec::Zero(2);
    sde::PathConfig c;
    c.horizon = 1.0;
    c.x0 = Vec::Zero(2);
    const auto p = sde::simulate_path(model, c, 0);
    for (double x : p.states) CHECK(x == 0.0);
}

TEST_CASE("jump log matches the discontinuities") {
    auto model = sde::make_model(Vec::Zero(2), Mat::Identity(2, 2), Vec::Zero(2), v2(0.5, 0.5));
    levy::CompoundPoissonSpec cp;
    cp.rate = 1.0;
    cp.direction = v2(1, 0);
    cp.jump.law = levy::JumpLaw::deterministic;
    model.levy.drift = Vec::Zero(2);
    model.levy.components.emplace_back(cp);
    sde::PathConfig c;
    c.dt = 1e-3;
    c.horizon = 50.0;
    c.x0 = Vec::Zero(2);
    const auto p = sde::simulate_path(model, c, 3);
    std::size_t flagged = 0;
    for (auto f : p.jump_flags) flagged += f;
    CHECK(p.jumps.size() == p.n_jumps);
    CHECK(flagged == p.jumps.size());
    CHECK(p.jumps.size() > 20);
    for (const auto& j : p.jumps) CHECK((j.jump - v2(1, 0)).norm() == 0.0);
}

TEST_CASE("ensembles are reproducible and independent of thread count") {
    const auto model = stable_model(v2(-1, -1), 0.0);
    sde::PathConfig c;
    c.horizon = 5.0;
    c.n_paths = 4;
    c.master_seed = 77;
    c.x0 = Vec::Zero(2);
    const auto a = sde::simulate_ensemble(model, c, 1);
    const auto b = sde::simulate_ensemble(model, c, 1);
    const auto d = sde::simulate_ensemble(model, c, 4);
    CHECK(same_paths(a, b));
    CHECK(same_paths(a, d));
    c.master_seed = 78;
    CHECK_FALSE(same_paths(a, sde::simulate_ensemble(model, c, 1)));
}

TEST_CASE("no divergence in the ergodic configuration") {
    const auto model = stable_model(v2(-1, -1), 0.0);
    sde::PathConfig c;
    c.horizon = 50.0;
    c.n_paths = 64;
    c.x0 = Vec::Zero(2);
    c.keep_jump_log = false;
    CHECK(sde::simulate_ensemble(model, c, 2).diverged_count() == 0);
}

TEST_CASE("one-dimensional OU has unit stationary variance") {
    Mat one = Mat::Ones(1, 1);
    auto model = sde::make_model(Vec::Zero(1), one, Vec::Ones(1), Vec::Ones(1));
    model.diffusion = sde::Diffusion::constant_matrix(std::sqrt(2.0) * one);
    model.levy.drift = Vec::Zero(1);
    sde::PathConfig c;
    c.dt = 0.01;
    c.horizon = 2000.0;
    c.n_paths = 40;
    c.burn_in = 10.0;
    c.thin_stride = 200;
    c.x0 = Vec::Zero(1);
    const auto st = sde::stationary_sample(model, c, 2);
    std::vector<double> sq(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) sq[k] = st.state(k)(0) * st.state(k)(0);
    const auto v = lab::batch_mean(sq, st.path_offsets);
    CHECK(v.n_eff >= 1e4);
    CHECK(v.value == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("symmetric dynamics have mean zero") {
    // Gamma = M = I with v = (1/2,1/2) gives drift -x everywhere
    auto model = sde::make_model(Vec::Zero(2), Mat::Identity(2, 2), Vec::Ones(2), v2(0.5, 0.5));
    model.levy.drift = Vec::Zero(2);
    model.levy.components.emplace_back(levy::StableAxisSpec{1.5, Vec::Ones(2), 0.0});
    sde::PathConfig c;
    c.dt = 0.01;
    c.horizon = 300.0;
    c.n_paths = 40;
    c.burn_in = 10.0;
    c.thin_stride = 100;
    c.x0 = Vec::Zero(2);
    const auto st = sde::stationary_sample(model, c, 2);
    std::vector<double> s(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) s[k] = st.state(k).sum();
    const auto e = lab::path_mean(s, st.path_offsets);
    CHECK(std::abs(e.value) <= 3.0 * e.se);
}

TEST_CASE("transient models are refused unless overridden") {
    const auto model = stable_model(v2(0.25, 0.5), 0.0);
    sde::PathConfig c;
    c.horizon = 10.0;
    c.x0 = Vec::Zero(2);
    c.thin_stride = 10;
    CHECK_THROWS_AS(sde::stationary_sample(model, c, 1), RefusalError);
    CHECK_NOTHROW(sde::stationary_sample(model, c, 1, true));
}

TEST_CASE("configuration validation") {
    sde::PathConfig c;
    c.x0 = Vec::Zero(2);
    c.dt = -1.0;
    CHECK_THROWS(c.validate(2));
    c.dt = 0.01;
    CHECK_THROWS(c.validate(3));
}

}  // TEST_SUITE
