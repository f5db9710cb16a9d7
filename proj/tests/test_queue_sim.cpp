#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "htol/error.hpp"
#include "htol/estimators.hpp"
#include "htol/queue_sim.hpp"
#include "htol/rng.hpp"

using namespace htol;
using queue::Vec;

namespace {

Vec one(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

queue::QueueModelSpec mm1(double lambda) {
    queue::QueueModelSpec s;
    s.d = 1;
    s.n = 1;
    s.lambda = one(lambda);
    s.lambda_n = one(lambda);
    s.mu = one(1.0);
    s.gamma = one(0.0);
    s.v = one(1.0);
    return s;
}

queue::QueueFamily two_class(double alpha) {
    queue::QueueFamily f;
    f.lambda = v2(0.5, 1.0);
    f.ell_hat = v2(-1.0, -1.0);
    f.mu = v2(1.0, 2.0);
    f.gamma = v2(0.5, 0.5);
    f.v = v2(0.5, 0.5);
    f.alpha = alpha;
    if (alpha < 2.0) f.arrivals = queue::ArrivalKind::pareto_renewal;
    return f;
}

}  // namespace

TEST_SUITE("queue_sim") {

TEST_CASE("M/M/1 mean number in system") {
    const auto p = queue::simulate_queue(mm1(0.5), 2e5, 17);
    CHECK(p.time_average_x(0) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(p.audit_failures == 0);
}

TEST_CASE("fast abandonment empties the queue") {
    auto s = mm1(10.0);
    s.n = 10;
    s.lambda = one(1.0);
    s.gamma = one(1e3);
    const auto p = queue::simulate_queue(s, 200.0, 5);
    CHECK(p.time_average_queue < 0.05);
    CHECK(p.fraction_above_n < 0.05);
    CHECK(p.audit_failures == 0);
}

TEST_CASE("bookkeeping holds at every event") {
    auto spec = two_class(2.0).at(200);
    queue::QueueRunOptions opt;
    opt.record_dt = 0.05;
    opt.keep_log = true;
    const auto p = queue::simulate_queue(spec, 5.0, 9, opt);
    CHECK(p.audit_failures == 0);
    CHECK(p.n_events > 1000);
    for (std::size_t k = 0; k < p.size(); ++k) {
        long sx = 0, sz = 0;
        for (int i = 0; i < p.d; ++i) {
            const std::size_t at = k * 2 + i;
            CHECK(p.x[at] == p.q[at] + p.z[at]);
            CHECK((p.q[at] >= 0 && p.z[at] >= 0));
            sx += p.x[at];
            sz += p.z[at];
        }
        CHECK(sz <= spec.n);
        CHECK(p.q[k * 2] + p.q[k * 2 + 1] == std::max(0L, sx - spec.n));
    }
}

TEST_CASE("closest-fraction allocation") {
    rng::Stream s(2);
    const Vec v = v2(0.3, 0.7);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<long> x = {static_cast<long>(s.uniform() * 300), static_cast<long>(s.uniform() * 300)};
        const long n = 1 + static_cast<long>(s.uniform() * 300);
        const auto q = queue::queue_allocation(x, n, v);
        CHECK(q[0] + q[1] == std::max(0L, x[0] + x[1] - n));
        CHECK((q[0] <= x[0] && q[1] <= x[1] && q[0] >= 0 && q[1] >= 0));
    }
}

TEST_CASE("scaling") {
    queue::QueueFamily f;
    f.lambda = one(1.0);
    f.ell_hat = one(-1.0);
    f.mu = one(1.0);
    f.gamma = one(0.0);
    f.v = one(1.0);
    const auto spec = f.at(400);
    CHECK(spec.lambda_n(0) == doctest::Approx(380.0));
    queue::QueuePath p;
    p.d = 1;
    p.horizon = 1.0;
    p.times = {0.0, 0.5, 1.0};
    p.x = {400, 400, 400};
    p.q = {0, 0, 0};
    p.z = {400, 400, 400};
    p.up = {1, 1, 1};
    const auto sp = queue::scale_path(p, spec, 2.0);
    for (double x : sp.states) CHECK(x == 0.0);
    CHECK(sp.ell_hat_n(0) == doctest::Approx(-1.0));
    CHECK(sp.rho_hat_n == doctest::Approx(1.0));
    p.x = {420, 420, 420};
    CHECK(queue::scale_path(p, spec, 2.0).states[0] == doctest::Approx(1.0));
    CHECK(queue::scale_path(p, spec, 1.5).states[0] == doctest::Approx(20.0 * std::pow(400.0, -1.0 / 1.5)));
}

TEST_CASE("no service while the servers are down") {
    auto f = two_class(2.0);
    f.interruptions.enabled = true;
    f.interruptions.up_rate = 2.0;
    f.interruptions.down.law = levy::JumpLaw::exponential;
    f.interruptions.down.mean = 1.0;
    queue::QueueRunOptions opt;
    opt.keep_log = true;
    const auto p = queue::simulate_queue(f.at(100), 20.0, 4, opt);
    CHECK(p.down_intervals.size() > 5);
    for (const auto& e : p.log) {
        if (e.kind != queue::EventKind::service) continue;
        for (const auto& [a, b] : p.down_intervals) CHECK_FALSE((e.time > a && e.time < b));
    }
    f.alpha = 1.5;
    f.arrivals = queue::ArrivalKind::pareto_renewal;
    CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("event logs are reproducible") {
    const auto spec = two_class(1.5).at(100);
    queue::QueueRunOptions opt;
    opt.keep_log = true;
    const auto a = queue::simulate_queue(spec, 5.0, 33, opt);
    const auto b = queue::simulate_queue(spec, 5.0, 33, opt);
    REQUIRE(a.log.size() == b.log.size());
    bool same = true;
    for (std::size_t i = 0; i < a.log.size(); ++i)
        same = same && a.log[i].time == b.log[i].time && a.log[i].kind == b.log[i].kind && a.log[i].cls == b.log[i].cls;
    CHECK(same);
    CHECK(a.x == b.x);
}

TEST_CASE("diffusion-scaled queue approaches its limit") {
    queue::QueueFamily f;
    f.lambda = one(1.0);
    f.ell_hat = one(-1.0);
    f.mu = one(1.0);
    f.gamma = one(0.5);
    f.v = one(1.0);
    const auto limit = queue::limit_model(f);
    const auto rep = queue::fclt_compare(f, {50, 200, 800}, limit, 1.0, 2000, 123, 2);
    REQUIRE(rep.points.size() == 3);
    int inversions = 0;
    for (std::size_t i = 1; i < rep.points.size(); ++i) {
        const auto& prev = rep.points[i - 1];
        const auto& cur = rep.points[i];
        if (cur.ks >= prev.ks) {
            ++inversions;
            CHECK(cur.lo <= prev.hi);
        }
    }
    CHECK(inversions <= 1);
    // limit against an independent copy of itself
    CHECK(rep.null.ks <= rep.null.hi);
    CHECK(rep.null.ks <= 1.36 * std::sqrt(2.0 / rep.reps));
}

TEST_CASE("limit index must match the family") {
    auto f = two_class(2.0);
    auto limit = queue::limit_model(two_class(1.5));
    CHECK_THROWS_AS(queue::fclt_compare(f, {50}, limit, 1.0, 20, 1, 1), ConfigError);
}

}  // TEST_SUITE
