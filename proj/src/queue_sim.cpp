#include "htol/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "htol/error.hpp"
#include "htol/estimators.hpp"
#include "htol/parallel.hpp"
#include "htol/rng.hpp"

namespace htol::queue {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_vec(const Vec& x, int d, const char* name, bool positive) {
    if (x.size() != d) throw ConfigError(name, "expected " + std::to_string(d) + " entries");
    for (int i = 0; i < d; ++i) {
        if (!std::isfinite(x(i))) throw ConfigError(name, "non-finite entry");
        if (positive ? !(x(i) > 0.0) : x(i) < 0.0)
            throw ConfigError(name, positive ? "entries must be positive" : "entries must be nonnegative");
    }
}

void check_simplex(const Vec& v, int d) {
    check_vec(v, d, "v", false);
    if (std::abs(v.sum() - 1.0) > 1e-9) throw ConfigError("v", "fractions must sum to one");
}

void check_arrivals(ArrivalKind kind, double alpha, const InterruptionLaw& intr) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw ConfigError("alpha", "scaling index must lie in (1,2]");
    if (kind == ArrivalKind::poisson && alpha != 2.0)
        throw ConfigError("alpha", "Poisson arrivals scale with alpha = 2");
    if (kind == ArrivalKind::pareto_renewal && alpha == 2.0)
        throw ConfigError("alpha", "Pareto renewal arrivals need a tail index below 2");
    if (intr.enabled) {
        if (alpha != 2.0) throw ConfigError("interruptions", "service interruptions are supported only with alpha = 2");
        if (!(intr.up_rate > 0.0)) throw ConfigError("interruptions.up_rate", "must be positive");
    }
}

// Unit-mean Pareto gap of tail index alpha. The first gap of a stationary renewal
// process has the equilibrium law instead, which makes E A(t) = lambda t exactly.
double pareto_gap(rng::Stream& s, double alpha, bool first) {
    const double xm = (alpha - 1.0) / alpha;
    const double u = s.uniform();
    if (!first) return xm * std::pow(u, -1.0 / alpha);
    if (u < xm) return u;
    return xm * std::pow((1.0 - u) / (1.0 - xm), -1.0 / (alpha - 1.0));
}

}  // namespace

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::arrival: return "arrival";
        case EventKind::service: return "service";
        case EventKind::abandonment: return "abandonment";
        case EventKind::down: return "down";
        case EventKind::up: return "up";
    }
    return "?";
}

void QueueModelSpec::validate() const {
    if (d < 1) throw ConfigError("d", "need at least one class");
    if (n < 1) throw ConfigError("n", "need at least one server");
    check_vec(lambda, d, "lambda", true);
    check_vec(lambda_n, d, "lambda_n", true);
    check_vec(mu, d, "mu", true);
    check_vec(gamma, d, "gamma", false);
    check_simplex(v, d);
    if (!(alpha > 1.0 && alpha <= 2.0)) throw ConfigError("alpha", "scaling index must lie in (1,2]");
    if (arrivals == ArrivalKind::pareto_renewal && !(alpha < 2.0))
        throw ConfigError("alpha", "Pareto renewal arrivals need a tail index below 2");
    if (interruptions.enabled) check_arrivals(arrivals, alpha, interruptions);
}

bool QueueModelSpec::critical(double tol) const { return std::abs(rho().sum() - 1.0) <= tol; }

void QueueFamily::validate() const {
    const int d = static_cast<int>(lambda.size());
    if (d < 1) throw ConfigError("lambda", "need at least one class");
    check_vec(lambda, d, "lambda", true);
    if (ell_hat.size() != d) throw ConfigError("ell_hat", "expected " + std::to_string(d) + " entries");
    check_vec(mu, d, "mu", true);
    check_vec(gamma, d, "gamma", false);
    check_simplex(v, d);
    check_arrivals(arrivals, alpha, interruptions);
    if (std::abs(lambda.cwiseQuotient(mu).sum() - 1.0) > 1e-9)
        throw ConfigError("lambda", "the family must be critically loaded: sum lambda_i/mu_i = 1");
}

QueueModelSpec QueueFamily::at(long n) const {
    validate();
    QueueModelSpec s;
    s.d = static_cast<int>(lambda.size());
    s.n = n;
    s.lambda = lambda;
    s.lambda_n = static_cast<double>(n) * lambda + std::pow(static_cast<double>(n), 1.0 / alpha) * ell_hat;
    s.mu = mu;
    s.gamma = gamma;
    s.v = v;
    s.arrivals = arrivals;
    s.alpha = alpha;
    s.interruptions = interruptions;
    for (int i = 0; i < s.d; ++i)
        if (!(s.lambda_n(i) > 0.0)) throw ConfigError("ell_hat", "n = " + std::to_string(n) + " gives a nonpositive arrival rate");
    return s;
}

std::vector<long> queue_allocation(const std::vector<long>& x, long n, const Vec& v) {
    const std::size_t d = x.size();
    std::vector<long> q(d, 0);
    long r = std::max(0L, std::accumulate(x.begin(), x.end(), 0L) - n);
    const long total = r;
    while (r > 0) {
        double wsum = 0.0;
        bool any_weight = false;
        for (std::size_t i = 0; i < d; ++i)
            if (q[i] < x[i] && v(static_cast<long>(i)) > 0.0) {
                wsum += v(static_cast<long>(i));
                any_weight = true;
            }
        auto weight = [&](std::size_t i) {
            if (q[i] >= x[i]) return 0.0;
            return any_weight ? v(static_cast<long>(i)) : 1.0;
        };
        if (!any_weight) {
            wsum = 0.0;
            for (std::size_t i = 0; i < d; ++i) wsum += weight(i);
        }
        long given = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const double w = weight(i);
            if (w <= 0.0) continue;
            const long g = std::min(x[i] - q[i], static_cast<long>(std::floor(static_cast<double>(r) * w / wsum)));
            q[i] += g;
            given += g;
        }
        r -= given;
        if (given == 0 && r > 0) {
            // one unit to the class furthest below its target share, lowest index on ties
            std::size_t best = d;
            double best_gap = -kInf;
            for (std::size_t i = 0; i < d; ++i) {
                const double w = weight(i);
                if (w <= 0.0) continue;
                const double gap = w / wsum * static_cast<double>(total) - static_cast<double>(q[i]);
                if (gap > best_gap) {
                    best_gap = gap;
                    best = i;
                }
            }
            ++q[best];
            --r;
        }
    }
    return q;
}

QueuePath simulate_queue(const QueueModelSpec& spec, double horizon, std::uint64_t seed, const QueueRunOptions& opt) {
    spec.validate();
    if (!(horizon > 0.0)) throw ConfigError("horizon", "must be positive");
    const int d = spec.d;
    const auto du = static_cast<std::size_t>(d);
    const auto rep = opt.replication;
    const double nd = static_cast<double>(spec.n);

    std::vector<long> x(du);
    if (opt.x0.empty()) {
        const Vec r = spec.rho();
        for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] = std::lround(r(i) * nd);
    } else {
        if (opt.x0.size() != du) throw ConfigError("x0", "expected " + std::to_string(d) + " counts");
        for (std::size_t i = 0; i < du; ++i)
            if (opt.x0[i] < 0) throw ConfigError("x0", "counts must be nonnegative");
        x = opt.x0;
    }

    rng::Stream ctmc(seed, rep, 0, 1);
    rng::Stream env(seed, rep, 0, 2);
    std::vector<rng::Stream> arrival_streams;
    for (int i = 0; i < d; ++i) arrival_streams.emplace_back(seed, rep, 0, rng::kLevyBase + static_cast<std::uint64_t>(i));

    const bool renewal = spec.arrivals == ArrivalKind::pareto_renewal;
    auto interarrival = [&](int i) {
        return pareto_gap(arrival_streams[static_cast<std::size_t>(i)], spec.alpha, false) / spec.lambda_n(i);
    };
    auto first_gap = [&](int i) {
        return pareto_gap(arrival_streams[static_cast<std::size_t>(i)], spec.alpha, true) / spec.lambda_n(i);
    };
    std::vector<double> next_arrival(du, kInf);
    if (renewal)
        for (int i = 0; i < d; ++i) next_arrival[static_cast<std::size_t>(i)] = first_gap(i);

    const double down_scale = std::pow(nd, -1.0 / spec.alpha);
    bool up = true;
    double next_switch = spec.interruptions.enabled ? env.exponential() / spec.interruptions.up_rate : kInf;

    std::vector<double> marks = opt.record_times;
    if (!std::is_sorted(marks.begin(), marks.end())) throw ConfigError("record_times", "must be ascending");
    if (marks.empty() && opt.record_dt > 0.0) {
        const auto m = static_cast<long>(std::floor(horizon / opt.record_dt + 1e-9));
        for (long k = 0; k <= m; ++k) marks.push_back(static_cast<double>(k) * opt.record_dt);
    }
    std::size_t next_mark = 0;

    QueuePath path;
    path.d = d;
    path.horizon = horizon;
    std::vector<long> q = queue_allocation(x, spec.n, spec.v);
    std::vector<long> z(du);
    for (std::size_t i = 0; i < du; ++i) z[i] = x[i] - q[i];

    auto audit = [&]() {
        long sx = 0, sz = 0;
        for (std::size_t i = 0; i < du; ++i) {
            if (q[i] < 0 || z[i] < 0 || q[i] + z[i] != x[i]) ++path.audit_failures;
            sx += x[i];
            sz += z[i];
        }
        if (sz > spec.n) ++path.audit_failures;
        if (up && sz != std::min(sx, spec.n)) ++path.audit_failures;
    };
    auto reallocate = [&]() {
        if (up) {
            q = queue_allocation(x, spec.n, spec.v);
            for (std::size_t i = 0; i < du; ++i) z[i] = x[i] - q[i];
        } else {
            // servers are stopped: those in service stay put, newcomers wait
            for (std::size_t i = 0; i < du; ++i) q[i] = x[i] - z[i];
        }
        audit();
    };
    auto record = [&](double t) {
        path.times.push_back(t);
        for (std::size_t i = 0; i < du; ++i) {
            path.x.push_back(x[i]);
            path.q.push_back(q[i]);
            path.z.push_back(z[i]);
        }
        path.up.push_back(up ? 1 : 0);
    };
    auto log = [&](double t, EventKind k, int cls) {
        if (opt.keep_log) path.log.push_back({t, k, cls});
    };

    Vec area = Vec::Zero(d);
    double queue_area = 0.0, above_time = 0.0;
    auto accumulate = [&](double h) {
        long sx = 0, sq = 0;
        for (std::size_t i = 0; i < du; ++i) {
            area(static_cast<long>(i)) += h * static_cast<double>(x[i]);
            sx += x[i];
            sq += q[i];
        }
        queue_area += h * static_cast<double>(sq);
        if (sx > spec.n) above_time += h;
    };

    audit();
    double t = 0.0;
    double down_start = 0.0;
    while (true) {
        while (next_mark < marks.size() && marks[next_mark] <= t) {
            record(marks[next_mark]);
            ++next_mark;
        }
        double rate = 0.0;
        for (std::size_t i = 0; i < du; ++i) {
            const auto il = static_cast<long>(i);
            if (!renewal) rate += spec.lambda_n(il);
            if (up) rate += spec.mu(il) * static_cast<double>(z[i]);
            rate += spec.gamma(il) * static_cast<double>(q[i]);
        }
        double timer = std::min(horizon, next_switch);
        int timer_kind = timer == next_switch && next_switch < horizon ? 1 : 0;
        int timer_cls = -1;
        if (next_mark < marks.size() && marks[next_mark] < timer) {
            timer = marks[next_mark];
            timer_kind = 2;
        }
        for (int i = 0; i < d; ++i)
            if (next_arrival[static_cast<std::size_t>(i)] < timer) {
                timer = next_arrival[static_cast<std::size_t>(i)];
                timer_kind = 3;
                timer_cls = i;
            }
        const double hold = rate > 0.0 ? ctmc.exponential() / rate : kInf;
        if (t + hold < timer) {
            accumulate(hold);
            t += hold;
            double u = ctmc.uniform() * rate;
            EventKind kind = EventKind::arrival;
            int cls = -1;
            for (std::size_t i = 0; i < du && cls < 0; ++i) {
                const auto il = static_cast<long>(i);
                if (!renewal) {
                    u -= spec.lambda_n(il);
                    if (u < 0.0) {
                        kind = EventKind::arrival;
                        cls = static_cast<int>(i);
                        break;
                    }
                }
                if (up) {
                    u -= spec.mu(il) * static_cast<double>(z[i]);
                    if (u < 0.0) {
                        kind = EventKind::service;
                        cls = static_cast<int>(i);
                        break;
                    }
                }
                u -= spec.gamma(il) * static_cast<double>(q[i]);
                if (u < 0.0) {
                    kind = EventKind::abandonment;
                    cls = static_cast<int>(i);
                    break;
                }
            }
            if (cls < 0) {
                // rounding left u a hair above zero: take the last event with positive rate
                for (int i = d - 1; i >= 0 && cls < 0; --i) {
                    const auto iu = static_cast<std::size_t>(i);
                    if (spec.gamma(i) > 0.0 && q[iu] > 0) kind = EventKind::abandonment, cls = i;
                    else if (up && z[iu] > 0) kind = EventKind::service, cls = i;
                    else if (!renewal) kind = EventKind::arrival, cls = i;
                }
            }
            const auto cu = static_cast<std::size_t>(cls);
            if (kind == EventKind::arrival) {
                ++x[cu];
            } else if (kind == EventKind::service) {
                --x[cu];
                --z[cu];
            } else {
                --x[cu];
                --q[cu];
            }
            ++path.n_events;
            log(t, kind, cls);
            reallocate();
            continue;
        }
        accumulate(timer - t);
        t = timer;
        if (timer_kind == 0) break;
        if (timer_kind == 2) continue;  // recorded at the top of the loop
        if (timer_kind == 3) {
            ++x[static_cast<std::size_t>(timer_cls)];
            next_arrival[static_cast<std::size_t>(timer_cls)] = t + interarrival(timer_cls);
            ++path.n_events;
            log(t, EventKind::arrival, timer_cls);
            reallocate();
            continue;
        }
        if (up) {
            up = false;
            down_start = t;
            next_switch = t + down_scale * spec.interruptions.down.sample(env);
            log(t, EventKind::down, -1);
        } else {
            up = true;
            path.down_intervals.emplace_back(down_start, t);
            next_switch = t + env.exponential() / spec.interruptions.up_rate;
            log(t, EventKind::up, -1);
        }
        ++path.n_events;
        reallocate();
    }
    while (next_mark < marks.size() && marks[next_mark] <= horizon + 1e-12) {
        record(marks[next_mark]);
        ++next_mark;
    }
    if (!up) path.down_intervals.emplace_back(down_start, horizon);
    path.time_average_x = area / horizon;
    path.time_average_queue = queue_area / horizon;
    path.fraction_above_n = above_time / horizon;
    return path;
}

ScaledPath scale_path(const QueuePath& path, const QueueModelSpec& spec, double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw ValueError("scale_path: alpha must lie in (1,2]");
    if (path.d != spec.d) throw DimensionError("scale_path: path and spec dimensions differ");
    const double nd = static_cast<double>(spec.n);
    const double f = std::pow(nd, -1.0 / alpha);
    const Vec r = spec.rho();
    ScaledPath out;
    out.dim = spec.d;
    out.times = path.times;
    out.states.reserve(path.x.size());
    for (std::size_t k = 0; k < path.size(); ++k)
        for (int i = 0; i < spec.d; ++i) out.states.push_back(f * (static_cast<double>(path.x_at(k, i)) - r(i) * nd));
    out.jump_flags.assign(path.size(), 0);
    out.ell_hat_n = f * (spec.lambda_n - nd * spec.lambda);
    const double rho_n = spec.lambda_n.cwiseQuotient(nd * spec.mu).sum();
    out.rho_hat_n = std::pow(nd, 1.0 - 1.0 / alpha) * (1.0 - rho_n);
    return out;
}

double pareto_arrival_eta(double lambda, double alpha) {
    // negative jumps of the centered count have density c / |y|^{1+alpha}, c = alpha lambda xm^alpha
    const double c_minus = alpha * lambda * std::pow((alpha - 1.0) / alpha, alpha);
    return c_minus / (2.0 * levy::stable_kernel_constant(1, alpha));
}

sde::PiecewiseOUModel limit_model(const QueueFamily& family) {
    family.validate();
    const int d = static_cast<int>(family.lambda.size());
    sde::PiecewiseOUModel m = sde::make_model(family.ell_hat, sde::Mat(family.mu.asDiagonal()), family.gamma, family.v);
    m.levy.drift = Vec::Zero(d);
    if (family.alpha == 2.0) {
        // arrival and service fluctuations each contribute diag(lambda)
        m.diffusion = sde::Diffusion::constant_matrix(sde::Mat((2.0 * family.lambda).cwiseSqrt().asDiagonal()));
    } else {
        levy::StableAxisSpec sa;
        sa.alpha = family.alpha;
        sa.eta = Vec(d);
        for (int i = 0; i < d; ++i) sa.eta(i) = pareto_arrival_eta(family.lambda(i), family.alpha);
        sa.skew = -1.0;
        m.levy.components.emplace_back(sa);
        // centered arrivals: the drift cancels the mean of the large jumps
        m.levy.drift -= levy::tail_integral(m.levy.components.back(), d);
    }
    if (family.interruptions.enabled) {
        levy::CompoundPoissonSpec cp;
        cp.rate = family.interruptions.up_rate;
        cp.direction = family.lambda;
        cp.jump = family.interruptions.down;
        // raw jumps, no compensation
        m.levy.drift += cp.rate * cp.jump.inner_mean(cp.direction.norm()) * cp.direction;
        m.levy.components.emplace_back(cp);
    }
    m.validate();
    return m;
}

double limit_alpha(const sde::PiecewiseOUModel& limit) {
    for (const auto& c : limit.levy.components) {
        if (const auto* sa = std::get_if<levy::StableAxisSpec>(&c)) return sa->alpha;
        if (const auto* is = std::get_if<levy::IsotropicStableSpec>(&c)) return is->alpha;
    }
    return 2.0;
}

ArrivalCalibration calibrate_arrivals(const QueueFamily& family, long n, double t, int reps, std::uint64_t seed,
                                      int threads, double xi) {
    const QueueModelSpec spec = family.at(n);
    if (spec.arrivals != ArrivalKind::pareto_renewal) throw ConfigError("arrivals", "calibration applies to renewal arrivals");
    if (reps < 2 || !(t > 0.0) || !(xi > 0.0)) throw ValueError("calibrate_arrivals: bad sizes");
    const int d = spec.d;
    const double f = std::pow(static_cast<double>(n), -1.0 / spec.alpha);
    std::vector<double> scaled(static_cast<std::size_t>(reps) * static_cast<std::size_t>(d));
    parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
        for (int i = 0; i < d; ++i) {
            rng::Stream s(seed, r, 0, rng::kLevyBase + static_cast<std::uint64_t>(i));
            double clock = pareto_gap(s, spec.alpha, true) / spec.lambda_n(i);
            long count = 0;
            while (clock <= t) {
                ++count;
                clock += pareto_gap(s, spec.alpha, false) / spec.lambda_n(i);
            }
            scaled[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] =
                f * (static_cast<double>(count) - spec.lambda_n(i) * t);
        }
    });
    ArrivalCalibration out;
    out.n = n;
    out.t = t;
    out.xi = xi;
    out.eta_analytic = Vec(d);
    out.eta_empirical = Vec(d);
    out.eta_se = Vec(d);
    const double denom = t * std::pow(xi, spec.alpha);
    for (int i = 0; i < d; ++i) {
        out.eta_analytic(i) = pareto_arrival_eta(spec.lambda(i), spec.alpha);
        double c = 0.0, s = 0.0, c2 = 0.0, s2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            const double y = scaled[static_cast<std::size_t>(r) * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
            const double cy = std::cos(xi * y), sy = std::sin(xi * y);
            c += cy;
            s += sy;
            c2 += cy * cy;
            s2 += sy * sy;
        }
        const double R = static_cast<double>(reps);
        c /= R;
        s /= R;
        const double mod = std::hypot(c, s);
        out.eta_empirical(i) = -std::log(mod) / denom;
        // delta method on the modulus
        const double var_mod = ((c2 / R - c * c) * c * c + (s2 / R - s * s) * s * s) / (mod * mod) / R;
        out.eta_se(i) = std::sqrt(std::max(0.0, var_mod)) / (mod * denom);
    }
    return out;
}

FcltReport fclt_compare(const QueueFamily& family, const std::vector<long>& ns, const sde::PiecewiseOUModel& limit,
                        double t_check, int n_reps, std::uint64_t seed, int threads, const FcltOptions& opt) {
    family.validate();
    const double la = limit_alpha(limit);
    if (la != family.alpha)
        throw ConfigError("limit", "limit noise index " + std::to_string(la) + " does not match the family index " +
                                       std::to_string(family.alpha));
    const int d = static_cast<int>(family.lambda.size());
    if (limit.dim() != d) throw ConfigError("limit", "dimension differs from the queue family");
    if (!(t_check > 0.0) || n_reps < 10) throw ValueError("fclt_compare: need t_check > 0 and at least 10 replications");
    const Vec x_hat0 = opt.x_hat0.size() == 0 ? Vec::Zero(d) : opt.x_hat0;
    if (x_hat0.size() != d) throw ConfigError("x_hat0", "wrong dimension");

    FcltReport rep;
    rep.t_check = t_check;
    rep.alpha = family.alpha;
    rep.reps = n_reps;

    auto limit_totals = [&](std::uint64_t s) {
        sde::PathConfig cfg;
        cfg.dt = opt.sde_dt;
        cfg.horizon = t_check;
        cfg.n_paths = opt.sde_reps > 0 ? opt.sde_reps : n_reps;
        cfg.master_seed = s;
        cfg.x0 = x_hat0;
        cfg.burn_in = 0.0;
        cfg.keep_jump_log = false;
        const auto marg = lab::projected_marginals(limit, Vec::Ones(d), x_hat0, {t_check}, cfg, threads);
        return marg[0];
    };
    rep.limit_totals = limit_totals(rng::mix64(seed ^ 0x51ed270b27e1f5a9ULL));
    rep.limit_mean = std::accumulate(rep.limit_totals.begin(), rep.limit_totals.end(), 0.0) /
                     static_cast<double>(rep.limit_totals.size());
    {
        const auto other = limit_totals(rng::mix64(seed ^ 0x2545f4914f6cdd1dULL));
        const auto ks = lab::ks_with_bootstrap(rep.limit_totals, other, opt.bootstrap, rng::mix64(seed + 7));
        rep.null = {ks.d, ks.lo, ks.hi};
    }

    for (long n : ns) {
        const QueueModelSpec spec = family.at(n);
        const double nd = static_cast<double>(n);
        const double f = std::pow(nd, -1.0 / family.alpha);
        const Vec r = spec.rho();
        QueueRunOptions ro;
        ro.record_times = {t_check};
        ro.x0.resize(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            ro.x0[static_cast<std::size_t>(i)] = std::max(0L, std::lround(r(i) * nd + x_hat0(i) / f));
        const std::uint64_t qseed = rng::mix64(seed ^ static_cast<std::uint64_t>(n));
        FcltPoint pt;
        pt.n = n;
        pt.totals.assign(static_cast<std::size_t>(n_reps), 0.0);
        parallel_for(pt.totals.size(), threads, [&](std::size_t k) {
            QueueRunOptions o = ro;
            o.replication = k;
            const QueuePath p = simulate_queue(spec, t_check, qseed, o);
            double tot = 0.0;
            for (int i = 0; i < d; ++i) tot += f * (static_cast<double>(p.x_at(0, i)) - r(i) * nd);
            pt.totals[k] = tot;
        });
        pt.queue_mean = std::accumulate(pt.totals.begin(), pt.totals.end(), 0.0) / static_cast<double>(n_reps);
        const auto ks = lab::ks_with_bootstrap(pt.totals, rep.limit_totals, opt.bootstrap, rng::mix64(qseed + 3));
        pt.ks = ks.d;
        pt.lo = ks.lo;
        pt.hi = ks.hi;
        rep.points.push_back(std::move(pt));
    }
    return rep;
}

}  // namespace htol::queue
