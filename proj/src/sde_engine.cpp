#include "htol/sde_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "htol/error.hpp"
#include "htol/matrix_core.hpp"
#include "htol/parallel.hpp"
#include "htol/regime.hpp"

namespace htol {

int default_threads() {
    if (const char* env = std::getenv("HTOL_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace htol

namespace htol::sde {

Diffusion Diffusion::constant_matrix(Mat s) {
    Diffusion d;
    d.kind = s.size() == 0 ? Kind::none : Kind::constant;
    d.noise_dim = static_cast<int>(s.cols());
    d.kappa = s.squaredNorm();
    d.bounded = true;
    d.sigma = std::move(s);
    return d;
}

Diffusion Diffusion::callable(std::function<Mat(const Vec&)> f, int noise_dim, double kappa, bool bounded) {
    Diffusion d;
    d.kind = Kind::callable;
    d.sigma_fn = std::move(f);
    d.noise_dim = noise_dim;
    d.kappa = kappa;
    d.bounded = bounded;
    return d;
}

Mat Diffusion::at(const Vec& x) const {
    switch (kind) {
        case Kind::none: return Mat::Zero(x.size(), 0);
        case Kind::constant: return sigma;
        case Kind::callable: return sigma_fn(x);
    }
    return {};
}

Mat Diffusion::covariance(const Vec& x) const {
    if (kind == Kind::none) return Mat::Zero(x.size(), x.size());
    const Mat s = at(x);
    return s * s.transpose();
}

void PiecewiseOUModel::validate(bool require_row_condition) const {
    const int d = dim();
    if (d < 1) throw DimensionError("model dimension must be positive");
    if (m.rows() != d || m.cols() != d) throw DimensionError("M must be d x d");
    if (gamma.size() != d) throw DimensionError("Gamma must have d diagonal entries");
    if (!ell.allFinite() || !m.allFinite() || !gamma.allFinite()) throw ValueError("model has non-finite entries");
    if ((gamma.array() < 0.0).any()) throw ValueError("Gamma must be nonnegative");
    const auto mc = matrix::validate_m_matrix(m);
    if (!mc.ok) throw ValueError("M is not a nonsingular M-matrix");
    if (require_row_condition && !mc.row_condition) throw ValueError("M violates e'M >= 0");
    if (control.is_constant()) {
        if (control.constant.size() != d) throw DimensionError("control has wrong dimension");
        if (!matrix::in_simplex(control.constant)) throw ValueError("control is not in the simplex");
    } else {
        // spot check a few states
        for (int k = 0; k < 8; ++k) {
            Vec x = Vec::Constant(d, (k - 4) * 2.5);
            if (d > 1) x(k % d) += 3.0;
            const Vec v = control.at(x);
            if (v.size() != d || !matrix::in_simplex(v, 1e-9)) throw ValueError("Markov control leaves the simplex");
        }
    }
    if (diffusion.kind == Diffusion::Kind::constant && diffusion.sigma.rows() != d)
        throw DimensionError("sigma must have d rows");
    if (diffusion.kind == Diffusion::Kind::callable) {
        // linear growth spot check on a small grid
        for (int k = 0; k < 16; ++k) {
            Vec x = Vec::Zero(d);
            x(k % d) = std::pow(2.0, k) * ((k % 2) ? -1.0 : 1.0);
            const Mat s = diffusion.at(x);
            if (s.rows() != d) throw DimensionError("sigma(x) must have d rows");
            if (s.squaredNorm() > diffusion.kappa * (1.0 + x.squaredNorm()) * (1.0 + 1e-12))
                throw ValueError("sigma violates the linear growth bound");
        }
    }
    levy.validate(d);
}

PiecewiseOUModel make_model(Vec ell, Mat m, Vec gamma, Vec v) {
    PiecewiseOUModel model;
    const int d = static_cast<int>(ell.size());
    model.ell = std::move(ell);
    model.m = std::move(m);
    model.gamma = std::move(gamma);
    model.control = Control::fixed(std::move(v));
    model.levy.drift = Vec::Zero(d);
    return model;
}

Vec drift(const PiecewiseOUModel& model, const Vec& x) {
    const double s = std::max(0.0, x.sum());
    const Vec v = model.control.at(x);
    return model.ell - model.m * (x - s * v) - s * model.gamma.cwiseProduct(v);
}

namespace {

struct Hasher {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 0x100000001b3ULL;
        }
    }
    void num(double x) {
        if (x == 0.0) x = 0.0;  // fold -0
        bytes(&x, sizeof x);
    }
    void tag(const char* s) { bytes(s, std::strlen(s) + 1); }
    void vec(const Vec& v) {
        num(static_cast<double>(v.size()));
        for (int i = 0; i < v.size(); ++i) num(v(i));
    }
    void mat(const Mat& m) {
        num(static_cast<double>(m.rows()));
        num(static_cast<double>(m.cols()));
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) num(m(i, j));
    }
};

}  // namespace

std::uint64_t model_hash(const PiecewiseOUModel& model) {
    Hasher h;
    h.tag("ell");
    h.vec(model.ell);
    h.tag("M");
    h.mat(model.m);
    h.tag("Gamma");
    h.vec(model.gamma);
    if (model.control.is_constant()) {
        h.tag("v");
        h.vec(model.control.constant);
    } else {
        h.tag("markov");
    }
    h.tag("diffusion");
    h.num(static_cast<double>(static_cast<int>(model.diffusion.kind)));
    if (model.diffusion.kind == Diffusion::Kind::constant) h.mat(model.diffusion.sigma);
    h.tag("levy");
    h.vec(model.levy.drift);
    for (const auto& c : model.levy.components) {
        if (const auto* a = std::get_if<levy::StableAxisSpec>(&c)) {
            h.tag("axis");
            h.num(a->alpha);
            h.vec(a->eta);
            h.num(a->skew);
        } else if (const auto* i = std::get_if<levy::IsotropicStableSpec>(&c)) {
            h.tag("iso");
            h.num(i->alpha);
            h.num(i->eta);
        } else if (const auto* p = std::get_if<levy::CompoundPoissonSpec>(&c)) {
            h.tag("cp");
            h.num(p->rate);
            h.vec(p->direction);
            h.num(static_cast<double>(static_cast<int>(p->jump.law)));
            h.num(p->jump.size);
            h.num(p->jump.mean);
            h.num(p->jump.tail_index);
            h.num(p->jump.minimum);
            for (double s : p->jump.samples) h.num(s);
        }
    }
    return h.h;
}

std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 15];
    return s;
}

void PathConfig::validate(int d) const {
    if (!(dt > 0.0)) throw ValueError("dt must be positive");
    if (!(horizon >= dt)) throw ValueError("horizon must be at least dt");
    if (n_paths < 1) throw ValueError("n_paths must be positive");
    if (effective_burn_in() >= horizon) throw ValueError("burn_in must be smaller than the horizon");
    if (record_stride < 1) throw ValueError("record_stride must be positive");
    if (thin_stride < 0) throw ValueError("thin_stride must be nonnegative");
    if (x0_ensemble.empty()) {
        if (x0.size() != d) throw DimensionError("x0 has wrong dimension");
    } else {
        for (const auto& s : x0_ensemble)
            if (s.size() != d) throw DimensionError("x0 ensemble entry has wrong dimension");
    }
}

long PathConfig::steps() const { return static_cast<long>(std::ceil(horizon / dt - 1e-9)); }

Vec PathConfig::start(int path_index) const {
    if (x0_ensemble.empty()) return x0;
    return x0_ensemble[static_cast<std::size_t>(path_index) % x0_ensemble.size()];
}

namespace {

struct StepEvent {
    double time;
    const levy::JumpEvent* ev;
};

}  // namespace

Path simulate_path(const PiecewiseOUModel& model, const PathConfig& config, std::size_t path_index) {
    const int d = model.dim();
    config.validate(d);
    const long steps = config.steps();
    const double dt = config.dt;
    const bool constant_control = model.control.is_constant();
    const Vec sim_drift = levy::simulation_drift(model.levy, d);
    const Vec base = model.ell + sim_drift;
    Vec kink;  // M v - Gamma v for a constant control
    if (constant_control) kink = model.m * model.control.constant - model.gamma.cwiseProduct(model.control.constant);

    Path path;
    path.dim = d;
    Vec x = config.start(static_cast<int>(path_index));
    Vec b(d), tmp(d);
    const bool has_diffusion = model.diffusion.kind != Diffusion::Kind::none && model.diffusion.noise_dim > 0;
    const int nd = model.diffusion.noise_dim;
    Vec z(std::max(nd, 1));

    const std::size_t expected = static_cast<std::size_t>(steps / config.record_stride + 2);
    path.times.reserve(expected);
    path.states.reserve(expected * d);
    path.jump_flags.reserve(expected);
    auto record = [&](double t, bool jumped) {
        path.times.push_back(t);
        for (int i = 0; i < d; ++i) path.states.push_back(x(i));
        path.jump_flags.push_back(jumped ? 1 : 0);
    };
    std::vector<long> marks;
    for (double t : config.record_times) marks.push_back(std::lround(t / dt));
    std::sort(marks.begin(), marks.end());
    std::size_t next_mark = 0;
    const bool use_marks = !marks.empty();
    if (use_marks) {
        while (next_mark < marks.size() && marks[next_mark] <= 0) {
            record(0.0, false);
            ++next_mark;
        }
    } else if (config.record_from <= 0.0) {
        record(0.0, false);
    }

    auto drift_into = [&](const Vec& xs) {
        const double s = std::max(0.0, xs.sum());
        if (constant_control) {
            b.noalias() = base - model.m * xs;
            if (s > 0.0) b += s * kink;
        } else {
            const Vec v = model.control.at(xs);
            b = base - model.m * (xs - s * v) - s * model.gamma.cwiseProduct(v);
        }
    };
    auto move = [&](double h, rng::Stream& bs) {
        if (h <= 0.0) return;
        drift_into(x);
        if (has_diffusion) {
            const double sh = std::sqrt(h);
            for (int i = 0; i < nd; ++i) z(i) = sh * bs.normal();
            if (model.diffusion.kind == Diffusion::Kind::constant) tmp.noalias() = model.diffusion.sigma * z;
            else tmp = model.diffusion.at(x) * z;
            x += h * b + tmp;
        } else {
            x += h * b;
        }
    };

    std::vector<levy::JumpEvent> step_events;
    std::vector<StepEvent> order;
    bool jumped_since_record = false;
    for (long k = 0; k < steps; ++k) {
        const double t0 = static_cast<double>(k) * dt;
        step_events.clear();
        order.clear();
        for (std::size_t ci = 0; ci < model.levy.components.size(); ++ci) {
            if (const auto* cp = std::get_if<levy::CompoundPoissonSpec>(&model.levy.components[ci])) {
                rng::Stream cs(config.master_seed, path_index, static_cast<std::uint64_t>(k), rng::kLevyBase + ci);
                auto inc = levy::sample_compound_poisson(*cp, dt, cs);
                for (auto& e : inc.events) step_events.push_back(std::move(e));
            }
        }
        for (const auto& e : step_events) order.push_back({e.time, &e});
        std::stable_sort(order.begin(), order.end(), [](const StepEvent& a, const StepEvent& c) { return a.time < c.time; });

        rng::Stream bs(config.master_seed, path_index, static_cast<std::uint64_t>(k), rng::kBrownian);
        double tc = 0.0;
        for (const auto& ev : order) {
            move(ev.time - tc, bs);
            x += ev.ev->jump;
            tc = ev.time;
            ++path.n_jumps;
            if (config.keep_jump_log) path.jumps.push_back({t0 + ev.time, ev.ev->jump});
        }
        move(dt - tc, bs);
        if (!order.empty()) jumped_since_record = true;

        for (std::size_t ci = 0; ci < model.levy.components.size(); ++ci) {
            const auto& comp = model.levy.components[ci];
            if (const auto* sa = std::get_if<levy::StableAxisSpec>(&comp)) {
                rng::Stream ss(config.master_seed, path_index, static_cast<std::uint64_t>(k), rng::kLevyBase + ci);
                for (int i = 0; i < d; ++i) x(i) += levy::sample_stable_1d(sa->alpha, sa->eta(i), dt, ss, sa->skew);
            } else if (const auto* is = std::get_if<levy::IsotropicStableSpec>(&comp)) {
                rng::Stream ss(config.master_seed, path_index, static_cast<std::uint64_t>(k), rng::kLevyBase + ci);
                x += levy::sample_isotropic_stable(*is, d, dt, ss);
            }
        }

        const double t1 = static_cast<double>(k + 1) * dt;
        const double nx = x.norm();
        if (!(nx <= config.divergence_threshold)) {
            path.diverged = true;
            path.escape_time = t1;
            record(t1, jumped_since_record);
            break;
        }
        if (use_marks) {
            while (next_mark < marks.size() && marks[next_mark] == k + 1) {
                record(t1, jumped_since_record);
                jumped_since_record = false;
                ++next_mark;
            }
        } else if ((k + 1) % config.record_stride == 0 && t1 >= config.record_from - 1e-9 * dt) {
            record(t1, jumped_since_record);
            jumped_since_record = false;
        }
    }
    return path;
}

std::size_t PathEnsemble::diverged_count() const {
    std::size_t n = 0;
    for (const auto& p : paths) n += p.diverged ? 1 : 0;
    return n;
}

PathEnsemble simulate_ensemble(const PiecewiseOUModel& model, const PathConfig& config, int threads) {
    model.validate();
    config.validate(model.dim());
    PathEnsemble out;
    out.paths.resize(static_cast<std::size_t>(config.n_paths));
    out.model_hash = model_hash(model);
    out.seed = config.master_seed;
    out.config = config;
    parallel_for(out.paths.size(), threads, [&](std::size_t i) { out.paths[i] = simulate_path(model, config, i); });
    return out;
}

namespace {

double median_abs_deviation(std::vector<double> z) {
    if (z.empty()) return 1.0;
    const auto mid = z.begin() + static_cast<long>(z.size() / 2);
    std::nth_element(z.begin(), mid, z.end());
    const double med = *mid;
    for (auto& v : z) v = std::abs(v - med);
    std::nth_element(z.begin(), mid, z.end());
    return *mid > 0.0 ? *mid : 1.0;
}

double autocorrelation(const std::vector<double>& y, std::size_t lag) {
    const std::size_t n = y.size();
    if (lag >= n) return 0.0;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0, ck = 0.0;
    for (std::size_t i = 0; i < n; ++i) c0 += (y[i] - mean) * (y[i] - mean);
    for (std::size_t i = 0; i + lag < n; ++i) ck += (y[i] - mean) * (y[i + lag] - mean);
    return c0 > 0.0 ? ck / c0 : 0.0;
}

// bounded transform so heavy tails do not dominate the correlation estimate
std::vector<double> bounded_projection(const std::vector<double>& states, int d, double scale) {
    std::vector<double> y(states.size() / d);
    for (std::size_t k = 0; k < y.size(); ++k) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += states[k * d + i];
        y[k] = std::atan(s / scale);
    }
    return y;
}

}  // namespace

int choose_thin_stride(const PiecewiseOUModel& model, const PathConfig& config) {
    const int d = model.dim();
    PathConfig pilot = config;
    pilot.record_stride = 1;
    pilot.record_from = config.effective_burn_in();
    pilot.keep_jump_log = false;
    const double span = std::min(config.horizon - pilot.record_from, 2e5 * config.dt);
    pilot.horizon = pilot.record_from + span;
    const Path p = simulate_path(model, pilot, 0);
    std::vector<double> sums(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += p.states[k * d + i];
        sums[k] = s;
    }
    const double scale = median_abs_deviation(sums);
    const auto y = bounded_projection(p.states, d, scale);
    const std::size_t cap = std::max<std::size_t>(1, y.size() / 20);
    std::size_t hi = 1;
    while (hi < cap && autocorrelation(y, hi) > 0.2) hi *= 2;
    if (hi >= cap) return static_cast<int>(cap);
    std::size_t lo = hi / 2;
    if (lo == 0) return 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (autocorrelation(y, mid) > 0.2) lo = mid;
        else hi = mid;
    }
    return static_cast<int>(hi);
}

double effective_sample_size(const std::vector<double>& series, const std::vector<std::size_t>& offsets) {
    // Geyer's initial positive sequence, per path
    double ess = 0.0;
    for (std::size_t p = 0; p + 1 < offsets.size(); ++p) {
        const std::vector<double> y(series.begin() + static_cast<long>(offsets[p]),
                                    series.begin() + static_cast<long>(offsets[p + 1]));
        const std::size_t n = y.size();
        if (n < 4) {
            ess += static_cast<double>(n);
            continue;
        }
        double tau = 1.0;
        for (std::size_t k = 1; 2 * k + 1 < n; k += 2) {
            const double pair = autocorrelation(y, k) + autocorrelation(y, k + 1);
            if (pair <= 0.0) break;
            tau += 2.0 * pair;
            if (k > 2000) break;
        }
        ess += static_cast<double>(n) / std::max(tau, 1.0);
    }
    return ess;
}

StationaryEstimate stationary_sample(const PiecewiseOUModel& model, const PathConfig& config, int threads,
                                     bool override_classification) {
    model.validate();
    config.validate(model.dim());
    if (!override_classification) {
        const auto report = lab::classify(model);
        if (report.regime != lab::Regime::polynomial && report.regime != lab::Regime::exponential)
            throw RefusalError(std::string("model is not classified ergodic: ") + lab::to_string(report.regime));
    }
    const int d = model.dim();
    PathConfig run = config;
    run.thin_stride = config.thin_stride > 0 ? config.thin_stride : choose_thin_stride(model, config);
    run.record_stride = run.thin_stride;
    run.record_from = config.effective_burn_in();
    run.keep_jump_log = false;
    const PathEnsemble ens = simulate_ensemble(model, run, threads);

    StationaryEstimate est;
    est.dim = d;
    est.thin_stride = run.thin_stride;
    est.model_hash = ens.model_hash;
    est.seed = ens.seed;
    est.path_offsets.push_back(0);
    for (const auto& p : ens.paths) {
        if (p.diverged) throw RefusalError("a path diverged during stationary sampling");
        est.states.insert(est.states.end(), p.states.begin(), p.states.end());
        est.path_offsets.push_back(est.states.size() / d);
    }
    est.weights.assign(est.states.size() / d, 1.0);
    std::vector<double> sums(est.size());
    for (std::size_t k = 0; k < est.size(); ++k) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += est.states[k * d + i];
        sums[k] = s;
    }
    const double scale = median_abs_deviation(sums);
    const auto y = bounded_projection(est.states, d, scale);
    est.effective_sample_size = effective_sample_size(y, est.path_offsets);
    return est;
}

}  // namespace htol::sde
