#include "htol/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "htol/error.hpp"
#include "htol/parallel.hpp"
#include "htol/regime.hpp"
#include "htol/rng.hpp"

namespace htol::lab {

namespace {

double series_variance(const std::vector<double>& series, double mean) {
    double v = 0.0;
    for (double x : series) v += (x - mean) * (x - mean);
    return series.size() > 1 ? v / static_cast<double>(series.size() - 1) : 0.0;
}

Estimate from_means(Estimate out, const std::vector<double>& series, const std::vector<double>& means) {
    out.batches = means.size();
    if (means.size() < 2) {
        out.se = std::numeric_limits<double>::infinity();
        return out;
    }
    const double mm = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means) var += (m - mm) * (m - mm);
    var /= static_cast<double>(means.size() - 1);
    out.se = std::sqrt(var / static_cast<double>(means.size()));
    out.n_eff = out.se > 0.0 ? series_variance(series, out.value) / (out.se * out.se) : static_cast<double>(out.n);
    return out;
}

}  // namespace

Estimate batch_mean(const std::vector<double>& series, const std::vector<std::size_t>& offsets,
                    std::size_t batch_size) {
    Estimate out;
    out.n = series.size();
    if (series.empty()) return out;
    if (batch_size == 0) batch_size = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(series.size()))));
    std::vector<double> means;
    double total = 0.0;
    for (double v : series) total += v;
    out.value = total / static_cast<double>(series.size());
    for (std::size_t p = 0; p + 1 < offsets.size(); ++p) {
        for (std::size_t s = offsets[p]; s + batch_size <= offsets[p + 1]; s += batch_size) {
            double acc = 0.0;
            for (std::size_t i = s; i < s + batch_size; ++i) acc += series[i];
            means.push_back(acc / static_cast<double>(batch_size));
        }
    }
    return from_means(out, series, means);
}

Estimate path_mean(const std::vector<double>& series, const std::vector<std::size_t>& offsets) {
    Estimate out;
    out.n = series.size();
    if (series.empty()) return out;
    out.value = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
    std::vector<double> means;
    for (std::size_t p = 0; p + 1 < offsets.size(); ++p) {
        if (offsets[p + 1] == offsets[p]) continue;
        double acc = 0.0;
        for (std::size_t i = offsets[p]; i < offsets[p + 1]; ++i) acc += series[i];
        means.push_back(acc / static_cast<double>(offsets[p + 1] - offsets[p]));
    }
    return from_means(out, series, means);
}

Estimate mean_idleness(const sde::StationaryEstimate& st) {
    std::vector<double> idle(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) idle[k] = std::max(0.0, -st.state(k).sum());
    if (st.path_offsets.size() > 20) return path_mean(idle, st.path_offsets);
    return batch_mean(idle, st.path_offsets);
}

namespace {

double hill(const std::vector<double>& desc, std::size_t k) {
    const double base = std::log(desc[k]);
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += std::log(desc[i]) - base;
    return static_cast<double>(k) / acc;
}

}  // namespace

TailIndexEstimate tail_index(std::vector<double> sample, std::size_t k) {
    sample.erase(std::remove_if(sample.begin(), sample.end(), [](double x) { return !(x > 0.0) || !std::isfinite(x); }),
                 sample.end());
    if (sample.size() < 100) throw SizeError("tail_index needs at least 100 positive values");
    const std::size_t n = sample.size();
    if (k == 0) k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    if (k >= n) throw SizeError("k must be smaller than the sample size");
    std::sort(sample.begin(), sample.end(), std::greater<double>());
    TailIndexEstimate out;
    out.k_used = k;
    out.index = hill(sample, k);
    out.ci_half_width = 1.96 * out.index / std::sqrt(static_cast<double>(k));
    for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const auto kk = static_cast<std::size_t>(std::llround(f * static_cast<double>(k)));
        if (kk >= 2 && kk < n) out.k_path.emplace_back(kk, hill(sample, kk));
    }
    const std::size_t k_lo = std::max<std::size_t>(2, k / 4), k_hi = std::min(n - 1, 4 * k);
    const double a = hill(sample, k_lo), b = hill(sample, k_hi);
    const double se = out.index * std::sqrt(1.0 / static_cast<double>(k_lo) + 1.0 / static_cast<double>(k_hi));
    out.trend_z = (a - b) / se;
    out.power_law = out.trend_z < 3.0;
    return out;
}

int default_tv_bins(std::size_t n) {
    const double b = 2.0 * std::cbrt(static_cast<double>(n));
    return static_cast<int>(std::clamp(b, 10.0, 200.0));
}

double tv_noise_floor(std::size_t n, int bins) { return 2.0 * std::sqrt(static_cast<double>(bins) / static_cast<double>(n)); }

double projected_tv(const std::vector<double>& a, const std::vector<double>& b, int bins) {
    if (a.empty() || b.empty()) throw SizeError("projected_tv needs two non-empty samples");
    if (bins <= 0) bins = default_tv_bins(std::min(a.size(), b.size()));
    std::vector<double> pooled;
    pooled.reserve(a.size() + b.size());
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    std::vector<double> edges;
    for (int k = 1; k < bins; ++k) {
        const double e = pooled[static_cast<std::size_t>(static_cast<double>(k) / bins * (pooled.size() - 1))];
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    const std::size_t nb = edges.size() + 1;
    std::vector<double> pa(nb, 0.0), pb(nb, 0.0);
    auto bin_of = [&](double x) {
        return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
    };
    for (double x : a) pa[bin_of(x)] += 1.0;
    for (double x : b) pb[bin_of(x)] += 1.0;
    double tv = 0.0;
    for (std::size_t i = 0; i < nb; ++i)
        tv += std::abs(pa[i] / static_cast<double>(a.size()) - pb[i] / static_cast<double>(b.size()));
    return 0.5 * tv;
}

std::vector<std::vector<double>> projected_marginals(const sde::PiecewiseOUModel& model, const Vec& w,
                                                     const Vec& x0, const std::vector<double>& times,
                                                     const sde::PathConfig& run, int threads) {
    if (times.empty() || !std::is_sorted(times.begin(), times.end()))
        throw ValueError("projected_marginals: times must be non-empty and ascending");
    sde::PathConfig cfg = run;
    cfg.x0 = x0;
    cfg.x0_ensemble.clear();
    cfg.record_times = times;
    cfg.horizon = *std::max_element(times.begin(), times.end());
    cfg.burn_in = 0.0;
    cfg.keep_jump_log = false;
    cfg.validate(model.dim());
    std::vector<std::vector<double>> per_path(static_cast<std::size_t>(cfg.n_paths));
    parallel_for(per_path.size(), threads, [&](std::size_t i) {
        const sde::Path p = sde::simulate_path(model, cfg, i);
        std::vector<double> z(times.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t k = 0; k < p.size() && k < times.size(); ++k) z[k] = w.dot(p.state(k));
        per_path[i] = std::move(z);
    });
    std::vector<std::vector<double>> out(times.size());
    for (std::size_t t = 0; t < times.size(); ++t) {
        out[t].reserve(per_path.size());
        for (const auto& z : per_path)
            if (std::isfinite(z[t])) out[t].push_back(z[t]);
    }
    return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    LineFit f;
    if (n < 2) return f;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        sse += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    f.slope_se = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    return f;
}

void fit_tv(TVDecayEstimate& est, const TVDecayOptions& opt) {
    const std::size_t n = est.times.size();
    est.fit_from = static_cast<std::size_t>(std::floor((1.0 - opt.fit_tail_fraction) * static_cast<double>(n)));
    est.fit_to = n;
    std::vector<double> xs, ys;
    for (std::size_t i = est.fit_from; i < n; ++i) {
        if (!(est.tv[i] > 0.0)) continue;
        if (est.tv[i] < opt.min_floor_multiple * est.noise_floor[i]) continue;
        xs.push_back(opt.log_time ? std::log(est.times[i]) : est.times[i]);
        ys.push_back(std::log(est.tv[i]));
    }
    if (xs.size() < 4) throw FitError("fewer than four usable grid points for the decay fit");
    const LineFit f = fit_line(xs, ys);
    est.slope = f.slope;
    est.intercept = f.intercept;
    est.slope_se = f.slope_se;
    est.r2 = f.r2;
    est.log_time = opt.log_time;
}

TVDecayEstimate tv_decay(const sde::PiecewiseOUModel& model, const sde::StationaryEstimate& reference, const Vec& x0,
                         const std::vector<double>& times, const sde::PathConfig& run, int threads,
                         const TVDecayOptions& opt) {
    const auto report = classify(model);
    if (report.regime != Regime::polynomial && report.regime != Regime::exponential)
        throw RefusalError("tv_decay needs an ergodic classification");
    const Vec w = report.w_tilde;
    std::vector<double> ref(reference.size());
    for (std::size_t k = 0; k < reference.size(); ++k) ref[k] = w.dot(reference.state(k));
    const auto marg = projected_marginals(model, w, x0, times, run, threads);
    TVDecayEstimate est;
    est.times = times;
    est.bins = opt.bins > 0 ? opt.bins : default_tv_bins(std::min(ref.size(), static_cast<std::size_t>(run.n_paths)));
    for (std::size_t t = 0; t < times.size(); ++t) {
        est.tv.push_back(projected_tv(marg[t], ref, est.bins));
        const double n_eff = 1.0 / (1.0 / static_cast<double>(marg[t].size()) + 1.0 / static_cast<double>(ref.size()));
        est.noise_floor.push_back(tv_noise_floor(static_cast<std::size_t>(n_eff), est.bins));
    }
    fit_tv(est, opt);
    return est;
}

std::vector<MomentProbe> moment_probe(const std::vector<double>& mags, const std::vector<double>& p_grid,
                                      const MomentProbeOptions& opt) {
    const std::size_t n = mags.size();
    const std::size_t top = std::size_t{1} << opt.doublings;
    std::size_t base = opt.base_batch;
    if (base == 0) base = n / (8 * top);
    if (base < 1 || base * top * 2 > n) throw SizeError("moment_probe: sample too small for the doubling schedule");
    std::vector<MomentProbe> out;
    for (double p : p_grid) {
        MomentProbe mp;
        mp.p = p;
        std::vector<double> powv(n);
        for (std::size_t i = 0; i < n; ++i) powv[i] = std::pow(mags[i], p);
        mp.estimate = std::accumulate(powv.begin(), powv.end(), 0.0) / static_cast<double>(n);
        for (int j = 0; j <= opt.doublings; ++j) {
            const std::size_t b = base << j;
            std::vector<double> means;
            for (std::size_t s = 0; s + b <= n; s += b) {
                double acc = 0.0;
                for (std::size_t i = s; i < s + b; ++i) acc += powv[i];
                means.push_back(acc / static_cast<double>(b));
            }
            auto mid = means.begin() + static_cast<long>(means.size() / 2);
            std::nth_element(means.begin(), mid, means.end());
            double med = *mid;
            if (means.size() % 2 == 0) {
                const double lower = *std::max_element(means.begin(), mid);
                med = 0.5 * (med + lower);
            }
            mp.batch_sizes.push_back(b);
            mp.medians.push_back(med);
        }
        mp.growth = mp.medians.back() / mp.medians.front();
        mp.divergent = mp.growth > opt.threshold;
        out.push_back(mp);
    }
    return out;
}

std::vector<MomentProbe> moment_probe(const sde::StationaryEstimate& st, const std::vector<double>& p_grid,
                                      const MomentProbeOptions& opt) {
    std::vector<double> mags(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) mags[k] = st.state(k).norm();
    return moment_probe(mags, p_grid, opt);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw SizeError("ks_distance needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

KSResult ks_with_bootstrap(const std::vector<double>& a, const std::vector<double>& b, int reps, std::uint64_t seed) {
    KSResult r;
    r.d = ks_distance(a, b);
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(reps));
    for (int k = 0; k < reps; ++k) {
        rng::Stream s(seed, 0, static_cast<std::uint64_t>(k), 0);
        std::vector<double> ra(a.size()), rb(b.size());
        for (auto& v : ra) v = a[std::min(a.size() - 1, static_cast<std::size_t>(s.uniform() * a.size()))];
        for (auto& v : rb) v = b[std::min(b.size() - 1, static_cast<std::size_t>(s.uniform() * b.size()))];
        stats.push_back(ks_distance(std::move(ra), std::move(rb)));
    }
    std::sort(stats.begin(), stats.end());
    if (!stats.empty()) {
        r.lo = stats[static_cast<std::size_t>(0.025 * (stats.size() - 1))];
        r.hi = stats[static_cast<std::size_t>(0.975 * (stats.size() - 1))];
    }
    return r;
}

}  // namespace htol::lab
