#include "htol/levy_noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "htol/error.hpp"

namespace htol::levy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw ValueError("stable index must lie in (0,2)");
}

}  // namespace

double JumpSizeLaw::sample(rng::Stream& s) const {
    switch (law) {
        case JumpLaw::deterministic: return size;
        case JumpLaw::exponential: return mean * s.exponential();
        case JumpLaw::pareto: return minimum * std::pow(s.uniform(), -1.0 / tail_index);
        case JumpLaw::empirical: {
            const auto n = samples.size();
            auto k = static_cast<std::size_t>(s.uniform() * static_cast<double>(n));
            return samples[std::min(k, n - 1)];
        }
    }
    return 0.0;
}

double JumpSizeLaw::mean_size() const {
    switch (law) {
        case JumpLaw::deterministic: return size;
        case JumpLaw::exponential: return mean;
        case JumpLaw::pareto: return tail_index > 1.0 ? tail_index * minimum / (tail_index - 1.0) : kInf;
        case JumpLaw::empirical:
            return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    }
    return 0.0;
}

double JumpSizeLaw::inner_mean(double w_norm) const {
    const double c = 1.0 / w_norm;  // S |w| <= 1 iff S <= c
    switch (law) {
        case JumpLaw::deterministic: return size <= c ? size : 0.0;
        case JumpLaw::exponential: return mean - (c + mean) * std::exp(-c / mean);
        case JumpLaw::pareto: {
            if (c <= minimum) return 0.0;
            const double b = tail_index, u = minimum;
            if (b == 1.0) return u * std::log(c / u);
            return b * std::pow(u, b) * (std::pow(c, 1.0 - b) - std::pow(u, 1.0 - b)) / (1.0 - b);
        }
        case JumpLaw::empirical: {
            double acc = 0.0;
            for (double x : samples)
                if (x <= c) acc += x;
            return acc / static_cast<double>(samples.size());
        }
    }
    return 0.0;
}

double JumpSizeLaw::tail_mean(double w_norm) const {
    const double c = 1.0 / w_norm;
    switch (law) {
        case JumpLaw::deterministic: return size > c ? size : 0.0;
        case JumpLaw::exponential: return (c + mean) * std::exp(-c / mean);
        case JumpLaw::pareto: {
            if (tail_index <= 1.0) return kInf;
            const double cc = std::max(c, minimum);
            return tail_index * std::pow(minimum, tail_index) * std::pow(cc, 1.0 - tail_index) / (tail_index - 1.0);
        }
        case JumpLaw::empirical: {
            double acc = 0.0;
            for (double x : samples)
                if (x > c) acc += x;
            return acc / static_cast<double>(samples.size());
        }
    }
    return 0.0;
}

void LevySpec::validate(int d) const {
    if (drift.size() != d) throw DimensionError("levy drift has wrong dimension");
    if (!drift.allFinite()) throw ValueError("levy drift must be finite");
    for (const auto& c : components) {
        std::visit(overloaded{
                       [&](const StableAxisSpec& s) {
                           check_alpha(s.alpha);
                           if (s.eta.size() != d) throw DimensionError("stable eta has wrong dimension");
                           if (!(s.eta.array() > 0.0).all()) throw ValueError("stable eta must be positive");
                           if (!(std::abs(s.skew) <= 1.0)) throw ValueError("skew must lie in [-1,1]");
                           if (s.skew != 0.0 && s.alpha <= 1.0)
                               throw ValueError("skewed stable components need alpha > 1");
                       },
                       [&](const IsotropicStableSpec& s) {
                           check_alpha(s.alpha);
                           if (!(s.eta > 0.0)) throw ValueError("isotropic eta must be positive");
                       },
                       [&](const CompoundPoissonSpec& s) {
                           if (!(s.rate > 0.0)) throw ValueError("compound Poisson rate must be positive");
                           if (s.direction.size() != d) throw DimensionError("jump direction has wrong dimension");
                           if (!(s.direction.norm() > 0.0)) throw ValueError("jump direction must be nonzero");
                           const auto& j = s.jump;
                           switch (j.law) {
                               case JumpLaw::deterministic:
                                   if (!(j.size > 0.0)) throw ValueError("jump size must be positive");
                                   break;
                               case JumpLaw::exponential:
                                   if (!(j.mean > 0.0)) throw ValueError("jump mean must be positive");
                                   break;
                               case JumpLaw::pareto:
                                   if (!(j.tail_index > 0.0 && j.minimum > 0.0))
                                       throw ValueError("pareto parameters must be positive");
                                   break;
                               case JumpLaw::empirical:
                                   if (j.samples.empty()) throw ValueError("empirical jump law needs samples");
                                   for (double x : j.samples)
                                       if (!(x >= 0.0) || !std::isfinite(x))
                                           throw ValueError("empirical jump sizes must be finite and nonnegative");
                                   break;
                           }
                       },
                   },
                   c);
    }
}

double stable_kernel_constant(int d, double alpha) {
    if (d < 1) throw ValueError("dimension must be positive");
    if (!(alpha > 0.0 && alpha <= 2.0)) throw ValueError("stable index must lie in (0,2]");
    if (alpha == 2.0) return 0.0;
    const double hd = 0.5 * d;
    const double lg = std::log(alpha) + (alpha - 1.0) * std::log(2.0) + std::lgamma(0.5 * (alpha + d)) -
                      hd * std::log(M_PI) - std::lgamma(1.0 - 0.5 * alpha);
    return std::exp(lg);
}

double sample_stable_1d(double alpha, double eta, double dt, rng::Stream& s, double skew) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw ValueError("stable index must lie in (0,2]");
    if (!(eta > 0.0) || !(dt > 0.0)) throw ValueError("eta and dt must be positive");
    if (alpha == 2.0) return std::sqrt(2.0 * eta * dt) * s.normal();
    const double v = M_PI * (s.uniform() - 0.5);
    const double w = s.exponential();
    double x;
    if (skew == 0.0) {
        if (alpha == 1.0) x = std::tan(v);
        else
            x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
                std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
    } else {
        if (alpha == 1.0) throw ValueError("skewed stable with alpha = 1 is not supported");
        const double tn = std::tan(0.5 * M_PI * alpha);
        const double b = std::atan(skew * tn) / alpha;
        const double sc = std::pow(1.0 + skew * skew * tn * tn, 0.5 / alpha);
        x = sc * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
            std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
    }
    return std::pow(eta * dt, 1.0 / alpha) * x;
}

double sample_positive_stable(double a, rng::Stream& s) {
    // Kanter's representation
    const double u = s.uniform();
    const double e = s.exponential();
    const double num = std::sin(a * M_PI * u) * std::pow(std::sin((1.0 - a) * M_PI * u), (1.0 - a) / a);
    return num / std::pow(std::sin(M_PI * u), 1.0 / a) * std::pow(e, -(1.0 - a) / a);
}

Vec sample_isotropic_stable(const IsotropicStableSpec& spec, int d, double dt, rng::Stream& s) {
    check_alpha(spec.alpha);
    const double a = sample_positive_stable(0.5 * spec.alpha, s);
    const double scale = std::sqrt(2.0 * a) * std::pow(spec.eta * dt, 1.0 / spec.alpha);
    Vec g(d);
    for (int i = 0; i < d; ++i) g(i) = s.normal();
    return scale * g;
}

CompoundPoissonIncrement sample_compound_poisson(const CompoundPoissonSpec& spec, double dt, rng::Stream& s) {
    if (!(dt > 0.0)) throw ValueError("dt must be positive");
    CompoundPoissonIncrement out;
    out.increment = Vec::Zero(spec.direction.size());
    double t = s.exponential() / spec.rate;
    while (t < dt) {
        const double size = spec.jump.sample(s);
        Vec j = size * spec.direction;
        out.increment += j;
        out.events.push_back({t, std::move(j)});
        t += s.exponential() / spec.rate;
    }
    return out;
}

ThetaCInterval theta_c(const Component& c) {
    return std::visit(overloaded{
                          [](const StableAxisSpec& s) { return ThetaCInterval{s.alpha, false}; },
                          [](const IsotropicStableSpec& s) { return ThetaCInterval{s.alpha, false}; },
                          [](const CompoundPoissonSpec& s) {
                              switch (s.jump.law) {
                                  case JumpLaw::deterministic:
                                  case JumpLaw::exponential: return ThetaCInterval{kInf, false};
                                  case JumpLaw::pareto: return ThetaCInterval{s.jump.tail_index, false};
                                  case JumpLaw::empirical: break;
                              }
                              throw UnsupportedAnalyticError("theta_c is not analytic for an empirical jump law");
                          },
                      },
                      c);
}

ThetaCInterval theta_c(const LevySpec& spec) {
    ThetaCInterval out{kInf, false};
    for (const auto& c : spec.components) {
        const ThetaCInterval t = theta_c(c);
        if (t.sup < out.sup) out = t;
        else if (t.sup == out.sup) out.closed_at_sup = out.closed_at_sup && t.closed_at_sup;
    }
    return out;
}

Vec tail_integral(const Component& c, int d) {
    return std::visit(overloaded{
                          [&](const StableAxisSpec& s) -> Vec {
                              if (s.skew == 0.0) return Vec::Zero(d);
                              if (s.alpha <= 1.0) throw ValueError("tail integral diverges for alpha <= 1");
                              // c_plus - c_minus = 2 skew eta C(1,alpha)
                              const double k = 2.0 * s.skew * stable_kernel_constant(1, s.alpha) / (s.alpha - 1.0);
                              return k * s.eta;
                          },
                          [&](const IsotropicStableSpec&) -> Vec { return Vec::Zero(d); },
                          [&](const CompoundPoissonSpec& s) -> Vec {
                              const double m = s.jump.tail_mean(s.direction.norm());
                              if (!std::isfinite(m)) throw ValueError("tail integral diverges");
                              return s.rate * m * s.direction;
                          },
                      },
                      c);
}

EffectiveDrift effective_drift(const LevySpec& spec, const Vec& ell) {
    const int d = static_cast<int>(ell.size());
    EffectiveDrift out;
    out.ell_tilde = ell + spec.drift;
    out.first_moment_finite = true;
    for (const auto& c : spec.components) {
        bool finite;
        if (const auto* cp = std::get_if<CompoundPoissonSpec>(&c); cp && cp->jump.law == JumpLaw::empirical)
            finite = true;  // bounded support
        else
            finite = theta_c(c).contains(1.0);
        if (!finite) out.first_moment_finite = false;
    }
    if (!out.first_moment_finite) return out;
    for (const auto& c : spec.components) out.ell_tilde += tail_integral(c, d);
    return out;
}

Vec simulation_drift(const LevySpec& spec, int d) {
    Vec out = spec.drift;
    for (const auto& c : spec.components) {
        if (const auto* cp = std::get_if<CompoundPoissonSpec>(&c)) {
            out -= cp->rate * cp->jump.inner_mean(cp->direction.norm()) * cp->direction;
        } else if (const auto* sa = std::get_if<StableAxisSpec>(&c); sa && sa->skew != 0.0) {
            // centered samples; the zero-drift process has mean equal to the tail integral
            out += tail_integral(c, d);
        }
    }
    return out;
}

}  // namespace htol::levy
