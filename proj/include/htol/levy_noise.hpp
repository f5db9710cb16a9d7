#pragma once

#include <Eigen/Dense>
#include <limits>
#include <variant>
#include <vector>

#include "htol/rng.hpp"

namespace htol::levy {

using Vec = Eigen::VectorXd;

// Independent stable components along the coordinate axes, one common alpha.
// skew is zero for the symmetric case; nonzero skew is only accepted for alpha > 1.
struct StableAxisSpec {
    double alpha = 1.5;
    Vec eta;
    double skew = 0.0;
};

// CF exp(-t eta |xi|^alpha).
struct IsotropicStableSpec {
    double alpha = 1.5;
    double eta = 1.0;
};

enum class JumpLaw { deterministic, exponential, pareto, empirical };

struct JumpSizeLaw {
    JumpLaw law = JumpLaw::deterministic;
    double size = 1.0;         // deterministic
    double mean = 1.0;         // exponential
    double tail_index = 2.0;   // pareto
    double minimum = 1.0;      // pareto
    std::vector<double> samples;  // empirical

    double sample(rng::Stream& s) const;
    double mean_size() const;  // +inf when it does not exist
    // E[S 1{S c_inv <= 1}] and E[S 1{S c_inv > 1}] with c_inv = |w|
    double inner_mean(double w_norm) const;
    double tail_mean(double w_norm) const;
};

// Jumps S w at the events of a Poisson process with the given rate.
struct CompoundPoissonSpec {
    double rate = 1.0;
    Vec direction;
    JumpSizeLaw jump;
};

using Component = std::variant<StableAxisSpec, IsotropicStableSpec, CompoundPoissonSpec>;

// Pure-jump driver. drift is the Lévy-Khintchine drift under the unit-ball truncation;
// each component contributes only its Lévy measure.
struct LevySpec {
    Vec drift;
    std::vector<Component> components;

    void validate(int d) const;
    bool empty() const { return components.empty(); }
};

struct ThetaCInterval {
    double sup = std::numeric_limits<double>::infinity();
    bool closed_at_sup = false;

    bool contains(double theta) const {
        return theta > 0.0 && (theta < sup || (closed_at_sup && theta == sup));
    }
    bool unbounded() const { return sup == std::numeric_limits<double>::infinity(); }
};

struct JumpEvent {
    double time = 0.0;
    Vec jump;
};

struct CompoundPoissonIncrement {
    Vec increment;
    std::vector<JumpEvent> events;  // times relative to the start of the step
};

struct EffectiveDrift {
    Vec ell_tilde;
    bool first_moment_finite = true;
};

double stable_kernel_constant(int d, double alpha);

// Increment over dt of a stable process with CF exp(-dt eta |xi|^alpha (1 - i skew sgn(xi) tan(pi alpha/2))).
double sample_stable_1d(double alpha, double eta, double dt, rng::Stream& s, double skew = 0.0);
Vec sample_isotropic_stable(const IsotropicStableSpec& spec, int d, double dt, rng::Stream& s);
// Positive stable of index a in (0,1) with Laplace transform exp(-lambda^a).
double sample_positive_stable(double a, rng::Stream& s);
CompoundPoissonIncrement sample_compound_poisson(const CompoundPoissonSpec& spec, double dt, rng::Stream& s);

ThetaCInterval theta_c(const LevySpec& spec);
ThetaCInterval theta_c(const Component& c);
// Integral of y over the complement of the unit ball; requires a finite first moment there.
Vec tail_integral(const Component& c, int d);
EffectiveDrift effective_drift(const LevySpec& spec, const Vec& ell);

// Constant drift to add per unit time when the components are simulated as
// raw compound Poisson jumps and centered stable increments.
Vec simulation_drift(const LevySpec& spec, int d);

}  // namespace htol::levy
