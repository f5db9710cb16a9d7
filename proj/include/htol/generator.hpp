#pragma once

#include <functional>
#include <string>
#include <vector>

#include "htol/matrix_core.hpp"
#include "htol/sde_engine.hpp"

namespace htol::lab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Jet {
    double value = 0.0;
    Vec grad;
    Mat hess;
};

// A C^2 function together with the growth data the quadrature needs for tail bounds:
// |f(x)| <= growth_const * (1 + |x|)^growth.
struct SmoothFunction {
    std::function<double(const Vec&)> value;
    std::function<Jet(const Vec&)> jet;
    double growth = 0.0;
    double growth_const = 1.0;
    // exponential growth: |f(x)| <= growth_const * exp(exp_rate |x|); growth is then infinite
    double exp_rate = 0.0;
    // compactly supported functions: f vanishes outside the ball(center, radius)
    bool compact = false;
    Vec center;
    double radius = 0.0;
    // ridge functions f(x) = g(<w,x>) collapse isotropic jumps to one dimension
    bool ridge = false;
    Vec ridge_dir;
    std::function<double(double)> profile;
    bool constant = false;  // the generator is then exactly zero
};

enum class LyapunovFamily { polynomial, exponential };

struct LyapunovFunctionSpec {
    Mat q;
    double theta = 1.0;
    LyapunovFamily family = LyapunovFamily::polynomial;
    double p = 0.0;  // exponential family rate

    void validate() const;
};

// Convex C^2 bridge on [0,1]: value/slope/curvature (1/2,0,1) at 0 and (1,1,0) at 1.
double bridge(double r);
double bridge_d1(double r);
double bridge_d2(double r);

// phi(x): smooth version of the Q-norm.
Jet phi_jet(const Mat& q, const Vec& x);
Jet lyapunov_jet(const LyapunovFunctionSpec& spec, const Vec& x);
SmoothFunction lyapunov_function(const LyapunovFunctionSpec& spec);

SmoothFunction constant_function(double c);
SmoothFunction quadratic_function(int d);  // |x|^2
// amplitude * exp(1 - 1/(1 - |x-c|^2/r^2)) inside the ball
SmoothFunction bump_function(const Vec& center, double radius, double amplitude = 1.0);
// bump times a linear factor 1 + <g, x - c>
SmoothFunction tilted_bump_function(const Vec& center, double radius, const Vec& tilt);
// x_axis * cutoff(|x|/R), cutoff = 1 on [0,1], 0 beyond 2
SmoothFunction truncated_coordinate(int d, int axis, double r);

struct GeneratorValue {
    double total = 0.0;
    double local = 0.0;
    double nonlocal = 0.0;
    double error_estimate = 0.0;
    int evaluations = 0;
};

struct GeneratorOptions {
    double rel_tol = 1e-6;
    double tail_rel = 1e-8;
    int max_intervals = 4000;
};

GeneratorValue eval_generator(const sde::PiecewiseOUModel& model, const SmoothFunction& f, const Vec& x,
                              const GeneratorOptions& opt = {});

// Nonlocal part of a one-dimensional stable operator with densities c_plus / y^{1+alpha} on y > 0
// and c_minus / |y|^{1+alpha} on y < 0, acting on f along direction u at x.
GeneratorValue stable_line_operator(const SmoothFunction& f, const Vec& x, const Vec& u, double alpha, double c_plus,
                                    double c_minus, const GeneratorOptions& opt);

enum class DriftCondition { cone_split, uniform };

const char* to_string(DriftCondition c);

struct SamplePlan {
    double r0 = 10.0;
    int shells = 5;  // r0, 2 r0, 4 r0, ...
    int directions = 64;
    double delta = -1.0;  // cone opening; negative: derived from the certificate
    std::uint64_t seed = 1;
    int threads = 1;
    GeneratorOptions quad;
};

struct DriftPoint {
    Vec x;
    double radius = 0.0;
    bool in_cone = false;
    double av = 0.0;       // generator applied to V
    double v_theta = 0.0;
    double v_theta_m1 = 0.0;
    double phi = 0.0;      // the decay weight used by the condition
    bool violation = false;
};

struct ShellSummary {
    double radius = 0.0;
    double max_av_on_cone = 0.0;
    double max_ratio_off_cone = 0.0;  // max of A V / V_theta off the cone
    double max_ratio_on_cone = 0.0;   // max of A V / V_{theta-1} on the cone
    int on_cone = 0;
    int off_cone = 0;
};

struct DriftConditionReport {
    DriftCondition condition = DriftCondition::cone_split;
    double theta = 1.0;
    double delta = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    int violations = 0;
    std::vector<DriftPoint> points;
    std::vector<ShellSummary> shells;
    std::vector<DriftPoint> violating;
    bool accuracy_failure = false;
    std::string note;
};

// Cone opening from the certificate: kappa / (4 |Q M v|) with 2 kappa = lambda_min(QM + M'Q).
double cone_delta(const Mat& m, const Vec& v, const Mat& q);

DriftConditionReport verify_foster_lyapunov(const sde::PiecewiseOUModel& model,
                                            const matrix::LyapunovCertificate& certificate, double theta,
                                            const SamplePlan& plan);

}  // namespace htol::lab
