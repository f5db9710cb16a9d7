#include "htol/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "htol/error.hpp"
#include "htol/levy_noise.hpp"
#include "htol/parallel.hpp"
#include "htol/quadrature.hpp"
#include "htol/regime.hpp"

namespace htol::lab {

namespace {

Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }

double lambda_max(const Mat& q) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(q), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// smoothstep of degree five, C^2 on the line
double smooth5(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
double smooth5_d1(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return 30.0 * t * t * (1.0 - t) * (1.0 - t);
}
double smooth5_d2(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
}

}  // namespace

void LyapunovFunctionSpec::validate() const {
    if (q.rows() != q.cols() || q.rows() == 0) throw DimensionError("Q must be square");
    Eigen::LLT<Mat> llt(sym(q));
    if (llt.info() != Eigen::Success) throw ValueError("Q must be positive definite");
    if (!(theta > 0.0)) throw ValueError("theta must be positive");
    if (family == LyapunovFamily::exponential) {
        const double bound = theta / std::sqrt(lambda_max(q));
        if (!(p > 0.0 && p < bound)) throw ValueError("exponential family needs 0 < p < theta |Q|^{-1/2}");
    }
}

double bridge(double r) { return 0.5 + r * r * (0.5 + r * (-0.5 + r * (1.0 - 0.5 * r))); }
double bridge_d1(double r) { return r * (1.0 + r * (-1.5 + r * (4.0 - 2.5 * r))); }
double bridge_d2(double r) { return 1.0 + r * (-3.0 + r * (12.0 - 10.0 * r)); }

Jet phi_jet(const Mat& q, const Vec& x) {
    const Vec qx = q * x;
    const double r2 = x.dot(qx);
    const double r = std::sqrt(std::max(r2, 0.0));
    Jet j;
    if (r >= 1.0) {
        j.value = r;
        j.grad = qx / r;
        j.hess = q / r - qx * qx.transpose() / (r * r * r);
        return j;
    }
    // slope over r and the curvature correction stay finite at the origin
    const double d1_over_r = 1.0 + r * (-1.5 + r * (4.0 - 2.5 * r));
    const double corr = -1.5 + r * (8.0 - 7.5 * r);  // (p'' - p'/r) / r
    j.value = bridge(r);
    j.grad = d1_over_r * qx;
    j.hess = d1_over_r * q;
    if (r > 0.0) j.hess += (corr / r) * qx * qx.transpose();
    return j;
}

Jet lyapunov_jet(const LyapunovFunctionSpec& spec, const Vec& x) {
    const Jet p = phi_jet(spec.q, x);
    Jet j;
    if (spec.family == LyapunovFamily::polynomial) {
        const double th = spec.theta;
        const double v1 = std::pow(p.value, th - 1.0);
        j.value = v1 * p.value;
        j.grad = th * v1 * p.grad;
        j.hess = th * v1 * p.hess + th * (th - 1.0) * std::pow(p.value, th - 2.0) * p.grad * p.grad.transpose();
    } else {
        const double e = std::exp(spec.p * p.value);
        j.value = e;
        j.grad = spec.p * e * p.grad;
        j.hess = spec.p * e * (p.hess + spec.p * p.grad * p.grad.transpose());
    }
    return j;
}

SmoothFunction lyapunov_function(const LyapunovFunctionSpec& spec) {
    spec.validate();
    SmoothFunction f;
    f.jet = [spec](const Vec& x) { return lyapunov_jet(spec, x); };
    const Mat q = spec.q;
    const double lmax = lambda_max(q);
    const double c = std::max(1.0, std::sqrt(lmax));
    if (spec.family == LyapunovFamily::polynomial) {
        const double th = spec.theta;
        f.value = [q, th](const Vec& x) {
            const double r = std::sqrt(std::max(0.0, x.dot(q * x)));
            return std::pow(r >= 1.0 ? r : bridge(r), th);
        };
        f.growth = th;
        f.growth_const = std::pow(c, th);
    } else {
        const double p = spec.p;
        f.value = [q, p](const Vec& x) {
            const double r = std::sqrt(std::max(0.0, x.dot(q * x)));
            return std::exp(p * (r >= 1.0 ? r : bridge(r)));
        };
        f.growth = std::numeric_limits<double>::infinity();
        f.growth_const = std::exp(p);
        f.exp_rate = p * std::sqrt(lmax);
    }
    return f;
}

SmoothFunction constant_function(double cst) {
    SmoothFunction f;
    f.value = [cst](const Vec&) { return cst; };
    f.jet = [cst](const Vec& x) {
        return Jet{cst, Vec::Zero(x.size()), Mat::Zero(x.size(), x.size())};
    };
    f.growth = 0.0;
    f.growth_const = std::abs(cst);
    f.constant = true;
    return f;
}

SmoothFunction quadratic_function(int d) {
    SmoothFunction f;
    f.value = [](const Vec& x) { return x.squaredNorm(); };
    f.jet = [d](const Vec& x) { return Jet{x.squaredNorm(), 2.0 * x, 2.0 * Mat::Identity(d, d)}; };
    f.growth = 2.0;
    f.growth_const = 1.0;
    return f;
}

namespace {

struct BumpParts {
    double b = 0.0, db = 0.0, d2b = 0.0;  // derivatives in q = |x-c|^2 / r^2
    bool inside = false;
};

BumpParts bump_parts(double q, double amp) {
    BumpParts p;
    if (q >= 1.0) return p;
    const double s = 1.0 - q;
    p.inside = true;
    p.b = amp * std::exp(1.0 - 1.0 / s);
    p.db = -p.b / (s * s);
    p.d2b = p.b * (2.0 * q - 1.0) / (s * s * s * s);
    return p;
}

Jet bump_jet(const Vec& x, const Vec& c, double r, double amp) {
    const int d = static_cast<int>(x.size());
    const Vec dx = x - c;
    const double q = dx.squaredNorm() / (r * r);
    const BumpParts p = bump_parts(q, amp);
    Jet j{0.0, Vec::Zero(d), Mat::Zero(d, d)};
    if (!p.inside) return j;
    const Vec gq = 2.0 * dx / (r * r);
    j.value = p.b;
    j.grad = p.db * gq;
    j.hess = p.d2b * gq * gq.transpose() + p.db * (2.0 / (r * r)) * Mat::Identity(d, d);
    return j;
}

}  // namespace

SmoothFunction bump_function(const Vec& center, double radius, double amplitude) {
    if (!(radius > 0.0)) throw ValueError("bump radius must be positive");
    SmoothFunction f;
    f.value = [center, radius, amplitude](const Vec& x) {
        const double q = (x - center).squaredNorm() / (radius * radius);
        return q >= 1.0 ? 0.0 : amplitude * std::exp(1.0 - 1.0 / (1.0 - q));
    };
    f.jet = [center, radius, amplitude](const Vec& x) { return bump_jet(x, center, radius, amplitude); };
    f.compact = true;
    f.center = center;
    f.radius = radius;
    f.growth = 0.0;
    f.growth_const = std::abs(amplitude);
    return f;
}

SmoothFunction tilted_bump_function(const Vec& center, double radius, const Vec& tilt) {
    SmoothFunction f = bump_function(center, radius, 1.0);
    auto base_value = f.value;
    f.value = [=](const Vec& x) { return base_value(x) * (1.0 + tilt.dot(x - center)); };
    f.jet = [=](const Vec& x) {
        Jet b = bump_jet(x, center, radius, 1.0);
        const double lin = 1.0 + tilt.dot(x - center);
        Jet j;
        j.value = b.value * lin;
        j.grad = b.grad * lin + b.value * tilt;
        j.hess = b.hess * lin + b.grad * tilt.transpose() + tilt * b.grad.transpose();
        return j;
    };
    f.growth_const = 1.0 + tilt.norm() * radius;
    return f;
}

SmoothFunction truncated_coordinate(int d, int axis, double rr) {
    if (axis < 0 || axis >= d) throw DimensionError("axis out of range");
    SmoothFunction f;
    f.value = [axis, rr](const Vec& x) { return x(axis) * (1.0 - smooth5(x.norm() / rr - 1.0)); };
    f.jet = [d, axis, rr](const Vec& x) {
        Jet j{0.0, Vec::Zero(d), Mat::Zero(d, d)};
        const double n = x.norm();
        const double t = n / rr - 1.0;
        const double chi = 1.0 - smooth5(t);
        j.value = x(axis) * chi;
        j.grad(axis) = chi;
        if (t <= 0.0 || t >= 1.0) return j;
        const double c1 = -smooth5_d1(t), c2 = -smooth5_d2(t);
        const Vec gr = x / (rr * n);
        const Mat hr = (Mat::Identity(d, d) - x * x.transpose() / (n * n)) / (rr * n);
        Vec ea = Vec::Zero(d);
        ea(axis) = 1.0;
        j.grad += x(axis) * c1 * gr;
        j.hess = c1 * (ea * gr.transpose() + gr * ea.transpose()) + x(axis) * (c2 * gr * gr.transpose() + c1 * hr);
        return j;
    };
    f.compact = true;
    f.center = Vec::Zero(d);
    f.radius = 2.0 * rr;
    f.growth = 0.0;
    f.growth_const = 2.0 * rr;
    return f;
}

namespace {

struct Acc {
    double value = 0.0, error = 0.0, magnitude = 0.0;
    int evals = 0;
    void add(const quad::Result& r) {
        value += r.value;
        error += r.error;
        magnitude += std::abs(r.value);
        evals += r.evaluations;
    }
};

quad::Result must_converge(const std::function<double(double)>& g, double a, double b, const GeneratorOptions& opt,
                           double abs_floor, const Acc& acc, const char* where) {
    auto r = quad::integrate(g, a, b, opt.rel_tol, abs_floor, opt.max_intervals);
    if (!r.converged) throw AccuracyError(std::string("quadrature did not converge: ") + where, acc.value + r.value, acc.error + r.error);
    return r;
}

// Remoteness of the support of a compact f from the line x + y u, beyond which f vanishes.
double support_exit(const SmoothFunction& f, const Vec& x) {
    return (x - f.center).norm() + f.radius;
}

}  // namespace

GeneratorValue stable_line_operator(const SmoothFunction& f, const Vec& x, const Vec& u, double alpha, double c_plus,
                                    double c_minus, const GeneratorOptions& opt) {
    GeneratorValue out;
    if (c_plus == 0.0 && c_minus == 0.0) return out;
    const Jet j0 = f.jet(x);
    const double f0 = j0.value;
    const double d1 = u.dot(j0.grad);
    const double csum = c_plus + c_minus;
    const double abs_floor = 1e-13 * csum * (1.0 + std::abs(f0) + std::abs(d1) + std::abs(u.dot(j0.hess * u)));
    Acc acc;

    // |y| < ys: second-order Taylor remainder, y^{1-alpha} removed by y = s^{1/(2-alpha)}
    const double ys = 1e-2;
    const quad::Rule gl = quad::gauss_legendre(10);
    auto remainder = [&](double y) {
        // integral over t of (1-t) f_uu(x + t y u)
        double acc_t = 0.0;
        for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
            const double t = 0.5 * (gl.nodes[k] + 1.0);
            const Jet jt = f.jet(x + t * y * u);
            acc_t += 0.5 * gl.weights[k] * (1.0 - t) * u.dot(jt.hess * u);
        }
        return acc_t;
    };
    const double p = 2.0 - alpha;
    auto inner_sub = [&](double s) {
        const double y = std::pow(s, 1.0 / p);
        return (c_plus * remainder(y) + c_minus * remainder(-y)) / p;
    };
    acc.add(must_converge(inner_sub, 0.0, std::pow(ys, p), opt, abs_floor, acc, "inner core"));
    auto inner = [&](double y) {
        const double gp = f.value(x + y * u) - f0 - y * d1;
        const double gm = f.value(x - y * u) - f0 + y * d1;
        return (c_plus * gp + c_minus * gm) * std::pow(y, -1.0 - alpha);
    };
    acc.add(must_converge(inner, ys, 1.0, opt, abs_floor, acc, "inner ring"));

    // |y| > 1 on dyadic panels
    auto outer = [&](double y) {
        return (c_plus * (f.value(x + y * u) - f0) + c_minus * (f.value(x - y * u) - f0)) * std::pow(y, -1.0 - alpha);
    };
    const double reach = 1.0 + x.norm();
    double y0 = 1.0;
    for (int k = 0; k < 400; ++k) {
        const double y1 = 2.0 * y0;
        acc.add(must_converge(outer, y0, y1, opt, abs_floor, acc, "outer panel"));
        y0 = y1;
        if (f.compact && y0 > support_exit(f, x)) {
            // f vanishes from here on
            const double t = -f0 * csum * std::pow(y0, -alpha) / alpha;
            acc.value += t;
            acc.magnitude += std::abs(t);
            break;
        }
        if (y0 < reach) continue;
        if (!(f.growth < alpha) || f.exp_rate > 0.0) throw ValueError("function grows too fast for the stable kernel");
        const double bound = csum * f.growth_const * std::pow(2.0, f.growth) * std::pow(y0, f.growth - alpha) / (alpha - f.growth);
        const double exact = -f0 * csum * std::pow(y0, -alpha) / alpha;
        if (bound <= opt.tail_rel * std::max(acc.magnitude, abs_floor / opt.tail_rel)) {
            acc.value += exact;
            acc.error += bound;
            break;
        }
        if (k == 399) throw AccuracyError("tail did not become negligible", acc.value, bound);
    }
    out.nonlocal = acc.value;
    out.total = acc.value;
    out.error_estimate = acc.error;
    out.evaluations = acc.evals;
    return out;
}

namespace {

GeneratorValue compound_poisson_term(const levy::CompoundPoissonSpec& cp, const SmoothFunction& f, const Vec& x,
                                     const Jet& j0, const GeneratorOptions& opt) {
    GeneratorValue out;
    const double f0 = j0.value;
    const double wn = cp.direction.norm();
    const double comp = cp.rate * cp.jump.inner_mean(wn) * cp.direction.dot(j0.grad);
    auto h = [&](double s) { return f.value(x + s * cp.direction) - f0; };
    const double abs_floor = 1e-13 * cp.rate * (1.0 + std::abs(f0));
    Acc acc;
    const auto& law = cp.jump;
    switch (law.law) {
        case levy::JumpLaw::deterministic: acc.value = h(law.size); break;
        case levy::JumpLaw::empirical: {
            for (double s : law.samples) acc.value += h(s);
            acc.value /= static_cast<double>(law.samples.size());
            break;
        }
        case levy::JumpLaw::exponential: {
            const double m = law.mean;
            auto g = [&](double s) { return h(s) * std::exp(-s / m) / m; };
            double s0 = 0.0, s1 = m;
            for (int k = 0; k < 200; ++k) {
                acc.add(must_converge(g, s0, s1, opt, abs_floor, acc, "jump law panel"));
                s0 = s1;
                s1 = 2.0 * s1;
                if (f.compact && s0 * wn > support_exit(f, x)) {
                    acc.value += -f0 * std::exp(-s0 / m);
                    break;
                }
                double bound;
                const double xn = x.norm();
                if (f.exp_rate > 0.0) {
                    const double gap = 1.0 / m - f.exp_rate * wn;
                    if (!(gap > 0.0)) throw ValueError("function grows too fast for the exponential jump law");
                    bound = f.growth_const * std::exp(f.exp_rate * xn - s0 * gap) / (m * gap) +
                            std::abs(f0) * std::exp(-s0 / m);
                } else {
                    const double grow = f.growth_const * std::pow(1.0 + xn + s0 * wn, f.growth);
                    const double denom = 1.0 - f.growth * m * wn / (1.0 + xn + s0 * wn);
                    bound = denom > 0.0 ? (grow / denom + std::abs(f0)) * std::exp(-s0 / m)
                                        : std::numeric_limits<double>::infinity();
                }
                if (bound <= opt.tail_rel * std::max(acc.magnitude, abs_floor / opt.tail_rel)) {
                    acc.error += bound;
                    break;
                }
                if (k == 199) throw AccuracyError("jump law tail did not become negligible", acc.value, bound);
            }
            break;
        }
        case levy::JumpLaw::pareto: {
            const double b = law.tail_index, u0 = law.minimum;
            auto g = [&](double s) { return h(s) * b * std::pow(u0, b) * std::pow(s, -b - 1.0); };
            double s0 = u0;
            for (int k = 0; k < 400; ++k) {
                const double s1 = 2.0 * s0;
                acc.add(must_converge(g, s0, s1, opt, abs_floor, acc, "jump law panel"));
                s0 = s1;
                if (f.compact && s0 * wn > support_exit(f, x)) {
                    acc.value += -f0 * std::pow(u0 / s0, b);
                    break;
                }
                if (s0 * wn < 1.0 + x.norm()) continue;
                if (!(f.growth < b) || f.exp_rate > 0.0) throw ValueError("function grows too fast for the Pareto jump law");
                const double bound = f.growth_const * std::pow(2.0 * wn, f.growth) * b * std::pow(u0, b) *
                                         std::pow(s0, f.growth - b) / (b - f.growth) +
                                     std::abs(f0) * std::pow(u0 / s0, b);
                if (bound <= opt.tail_rel * std::max(acc.magnitude, abs_floor / opt.tail_rel)) {
                    acc.value += -f0 * std::pow(u0 / s0, b);
                    acc.error += bound;
                    break;
                }
                if (k == 399) throw AccuracyError("jump law tail did not become negligible", acc.value, bound);
            }
            break;
        }
    }
    out.nonlocal = cp.rate * acc.value - comp;
    out.total = out.nonlocal;
    out.error_estimate = cp.rate * acc.error;
    out.evaluations = acc.evals;
    return out;
}

GeneratorValue isotropic_term(const levy::IsotropicStableSpec& is, const SmoothFunction& f, const Vec& x,
                              const GeneratorOptions& opt) {
    const int d = static_cast<int>(x.size());
    const double c1 = levy::stable_kernel_constant(1, is.alpha);
    if (f.ridge) {
        const double wn = f.ridge_dir.norm();
        return stable_line_operator(f, x, f.ridge_dir / wn, is.alpha, is.eta * c1, is.eta * c1, opt);
    }
    if (d == 1) return stable_line_operator(f, x, Vec::Ones(1), is.alpha, is.eta * c1, is.eta * c1, opt);
    if (d > 3) throw UnsupportedAnalyticError("isotropic jumps of non-ridge functions need d <= 3");
    const double cd = levy::stable_kernel_constant(d, is.alpha);
    const double area = d == 2 ? 2.0 * M_PI : 4.0 * M_PI;
    const double factor = cd * area / (2.0 * c1);
    GeneratorValue out;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int n = 8; n <= 256; n *= 2) {
        double avg = 0.0, err = 0.0;
        int evals = 0;
        if (d == 2) {
            for (int k = 0; k < n; ++k) {
                const double a = M_PI * (k + 0.5) / n;
                Vec u(2);
                u << std::cos(a), std::sin(a);
                auto r = stable_line_operator(f, x, u, is.alpha, is.eta * c1, is.eta * c1, opt);
                avg += r.total / n;
                err += r.error_estimate / n;
                evals += r.evaluations;
            }
        } else {
            const quad::Rule gl = quad::gauss_legendre(n / 2);
            const int na = n;
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                const double ct = gl.nodes[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                for (int k = 0; k < na; ++k) {
                    const double a = 2.0 * M_PI * (k + 0.5) / na;
                    Vec u(3);
                    u << st * std::cos(a), st * std::sin(a), ct;
                    auto r = stable_line_operator(f, x, u, is.alpha, is.eta * c1, is.eta * c1, opt);
                    const double w = 0.5 * gl.weights[i] / na;
                    avg += w * r.total;
                    err += w * r.error_estimate;
                    evals += r.evaluations;
                }
            }
        }
        out.nonlocal = factor * avg;
        out.error_estimate = factor * err;
        out.evaluations += evals;
        if (!std::isnan(prev) && std::abs(out.nonlocal - prev) <= opt.rel_tol * std::abs(out.nonlocal) + 10.0 * out.error_estimate + 1e-13) {
            out.error_estimate += std::abs(out.nonlocal - prev);
            out.total = out.nonlocal;
            return out;
        }
        prev = out.nonlocal;
    }
    throw AccuracyError("spherical average did not converge", out.nonlocal, std::abs(out.nonlocal - prev));
}

}  // namespace

GeneratorValue eval_generator(const sde::PiecewiseOUModel& model, const SmoothFunction& f, const Vec& x,
                              const GeneratorOptions& opt) {
    const int d = model.dim();
    if (x.size() != d) throw DimensionError("state has wrong dimension");
    GeneratorValue out;
    if (f.constant) return out;
    const Jet j0 = f.jet(x);
    const Vec b = sde::drift(model, x) + model.levy.drift;
    out.local = b.dot(j0.grad);
    if (model.diffusion.kind != sde::Diffusion::Kind::none) {
        const Mat a = model.diffusion.covariance(x);
        out.local += 0.5 * (a.cwiseProduct(j0.hess)).sum();
    }
    for (const auto& c : model.levy.components) {
        GeneratorValue part;
        if (const auto* sa = std::get_if<levy::StableAxisSpec>(&c)) {
            const double c1 = levy::stable_kernel_constant(1, sa->alpha);
            for (int i = 0; i < d; ++i) {
                Vec u = Vec::Zero(d);
                u(i) = 1.0;
                const double base = sa->eta(i) * c1;
                auto r = stable_line_operator(f, x, u, sa->alpha, base * (1.0 + sa->skew), base * (1.0 - sa->skew), opt);
                part.nonlocal += r.nonlocal;
                part.error_estimate += r.error_estimate;
                part.evaluations += r.evaluations;
            }
        } else if (const auto* is = std::get_if<levy::IsotropicStableSpec>(&c)) {
            part = isotropic_term(*is, f, x, opt);
        } else if (const auto* cp = std::get_if<levy::CompoundPoissonSpec>(&c)) {
            part = compound_poisson_term(*cp, f, x, j0, opt);
        }
        out.nonlocal += part.nonlocal;
        out.error_estimate += part.error_estimate;
        out.evaluations += part.evaluations;
    }
    out.total = out.local + out.nonlocal;
    return out;
}

const char* to_string(DriftCondition c) { return c == DriftCondition::cone_split ? "cone-split" : "uniform"; }

double cone_delta(const Mat& m, const Vec& v, const Mat& q) {
    const double kappa = 0.5 * matrix::min_eigenvalue(matrix::first_form(m, q));
    const double qmv = (q * m * v).norm();
    if (!(kappa > 0.0)) throw ValueError("certificate has no positive first margin");
    return qmv > 0.0 ? kappa / (4.0 * qmv) : 1.0;
}

DriftConditionReport verify_foster_lyapunov(const sde::PiecewiseOUModel& model,
                                            const matrix::LyapunovCertificate& certificate, double theta,
                                            const SamplePlan& plan) {
    model.validate();
    const int d = model.dim();
    if (!model.control.is_constant()) throw HypothesisError("drift verification needs a constant control");
    if (plan.shells < 2 || plan.directions < 1 || !(plan.r0 > 0.0)) throw ValueError("invalid sample plan");
    const auto tc = theta_c_for_classification(model.levy);
    if (!tc.contains(theta)) throw HypothesisError("theta is not in Theta_c");
    DriftConditionReport rep;
    rep.theta = theta;
    rep.condition = certificate.mode == matrix::CertificateMode::no_abandonment ? DriftCondition::cone_split
                                                                                 : DriftCondition::uniform;
    if (rep.condition == DriftCondition::cone_split && theta < 1.0) throw HypothesisError("the cone-split condition needs theta >= 1");
    const Vec& v = model.control.constant;
    rep.delta = plan.delta > 0.0 ? plan.delta : cone_delta(model.m, v, certificate.q);

    LyapunovFunctionSpec vs{certificate.q, theta, LyapunovFamily::polynomial, 0.0};
    const SmoothFunction vf = lyapunov_function(vs);

    std::vector<Vec> dirs;
    if (d == 1) {
        dirs.push_back(Vec::Ones(1));
        dirs.push_back(-Vec::Ones(1));
    } else if (d == 2) {
        for (int k = 0; k < plan.directions; ++k) {
            const double a = 2.0 * M_PI * (k + 0.5) / plan.directions;
            Vec u(2);
            u << std::cos(a), std::sin(a);
            dirs.push_back(u);
        }
    } else {
        rng::Stream s(plan.seed);
        for (int k = 0; k < plan.directions; ++k) {
            Vec u(d);
            for (int i = 0; i < d; ++i) u(i) = s.normal();
            dirs.push_back(u.normalized());
        }
    }
    // on the ray through v the linear part of the drift vanishes, so that is where A V stays bounded
    if (d > 1) dirs.push_back(v.normalized());
    const std::size_t nd = dirs.size();
    rep.points.resize(nd * static_cast<std::size_t>(plan.shells));
    std::vector<int> failed(rep.points.size(), 0);
    parallel_for(rep.points.size(), plan.threads, [&](std::size_t idx) {
        const int sh = static_cast<int>(idx / nd);
        const double r = plan.r0 * std::pow(2.0, sh);
        DriftPoint& pt = rep.points[idx];
        pt.x = r * dirs[idx % nd];
        pt.radius = r;
        pt.in_cone = pt.x.sum() > rep.delta * pt.x.norm();
        const Jet ph = phi_jet(certificate.q, pt.x);
        pt.v_theta = std::pow(ph.value, theta);
        pt.v_theta_m1 = std::pow(ph.value, theta - 1.0);
        pt.phi = (rep.condition == DriftCondition::cone_split && pt.in_cone) ? pt.v_theta_m1 : pt.v_theta;
        try {
            pt.av = eval_generator(model, vf, pt.x, plan.quad).total;
        } catch (const AccuracyError& e) {
            pt.av = e.estimate;
            failed[idx] = 1;
        }
    });
    for (int f : failed)
        if (f) rep.accuracy_failure = true;

    // c1 from the outermost shell, c0 from the innermost, then every shell is tested
    const std::size_t outer0 = nd * static_cast<std::size_t>(plan.shells - 1);
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = outer0; i < rep.points.size(); ++i)
        min_ratio = std::min(min_ratio, -rep.points[i].av / rep.points[i].phi);
    rep.c1 = 0.5 * min_ratio;
    double c0 = 0.0;
    for (std::size_t i = 0; i < nd; ++i) c0 = std::max(c0, rep.points[i].av + rep.c1 * rep.points[i].phi);
    rep.c0 = c0;
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
        DriftPoint& pt = rep.points[i];
        const double rhs = rep.c0 - rep.c1 * pt.phi;
        pt.violation = failed[i] || !(rep.c1 > 0.0) || pt.av > rhs + 1e-9 * std::abs(rhs);
        if (pt.violation) {
            ++rep.violations;
            rep.violating.push_back(pt);
        }
    }
    for (int sh = 0; sh < plan.shells; ++sh) {
        ShellSummary s;
        s.radius = plan.r0 * std::pow(2.0, sh);
        s.max_av_on_cone = -std::numeric_limits<double>::infinity();
        s.max_ratio_off_cone = -std::numeric_limits<double>::infinity();
        s.max_ratio_on_cone = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < nd; ++k) {
            const DriftPoint& pt = rep.points[sh * nd + k];
            if (pt.in_cone) {
                ++s.on_cone;
                s.max_av_on_cone = std::max(s.max_av_on_cone, pt.av);
                s.max_ratio_on_cone = std::max(s.max_ratio_on_cone, pt.av / pt.v_theta_m1);
            } else {
                ++s.off_cone;
                s.max_ratio_off_cone = std::max(s.max_ratio_off_cone, pt.av / pt.v_theta);
            }
        }
        rep.shells.push_back(s);
    }
    if (rep.accuracy_failure) rep.note = "quadrature failed at some points; those count as violations";
    return rep;
}

}  // namespace htol::lab
