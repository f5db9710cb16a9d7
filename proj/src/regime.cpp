#include "htol/regime.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "htol/error.hpp"
#include "htol/matrix_core.hpp"

namespace htol::lab {

const char* to_string(Regime r) {
    switch (r) {
        case Regime::transient_predicted: return "transient-predicted";
        case Regime::not_positive_recurrent: return "not-positive-recurrent";
        case Regime::polynomial: return "polynomial";
        case Regime::exponential: return "exponential";
        case Regime::outside_theory: return "outside-theory";
    }
    return "?";
}

bool RegimeReport::moment_finite(double p) const {
    switch (moment_rule) {
        case MomentRule::p_plus_one_in_theta_c: return p >= 0.0 && theta_c.contains(p + 1.0);
        case MomentRule::q_in_theta_c: return theta_c.contains(p);
        case MomentRule::none: break;
    }
    return false;
}

levy::ThetaCInterval theta_c_for_classification(const levy::LevySpec& spec) {
    levy::ThetaCInterval out;
    for (const auto& c : spec.components) {
        if (const auto* cp = std::get_if<levy::CompoundPoissonSpec>(&c); cp && cp->jump.law == levy::JumpLaw::empirical)
            continue;
        const auto t = levy::theta_c(c);
        if (t.sup < out.sup) out = t;
        else if (t.sup == out.sup) out.closed_at_sup = out.closed_at_sup && t.closed_at_sup;
    }
    return out;
}

double spare_capacity(const sde::PiecewiseOUModel& model) {
    const auto eff = levy::effective_drift(model.levy, model.ell);
    const Vec y = model.m.partialPivLu().solve(eff.ell_tilde);
    return -y.sum();
}

double spare_capacity_queue(const Vec& ell_hat, const Vec& mu) {
    if (ell_hat.size() != mu.size()) throw DimensionError("ell and mu differ in length");
    return -(ell_hat.array() / mu.array()).sum();
}

namespace {

struct NoiseShape {
    bool has_axis = false, axis_symmetric = true, has_iso = false, has_cp = false;
    bool cp_half_line = true;  // all compound Poisson jumps on one half-line
    Vec cp_dir;
    double alpha = 0.0;
    bool exp_moments = true;  // some exponential moment of the big jumps
};

NoiseShape shape_of(const levy::LevySpec& spec) {
    NoiseShape s;
    for (const auto& c : spec.components) {
        if (const auto* a = std::get_if<levy::StableAxisSpec>(&c)) {
            s.has_axis = true;
            s.alpha = a->alpha;
            if (a->skew != 0.0) s.axis_symmetric = false;
            s.exp_moments = false;
        } else if (const auto* i = std::get_if<levy::IsotropicStableSpec>(&c)) {
            s.has_iso = true;
            s.alpha = i->alpha;
            s.exp_moments = false;
        } else if (const auto* p = std::get_if<levy::CompoundPoissonSpec>(&c)) {
            const Vec dir = p->direction.normalized();
            if (!s.has_cp) s.cp_dir = dir;
            else if ((dir - s.cp_dir).norm() > 1e-12) s.cp_half_line = false;
            s.has_cp = true;
            if (p->jump.law == levy::JumpLaw::pareto) s.exp_moments = false;
        }
    }
    return s;
}

// Structural irreducibility hypotheses; returns a label or empty.
std::string irreducibility(const sde::PiecewiseOUModel& model, const NoiseShape& s) {
    const auto& df = model.diffusion;
    const int d = model.dim();
    const bool sigma_constant = df.kind != sde::Diffusion::Kind::callable;
    const bool sigma_zero = df.kind == sde::Diffusion::Kind::none ||
                            (df.kind == sde::Diffusion::Kind::constant && df.sigma.cwiseAbs().maxCoeff() == 0.0);
    const bool finite_nu = !s.has_axis && !s.has_iso;
    if (finite_nu && df.kind == sde::Diffusion::Kind::constant) {
        const Mat a = df.sigma * df.sigma.transpose();
        if (matrix::min_eigenvalue(a) > 1e-12 * std::max(1.0, a.norm())) return "finite Lévy measure with nondegenerate diffusion";
    }
    if (s.has_iso && df.kind == sde::Diffusion::Kind::constant && df.sigma.rows() == df.sigma.cols()) {
        Eigen::FullPivLU<Mat> lu(df.sigma);
        if (lu.isInvertible()) return "full-support jumps with invertible constant diffusion";
    }
    if (s.has_iso && sigma_constant) return "subordinate Brownian jump component with constant diffusion";
    if (sigma_zero && s.has_axis && s.axis_symmetric && !s.has_iso) return "anisotropic symmetric stable, possibly with compound Poisson, no diffusion";
    if (d == 1 && sigma_zero && s.has_axis && s.axis_symmetric) return "anisotropic symmetric stable, possibly with compound Poisson, no diffusion";
    return "";
}

// Noise types under which negative or zero spare capacity rules out positive recurrence.
bool necessity_noise(const sde::PiecewiseOUModel& model, const NoiseShape& s, bool one_in_theta) {
    if (model.diffusion.kind == sde::Diffusion::Kind::callable && !model.diffusion.bounded) return false;
    if ((s.has_axis || s.has_iso) && !(s.alpha > 1.0 && s.alpha < 2.0)) return false;
    if (s.has_axis && !s.axis_symmetric) return false;
    if (s.has_cp && !(s.cp_half_line && one_in_theta)) return false;
    return true;
}

bool growth_linear(const sde::PiecewiseOUModel& m) {
    return m.diffusion.kind != sde::Diffusion::Kind::callable || m.diffusion.bounded;
}

}  // namespace

RegimeReport classify(const sde::PiecewiseOUModel& model) {
    model.validate();
    const int d = model.dim();
    RegimeReport r;
    r.theta_c = theta_c_for_classification(model.levy);
    const auto eff = levy::effective_drift(model.levy, model.ell);
    r.ell_tilde = eff.ell_tilde;
    r.first_moment_finite = eff.first_moment_finite;
    r.spare_capacity = spare_capacity(model);
    r.w_tilde = model.m.transpose().partialPivLu().solve(Vec::Ones(d));
    const NoiseShape s = shape_of(model.levy);
    r.irreducibility = irreducibility(model, s);
    const bool one_in = r.theta_c.contains(1.0);
    const double rho_tol = 1e-12 * std::max(1.0, r.ell_tilde.cwiseAbs().maxCoeff() * r.w_tilde.cwiseAbs().maxCoeff());
    const bool rho_zero = std::abs(r.spare_capacity) <= rho_tol;

    std::ostringstream rho;
    rho << "spare capacity " << r.spare_capacity;

    if (r.irreducibility.empty()) {
        r.regime = Regime::outside_theory;
        r.reasons.push_back("no structural irreducibility hypothesis matches the noise and diffusion");
        return r;
    }
    r.reasons.push_back("irreducible and aperiodic: " + r.irreducibility);

    if (!model.control.is_constant()) {
        const bool gamma_zero = model.gamma.cwiseAbs().maxCoeff() == 0.0;
        r.gamma_v_zero = gamma_zero;
        if (gamma_zero && necessity_noise(model, s, one_in) && r.spare_capacity < -rho_tol) {
            r.regime = Regime::transient_predicted;
            r.reasons.push_back(rho.str() + " < 0 is transient under any Markov control with Gamma v(x) = 0");
        } else if (gamma_zero && necessity_noise(model, s, one_in) && rho_zero) {
            r.regime = Regime::not_positive_recurrent;
            r.reasons.push_back(rho.str() + " = 0 rules out positive recurrence under any Markov control");
        } else {
            r.regime = Regime::outside_theory;
            r.reasons.push_back("state-dependent control: only the necessity results apply, and none fired");
        }
        return r;
    }

    const Vec& v = model.control.constant;
    const Vec gv = model.gamma.cwiseProduct(v);
    r.gamma_v_zero = gv.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, model.gamma.cwiseAbs().maxCoeff());

    if (r.gamma_v_zero) {
        if (!one_in && (s.has_axis || s.has_iso || (s.has_cp && s.cp_half_line))) {
            r.regime = Regime::not_positive_recurrent;
            r.reasons.push_back("1 is not in Theta_c: no invariant probability under Gamma v = 0");
            return r;
        }
        if (!one_in) {
            r.regime = Regime::outside_theory;
            r.reasons.push_back("1 is not in Theta_c and the jump structure is not covered");
            return r;
        }
        if (r.spare_capacity < -rho_tol || rho_zero) {
            if (necessity_noise(model, s, one_in)) {
                r.regime = rho_zero ? Regime::not_positive_recurrent : Regime::transient_predicted;
                r.reasons.push_back(rho.str() + (rho_zero ? " = 0: cannot be positive recurrent" : " < 0: transient"));
            } else {
                r.regime = Regime::outside_theory;
                r.reasons.push_back(rho.str() + " <= 0 but the noise is outside the transience criteria");
            }
            return r;
        }
        if (!growth_linear(model)) {
            r.regime = Regime::outside_theory;
            r.reasons.push_back("diffusion growth is not sublinear in the required sense");
            return r;
        }
        r.reasons.push_back(rho.str() + " > 0 with 1 in Theta_c and Gamma v = 0: ergodic");
        r.moment_rule = MomentRule::p_plus_one_in_theta_c;
        if (r.theta_c.unbounded() && s.exp_moments && model.diffusion.bounded) {
            r.regime = Regime::exponential;
            r.reasons.push_back("big jumps have exponential moments and sigma is bounded: exponential rate");
            return r;
        }
        r.regime = Regime::polynomial;
        if (r.theta_c.unbounded()) {
            // exponential moments fail without a finite theta_c: no sharp rate available
            r.rate_exponent = std::numeric_limits<double>::infinity();
            r.reasons.push_back("all polynomial moments but no exponential moment: polynomial of every order");
            return r;
        }
        r.rate_exponent = r.theta_c.sup - 1.0;
        bool sharp = false;
        if ((s.has_axis && s.axis_symmetric && s.alpha > 1.0) || s.has_iso) sharp = true;
        if (s.has_cp && s.cp_half_line) {
            const Vec mw = model.m.partialPivLu().solve(s.cp_dir);
            if (mw.sum() > 0.0) sharp = true;
        }
        std::ostringstream os;
        os << "rate t^" << r.rate_exponent
           << (sharp ? " (sharp for this noise)" : " (lower bound from the drift condition)");
        r.reasons.push_back(os.str());
        return r;
    }

    // abandonment acts on the queue
    const Vec mv = model.m * v;
    const bool hyp_i = ((mv - gv).array() >= -1e-12 * std::max(1.0, mv.cwiseAbs().maxCoeff())).all() &&
                       (gv.array() >= 0.0).all();
    bool diag = true;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && model.m(i, j) != 0.0) diag = false;
    const bool hyp_ii = diag && (model.m.diagonal().array() > 0.0).all();
    if (!(hyp_i || hyp_ii)) {
        r.regime = Regime::outside_theory;
        r.reasons.push_back("Gamma v != 0 but neither Mv >= Gamma v nor diagonal M holds");
        return r;
    }
    if (!growth_linear(model)) {
        r.regime = Regime::outside_theory;
        r.reasons.push_back("diffusion grows too fast for the abandonment result");
        return r;
    }
    r.regime = Regime::exponential;
    r.moment_rule = MomentRule::q_in_theta_c;
    r.reasons.push_back(std::string("Gamma v != 0 with ") + (hyp_i ? "Mv >= Gamma v" : "diagonal M") +
                        ": exponential rate in V_theta for theta in Theta_c");
    return r;
}

}  // namespace htol::lab
