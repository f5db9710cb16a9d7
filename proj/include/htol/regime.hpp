#pragma once

#include <string>
#include <vector>

#include "htol/levy_noise.hpp"
#include "htol/sde_engine.hpp"

namespace htol::lab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Regime { transient_predicted, not_positive_recurrent, polynomial, exponential, outside_theory };

const char* to_string(Regime r);

// Which moments the invariant law has, when the theory says so.
enum class MomentRule { none, p_plus_one_in_theta_c, q_in_theta_c };

struct RegimeReport {
    Regime regime = Regime::outside_theory;
    double spare_capacity = 0.0;
    levy::ThetaCInterval theta_c;
    Vec ell_tilde;
    Vec w_tilde;  // (M^{-1})' e
    bool first_moment_finite = true;
    bool gamma_v_zero = true;
    std::string irreducibility;  // which structural hypothesis matched, empty if none
    double rate_exponent = 0.0;  // polynomial regime: theta_c - 1
    MomentRule moment_rule = MomentRule::none;
    std::vector<std::string> reasons;

    // Finite p-th moment of the invariant law according to the moment rule.
    bool moment_finite(double p) const;
};

double spare_capacity(const sde::PiecewiseOUModel& model);
// Queue form: -sum ell_i / mu_i.
double spare_capacity_queue(const Vec& ell_hat, const Vec& mu);

RegimeReport classify(const sde::PiecewiseOUModel& model);

// Theta_c where an empirical jump law counts as bounded support.
levy::ThetaCInterval theta_c_for_classification(const levy::LevySpec& spec);

}  // namespace htol::lab
