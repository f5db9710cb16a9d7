#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "htol/levy_noise.hpp"

namespace htol::sde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Control {
    // constant v in the simplex, or a state-dependent map into the simplex
    Vec constant;
    std::function<Vec(const Vec&)> markov;

    static Control fixed(Vec v) { return Control{std::move(v), {}}; }
    static Control state_dependent(std::function<Vec(const Vec&)> f) { return Control{Vec(), std::move(f)}; }
    bool is_constant() const { return !markov; }
    Vec at(const Vec& x) const { return markov ? markov(x) : constant; }
};

struct Diffusion {
    enum class Kind { none, constant, callable };
    Kind kind = Kind::none;
    Mat sigma;                                // d x n for the constant case
    std::function<Mat(const Vec&)> sigma_fn;  // callable case
    int noise_dim = 0;
    double kappa = 0.0;                       // |sigma(x)|^2 <= kappa (1 + |x|^2)
    bool bounded = true;                      // sup |sigma| < inf, used by the exponential-rate test

    static Diffusion none() { return {}; }
    static Diffusion constant_matrix(Mat s);
    static Diffusion callable(std::function<Mat(const Vec&)> f, int noise_dim, double kappa, bool bounded);
    Mat at(const Vec& x) const;
    // diffusion matrix a = sigma sigma'
    Mat covariance(const Vec& x) const;
};

struct PiecewiseOUModel {
    Vec ell;
    Mat m;
    Vec gamma;  // diagonal of Gamma
    Control control;
    Diffusion diffusion;
    levy::LevySpec levy;

    int dim() const { return static_cast<int>(ell.size()); }
    // Throws on shape or domain problems; row_condition additionally requires e'M >= 0.
    void validate(bool require_row_condition = false) const;
};

PiecewiseOUModel make_model(Vec ell, Mat m, Vec gamma, Vec v);

Vec drift(const PiecewiseOUModel& model, const Vec& x);

// Stable fingerprint of the numeric content (callables are hashed by kind only).
std::uint64_t model_hash(const PiecewiseOUModel& model);
std::string hex64(std::uint64_t h);

struct PathConfig {
    double dt = 1e-2;
    double horizon = 10.0;
    int n_paths = 1;
    std::uint64_t master_seed = 1;
    Vec x0;
    std::vector<Vec> x0_ensemble;  // optional per-path starts, cycled by path index
    double burn_in = -1.0;         // negative: 20% of the horizon
    int thin_stride = 0;           // 0: choose from the autocorrelation of <e,X>
    int record_stride = 1;         // steps between recorded states
    double record_from = 0.0;
    std::vector<double> record_times;  // when non-empty, record only at the steps nearest these times
    bool keep_jump_log = true;
    double divergence_threshold = 1e12;

    void validate(int d) const;
    double effective_burn_in() const { return burn_in < 0.0 ? 0.2 * horizon : burn_in; }
    long steps() const;
    Vec start(int path_index) const;
};

struct Path {
    std::vector<double> times;
    std::vector<double> states;  // row-major, times.size() x d
    std::vector<std::uint8_t> jump_flags;  // a jump happened since the previous record
    std::vector<levy::JumpEvent> jumps;
    std::uint64_t n_jumps = 0;
    bool diverged = false;
    double escape_time = -1.0;
    int dim = 0;

    std::size_t size() const { return times.size(); }
    Eigen::Map<const Vec> state(std::size_t k) const { return Eigen::Map<const Vec>(states.data() + k * dim, dim); }
    Vec final_state() const { return state(size() - 1); }
};

Path simulate_path(const PiecewiseOUModel& model, const PathConfig& config, std::size_t path_index);

struct PathEnsemble {
    std::vector<Path> paths;
    std::uint64_t model_hash = 0;
    std::uint64_t seed = 0;
    PathConfig config;

    std::size_t diverged_count() const;
};

PathEnsemble simulate_ensemble(const PiecewiseOUModel& model, const PathConfig& config, int threads);

struct StationaryEstimate {
    int dim = 0;
    std::vector<double> states;   // row-major
    std::vector<double> weights;  // all ones for plain pooling
    std::vector<std::size_t> path_offsets;  // row index where each path starts, plus the end
    int thin_stride = 1;
    double effective_sample_size = 0.0;
    std::uint64_t model_hash = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return weights.size(); }
    Eigen::Map<const Vec> state(std::size_t k) const { return Eigen::Map<const Vec>(states.data() + k * dim, dim); }
};

// Stride at which the autocorrelation of a bounded transform of <e,X> drops to 0.2,
// estimated from one pilot path.
int choose_thin_stride(const PiecewiseOUModel& model, const PathConfig& config);

StationaryEstimate stationary_sample(const PiecewiseOUModel& model, const PathConfig& config, int threads,
                                     bool override_classification = false);

// Effective sample size of a series with lag-one autocorrelation correction, by path.
double effective_sample_size(const std::vector<double>& series, const std::vector<std::size_t>& offsets);

}  // namespace htol::sde
