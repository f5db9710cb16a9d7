#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "htol/sde_engine.hpp"

namespace htol::lab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Estimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t n = 0;
    std::size_t batches = 0;
    double n_eff = 0.0;  // sample variance over se^2
};

// Mean of a series with a batch-means standard error; batches never straddle paths.
Estimate batch_mean(const std::vector<double>& series, const std::vector<std::size_t>& offsets,
                    std::size_t batch_size = 0);

// Mean with the standard error taken from the spread of whole-path means; needs independent paths.
Estimate path_mean(const std::vector<double>& series, const std::vector<std::size_t>& offsets);

// Long-run mean of <e,x>^- under the stationary sample. With 20 or more paths the error
// comes from path means, otherwise from batch means.
Estimate mean_idleness(const sde::StationaryEstimate& stationary);

struct TailIndexEstimate {
    double index = 0.0;
    std::size_t k_used = 0;
    double ci_half_width = 0.0;
    std::vector<std::pair<std::size_t, double>> k_path;  // (k, index) around k_used
    double trend_z = 0.0;  // (index at k/4 - index at 4k) in standard errors
    bool power_law = true;
};

// Hill estimator of the survival exponent from the top k order statistics; k = 0 means floor(sqrt(N)).
TailIndexEstimate tail_index(std::vector<double> sample, std::size_t k = 0);

// Projected total variation between two samples on a common equal-mass histogram.
double projected_tv(const std::vector<double>& a, const std::vector<double>& b, int bins = 0);
int default_tv_bins(std::size_t n);
double tv_noise_floor(std::size_t n, int bins);

struct TVDecayEstimate {
    std::vector<double> times;
    std::vector<double> tv;
    std::vector<double> noise_floor;
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t fit_from = 0;  // index of the first grid point used in the fit
    std::size_t fit_to = 0;    // one past the last
    bool log_time = true;      // log TV against log t, else against t
    int bins = 0;
    const char* note = "projected TV on <w,x> is a lower bound for the full TV";
};

struct TVDecayOptions {
    bool log_time = true;
    double fit_tail_fraction = 0.5;  // fit on the last fraction of the grid
    double min_floor_multiple = 0.0; // drop points with TV below this multiple of the noise floor
    int bins = 0;
};

// Projections <w,X(t)> of an ensemble started at x0 at the grid times.
std::vector<std::vector<double>> projected_marginals(const sde::PiecewiseOUModel& model, const Vec& w,
                                                     const Vec& x0, const std::vector<double>& times,
                                                     const sde::PathConfig& run, int threads);

TVDecayEstimate tv_decay(const sde::PiecewiseOUModel& model, const sde::StationaryEstimate& reference, const Vec& x0,
                         const std::vector<double>& times, const sde::PathConfig& run, int threads,
                         const TVDecayOptions& opt = {});

// Fit of log TV on the chosen grid indices; throws FitError with fewer than four points.
void fit_tv(TVDecayEstimate& est, const TVDecayOptions& opt);

struct MomentProbe {
    double p = 0.0;
    double estimate = 0.0;  // plain sample mean of |x|^p
    double growth = 1.0;    // median batch mean at the largest size over the smallest
    bool divergent = false;
    std::vector<std::size_t> batch_sizes;
    std::vector<double> medians;
};

struct MomentProbeOptions {
    std::size_t base_batch = 0;  // 0: N / (8 * 2^doublings)
    int doublings = 4;
    double threshold = 1.3;
};

std::vector<MomentProbe> moment_probe(const sde::StationaryEstimate& stationary, const std::vector<double>& p_grid,
                                      const MomentProbeOptions& opt = {});
std::vector<MomentProbe> moment_probe(const std::vector<double>& magnitudes, const std::vector<double>& p_grid,
                                      const MomentProbeOptions& opt = {});

double ks_distance(std::vector<double> a, std::vector<double> b);

struct KSResult {
    double d = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

KSResult ks_with_bootstrap(const std::vector<double>& a, const std::vector<double>& b, int reps, std::uint64_t seed);

struct LineFit {
    double slope = 0.0, intercept = 0.0, slope_se = 0.0, r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace htol::lab
