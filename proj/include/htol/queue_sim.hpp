#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "htol/levy_noise.hpp"
#include "htol/sde_engine.hpp"

namespace htol::queue {

using Vec = Eigen::VectorXd;

enum class ArrivalKind { poisson, pareto_renewal };

// Up periods are exponential with rate up_rate; the k-th down period lasts n^{-1/alpha} d_k.
struct InterruptionLaw {
    bool enabled = false;
    double up_rate = 1.0;
    levy::JumpSizeLaw down;
};

struct QueueModelSpec {
    int d = 1;
    long n = 1;
    Vec lambda;    // per-server limit rates, lambda^n / n -> lambda
    Vec lambda_n;  // arrival rates actually simulated
    Vec mu;
    Vec gamma;
    Vec v;         // target queue fractions
    ArrivalKind arrivals = ArrivalKind::poisson;
    double alpha = 2.0;  // scaling index, also the Pareto tail index of renewal interarrivals
    InterruptionLaw interruptions;

    void validate() const;
    // sum lambda_i / mu_i == 1
    bool critical(double tol = 1e-9) const;
    Vec rho() const { return lambda.cwiseQuotient(mu); }
};

// Heavy-traffic family lambda^n = n lambda + n^{1/alpha} ell_hat.
struct QueueFamily {
    Vec lambda;
    Vec ell_hat;
    Vec mu;
    Vec gamma;
    Vec v;
    ArrivalKind arrivals = ArrivalKind::poisson;
    double alpha = 2.0;
    InterruptionLaw interruptions;

    void validate() const;
    QueueModelSpec at(long n) const;
};

enum class EventKind : std::uint8_t { arrival, service, abandonment, down, up };
const char* to_string(EventKind k);

struct QueueEvent {
    double time = 0.0;
    EventKind kind = EventKind::arrival;
    int cls = -1;
};

struct QueueRunOptions {
    std::vector<long> x0;              // initial counts; empty means round(rho n)
    std::vector<double> record_times;  // ascending; empty with record_dt = 0 records nothing
    double record_dt = 0.0;
    bool keep_log = false;
    std::uint64_t replication = 0;
};

struct QueuePath {
    int d = 0;
    double horizon = 0.0;
    std::vector<double> times;
    std::vector<long> x, q, z;  // row-major, times.size() x d
    std::vector<std::uint8_t> up;
    std::vector<QueueEvent> log;
    std::vector<std::pair<double, double>> down_intervals;
    Vec time_average_x;          // integral of X over [0, horizon] divided by horizon
    double time_average_queue = 0.0;
    double fraction_above_n = 0.0;  // time fraction with <e,X> > n
    std::uint64_t n_events = 0;
    std::uint64_t audit_failures = 0;

    std::size_t size() const { return times.size(); }
    long x_at(std::size_t k, int i) const { return x[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)]; }
};

// Queue lengths for counts x under the closest-fraction rule; <e,Q> = (<e,x> - n)^+.
std::vector<long> queue_allocation(const std::vector<long>& x, long n, const Vec& v);

QueuePath simulate_queue(const QueueModelSpec& spec, double horizon, std::uint64_t seed,
                         const QueueRunOptions& opt = {});

struct ScaledPath {
    int dim = 0;
    std::vector<double> times;
    std::vector<double> states;  // row-major
    std::vector<std::uint8_t> jump_flags;
    Vec ell_hat_n;
    double rho_hat_n = 0.0;

    std::size_t size() const { return times.size(); }
};

ScaledPath scale_path(const QueuePath& path, const QueueModelSpec& spec, double alpha);

// Stable scale of the limit of n^{-1/alpha}(A^n - lambda^n t) for Pareto renewal arrivals
// with unit-mean interarrivals of tail index alpha.
double pareto_arrival_eta(double lambda, double alpha);

// Limit piecewise OU model of the family.
sde::PiecewiseOUModel limit_model(const QueueFamily& family);

struct ArrivalCalibration {
    long n = 0;
    double t = 1.0;
    double xi = 1.0;
    Vec eta_analytic;
    Vec eta_empirical;  // from the modulus of the empirical CF at xi
    Vec eta_se;
};

ArrivalCalibration calibrate_arrivals(const QueueFamily& family, long n, double t, int reps, std::uint64_t seed,
                                      int threads, double xi = 1.0);

struct FcltOptions {
    Vec x_hat0;           // common scaled start; empty means zero
    double sde_dt = 1e-3;
    int sde_reps = 0;     // 0: same as the queue replications
    int bootstrap = 200;
};

struct FcltPoint {
    long n = 0;
    double ks = 0.0, lo = 0.0, hi = 0.0;
    double queue_mean = 0.0;
    std::vector<double> totals;  // <e, X^n(t_check)> per replication
};

// KS of the limit marginal against an independent copy of itself.
struct KSNull {
    double ks = 0.0, lo = 0.0, hi = 0.0;
};

struct FcltReport {
    double t_check = 0.0;
    double alpha = 2.0;
    int reps = 0;
    std::vector<FcltPoint> points;
    double limit_mean = 0.0;
    std::vector<double> limit_totals;
    KSNull null;
};

FcltReport fclt_compare(const QueueFamily& family, const std::vector<long>& ns, const sde::PiecewiseOUModel& limit,
                        double t_check, int n_reps, std::uint64_t seed, int threads, const FcltOptions& opt = {});

// Index of the limit noise: the stable index if present, else 2.
double limit_alpha(const sde::PiecewiseOUModel& limit);

}  // namespace htol::queue
