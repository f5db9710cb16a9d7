#include "htol/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <queue>

namespace htol::quad {

namespace {

using GK15 = boost::math::quadrature::gauss_kronrod<double, 15>;

struct Piece {
    double a, b, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
};

// One 7/15 panel. Boost 1.74 reports the panel error on [-1,1] without the
// half-width factor, so it is rescaled here; the adaptive driver below is our own.
Piece kronrod(const std::function<double(double)>& f, double a, double b) {
    double err = 0.0;
    const double v = GK15::integrate(f, a, b, 0, 0.0, &err);
    return {a, b, v, err * 0.5 * (b - a)};
}

}  // namespace

Result integrate(const std::function<double(double)>& f, double a, double b, double rel_tol, double abs_tol,
                 int max_intervals) {
    Result out;
    std::priority_queue<Piece> heap;
    Piece p = kronrod(f, a, b);
    out.evaluations = 15;
    double value = p.value, error = p.error;
    heap.push(p);
    while (error > std::max(abs_tol, rel_tol * std::abs(value))) {
        if (static_cast<int>(heap.size()) >= max_intervals) {
            out.value = value;
            out.error = error;
            out.converged = false;
            return out;
        }
        Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        Piece l = kronrod(f, worst.a, mid);
        Piece r = kronrod(f, mid, worst.b);
        out.evaluations += 30;
        value += l.value + r.value - worst.value;
        error += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        if (mid <= worst.a || mid >= worst.b) break;
    }
    // re-sum to shed accumulated rounding from the running updates
    value = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        value += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    out.value = value;
    out.error = error;
    out.converged = error <= std::max(abs_tol, rel_tol * std::abs(value)) * 1.0000001;
    return out;
}

Rule gauss_legendre(int n) {
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    // nonnegative zeros in ascending order, 0 first when n is odd
    const auto zeros = boost::math::legendre_p_zeros<double>(n);
    for (std::size_t k = 0; k < zeros.size(); ++k) {
        const double x = zeros[k];
        const double dp = boost::math::legendre_p_prime<double>(n, x);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const int pos = n - static_cast<int>(zeros.size()) + static_cast<int>(k);
        const int neg = n - 1 - pos;
        r.nodes[pos] = x;
        r.weights[pos] = w;
        r.nodes[neg] = -x;
        r.weights[neg] = w;
    }
    return r;
}

}  // namespace htol::quad
