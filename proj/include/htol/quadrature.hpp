#pragma once

#include <functional>
#include <vector>

namespace htol::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = false;
};

// Globally adaptive 7/15-point Gauss-Kronrod on [a,b].
Result integrate(const std::function<double(double)>& f, double a, double b, double rel_tol, double abs_tol,
                 int max_intervals = 4000);

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1,1].
Rule gauss_legendre(int n);

}  // namespace htol::quad
