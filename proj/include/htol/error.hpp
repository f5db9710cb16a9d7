#pragma once

#include <stdexcept>
#include <string>

namespace htol {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class ValueError : public Error { public: using Error::Error; };
class NoSolutionError : public Error { public: using Error::Error; };
class HypothesisError : public Error { public: using Error::Error; };
class UnsupportedAnalyticError : public Error { public: using Error::Error; };
class SizeError : public Error { public: using Error::Error; };
class FitError : public Error { public: using Error::Error; };
class RefusalError : public Error { public: using Error::Error; };

class ConfigError : public Error {
public:
    ConfigError(const std::string& path, const std::string& msg)
        : Error(path.empty() ? msg : path + ": " + msg), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

class CertificateNotFound : public Error {
public:
    CertificateNotFound(const std::string& msg, double best_first, double best_second)
        : Error(msg), best_first(best_first), best_second(best_second) {}
    double best_first;
    double best_second;
};

// Quadrature did not reach the requested tolerance; carries what it got.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& msg, double estimate, double error_estimate)
        : Error(msg), estimate(estimate), error_estimate(error_estimate) {}
    double estimate;
    double error_estimate;
};

}  // namespace htol
