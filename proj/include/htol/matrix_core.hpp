#pragma once

#include <Eigen/Dense>
#include <string>

namespace htol::matrix {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct MMatrixCheck {
    bool ok = false;
    double s = 0.0;
    double spectral_radius_n = 0.0;
    bool row_condition = false;
};

MMatrixCheck validate_m_matrix(const Mat& m);

// S with S M + M' S = I.
Mat solve_lyapunov(const Mat& m);
// X with A' X + X A = C, C symmetric. Spectrum of A must lie in the open right half-plane.
Mat solve_lyapunov(const Mat& a, const Mat& c);

enum class CertificateMode { no_abandonment, abandonment };

const char* to_string(CertificateMode mode);

struct Margins {
    double first = 0.0;
    double second = 0.0;
    // min over t in {0,...,0.9} of the interpolated form (I - t e v')M'Q + QM(I - t v e')
    double interpolated = 0.0;
};

struct LyapunovCertificate {
    Mat q;
    double margin_first = 0.0;
    double margin_second = 0.0;
    CertificateMode mode = CertificateMode::no_abandonment;
    std::string method;
    int iterations = 0;
};

// Symmetric parts that have to be positive.
Mat first_form(const Mat& m, const Mat& q);
Mat second_form(const Mat& m, const Vec& gamma, const Vec& v, const Mat& q);

Margins check_q(const Mat& m, const Vec& gamma, const Vec& v, const Mat& q, CertificateMode mode);

LyapunovCertificate find_q(const Mat& m, const Vec& gamma, const Vec& v, CertificateMode mode);

double min_eigenvalue(const Mat& sym);
// Cyclic Jacobi eigenvalues; kept separate from Eigen's solver for cross-checking.
Vec jacobi_eigenvalues(const Mat& sym);

// PSD floor used for the non-strict condition.
double psd_tolerance(const Mat& form);

bool in_simplex(const Vec& v, double tol = 1e-9);

}  // namespace htol::matrix
