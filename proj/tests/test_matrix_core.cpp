#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "htol/error.hpp"
#include "htol/matrix_core.hpp"
#include "htol/quadrature.hpp"
#include "htol/rng.hpp"

using namespace htol;
using matrix::Mat;
using matrix::Vec;

namespace {

Mat m2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_SUITE("matrix_core") {

TEST_CASE("identity is an M-matrix with the row condition") {
    const auto c = matrix::validate_m_matrix(Mat::Identity(2, 2));
    CHECK(c.ok);
    CHECK(c.s == 1.0);
    CHECK(c.spectral_radius_n == doctest::Approx(0.0));
    CHECK(c.row_condition);
}

TEST_CASE("upper triangular example") {
    const Mat m = m2(1, -0.5, 0, 2);
    const auto c = matrix::validate_m_matrix(m);
    CHECK(c.ok);
    CHECK(c.row_condition);
    // independent eigensolver: eigenvalues 1 and 2
    Eigen::EigenSolver<Mat> es(m);
    for (int i = 0; i < 2; ++i) CHECK(es.eigenvalues()(i).real() > 0.0);
    const Vec col = Vec::Ones(2).transpose() * m;
    CHECK(col(0) == doctest::Approx(1.0));
    CHECK(col(1) == doctest::Approx(1.5));
}

TEST_CASE("positive off-diagonal is rejected") {
    CHECK_FALSE(matrix::validate_m_matrix(m2(1, 0.5, 0, 2)).ok);
}

TEST_CASE("bad shapes raise") {
    CHECK_THROWS_AS(matrix::validate_m_matrix(Mat::Ones(2, 3)), DimensionError);
    Mat bad = Mat::Identity(2, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(matrix::validate_m_matrix(bad), ValueError);
}

TEST_CASE("Lyapunov solutions") {
    const Mat s1 = matrix::solve_lyapunov(Mat::Identity(2, 2));
    CHECK((s1 - 0.5 * Mat::Identity(2, 2)).norm() < 1e-14);
    const Mat s2 = matrix::solve_lyapunov(m2(1, 0, 0, 2));
    CHECK(s2(0, 0) == doctest::Approx(0.5));
    CHECK(s2(1, 1) == doctest::Approx(0.25));
    CHECK(std::abs(s2(0, 1)) < 1e-14);
    const Mat m = m2(1, -0.5, 0, 2);
    const Mat s = matrix::solve_lyapunov(m);
    CHECK((s * m + m.transpose() * s - Mat::Identity(2, 2)).norm() <= 1e-10);
    CHECK((s - s.transpose()).norm() <= 1e-12);
}

TEST_CASE("Lyapunov solution equals the integral of exp(-M't) exp(-Mt)") {
    const Mat m = m2(1, -0.5, 0, 2);
    const Mat s = matrix::solve_lyapunov(m);
    // closed-form exponential of the triangular matrix
    auto expm = [](double t) {
        Mat e(2, 2);
        e << std::exp(-t), -0.5 * (std::exp(-2 * t) - std::exp(-t)), 0, std::exp(-2 * t);
        return e;
    };
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const auto r = quad::integrate(
                [&](double t) {
                    const Mat e = expm(t);
                    return (e.transpose() * e)(i, j);
                },
                0.0, 60.0, 1e-12, 1e-14);
            CHECK(r.value == doctest::Approx(s(i, j)).epsilon(1e-9));
        }
}

TEST_CASE("spectrum outside the right half-plane has no solution") {
    CHECK_THROWS_AS(matrix::solve_lyapunov(-Mat::Identity(2, 2)), NoSolutionError);
}

TEST_CASE("identity certificate margins") {
    const auto cert = matrix::find_q(Mat::Identity(2, 2), Vec::Zero(2), v2(0.5, 0.5),
                                     matrix::CertificateMode::no_abandonment);
    CHECK(cert.margin_first > 0.0);
    CHECK(cert.margin_second >= -1e-10);
    const auto mg = matrix::check_q(Mat::Identity(2, 2), Vec::Zero(2), v2(0.5, 0.5), Mat::Identity(2, 2),
                                    matrix::CertificateMode::no_abandonment);
    CHECK(mg.first == doctest::Approx(2.0));
    CHECK(std::abs(mg.second) < 1e-12);
}

TEST_CASE("abandonment certificate with diagonal M") {
    const Mat m = m2(1, 0, 0, 2);
    const Vec g = v2(1, 0), v = v2(1, 0);
    const auto cert = matrix::find_q(m, g, v, matrix::CertificateMode::abandonment);
    // independent recheck of both forms
    const Mat f1 = cert.q * m + m * cert.q;
    const Mat mg = m - g.asDiagonal().toDenseMatrix();
    const Mat a = m - mg * v * Vec::Ones(2).transpose();
    const Mat f2 = a.transpose() * cert.q + cert.q * a;
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(f1).eigenvalues().minCoeff() > 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (f2 + f2.transpose())).eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("non M-matrix raises a hypothesis error") {
    CHECK_THROWS_AS(matrix::find_q(m2(1, 0.5, 0, 2), Vec::Zero(2), v2(0.5, 0.5), matrix::CertificateMode::no_abandonment),
                    HypothesisError);
}

TEST_CASE("check_q reports the negative second margin") {
    const auto mg = matrix::check_q(Mat::Identity(2, 2), Vec::Zero(2), v2(1, 0), Mat::Identity(2, 2),
                                    matrix::CertificateMode::no_abandonment);
    CHECK(mg.second == doctest::Approx(1.0 - std::sqrt(2.0)));
    const auto z = matrix::check_q(Mat::Identity(2, 2), Vec::Zero(2), v2(1, 0), Mat::Zero(2, 2),
                                   matrix::CertificateMode::no_abandonment);
    CHECK(z.first == 0.0);
    CHECK(z.second == 0.0);
}

TEST_CASE("Jacobi eigenvalues agree with Eigen") {
    rng::Stream s(5);
    for (int rep = 0; rep < 20; ++rep) {
        const int d = 2 + rep % 5;
        Mat a(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = s.normal();
        const Mat sym = a + a.transpose();
        Vec j = matrix::jacobi_eigenvalues(sym);
        std::sort(j.data(), j.data() + j.size());
        const Vec e = Eigen::SelfAdjointEigenSolver<Mat>(sym).eigenvalues();
        CHECK((j - e).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("valid M-matrices have eigenvalues in the right half-plane") {
    rng::Stream s(17);
    for (int rep = 0; rep < 50; ++rep) {
        const int d = 1 + rep % 6;
        Mat m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = i == j ? 0.0 : -s.uniform();
        for (int i = 0; i < d; ++i) m(i, i) = -m.row(i).sum() + s.uniform() * 0.5 + (rep % 2 ? 0.0 : 0.1);
        if (!matrix::validate_m_matrix(m).ok) continue;
        Eigen::EigenSolver<Mat> es(m);
        for (int i = 0; i < d; ++i) CHECK(es.eigenvalues()(i).real() > 0.0);
    }
}

}  // TEST_SUITE
