#include "htol/matrix_core.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "htol/error.hpp"

namespace htol::matrix {

namespace {

void require_square_finite(const Mat& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw DimensionError(std::string(what) + " must be a non-empty square matrix");
    if (!m.allFinite()) throw ValueError(std::string(what) + " has non-finite entries");
}

double spectral_abscissa_min(const Mat& a) {
    Eigen::EigenSolver<Mat> es(a, false);
    return es.eigenvalues().real().minCoeff();
}

Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }

struct EigPack {
    Vec values;
    Mat vectors;
};

EigPack eig(const Mat& s) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(s));
    return {es.eigenvalues(), es.eigenvectors()};
}

Mat second_form_matrix(const Mat& m, const Vec& gamma, const Vec& v) {
    const int d = static_cast<int>(m.rows());
    const Vec e = Vec::Ones(d);
    Mat mg = m;
    mg.diagonal() -= gamma;
    return m - mg * v * e.transpose();
}

}  // namespace

const char* to_string(CertificateMode mode) {
    return mode == CertificateMode::no_abandonment ? "no-abandonment" : "abandonment";
}

MMatrixCheck validate_m_matrix(const Mat& m) {
    require_square_finite(m, "M");
    const int d = static_cast<int>(m.rows());
    MMatrixCheck out;
    out.s = m.diagonal().maxCoeff();
    bool z_pattern = true;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && m(i, j) > 0.0) z_pattern = false;
    Mat n = out.s * Mat::Identity(d, d) - m;
    Eigen::EigenSolver<Mat> es(n, false);
    out.spectral_radius_n = es.eigenvalues().cwiseAbs().maxCoeff();
    out.ok = z_pattern && out.s > 0.0 && out.spectral_radius_n < out.s * (1.0 - 1e-12);
    const Vec col = m.colwise().sum().transpose();
    out.row_condition = (col.array() >= -1e-12 * m.cwiseAbs().maxCoeff()).all();
    return out;
}

Mat solve_lyapunov(const Mat& a, const Mat& c) {
    require_square_finite(a, "A");
    const int d = static_cast<int>(a.rows());
    if (c.rows() != d || c.cols() != d) throw DimensionError("right-hand side shape mismatch");
    if (spectral_abscissa_min(a) <= 1e-13 * std::max(1.0, a.norm()))
        throw NoSolutionError("spectrum not in the open right half-plane");
    const Mat at = a.transpose();
    const Mat id = Mat::Identity(d, d);
    Mat k = Mat::Zero(d * d, d * d);
    // column-major vec: vec(A'X) = (I kron A') vec X, vec(XA) = (A' kron I) vec X
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            k.block(i * d, j * d, d, d) += id(i, j) * at;
            k.block(i * d, j * d, d, d) += at(i, j) * id;
        }
    const Vec rhs = Eigen::Map<const Vec>(c.data(), d * d);
    const Vec x = k.partialPivLu().solve(rhs);
    Mat out = Eigen::Map<const Mat>(x.data(), d, d);
    return sym(out);
}

Mat solve_lyapunov(const Mat& m) {
    require_square_finite(m, "M");
    const int d = static_cast<int>(m.rows());
    return solve_lyapunov(m, Mat::Identity(d, d));
}

Mat first_form(const Mat& m, const Mat& q) { return sym(q * m + m.transpose() * q); }

Mat second_form(const Mat& m, const Vec& gamma, const Vec& v, const Mat& q) {
    const Mat a = second_form_matrix(m, gamma, v);
    return sym(a.transpose() * q + q * a);
}

double min_eigenvalue(const Mat& s) {
    if (s.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(s), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

Vec jacobi_eigenvalues(const Mat& s) {
    Mat a = sym(s);
    const int n = static_cast<int>(a.rows());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-30 * std::max(1.0, a.squaredNorm())) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
            }
        }
    }
    Vec ev = a.diagonal();
    std::sort(ev.data(), ev.data() + n);
    return ev;
}

double psd_tolerance(const Mat& form) { return 1e-10 * form.norm(); }

bool in_simplex(const Vec& v, double tol) {
    return (v.array() >= -tol).all() && std::abs(v.sum() - 1.0) <= tol;
}

Margins check_q(const Mat& m, const Vec& gamma, const Vec& v, const Mat& q, CertificateMode) {
    const int d = static_cast<int>(m.rows());
    if (q.rows() != d || q.cols() != d || v.size() != d || gamma.size() != d)
        throw DimensionError("check_q: shape mismatch");
    Margins out;
    out.first = min_eigenvalue(first_form(m, q));
    out.second = min_eigenvalue(second_form(m, gamma, v, q));
    const Vec e = Vec::Ones(d);
    const Mat id = Mat::Identity(d, d);
    out.interpolated = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 9; ++k) {
        const double t = 0.1 * k;
        const Mat f = (id - t * e * v.transpose()) * m.transpose() * q + q * m * (id - t * v * e.transpose());
        out.interpolated = std::min(out.interpolated, min_eigenvalue(f));
    }
    return out;
}

namespace {

struct Objective {
    double exact = 0.0;  // plain minimum over all tracked eigenvalues
    double smooth = 0.0;
    Mat grad;  // gradient of the smoothed value with respect to Q
};

// Soft minimum of the spectra of form1, optionally form2, and Q itself,
// evaluated at Q / tr(Q) so the scale of Q drops out.
Objective evaluate(const Mat& q_raw, const Mat& m, const Mat& a2, bool use_second, double tau) {
    const int d = static_cast<int>(m.rows());
    const double tr = q_raw.trace();
    const Mat q = q_raw / tr;
    std::vector<EigPack> packs;
    std::vector<int> kind;
    packs.push_back(eig(q * m + m.transpose() * q));
    kind.push_back(1);
    if (use_second) {
        packs.push_back(eig(a2.transpose() * q + q * a2));
        kind.push_back(2);
    }
    packs.push_back(eig(q));
    kind.push_back(0);

    double lo = std::numeric_limits<double>::infinity();
    for (const auto& p : packs) lo = std::min(lo, p.values(0));
    double z = 0.0;
    for (const auto& p : packs)
        for (int i = 0; i < d; ++i) z += std::exp(-(p.values(i) - lo) / tau);
    Objective out;
    out.exact = lo;
    out.smooth = lo - tau * std::log(z);
    Mat g = Mat::Zero(d, d);
    for (std::size_t k = 0; k < packs.size(); ++k) {
        const auto& p = packs[k];
        for (int i = 0; i < d; ++i) {
            const double w = std::exp(-(p.values(i) - lo) / tau) / z;
            if (w < 1e-14) continue;
            const Vec u = p.vectors.col(i);
            Mat dq;
            if (kind[k] == 0) dq = u * u.transpose();
            else {
                const Mat& a = kind[k] == 1 ? m : a2;
                const Vec au = a * u;
                dq = au * u.transpose() + u * au.transpose();
            }
            g += w * dq;
        }
    }
    // d/dQ of f(Q/tr Q) with f homogeneous of degree one
    out.grad = (g - (g.cwiseProduct(q).sum()) * Mat::Identity(d, d)) / tr;
    return out;
}

struct SearchResult {
    Mat q;
    double best = -std::numeric_limits<double>::infinity();
    int iterations = 0;
};

// Ascent over Q = a w w' + P' L L' P (no-abandonment) or Q = L L' (abandonment).
SearchResult ascend(const Mat& m, const Mat& a2, bool structured, const Vec& wt, const Vec& v, const Mat& start,
                    int max_iter, const std::function<bool(const Mat&)>& accept) {
    const int d = static_cast<int>(m.rows());
    Vec w = wt.normalized();
    Mat proj = Mat::Identity(d, d) - v * w.transpose() / w.dot(v);
    Mat proj_t = proj.transpose();

    double log_a = 0.0;
    Mat l;
    if (structured) {
        const double a0 = w.dot(start * w);
        log_a = std::log(std::max(a0, 1e-6));
        Mat r = proj_t * start * proj + 1e-3 * start.trace() / d * Mat::Identity(d, d);
        Eigen::LLT<Mat> llt(sym(r));
        l = llt.matrixL();
    } else {
        Eigen::LLT<Mat> llt(sym(start));
        l = llt.matrixL();
    }
    auto build = [&](double la, const Mat& lm) -> Mat {
        Mat ll = lm.triangularView<Eigen::Lower>();
        if (structured) return sym(std::exp(la) * w * w.transpose() + proj_t * ll * ll.transpose() * proj);
        return sym(ll * ll.transpose());
    };

    SearchResult best;
    Mat q = build(log_a, l);
    double step = 0.05;
    const double scale0 = std::max(1e-3, std::abs(evaluate(q, m, a2, !structured, 1.0).exact));
    double tau = 0.05 * std::max(scale0, m.norm() / d);
    Objective cur = evaluate(q, m, a2, !structured, tau);
    for (int it = 0; it < max_iter; ++it) {
        best.iterations = it + 1;
        if (cur.exact > best.best) {
            best.best = cur.exact;
            best.q = q;
        }
        if (accept(q)) {
            best.q = q;
            best.best = cur.exact;
            return best;
        }
        // chain rule into the parameters
        const Mat& g = cur.grad;
        double g_a = 0.0;
        Mat g_l;
        Mat ll = l.triangularView<Eigen::Lower>();
        if (structured) {
            g_a = std::exp(log_a) * w.dot(g * w);
            g_l = 2.0 * proj * g * proj_t * ll;
        } else {
            g_l = 2.0 * g * ll;
        }
        g_l = g_l.triangularView<Eigen::Lower>();
        const double gn = std::sqrt(g_a * g_a + g_l.squaredNorm()) + 1e-300;
        const double lnorm = std::max(ll.norm(), 1e-12);
        bool moved = false;
        for (int tries = 0; tries < 30; ++tries) {
            const double h = step * lnorm / gn;
            const double la2 = log_a + h * g_a;
            const Mat l2 = l + h * g_l;
            const Mat q2 = build(la2, l2);
            if (!(q2.trace() > 0.0) || !q2.allFinite()) {
                step *= 0.5;
                continue;
            }
            Objective nxt = evaluate(q2, m, a2, !structured, tau);
            if (nxt.smooth > cur.smooth) {
                log_a = la2;
                l = l2;
                q = q2;
                cur = nxt;
                step = std::min(step * 1.5, 1.0);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved || step < 1e-10) {
            // stalled at this smoothing level: sharpen
            tau *= 0.5;
            step = 0.05;
            cur = evaluate(q, m, a2, !structured, tau);
            if (tau < 1e-14) break;
        } else if (it % 200 == 199) {
            tau *= 0.7;
            cur = evaluate(q, m, a2, !structured, tau);
        }
    }
    return best;
}

}  // namespace

LyapunovCertificate find_q(const Mat& m, const Vec& gamma, const Vec& v, CertificateMode mode) {
    require_square_finite(m, "M");
    const int d = static_cast<int>(m.rows());
    if (gamma.size() != d || v.size() != d) throw DimensionError("find_q: shape mismatch");
    if (!gamma.allFinite() || !v.allFinite()) throw ValueError("find_q: non-finite input");
    const MMatrixCheck mc = validate_m_matrix(m);
    if (!mc.ok) throw HypothesisError("M is not a nonsingular M-matrix");
    if (!in_simplex(v)) throw HypothesisError("v is not in the simplex");
    if ((gamma.array() < 0.0).any()) throw HypothesisError("Gamma must be nonnegative");
    const Vec gv = gamma.cwiseProduct(v);
    const double gv_tol = 1e-12 * std::max(1.0, gamma.cwiseAbs().maxCoeff());
    const bool gv_zero = gv.cwiseAbs().maxCoeff() <= gv_tol;
    if (mode == CertificateMode::no_abandonment) {
        if (!mc.row_condition) throw HypothesisError("no-abandonment mode needs e'M >= 0");
        if (!gv_zero) throw HypothesisError("no-abandonment mode needs Gamma v = 0");
    } else {
        if (gv_zero) throw HypothesisError("abandonment mode needs Gamma v != 0");
        const Vec mv = m * v;
        const bool hyp_i = ((mv - gv).array() >= -1e-12 * std::max(1.0, mv.cwiseAbs().maxCoeff())).all();
        bool diag = true;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j && m(i, j) != 0.0) diag = false;
        const bool hyp_ii = diag && (m.diagonal().array() > 0.0).all();
        if (!hyp_i && !hyp_ii) throw HypothesisError("neither Mv >= Gamma v nor diagonal M holds");
    }

    const Mat a2 = second_form_matrix(m, gamma, v);
    const bool strict_second = mode == CertificateMode::abandonment;
    auto accepts = [&](const Mat& q) {
        const Mat f1 = first_form(m, q);
        const Mat f2 = second_form(m, gamma, v, q);
        const double l0 = min_eigenvalue(q);
        const double l1 = min_eigenvalue(f1);
        const double l2 = min_eigenvalue(f2);
        if (!(l0 > 1e-12 * q.norm())) return false;
        if (!(l1 > 1e-9 * f1.norm())) return false;
        if (strict_second) return l2 > 1e-9 * f2.norm();
        return l2 >= -psd_tolerance(f2);
    };
    auto finish = [&](Mat q, const std::string& method, int iterations) {
        q = sym(q);
        Eigen::SelfAdjointEigenSolver<Mat> es(q, Eigen::EigenvaluesOnly);
        q /= es.eigenvalues().maxCoeff();
        // clean rounding so margins are reported on the exact returned matrix
        q = sym(q);
        LyapunovCertificate cert;
        cert.q = q;
        cert.mode = mode;
        cert.method = method;
        cert.iterations = iterations;
        const Margins mg = check_q(m, gamma, v, q, mode);
        cert.margin_first = mg.first;
        cert.margin_second = mg.second;
        const Vec j1 = jacobi_eigenvalues(first_form(m, q));
        const Vec j2 = jacobi_eigenvalues(second_form(m, gamma, v, q));
        if (std::abs(j1(0) - cert.margin_first) > 1e-8 || std::abs(j2(0) - cert.margin_second) > 1e-8)
            throw CertificateNotFound("eigenvalue cross-check disagreement", cert.margin_first, cert.margin_second);
        Eigen::LLT<Mat> llt(q);
        if (llt.info() != Eigen::Success)
            throw CertificateNotFound("returned Q is not positive definite", cert.margin_first, cert.margin_second);
        return cert;
    };

    Mat start;
    if (mode == CertificateMode::abandonment) {
        try {
            Mat q = solve_lyapunov(a2, Mat::Identity(d, d));
            if (accepts(q)) return finish(q, "closed-form", 0);
            start = q;
        } catch (const NoSolutionError&) {
        }
        if (start.size() == 0 || min_eigenvalue(start) <= 0.0) start = solve_lyapunov(m);
        if (accepts(start)) return finish(start, "lyapunov", 0);
        SearchResult r = ascend(m, a2, false, Vec::Ones(d), v, start, 10000, accepts);
        if (r.q.size() && accepts(r.q)) return finish(r.q, "ascent", r.iterations);
        const Margins mg = check_q(m, gamma, v, r.q.size() ? r.q : start, mode);
        throw CertificateNotFound("no certificate within the iteration budget", mg.first, mg.second);
    }

    // no-abandonment: any valid Q maps v onto a multiple of w = M'^{-1} e
    const Vec wt = m.transpose().partialPivLu().solve(Vec::Ones(d));
    const Mat s = solve_lyapunov(m);
    if (accepts(s)) return finish(s, "lyapunov", 0);
    const Vec w = wt.normalized();
    const Mat proj = Mat::Identity(d, d) - v * w.transpose() / w.dot(v);
    const Mat base = proj.transpose() * s * proj;
    Mat best_q;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int k = -12; k <= 12; ++k) {
        const double a = std::pow(2.0, k) * s.trace();
        const Mat q = sym(a * w * w.transpose() + base);
        if (accepts(q)) return finish(q, "structured", 0);
        const double val = std::min(min_eigenvalue(first_form(m, q)) / q.trace(), min_eigenvalue(q) / q.trace());
        if (val > best_val) {
            best_val = val;
            best_q = q;
        }
    }
    SearchResult r = ascend(m, a2, true, wt, v, best_q, 10000, accepts);
    if (r.q.size() && accepts(r.q)) return finish(r.q, "ascent", r.iterations);
    const Margins mg = check_q(m, gamma, v, r.q.size() ? r.q : best_q, mode);
    throw CertificateNotFound("no certificate within the iteration budget", mg.first, mg.second);
}

}  // namespace htol::matrix
