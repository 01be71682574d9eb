#include "dfm/kalman.hpp"

#include "dfm/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace dfm {

namespace {

constexpr double kJitter = 1e-10;

void check_finite(const Vector& a, const Matrix& P, int t, const char* stage) {
    if (!a.allFinite() || !P.allFinite()) {
        throw NumericError(std::string("non-finite state moments in ") + stage + " at t=" + std::to_string(t));
    }
}

}  // namespace

namespace detail {

Matrix psd_solve(const Matrix& A, const Matrix& B) {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() == Eigen::Success) {
        return llt.solve(B);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    if (eig.info() != Eigen::Success) {
        throw NumericError("eigen decomposition failed in PSD solve");
    }
    const Vector& ev = eig.eigenvalues();
    const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1.0) * 1e-12 * static_cast<double>(A.rows());
    Vector inv = Vector::Zero(ev.size());
    for (Eigen::Index k = 0; k < ev.size(); ++k)
        if (ev(k) > cutoff) inv(k) = 1.0 / ev(k);
    const Matrix& V = eig.eigenvectors();
    return V * inv.asDiagonal() * (V.transpose() * B);
}

}  // namespace detail

FilterOutput run_filter(const StateSpace& ss, const Panel& panel) {
    const int n = ss.n();
    const int m = ss.state_dim();
    const int T = panel.T();
    if (panel.n() != n) {
        throw StructuralError("panel has " + std::to_string(panel.n()) + " variables, state space expects " +
                              std::to_string(n));
    }
    if (!(ss.p0_diag.array() >= 0.0).all()) {
        throw InputError("initial state covariance must be PSD");
    }

    FilterOutput fo;
    fo.predicted_mean.resize(T + 1);
    fo.predicted_cov.resize(T + 1);
    fo.filtered_mean.resize(T + 1);
    fo.filtered_cov.resize(T + 1);

    Vector a = Vector::Zero(m);
    Matrix P = ss.p0_diag.asDiagonal();
    fo.predicted_mean[0] = a;
    fo.predicted_cov[0] = P;
    fo.filtered_mean[0] = a;
    fo.filtered_cov[0] = P;

    const Matrix RQR = ss.R * ss.q_diag.asDiagonal() * ss.R.transpose();
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double loglik = 0.0;
    Vector pz(m);

    for (int t = 1; t <= T; ++t) {
        a = ss.Tmat * a;
        P = ss.Tmat * P * ss.Tmat.transpose() + RQR;
        detail::symmetrize(P);
        check_finite(a, P, t, "prediction");
        fo.predicted_mean[t] = a;
        fo.predicted_cov[t] = P;

        for (int i = 0; i < n; ++i) {
            if (!panel.available(i, t - 1)) continue;
            const auto z = ss.Z.row(i);
            pz.noalias() = P * z.transpose();
            double f = z.dot(pz) + ss.h_diag(i);
            if (!(f > 0.0)) f += kJitter;
            if (!(f > 0.0) || !std::isfinite(f)) {
                throw NumericError("innovation variance not positive at t=" + std::to_string(t) + ", variable " +
                                   std::to_string(i));
            }
            const double v = panel(i, t - 1) - z.dot(a);
            a.noalias() += pz * (v / f);
            P.noalias() -= pz * (pz.transpose() / f);
            loglik -= 0.5 * (log2pi + std::log(f) + v * v / f);
        }
        detail::symmetrize(P);
        check_finite(a, P, t, "update");
        fo.filtered_mean[t] = a;
        fo.filtered_cov[t] = P;
    }
    if (!std::isfinite(loglik)) {
        throw NumericError("non-finite log-likelihood");
    }
    fo.loglik = loglik;
    return fo;
}

SmoothedMoments run_smoother(const StateSpace& ss, const FilterOutput& fo) {
    const int T = fo.T();
    const int m = ss.state_dim();
    SmoothedMoments sm;
    sm.mean.resize(T + 1);
    sm.cov.resize(T + 1);
    sm.lag1_cov.assign(T + 1, Matrix::Zero(m, m));

    sm.mean[T] = fo.filtered_mean[T];
    sm.cov[T] = fo.filtered_cov[T];

    for (int t = T - 1; t >= 0; --t) {
        const Matrix& Pf = fo.filtered_cov[t];
        // J_t' = P_{t+1|t}^{-1} Tmat P_{t|t}
        const Matrix Jt = detail::psd_solve(fo.predicted_cov[t + 1], ss.Tmat * Pf).transpose();
        sm.mean[t] = fo.filtered_mean[t] + Jt * (sm.mean[t + 1] - fo.predicted_mean[t + 1]);
        Matrix P = Pf + Jt * (sm.cov[t + 1] - fo.predicted_cov[t + 1]) * Jt.transpose();
        detail::symmetrize(P);
        sm.cov[t] = std::move(P);
        sm.lag1_cov[t + 1] = sm.cov[t + 1] * Jt.transpose();
        if (!sm.mean[t].allFinite() || !sm.cov[t].allFinite()) {
            throw NumericError("non-finite smoothed moments at t=" + std::to_string(t));
        }
    }
    return sm;
}

}  // namespace dfm
