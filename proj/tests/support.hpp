#pragma once

// Test-only helpers: a brute-force Gaussian conditioning oracle for the state
// space model and random instance generators. Nothing here calls the filter or
// smoother.

#include "dfm/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace dfm::test {

struct OracleMoments {
    double loglik = 0.0;
    std::vector<Vector> mean;      // t = 0..T
    std::vector<Matrix> cov;       // t = 0..T
    std::vector<Matrix> lag1_cov;  // t = 1..T, Cov(x_t, x_{t-1})
};

/// Exact conditional moments of the stacked states (x_0, ..., x_T) given the
/// available observations, from the joint covariance assembled block by block.
inline OracleMoments joint_gaussian_oracle(const StateSpace& ss, const Panel& panel) {
    const int m = ss.state_dim();
    const int T = panel.T();
    const int N = m * (T + 1);

    // Marginal variances V_t and powers of the transition matrix.
    std::vector<Matrix> V(T + 1);
    V[0] = ss.P0();
    const Matrix RQR = ss.R * ss.Q() * ss.R.transpose();
    for (int t = 1; t <= T; ++t) V[t] = ss.Tmat * V[t - 1] * ss.Tmat.transpose() + RQR;
    std::vector<Matrix> Tpow(T + 1);
    Tpow[0] = Matrix::Identity(m, m);
    for (int k = 1; k <= T; ++k) Tpow[k] = ss.Tmat * Tpow[k - 1];

    Matrix S(N, N);
    for (int t = 0; t <= T; ++t) {
        for (int u = 0; u <= t; ++u) {
            const Matrix C = Tpow[t - u] * V[u];  // Cov(x_t, x_u)
            S.block(t * m, u * m, m, m) = C;
            S.block(u * m, t * m, m, m) = C.transpose();
        }
    }

    std::vector<std::pair<int, int>> obs;  // (variable, t) with t in 1..T
    for (int t = 1; t <= T; ++t)
        for (int i = 0; i < panel.n(); ++i)
            if (panel.available(i, t - 1)) obs.emplace_back(i, t);
    const int k = static_cast<int>(obs.size());

    OracleMoments out;
    Vector mean_all = Vector::Zero(N);
    Matrix cov_all = S;
    if (k > 0) {
        Matrix Cyy(k, k);
        Matrix Cxy(N, k);
        Vector y(k);
        for (int a = 0; a < k; ++a) {
            const auto [i, t] = obs[a];
            y(a) = panel(i, t - 1);
            Cxy.col(a) = S.middleCols(t * m, m) * ss.Z.row(i).transpose();
            for (int b = 0; b < k; ++b) {
                const auto [j, u] = obs[b];
                Cyy(a, b) = ss.Z.row(i) * S.block(t * m, u * m, m, m) * ss.Z.row(j).transpose();
                if (a == b) Cyy(a, b) += ss.h_diag(i);
            }
        }
        Eigen::LLT<Matrix> llt(Cyy);
        const Vector alpha = llt.solve(y);
        const Matrix L = llt.matrixL();
        const double logdet = 2.0 * L.diagonal().array().log().sum();
        out.loglik = -0.5 * (k * std::log(2.0 * std::numbers::pi) + logdet + y.dot(alpha));
        mean_all = Cxy * alpha;
        cov_all = S - Cxy * llt.solve(Cxy.transpose());
    }
    out.mean.resize(T + 1);
    out.cov.resize(T + 1);
    out.lag1_cov.assign(T + 1, Matrix::Zero(m, m));
    for (int t = 0; t <= T; ++t) {
        out.mean[t] = mean_all.segment(t * m, m);
        out.cov[t] = cov_all.block(t * m, t * m, m, m);
        if (t > 0) out.lag1_cov[t] = cov_all.block(t * m, (t - 1) * m, m, m);
    }
    return out;
}

/// Random parameters with a stable VAR (row sums of |Phi| below 0.9).
inline Theta random_theta(const ModelOrder& o, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    Theta th;
    th.Lambda = Matrix(o.n, o.loading_width());
    for (Eigen::Index k = 0; k < th.Lambda.size(); ++k) th.Lambda.data()[k] = normal(rng);
    th.Phi = Matrix(o.r, o.var_width());
    for (Eigen::Index k = 0; k < th.Phi.size(); ++k) th.Phi.data()[k] = coef(rng);
    for (int j = 0; j < o.r; ++j) {
        const double rowsum = th.Phi.row(j).cwiseAbs().sum();
        if (rowsum > 0.9) th.Phi.row(j) *= 0.9 / rowsum;
    }
    th.psi = Vector(o.n);
    for (int i = 0; i < o.n; ++i) th.psi(i) = unif(rng);
    th.omega = Vector(o.r);
    for (int j = 0; j < o.r; ++j) th.omega(j) = unif(rng);
    return th;
}

/// Draw data from the model itself (zero initial state) and mask cells with
/// probability `fraction`, keeping at least `min_obs` cells per variable.
inline Panel random_panel(const Theta& th, const ModelOrder& o, int T, double fraction, std::mt19937_64& rng,
                          int min_obs = 2) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int s = o.s();
    const int r = o.r;
    Matrix f = Matrix::Zero(r, T + s + 1 + 20);
    const int burn = 20;
    for (int k = o.q; k < f.cols(); ++k) {
        Vector v = Vector::Zero(r);
        for (int l = 1; l <= o.q; ++l) v += th.Phi.middleCols((l - 1) * r, r) * f.col(k - l);
        for (int j = 0; j < r; ++j) v(j) += normal(rng) / std::sqrt(th.omega(j));
        f.col(k) = v;
    }
    Matrix y(o.n, T);
    for (int t = 0; t < T; ++t) {
        const int k = burn + s + 1 + t;
        for (int i = 0; i < o.n; ++i) {
            double v = normal(rng) / std::sqrt(th.psi(i));
            for (int l = 0; l <= o.p; ++l) v += th.Lambda.row(i).segment(l * r, r).dot(f.col(k - l));
            y(i, t) = v;
        }
    }
    Mask mask = Mask::Constant(o.n, T, true);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (int i = 0; i < o.n; ++i)
            for (int t = 0; t < T; ++t) mask(i, t) = unif(rng) >= fraction;
        bool ok = true;
        for (int i = 0; i < o.n; ++i)
            if (mask.row(i).count() < min_obs) ok = false;
        if (ok) break;
    }
    return Panel(y, mask, Vector::Zero(o.n), Vector::Ones(o.n));
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix& A) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (A + A.transpose()));
    return eig.eigenvalues().minCoeff();
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace dfm::test
