#pragma once

#include "dfm/model.hpp"

#include <vector>

namespace dfm {

/// Filter moments indexed by t = 0..T. Index 0 holds the initial state prior,
/// so predicted and filtered entries coincide there.
struct FilterOutput {
    std::vector<Vector> predicted_mean;
    std::vector<Matrix> predicted_cov;
    std::vector<Vector> filtered_mean;
    std::vector<Matrix> filtered_cov;
    double loglik = 0.0;

    int T() const { return static_cast<int>(filtered_mean.size()) - 1; }
};

/// Smoothed state moments given all available data.
/// mean/cov are indexed t = 0..T; lag1_cov[t] = Cov(x_t, x_{t-1} | Y) for t = 1..T
/// (lag1_cov[0] is zero).
struct SmoothedMoments {
    std::vector<Vector> mean;
    std::vector<Matrix> cov;
    std::vector<Matrix> lag1_cov;

    int T() const { return static_cast<int>(mean.size()) - 1; }

    /// E[x_t x_t' | Y]
    Matrix second_moment(int t) const { return cov[t] + mean[t] * mean[t].transpose(); }
    /// E[x_t x_{t-1}' | Y]
    Matrix lag1_second_moment(int t) const { return lag1_cov[t] + mean[t] * mean[t - 1].transpose(); }
};

/// Kalman filter with missing cells removed row by row. Because H is diagonal
/// the available observations of a period are absorbed one at a time, which is
/// algebraically identical to the joint update on the available rows.
/// Throws NumericError naming the time index on breakdown.
FilterOutput run_filter(const StateSpace& ss, const Panel& panel);

/// Fixed-interval (Rauch-Tung-Striebel) smoother with lag-one cross covariances.
SmoothedMoments run_smoother(const StateSpace& ss, const FilterOutput& fo);

namespace detail {

/// Solve A X = B for symmetric positive semidefinite A. Uses a Cholesky factor
/// when it exists and an eigenvalue pseudo-inverse otherwise.
Matrix psd_solve(const Matrix& A, const Matrix& B);

inline void symmetrize(Matrix& P) {
    P = 0.5 * (P + P.transpose()).eval();
}

}  // namespace detail

}  // namespace dfm
