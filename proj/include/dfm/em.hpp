#pragma once

#include "dfm/kalman.hpp"
#include "dfm/model.hpp"
#include "dfm/prior.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dfm {

/// Precision bounds applied by the psi and omega updates.
inline constexpr double kPrecisionFloor = 1e-8;
inline constexpr double kPrecisionCap = 1e8;

/// Time-aggregated smoothed moments consumed by the M-steps.
/// F^Lambda_t = [f_t' ... f_{t-p}']', F^Phi_{t-1} = [f_{t-1}' ... f_{t-q}']'.
struct EStepSums {
    Matrix SFF_phi;               // rq x rq:   sum_t E[F^Phi_{t-1} F^Phi_{t-1}']
    Matrix SfF_phi;               // r x rq:    row j = sum_t E[f_{j,t} F^Phi_{t-1}']
    Vector Sff;                   // r:         sum_t E[f_{j,t}^2]
    std::vector<Matrix> SFF_lam;  // n of L x L: sum_t a_it E[F^Lambda_t F^Lambda_t']
    Matrix SFy;                   // n x L:     row i = sum_t a_it E[F^Lambda_t]' y_it
    Vector Syy;                   // n:         sum_t a_it y_it^2
    int T = 0;
    Eigen::VectorXi Ti;
};

/// Assemble the M-step sums from smoothed moments and the available cells of `panel`.
EStepSums assemble_sums(const SmoothedMoments& sm, const Panel& panel, const ModelOrder& order);

struct EStepResult {
    EStepSums sums;
    SmoothedMoments smoothed;
    double loglik = 0.0;
};

/// Filter and smooth at theta_k, returning the M-step sums and ln p(Y^A | theta_k).
EStepResult e_step(const Theta& theta_k, const Panel& panel, const ModelOrder& order, double sigma0);

/// phi_j = (SFF_phi + Winv_j / omega_j)^{-1} SfF_phi[j]' for every factor j.
Matrix m_step_phi(const EStepSums& sums, const Vector& omega_k, const std::vector<Matrix>& Winv);

/// lambda_i = (SFF_lam[i] + Vinv_i / psi_i)^{-1} SFy[i]' for every variable i.
Matrix m_step_lambda(const EStepSums& sums, const Vector& psi_k, const std::vector<Matrix>& Vinv);

/// omega_j = (T - 1) / expected SSR_j in MAP mode, T / SSR_j in ML mode; clamped to the precision bounds.
Vector m_step_omega(const EStepSums& sums, const Matrix& Phi_next, EstimatorMode mode);

/// psi_i = (T_i - 1) / expected SSR_i in MAP mode, T_i / SSR_i in ML mode; clamped to the precision bounds.
Vector m_step_psi(const EStepSums& sums, const Matrix& Lambda_next, EstimatorMode mode);

/// One conditional-maximization sweep Phi -> Omega -> Lambda -> Psi at fixed
/// shrinkage. `prior` must already be resolved to length n.
Theta m_step(const Theta& theta_k, const EStepSums& sums, const PriorSpec& prior, const ModelOrder& order);

/// ln p(Y^A | theta) + ln p(theta), up to an additive constant.
double log_posterior(const Theta& theta, const Panel& panel, const PriorSpec& spec, const ModelOrder& order);

struct InitStrategy {
    enum class Kind { PCA, Random };
    Kind kind = Kind::PCA;
    std::uint64_t seed = 0;

    static InitStrategy pca() { return {Kind::PCA, 0}; }
    static InitStrategy random(std::uint64_t seed) { return {Kind::Random, seed}; }
};

struct InitResult {
    Theta theta;
    /// Set when PCA was requested but the panel was degenerate and the random(0) start was used.
    bool fell_back = false;
};

InitResult initialize(const Panel& panel, const ModelOrder& order, const InitStrategy& strategy);

struct FitOptions {
    int max_iter = 500;
    double tol = 1e-4;
    InitStrategy init = InitStrategy::pca();
    /// Overrides `init` when set.
    std::optional<Theta> start;
};

struct FitResult {
    Theta theta_hat;
    /// r x (T+s); column k is the smoothed f_{k+1-s}.
    Matrix factors;
    int presample = 0;
    /// n x T common component in original units.
    Matrix common;
    /// Log posterior per iteration, without the log-determinant terms of the shrinkage prior.
    std::vector<double> logpost_path;
    /// Relative change entering the stopping rule; entry k compares logpost_path[k+1] with [k].
    std::vector<double> rel_change_path;
    std::vector<Vector> eta_lambda_path;
    Vector eta_lambda;
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    bool init_fell_back = false;
};

/// Relative change |a - b| / (|a|/2 + |b|/2), zero when both are zero.
double relative_change(double current, double previous);

/// Penalized EM for a standardized panel. Throws NumericError tagged with the
/// iteration and parameter block when a step fails.
FitResult fit(const Panel& panel, const ModelOrder& order, const PriorSpec& spec, const FitOptions& opts = {});

}  // namespace dfm
