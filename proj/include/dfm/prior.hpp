#pragma once

#include "dfm/model.hpp"

#include <string>
#include <vector>

namespace dfm {

enum class EstimatorMode { MAP, ML };

std::string to_string(EstimatorMode mode);
EstimatorMode parse_mode(const std::string& text);

/// Minnesota-style shrinkage settings.
///
/// Loading row i has prior precision eta_lambda[i] * J_lambda and VAR row j has
/// eta_phi * J_phi, where the lag-decay matrices weight lag block l by
/// (l+1)^d_lambda (loadings, l = 0..p) and l^d_phi (VAR, l = 1..q).
/// In ML mode every shrinkage term is zero and the precision priors are dropped.
struct PriorSpec {
    EstimatorMode mode = EstimatorMode::MAP;
    double eta_phi = 0.01;
    double d_lambda = 2.0;
    double d_phi = 2.0;
    double alpha_lambda = 0.0;
    double beta_lambda = 0.0;
    bool adaptive = true;
    /// Starting (or, with adaptive off, fixed) loading shrinkage; length n or empty for all zero.
    Vector eta_lambda;
    double sigma0 = 1e4;
    /// Upper bound returned by expected_eta_lambda when the Gamma posterior mean diverges.
    double eta_cap = 1e8;

    /// MAP spec with the given settings left at their defaults; ML spec has all shrinkage zeroed.
    static PriorSpec ml();

    /// Copy with ML constraints applied and eta_lambda sized to n.
    PriorSpec resolved(int n) const;

    /// Throws InputError for negative or non-finite shrinkage values.
    void validate() const;
};

/// Diagonal lag-decay matrix with lag block b = 1..(lag_count + offset) equal to b^d * I_r.
/// Loadings use offset 1 (blocks l = 0..p weighted (l+1)^d); VAR lags use offset 0.
Matrix lag_decay_matrix(int r, int lag_count, double d, int offset);

struct PriorPrecisions {
    std::vector<Matrix> Vinv;  // per variable, r(p+1) square
    std::vector<Matrix> Winv;  // per factor, rq square
};

PriorPrecisions prior_precisions(const PriorSpec& spec, const ModelOrder& order);

/// Posterior mean of the per-variable loading shrinkage under a Gamma(alpha, beta)
/// hyperprior, given the current loading row. Returns `cap` when the mean is
/// unbounded (zero loadings with beta = 0) or exceeds it.
double expected_eta_lambda(const Vector& lambda_i, const Matrix& J, double alpha, double beta,
                           const ModelOrder& order, double cap = 1e8);

/// Log prior density of theta up to an additive constant: Gaussian loading and
/// VAR terms with their log-determinant normalizers, plus the diffuse
/// -1/2 ln psi_i and -1/2 ln omega_j precision terms. Zero in ML mode.
/// With `normalizers` off the 1/2 ln det terms, which depend on the shrinkage
/// but not on theta, are left out.
double log_prior(const Theta& theta, const PriorSpec& spec, const ModelOrder& order, bool normalizers = true);

}  // namespace dfm
