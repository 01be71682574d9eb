#pragma once

#include "dfm/em.hpp"
#include "dfm/model.hpp"
#include "dfm/prior.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dfm {

/// Simulation design:
///   y_t = Lambda_0 f_t + ... + Lambda_p f_{t-p} + e_t,  e_t ~ N(0, Sigma)
///   f_t = diag(alpha) f_{t-1} + u_t,                    u_t ~ N(0, I_r)
/// with (Lambda_l)_{ij} ~ N(0,1), alpha_j ~ U(alpha_lo, alpha_hi),
/// beta_i ~ U(beta_lo, beta_hi) and Sigma_im = delta^|i-m| sqrt(gamma_i gamma_m).
struct DgpConfig {
    int n = 10;
    int T = 50;
    int r = 1;
    int p = 0;
    double delta = 0.0;
    double alpha_lo = -0.95;
    double alpha_hi = 0.95;
    double beta_lo = 0.1;
    double beta_hi = 0.9;
    int burn_in = 200;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SimulatedData {
    Matrix panel;    // n x T, complete
    Matrix common;   // n x T
    Matrix noise;    // n x T
    Matrix factors;  // r x (T+p); column k is f_{k+1-p}
    Matrix Lambda;   // n x r(p+1)
    Vector alpha;    // r
    Vector beta;     // n
    Vector gamma;    // n
    Matrix Sigma;    // n x n
};

SimulatedData simulate_dgp(const DgpConfig& cfg);

/// gamma_i = beta_i / (1 - beta_i) * sum_l sum_j (Lambda_l)_{ij}^2 / (1 - alpha_j^2)
Vector idiosyncratic_scales(const Matrix& Lambda, const Vector& alpha, const Vector& beta);

struct MissingPattern {
    enum class Kind { Uniform, RaggedEdge };
    Kind kind = Kind::Uniform;
    int max_delay = 0;

    static MissingPattern uniform() { return {Kind::Uniform, 0}; }
    static MissingPattern ragged_edge(int max_delay) { return {Kind::RaggedEdge, max_delay}; }
};

/// Mask cells of the simulated panel. Uniform masks each cell independently
/// with probability `fraction`; ragged edge drops a trailing run of
/// U{0..max_delay} cells per variable. Masks leaving a variable with fewer
/// than two observations are redrawn; InputError once the retry budget is spent.
/// The returned panel is in original units (center 0, scale 1).
Panel apply_missing(const SimulatedData& data, double fraction, const MissingPattern& pattern, std::uint64_t seed);

/// Per-variable sample variances (denominator T-1).
Vector sample_variances(const Matrix& panel);

/// sum_i sum_t (chi - chi_hat)^2 / s_i^2 for one data set.
double normalized_sse(const Matrix& true_common, const Matrix& est_common, const Vector& sample_vars);

/// sqrt( 1/(D n T) sum_d sum_i sum_t (chi - chi_hat)^2 / s_i^2 ).
double rmse(const std::vector<Matrix>& true_common, const std::vector<Matrix>& est_common,
            const std::vector<Vector>& sample_vars);

enum class StudyEstimator { MAP, MAPNoLagDecay, ML };

std::string to_string(StudyEstimator e);
StudyEstimator parse_study_estimator(const std::string& text);

struct GridPoint {
    int n = 10;
    int T = 50;
    int r = 1;
    int p = 0;
    double delta = 0.0;
    int r_hat = 1;
    int p_hat = 0;
};

struct StudyConfig {
    std::vector<GridPoint> grid;
    std::vector<double> missing_fractions{0.0, 0.2, 0.4};
    std::vector<StudyEstimator> estimators{StudyEstimator::MAP, StudyEstimator::ML};
    int replications = 200;
    std::uint64_t seed = 1;
    int threads = 1;
    MissingPattern pattern = MissingPattern::uniform();
    /// Base prior for the MAP variants; MAP-no-lag-decay overrides d_lambda with 0.
    PriorSpec map_prior;
    int max_iter = 500;
    double tol = 1e-4;

    void validate() const;
};

/// The prior a study estimator fits with.
PriorSpec study_prior(const StudyConfig& cfg, StudyEstimator e);

struct ReplicationKey {
    int grid = 0;
    int fraction = 0;
    StudyEstimator estimator = StudyEstimator::MAP;
    int replication = 0;

    auto operator<=>(const ReplicationKey&) const = default;
};

struct ReplicationRecord {
    ReplicationKey key;
    bool ok = false;
    bool converged = false;
    int iterations = 0;
    double sse = 0.0;   // normalized squared error summed over cells
    long cells = 0;     // n * T
};

/// Fit one replication. Failures are returned as records with ok = false.
ReplicationRecord run_replication(const StudyConfig& cfg, const ReplicationKey& key);

struct CellSummary {
    int grid = 0;
    int fraction = 0;
    StudyEstimator estimator = StudyEstimator::MAP;
    int replications = 0;
    int ok = 0;
    int failed = 0;
    int nonconverged = 0;
    double rmse = 0.0;
    std::optional<double> ratio_to_ml;
    std::optional<double> ratio_to_map_no_lag_decay;
    bool unreliable = false;
};

struct StudyResult {
    std::vector<ReplicationRecord> records;  // sorted by key
    std::vector<CellSummary> cells;          // grid, fraction, estimator order
};

/// Run every (grid point, fraction, estimator, replication) job not already in
/// `done`. Replication d uses seed (cfg.seed + d) for both the DGP and the mask,
/// so every estimator sees the same panel. `on_record` is called (serialized)
/// as each new job completes. Output is independent of cfg.threads.
StudyResult run_study(const StudyConfig& cfg, const std::vector<ReplicationRecord>& done = {},
                      const std::function<void(const ReplicationRecord&)>& on_record = {});

/// Aggregate records into per-cell summaries.
std::vector<CellSummary> summarize(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records);

/// Text table with MAP RMSE, MAP/ML and MAP/MAP-no-lag-decay columns per fraction.
std::string format_study_table(const StudyConfig& cfg, const std::vector<CellSummary>& cells);

}  // namespace dfm
