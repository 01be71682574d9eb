#include "dfm/em.hpp"

#include "dfm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace dfm {

namespace {

constexpr double kJitter = 1e-10;
constexpr double kInitVarianceFloor = 1e-4;

/// Solve S x = b for symmetric S, retrying once with diagonal jitter.
Vector solve_spd(const Matrix& S, const Vector& b, const std::string& what) {
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() == Eigen::Success) {
        Vector x = llt.solve(b);
        if (x.allFinite()) return x;
    }
    const Matrix Sj = S + kJitter * Matrix::Identity(S.rows(), S.cols());
    Eigen::LDLT<Matrix> ldlt(Sj);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        Vector x = ldlt.solve(b);
        if (x.allFinite()) return x;
    }
    throw NumericError("singular system in " + what);
}

/// Precision from an expected sum of squared residuals.
double precision_update(double numerator, double ssr, double scale, const std::string& what) {
    if (!std::isfinite(ssr)) throw NumericError("non-finite residual sum in " + what);
    if (ssr <= 0.0) {
        // Roundoff around an exact fit is accepted and capped; anything larger
        // means the second moments were not PSD.
        if (ssr < -1e-8 * std::max(scale, 1.0)) {
            throw NumericError("negative expected residual sum in " + what);
        }
        return kPrecisionCap;
    }
    return std::clamp(numerator / ssr, kPrecisionFloor, kPrecisionCap);
}

/// Regress rows of `y` (k x N) on columns of `x` (d x N) with a small ridge.
Matrix least_squares(const Matrix& y, const Matrix& x) {
    const Matrix xx = x * x.transpose() + 1e-8 * Matrix::Identity(x.rows(), x.rows());
    Eigen::LDLT<Matrix> ldlt(xx);
    return ldlt.solve(x * y.transpose()).transpose();
}

/// Stack [f_t; f_{t-1}; ...; f_{t-lags}] for t = lags..cols-1 from an r x cols path.
Matrix stack_lags(const Matrix& f, int first_lag, int last_lag, int t0, int count) {
    const auto r = f.rows();
    Matrix out(r * (last_lag - first_lag + 1), count);
    for (int l = first_lag; l <= last_lag; ++l)
        out.middleRows(r * (l - first_lag), r) = f.middleCols(t0 - l, count);
    return out;
}

Theta random_theta(const ModelOrder& order, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Theta th;
    th.Lambda = Matrix(order.n, order.loading_width());
    for (Eigen::Index k = 0; k < th.Lambda.size(); ++k) th.Lambda.data()[k] = 0.1 * normal(rng);
    th.Phi = Matrix(order.r, order.var_width());
    for (Eigen::Index k = 0; k < th.Phi.size(); ++k) th.Phi.data()[k] = 0.1 * normal(rng);
    th.psi = Vector::Ones(order.n);
    th.omega = Vector::Ones(order.r);
    return th;
}

}  // namespace

EStepSums assemble_sums(const SmoothedMoments& sm, const Panel& panel, const ModelOrder& order) {
    const int T = panel.T();
    const int n = order.n;
    const int r = order.r;
    const int L = order.loading_width();
    const int K = order.var_width();
    if (sm.T() != T) throw StructuralError("smoothed moments and panel lengths differ");

    EStepSums s;
    s.T = T;
    s.Ti = panel.counts();
    s.SFF_phi = Matrix::Zero(K, K);
    s.SfF_phi = Matrix::Zero(r, K);
    s.Sff = Vector::Zero(r);
    s.SFF_lam.assign(n, Matrix::Zero(L, L));
    s.SFy = Matrix::Zero(n, L);
    s.Syy = Vector::Zero(n);

    Matrix prev = sm.second_moment(0);
    for (int t = 1; t <= T; ++t) {
        const Matrix cur = sm.second_moment(t);
        s.SFF_phi += prev.topLeftCorner(K, K);
        s.SfF_phi += sm.lag1_second_moment(t).topLeftCorner(r, K);
        s.Sff += cur.topLeftCorner(r, r).diagonal();
        const auto FF = cur.topLeftCorner(L, L);
        const auto Ef = sm.mean[t].head(L);
        for (int i = 0; i < n; ++i) {
            if (!panel.available(i, t - 1)) continue;
            const double y = panel(i, t - 1);
            s.SFF_lam[i] += FF;
            s.SFy.row(i) += y * Ef.transpose();
            s.Syy(i) += y * y;
        }
        prev = cur;
    }
    return s;
}

EStepResult e_step(const Theta& theta_k, const Panel& panel, const ModelOrder& order, double sigma0) {
    const StateSpace ss = build_state_space(theta_k, order, sigma0);
    const FilterOutput fo = run_filter(ss, panel);
    EStepResult out;
    out.smoothed = run_smoother(ss, fo);
    out.sums = assemble_sums(out.smoothed, panel, order);
    out.loglik = fo.loglik;
    return out;
}

Matrix m_step_phi(const EStepSums& sums, const Vector& omega_k, const std::vector<Matrix>& Winv) {
    const auto r = sums.SfF_phi.rows();
    if (omega_k.size() != r || static_cast<Eigen::Index>(Winv.size()) != r) {
        throw StructuralError("m_step_phi: omega/Winv sizes do not match factor count");
    }
    Matrix Phi(r, sums.SfF_phi.cols());
    for (Eigen::Index j = 0; j < r; ++j) {
        const Matrix S = sums.SFF_phi + Winv[j] / omega_k(j);
        Phi.row(j) = solve_spd(S, sums.SfF_phi.row(j).transpose(), "Phi update, factor " + std::to_string(j))
                         .transpose();
    }
    return Phi;
}

Matrix m_step_lambda(const EStepSums& sums, const Vector& psi_k, const std::vector<Matrix>& Vinv) {
    const auto n = sums.SFy.rows();
    if (psi_k.size() != n || static_cast<Eigen::Index>(Vinv.size()) != n) {
        throw StructuralError("m_step_lambda: psi/Vinv sizes do not match variable count");
    }
    Matrix Lambda(n, sums.SFy.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Matrix S = sums.SFF_lam[i] + Vinv[i] / psi_k(i);
        Lambda.row(i) =
            solve_spd(S, sums.SFy.row(i).transpose(), "Lambda update, variable " + std::to_string(i)).transpose();
    }
    return Lambda;
}

Vector m_step_omega(const EStepSums& sums, const Matrix& Phi_next, EstimatorMode mode) {
    const auto r = Phi_next.rows();
    const double numerator = mode == EstimatorMode::ML ? sums.T : sums.T - 1.0;
    if (sums.T < 2) throw NumericError("Omega update needs T >= 2");
    Vector omega(r);
    for (Eigen::Index j = 0; j < r; ++j) {
        const Vector phi = Phi_next.row(j).transpose();
        const double ssr =
            sums.Sff(j) - 2.0 * sums.SfF_phi.row(j).dot(phi) + phi.dot(sums.SFF_phi * phi);
        omega(j) = precision_update(numerator, ssr, sums.Sff(j), "Omega update, factor " + std::to_string(j));
    }
    return omega;
}

Vector m_step_psi(const EStepSums& sums, const Matrix& Lambda_next, EstimatorMode mode) {
    const auto n = Lambda_next.rows();
    Vector psi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int Ti = sums.Ti(i);
        if (Ti < 2) throw NumericError("Psi update needs T_i >= 2 (variable " + std::to_string(i) + ")");
        const double numerator = mode == EstimatorMode::ML ? Ti : Ti - 1.0;
        const Vector lam = Lambda_next.row(i).transpose();
        const double ssr = sums.Syy(i) - 2.0 * lam.dot(sums.SFy.row(i).transpose()) + lam.dot(sums.SFF_lam[i] * lam);
        psi(i) = precision_update(numerator, ssr, sums.Syy(i), "Psi update, variable " + std::to_string(i));
    }
    return psi;
}

Theta m_step(const Theta& theta_k, const EStepSums& sums, const PriorSpec& prior, const ModelOrder& order) {
    const PriorPrecisions pp = prior_precisions(prior, order);
    Theta next;
    next.Phi = m_step_phi(sums, theta_k.omega, pp.Winv);
    next.omega = m_step_omega(sums, next.Phi, prior.mode);
    next.Lambda = m_step_lambda(sums, theta_k.psi, pp.Vinv);
    next.psi = m_step_psi(sums, next.Lambda, prior.mode);
    return next;
}

double log_posterior(const Theta& theta, const Panel& panel, const PriorSpec& spec, const ModelOrder& order) {
    const StateSpace ss = build_state_space(theta, order, spec.sigma0);
    return run_filter(ss, panel).loglik + log_prior(theta, spec, order);
}

InitResult initialize(const Panel& panel, const ModelOrder& order, const InitStrategy& strategy) {
    order.validate();
    if (panel.n() != order.n) throw StructuralError("initialize: panel and order disagree on n");
    InitResult out;
    if (strategy.kind == InitStrategy::Kind::Random) {
        out.theta = random_theta(order, strategy.seed);
        return out;
    }

    const int n = order.n;
    const int r = order.r;
    const int T = panel.T();
    const int p = order.p;
    const int q = order.q;
    const Matrix& Y = panel.values();  // missing cells already hold 0

    Eigen::SelfAdjointEigenSolver<Matrix> eig(Y * Y.transpose() / T);
    const Vector& ev = eig.eigenvalues();  // ascending
    const double trace = ev.sum();
    const bool degenerate = eig.info() != Eigen::Success || r > n || !(trace > 0.0) ||
                            !(ev(n - r) > 1e-12 * trace) || T <= std::max(p, q) + 1;
    if (degenerate) {
        out.theta = random_theta(order, 0);
        out.fell_back = true;
        return out;
    }
    const Matrix U = eig.eigenvectors().rightCols(r).rowwise().reverse();
    const Matrix F = U.transpose() * Y;  // r x T

    Theta th;
    th.Lambda = Matrix::Zero(n, order.loading_width());
    th.psi = Vector::Ones(n);
    const int count = T - p;
    const Matrix X = stack_lags(F, 0, p, p, count);
    for (int i = 0; i < n; ++i) {
        std::vector<int> cols;
        for (int k = 0; k < count; ++k)
            if (panel.available(i, p + k)) cols.push_back(k);
        Matrix Xi(X.rows(), static_cast<Eigen::Index>(cols.size()));
        Matrix yi(1, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            Xi.col(static_cast<Eigen::Index>(c)) = X.col(cols[c]);
            yi(0, static_cast<Eigen::Index>(c)) = Y(i, p + cols[c]);
        }
        const Matrix coef = least_squares(yi, Xi);
        th.Lambda.row(i) = coef;
        double var = kInitVarianceFloor;
        if (cols.size() > 1) {
            const Matrix resid = yi - coef * Xi;
            var = std::max(resid.squaredNorm() / static_cast<double>(cols.size()), kInitVarianceFloor);
        }
        th.psi(i) = 1.0 / var;
    }

    const int vcount = T - q;
    const Matrix Xv = stack_lags(F, 1, q, q, vcount);
    const Matrix Fv = F.rightCols(vcount);
    th.Phi = least_squares(Fv, Xv);
    const Matrix resid = Fv - th.Phi * Xv;
    th.omega = Vector(r);
    for (int j = 0; j < r; ++j)
        th.omega(j) = 1.0 / std::max(resid.row(j).squaredNorm() / vcount, kInitVarianceFloor);

    if (!th.Lambda.allFinite() || !th.Phi.allFinite()) {
        out.theta = random_theta(order, 0);
        out.fell_back = true;
        return out;
    }
    out.theta = std::move(th);
    return out;
}

double relative_change(double current, double previous) {
    const double denom = 0.5 * (std::abs(current) + std::abs(previous));
    const double diff = std::abs(current - previous);
    if (denom == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / denom;
}

namespace {

template <class F>
auto tagged(int iteration, const char* block, F&& f) {
    try {
        return f();
    } catch (const NumericError& e) {
        throw NumericError("iteration " + std::to_string(iteration) + ", " + block + ": " + e.what());
    }
}

}  // namespace

FitResult fit(const Panel& panel, const ModelOrder& order_in, const PriorSpec& spec, const FitOptions& opts) {
    ModelOrder order = order_in;
    order.n = panel.n();
    order.validate();
    const PriorSpec base = spec.resolved(order.n);
    base.validate();
    if (opts.max_iter < 0) throw InputError("max_iter must be >= 0");
    for (int i = 0; i < order.n; ++i) {
        if (panel.count(i) < 2) {
            throw InputError("variable " + std::to_string(i) + " has fewer than 2 available observations");
        }
    }

    FitResult res;
    Theta theta;
    if (opts.start) {
        theta = *opts.start;
    } else {
        InitResult init = initialize(panel, order, opts.init);
        theta = std::move(init.theta);
        res.init_fell_back = init.fell_back;
    }
    theta.validate(order);

    PriorSpec prior = base;
    const Matrix JL = lag_decay_matrix(order.r, order.p, prior.d_lambda, 1);

    EStepResult es;
    double prev_lp = 0.0;
    for (int k = 0;; ++k) {
        es = tagged(k, "E-step", [&] { return e_step(theta, panel, order, prior.sigma0); });
        if (prior.adaptive) {
            for (int i = 0; i < order.n; ++i) {
                prior.eta_lambda(i) = expected_eta_lambda(theta.Lambda.row(i).transpose(), JL, prior.alpha_lambda,
                                                          prior.beta_lambda, order, prior.eta_cap);
            }
            res.eta_lambda_path.push_back(prior.eta_lambda);
        }
        const double lp = es.loglik + log_prior(theta, prior, order, false);
        if (!std::isfinite(lp)) throw NumericError("iteration " + std::to_string(k) + ": non-finite log posterior");
        res.logpost_path.push_back(lp);
        if (k > 0) {
            const double rel = relative_change(lp, prev_lp);
            res.rel_change_path.push_back(rel);
            if (rel < opts.tol) {
                res.converged = true;
                break;
            }
        }
        if (res.iterations >= opts.max_iter) break;

        Theta next;
        const PriorPrecisions pp = prior_precisions(prior, order);
        next.Phi = tagged(k, "Phi", [&] { return m_step_phi(es.sums, theta.omega, pp.Winv); });
        next.omega = tagged(k, "Omega", [&] { return m_step_omega(es.sums, next.Phi, prior.mode); });
        next.Lambda = tagged(k, "Lambda", [&] { return m_step_lambda(es.sums, theta.psi, pp.Vinv); });
        next.psi = tagged(k, "Psi", [&] { return m_step_psi(es.sums, next.Lambda, prior.mode); });
        theta = std::move(next);
        ++res.iterations;
        prev_lp = lp;
    }

    const int s = order.s();
    const int r = order.r;
    const int T = panel.T();
    res.presample = s;
    res.factors = Matrix(r, T + s);
    for (int k = 0; k < T + s; ++k) {
        const int tau = k + 1 - s;
        res.factors.col(k) = tau <= 0 ? es.smoothed.mean[0].segment(-tau * r, r) : es.smoothed.mean[tau].head(r);
    }
    res.common = panel.restore(common_component(theta, res.factors, s));
    res.theta_hat = std::move(theta);
    res.loglik = es.loglik;
    res.eta_lambda = prior.eta_lambda;
    return res;
}

}  // namespace dfm
