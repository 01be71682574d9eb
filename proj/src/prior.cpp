#include "dfm/prior.hpp"

#include "dfm/errors.hpp"

#include <cmath>

namespace dfm {

std::string to_string(EstimatorMode mode) {
    return mode == EstimatorMode::ML ? "ML" : "MAP";
}

EstimatorMode parse_mode(const std::string& text) {
    if (text == "MAP" || text == "map") return EstimatorMode::MAP;
    if (text == "ML" || text == "ml") return EstimatorMode::ML;
    throw InputError("unknown estimator mode '" + text + "' (expected MAP or ML)");
}

PriorSpec PriorSpec::ml() {
    PriorSpec spec;
    spec.mode = EstimatorMode::ML;
    spec.eta_phi = 0.0;
    spec.adaptive = false;
    return spec;
}

PriorSpec PriorSpec::resolved(int n) const {
    PriorSpec out = *this;
    if (out.eta_lambda.size() == 0) {
        out.eta_lambda = Vector::Zero(n);
    } else if (out.eta_lambda.size() == 1 && n != 1) {
        out.eta_lambda = Vector::Constant(n, out.eta_lambda(0));
    } else if (out.eta_lambda.size() != n) {
        throw StructuralError("eta_lambda has length " + std::to_string(out.eta_lambda.size()) + ", expected " +
                              std::to_string(n));
    }
    if (out.mode == EstimatorMode::ML) {
        out.eta_phi = 0.0;
        out.eta_lambda.setZero();
        out.adaptive = false;
    }
    return out;
}

void PriorSpec::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(std::string(name) + " must be finite and >= 0");
    };
    check(eta_phi, "eta_phi");
    check(d_lambda, "d_lambda");
    check(d_phi, "d_phi");
    check(alpha_lambda, "alpha_lambda");
    check(beta_lambda, "beta_lambda");
    check(eta_cap, "eta_cap");
    for (Eigen::Index i = 0; i < eta_lambda.size(); ++i) check(eta_lambda(i), "eta_lambda");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw InputError("sigma0 must be finite and > 0");
}

Matrix lag_decay_matrix(int r, int lag_count, double d, int offset) {
    if (!(d >= 0.0)) throw InputError("lag-decay exponent must be >= 0");
    if (r < 1) throw StructuralError("lag_decay_matrix: r must be >= 1");
    if (offset != 0 && offset != 1) throw StructuralError("lag_decay_matrix: offset must be 0 or 1");
    const int blocks = lag_count + offset;
    if (blocks < 1) throw StructuralError("lag_decay_matrix: no lag blocks");
    Vector diag(r * blocks);
    for (int b = 0; b < blocks; ++b) diag.segment(b * r, r).setConstant(std::pow(b + 1.0, d));
    return diag.asDiagonal();
}

PriorPrecisions prior_precisions(const PriorSpec& spec, const ModelOrder& order) {
    const PriorSpec rs = spec.resolved(order.n);
    rs.validate();
    const Matrix JL = lag_decay_matrix(order.r, order.p, rs.d_lambda, 1);
    const Matrix JP = lag_decay_matrix(order.r, order.q, rs.d_phi, 0);
    PriorPrecisions out;
    out.Vinv.reserve(order.n);
    out.Winv.reserve(order.r);
    for (int i = 0; i < order.n; ++i) out.Vinv.push_back(rs.eta_lambda(i) * JL);
    for (int j = 0; j < order.r; ++j) out.Winv.push_back(rs.eta_phi * JP);
    return out;
}

double expected_eta_lambda(const Vector& lambda_i, const Matrix& J, double alpha, double beta,
                           const ModelOrder& order, double cap) {
    if (lambda_i.size() != J.rows() || J.rows() != J.cols() || lambda_i.size() != order.loading_width()) {
        throw StructuralError("expected_eta_lambda: loading row and lag-decay matrix shapes disagree");
    }
    const double shape = 0.5 * order.loading_width() + alpha;
    const double rate = 0.5 * lambda_i.dot(J * lambda_i) + beta;
    if (!(rate > 0.0)) return cap;
    const double mean = shape / rate;
    return std::isfinite(mean) && mean < cap ? mean : cap;
}

double log_prior(const Theta& theta, const PriorSpec& spec, const ModelOrder& order, bool normalizers) {
    if (spec.mode == EstimatorMode::ML) return 0.0;
    const PriorPrecisions pp = prior_precisions(spec, order);
    double lp = 0.0;
    for (int i = 0; i < order.n; ++i) {
        const Vector lam = theta.Lambda.row(i).transpose();
        const Vector d = pp.Vinv[i].diagonal();
        lp -= 0.5 * lam.dot(d.asDiagonal() * lam);
        if (normalizers && (d.array() > 0.0).all()) lp += 0.5 * d.array().log().sum();
        lp -= 0.5 * std::log(theta.psi(i));
    }
    for (int j = 0; j < order.r; ++j) {
        const Vector phi = theta.Phi.row(j).transpose();
        const Vector d = pp.Winv[j].diagonal();
        lp -= 0.5 * phi.dot(d.asDiagonal() * phi);
        if (normalizers && (d.array() > 0.0).all()) lp += 0.5 * d.array().log().sum();
        lp -= 0.5 * std::log(theta.omega(j));
    }
    return lp;
}

}  // namespace dfm
