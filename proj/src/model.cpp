#include "dfm/model.hpp"

#include "dfm/errors.hpp"

#include <cmath>
#include <string>

namespace dfm {

void ModelOrder::validate() const {
    if (n < 1 || r < 1 || p < 0 || q < 1) {
        throw StructuralError("invalid model order: n=" + std::to_string(n) + " r=" + std::to_string(r) +
                              " p=" + std::to_string(p) + " q=" + std::to_string(q));
    }
}

Panel::Panel(Matrix values, Mask mask, Vector center, Vector scale)
    : values_(std::move(values)), mask_(std::move(mask)), center_(std::move(center)), scale_(std::move(scale)) {
    if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols()) {
        throw StructuralError("panel mask shape does not match values");
    }
    if (center_.size() != values_.rows() || scale_.size() != values_.rows()) {
        throw StructuralError("panel center/scale length does not match variable count");
    }
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        for (Eigen::Index t = 0; t < values_.cols(); ++t) {
            if (!mask_(i, t)) {
                values_(i, t) = 0.0;
            } else if (!std::isfinite(values_(i, t))) {
                throw InputError("non-finite value in available cell (variable " + std::to_string(i) + ", time " +
                                 std::to_string(t) + ")");
            }
        }
    }
}

Panel Panel::from_raw(const Matrix& raw) {
    Mask mask = raw.array().isFinite();
    return Panel(raw, mask, Vector::Zero(raw.rows()), Vector::Ones(raw.rows()));
}

int Panel::count(int i) const {
    return static_cast<int>(mask_.row(i).count());
}

Eigen::VectorXi Panel::counts() const {
    Eigen::VectorXi c(n());
    for (int i = 0; i < n(); ++i) c(i) = count(i);
    return c;
}

std::size_t Panel::missing_cells() const {
    return static_cast<std::size_t>(mask_.size() - mask_.count());
}

Matrix Panel::with_nan() const {
    Matrix out = values_;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index t = 0; t < out.cols(); ++t)
            if (!mask_(i, t)) out(i, t) = std::nan("");
    return out;
}

Matrix Panel::restore(const Matrix& standardized) const {
    if (standardized.rows() != values_.rows()) {
        throw StructuralError("restore: row count does not match panel");
    }
    Matrix out = (scale_.asDiagonal() * standardized).colwise() + center_;
    return out;
}

Panel Panel::with_mask(const Mask& mask) const {
    return Panel(values_, mask, center_, scale_);
}

Panel standardize(const Panel& raw) {
    const int n = raw.n();
    const int T = raw.T();
    Vector center(n);
    Vector scale(n);
    Matrix values = raw.values();
    for (int i = 0; i < n; ++i) {
        const int Ti = raw.count(i);
        if (Ti < 2) {
            throw InputError("variable " + std::to_string(i) + " has " + std::to_string(Ti) +
                             " available observations; at least 2 are required");
        }
        double sum = 0.0;
        for (int t = 0; t < T; ++t)
            if (raw.available(i, t)) sum += raw(i, t);
        const double mean = sum / Ti;
        double ss = 0.0;
        for (int t = 0; t < T; ++t)
            if (raw.available(i, t)) ss += (raw(i, t) - mean) * (raw(i, t) - mean);
        const double sd = std::sqrt(ss / (Ti - 1));
        if (!(sd > 0.0) || !std::isfinite(sd)) {
            throw InputError("variable " + std::to_string(i) + " has zero sample variance");
        }
        for (int t = 0; t < T; ++t)
            if (raw.available(i, t)) values(i, t) = (raw(i, t) - mean) / sd;
        // Compose with any scaling already carried by the input panel.
        center(i) = raw.center()(i) + raw.scale()(i) * mean;
        scale(i) = raw.scale()(i) * sd;
    }
    return Panel(std::move(values), raw.mask(), std::move(center), std::move(scale));
}

Panel standardize(const Matrix& raw_with_nan) {
    return standardize(Panel::from_raw(raw_with_nan));
}

void Theta::validate(const ModelOrder& order) const {
    order.validate();
    if (Lambda.rows() != order.n || Lambda.cols() != order.loading_width()) {
        throw StructuralError("Lambda is " + std::to_string(Lambda.rows()) + "x" + std::to_string(Lambda.cols()) +
                              ", expected " + std::to_string(order.n) + "x" + std::to_string(order.loading_width()));
    }
    if (Phi.rows() != order.r || Phi.cols() != order.var_width()) {
        throw StructuralError("Phi is " + std::to_string(Phi.rows()) + "x" + std::to_string(Phi.cols()) +
                              ", expected " + std::to_string(order.r) + "x" + std::to_string(order.var_width()));
    }
    if (psi.size() != order.n) throw StructuralError("psi length does not match n");
    if (omega.size() != order.r) throw StructuralError("omega length does not match r");
    if (!(psi.array() > 0.0).all() || !psi.allFinite()) throw InputError("psi must be finite and positive");
    if (!(omega.array() > 0.0).all() || !omega.allFinite()) throw InputError("omega must be finite and positive");
}

StateSpace build_state_space(const Theta& theta, const ModelOrder& order, double sigma0) {
    theta.validate(order);
    if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) {
        throw InputError("initial state variance must be finite and nonnegative");
    }
    const int r = order.r;
    const int s = order.s();
    const int m = order.state_dim();

    StateSpace ss;
    ss.Z = Matrix::Zero(order.n, m);
    ss.Z.leftCols(order.loading_width()) = theta.Lambda;

    ss.Tmat = Matrix::Zero(m, m);
    ss.Tmat.topLeftCorner(r, order.var_width()) = theta.Phi;
    if (s > 0) ss.Tmat.bottomLeftCorner(r * s, r * s).setIdentity();

    ss.R = Matrix::Zero(m, r);
    ss.R.topRows(r).setIdentity();

    ss.q_diag = theta.omega.cwiseInverse();
    ss.h_diag = theta.psi.cwiseInverse();
    ss.p0_diag = Vector::Constant(m, sigma0);
    return ss;
}

Matrix common_component(const Theta& theta, const Matrix& factor_path, int presample) {
    const auto r = factor_path.rows();
    if (r == 0 || theta.Lambda.cols() % r != 0) {
        throw StructuralError("factor path rows do not divide the loading width");
    }
    const int p = static_cast<int>(theta.Lambda.cols() / r) - 1;
    if (presample < p || presample > factor_path.cols()) {
        throw StructuralError("factor path needs at least " + std::to_string(p) + " pre-sample columns");
    }
    const auto T = factor_path.cols() - presample;
    Matrix out = Matrix::Zero(theta.Lambda.rows(), T);
    for (int lag = 0; lag <= p; ++lag) {
        out.noalias() += theta.Lambda.middleCols(lag * r, r) * factor_path.middleCols(presample - lag, T);
    }
    return out;
}

}  // namespace dfm
