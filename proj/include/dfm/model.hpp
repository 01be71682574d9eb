#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace dfm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Model dimensions. `p` loading lags, `q` VAR lags; the state stacks s+1 factor vectors.
struct ModelOrder {
    int n = 1;
    int r = 1;
    int p = 0;
    int q = 1;

    int s() const { return p > q - 1 ? p : q - 1; }
    int state_dim() const { return r * (s() + 1); }
    int loading_width() const { return r * (p + 1); }
    int var_width() const { return r * q; }

    /// Throws StructuralError unless n, r, q >= 1 and p >= 0.
    void validate() const;

    friend bool operator==(const ModelOrder&, const ModelOrder&) = default;
};

/// n x T panel with an availability mask. Missing cells hold 0 in `values`
/// and never contribute to any sum.
class Panel {
public:
    Panel() = default;
    Panel(Matrix values, Mask mask, Vector center, Vector scale);

    /// NaN cells become missing; center 0, scale 1.
    static Panel from_raw(const Matrix& raw);

    int n() const { return static_cast<int>(values_.rows()); }
    int T() const { return static_cast<int>(values_.cols()); }

    const Matrix& values() const { return values_; }
    const Mask& mask() const { return mask_; }
    const Vector& center() const { return center_; }
    const Vector& scale() const { return scale_; }

    bool available(int i, int t) const { return mask_(i, t); }
    double operator()(int i, int t) const { return values_(i, t); }

    /// T_i, the number of available observations of variable i.
    int count(int i) const;
    Eigen::VectorXi counts() const;
    std::size_t missing_cells() const;

    /// Values with NaN in missing cells.
    Matrix with_nan() const;

    /// Map a matrix in panel units back to original units (x * scale + center, row-wise).
    Matrix restore(const Matrix& standardized) const;

    /// Keep the same values but replace the mask. Cells newly masked are zeroed.
    Panel with_mask(const Mask& mask) const;

private:
    Matrix values_;
    Mask mask_;
    Vector center_;
    Vector scale_;
};

/// Demean and scale every variable to unit sample standard deviation over its
/// available cells. Throws InputError naming the variable if it has fewer than
/// two observations or zero variance.
Panel standardize(const Panel& raw);
Panel standardize(const Matrix& raw_with_nan);

/// Model parameters. psi and omega are precisions (inverse variances).
struct Theta {
    Matrix Lambda;  // n x r(p+1), [Lambda_0 ... Lambda_p]
    Matrix Phi;     // r x rq, [Phi_1 ... Phi_q]
    Vector psi;     // n
    Vector omega;   // r

    /// Throws StructuralError on shape mismatch, InputError on nonpositive precisions.
    void validate(const ModelOrder& order) const;
};

/// Linear Gaussian state space form of the model:
///   y_t = Z x_t + e_t,            e_t ~ N(0, H)
///   x_t = Tmat x_{t-1} + R u_t,   u_t ~ N(0, Q)
///   x_0 ~ N(0, P0)
/// with x_t = [f_t', f_{t-1}', ..., f_{t-s}']'. H, Q and P0 are diagonal and
/// stored as their diagonals.
struct StateSpace {
    Matrix Z;
    Matrix Tmat;
    Matrix R;
    Vector q_diag;
    Vector h_diag;
    Vector p0_diag;

    int n() const { return static_cast<int>(Z.rows()); }
    int state_dim() const { return static_cast<int>(Tmat.rows()); }
    int r() const { return static_cast<int>(R.cols()); }

    Matrix Q() const { return q_diag.asDiagonal(); }
    Matrix H() const { return h_diag.asDiagonal(); }
    Matrix P0() const { return p0_diag.asDiagonal(); }
};

StateSpace build_state_space(const Theta& theta, const ModelOrder& order, double sigma0);

/// Evaluate Lambda_0 f_t + ... + Lambda_p f_{t-p} for t = 1..T.
/// `factor_path` is r x (presample + T) with column k holding f_{k+1-presample};
/// presample must be at least p.
Matrix common_component(const Theta& theta, const Matrix& factor_path, int presample);

}  // namespace dfm
