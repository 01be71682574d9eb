#include "dfm/errors.hpp"
#include "dfm/prior.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dfm;

namespace {

Matrix diag(std::initializer_list<double> d) {
    Vector v(static_cast<Eigen::Index>(d.size()));
    Eigen::Index k = 0;
    for (double x : d) v(k++) = x;
    return v.asDiagonal();
}

}  // namespace

TEST_CASE("lag_decay_matrix examples") {
    CHECK(lag_decay_matrix(1, 1, 2.0, 1) == diag({1, 4}));
    CHECK(lag_decay_matrix(2, 0, 2.0, 1) == Matrix(Matrix::Identity(2, 2)));
    CHECK(lag_decay_matrix(1, 3, 2.0, 0) == diag({1, 4, 9}));
    CHECK(lag_decay_matrix(2, 2, 1.0, 0) == diag({1, 1, 2, 2}));
    CHECK_THROWS_AS(lag_decay_matrix(1, 1, -1.0, 1), InputError);
}

TEST_CASE("lag_decay_matrix with zero exponent is the identity") {
    for (int r = 1; r <= 3; ++r)
        for (int lags = 0; lags <= 4; ++lags) {
            const Matrix J = lag_decay_matrix(r, lags, 0.0, 1);
            CHECK(J.isIdentity(0.0));
            CHECK(J.rows() == r * (lags + 1));
        }
}

TEST_CASE("prior_precisions examples") {
    PriorSpec spec;
    spec.eta_lambda = Vector::Constant(1, 2.0);
    spec.eta_phi = 0.01;
    const PriorPrecisions pp = prior_precisions(spec.resolved(1), ModelOrder{1, 1, 1, 1});
    REQUIRE(pp.Vinv.size() == 1);
    CHECK(pp.Vinv[0] == diag({2, 8}));
    REQUIRE(pp.Winv.size() == 1);
    CHECK(pp.Winv[0](0, 0) == doctest::Approx(0.01).epsilon(1e-15));

    const PriorPrecisions ml = prior_precisions(PriorSpec::ml().resolved(3), ModelOrder{3, 2, 1, 2});
    for (const Matrix& V : ml.Vinv) CHECK(V.isZero(0.0));
    for (const Matrix& W : ml.Winv) CHECK(W.isZero(0.0));
}

TEST_CASE("prior_precisions are diagonal and PSD") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int rep = 0; rep < 20; ++rep) {
        const ModelOrder o{3, 1 + rep % 3, rep % 3, 1 + rep % 2};
        PriorSpec spec;
        spec.eta_lambda = Vector(3);
        for (int i = 0; i < 3; ++i) spec.eta_lambda(i) = u(rng);
        spec.eta_phi = u(rng);
        spec.d_lambda = u(rng);
        spec.d_phi = u(rng);
        const PriorPrecisions pp = prior_precisions(spec.resolved(3), o);
        for (const Matrix& V : pp.Vinv) {
            CHECK(V.rows() == o.loading_width());
            CHECK(Matrix(V.diagonal().asDiagonal()) == V);
            CHECK(V.diagonal().minCoeff() >= 0.0);
        }
        for (const Matrix& W : pp.Winv) {
            CHECK(W.rows() == o.var_width());
            CHECK(Matrix(W.diagonal().asDiagonal()) == W);
            CHECK(W.diagonal().minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("ML resolution zeroes all shrinkage") {
    PriorSpec spec;
    spec.mode = EstimatorMode::ML;
    spec.eta_phi = 3.0;
    spec.eta_lambda = Vector::Constant(2, 4.0);
    const PriorSpec r = spec.resolved(2);
    CHECK(r.eta_phi == 0.0);
    CHECK(r.eta_lambda.isZero(0.0));
    CHECK_FALSE(r.adaptive);
}

TEST_CASE("prior spec validation") {
    PriorSpec spec;
    spec.eta_phi = -1.0;
    CHECK_THROWS_AS(spec.validate(), InputError);
    spec = PriorSpec{};
    spec.alpha_lambda = std::nan("");
    CHECK_THROWS_AS(spec.validate(), InputError);
    spec = PriorSpec{};
    spec.eta_lambda = Vector::Constant(3, 1.0);
    CHECK_THROWS_AS(spec.resolved(2), StructuralError);
    CHECK(parse_mode("ml") == EstimatorMode::ML);
    CHECK(parse_mode("MAP") == EstimatorMode::MAP);
    CHECK_THROWS_AS(parse_mode("bayes"), InputError);
}

TEST_CASE("expected_eta_lambda examples") {
    CHECK(expected_eta_lambda(Vector::Constant(1, 2.0), diag({1}), 0, 0, ModelOrder{1, 1, 0, 1}) == 0.25);
    CHECK(expected_eta_lambda(Vector::Zero(1), diag({1}), 1, 1, ModelOrder{1, 1, 0, 1}) == 1.5);
    CHECK(expected_eta_lambda(Vector::Ones(4), diag({1, 1, 4, 4}), 0, 0, ModelOrder{1, 2, 1, 1}) ==
          doctest::Approx(0.4).epsilon(1e-15));
    CHECK(expected_eta_lambda(Vector::Zero(2), diag({1, 4}), 0, 0, ModelOrder{1, 1, 1, 1}, 123.0) == 123.0);
}

TEST_CASE("expected_eta_lambda scales as 1/c^2") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const ModelOrder o{1, 2, 1, 1};
        Vector lam(4);
        for (int k = 0; k < 4; ++k) lam(k) = normal(rng);
        const Matrix J = lag_decay_matrix(2, 1, 2.0, 1);
        const double c = 0.5 + rep;
        const double a = expected_eta_lambda(lam, J, 0, 0, o);
        const double b = expected_eta_lambda(c * lam, J, 0, 0, o);
        CHECK(b == doctest::Approx(a / (c * c)).epsilon(1e-13));
    }
}

TEST_CASE("log_prior examples") {
    const ModelOrder o{1, 1, 0, 1};
    Theta th;
    th.Lambda = Matrix::Ones(1, 1);
    th.Phi = Matrix::Zero(1, 1);
    th.psi = Vector::Ones(1);
    th.omega = Vector::Ones(1);

    CHECK(log_prior(th, PriorSpec::ml(), o) == 0.0);

    PriorSpec spec;
    spec.eta_lambda = Vector::Ones(1);
    spec.eta_phi = 1.0;
    spec.adaptive = false;
    // ln det(Vinv) = ln det(Winv) = 0 and phi = 0, so only the loading quadratic form remains.
    CHECK(log_prior(th, spec, o) == doctest::Approx(-0.5).epsilon(1e-15));

    Theta doubled = th;
    doubled.psi(0) = 2.0;
    CHECK(log_prior(th, spec, o) - log_prior(doubled, spec, o) == doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("log_prior penalizes nonzero loadings relative to ML at fixed precisions") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        const ModelOrder o{3, 1 + rep % 2, rep % 2, 1};
        const Theta th = test::random_theta(o, rng);
        PriorSpec spec;
        spec.eta_lambda = Vector::Ones(3);
        spec.adaptive = false;
        Theta flat = th;
        flat.Lambda.setZero();
        flat.Phi.setZero();
        CHECK(log_prior(th, spec, o) < log_prior(flat, spec, o));
    }
}
