#include "dfm/errors.hpp"
#include "dfm/kalman.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace dfm;

namespace {

StateSpace scalar_model(double p0) {
    StateSpace ss;
    ss.Z = Matrix::Ones(1, 1);
    ss.Tmat = Matrix::Zero(1, 1);
    ss.R = Matrix::Ones(1, 1);
    ss.q_diag = Vector::Ones(1);
    ss.h_diag = Vector::Ones(1);
    ss.p0_diag = Vector::Constant(1, p0);
    return ss;
}

Panel single_cell(double y, bool available) {
    Matrix v = Matrix::Constant(1, 1, y);
    Mask m = Mask::Constant(1, 1, available);
    return Panel(v, m, Vector::Zero(1), Vector::Ones(1));
}

struct Instance {
    ModelOrder order;
    StateSpace ss;
    Panel panel;
};

Instance random_instance(std::mt19937_64& rng, int n, int T, int r, int p, int q, double fraction) {
    const ModelOrder o{n, r, p, q};
    const Theta th = test::random_theta(o, rng);
    std::uniform_real_distribution<double> s0(0.5, 5.0);
    return {o, build_state_space(th, o, s0(rng)), test::random_panel(th, o, T, fraction, rng, 0)};
}

}  // namespace

TEST_CASE("filter: single observation closed form") {
    const FilterOutput fo = run_filter(scalar_model(0.0), single_cell(0.0, true));
    CHECK(fo.loglik == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * 2.0)).epsilon(1e-14));
}

TEST_CASE("filter: missing observation carries no information") {
    const FilterOutput fo = run_filter(scalar_model(0.0), single_cell(0.7, false));
    CHECK(fo.loglik == 0.0);
    CHECK(fo.filtered_mean[1] == fo.predicted_mean[1]);
    CHECK(fo.filtered_cov[1] == fo.predicted_cov[1]);
}

TEST_CASE("filter and smoother match the joint Gaussian oracle") {
    std::mt19937_64 rng(2024);
    for (int rep = 0; rep < 30; ++rep) {
        const Instance inst = random_instance(rng, 3, 8, 1 + rep % 2, rep % 2, 1 + (rep / 2) % 2, 0.3);
        const FilterOutput fo = run_filter(inst.ss, inst.panel);
        const SmoothedMoments sm = run_smoother(inst.ss, fo);
        const test::OracleMoments orc = test::joint_gaussian_oracle(inst.ss, inst.panel);
        CHECK(std::abs(fo.loglik - orc.loglik) < 1e-8);
        for (int t = 0; t <= 8; ++t) {
            CHECK(test::max_abs_diff(sm.mean[t], orc.mean[t]) < 1e-8);
            CHECK(test::max_abs_diff(sm.cov[t], orc.cov[t]) < 1e-8);
            if (t > 0) CHECK(test::max_abs_diff(sm.lag1_cov[t], orc.lag1_cov[t]) < 1e-8);
        }
    }
}

TEST_CASE("smoother: T=1 and final period equal the filtered moments") {
    std::mt19937_64 rng(8);
    for (int T : {1, 6}) {
        const Instance inst = random_instance(rng, 2, T, 2, 1, 2, 0.2);
        const FilterOutput fo = run_filter(inst.ss, inst.panel);
        const SmoothedMoments sm = run_smoother(inst.ss, fo);
        CHECK(test::max_abs_diff(sm.mean[T], fo.filtered_mean[T]) == 0.0);
        CHECK(test::max_abs_diff(sm.cov[T], fo.filtered_cov[T]) == 0.0);
    }
}

TEST_CASE("smoother: fully missing panel gives the zero prior mean") {
    std::mt19937_64 rng(4);
    Instance inst = random_instance(rng, 3, 7, 2, 1, 2, 0.0);
    const Panel empty = inst.panel.with_mask(Mask::Constant(3, 7, false));
    const FilterOutput fo = run_filter(inst.ss, empty);
    CHECK(fo.loglik == 0.0);
    const SmoothedMoments sm = run_smoother(inst.ss, fo);
    for (int t = 0; t <= 7; ++t) CHECK(sm.mean[t].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("covariances are symmetric and PSD, and ordered smoothed <= filtered <= predicted") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const Instance inst = random_instance(rng, 4, 12, 1 + rep % 2, rep % 2, 1 + rep % 3, 0.25);
        const FilterOutput fo = run_filter(inst.ss, inst.panel);
        const SmoothedMoments sm = run_smoother(inst.ss, fo);
        for (int t = 0; t <= 12; ++t) {
            for (const Matrix* P : {&fo.predicted_cov[t], &fo.filtered_cov[t], &sm.cov[t]}) {
                CHECK(test::max_abs_diff(*P, P->transpose()) < 1e-10);
                CHECK(test::min_eigenvalue(*P) >= -1e-8);
            }
            CHECK(test::min_eigenvalue(sm.second_moment(t)) >= -1e-8);
            CHECK(test::min_eigenvalue(fo.filtered_cov[t] - sm.cov[t]) >= -1e-8);
            CHECK(test::min_eigenvalue(fo.predicted_cov[t] - fo.filtered_cov[t]) >= -1e-8);
        }
    }
}

TEST_CASE("row deletion equals filtering the reduced system") {
    // Masking variable 2 throughout must equal dropping that row from Z and H.
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        const Instance inst = random_instance(rng, 3, 9, 1 + rep % 2, 1, 1, 0.0);
        Mask m = inst.panel.mask();
        m.row(2).setConstant(false);
        const Panel masked = inst.panel.with_mask(m);

        StateSpace reduced = inst.ss;
        reduced.Z = inst.ss.Z.topRows(2);
        reduced.h_diag = inst.ss.h_diag.head(2);
        const Panel small(inst.panel.values().topRows(2), inst.panel.mask().topRows(2), Vector::Zero(2),
                          Vector::Ones(2));

        const FilterOutput a = run_filter(inst.ss, masked);
        const FilterOutput b = run_filter(reduced, small);
        CHECK(std::abs(a.loglik - b.loglik) < 1e-10);
        const SmoothedMoments sa = run_smoother(inst.ss, a);
        const SmoothedMoments sb = run_smoother(reduced, b);
        for (int t = 0; t <= 9; ++t) {
            CHECK(test::max_abs_diff(sa.mean[t], sb.mean[t]) < 1e-10);
            CHECK(test::max_abs_diff(sa.cov[t], sb.cov[t]) < 1e-10);
        }
    }
}

TEST_CASE("more observations never increase smoothed uncertainty") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const Instance inst = random_instance(rng, 4, 10, 2, 1, 2, 0.1);
        Mask sub = inst.panel.mask();
        for (Eigen::Index k = 0; k < sub.size(); ++k)
            if (unif(rng) < 0.4) sub.data()[k] = false;
        const SmoothedMoments big = run_smoother(inst.ss, run_filter(inst.ss, inst.panel));
        const SmoothedMoments few = run_smoother(inst.ss, run_filter(inst.ss, inst.panel.with_mask(sub)));
        for (int t = 0; t <= 10; ++t) CHECK(test::min_eigenvalue(few.cov[t] - big.cov[t]) >= -1e-8);
    }
}

TEST_CASE("filter reports non-finite values with the time index") {
    StateSpace ss = scalar_model(1.0);
    ss.Tmat(0, 0) = 1e200;
    Matrix v = Matrix::Zero(1, 3);
    Mask m = Mask::Constant(1, 3, false);
    const Panel panel(v, m, Vector::Zero(1), Vector::Ones(1));
    try {
        (void)run_filter(ss, panel);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("t=1") != std::string::npos);
    }
}

TEST_CASE("psd_solve handles singular systems") {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = 2.0;
    Matrix B(2, 1);
    B << 4.0, 0.0;
    const Matrix X = detail::psd_solve(A, B);
    CHECK(X(0, 0) == doctest::Approx(2.0));
    CHECK(X(1, 0) == doctest::Approx(0.0));
}
