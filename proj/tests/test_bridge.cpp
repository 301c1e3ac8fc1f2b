#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "dbl/bridge.hpp"
#include "dbl/market.hpp"
#include "dbl/reference.hpp"
#include "dbl/rng.hpp"

using namespace dbl;

namespace {

BridgeSpec reference_bridge(double alpha = 0.4) {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    Eigen::VectorXd y(3);
    y << 0.05, -0.02, 0.04;
    return BridgeSpec::make(Eigen::VectorXd::Zero(5), market.sigma(), p,
                            make_omega_alpha(market, p, alpha), market.horizon(), y);
}

}  // namespace

TEST_CASE("one-dimensional hitting time is T (1 + omega^2 / sigma^2)") {
    const double sigma2 = 0.04, omega2 = 0.1, T = 2.0;
    Eigen::MatrixXd s(1, 1), p(1, 1), om(1, 1);
    s << sigma2;
    p << 1.0;
    om << omega2;
    const BridgeLaw law = BridgeLaw::build(
        BridgeSpec::make(Eigen::VectorXd::Zero(1), s, p, om, T, Eigen::VectorXd::Constant(1, 0.3)));
    const double expected = T * (1.0 + omega2 / sigma2);
    CHECK(law.hitting_times()(0) == doctest::Approx(expected).epsilon(1e-13));
    CHECK(law.whitened_hitting_times()(0) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("correlated pair with one noisy view reproduces both hitting times") {
    const double rho = 0.5, T = 10.0, noise_var = 4.0;
    Eigen::MatrixXd s(2, 2);
    s << 1.0, rho, rho, 1.0;
    Eigen::MatrixXd p(1, 2);
    p << 0.0, 1.0;
    Eigen::MatrixXd om(1, 1);
    om << noise_var / T;  // per-unit-time; total noise variance is noise_var
    const BridgeLaw law = BridgeLaw::build(
        BridgeSpec::make(Eigen::VectorXd::Zero(2), s, p, om, T, Eigen::VectorXd::Constant(1, 1.0)));
    CHECK(law.hitting_times()(1) == doctest::Approx(T + noise_var).epsilon(1e-12));          // 14
    CHECK(law.hitting_times()(0) == doctest::Approx((T + noise_var) / (rho * rho)).epsilon(1e-12));
}

TEST_CASE("exact terminal pinning when the noise vanishes") {
    const MarketModel market = reference_market();
    Eigen::VectorXd y(5);
    y << 0.1, -0.1, 0.2, 0.0, 0.05;
    const BridgeSpec spec =
        BridgeSpec::make(Eigen::VectorXd::Zero(5), market.sigma(), Eigen::MatrixXd::Identity(5, 5),
                         1e-18 * Eigen::MatrixXd::Identity(5, 5), 1.0, y);
    const BridgeLaw law = BridgeLaw::build(spec);
    for (Eigen::Index i = 0; i < 5; ++i)
        CHECK(law.hitting_times()(i) == doctest::Approx(1.0).epsilon(1e-9));
    const Eigen::MatrixXd path = sample_bridge_path(law, {0.25, 0.5, 1.0}, 77);
    CHECK((path.row(2).transpose() - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("hitting time monotonicity check") {
    const BridgeSpec spec = reference_bridge();
    CHECK(hitting_time_monotonicity_check(spec, 2.0 * spec.omega));
    CHECK(hitting_time_monotonicity_check(spec, spec.omega));  // equality case
    Eigen::MatrixXd indefinite = spec.omega;
    indefinite(0, 0) += 1.0;
    indefinite(1, 1) -= 1.0;
    CHECK_THROWS_AS(hitting_time_monotonicity_check(spec, indefinite), NotComparable);
}

TEST_CASE("components the views cannot see stay Brownian") {
    // Two independent blocks; the view touches only the first asset.
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
    sigma(0, 0) = 0.04;
    sigma(1, 1) = 0.09;
    Eigen::MatrixXd p(1, 2);
    p << 1.0, 0.0;
    Eigen::MatrixXd om(1, 1);
    om << 0.02;
    const BridgeSpec spec = BridgeSpec::make(Eigen::VectorXd::Zero(2), sigma, p, om, 1.0,
                                             Eigen::VectorXd::Constant(1, 0.1));
    const BridgeLaw law = BridgeLaw::build(spec);
    CHECK(std::isinf(law.whitened_hitting_times()(1)));
    CHECK(std::isinf(law.hitting_times()(1)));
    CHECK(law.hitting_times()(0) > 1.0);

    // The untouched component has the free Brownian covariance.
    const Eigen::MatrixXd c = law.cov(0.3, 0.7);
    CHECK(c(1, 1) == doctest::Approx(0.3 * 0.09).epsilon(1e-12));
    CHECK(c(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("bridge covariance stays PSD and the whitened diagonal pins at the hitting time") {
    const BridgeLaw law = BridgeLaw::build(reference_bridge());
    for (double t : {0.05, 0.25, 0.5, 0.75, 0.99}) {
        CHECK(is_psd(law.cov(t, t)));
    }
    // (min(s,t) I - s t H)_ii evaluated at the whitened hitting time is zero.
    for (Eigen::Index i = 0; i < 5; ++i) {
        const double ti = law.whitened_hitting_times()(i);
        CHECK(std::min(ti, ti) - ti * ti * law.H()(i, i) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("whitened and original drift matrices are similar via the Cholesky factor") {
    const BridgeLaw law = BridgeLaw::build(reference_bridge());
    const Eigen::MatrixXd& l = law.chol_lower();
    for (double t : {0.0, 0.2, 0.5, 0.9}) {
        const Eigen::MatrixXd lhs = l * law.bbar_beta2(t) *
                                    l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(5, 5));
        CHECK((lhs - law.beta2(t)).norm() < 1e-10);
    }
}

TEST_CASE("mean-reversion semigroup: beta2(u) (I - (u-s) beta2(s)) = beta2(s)") {
    const BridgeLaw law = BridgeLaw::build(reference_bridge());
    Rng rng(4);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(5, 5);
    for (int i = 0; i < 50; ++i) {
        const double s = 0.99 * rng.uniform();
        const double u = s + (0.999 - s) * rng.uniform();
        CHECK((law.beta2(u) * (eye - (u - s) * law.beta2(s)) - law.beta2(s)).norm() < 1e-9);
    }
}

TEST_CASE("sampling is reproducible and grids are validated") {
    const BridgeLaw law = BridgeLaw::build(reference_bridge());
    const std::vector<double> grid{0.1, 0.4, 0.8};
    const Eigen::MatrixXd a = sample_bridge_path(law, grid, 42);
    const Eigen::MatrixXd b = sample_bridge_path(law, grid, 42);
    CHECK(a == b);  // bitwise
    CHECK(a != sample_bridge_path(law, grid, 43));

    CHECK_THROWS_AS(sample_bridge_path(law, {0.5, 0.4}, 1), GridOutOfRange);
    CHECK_THROWS_AS(sample_bridge_path(law, {0.5, 1.5}, 1), GridOutOfRange);
    CHECK_THROWS_AS(sample_bridge_path(law, {}, 1), GridOutOfRange);
}

TEST_CASE("sampled moments match the closed-form law") {
    const BridgeLaw law = BridgeLaw::build(reference_bridge());
    const double s = 1.0 / 3, t = 2.0 / 3;
    const int n = 20000;
    const auto paths = sample_bridge_paths(law, {s, t}, n, 2024);

    Eigen::MatrixXd bt(n, 5);
    for (int i = 0; i < n; ++i) bt.row(i) = paths[static_cast<std::size_t>(i)].row(1);
    const Eigen::RowVectorXd mean = bt.colwise().mean();
    CHECK((mean.transpose() - law.mean(t)).cwiseAbs().maxCoeff() <
          3.0 * std::sqrt(law.cov(t, t).diagonal().maxCoeff() / n));
    const Eigen::MatrixXd expect = law.cov(t, t);
    for (Eigen::Index i = 0; i < 5; ++i) {
        const Eigen::ArrayXd ci = bt.col(i).array() - mean(i);
        const double sample = (ci * ci).sum() / (n - 1);
        const double se = expect(i, i) * std::sqrt(2.0 / (n - 1));
        CHECK(std::abs(sample - expect(i, i)) < 3 * se);
    }
}
