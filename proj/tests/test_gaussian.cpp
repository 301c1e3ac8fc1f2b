#include <doctest.h>

#include <Eigen/Dense>

#include "dbl/gaussian.hpp"
#include "dbl/market.hpp"
#include "dbl/reference.hpp"
#include "dbl/rng.hpp"

using namespace dbl;

namespace {

Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n) {
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
    return symmetrize(a * a.transpose() / static_cast<double>(n) +
                      0.3 * Eigen::MatrixXd::Identity(n, n));
}

}  // namespace

TEST_CASE("conditioning on an independent block returns the prior marginal") {
    GaussianVector joint;
    joint.mean = Eigen::VectorXd::Zero(3);
    joint.mean << 0.1, -0.2, 0.5;
    joint.cov = Eigen::MatrixXd::Zero(3, 3);
    joint.cov.diagonal() << 1.0, 2.0, 3.0;
    joint.cov(0, 1) = joint.cov(1, 0) = 0.4;  // X block correlated internally, independent of Y
    Eigen::VectorXd y(1);
    y << 7.0;
    const GaussianVector post = condition(joint, {2}, y);
    CHECK(post.mean.isApprox(joint.mean.head(2)));
    CHECK(post.cov.isApprox(joint.cov.topLeftCorner(2, 2)));
}

TEST_CASE("scalar conjugate update matches the closed form") {
    const double a = 0.2, T = 2.0, omega2 = 0.5, y = 1.3;
    GaussianVector joint;
    joint.mean = Eigen::VectorXd(2);
    joint.mean << a, a;  // Y = X + eps has mean a
    joint.cov = Eigen::MatrixXd(2, 2);
    joint.cov << T, T, T, T + T * omega2;
    const GaussianVector post = condition(joint, {1}, Eigen::VectorXd::Constant(1, y));
    const double expected = a + (T / (T + T * omega2)) * (y - a);
    CHECK(post.mean(0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("view equal to its prior expectation leaves the prior untouched") {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    const double T = market.horizon();
    const Eigen::MatrixXd omega = make_omega_alpha(market, p, 0.4);

    GaussianVector joint;
    joint.mean = Eigen::VectorXd(8);
    joint.mean << T * market.log_drift(), T * (p * market.log_drift());
    joint.cov = Eigen::MatrixXd(8, 8);
    joint.cov.topLeftCorner(5, 5) = T * market.sigma();
    joint.cov.topRightCorner(5, 3) = T * market.sigma() * p.transpose();
    joint.cov.bottomLeftCorner(3, 5) = T * p * market.sigma();
    joint.cov.bottomRightCorner(3, 3) = T * (p * market.sigma() * p.transpose() + omega);

    const Eigen::VectorXd y = T * (p * market.log_drift());
    const GaussianVector post = condition(joint, {5, 6, 7}, y);
    CHECK((post.mean - T * market.log_drift()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conditioning errors") {
    GaussianVector joint;
    joint.mean = Eigen::VectorXd::Zero(2);
    joint.cov = Eigen::MatrixXd::Zero(2, 2);
    joint.cov(0, 0) = 1.0;  // observed block singular
    CHECK_THROWS_AS(condition(joint, {1}, Eigen::VectorXd::Zero(1)), SingularObservationCov);
    CHECK_THROWS_AS(condition(joint, {5}, Eigen::VectorXd::Zero(1)), ShapeMismatch);
    CHECK_THROWS_AS(condition(joint, {0}, Eigen::VectorXd::Zero(2)), ShapeMismatch);
}

TEST_CASE("conditioning never increases the posterior trace") {
    Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 5);
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.uniform() * 3);
        GaussianVector joint;
        joint.mean = rng.normal_vector(n + k);
        joint.cov = random_spd(rng, n + k);
        std::vector<Eigen::Index> observed;
        for (Eigen::Index i = 0; i < k; ++i) observed.push_back(n + i);
        const GaussianVector post = condition(joint, observed, rng.normal_vector(k));
        post.validate();  // symmetric PSD
        CHECK(post.cov.trace() <= joint.cov.topLeftCorner(n, n).trace() + 1e-12);
    }
}

TEST_CASE("sequential conditioning on independent observations matches joint conditioning") {
    Rng rng(72);
    const Eigen::Index n = 4, k1 = 2, k2 = 2;
    // Y1 and Y2 are noisy views of X with independent noises.
    const Eigen::MatrixXd sigma = random_spd(rng, n);
    Eigen::MatrixXd p1(k1, n), p2(k2, n);
    for (Eigen::Index i = 0; i < k1; ++i)
        for (Eigen::Index j = 0; j < n; ++j) p1(i, j) = rng.normal();
    for (Eigen::Index i = 0; i < k2; ++i)
        for (Eigen::Index j = 0; j < n; ++j) p2(i, j) = rng.normal();
    const Eigen::MatrixXd o1 = random_spd(rng, k1);
    const Eigen::MatrixXd o2 = random_spd(rng, k2);

    GaussianVector joint;
    joint.mean = Eigen::VectorXd::Zero(n + k1 + k2);
    joint.cov = Eigen::MatrixXd::Zero(n + k1 + k2, n + k1 + k2);
    joint.cov.topLeftCorner(n, n) = sigma;
    joint.cov.block(0, n, n, k1) = sigma * p1.transpose();
    joint.cov.block(n, 0, k1, n) = p1 * sigma;
    joint.cov.block(0, n + k1, n, k2) = sigma * p2.transpose();
    joint.cov.block(n + k1, 0, k2, n) = p2 * sigma;
    joint.cov.block(n, n, k1, k1) = p1 * sigma * p1.transpose() + o1;
    joint.cov.block(n + k1, n + k1, k2, k2) = p2 * sigma * p2.transpose() + o2;
    joint.cov.block(n, n + k1, k1, k2) = p1 * sigma * p2.transpose();
    joint.cov.block(n + k1, n, k2, k1) = p2 * sigma * p1.transpose();
    joint.cov = symmetrize(joint.cov);

    const Eigen::VectorXd y1 = rng.normal_vector(k1);
    const Eigen::VectorXd y2 = rng.normal_vector(k2);

    std::vector<Eigen::Index> both;
    for (Eigen::Index i = 0; i < k1 + k2; ++i) both.push_back(n + i);
    Eigen::VectorXd y12(k1 + k2);
    y12 << y1, y2;
    const GaussianVector joint_post = condition(joint, both, y12);

    std::vector<Eigen::Index> first;
    for (Eigen::Index i = 0; i < k1; ++i) first.push_back(n + i);
    const GaussianVector mid = condition(joint, first, y1);
    std::vector<Eigen::Index> second;
    for (Eigen::Index i = 0; i < k2; ++i) second.push_back(n + i);
    const GaussianVector seq_post = condition(mid, second, y2);

    CHECK((seq_post.mean - joint_post.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((seq_post.cov - joint_post.cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("woodbury inverse") {
    Rng rng(73);

    SUBCASE("U = 0 returns A^{-1} unchanged") {
        const Eigen::MatrixXd a_inv = random_spd(rng, 4);
        const Eigen::MatrixXd u = Eigen::MatrixXd::Zero(4, 2);
        const Eigen::MatrixXd c_inv = Eigen::MatrixXd::Identity(2, 2);
        CHECK(woodbury_inverse(a_inv, u, c_inv, u).isApprox(a_inv, 1e-14));
    }

    SUBCASE("one-dimensional case") {
        Eigen::MatrixXd a_inv(1, 1), u(1, 1), c_inv(1, 1);
        const double s2 = 0.3, w2 = 0.7;
        a_inv << 1.0 / s2;
        u << 1.0;
        c_inv << 1.0 / w2;
        const Eigen::MatrixXd r = woodbury_inverse(a_inv, u, c_inv, u);
        CHECK(r(0, 0) == doctest::Approx(1.0 / (s2 + w2)).epsilon(1e-13));
    }

    SUBCASE("matches the dense inverse on the reference market") {
        const MarketModel market = reference_market();
        const Eigen::MatrixXd p = reference_pick_matrix();
        const Eigen::MatrixXd omega = make_omega_alpha(market, p, 0.4);
        const Eigen::MatrixXd a_inv = market.chol().inverse();
        const Eigen::MatrixXd c_inv = CholeskyFactor::compute(omega).inverse();
        const Eigen::MatrixXd result = woodbury_inverse(a_inv, p.transpose(), c_inv, p.transpose());
        const Eigen::MatrixXd assembled = market.sigma() + p.transpose() * omega * p;
        const Eigen::MatrixXd direct = assembled.inverse();
        CHECK((result - direct).norm() / direct.norm() < 1e-10);
        CHECK(((assembled * result) - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-10);
    }

    SUBCASE("agrees with dense inversion on random SPD instances up to d=20") {
        for (Eigen::Index n : {3, 8, 20}) {
            const Eigen::Index k = std::max<Eigen::Index>(1, n / 3);
            const Eigen::MatrixXd a = random_spd(rng, n);
            const Eigen::MatrixXd c = random_spd(rng, k);
            Eigen::MatrixXd u(n, k), v(n, k);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < k; ++j) {
                    u(i, j) = rng.normal();
                    v(i, j) = rng.normal();
                }
            const Eigen::MatrixXd result = woodbury_inverse(a.inverse(), u, c.inverse(), v);
            const Eigen::MatrixXd direct = (a + u * c * v.transpose()).inverse();
            CHECK((result - direct).norm() / direct.norm() < 1e-10);
        }
    }

    SUBCASE("errors") {
        const Eigen::MatrixXd a_inv = random_spd(rng, 3);
        CHECK_THROWS_AS(woodbury_inverse(a_inv, Eigen::MatrixXd::Zero(2, 1),
                                         Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Zero(2, 1)),
                        ShapeMismatch);
        Eigen::MatrixXd u(1, 1), c_inv(1, 1), ai(1, 1);
        ai << 1.0;
        u << 1.0;
        c_inv << -1.0;  // C^{-1} + V^T A^{-1} U = 0
        CHECK_THROWS_AS(woodbury_inverse(ai, u, c_inv, u), SingularInnerBlock);
    }
}

TEST_CASE("cholesky") {
    SUBCASE("identity factors to identity") {
        const CholeskyFactor c = cholesky(Eigen::MatrixXd::Identity(4, 4));
        CHECK(c.lower().isApprox(Eigen::MatrixXd::Identity(4, 4)));
    }

    SUBCASE("diagonal matrix factors to elementwise square roots") {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
        d.diagonal() << 4.0, 9.0, 0.25;
        const CholeskyFactor c = cholesky(d);
        CHECK(c.lower().diagonal().isApprox(d.diagonal().cwiseSqrt()));
    }

    SUBCASE("reference covariance reconstructs to 1e-12") {
        const Eigen::MatrixXd sigma = reference_market().sigma();
        const CholeskyFactor c = cholesky(sigma);
        CHECK((c.reconstruct() - sigma).norm() / sigma.norm() < 1e-12);
        for (Eigen::Index i = 0; i < 5; ++i) CHECK(c.lower()(i, i) > 0.0);
    }

    SUBCASE("reports the failing pivot") {
        Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
        bad(2, 2) = -1.0;
        try {
            cholesky(bad);
            FAIL("expected NotPositiveDefinite");
        } catch (const NotPositiveDefinite& e) {
            CHECK(e.pivot() == 2);
        }
    }
}

TEST_CASE("gaussian vector validation") {
    GaussianVector g;
    g.mean = Eigen::VectorXd::Zero(2);
    g.cov = Eigen::MatrixXd::Identity(2, 2);
    CHECK_NOTHROW(g.validate());

    g.cov(0, 1) = 0.5;  // asymmetric
    CHECK_THROWS_AS(g.validate(), NumericalFailure);

    g.cov(0, 1) = g.cov(1, 0) = 2.0;  // indefinite
    CHECK_THROWS_AS(g.validate(), NotPositiveDefinite);
}

TEST_CASE("psd square root handles singular matrices") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 1.0, 1.0, 1.0;  // rank one
    const Eigen::MatrixXd root = psd_sqrt(m);
    CHECK((root * root.transpose() - m).norm() < 1e-12);
    CHECK(psd_sqrt(Eigen::MatrixXd::Zero(3, 3)).norm() == 0.0);
}
