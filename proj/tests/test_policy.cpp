#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "dbl/conditional.hpp"
#include "dbl/gaussian.hpp"
#include "dbl/market.hpp"
#include "dbl/policy.hpp"
#include "dbl/reference.hpp"
#include "dbl/rng.hpp"

using namespace dbl;

namespace {

ConditionalLaw reference_law(double alpha = 0.4) {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    const ViewSet views = ViewSet::make(p, make_omega_alpha(market, p, alpha), 0.0, market.horizon());
    Eigen::VectorXd y(3);
    y << 0.06, -0.01, 0.03;
    return ConditionalLaw::build(market, views, y);
}

}  // namespace

TEST_CASE("classical posterior") {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    Eigen::VectorXd y(3);
    y << 0.04, 0.01, 0.05;

    SUBCASE("uninformative views leave the prior") {
        const Eigen::MatrixXd omega = 1e9 * make_omega_alpha(market, p, 1.0);
        const ClassicalBLPosterior post = classical_bl(market, p, omega, y);
        CHECK((post.mu_bl - market.mu()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((post.sigma_bl - market.sigma()).norm() < 1e-8);
    }

    SUBCASE("fully trusted identity views pin the mean to y") {
        Eigen::VectorXd full_y(5);
        full_y << 0.02, 0.03, 0.04, 0.05, 0.06;
        const ClassicalBLPosterior post = classical_bl(
            market, Eigen::MatrixXd::Identity(5, 5), 1e-12 * Eigen::MatrixXd::Identity(5, 5), full_y);
        CHECK((post.mu_bl - full_y).cwiseAbs().maxCoeff() < 1e-6);
    }

    SUBCASE("matches joint conditioning of (r, Y)") {
        const Eigen::MatrixXd omega = make_omega_alpha(market, p, 0.4);
        const ClassicalBLPosterior post = classical_bl(market, p, omega, y);
        GaussianVector joint;
        joint.mean = Eigen::VectorXd(8);
        joint.mean << market.mu(), p * market.mu();
        joint.cov = Eigen::MatrixXd(8, 8);
        joint.cov.topLeftCorner(5, 5) = market.sigma();
        joint.cov.topRightCorner(5, 3) = market.sigma() * p.transpose();
        joint.cov.bottomLeftCorner(3, 5) = p * market.sigma();
        joint.cov.bottomRightCorner(3, 3) = p * market.sigma() * p.transpose() + omega;
        const GaussianVector oracle = condition(joint, {5, 6, 7}, y);
        CHECK((post.mu_bl - oracle.mean).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((post.sigma_bl - oracle.cov).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("precision adds across the update") {
        const Eigen::MatrixXd omega = make_omega_alpha(market, p, 0.4);
        const ClassicalBLPosterior post = classical_bl(market, p, omega, y);
        const Eigen::MatrixXd expected_precision =
            market.chol().inverse() +
            p.transpose() * CholeskyFactor::compute(omega).solve(p);
        const Eigen::MatrixXd precision = CholeskyFactor::compute(post.sigma_bl).inverse();
        CHECK((precision - expected_precision).norm() / expected_precision.norm() < 1e-10);
        CHECK(is_psd(precision - market.chol().inverse()));  // information never lost
    }

    SUBCASE("singular omega is rejected") {
        CHECK_THROWS_AS(classical_bl(market, p, Eigen::MatrixXd::Zero(3, 3), y), SingularOmega);
    }
}

TEST_CASE("classical portfolio") {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    Eigen::VectorXd y(3);
    y << 0.04, 0.01, 0.05;
    const ClassicalBLPosterior post = classical_bl(market, p, make_omega_alpha(market, p, 0.4), y);

    SUBCASE("no excess return means no risky holdings") {
        ClassicalBLPosterior flat = post;
        flat.mu_bl = Eigen::VectorXd::Constant(5, market.r_f());
        CHECK(classical_bl_portfolio(flat, market.r_f(), 3.0).norm() == 0.0);
    }

    SUBCASE("weights scale as 1/gamma") {
        const Eigen::VectorXd w2 = classical_bl_portfolio(post, market.r_f(), 2.0);
        const Eigen::VectorXd w4 = classical_bl_portfolio(post, market.r_f(), 4.0);
        CHECK((w2 - 2.0 * w4).cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("matches a projected-gradient mean-variance solve") {
        const double gamma = 3.0;
        const Eigen::VectorXd closed = classical_bl_portfolio(post, market.r_f(), gamma);
        // Gradient descent on f(w) = gamma/2 w' S w - w' (mu - r_f), an
        // independent route to the unconstrained optimum.
        Eigen::VectorXd w = Eigen::VectorXd::Zero(5);
        const Eigen::VectorXd excess = post.mu_bl - market.r_f() * Eigen::VectorXd::Ones(5);
        const double step = 0.5 / (gamma * post.sigma_bl.norm());
        for (int it = 0; it < 200000; ++it) w -= step * (gamma * post.sigma_bl * w - excess);
        CHECK((w - closed).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("aged-view single-period policy") {
    const ConditionalLaw law = reference_law();
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    const double gamma = 5.0;

    SUBCASE("at t = 0 the precision carries the full view strength") {
        const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(5);
        const Eigen::VectorXd w = aged_view_portfolio(law, gamma, 0.0, x0);
        const Eigen::MatrixXd precision =
            market.chol().inverse() +
            p.transpose() * CholeskyFactor::compute(law.omega()).solve(p);
        const Eigen::VectorXd expected =
            precision * (law.log_drift(0.0, x0) - market.r_f() * Eigen::VectorXd::Ones(5)) / gamma;
        CHECK((w - expected).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("the view ages out as t approaches the horizon") {
        const Eigen::VectorXd x = law.cond_mean(1.0 - 1e-9);
        const Eigen::VectorXd w = aged_view_portfolio(law, gamma, 1.0 - 1e-9, x);
        const Eigen::VectorXd merton_like =
            market.chol().solve(law.log_drift(1.0 - 1e-9, x) -
                                market.r_f() * Eigen::VectorXd::Ones(5)) /
            gamma;
        CHECK((w - merton_like).cwiseAbs().maxCoeff() < 1e-6);
    }

    SUBCASE("matches the brute-force conditional of the remaining return") {
        // Oracle: condition X(T) - X(t) on (X(t) = x, Y = y) from the explicit
        // joint, then apply the single-period mean-variance formula.
        const double t = 0.5, T = market.horizon();
        const Eigen::VectorXd x = law.cond_mean(t);

        GaussianVector joint;  // (X(T), X(t), Y)
        joint.mean = Eigen::VectorXd(13);
        joint.mean << T * market.log_drift(), t * market.log_drift(),
            T * (p * market.log_drift());
        joint.cov = Eigen::MatrixXd(13, 13);
        joint.cov.block(0, 0, 5, 5) = T * market.sigma();
        joint.cov.block(0, 5, 5, 5) = t * market.sigma();
        joint.cov.block(5, 0, 5, 5) = t * market.sigma();
        joint.cov.block(5, 5, 5, 5) = t * market.sigma();
        joint.cov.block(0, 10, 5, 3) = T * market.sigma() * p.transpose();
        joint.cov.block(10, 0, 3, 5) = T * p * market.sigma();
        joint.cov.block(5, 10, 5, 3) = t * market.sigma() * p.transpose();
        joint.cov.block(10, 5, 3, 5) = t * p * market.sigma();
        joint.cov.block(10, 10, 3, 3) =
            T * (p * market.sigma() * p.transpose() + law.omega());
        joint.cov = symmetrize(joint.cov);

        std::vector<Eigen::Index> observed;
        for (Eigen::Index i = 5; i < 13; ++i) observed.push_back(i);
        Eigen::VectorXd obs(8);
        obs << x, law.y();
        const GaussianVector post = condition(joint, observed, obs);

        const Eigen::VectorXd mean_incr = (post.mean - x) / (T - t);
        const Eigen::MatrixXd cov_incr = post.cov / (T - t);
        const Eigen::VectorXd oracle =
            CholeskyFactor::compute(cov_incr).solve(mean_incr -
                                                    market.r_f() * Eigen::VectorXd::Ones(5)) /
            gamma;
        const Eigen::VectorXd w = aged_view_portfolio(law, gamma, t, x);
        CHECK((w - oracle).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("dynamic policy solution") {
    const ConditionalLaw law = reference_law();

    SUBCASE("terminal conditions") {
        const PolicySolution sol = PolicySolution::solve(law, 5.0, 64);
        const double T = law.horizon();
        CHECK(sol.A(T).norm() == 0.0);
        CHECK(sol.b(T).norm() == 0.0);
        CHECK(sol.M(T).norm() == 0.0);
        CHECK(sol.c(T) == 0.0);
        CHECK((sol.sigma_dbl(T) - law.sigma()).norm() < 1e-14);
    }

    SUBCASE("gamma validation") {
        CHECK_THROWS_AS(PolicySolution::solve(law, 0.5, 16), GammaOutOfRange);
        CHECK_NOTHROW(PolicySolution::solve(law, 1.0, 16));  // log utility accepted
    }

    SUBCASE("no hedging near log utility") {
        const PolicySolution sol = PolicySolution::solve(law, 1.0 + 1e-8, 32);
        for (double t : {0.0, 0.3, 0.8}) CHECK(sol.M(t).norm() < 1e-6);
    }

    SUBCASE("A(t) is negative definite on the view range before the horizon") {
        // ker(P) lies in ker(A), so with fewer views than assets A is rank-K
        // negative semidefinite; on the range of P^T it is strictly negative.
        const PolicySolution sol = PolicySolution::solve(law, 5.0, 32);
        const Eigen::MatrixXd pt = law.P().transpose();
        Rng eig_rng(77);
        for (double t : {0.0, 0.25, 0.5, 0.99}) {
            const Eigen::MatrixXd a = sol.A(t);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
            CHECK(es.eigenvalues().maxCoeff() < 1e-12);     // negative semidefinite
            CHECK(es.eigenvalues()(0) < -1e-12);            // genuinely negative part
            CHECK(es.eigenvalues()(2) < -1e-12);            // rank is the number of views
            for (int trial = 0; trial < 5; ++trial) {
                const Eigen::VectorXd x = pt * eig_rng.normal_vector(3);
                CHECK(x.dot(a * x) < -1e-12 * x.squaredNorm());
            }
        }
        // Both stated forms of A agree.
        for (double t : {0.1, 0.6}) {
            const Eigen::MatrixXd me = sol.M(t) * sol.eta(t);
            CHECK((me - symmetrize(me)).norm() < 1e-10);
            CHECK((sol.A(t) - me).norm() < 1e-10);
        }
    }

    SUBCASE("sigma_dbl interpolates between the sharpened posterior and sigma") {
        const PolicySolution sol = PolicySolution::solve(law, 5.0, 32);
        for (double t : {0.0, 0.4, 0.9}) {
            const Eigen::MatrixXd sd = sol.sigma_dbl(t);
            CHECK_NOTHROW(CholeskyFactor::compute(sd));
            CHECK(is_psd(law.sigma() - sd));  // sigma_dbl(t) <= sigma
        }
        CHECK(is_psd(sol.sigma_dbl(0.5) - sol.sigma_dbl(0.0)));
    }

    SUBCASE("every eigenvalue of M grows when views sharpen") {
        // M is a product of symmetric matrices, so it has real nonnegative
        // eigenvalues but is not itself symmetric; sharpening the views moves
        // every (sorted) eigenvalue up.
        const MarketModel market = reference_market();
        const Eigen::MatrixXd p = reference_pick_matrix();
        const auto sorted_eigs = [](const Eigen::MatrixXd& m) {
            Eigen::VectorXd ev = m.eigenvalues().real();
            std::sort(ev.data(), ev.data() + ev.size());
            return ev;
        };
        for (double kappa : {0.5, 0.25}) {
            const ViewSet base = ViewSet::make(p, make_omega_alpha(market, p, 0.4), 0.0, 1.0);
            const ViewSet sharp =
                ViewSet::make(p, kappa * make_omega_alpha(market, p, 0.4), 0.0, 1.0);
            Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
            const PolicySolution sol_base =
                PolicySolution::solve(ConditionalLaw::build(market, base, y), 5.0, 16);
            const PolicySolution sol_sharp =
                PolicySolution::solve(ConditionalLaw::build(market, sharp, y), 5.0, 16);
            for (double t : {0.0, 0.25, 0.5}) {
                const Eigen::VectorXd eb = sorted_eigs(sol_base.M(t));
                const Eigen::VectorXd es = sorted_eigs(sol_sharp.M(t));
                for (Eigen::Index i = 0; i < eb.size(); ++i) CHECK(es(i) >= eb(i) - 1e-12);
            }
        }
    }

    SUBCASE("b(t) satisfies its ODE to 1e-4 on a 50-point grid") {
        const PolicySolution sol = PolicySolution::solve(law, 5.0, 64);
        const double gamma = 5.0, h = 1e-6, T = law.horizon();
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(5);
        for (int i = 0; i < 50; ++i) {
            const double t = 2 * h + (T - 4 * h) * i / 49.0;
            const Eigen::VectorXd db = (sol.b(t + h) - sol.b(t - h)) / (2 * h);
            const Eigen::MatrixXd a = sol.A(t);
            const Eigen::MatrixXd eta = sol.eta(t);
            const Eigen::VectorXd q = sol.alpha(t) - law.r_f() * ones;
            const Eigen::VectorXd res = db + (eta + a) * (law.sigma() * sol.b(t)) / gamma +
                                        (1.0 - gamma) / gamma * ((eta + a) * q) +
                                        a * (sol.alpha(t) - 0.5 * law.sigma().diagonal());
            CHECK(res.norm() < 1e-4);
        }
    }
}

TEST_CASE("dynamic policy weights") {
    const ConditionalLaw law = reference_law();
    const PolicySolution sol = PolicySolution::solve(law, 5.0, 64);

    SUBCASE("hedging vanishes at the horizon") {
        const Eigen::VectorXd x = law.cond_mean(1.0);
        const PolicyWeights w = dynamic_policy_weights(sol, 1.0, x);
        CHECK(w.hedging.norm() == 0.0);
    }

    SUBCASE("uninformative views collapse to the Merton policy") {
        const MarketModel market = reference_market();
        const Eigen::MatrixXd p = reference_pick_matrix();
        const ViewSet views =
            ViewSet::make(p, 1e9 * make_omega_alpha(market, p, 1.0), 0.0, market.horizon());
        Eigen::VectorXd y(3);
        y << 0.1, 0.1, 0.1;
        const PolicySolution wide =
            PolicySolution::solve(ConditionalLaw::build(market, views, y), 5.0, 16);
        const Eigen::VectorXd merton =
            market.chol().solve(market.mu() - market.r_f() * Eigen::VectorXd::Ones(5)) / 5.0;
        Rng rng(9);
        for (int i = 0; i < 5; ++i) {
            const double t = rng.uniform();
            const PolicyWeights w = dynamic_policy_weights(wide, t, 0.1 * rng.normal_vector(5));
            CHECK((w.total - merton).norm() < 1e-3);
        }
    }

    SUBCASE("hedging demand grows as view noise shrinks") {
        const ConditionalLaw law_precise = reference_law(0.4);
        const ConditionalLaw law_noisy = reference_law(0.8);
        const PolicySolution s1 = PolicySolution::solve(law_precise, 5.0, 32);
        const PolicySolution s2 = PolicySolution::solve(law_noisy, 5.0, 32);
        const double t = 0.25;
        const Eigen::VectorXd x = law_precise.cond_mean(t);
        CHECK(dynamic_policy_weights(s1, t, x).hedging.norm() >=
              dynamic_policy_weights(s2, t, x).hedging.norm());
    }

    SUBCASE("decomposition and effective-covariance forms agree pathwise") {
        Rng rng(10);
        for (int i = 0; i < 50; ++i) {
            const double t = law.horizon() * rng.uniform();
            const Eigen::VectorXd x =
                law.cond_mean(t) + psd_sqrt(law.cond_cov(t, t)) * rng.normal_vector(5);
            const PolicyWeights w = dynamic_policy_weights(sol, t, x);
            const Eigen::VectorXd excess =
                law.drift(t, x) - law.r_f() * Eigen::VectorXd::Ones(5);
            const Eigen::VectorXd other =
                CholeskyFactor::compute(sol.sigma_dbl(t)).solve(excess) / 5.0;
            CHECK((other - w.total).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((w.hedging - (sol.A(t) * x + sol.b(t)) / 5.0).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("revisions policy") {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    const Eigen::MatrixXd gram = p * market.sigma() * p.transpose();
    const double T = market.horizon(), gamma = 5.0;
    Eigen::VectorXd y(3);
    y << 0.06, -0.01, 0.03;

    SUBCASE("a schedule with no revisions reproduces the dynamic policy") {
        const RevisionSchedule schedule = RevisionSchedule::make(p, {0.0}, {0.4 * T * gram}, T);
        const ViewSet views = ViewSet::make(p, 0.4 * gram, 0.0, T);
        const PolicySolution base =
            PolicySolution::solve(ConditionalLaw::build(market, views, y), gamma, 32);
        Rng rng(11);
        for (double t : {0.0, 0.3, 0.85}) {
            const Eigen::VectorXd x = 0.1 * rng.normal_vector(5);
            const Eigen::VectorXd a = revisions_policy(schedule, market, gamma, 0, t, x, y);
            const Eigen::VectorXd b = dynamic_policy_weights(base, t, x).total;
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("interval must contain the evaluation time") {
        const RevisionSchedule schedule =
            RevisionSchedule::make(p, {0.0, 0.5}, {0.4 * T * gram, 0.2 * T * gram}, T);
        CHECK_THROWS_AS(revisions_policy(schedule, market, gamma, 0, 0.7, Eigen::VectorXd::Zero(5), y),
                        IntervalMismatch);
        CHECK_THROWS_AS(revisions_policy(schedule, market, gamma, 1, 0.2, Eigen::VectorXd::Zero(5), y),
                        IntervalMismatch);
    }

    SUBCASE("closed-form C matches the continuation recursion at the boundary") {
        const RevisionSchedule schedule =
            RevisionSchedule::make(p, {0.0, 0.5}, {0.4 * T * gram, 0.2 * T * gram}, T);
        const IntervalPolicy first = IntervalPolicy::revisions(schedule, market, gamma, 0);
        const Eigen::MatrixXd continuation = revisions_terminal_C(schedule, market, gamma, 0);
        CHECK((first.C(0.5) - continuation).norm() / continuation.norm() < 1e-9);
    }

    SUBCASE("the two hedging forms agree") {
        const RevisionSchedule schedule =
            RevisionSchedule::make(p, {0.0, 0.5}, {0.4 * T * gram, 0.2 * T * gram}, T);
        Rng rng(12);
        for (int j : {0, 1}) {
            const IntervalPolicy policy = IntervalPolicy::revisions(schedule, market, gamma, j);
            const double t = policy.start() + 0.3 * (policy.end() - policy.start());
            const Eigen::VectorXd xbar = 0.05 * rng.normal_vector(5);
            const PolicyWeights w = policy.weights(t, xbar, y);
            const Eigen::VectorXd grad_form =
                p.transpose() * (policy.C(t) * (y - p * xbar) - policy.chat(t)) / gamma;
            CHECK((w.hedging - grad_form).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("short-term policy") {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd p = reference_pick_matrix();
    const Eigen::MatrixXd gram = p * market.sigma() * p.transpose();
    const double gamma = 5.0;
    Eigen::VectorXd ybar(3);
    ybar << 0.02, 0.01, -0.02;

    SUBCASE("a single interval without autoregression is the base policy") {
        const ShortTermSchedule schedule =
            ShortTermSchedule::make(p, {0.0, 1.0}, {}, {0.4 * gram});
        const ViewSet views = ViewSet::make(p, 0.4 * gram, 0.0, 1.0);
        const PolicySolution base =
            PolicySolution::solve(ConditionalLaw::build(market, views, ybar), gamma, 32);
        Rng rng(13);
        for (double t : {0.0, 0.4, 0.9}) {
            const Eigen::VectorXd x = 0.08 * rng.normal_vector(5);
            const Eigen::VectorXd a = short_term_policy(schedule, market, gamma, 0, t, x, ybar);
            const Eigen::VectorXd b = dynamic_policy_weights(base, t, x).total;
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("hedging vanishes at each interval boundary") {
        const ShortTermSchedule schedule =
            ShortTermSchedule::make(p, {0.0, 0.5, 1.0}, {}, {0.2 * gram, 0.2 * gram});
        for (int j : {0, 1}) {
            const IntervalPolicy policy = IntervalPolicy::short_term(schedule, market, gamma, j);
            CHECK(policy.M(policy.end() - 1e-9).norm() < 1e-6);
            CHECK(policy.C(policy.end()).norm() < 1e-12);  // zero boundary per regime
        }
    }
}

TEST_CASE("multi-horizon policy") {
    const MarketModel market = reference_market();
    const Eigen::MatrixXd picks = reference_pick_matrix();
    const double gamma = 5.0;

    SUBCASE("a single horizon reduces to the dynamic policy") {
        Eigen::MatrixXd row = picks.row(2);
        Eigen::MatrixXd omega(1, 1);
        omega << 0.05;
        Eigen::VectorXd y_raw = Eigen::VectorXd::Constant(1, 0.04);
        const MultiHorizonViews views = MultiHorizonViews::make(
            Eigen::VectorXd::Constant(1, 1.0), row, omega, y_raw);
        const MultiHorizonSolution sol = MultiHorizonSolution::solve(views, market, gamma, 2000);

        const ViewSet single = ViewSet::make(row, omega, 0.0, 1.0);
        const PolicySolution base =
            PolicySolution::solve(ConditionalLaw::build(market, single, y_raw), gamma, 64);
        Rng rng(14);
        for (double t : {0.1, 0.5, 0.9}) {
            const Eigen::VectorXd x = 0.1 * rng.normal_vector(5);
            const Eigen::VectorXd a = sol.weights(1, t, x).total;
            const Eigen::VectorXd b = dynamic_policy_weights(base, t, x).total;
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);
        }
    }

    SUBCASE("the last interval equals a fresh solve with the remaining view") {
        Eigen::VectorXd horizons(2);
        horizons << 0.5, 1.0;
        Eigen::MatrixXd two_picks(2, 5);
        two_picks.row(0) = picks.row(0);
        two_picks.row(1) = picks.row(2);
        Eigen::MatrixXd omega(2, 2);
        omega << 0.06, 0.01, 0.01, 0.05;
        Eigen::VectorXd y_raw(2);
        y_raw << 0.03, 0.05;
        const MultiHorizonViews views = MultiHorizonViews::make(horizons, two_picks, omega, y_raw);
        const MultiHorizonSolution sol = MultiHorizonSolution::solve(views, market, gamma, 2000);

        // On [0.5, 1) only the second view is alive; its collapsed form is the
        // plain canonical view at horizon 1.
        const CollapsedView cv = collapse_multi_horizon(views, market, 2);
        const ViewSet tail = ViewSet::make(cv.P, cv.omega, 0.0, 1.0);
        const PolicySolution base = PolicySolution::solve(
            ConditionalLaw::build(market, tail, y_raw.tail(1) - cv.bias), gamma, 64);
        Rng rng(15);
        for (double t : {0.55, 0.75, 0.95}) {
            const Eigen::VectorXd x = 0.1 * rng.normal_vector(5);
            const Eigen::VectorXd a = sol.weights(2, t, x).total;
            const Eigen::VectorXd b = dynamic_policy_weights(base, t, x).total;
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);
        }
    }

    SUBCASE("stitched Riccati residual stays below 1e-6") {
        Eigen::VectorXd horizons(3);
        horizons << 0.4, 0.7, 1.0;
        const Eigen::MatrixXd omega = 0.3 * (picks * market.sigma() * picks.transpose());
        Eigen::VectorXd y_raw(3);
        y_raw << 0.04, -0.02, 0.05;
        const MultiHorizonViews views = MultiHorizonViews::make(horizons, picks, omega, y_raw);
        const MultiHorizonSolution sol = MultiHorizonSolution::solve(views, market, gamma, 4000);

        // Fourth-order five-point stencil for the derivative so the finite
        // difference does not dominate the integration error.
        const auto& nodes = sol.nodes();
        double worst = 0.0;
        for (std::size_t i = 2; i + 2 < nodes.size(); i += 11) {
            const double t = nodes[i];
            const double h = nodes[i + 1] - nodes[i];
            if (h <= 1e-12) continue;
            bool uniform = true;
            for (std::size_t m = i - 2; m < i + 2; ++m)
                if (std::abs((nodes[m + 1] - nodes[m]) - h) > 1e-12) uniform = false;
            if (!uniform) continue;  // stencil must not straddle an interval boundary
            if (sol.interval_of(nodes[i - 2]) != sol.interval_of(nodes[i + 2])) continue;
            const int j = sol.interval_of(t);
            const Eigen::MatrixXd da =
                (-sol.A_node(i + 2) + 8.0 * sol.A_node(i + 1) - 8.0 * sol.A_node(i - 1) +
                 sol.A_node(i - 2)) /
                (12.0 * h);
            const Eigen::MatrixXd a = sol.A_node(i);
            const Eigen::MatrixXd eta = sol.eta(j, t);
            const Eigen::MatrixXd res = da + (1.0 - gamma) / gamma * eta * market.sigma() * eta +
                                        (a * market.sigma() * eta + eta * market.sigma() * a) / gamma +
                                        a * market.sigma() * a / gamma;
            worst = std::max(worst, res.norm());
        }
        CHECK(worst < 1e-6);
    }

    SUBCASE("interval bounds are enforced") {
        Eigen::VectorXd horizons(2);
        horizons << 0.5, 1.0;
        Eigen::MatrixXd two_picks(2, 5);
        two_picks.row(0) = picks.row(0);
        two_picks.row(1) = picks.row(2);
        Eigen::MatrixXd omega = 0.05 * Eigen::MatrixXd::Identity(2, 2);
        Eigen::VectorXd y_raw(2);
        y_raw << 0.0, 0.0;
        const MultiHorizonViews views = MultiHorizonViews::make(horizons, two_picks, omega, y_raw);
        const MultiHorizonSolution sol = MultiHorizonSolution::solve(views, market, gamma, 200);
        CHECK_THROWS_AS(sol.weights(1, 0.8, Eigen::VectorXd::Zero(5)), IntervalMismatch);
        CHECK_THROWS_AS(sol.weights(3, 0.2, Eigen::VectorXd::Zero(5)), IntervalMismatch);
        CHECK(sol.interval_of(0.2) == 1);
        CHECK(sol.interval_of(0.7) == 2);
    }
}
