#include "dbl/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "dbl/bridge.hpp"
#include "dbl/conditional.hpp"
#include "dbl/gaussian.hpp"
#include "dbl/market.hpp"
#include "dbl/mc.hpp"
#include "dbl/policy.hpp"
#include "dbl/reference.hpp"
#include "dbl/rng.hpp"

namespace dbl::verify {

namespace {

using Clock = std::chrono::steady_clock;

struct Checker {
    std::vector<CheckResult> results;

    void run(const std::string& id, const std::string& name,
             const std::function<std::pair<bool, std::string>()>& body) {
        CheckResult r;
        r.id = id;
        r.name = name;
        const auto start = Clock::now();
        try {
            auto [pass, detail] = body();
            r.pass = pass;
            r.detail = detail;
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        results.push_back(std::move(r));
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n, double jitter = 0.5) {
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
    return symmetrize(a * a.transpose() / static_cast<double>(n) +
                      jitter * Eigen::MatrixXd::Identity(n, n));
}

struct ReferenceSetup {
    MarketModel market = reference_market();
    Eigen::MatrixXd P = reference_pick_matrix();

    ConditionalLaw law(double alpha, std::uint64_t seed) const {
        const Eigen::MatrixXd omega = make_omega_alpha(market, P, alpha);
        const ViewSet views = ViewSet::make(P, omega, 0.0, market.horizon());
        // A representative realized view: sample a prior terminal state and a
        // noisy observation of it.
        Rng rng(seed);
        std::vector<double> grid{market.horizon()};
        const Eigen::MatrixXd x = mc::sample_prior_path(market, grid, rng);
        const Eigen::VectorXd y = sample_view(market, views, x.row(0).transpose(), Rng::derive(seed, 7));
        return ConditionalLaw::build(market, views, y);
    }
};

// --- criterion 1 -----------------------------------------------------------

std::pair<bool, std::string> check_conditioning_oracle(const Options& opt) {
    Rng rng(opt.seed);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 7) % 7;   // 2..8
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.uniform() * 4) % 4;   // 1..4
        const double T = 0.5 + 1.5 * rng.uniform();
        const double t = T * (0.05 + 0.9 * rng.uniform());

        const Eigen::MatrixXd sigma = random_spd(rng, n);
        Eigen::VectorXd mu(n);
        for (Eigen::Index i = 0; i < n; ++i) mu(i) = 0.1 * rng.normal();
        Eigen::MatrixXd p(k, n);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < n; ++j) p(i, j) = rng.normal();
        const Eigen::MatrixXd omega = random_spd(rng, k, 0.2);
        Eigen::VectorXd y(k);
        for (Eigen::Index i = 0; i < k; ++i) y(i) = 0.3 * rng.normal();

        const MarketModel market = MarketModel::make(mu, sigma, 0.02, T);
        const ViewSet views = ViewSet::make(p, omega, 0.0, T);
        const ConditionalLaw law = ConditionalLaw::build(market, views, y);

        // Oracle: explicit joint of (X(t), Y) conditioned with gaussian_core.
        GaussianVector joint;
        joint.mean = Eigen::VectorXd(n + k);
        joint.mean << t * market.log_drift(), T * (p * market.log_drift());
        joint.cov = Eigen::MatrixXd(n + k, n + k);
        joint.cov.topLeftCorner(n, n) = t * sigma;
        joint.cov.topRightCorner(n, k) = t * sigma * p.transpose();
        joint.cov.bottomLeftCorner(k, n) = t * p * sigma;
        joint.cov.bottomRightCorner(k, k) = T * (p * sigma * p.transpose() + omega);
        joint.cov = symmetrize(joint.cov);
        std::vector<Eigen::Index> observed;
        for (Eigen::Index i = 0; i < k; ++i) observed.push_back(n + i);
        const GaussianVector post = condition(joint, observed, y);

        worst = std::max(worst, (post.mean - law.cond_mean(t)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (post.cov - law.cond_cov(t, t)).cwiseAbs().maxCoeff());
    }
    return {worst < 1e-10, "max-norm error " + fmt(worst) + " over 20 random instances"};
}

// --- criterion 2 -----------------------------------------------------------

std::pair<bool, std::string> check_kalman_smoother(const Options& opt) {
    const ReferenceSetup ref;
    const Eigen::MatrixXd omega = make_omega_alpha(ref.market, ref.P, 0.4);
    const ViewSet views = ViewSet::make(ref.P, omega, 0.0, ref.market.horizon());
    Rng rng(opt.seed + 2);
    std::vector<double> grid{ref.market.horizon()};
    const Eigen::MatrixXd x = mc::sample_prior_path(ref.market, grid, rng);
    const Eigen::VectorXd y =
        sample_view(ref.market, views, x.row(0).transpose(), Rng::derive(opt.seed, 2));

    const ConditionalLaw law = ConditionalLaw::build(ref.market, views, y);
    const SmoothedMoments sm = kalman_smoother_oracle(ref.market, views, y, 64);
    double worst = 0.0;
    for (std::size_t i = 0; i < sm.times.size(); ++i) {
        const double t = sm.times[i];
        worst = std::max(worst, (sm.means[i] - law.cond_mean(t)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (sm.covs[i] - law.cond_cov(t, t)).cwiseAbs().maxCoeff());
    }
    return {worst < 1e-8, "max deviation " + fmt(worst) + " across 65 grid points"};
}

// --- criterion 3 -----------------------------------------------------------

std::pair<bool, std::string> check_riccati_residual(const Options& opt) {
    const ReferenceSetup ref;
    const double T = ref.market.horizon();
    double worst_a = 0.0, worst_b = 0.0;
    const double h = 1e-6;
    int case_id = 0;
    for (double alpha : {0.4, 0.8}) {
        for (double gamma : {2.0, 5.0}) {
            const ConditionalLaw law = ref.law(alpha, opt.seed + 30 + case_id++);
            const PolicySolution sol = PolicySolution::solve(law, gamma, 64);
            const Eigen::VectorXd ones = Eigen::VectorXd::Ones(law.n_assets());
            for (int i = 0; i < 50; ++i) {
                const double t = 2 * h + (T - 4 * h) * i / 49.0;
                const Eigen::MatrixXd a = sol.A(t);
                const Eigen::MatrixXd da = (sol.A(t + h) - sol.A(t - h)) / (2 * h);
                const Eigen::MatrixXd eta = sol.eta(t);
                const Eigen::MatrixXd res_a =
                    da + (1.0 - gamma) / gamma * eta * law.sigma() * eta +
                    (a * law.sigma() * eta + eta * law.sigma() * a) / gamma +
                    a * law.sigma() * a / gamma;
                worst_a = std::max(worst_a, res_a.norm());

                const Eigen::VectorXd db = (sol.b(t + h) - sol.b(t - h)) / (2 * h);
                const Eigen::VectorXd bv = sol.b(t);
                const Eigen::VectorXd q = sol.alpha(t) - law.r_f() * ones;
                const Eigen::VectorXd res_b =
                    db + (eta + a) * (law.sigma() * bv) / gamma + (1.0 - gamma) / gamma * ((eta + a) * q) +
                    a * (sol.alpha(t) - 0.5 * law.sigma().diagonal());
                worst_b = std::max(worst_b, res_b.norm());
            }
        }
    }
    const bool pass = worst_a < 1e-4 && worst_b < 1e-4;
    return {pass, "max residuals: Riccati " + fmt(worst_a) + ", linear ODE " + fmt(worst_b)};
}

// --- criterion 4 -----------------------------------------------------------

std::pair<bool, std::string> check_policy_forms(const Options& opt) {
    const ReferenceSetup ref;
    const ConditionalLaw law = ref.law(0.4, opt.seed + 4);
    const PolicySolution sol = PolicySolution::solve(law, 5.0, 64);
    Rng rng(opt.seed + 40);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double t = law.horizon() * rng.uniform();
        const Eigen::VectorXd x =
            law.cond_mean(t) + psd_sqrt(law.cond_cov(t, t)) * rng.normal_vector(law.n_assets());
        const PolicyWeights w = dynamic_policy_weights(sol, t, x);
        const Eigen::VectorXd excess =
            law.drift(t, x) - law.r_f() * Eigen::VectorXd::Ones(law.n_assets());
        const Eigen::VectorXd markowitz =
            CholeskyFactor::compute(sol.sigma_dbl(t), "verify").solve(excess) / sol.gamma();
        worst = std::max(worst, (markowitz - w.total).cwiseAbs().maxCoeff());
        // Gradient form of the hedge must match as well.
        const Eigen::VectorXd grad_form = (sol.A(t) * x + sol.b(t)) / sol.gamma();
        worst = std::max(worst, (grad_form - w.hedging).cwiseAbs().maxCoeff());
    }
    return {worst < 1e-10, "max policy-form gap " + fmt(worst) + " over 100 states"};
}

// --- criterion 5 -----------------------------------------------------------

std::pair<bool, std::string> check_hitting_times(const Options&) {
    std::ostringstream detail;
    bool pass = true;

    {  // one-dimensional: hitting time T (1 + omega^2 / sigma^2)
        const double sigma2 = 0.04, omega2 = 0.1, T = 2.0;
        Eigen::MatrixXd s(1, 1), p(1, 1), om(1, 1);
        s << sigma2;
        p << 1.0;
        om << omega2;
        Eigen::VectorXd a = Eigen::VectorXd::Zero(1), y = Eigen::VectorXd::Constant(1, 0.3);
        const BridgeLaw law = BridgeLaw::build(BridgeSpec::make(a, s, p, om, T, y));
        const double expected = T * (1.0 + omega2 / sigma2);
        if (std::abs(law.hitting_times()(0) - expected) > 1e-12 * expected) pass = false;
        detail << "1d: " << law.hitting_times()(0) << " vs " << expected;
    }

    {  // two correlated assets, one noisy view on the second
        const double rho = 0.5, T = 10.0, noise_var = 4.0;
        Eigen::MatrixXd s(2, 2);
        s << 1.0, rho, rho, 1.0;
        Eigen::MatrixXd p(1, 2);
        p << 0.0, 1.0;
        Eigen::MatrixXd om(1, 1);
        om << noise_var / T;  // per-unit-time, total noise_var
        Eigen::VectorXd a = Eigen::VectorXd::Zero(2), y = Eigen::VectorXd::Constant(1, 1.0);
        const BridgeLaw law = BridgeLaw::build(BridgeSpec::make(a, s, p, om, T, y));
        const double t2 = T + noise_var;            // 14
        const double t1 = (T + noise_var) / (rho * rho);
        if (std::abs(law.hitting_times()(1) - t2) > 1e-10) pass = false;
        if (std::abs(law.hitting_times()(0) - t1) > 1e-10) pass = false;
        detail << "; 2d: [" << law.hitting_times()(0) << ", " << law.hitting_times()(1) << "]";
    }

    {  // monotonicity: doubling the noise strictly delays every hitting time
        const ReferenceSetup ref;
        const Eigen::MatrixXd omega = make_omega_alpha(ref.market, ref.P, 0.4);
        Eigen::VectorXd a = Eigen::VectorXd::Zero(5), y = Eigen::VectorXd::Zero(3);
        const BridgeSpec spec =
            BridgeSpec::make(a, ref.market.sigma(), ref.P, omega, ref.market.horizon(), y);
        if (!hitting_time_monotonicity_check(spec, 2.0 * omega)) pass = false;
        const BridgeLaw base = BridgeLaw::build(spec);
        BridgeSpec doubled = spec;
        doubled.omega = 2.0 * omega;
        const BridgeLaw grown = BridgeLaw::build(doubled);
        for (Eigen::Index i = 0; i < 5; ++i) {
            if (!(grown.hitting_times()(i) > base.hitting_times()(i) + 1e-12)) pass = false;
            if (!(grown.whitened_hitting_times()(i) > base.whitened_hitting_times()(i) + 1e-12))
                pass = false;
        }
        detail << "; monotone under 2*omega";
    }
    return {pass, detail.str()};
}

// --- criterion 6 -----------------------------------------------------------

std::pair<bool, std::string> check_bridge_distribution(const Options& opt) {
    const ReferenceSetup ref;
    const double T = ref.market.horizon();
    const Eigen::MatrixXd omega = make_omega_alpha(ref.market, ref.P, 0.4);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(5);
    Eigen::VectorXd y(3);
    y << 0.05, -0.02, 0.04;
    const BridgeSpec spec = BridgeSpec::make(a, ref.market.sigma(), ref.P, omega, T, y);
    const BridgeLaw law = BridgeLaw::build(spec);

    const double s = T / 3.0, t = 2.0 * T / 3.0;
    const int n_paths = 100000;
    const std::vector<double> grid{s, t};
    const Eigen::MatrixXd l_inv_t =
        law.chol_lower().triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(5, 5));

    const auto moments = [&](SdeScheme scheme, const std::vector<double>& g, int at_s, int at_t) {
        const auto paths = sample_bridge_paths(law, g, n_paths, opt.seed + 6, scheme);
        Eigen::MatrixXd bs(n_paths, 5), bt(n_paths, 5);
        for (int p = 0; p < n_paths; ++p) {
            bs.row(p) = paths[static_cast<std::size_t>(p)].row(at_s);
            bt.row(p) = paths[static_cast<std::size_t>(p)].row(at_t);
        }
        // Whitened residuals at s and t.
        Eigen::MatrixXd ws = (bs.rowwise() - law.mean(s).transpose()) * l_inv_t.transpose();
        Eigen::MatrixXd wt = (bt.rowwise() - law.mean(t).transpose()) * l_inv_t.transpose();
        return std::make_pair(ws, wt);
    };

    const auto check_moments = [&](const Eigen::MatrixXd& ws, const Eigen::MatrixXd& wt,
                                   double& worst_sigmas) {
        const double n = static_cast<double>(ws.rows());
        // Var of Bbar_i(t) and cross-cov Bbar_i(t), Bbar_j(s).
        for (Eigen::Index i = 0; i < 5; ++i) {
            const double expect = t - t * t * law.H()(i, i);
            const Eigen::ArrayXd ci = wt.col(i).array() - wt.col(i).mean();
            const double sample = (ci * ci).sum() / (n - 1);
            const double se = expect * std::sqrt(2.0 / (n - 1));
            worst_sigmas = std::max(worst_sigmas, std::abs(sample - expect) / se);
        }
        for (Eigen::Index i = 0; i < 5; ++i) {
            for (Eigen::Index j = 0; j < 5; ++j) {
                if (i == j) continue;
                const double expect = -s * t * law.H()(i, j);
                const Eigen::ArrayXd ci = wt.col(i).array() - wt.col(i).mean();
                const Eigen::ArrayXd cj = ws.col(j).array() - ws.col(j).mean();
                const double sample = (ci * cj).sum() / (n - 1);
                const double var_i = (ci * ci).sum() / (n - 1);
                const double var_j = (cj * cj).sum() / (n - 1);
                const double se = std::sqrt((var_i * var_j + sample * sample) / n);
                worst_sigmas = std::max(worst_sigmas, std::abs(sample - expect) / se);
            }
        }
    };

    double worst_exact = 0.0;
    const auto [ws_exact, wt_exact] = moments(SdeScheme::Exact, grid, 0, 1);
    check_moments(ws_exact, wt_exact, worst_exact);

    // Euler at step 1e-3 must land on the same distribution.
    std::vector<double> fine;
    const double dt = 1e-3;
    for (double u = dt; u < t - dt / 2; u += dt) fine.push_back(u);
    fine.push_back(t);
    int at_s = 0;
    double best = 1e9;
    for (std::size_t i = 0; i < fine.size(); ++i)
        if (std::abs(fine[i] - s) < best) {
            best = std::abs(fine[i] - s);
            at_s = static_cast<int>(i);
        }
    const double s_euler = fine[static_cast<std::size_t>(at_s)];
    double worst_euler = 0.0;
    {
        const auto paths = sample_bridge_paths(law, fine, n_paths, opt.seed + 66, SdeScheme::Euler);
        Eigen::MatrixXd ws(n_paths, 5), wt(n_paths, 5);
        for (int p = 0; p < n_paths; ++p) {
            ws.row(p) = paths[static_cast<std::size_t>(p)].row(at_s);
            wt.row(p) = paths[static_cast<std::size_t>(p)].row(static_cast<Eigen::Index>(fine.size()) - 1);
        }
        Eigen::MatrixXd wws = (ws.rowwise() - law.mean(s_euler).transpose()) * l_inv_t.transpose();
        Eigen::MatrixXd wwt = (wt.rowwise() - law.mean(t).transpose()) * l_inv_t.transpose();
        check_moments(wws, wwt, worst_euler);
    }

    const bool pass = worst_exact < 3.0 && worst_euler < 3.0;
    return {pass, "max |z|: exact " + fmt(worst_exact) + ", euler " + fmt(worst_euler) +
                      " (3-sigma bands, 1e5 paths)"};
}

// --- criterion 7 -----------------------------------------------------------

std::pair<bool, std::string> check_semigroup(const Options& opt) {
    // beta2(u) (I - (u-s) beta2(s)) = beta2(s): the factor I - (u-s) beta2(s)
    // is the exact propagator of the conditional mean deviation from s to u
    // (in one dimension beta2(t) = 1/(Ttilde - t), and the product telescopes).
    const ReferenceSetup ref;
    const ConditionalLaw law = ref.law(0.4, opt.seed + 7);
    Rng rng(opt.seed + 70);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(5, 5);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        double s = law.horizon() * rng.uniform() * 0.999;
        double u = s + (law.horizon() * 0.9999 - s) * rng.uniform();
        const Eigen::MatrixXd lhs = law.beta2(u) * (eye - (u - s) * law.beta2(s));
        worst = std::max(worst, (lhs - law.beta2(s)).norm());
    }
    return {worst < 1e-9, "max semigroup defect " + fmt(worst) + " over 100 (s,u) pairs"};
}

// --- criterion 8 -----------------------------------------------------------

std::pair<bool, std::string> check_structural_equality(const Options& opt) {
    const ReferenceSetup ref;
    const double T = ref.market.horizon();
    const Eigen::MatrixXd gram = ref.P * ref.market.sigma() * ref.P.transpose();
    Rng rng(opt.seed + 8);
    double worst_rev = 0.0, worst_short = 0.0;

    {  // revisions: interval 0 of a {0, T/2} schedule vs the plain dynamic policy
        const double alpha = 0.4;
        const Eigen::MatrixXd omega0 = T * alpha * gram;        // total over [0, T]
        const Eigen::MatrixXd omega1 = (T / 2) * alpha * gram;  // total over [T/2, T]
        const RevisionSchedule schedule =
            RevisionSchedule::make(ref.P, {0.0, T / 2}, {omega0, omega1}, T);
        Eigen::VectorXd y(3);
        y << 0.06, -0.01, 0.03;

        const ViewSet views = ViewSet::make(ref.P, omega0 / T, 0.0, T);  // same total noise
        const ConditionalLaw law = ConditionalLaw::build(ref.market, views, y);
        const PolicySolution base = PolicySolution::solve(law, 5.0, 64);
        const IntervalPolicy interval = IntervalPolicy::revisions(schedule, ref.market, 5.0, 0);
        for (int i = 0; i < 10; ++i) {
            const double t = (T / 2) * i / 10.0;
            const Eigen::VectorXd x = 0.1 * rng.normal_vector(5);
            const Eigen::VectorXd a = interval.weights(t, x, y).total;
            const Eigen::VectorXd b = dynamic_policy_weights(base, t, x).total;
            worst_rev = std::max(worst_rev, (a - b).cwiseAbs().maxCoeff());
        }
    }

    {  // short-term: interval policy vs a fresh solve over [T_j, T_{j+1}]
        const double alpha = 0.4;
        std::vector<Eigen::MatrixXd> idio{(T / 2) * alpha * gram, (T / 2) * alpha * gram};
        const ShortTermSchedule schedule = ShortTermSchedule::make(ref.P, {0.0, T / 2, T}, {}, idio);
        Eigen::VectorXd ybar(3);
        ybar << 0.02, 0.01, -0.02;
        for (int j = 0; j < 2; ++j) {
            const double start = schedule.times()[static_cast<std::size_t>(j)];
            const double span = schedule.times()[static_cast<std::size_t>(j) + 1] - start;
            const IntervalPolicy interval = IntervalPolicy::short_term(schedule, ref.market, 5.0, j);
            const MarketModel shifted =
                MarketModel::make(ref.market.mu(), ref.market.sigma(), ref.market.r_f(), span);
            const ViewSet views =
                ViewSet::make(ref.P, idio[static_cast<std::size_t>(j)] / span, 0.0, span);
            const PolicySolution base =
                PolicySolution::solve(ConditionalLaw::build(shifted, views, ybar), 5.0, 64);
            for (int i = 0; i < 10; ++i) {
                const double local = span * i / 10.0;
                const Eigen::VectorXd x = 0.05 * rng.normal_vector(5);
                const Eigen::VectorXd a = interval.weights(start + local, x, ybar).total;
                const Eigen::VectorXd b = dynamic_policy_weights(base, local, x).total;
                worst_short = std::max(worst_short, (a - b).cwiseAbs().maxCoeff());
            }
        }
    }
    const bool pass = worst_rev < 1e-12 && worst_short < 1e-12;
    return {pass, "max gaps: revisions " + fmt(worst_rev) + ", short-term " + fmt(worst_short)};
}

// --- criterion 9 -----------------------------------------------------------

std::pair<bool, std::string> check_mc_orderings(const Options& opt) {
    const ReferenceSetup ref;
    mc::ComparisonConfig cc;
    cc.alphas = {0.4, 0.8};
    cc.gammas = {2.0, 5.0};
    cc.plans = {mc::RebalancePlan::periodic(1.0 / 252), mc::RebalancePlan::periodic(1.0 / 52),
                mc::RebalancePlan::periodic(1.0 / 12)};
    cc.n_paths = opt.mc_paths;
    cc.seed = opt.seed + 9;
    cc.threads = opt.threads;
    cc.keep_paths = true;
    const mc::ComparisonReport rep = mc::run_comparison(ref.market, ref.P, cc);

    const auto row_index = [&](const std::string& policy, double alpha, double gamma,
                               const std::string& plan) -> std::size_t {
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const auto& r = rep.rows[i];
            if (r.policy == policy && std::abs(r.alpha - alpha) < 1e-12 &&
                std::abs(r.gamma - gamma) < 1e-12 && r.plan == plan)
                return i;
        }
        throw NumericalFailure("verify", "missing comparison row");
    };

    bool pass = true;
    std::ostringstream detail;
    // Paired per-path differences: the whole point of common random numbers
    // is that policies are compared pathwise, so the band is on the paired
    // difference estimate.
    for (double alpha : cc.alphas) {
        for (double gamma : cc.gammas) {
            const std::size_t d = row_index("DBL", alpha, gamma, "weekly");
            const std::size_t c = row_index("RCBL", alpha, gamma, "weekly");
            const mc::Estimate gap = mc::paired_cer_difference(rep.wealth_per_row[d],
                                                               rep.wealth_per_row[c], gamma, 1.0);
            const bool ok = gap.value - 2 * gap.se > 0.0;
            if (!ok) pass = false;
            detail << "cer gap(a=" << alpha << ",g=" << gamma << ")=" << fmt(gap.value) << "+-"
                   << fmt(gap.se) << (ok ? " ok; " : " FAIL; ");
        }
    }
    {
        const std::size_t d = row_index("DBL", 0.4, 5.0, "weekly");
        const std::size_t c = row_index("RCBL", 0.4, 5.0, "weekly");
        std::vector<double> diff(rep.turnover_per_row[d].size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = rep.turnover_per_row[c][i] - rep.turnover_per_row[d][i];
        const mc::Estimate gap = mc::mean_estimate(diff);
        const bool ok = gap.value - 3 * gap.se > 0.0;
        if (!ok) pass = false;
        detail << "turnover gap=" << fmt(gap.value) << "+-" << fmt(gap.se) << (ok ? " ok; " : " FAIL; ");
    }
    {
        const double d_spread = std::abs(rep.rows[row_index("DBL", 0.4, 5.0, "daily")].cer -
                                         rep.rows[row_index("DBL", 0.4, 5.0, "monthly")].cer);
        const double c_spread = std::abs(rep.rows[row_index("RCBL", 0.4, 5.0, "daily")].cer -
                                         rep.rows[row_index("RCBL", 0.4, 5.0, "monthly")].cer);
        const bool ok = d_spread < c_spread;
        if (!ok) pass = false;
        detail << "spread " << fmt(d_spread) << "<" << fmt(c_spread) << (ok ? " ok" : " FAIL");
    }
    return {pass, detail.str()};
}

// --- criterion 10 ----------------------------------------------------------

std::pair<bool, std::string> check_revision_orderings(const Options& opt) {
    const ReferenceSetup ref;
    mc::RevisionConfig rc;
    rc.alphas = {0.4, 0.6, 0.8, 1.2, 1.6, 2.0};
    rc.gammas = {5.0};
    rc.plan = mc::RebalancePlan::periodic(1.0 / 52);
    rc.n_paths = opt.mc_paths;
    rc.seed = opt.seed + 10;
    rc.threads = opt.threads;
    rc.keep_paths = true;
    const mc::ComparisonReport rep = mc::run_revision_comparison(ref.market, ref.P, rc);

    const auto row_index = [&](const std::string& investor, double alpha) -> std::size_t {
        for (std::size_t i = 0; i < rep.rows.size(); ++i)
            if (rep.rows[i].policy == investor && std::abs(rep.rows[i].alpha - alpha) < 1e-12) return i;
        throw NumericalFailure("verify", "missing revision row");
    };

    bool pass = true;
    std::ostringstream detail;
    {
        const std::size_t q = row_index("quarterly", 0.6);
        const std::size_t s = row_index("single", 0.6);
        const std::size_t n = row_index("none", 0.6);
        const mc::Estimate gap_qs =
            mc::paired_cer_difference(rep.wealth_per_row[q], rep.wealth_per_row[s], 5.0, 1.0);
        const mc::Estimate gap_sn =
            mc::paired_cer_difference(rep.wealth_per_row[s], rep.wealth_per_row[n], 5.0, 1.0);
        const bool ok1 = gap_qs.value - 2 * gap_qs.se > 0.0;
        const bool ok2 = gap_sn.value - 2 * gap_sn.se > 0.0;
        if (!(ok1 && ok2)) pass = false;
        detail << "cer@0.6: " << fmt(rep.rows[q].cer) << " > " << fmt(rep.rows[s].cer) << " > "
               << fmt(rep.rows[n].cer) << ((ok1 && ok2) ? " ok; " : " FAIL; ");
    }
    {
        std::vector<double> alphas{0.4, 0.8, 1.2, 1.6, 2.0};
        std::vector<double> gaps;
        for (double a : alphas)
            gaps.push_back(rep.rows[row_index("quarterly", a)].cer - rep.rows[row_index("none", a)].cer);
        const double rho = spearman(alphas, gaps);
        const bool ok = rho <= -0.9;
        if (!ok) pass = false;
        detail << "gap trend spearman " << fmt(rho) << (ok ? " ok" : " FAIL");
    }
    return {pass, detail.str()};
}

// --- criterion 11 ----------------------------------------------------------

std::pair<bool, std::string> check_limits(const Options& opt) {
    const ReferenceSetup ref;
    Rng rng(opt.seed + 11);
    double worst_merton = 0.0, worst_hedge = 0.0;

    {  // uninformative views: the policy collapses to the Merton baseline
        const Eigen::MatrixXd omega = 1e9 * make_omega_alpha(ref.market, ref.P, 0.4);
        const ViewSet views = ViewSet::make(ref.P, omega, 0.0, ref.market.horizon());
        Eigen::VectorXd y(3);
        y << 0.05, -0.03, 0.02;
        const ConditionalLaw law = ConditionalLaw::build(ref.market, views, y);
        const PolicySolution sol = PolicySolution::solve(law, 5.0, 64);
        const Eigen::VectorXd merton =
            ref.market.chol().solve(ref.market.mu() -
                                    ref.market.r_f() * Eigen::VectorXd::Ones(5)) /
            5.0;
        for (int i = 0; i < 20; ++i) {
            const double t = law.horizon() * rng.uniform();
            const Eigen::VectorXd x =
                law.cond_mean(t) + psd_sqrt(law.cond_cov(t, t)) * rng.normal_vector(5);
            const PolicyWeights w = dynamic_policy_weights(sol, t, x);
            worst_merton = std::max(worst_merton, (w.total - merton).norm());
        }
    }

    {  // near-log utility: no hedging demand
        const ConditionalLaw law = ref.law(0.4, opt.seed + 111);
        const PolicySolution sol = PolicySolution::solve(law, 1.0 + 1e-8, 64);
        for (int i = 0; i < 20; ++i) {
            const double t = law.horizon() * rng.uniform();
            const Eigen::VectorXd x =
                law.cond_mean(t) + psd_sqrt(law.cond_cov(t, t)) * rng.normal_vector(5);
            const PolicyWeights w = dynamic_policy_weights(sol, t, x);
            worst_hedge = std::max(worst_hedge, w.hedging.norm());
            worst_hedge = std::max(worst_hedge, sol.M(t).norm());
        }
    }
    const bool pass = worst_merton < 1e-3 && worst_hedge < 1e-6;
    return {pass, "merton gap " + fmt(worst_merton) + ", hedging norm " + fmt(worst_hedge)};
}

void add_quick(Checker& checker, const Options& opt) {
    checker.run("1", "gaussian conditioning matches the closed-form conditional law",
                [&] { return check_conditioning_oracle(opt); });
    checker.run("2", "kalman smoother reproduces the conditional moments",
                [&] { return check_kalman_smoother(opt); });
    checker.run("3", "closed-form A(t), b(t) satisfy their ODEs",
                [&] { return check_riccati_residual(opt); });
    checker.run("4", "policy decomposition equals the effective-covariance form",
                [&] { return check_policy_forms(opt); });
    checker.run("5", "bridge hitting times (1d, 2d, monotonicity)",
                [&] { return check_hitting_times(opt); });
    checker.run("7", "mean-reversion semigroup identity", [&] { return check_semigroup(opt); });
    checker.run("8", "per-interval policies equal fresh dynamic solves",
                [&] { return check_structural_equality(opt); });
    checker.run("11", "uninformative-view and log-utility limits", [&] { return check_limits(opt); });
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    const auto ranks = [n](const std::vector<double>& v) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[order[i]] = static_cast<double>(i);
        return r;
    };
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    const double dn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (dn * (dn * dn - 1.0));
}

std::vector<CheckResult> run_quick(const Options& options) {
    Checker checker;
    add_quick(checker, options);
    return checker.results;
}

std::vector<CheckResult> run_full(const Options& options) {
    Checker checker;
    add_quick(checker, options);
    checker.run("6", "bridge sampler reproduces closed-form moments",
                [&] { return check_bridge_distribution(options); });
    checker.run("9", "monte-carlo orderings: frontier, turnover, frequency robustness",
                [&] { return check_mc_orderings(options); });
    checker.run("10", "revision-value orderings and alpha trend",
                [&] { return check_revision_orderings(options); });
    return checker.results;
}

}  // namespace dbl::verify
