#include "dbl/policy.hpp"

#include <algorithm>
#include <cmath>

namespace dbl {

namespace {
constexpr const char* kModule = "policy_engine";

Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& spd, const Eigen::MatrixXd& rhs) {
    return CholeskyFactor::compute(spd, kModule).solve(rhs);
}

/// Linear interpolation on an ascending grid.
double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return (1.0 - w) * ys[lo] + w * ys[hi];
}

}  // namespace

ClassicalBLPosterior classical_bl(const MarketModel& market, const Eigen::MatrixXd& P,
                                  const Eigen::MatrixXd& omega, const Eigen::VectorXd& y) {
    if (P.cols() != market.n_assets()) throw ShapeMismatch(kModule, "pick matrix columns must match assets");
    if (omega.rows() != P.rows() || omega.cols() != P.rows())
        throw ShapeMismatch(kModule, "omega must be K x K");
    if (y.size() != P.rows()) throw ShapeMismatch(kModule, "view vector length mismatch");

    CholeskyFactor omega_chol = [&] {
        try {
            return CholeskyFactor::compute(omega, kModule);
        } catch (const NotPositiveDefinite&) {
            throw SingularOmega(kModule, "view covariance is not invertible");
        }
    }();

    const Eigen::Index n = market.n_assets();
    const Eigen::MatrixXd omega_inv_p = omega_chol.solve(P);
    const Eigen::MatrixXd precision =
        symmetrize(market.chol().solve(Eigen::MatrixXd::Identity(n, n)) + P.transpose() * omega_inv_p);
    const CholeskyFactor precision_chol = CholeskyFactor::compute(precision, kModule);

    ClassicalBLPosterior post;
    post.sigma_bl = symmetrize(precision_chol.inverse());
    post.mu_bl = precision_chol.solve(market.chol().solve(market.mu()) + omega_inv_p.transpose() * y);
    return post;
}

Eigen::VectorXd classical_bl_portfolio(const ClassicalBLPosterior& posterior, double r_f, double gamma) {
    if (!(gamma > 0.0)) throw GammaOutOfRange(kModule, "gamma must be positive");
    const Eigen::VectorXd excess =
        posterior.mu_bl - r_f * Eigen::VectorXd::Ones(posterior.mu_bl.size());
    return CholeskyFactor::compute(posterior.sigma_bl, kModule).solve(excess) / gamma;
}

Eigen::VectorXd aged_view_portfolio(const ConditionalLaw& law, double gamma, double t,
                                    const Eigen::VectorXd& x) {
    if (!(gamma > 0.0)) throw GammaOutOfRange(kModule, "gamma must be positive");
    if (t < 0.0 || t >= law.horizon()) throw IntervalMismatch(kModule, "require 0 <= t < horizon");
    const double weight = 1.0 - t / law.horizon();
    const Eigen::MatrixXd precision =
        symmetrize(law.sigma_chol().inverse() +
                   weight * law.P().transpose() * spd_solve(law.omega(), law.P()));
    const Eigen::VectorXd excess =
        law.log_drift(t, x) - law.r_f() * Eigen::VectorXd::Ones(law.n_assets());
    return precision * excess / gamma;
}

// ---------------------------------------------------------------------------
// PolicySolution
// ---------------------------------------------------------------------------

PolicySolution PolicySolution::solve(const ConditionalLaw& law, double gamma, int ode_steps_per_year) {
    if (!(gamma >= 1.0))
        throw GammaOutOfRange(kModule,
                              "dynamic policy requires gamma >= 1 (gamma < 1 risks finite escape time)");
    PolicySolution sol(law, gamma);
    sol.pop_ = symmetrize(law.P().transpose() * spd_solve(law.omega(), law.P()));
    sol.sigma_inv_ = symmetrize(law.sigma_chol().inverse());

    // c(t) = integral over [t, h] of the running term; the integrand does not
    // depend on c, so backward RK4 reduces to composite Simpson.
    const double h = law.horizon();
    const int steps = std::max(2, static_cast<int>(std::ceil(ode_steps_per_year * h)));
    const double dt = h / steps;
    const auto integrand = [&](double t) {
        const Eigen::MatrixXd a = sol.A(t);
        const Eigen::VectorXd al = sol.alpha(t);
        const Eigen::VectorXd bv = sol.b(t);
        const Eigen::VectorXd q = al - law.r_f() * Eigen::VectorXd::Ones(law.n_assets());
        const Eigen::VectorXd sol_q = law.sigma_chol().solve(q);
        double running = (1.0 - gamma) * law.r_f();
        running += 0.5 * (a * law.sigma()).trace();
        running += (1.0 - gamma) / (2.0 * gamma) * q.dot(sol_q);
        running += (al - 0.5 * law.sigma().diagonal()).dot(bv);
        running += (1.0 - gamma) / gamma * q.dot(bv);
        running += 0.5 / gamma * bv.dot(law.sigma() * bv);
        return running;
    };
    sol.c_grid_.resize(steps + 1);
    sol.c_values_.assign(steps + 1, 0.0);
    for (int k = 0; k <= steps; ++k) sol.c_grid_[k] = k * dt;
    for (int k = steps - 1; k >= 0; --k) {
        const double t0 = sol.c_grid_[k];
        const double t1 = sol.c_grid_[k + 1];
        const double mid = 0.5 * (t0 + t1);
        const double piece = (t1 - t0) / 6.0 * (integrand(t0) + 4.0 * integrand(mid) + integrand(t1));
        sol.c_values_[k] = sol.c_values_[k + 1] + piece;
    }
    return sol;
}

Eigen::MatrixXd PolicySolution::eta(double t) const {
    const double h = law_.horizon();
    const Eigen::MatrixXd gram = symmetrize(
        (h - t) * law_.P() * law_.sigma() * law_.P().transpose() + h * law_.omega());
    return -law_.P().transpose() * spd_solve(gram, law_.P());
}

Eigen::MatrixXd PolicySolution::M(double t) const {
    const Eigen::Index n = law_.n_assets();
    if (gamma_ == 1.0) return Eigen::MatrixXd::Zero(n, n);
    const double w = 1.0 - t / law_.horizon();
    const Eigen::MatrixXd weighted = w * pop_;
    const Eigen::MatrixXd denom = symmetrize(gamma_ * sigma_inv_ + weighted);
    // M = (gamma-1) * weighted * denom^{-1}; both factors symmetric.
    return (gamma_ - 1.0) * spd_solve(denom, weighted).transpose();
}

Eigen::MatrixXd PolicySolution::A(double t) const {
    const Eigen::MatrixXd me = M(t) * eta(t);
    return symmetrize(me);
}

Eigen::VectorXd PolicySolution::alpha(double t) const {
    return law_.drift(t, Eigen::VectorXd::Zero(law_.n_assets()));
}

Eigen::VectorXd PolicySolution::b(double t) const {
    const Eigen::VectorXd q =
        alpha(t) - law_.r_f() * Eigen::VectorXd::Ones(law_.n_assets());
    return M(t) * law_.sigma_chol().solve(q);
}

double PolicySolution::c(double t) const { return interp(c_grid_, c_values_, t); }

Eigen::MatrixXd PolicySolution::posterior_cov(double t) const {
    const double w = 1.0 - t / law_.horizon();
    if (w <= 0.0) return law_.sigma();
    // (Sigma^{-1} + w P^T omega^{-1} P)^{-1} via Woodbury; stays SPD.
    const Eigen::MatrixXd inner =
        symmetrize(law_.omega() / w + law_.P() * law_.sigma() * law_.P().transpose());
    const Eigen::MatrixXd ps = law_.P() * law_.sigma();
    return symmetrize(law_.sigma() - ps.transpose() * spd_solve(inner, ps));
}

Eigen::MatrixXd PolicySolution::sigma_dbl(double t) const {
    const Eigen::MatrixXd post = posterior_cov(t);
    return symmetrize(post + (law_.sigma() - post) / gamma_);
}

double PolicySolution::value_exponent(double t, const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(A(t) * x) + x.dot(b(t)) + c(t);
}

PolicyWeights dynamic_policy_weights(const PolicySolution& solution, double t, const Eigen::VectorXd& x) {
    const ConditionalLaw& law = solution.law();
    if (t < 0.0 || t > law.horizon()) throw IntervalMismatch(kModule, "t outside [0, horizon]");
    const double gamma = solution.gamma();

    PolicyWeights w;
    const Eigen::VectorXd excess =
        law.drift(t, x) - law.r_f() * Eigen::VectorXd::Ones(law.n_assets());
    w.mean_variance = law.sigma_chol().solve(excess) / gamma;
    w.hedging = solution.M(t) * w.mean_variance;
    w.total = w.mean_variance + w.hedging;

    // The Markowitz-with-sigma_dbl route must reproduce the decomposition.
    const Eigen::VectorXd markowitz = spd_solve(solution.sigma_dbl(t), excess) / gamma;
    const double err = (markowitz - w.total).norm();
    if (err > 1e-10 * std::max(1.0, w.total.norm()))
        throw NumericalFailure(kModule, "policy decomposition and sigma_dbl route disagree: " +
                                            std::to_string(err));
    return w;
}

// ---------------------------------------------------------------------------
// IntervalPolicy (revisions / short-term)
// ---------------------------------------------------------------------------

IntervalPolicy::IntervalPolicy(const MarketModel& market, double gamma, double start, double view_end,
                               double interval_end, Eigen::MatrixXd P, Eigen::MatrixXd omega_total)
    : mu_(market.mu()),
      sigma_(market.sigma()),
      mu_x_(market.log_drift()),
      r_f_(market.r_f()),
      gamma_(gamma),
      start_(start),
      view_end_(view_end),
      interval_end_(interval_end),
      P_(std::move(P)),
      omega_(std::move(omega_total)) {
    if (!(gamma >= 1.0)) throw GammaOutOfRange(kModule, "interval policies require gamma >= 1");
    sigma_inv_ = symmetrize(market.chol().inverse());
    pop_ = symmetrize(P_.transpose() * spd_solve(omega_, P_));
    const double span = view_end_ - start_;
    const Eigen::MatrixXd gram = symmetrize(span * P_ * sigma_ * P_.transpose() + omega_);
    beta1_ = spd_solve(gram, P_ * sigma_).transpose();
}

IntervalPolicy IntervalPolicy::revisions(const RevisionSchedule& schedule, const MarketModel& market,
                                         double gamma, int j) {
    if (j < 0 || j > schedule.revisions())
        throw IntervalMismatch(kModule, "revision interval index out of range");
    // View at t_j covers the remaining horizon [t_j, T]; the policy applies
    // until the next revision.
    return IntervalPolicy(market, gamma, schedule.times()[j], schedule.horizon(),
                          schedule.interval_end(j), schedule.P(), schedule.omegas()[j]);
}

IntervalPolicy IntervalPolicy::short_term(const ShortTermSchedule& schedule, const MarketModel& market,
                                          double gamma, int j) {
    if (j < 0 || j >= schedule.intervals())
        throw IntervalMismatch(kModule, "short-term interval index out of range");
    // The refined view covers exactly the interval, with idiosyncratic noise.
    return IntervalPolicy(market, gamma, schedule.times()[j], schedule.times()[j + 1],
                          schedule.times()[j + 1], schedule.P(), schedule.idio_covs()[j]);
}

double IntervalPolicy::remaining(double t) const { return view_end_ - t; }

Eigen::MatrixXd IntervalPolicy::eta_bar(double t) const {
    return -spd_solve(symmetrize(remaining(t) * P_ * sigma_ * P_.transpose() + omega_),
                      Eigen::MatrixXd::Identity(P_.rows(), P_.rows()));
}

Eigen::MatrixXd IntervalPolicy::mbar(double t) const {
    const Eigen::MatrixXd denom = symmetrize(gamma_ * sigma_inv_ + remaining(t) * pop_);
    return -(gamma_ - 1.0) * remaining(t) *
           spd_solve(omega_, spd_solve(denom, P_.transpose()).transpose());
}

Eigen::MatrixXd IntervalPolicy::M(double t) const {
    const Eigen::Index n = sigma_.rows();
    if (gamma_ == 1.0) return Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd weighted = remaining(t) * pop_;
    const Eigen::MatrixXd denom = symmetrize(gamma_ * sigma_inv_ + weighted);
    return (gamma_ - 1.0) * spd_solve(denom, weighted).transpose();
}

Eigen::MatrixXd IntervalPolicy::C(double t) const {
    const Eigen::MatrixXd me = mbar(t) * P_.transpose() * eta_bar(t);
    return symmetrize(me);
}

Eigen::VectorXd IntervalPolicy::chat(double t) const {
    const Eigen::VectorXd inner =
        sigma_inv_ * (mu_ - r_f_ * Eigen::VectorXd::Ones(mu_.size())) +
        remaining(t) * P_.transpose() * (eta_bar(t) * (P_ * mu_x_));
    return mbar(t) * inner;
}

Eigen::MatrixXd IntervalPolicy::sigma_dbl(double t) const {
    const double w = remaining(t);
    Eigen::MatrixXd post;
    if (w <= 0.0) {
        post = sigma_;
    } else {
        const Eigen::MatrixXd inner = symmetrize(omega_ / w + P_ * sigma_ * P_.transpose());
        const Eigen::MatrixXd ps = P_ * sigma_;
        post = symmetrize(sigma_ - ps.transpose() * spd_solve(inner, ps));
    }
    return symmetrize(post + (sigma_ - post) / gamma_);
}

Eigen::VectorXd IntervalPolicy::drift(double t, const Eigen::VectorXd& xbar,
                                      const Eigen::VectorXd& y) const {
    const double span = view_end_ - start_;
    const Eigen::VectorXd gap = y - span * (P_ * mu_x_);
    const Eigen::MatrixXd beta2 =
        sigma_ * P_.transpose() *
        spd_solve(symmetrize(remaining(t) * P_ * sigma_ * P_.transpose() + omega_), P_);
    const Eigen::VectorXd mean = (t - start_) * (mu_x_ + beta1_ * gap);
    return mu_ + beta1_ * gap + beta2 * (mean - xbar);
}

PolicyWeights IntervalPolicy::weights(double t, const Eigen::VectorXd& xbar,
                                      const Eigen::VectorXd& y) const {
    if (t < start_ - 1e-12 || t > interval_end_ + 1e-12)
        throw IntervalMismatch(kModule, "t outside the policy interval");
    PolicyWeights w;
    const Eigen::VectorXd excess = drift(t, xbar, y) - r_f_ * Eigen::VectorXd::Ones(mu_.size());
    w.mean_variance = sigma_inv_ * excess / gamma_;
    w.hedging = M(t) * w.mean_variance;
    w.total = w.mean_variance + w.hedging;

    const Eigen::VectorXd markowitz = spd_solve(sigma_dbl(t), excess) / gamma_;
    if ((markowitz - w.total).norm() > 1e-10 * std::max(1.0, w.total.norm()))
        throw NumericalFailure(kModule, "interval policy decomposition and sigma_dbl route disagree");
    return w;
}

Eigen::MatrixXd revisions_terminal_C(const RevisionSchedule& schedule, const MarketModel& market,
                                     double gamma, int j) {
    if (j < 0 || j >= schedule.revisions())
        throw IntervalMismatch(kModule, "terminal condition defined for j < M only");
    const double t_next = schedule.times()[j + 1];
    const Eigen::Index k = schedule.P().rows();
    const Eigen::MatrixXd f =
        (schedule.horizon() - t_next) * schedule.P() * market.sigma() * schedule.P().transpose();
    const Eigen::MatrixXd innovation = schedule.omegas()[j] - schedule.omegas()[j + 1];
    const Eigen::MatrixXd f_j_inv_t =
        spd_solve(symmetrize(f + schedule.omegas()[j]), Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd beta0 = Eigen::MatrixXd::Identity(k, k) - innovation * f_j_inv_t;
    const Eigen::MatrixXd omega_cond = innovation * f_j_inv_t * (f + schedule.omegas()[j + 1]);

    const Eigen::MatrixXd c_next = IntervalPolicy::revisions(schedule, market, gamma, j + 1).C(t_next);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(c_next);
    if (!lu.isInvertible())
        throw NumericalFailure(kModule, "next-interval C is singular; terminal recursion undefined");
    const Eigen::MatrixXd middle = (lu.inverse() + omega_cond).inverse();
    return symmetrize(beta0.transpose() * middle * beta0);
}

Eigen::VectorXd revisions_policy(const RevisionSchedule& schedule, const MarketModel& market, double gamma,
                                 int j, double t, const Eigen::VectorXd& xbar, const Eigen::VectorXd& y_j) {
    const IntervalPolicy policy = IntervalPolicy::revisions(schedule, market, gamma, j);
    if (t < policy.start() - 1e-12 || t >= policy.end() + 1e-12)
        throw IntervalMismatch(kModule, "t outside [t_j, t_{j+1})");
    return policy.weights(t, xbar, y_j).total;
}

Eigen::VectorXd short_term_policy(const ShortTermSchedule& schedule, const MarketModel& market,
                                  double gamma, int j, double t, const Eigen::VectorXd& xbar,
                                  const Eigen::VectorXd& ybar_j) {
    const IntervalPolicy policy = IntervalPolicy::short_term(schedule, market, gamma, j);
    if (t < policy.start() - 1e-12 || t >= policy.end() + 1e-12)
        throw IntervalMismatch(kModule, "t outside [T_j, T_{j+1})");
    return policy.weights(t, xbar, ybar_j).total;
}

// ---------------------------------------------------------------------------
// MultiHorizonSolution
// ---------------------------------------------------------------------------

MultiHorizonSolution MultiHorizonSolution::solve(const MultiHorizonViews& views, const MarketModel& market,
                                                 double gamma, int ode_steps_per_year) {
    if (!(gamma >= 1.0)) throw GammaOutOfRange(kModule, "multi-horizon policy requires gamma >= 1");
    if (!views.y) throw ValidationError(kModule, "realized views required to solve the policy");

    MultiHorizonSolution sol;
    sol.gamma_ = gamma;
    sol.mu_ = market.mu();
    sol.mu_x_ = market.log_drift();
    sol.sigma_ = market.sigma();
    sol.sigma_inv_ = symmetrize(market.chol().inverse());
    sol.r_f_ = market.r_f();

    const int k = static_cast<int>(views.n_views());
    sol.interval_data_.resize(k);
    for (int j = 1; j <= k; ++j) {
        const CollapsedView cv = collapse_multi_horizon(views, market, j);
        IntervalData d;
        d.start = (j == 1) ? 0.0 : views.horizons(j - 2);
        d.end = cv.horizon;
        d.P = cv.P;
        d.omega = cv.omega;
        d.ybar = views.y->tail(k - j + 1) - cv.bias;
        const Eigen::MatrixXd gram = symmetrize(d.P * sol.sigma_ * d.P.transpose() + d.omega);
        d.beta1 = spd_solve(gram, d.P * sol.sigma_).transpose() / cv.horizon;
        const Eigen::VectorXd gap = d.ybar - cv.horizon * (d.P * sol.mu_x_);
        d.cond_drift = sol.mu_x_ + d.beta1 * gap;
        d.price_drift = sol.mu_ + d.beta1 * gap;
        sol.interval_data_[j - 1] = std::move(d);
    }

    // Backward RK4 across intervals, glued by continuity of the value
    // function: A^j(T_j) = A^{j+1}(T_j), b^j(T_j) = b^{j+1}(T_j).
    const Eigen::Index n = market.n_assets();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);

    std::vector<double> nodes_desc;
    std::vector<Eigen::MatrixXd> a_desc;
    std::vector<Eigen::VectorXd> b_desc;

    for (int j = k; j >= 1; --j) {
        const IntervalData& d = sol.interval_data_[static_cast<std::size_t>(j - 1)];
        const double len = d.end - d.start;
        const int steps = std::max(2, static_cast<int>(std::ceil(ode_steps_per_year * len)));
        const double dt = len / steps;

        const auto rhs = [&](double t, const Eigen::MatrixXd& at, const Eigen::VectorXd& bt,
                             Eigen::MatrixXd& da, Eigen::VectorXd& db) {
            const Eigen::MatrixXd e = sol.eta(j, t);
            const Eigen::VectorXd al = sol.alpha(j, t);
            const Eigen::VectorXd q = al - sol.r_f_ * Eigen::VectorXd::Ones(n);
            da = -((1.0 - gamma) / gamma * e * sol.sigma_ * e +
                   (at * sol.sigma_ * e + e * sol.sigma_ * at) / gamma +
                   at * sol.sigma_ * at / gamma);
            db = -((e + at) * (sol.sigma_ * bt) / gamma + (1.0 - gamma) / gamma * ((e + at) * q) +
                   at * (al - 0.5 * sol.sigma_.diagonal()));
        };

        if (nodes_desc.empty() || std::abs(nodes_desc.back() - d.end) > 1e-12) {
            nodes_desc.push_back(d.end);
            a_desc.push_back(a);
            b_desc.push_back(b);
        }
        double t = d.end;
        Eigen::MatrixXd k1a(n, n), k2a(n, n), k3a(n, n), k4a(n, n);
        Eigen::VectorXd k1b(n), k2b(n), k3b(n), k4b(n);
        for (int s = 0; s < steps; ++s) {
            const double hstep = -dt;  // integrating backward
            rhs(t, a, b, k1a, k1b);
            rhs(t + hstep / 2, a + hstep / 2 * k1a, b + hstep / 2 * k1b, k2a, k2b);
            rhs(t + hstep / 2, a + hstep / 2 * k2a, b + hstep / 2 * k2b, k3a, k3b);
            rhs(t + hstep, a + hstep * k3a, b + hstep * k3b, k4a, k4b);
            a = symmetrize(a + hstep / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a));
            b += hstep / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            t = (s + 1 == steps) ? d.start : t + hstep;  // snap the boundary node
            nodes_desc.push_back(t);
            a_desc.push_back(a);
            b_desc.push_back(b);
        }
    }

    sol.nodes_.assign(nodes_desc.rbegin(), nodes_desc.rend());
    sol.a_nodes_.assign(a_desc.rbegin(), a_desc.rend());
    sol.b_nodes_.assign(b_desc.rbegin(), b_desc.rend());
    return sol;
}

const MultiHorizonSolution::IntervalData& MultiHorizonSolution::data(int j) const {
    if (j < 1 || j > intervals()) throw IntervalMismatch(kModule, "interval index out of range");
    return interval_data_[static_cast<std::size_t>(j - 1)];
}

int MultiHorizonSolution::interval_of(double t) const {
    if (t < 0.0 || t > interval_data_.back().end)
        throw IntervalMismatch(kModule, "t outside [0, T_K]");
    for (int j = 1; j <= intervals(); ++j)
        if (t < data(j).end) return j;
    return intervals();
}

Eigen::MatrixXd MultiHorizonSolution::A(double t) const {
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    if (it == nodes_.begin()) return a_nodes_.front();
    if (it == nodes_.end()) return a_nodes_.back();
    const std::size_t hi = static_cast<std::size_t>(it - nodes_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - nodes_[lo]) / (nodes_[hi] - nodes_[lo]);
    return (1.0 - w) * a_nodes_[lo] + w * a_nodes_[hi];
}

Eigen::VectorXd MultiHorizonSolution::b(double t) const {
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    if (it == nodes_.begin()) return b_nodes_.front();
    if (it == nodes_.end()) return b_nodes_.back();
    const std::size_t hi = static_cast<std::size_t>(it - nodes_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - nodes_[lo]) / (nodes_[hi] - nodes_[lo]);
    return (1.0 - w) * b_nodes_[lo] + w * b_nodes_[hi];
}

Eigen::MatrixXd MultiHorizonSolution::eta(int j, double t) const {
    const IntervalData& d = data(j);
    const Eigen::MatrixXd gram =
        symmetrize((d.end - t) * d.P * sigma_ * d.P.transpose() + d.end * d.omega);
    return -d.P.transpose() * spd_solve(gram, d.P);
}

Eigen::VectorXd MultiHorizonSolution::alpha(int j, double t) const {
    const IntervalData& d = data(j);
    return d.price_drift - sigma_ * (eta(j, t) * (t * d.cond_drift));
}

Eigen::VectorXd MultiHorizonSolution::drift(int j, double t, const Eigen::VectorXd& x) const {
    return alpha(j, t) + sigma_ * (eta(j, t) * x);
}

PolicyWeights MultiHorizonSolution::weights(int j, double t, const Eigen::VectorXd& x) const {
    const IntervalData& d = data(j);
    if (t < d.start - 1e-12 || t > d.end + 1e-12)
        throw IntervalMismatch(kModule, "t outside [T_{j-1}, T_j)");
    PolicyWeights w;
    const Eigen::VectorXd excess = drift(j, t, x) - r_f_ * Eigen::VectorXd::Ones(mu_.size());
    w.mean_variance = sigma_inv_ * excess / gamma_;
    w.hedging = (A(t) * x + b(t)) / gamma_;
    w.total = w.mean_variance + w.hedging;
    return w;
}

Eigen::VectorXd multi_horizon_policy(const MultiHorizonViews& views, const MarketModel& market,
                                     double gamma, int j, double t, const Eigen::VectorXd& x) {
    return MultiHorizonSolution::solve(views, market, gamma).weights(j, t, x).total;
}

}  // namespace dbl
