#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dbl/conditional.hpp"
#include "dbl/errors.hpp"
#include "dbl/market.hpp"

namespace dbl {

/// Classical single-period posterior: precision adds,
/// sigma_bl^{-1} = Sigma^{-1} + P^T omega^{-1} P.
struct ClassicalBLPosterior {
    Eigen::VectorXd mu_bl;
    Eigen::MatrixXd sigma_bl;
};

/// Blend the equilibrium prior N(mu, Sigma) with views Y | r ~ N(P r, omega).
ClassicalBLPosterior classical_bl(const MarketModel& market, const Eigen::MatrixXd& P,
                                  const Eigen::MatrixXd& omega, const Eigen::VectorXd& y);

/// Single-period mean-variance weights (1/gamma) sigma_bl^{-1} (mu_bl - r_f 1).
/// The remainder 1 - pi^T 1 sits in the risk-free asset.
Eigen::VectorXd classical_bl_portfolio(const ClassicalBLPosterior& posterior, double r_f, double gamma);

/// Rebalanced-classical policy: a single-period investor at time t who still
/// holds the time-0 view. The view ages: the posterior precision is
/// Sigma^{-1} + (1 - t/h) P^T omega^{-1} P, and the expected log-return over
/// the remainder is driven by the conditional drift at the current state.
Eigen::VectorXd aged_view_portfolio(const ConditionalLaw& law, double gamma, double t,
                                    const Eigen::VectorXd& x);

struct PolicyWeights {
    Eigen::VectorXd mean_variance;
    Eigen::VectorXd hedging;
    Eigen::VectorXd total;
};

/// Closed-form solution of the dynamic problem for an isoelastic investor
/// with gamma > 1 (gamma = 1 is accepted and degenerates to the zero-hedging
/// log-utility policy; gamma < 1 is rejected — the Riccati solution can blow
/// up in finite time there).
///
/// The value function is V(t,z,x) = z^{1-gamma}/(1-gamma) * exp(g(t,x)) with
/// g quadratic in x: g = x^T A(t) x / 2 + x^T b(t) + c(t). A, b, M come in
/// closed form; c is integrated numerically (RK4) since no closed form
/// exists for it.
class PolicySolution {
public:
    static PolicySolution solve(const ConditionalLaw& law, double gamma, int ode_steps_per_year = 2000);

    const ConditionalLaw& law() const { return law_; }
    double gamma() const { return gamma_; }

    /// eta_t = -P^T ((h - t) P Sigma P^T + h omega)^{-1} P = -Sigma^{-1} beta2(t).
    Eigen::MatrixXd eta(double t) const;
    /// Information ratio of the views:
    /// M(t) = (gamma-1)(1-t/h) P^T omega^{-1} P (gamma Sigma^{-1} + (1-t/h) P^T omega^{-1} P)^{-1}.
    Eigen::MatrixXd M(double t) const;
    /// A(t) = (M(t) eta_t + eta_t^T M(t)^T) / 2, strictly negative definite for t < h.
    Eigen::MatrixXd A(double t) const;
    /// alpha_t: drift intercept, mu~(t, x) = alpha_t + Sigma eta_t x.
    Eigen::VectorXd alpha(double t) const;
    /// b(t) = M(t) Sigma^{-1} (alpha_t - r_f 1).
    Eigen::VectorXd b(double t) const;
    /// Numerically integrated constant term of g.
    double c(double t) const;
    /// Effective single-period covariance whose Markowitz weights reproduce
    /// the dynamic policy; interpolates between the sharpened posterior
    /// covariance at t = 0 and Sigma at t = h.
    Eigen::MatrixXd sigma_dbl(double t) const;

    double value_exponent(double t, const Eigen::VectorXd& x) const;

private:
    PolicySolution(ConditionalLaw law, double gamma) : law_(std::move(law)), gamma_(gamma) {}
    Eigen::MatrixXd posterior_cov(double t) const;  // (Sigma^{-1} + (1-t/h) P^T omega^{-1} P)^{-1}

    ConditionalLaw law_;
    double gamma_;
    Eigen::MatrixXd pop_;  // P^T omega^{-1} P
    Eigen::MatrixXd sigma_inv_;
    std::vector<double> c_grid_;
    std::vector<double> c_values_;
};

/// Evaluate the optimal policy at (t, x). The hedging demand is
/// (1/gamma) M(t) Sigma^{-1} (mu~(t,x) - r_f 1); the total weights equal the
/// Markowitz weights under sigma_dbl(t). Both routes are computed and must
/// agree to 1e-10, which guards the closed forms at runtime.
PolicyWeights dynamic_policy_weights(const PolicySolution& solution, double t, const Eigen::VectorXd& x);

/// Per-interval policy for the revision and short-term view regimes. Both
/// share one algebra: on the interval the investor holds a view over
/// [start, view_end] with total noise covariance omega_total, and the value
/// function exponent is
///   g^j(t, x, y) = -(Px - y)^T C(t) (Px - y)/2 - (Px - y)^T chat(t) + const.
class IntervalPolicy {
public:
    static IntervalPolicy revisions(const RevisionSchedule& schedule, const MarketModel& market,
                                    double gamma, int j);
    static IntervalPolicy short_term(const ShortTermSchedule& schedule, const MarketModel& market,
                                     double gamma, int j);

    double start() const { return start_; }
    double end() const { return interval_end_; }
    double view_end() const { return view_end_; }
    double gamma() const { return gamma_; }

    Eigen::MatrixXd C(double t) const;
    Eigen::VectorXd chat(double t) const;
    Eigen::MatrixXd M(double t) const;
    Eigen::MatrixXd sigma_dbl(double t) const;
    /// Price drift mu~^j(t, xbar, y) on the interval.
    Eigen::VectorXd drift(double t, const Eigen::VectorXd& xbar, const Eigen::VectorXd& y) const;
    PolicyWeights weights(double t, const Eigen::VectorXd& xbar, const Eigen::VectorXd& y) const;

private:
    IntervalPolicy(const MarketModel& market, double gamma, double start, double view_end,
                   double interval_end, Eigen::MatrixXd P, Eigen::MatrixXd omega_total);

    Eigen::MatrixXd mbar(double t) const;      // K x N
    Eigen::MatrixXd eta_bar(double t) const;   // K x K
    double remaining(double t) const;

    Eigen::VectorXd mu_;
    Eigen::MatrixXd sigma_;
    Eigen::VectorXd mu_x_;
    double r_f_;
    double gamma_;
    double start_, view_end_, interval_end_;
    Eigen::MatrixXd P_;
    Eigen::MatrixXd omega_;      // total noise over [start, view_end]
    Eigen::MatrixXd sigma_inv_;
    Eigen::MatrixXd pop_;        // P^T omega^{-1} P
    Eigen::MatrixXd beta1_;      // Sigma P^T ((view_end-start) P Sigma P^T + omega)^{-1}
};

/// Terminal value C^j(t_{j+1}) implied by the principle of optimality: the
/// continuation through the revision at t_{j+1} maps the next interval's
/// coefficient back through the innovation covariance. The closed-form C of
/// interval j must match this recursion at the interval boundary.
Eigen::MatrixXd revisions_terminal_C(const RevisionSchedule& schedule, const MarketModel& market,
                                     double gamma, int j);

/// Convenience wrappers evaluating the per-interval policies.
Eigen::VectorXd revisions_policy(const RevisionSchedule& schedule, const MarketModel& market, double gamma,
                                 int j, double t, const Eigen::VectorXd& xbar, const Eigen::VectorXd& y_j);
Eigen::VectorXd short_term_policy(const ShortTermSchedule& schedule, const MarketModel& market,
                                  double gamma, int j, double t, const Eigen::VectorXd& xbar,
                                  const Eigen::VectorXd& ybar_j);

/// Stitched backward solution for views with differing horizons. Within each
/// interval [T_{j-1}, T_j) the active views collapse to horizon T_j; A and b
/// solve the interval Riccati/linear ODEs numerically, glued by continuity of
/// the value function at interval boundaries. No closed form exists for the
/// stitched system, so the solution is certified by residuals.
class MultiHorizonSolution {
public:
    static MultiHorizonSolution solve(const MultiHorizonViews& views, const MarketModel& market,
                                      double gamma, int ode_steps_per_year = 2000);

    double gamma() const { return gamma_; }
    int intervals() const { return static_cast<int>(interval_data_.size()); }
    /// 1-based interval index containing t.
    int interval_of(double t) const;

    Eigen::MatrixXd A(double t) const;
    Eigen::VectorXd b(double t) const;
    Eigen::MatrixXd eta(int j, double t) const;
    Eigen::VectorXd alpha(int j, double t) const;
    Eigen::VectorXd drift(int j, double t, const Eigen::VectorXd& x) const;
    PolicyWeights weights(int j, double t, const Eigen::VectorXd& x) const;

    /// Stored integration nodes (for residual checks).
    const std::vector<double>& nodes() const { return nodes_; }
    const Eigen::MatrixXd& A_node(std::size_t i) const { return a_nodes_[i]; }
    const Eigen::VectorXd& b_node(std::size_t i) const { return b_nodes_[i]; }

private:
    struct IntervalData {
        double start, end;          // [T_{j-1}, T_j]
        Eigen::MatrixXd P;          // collapsed picks
        Eigen::MatrixXd omega;      // collapsed per-unit noise
        Eigen::VectorXd ybar;       // de-biased views
        Eigen::MatrixXd beta1;
        Eigen::VectorXd cond_drift; // mu_x + beta1 * gap
        Eigen::VectorXd price_drift;
    };

    MultiHorizonSolution() = default;
    const IntervalData& data(int j) const;

    double gamma_ = 0.0;
    Eigen::VectorXd mu_, mu_x_;
    Eigen::MatrixXd sigma_, sigma_inv_;
    double r_f_ = 0.0;
    std::vector<IntervalData> interval_data_;
    std::vector<double> nodes_;  // descending-time integration nodes reversed to ascending
    std::vector<Eigen::MatrixXd> a_nodes_;
    std::vector<Eigen::VectorXd> b_nodes_;
};

/// Evaluate the multi-horizon policy at (j, t, x); solves the stitched system
/// on each call, so prefer MultiHorizonSolution when evaluating repeatedly.
Eigen::VectorXd multi_horizon_policy(const MultiHorizonViews& views, const MarketModel& market,
                                     double gamma, int j, double t, const Eigen::VectorXd& x);

}  // namespace dbl
