#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dbl/conditional.hpp"
#include "dbl/market.hpp"
#include "dbl/policy.hpp"

namespace dbl::mc {

/// Order-independent sum (pairwise), so aggregates do not depend on how the
/// path loop was scheduled across threads.
double pairwise_sum(const std::vector<double>& values);

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

Estimate mean_estimate(const std::vector<double>& values);

/// Certainty-equivalent rate r_c with U(z0 e^{T r_c}) = mean U(Z(T)) for
/// isoelastic utility, gamma > 1. Standard error by the delta method on the
/// sample mean of Z^{1-gamma}.
Estimate certainty_equivalent(const std::vector<double>& terminal_wealth, double gamma, double z0,
                              double horizon);

/// When and how the investor rebalances. "Continuous" trading is
/// approximated by rebalancing on a fine grid whose resolution is always
/// recorded next to any turnover figure derived from it.
struct RebalancePlan {
    enum class Mode { Continuous, Periodic };
    Mode mode = Mode::Periodic;
    double period = 1.0 / 52;
    int fine_grid_steps = 2016;  // steps per year approximating continuous trading

    static RebalancePlan periodic(double period_years);
    static RebalancePlan continuous(int fine_steps = 2016);
    static RebalancePlan from_label(const std::string& label);  // daily|weekly|monthly|continuous

    /// Rebalance times in [0, horizon); holdings from the last epoch ride to
    /// the horizon.
    std::vector<double> epochs(double horizon) const;
    std::string label() const;
};

struct WalkResult {
    double terminal_wealth = 0.0;
    double turnover = 0.0;  // sum of |share changes| at interior epochs
    bool bankrupt = false;
    int violation_epoch = -1;
};

/// Weight callback: epoch index within the plan, epoch time, log-return state.
using WeightsFn = std::function<Eigen::VectorXd(int, double, const Eigen::VectorXd&)>;

/// Buy-and-hold between epochs: at each epoch the wealth is split into shares
/// n_i = pi_i Z / S_i plus cash, and Z evolves from realized prices,
/// Z(t') = sum_i n_i S_i(t') + cash e^{r_f (t' - t)}. X holds log-returns on
/// `grid` (row per grid point); prices are exp(X) with unit initial prices.
/// A non-positive wealth aborts the path at the violating epoch and flags it.
WalkResult walk_wealth(double r_f, const std::vector<double>& grid, const Eigen::MatrixXd& X,
                       const std::vector<int>& epoch_indices, const WeightsFn& weights, double z0);

/// Constant-proportion compounding: weights are set at the policy epochs and
/// the portfolio is continuously rebalanced to those proportions until the
/// next epoch. For piecewise-constant weights the wealth SDE integrates in
/// closed form from the log-return increments alone,
///   dlnZ = [r_f (1 - pi^T 1) + pi^T diag(Sigma)/2 - pi^T Sigma pi / 2] dt
///          + pi^T dX,
/// (the conditional drift cancels exactly), so Z is sampled without
/// discretization error and stays positive under any leverage. Turnover
/// counts share changes at the policy epochs.
WalkResult walk_wealth_proportional(double r_f, const Eigen::MatrixXd& sigma,
                                    const std::vector<double>& grid, const Eigen::MatrixXd& X,
                                    const std::vector<int>& epoch_indices, const WeightsFn& weights,
                                    double z0);

/// Wealth simulation under the view-conditioned market law for a fixed view.
struct SimulationReport {
    RebalancePlan plan;
    std::uint64_t seed = 0;
    int n_paths = 0;
    int n_bankrupt = 0;
    std::vector<double> terminal_wealth;
    std::vector<double> turnover_per_path;
    std::vector<int> bankrupt_paths;
    Estimate mean_return;  // mean of Z(T)/z0 - 1 with SE
    double return_std = 0.0;
    Estimate cer;       // only valid when n_bankrupt == 0
    Estimate turnover;
};

SimulationReport simulate_wealth(const ConditionalLaw& law,
                                 const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& policy,
                                 const RebalancePlan& plan, double z0, int n_paths, std::uint64_t rng_seed,
                                 double gamma_for_cer, int threads = 1);

/// One aggregated table row per (policy, alpha, gamma, plan).
struct ReportRow {
    std::string policy;
    std::string plan;
    double alpha = 0.0;
    double gamma = 0.0;
    double mean_return = 0.0;
    double return_std = 0.0;
    double se_mean = 0.0;
    double cer = 0.0;
    double cer_se = 0.0;
    double turnover = 0.0;
    double turnover_se = 0.0;
    int n_paths = 0;
    int n_bankrupt = 0;
};

struct ComparisonReport {
    std::vector<ReportRow> rows;
    std::uint64_t seed = 0;
    int n_paths = 0;
    int fine_grid_steps = 0;
    std::uint64_t path_hash = 0;  // hash of the generated price paths (policy-independent)
    /// Per-path terminal wealth and turnover aligned with `rows` (filled when
    /// the config asks for them; needed for paired common-random-number
    /// comparisons).
    std::vector<std::vector<double>> wealth_per_row;
    std::vector<std::vector<double>> turnover_per_row;
};

/// Paired delta-method estimate of cer(a) - cer(b) from common-random-number
/// wealth samples.
Estimate paired_cer_difference(const std::vector<double>& wealth_a, const std::vector<double>& wealth_b,
                               double gamma, double horizon);

/// Dynamic-vs-rebalanced-classical comparison: each simulation run draws one
/// prior price scenario and one view scenario per alpha (common random
/// numbers across policies, gammas and plans), then walks every policy
/// through the same prices.
struct ComparisonConfig {
    std::vector<double> alphas{0.4, 0.8};
    std::vector<double> gammas{2.0, 5.0};
    std::vector<RebalancePlan> plans{RebalancePlan::periodic(1.0 / 52)};
    int n_paths = 20000;
    std::uint64_t seed = 1;
    double z0 = 1.0;
    int threads = 1;
    bool keep_paths = false;
};

ComparisonReport run_comparison(const MarketModel& market, const Eigen::MatrixXd& P,
                                const ComparisonConfig& config);

/// Revision-value comparison: investors differ only in which revision times
/// they anticipate; views are drawn once per path from a single nested noise
/// sequence so all investors see consistent information.
struct RevisionInvestor {
    std::string name;
    std::vector<double> revision_times;  // starting with 0
};

struct RevisionConfig {
    std::vector<double> alphas{0.6};
    std::vector<double> gammas{5.0};
    RebalancePlan plan = RebalancePlan::periodic(1.0 / 52);
    std::vector<RevisionInvestor> investors{
        {"none", {0.0}},
        {"single", {0.0, 0.5}},
        {"quarterly", {0.0, 0.25, 0.5, 0.75}},
    };
    int n_paths = 20000;
    std::uint64_t seed = 1;
    double z0 = 1.0;
    int threads = 1;
    bool keep_paths = false;
};

ComparisonReport run_revision_comparison(const MarketModel& market, const Eigen::MatrixXd& P,
                                         const RevisionConfig& config);

/// Exact sampling of the prior log-returns on a grid starting from X(0) = 0.
Eigen::MatrixXd sample_prior_path(const MarketModel& market, const std::vector<double>& grid, Rng& rng);

/// Short-term views experiment: the per-interval optimal investor (with
/// VAR-refined views) against a constant Merton baseline. The idiosyncratic
/// noise is alpha * (T_{j+1} - T_j) * P Sigma P^T per interval.
struct ShortTermConfig {
    std::vector<double> times;  // T_0 = 0 < ... < T_{M+1} = horizon
    std::vector<Eigen::MatrixXd> phi;
    std::vector<double> alphas{0.4};
    std::vector<double> gammas{5.0};
    RebalancePlan plan = RebalancePlan::periodic(1.0 / 52);
    int n_paths = 5000;
    std::uint64_t seed = 1;
    double z0 = 1.0;
    int threads = 1;
};

ComparisonReport run_short_term_comparison(const MarketModel& market, const Eigen::MatrixXd& P,
                                           const ShortTermConfig& config);

/// Multi-horizon views experiment: the stitched-policy investor against a
/// constant Merton baseline. The joint view noise is alpha * omega.
struct MultiHorizonConfig {
    Eigen::VectorXd horizons;
    Eigen::MatrixXd picks;
    Eigen::MatrixXd omega;
    std::vector<double> alphas{1.0};
    std::vector<double> gammas{5.0};
    RebalancePlan plan = RebalancePlan::periodic(1.0 / 52);
    int n_paths = 5000;
    std::uint64_t seed = 1;
    double z0 = 1.0;
    int threads = 1;
    int ode_steps_per_year = 400;
};

ComparisonReport run_multi_horizon_comparison(const MarketModel& market, const MultiHorizonConfig& config);

}  // namespace dbl::mc
