#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "dbl/errors.hpp"
#include "dbl/gaussian.hpp"

namespace dbl {

/// Prior market: N risky assets whose prices are correlated geometric
/// Brownian motion, plus a risk-free asset. Rates are decimal per annum,
/// times in years.
class MarketModel {
public:
    /// Validates that sigma is symmetric positive definite.
    static MarketModel make(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f, double horizon);

    Eigen::Index n_assets() const { return mu_.size(); }
    const Eigen::VectorXd& mu() const { return mu_; }
    const Eigen::MatrixXd& sigma() const { return sigma_; }
    double r_f() const { return r_f_; }
    double horizon() const { return horizon_; }
    const CholeskyFactor& chol() const { return chol_; }

    /// Log-price drift mu_i - sigma_ii / 2.
    const Eigen::VectorXd& log_drift() const { return mu_x_; }

private:
    MarketModel(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f, double horizon, CholeskyFactor chol);

    Eigen::VectorXd mu_;
    Eigen::MatrixXd sigma_;
    double r_f_;
    double horizon_;
    CholeskyFactor chol_;
    Eigen::VectorXd mu_x_;
};

/// Canonical single-horizon view block: at time t1 the expert states K noisy
/// linear views of the log-return over [t1, t2],
///   Y | X = P (X(t2) - X(t1)) + sqrt(t2 - t1) * eps,  eps ~ N(0, omega),
/// so omega is a per-unit-time noise covariance. Views quoted on arithmetic
/// returns must be converted to log space (target ln(1+r)) before they
/// reach this type; the library itself stores log-return views only.
struct ViewSet {
    Eigen::MatrixXd P;      ///< K x N pick matrix
    Eigen::MatrixXd omega;  ///< K x K per-unit-time noise covariance
    double given_at = 0.0;  ///< t1
    double horizon = 1.0;   ///< t2
    std::optional<Eigen::VectorXd> y;  ///< realized view vector, once sampled

    static ViewSet make(Eigen::MatrixXd P, Eigen::MatrixXd omega, double given_at, double horizon,
                        std::optional<Eigen::VectorXd> y = std::nullopt);

    Eigen::Index n_views() const { return P.rows(); }
    double span() const { return horizon - given_at; }
};

/// Omega = alpha * P Sigma P^T: view noise proportional to the view
/// portfolio variance, with alpha the (inverse) confidence in the views.
Eigen::MatrixXd make_omega_alpha(const MarketModel& market, const Eigen::MatrixXd& P, double alpha);

/// Draw y = P x_T + sqrt(t2 - t1) z with z ~ N(0, omega). Reproducible under
/// a fixed seed.
Eigen::VectorXd sample_view(const MarketModel& market, const ViewSet& views, const Eigen::VectorXd& x_T,
                            std::uint64_t rng_seed);

/// Revision schedule: the view given at t_j covers the remaining horizon
/// [t_j, T] with total noise covariance Omega^j (no per-unit scaling, the
/// noise does not shrink with time within a view). Revisions must sharpen:
/// each innovation covariance Omega^{j,0} = Omega^j - Omega^{j+1} is required
/// to be positive definite so the old view decomposes into realized noise
/// plus the revised view.
class RevisionSchedule {
public:
    static RevisionSchedule make(Eigen::MatrixXd P, std::vector<double> times,
                                 std::vector<Eigen::MatrixXd> omegas, double horizon);

    const Eigen::MatrixXd& P() const { return P_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Eigen::MatrixXd>& omegas() const { return omegas_; }
    const std::vector<Eigen::MatrixXd>& innovation_covs() const { return innovations_; }
    double horizon() const { return horizon_; }
    int revisions() const { return static_cast<int>(times_.size()) - 1; }
    /// End of interval j, i.e. t_{j+1} (or T for the last interval).
    double interval_end(int j) const;

private:
    RevisionSchedule() = default;
    Eigen::MatrixXd P_;
    std::vector<double> times_;
    std::vector<Eigen::MatrixXd> omegas_;
    std::vector<Eigen::MatrixXd> innovations_;
    double horizon_ = 0.0;
};

/// Short-term view schedule: the view received at T_j covers [T_j, T_{j+1}]
/// with noise following a VAR(p) process
///   eps^j = Phi^1 eps^{j-1} + ... + Phi^p eps^{j-p} + eps^{j,0},
/// where the idiosyncratic noises eps^{j,0} ~ N(0, Omega^{j,0}) are
/// independent across intervals.
class ShortTermSchedule {
public:
    static ShortTermSchedule make(Eigen::MatrixXd P, std::vector<double> times,
                                  std::vector<Eigen::MatrixXd> phi,
                                  std::vector<Eigen::MatrixXd> idio_covs);

    const Eigen::MatrixXd& P() const { return P_; }
    const std::vector<double>& times() const { return times_; }       ///< T_0 = 0 < ... < T_{M+1} = T
    const std::vector<Eigen::MatrixXd>& phi() const { return phi_; }  ///< p autoregression matrices
    const std::vector<Eigen::MatrixXd>& idio_covs() const { return idio_; }
    int order() const { return static_cast<int>(phi_.size()); }
    int intervals() const { return static_cast<int>(times_.size()) - 1; }

private:
    ShortTermSchedule() = default;
    Eigen::MatrixXd P_;
    std::vector<double> times_;
    std::vector<Eigen::MatrixXd> phi_;
    std::vector<Eigen::MatrixXd> idio_;
};

/// Strip the VAR-predictable component out of the view for interval j:
///   ybar^j = y^j - sum_{i=1}^{min(p,j)} Phi^i eps^{j-i},
/// where eps^i = y^i - P (X(T_{i+1}) - X(T_i)) is recovered from realized
/// returns. realized_returns[i] must hold the log-return over interval i for
/// every interval i < j.
Eigen::VectorXd refine_short_term_view(const ShortTermSchedule& schedule,
                                       const std::vector<Eigen::VectorXd>& raw_views,
                                       const std::vector<Eigen::VectorXd>& realized_returns, int j);

/// Views with differing horizons T_1 <= ... <= T_K, all given at t = 0:
///   Y_j | X(T_j) = p_j^T X(T_j) + sqrt(T_j) eps_j,  eps ~ N(0, omega) jointly.
struct MultiHorizonViews {
    Eigen::VectorXd horizons;  ///< K, ascending
    Eigen::MatrixXd picks;     ///< K x N, row j = p_j^T
    Eigen::MatrixXd omega;     ///< K x K joint noise covariance
    std::optional<Eigen::VectorXd> y;  ///< realized raw views

    static MultiHorizonViews make(Eigen::VectorXd horizons, Eigen::MatrixXd picks, Eigen::MatrixXd omega,
                                  std::optional<Eigen::VectorXd> y = std::nullopt);

    Eigen::Index n_views() const { return picks.rows(); }
};

/// Result of collapsing the non-expired views {j..K} to the single horizon
/// T_j: a canonical view block P X(T_j) + sqrt(T_j) eps with eps ~ N(0, omega)
/// applying to the de-biased views ybar = y_{j:K} - bias.
struct CollapsedView {
    Eigen::MatrixXd P;      ///< stacked picks P_{j:K}
    Eigen::MatrixXd omega;  ///< per-unit-time noise covariance at horizon T_j
    Eigen::VectorXd bias;   ///< bias_i = (T_i - T_j) p_i^T mu_x
    double horizon = 0.0;   ///< T_j
};

/// Collapse views j..K (1-based j) to horizon T_j. The entries of the
/// collapsed covariance combine expert noise pushed across horizons and the
/// Brownian uncertainty of the log-returns between T_j and each view horizon:
///   omega_ik = [ min(T_i - T_j, T_k - T_j) p_i^T Sigma p_k
///                + sqrt(T_i T_k) omega_raw_ik ] / T_j.
CollapsedView collapse_multi_horizon(const MultiHorizonViews& views, const MarketModel& market, int j);

}  // namespace dbl
