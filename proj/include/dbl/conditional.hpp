#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dbl/bridge.hpp"
#include "dbl/gaussian.hpp"
#include "dbl/market.hpp"
#include "dbl/rng.hpp"

namespace dbl {

/// The view-conditioned market on a local clock: log-returns X start at 0,
/// run over [0, horizon], and the expert observes
///   Y | X(horizon) = P X(horizon) + sqrt(horizon) eps,  eps ~ N(0, omega).
/// Conditioning turns the Brownian log-returns into a mean-reverting Gaussian
/// process; this class holds its coefficients and closed-form moments.
///
/// The base problem uses the market horizon directly. The per-interval
/// extension policies reuse the same object with a shifted clock.
class ConditionalLaw {
public:
    /// Base construction: views over the full market horizon.
    static ConditionalLaw build(const MarketModel& market, const ViewSet& views, const Eigen::VectorXd& y);

    /// Generic construction from explicit parameters (interval problems).
    static ConditionalLaw from_parameters(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f,
                                          double horizon, Eigen::MatrixXd P, Eigen::MatrixXd omega,
                                          Eigen::VectorXd y);

    Eigen::Index n_assets() const { return mu_.size(); }
    Eigen::Index n_views() const { return P_.rows(); }
    const Eigen::VectorXd& mu() const { return mu_; }
    const Eigen::MatrixXd& sigma() const { return sigma_; }
    const Eigen::VectorXd& log_mu() const { return mu_x_; }
    double r_f() const { return r_f_; }
    double horizon() const { return horizon_; }
    const Eigen::MatrixXd& P() const { return P_; }
    const Eigen::MatrixXd& omega() const { return omega_; }
    const Eigen::VectorXd& y() const { return y_; }
    const CholeskyFactor& sigma_chol() const { return sigma_chol_; }

    /// beta_1 = (1/h) Sigma P^T (P Sigma P^T + omega)^{-1}.
    const Eigen::MatrixXd& beta1() const { return beta1_; }
    /// beta_2(t) = Sigma P^T ((h - t) P Sigma P^T + h omega)^{-1} P; bounded
    /// on [0, h] because of the h*omega term.
    Eigen::MatrixXd beta2(double t) const;

    /// y - h P mu_x, the surprise in the view relative to the prior.
    const Eigen::VectorXd& view_gap() const { return gap_; }

    /// E[X^y(t)] = t (mu_x + beta1 * view_gap).
    Eigen::VectorXd cond_mean(double t) const { return t * cond_drift_; }
    /// Cov(X^y(s), X^y(t)) = min(s,t) Sigma - s t / h * Sigma P^T (...)^{-1} P Sigma.
    Eigen::MatrixXd cond_cov(double s, double t) const;

    /// Price drift mu~(t, x) = mu + beta1*gap + beta2(t)(E[X^y(t)] - x).
    Eigen::VectorXd drift(double t, const Eigen::VectorXd& x) const;
    /// Log-return drift mu~ - diag(Sigma)/2.
    Eigen::VectorXd log_drift(double t, const Eigen::VectorXd& x) const;

    /// Constant part of the drift: mu + beta1 * view_gap (the drift on the
    /// conditional mean path, where mean reversion vanishes).
    const Eigen::VectorXd& drift_on_mean_path() const { return price_drift_; }

private:
    ConditionalLaw(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f, double horizon,
                   Eigen::MatrixXd P, Eigen::MatrixXd omega, Eigen::VectorXd y);

    Eigen::VectorXd mu_;
    Eigen::MatrixXd sigma_;
    double r_f_;
    double horizon_;
    Eigen::MatrixXd P_;
    Eigen::MatrixXd omega_;
    Eigen::VectorXd y_;
    CholeskyFactor sigma_chol_;
    Eigen::VectorXd mu_x_;
    Eigen::MatrixXd beta1_;
    Eigen::MatrixXd cond_cov_correction_;  // (1/h) Sigma P^T (P Sigma P^T + omega)^{-1} P Sigma
    Eigen::VectorXd gap_;
    Eigen::VectorXd cond_drift_;   // mu_x + beta1 * gap
    Eigen::VectorXd price_drift_;  // mu + beta1 * gap
};

/// Precomputed exact Gaussian transitions of X^y along a fixed grid, shared
/// across paths. Grid must be strictly increasing within (0, horizon]; the
/// process starts at X(0) = 0.
class ConditionalTransitions {
public:
    ConditionalTransitions(const ConditionalLaw& law, std::vector<double> grid);

    const std::vector<double>& grid() const { return grid_; }
    Eigen::Index dim() const { return dim_; }

    /// Sample one path (|grid| x N), consuming |grid| * N normals from rng.
    Eigen::MatrixXd sample(Rng& rng) const;

private:
    struct Step {
        Eigen::VectorXd base;
        Eigen::MatrixXd gain;
        Eigen::MatrixXd noise;
        bool from_origin = false;
    };
    std::vector<double> grid_;
    std::vector<Step> steps_;
    Eigen::Index dim_;
};

/// Smoothed marginals of the discretized hidden log-return chain given the
/// terminal view, computed by a forward Kalman filter and a
/// Rauch-Tung-Striebel backward pass. Exact for this linear-Gaussian model,
/// and an independent route to the same distribution as ConditionalLaw.
struct SmoothedMoments {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
};

SmoothedMoments kalman_smoother_oracle(const MarketModel& market, const ViewSet& views,
                                       const Eigen::VectorXd& y, int n_steps);

/// Simulated conditional paths plus the implied prices S_i(t) = s0_i exp(X_i(t)).
struct ConditionalPaths {
    std::vector<double> grid;
    std::vector<Eigen::MatrixXd> log_returns;  // one |grid| x N matrix per path
    std::vector<Eigen::MatrixXd> prices;
};

ConditionalPaths simulate_conditional_paths(const ConditionalLaw& law, const std::vector<double>& grid,
                                            int n_paths, std::uint64_t rng_seed,
                                            SdeScheme scheme = SdeScheme::Exact,
                                            const Eigen::VectorXd& s0 = Eigen::VectorXd());

}  // namespace dbl
