#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dbl/errors.hpp"
#include "dbl/gaussian.hpp"

namespace dbl {

/// Correlated Brownian motion W(t) ~ N(a, t Sigma) conditioned on noisy
/// linear terminal observations Y = P W(T) + eps, eps ~ N(0, T omega).
/// omega is per-unit-time, matching the view convention.
struct BridgeSpec {
    Eigen::VectorXd a;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd P;
    Eigen::MatrixXd omega;
    double T = 1.0;
    Eigen::VectorXd y;

    static BridgeSpec make(Eigen::VectorXd a, Eigen::MatrixXd sigma, Eigen::MatrixXd P,
                           Eigen::MatrixXd omega, double T, Eigen::VectorXd y);

    Eigen::Index dim() const { return a.size(); }
};

enum class SdeScheme {
    Exact,  ///< exact Gaussian transitions; no discretization bias
    Euler   ///< Euler-Maruyama of the bridge SDE, for cross-validation only
};

/// Distribution of the conditioned process B(t) = (W(t) | Y = y) on [0, T].
///
/// The whitened residual Bbar(t) = L^{-1}(B(t) - E[B(t)]) is a vector of
/// dependent one-dimensional bridges from 0 to 0; its component i is pinned
/// at the whitened hitting time 1/H_ii. Each original component B_i(t) is
/// itself (marginally) a scaled one-dimensional bridge whose hitting time is
/// Sigma_ii / (L H L^T)_ii; both views of the process are exposed because
/// each answers a different question.
class BridgeLaw {
public:
    static BridgeLaw build(const BridgeSpec& spec);

    const BridgeSpec& spec() const { return spec_; }
    const Eigen::MatrixXd& beta1() const { return beta1_; }  ///< (1/T) Sigma P^T (P Sigma P^T + omega)^{-1}
    const Eigen::MatrixXd& H() const { return H_; }          ///< (1/T) (PL)^T (P Sigma P^T + omega)^{-1} PL
    const Eigen::MatrixXd& chol_lower() const { return L_; }

    /// Per-component hitting times Sigma_ii / (L H L^T)_ii; +inf for
    /// components the views carry no information about.
    const Eigen::VectorXd& hitting_times() const { return hitting_; }

    /// Hitting times 1/H_ii of the whitened bridges Bbar_i; +inf on the set
    /// where P L_i = 0.
    const Eigen::VectorXd& whitened_hitting_times() const { return whitened_hitting_; }

    Eigen::VectorXd mean(double t) const;
    /// Cov(B(t), B(s)) = min(s,t) Sigma - s t L H L^T.
    Eigen::MatrixXd cov(double s, double t) const;

    /// Drift matrix of the whitened bridge SDE,
    /// (1/T)(PL)^T ((1 - t/T) P Sigma P^T + omega)^{-1} PL.
    Eigen::MatrixXd bbar_beta2(double t) const;
    /// Mean-reversion matrix in original coordinates,
    /// Sigma P^T ((T - t) P Sigma P^T + T omega)^{-1} P = L bbar_beta2 L^{-1}.
    Eigen::MatrixXd beta2(double t) const;

private:
    explicit BridgeLaw(BridgeSpec spec) : spec_(std::move(spec)) {}
    BridgeSpec spec_;
    Eigen::MatrixXd beta1_;
    Eigen::MatrixXd H_;
    Eigen::MatrixXd lhlt_;  // L H L^T = (1/T) Sigma P^T (P Sigma P^T + omega)^{-1} P Sigma
    Eigen::MatrixXd L_;
    Eigen::VectorXd hitting_;
    Eigen::VectorXd whitened_hitting_;
};

/// Hitting-time monotonicity: enlarging the view noise can only delay every
/// hitting time. Throws NotComparable when omega_larger - spec.omega is
/// indefinite. Returns true iff the hitting times under omega_larger dominate
/// those under spec.omega componentwise (whitened and per-component alike).
bool hitting_time_monotonicity_check(const BridgeSpec& spec, const Eigen::MatrixXd& omega_larger);

/// Sample one bridge path on the grid (strictly increasing, within [0, T]).
/// Exact scheme: every increment is drawn from the true conditional law of
/// B(t_{k+1}) given B(t_k), obtained by Gaussian conditioning on the closed
/// form joint — never an Euler step. Returns |grid| x N.
Eigen::MatrixXd sample_bridge_path(const BridgeLaw& law, const std::vector<double>& grid,
                                   std::uint64_t rng_seed, SdeScheme scheme = SdeScheme::Exact);

/// Sample many paths with the per-step transition laws computed once. Path p
/// uses the derived seed Rng::derive(rng_seed, p), so any contiguous block of
/// paths can be reproduced independently.
std::vector<Eigen::MatrixXd> sample_bridge_paths(const BridgeLaw& law, const std::vector<double>& grid,
                                                 int n_paths, std::uint64_t rng_seed,
                                                 SdeScheme scheme = SdeScheme::Exact);

}  // namespace dbl
