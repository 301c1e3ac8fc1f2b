#include "dbl/conditional.hpp"

#include <cmath>

#include "dbl/rng.hpp"

namespace dbl {

namespace {
constexpr const char* kModule = "conditional_dynamics";
}

ConditionalLaw::ConditionalLaw(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f, double horizon,
                               Eigen::MatrixXd P, Eigen::MatrixXd omega, Eigen::VectorXd y)
    : mu_(std::move(mu)),
      sigma_(std::move(sigma)),
      r_f_(r_f),
      horizon_(horizon),
      P_(std::move(P)),
      omega_(std::move(omega)),
      y_(std::move(y)),
      sigma_chol_(CholeskyFactor::compute(sigma_, kModule)) {
    mu_x_ = mu_ - 0.5 * sigma_.diagonal();
    const Eigen::MatrixXd gram = symmetrize(P_ * sigma_ * P_.transpose() + omega_);
    CholeskyFactor gram_chol = [&] {
        try {
            return CholeskyFactor::compute(gram, kModule);
        } catch (const NotPositiveDefinite&) {
            throw SingularViewGram(kModule, "P Sigma P^T + omega is not invertible");
        }
    }();
    beta1_ = gram_chol.solve(P_ * sigma_).transpose() / horizon_;
    cond_cov_correction_ = symmetrize(sigma_ * P_.transpose() * gram_chol.solve(P_ * sigma_) / horizon_);
    gap_ = y_ - horizon_ * (P_ * mu_x_);
    cond_drift_ = mu_x_ + beta1_ * gap_;
    price_drift_ = mu_ + beta1_ * gap_;
}

ConditionalLaw ConditionalLaw::build(const MarketModel& market, const ViewSet& views,
                                     const Eigen::VectorXd& y) {
    if (views.P.cols() != market.n_assets())
        throw ShapeMismatch(kModule, "pick matrix columns must match assets");
    if (y.size() != views.n_views()) throw ShapeMismatch(kModule, "view vector length mismatch");
    return ConditionalLaw(market.mu(), market.sigma(), market.r_f(), views.span(), views.P, views.omega, y);
}

ConditionalLaw ConditionalLaw::from_parameters(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f,
                                               double horizon, Eigen::MatrixXd P, Eigen::MatrixXd omega,
                                               Eigen::VectorXd y) {
    if (!(horizon > 0.0)) throw ValidationError(kModule, "horizon must be positive");
    return ConditionalLaw(std::move(mu), std::move(sigma), r_f, horizon, std::move(P), std::move(omega),
                          std::move(y));
}

Eigen::MatrixXd ConditionalLaw::beta2(double t) const {
    const Eigen::MatrixXd gram =
        symmetrize((horizon_ - t) * P_ * sigma_ * P_.transpose() + horizon_ * omega_);
    return sigma_ * P_.transpose() * CholeskyFactor::compute(gram, kModule).solve(P_);
}

Eigen::MatrixXd ConditionalLaw::cond_cov(double s, double t) const {
    return std::min(s, t) * sigma_ - s * t * cond_cov_correction_;
}

Eigen::VectorXd ConditionalLaw::drift(double t, const Eigen::VectorXd& x) const {
    return price_drift_ + beta2(t) * (cond_mean(t) - x);
}

Eigen::VectorXd ConditionalLaw::log_drift(double t, const Eigen::VectorXd& x) const {
    return drift(t, x) - 0.5 * sigma_.diagonal();
}

ConditionalTransitions::ConditionalTransitions(const ConditionalLaw& law, std::vector<double> grid)
    : grid_(std::move(grid)), dim_(law.n_assets()) {
    if (grid_.empty()) throw GridOutOfRange(kModule, "grid is empty");
    double prev = -1.0;
    for (double t : grid_) {
        if (t < 0.0 || t > law.horizon()) throw GridOutOfRange(kModule, "grid point outside [0, horizon]");
        if (t <= prev) throw GridOutOfRange(kModule, "grid must be strictly increasing");
        prev = t;
    }

    const Eigen::Index n = dim_;
    std::vector<Eigen::Index> observed(n);
    for (Eigen::Index i = 0; i < n; ++i) observed[i] = i;

    steps_.reserve(grid_.size());
    for (std::size_t k = 0; k < grid_.size(); ++k) {
        Step step;
        const double t = grid_[k];
        if (k == 0 || grid_[k - 1] == 0.0) {
            step.from_origin = true;
            step.base = law.cond_mean(t);
            step.gain = Eigen::MatrixXd::Zero(n, n);
            step.noise = psd_sqrt(law.cond_cov(t, t));
        } else {
            const double s = grid_[k - 1];
            GaussianVector joint;
            joint.mean = Eigen::VectorXd(2 * n);
            joint.mean << law.cond_mean(s), law.cond_mean(t);
            joint.cov = Eigen::MatrixXd(2 * n, 2 * n);
            joint.cov.topLeftCorner(n, n) = law.cond_cov(s, s);
            joint.cov.topRightCorner(n, n) = law.cond_cov(s, t);
            joint.cov.bottomLeftCorner(n, n) = law.cond_cov(t, s);
            joint.cov.bottomRightCorner(n, n) = law.cond_cov(t, t);
            joint.cov = symmetrize(joint.cov);
            const ConditionalMap map = conditional_map(joint, observed);
            step.base = map.base;
            step.gain = map.gain;
            step.noise = psd_sqrt(map.cov);
        }
        steps_.push_back(std::move(step));
    }
}

Eigen::MatrixXd ConditionalTransitions::sample(Rng& rng) const {
    Eigen::MatrixXd path(grid_.size(), dim_);
    Eigen::VectorXd state = Eigen::VectorXd::Zero(dim_);
    for (std::size_t k = 0; k < steps_.size(); ++k) {
        const Step& step = steps_[k];
        Eigen::VectorXd mu = step.from_origin ? step.base : Eigen::VectorXd(step.base + step.gain * state);
        state = mu + step.noise * rng.normal_vector(dim_);
        path.row(k) = state.transpose();
    }
    return path;
}

SmoothedMoments kalman_smoother_oracle(const MarketModel& market, const ViewSet& views,
                                       const Eigen::VectorXd& y, int n_steps) {
    if (n_steps < 2) throw ValidationError(kModule, "kalman smoother requires n_steps >= 2");
    if (y.size() != views.n_views()) throw ShapeMismatch(kModule, "view vector length mismatch");

    const Eigen::Index n = market.n_assets();
    const double span = views.span();
    const double dt = span / n_steps;
    const Eigen::VectorXd step_drift = dt * market.log_drift();
    const Eigen::MatrixXd step_cov = dt * market.sigma();
    const Eigen::MatrixXd obs_cov = span * views.omega;
    const Eigen::MatrixXd& P = views.P;

    // Forward pass. The only observation arrives at the final step, so the
    // predicted and filtered moments coincide until then.
    std::vector<Eigen::VectorXd> mean_pred(n_steps + 1), mean_filt(n_steps + 1);
    std::vector<Eigen::MatrixXd> cov_pred(n_steps + 1), cov_filt(n_steps + 1);
    mean_pred[0] = mean_filt[0] = Eigen::VectorXd::Zero(n);
    cov_pred[0] = cov_filt[0] = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k <= n_steps; ++k) {
        mean_pred[k] = mean_filt[k - 1] + step_drift;
        cov_pred[k] = symmetrize(cov_filt[k - 1] + step_cov);
        mean_filt[k] = mean_pred[k];
        cov_filt[k] = cov_pred[k];
    }
    {
        const Eigen::MatrixXd innov_cov = symmetrize(P * cov_pred[n_steps] * P.transpose() + obs_cov);
        const CholeskyFactor chol = CholeskyFactor::compute(innov_cov, kModule);
        const Eigen::MatrixXd gain = chol.solve(P * cov_pred[n_steps]).transpose();
        mean_filt[n_steps] = mean_pred[n_steps] + gain * (y - P * mean_pred[n_steps]);
        const Eigen::MatrixXd i_kp = Eigen::MatrixXd::Identity(n, n) - gain * P;
        cov_filt[n_steps] =
            symmetrize(i_kp * cov_pred[n_steps] * i_kp.transpose() + gain * obs_cov * gain.transpose());
    }

    // Rauch-Tung-Striebel backward pass (identity transition matrix).
    SmoothedMoments out;
    out.times.resize(n_steps + 1);
    out.means.resize(n_steps + 1);
    out.covs.resize(n_steps + 1);
    out.means[n_steps] = mean_filt[n_steps];
    out.covs[n_steps] = cov_filt[n_steps];
    for (int k = n_steps - 1; k >= 0; --k) {
        Eigen::MatrixXd gain;
        if (cov_filt[k].norm() == 0.0) {
            gain = Eigen::MatrixXd::Zero(n, n);  // degenerate prior X(0) = 0
        } else {
            const CholeskyFactor chol = CholeskyFactor::compute(cov_pred[k + 1], kModule);
            gain = chol.solve(cov_filt[k]).transpose();
        }
        out.means[k] = mean_filt[k] + gain * (out.means[k + 1] - mean_pred[k + 1]);
        out.covs[k] =
            symmetrize(cov_filt[k] + gain * (out.covs[k + 1] - cov_pred[k + 1]) * gain.transpose());
    }
    for (int k = 0; k <= n_steps; ++k) out.times[k] = views.given_at + k * dt;
    return out;
}

ConditionalPaths simulate_conditional_paths(const ConditionalLaw& law, const std::vector<double>& grid,
                                            int n_paths, std::uint64_t rng_seed, SdeScheme scheme,
                                            const Eigen::VectorXd& s0) {
    const Eigen::Index n = law.n_assets();
    Eigen::VectorXd start = s0.size() == 0 ? Eigen::VectorXd::Ones(n) : s0;
    if (start.size() != n) throw ShapeMismatch(kModule, "s0 length must match assets");

    ConditionalPaths out;
    out.grid = grid;
    out.log_returns.reserve(static_cast<std::size_t>(n_paths));
    out.prices.reserve(static_cast<std::size_t>(n_paths));

    if (scheme == SdeScheme::Exact) {
        const ConditionalTransitions trans(law, grid);
        for (int p = 0; p < n_paths; ++p) {
            Rng rng(Rng::derive(rng_seed, static_cast<std::uint64_t>(p)));
            out.log_returns.push_back(trans.sample(rng));
        }
    } else {
        // Euler-Maruyama on the conditional SDE, retained for cross-checks.
        if (grid.empty()) throw GridOutOfRange(kModule, "grid is empty");
        std::vector<Eigen::MatrixXd> beta2(grid.size());
        double t0 = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            beta2[k] = law.beta2(t0);
            t0 = grid[k];
        }
        const Eigen::MatrixXd& L = law.sigma_chol().lower();
        const Eigen::VectorXd base = law.log_mu() + law.beta1() * law.view_gap();
        for (int p = 0; p < n_paths; ++p) {
            Rng rng(Rng::derive(rng_seed, static_cast<std::uint64_t>(p)));
            Eigen::MatrixXd path(grid.size(), n);
            Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
            double t = 0.0;
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double dt = grid[k] - t;
                if (dt < 0.0) throw GridOutOfRange(kModule, "grid must be increasing");
                if (dt > 0.0) {
                    const Eigen::VectorXd drift = base + beta2[k] * (law.cond_mean(t) - x);
                    x += dt * drift + std::sqrt(dt) * (L * rng.normal_vector(n));
                }
                t = grid[k];
                path.row(k) = x.transpose();
            }
            out.log_returns.push_back(std::move(path));
        }
    }

    for (const Eigen::MatrixXd& path : out.log_returns) {
        Eigen::MatrixXd prices = path;
        for (Eigen::Index r = 0; r < prices.rows(); ++r)
            for (Eigen::Index c = 0; c < prices.cols(); ++c)
                prices(r, c) = start(c) * std::exp(prices(r, c));
        out.prices.push_back(std::move(prices));
    }
    return out;
}

}  // namespace dbl
