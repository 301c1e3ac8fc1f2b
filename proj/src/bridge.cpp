#include "dbl/bridge.hpp"

#include <cmath>
#include <limits>

#include "dbl/rng.hpp"

namespace dbl {

namespace {
constexpr const char* kModule = "bridge";
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

BridgeSpec BridgeSpec::make(Eigen::VectorXd a, Eigen::MatrixXd sigma, Eigen::MatrixXd P,
                            Eigen::MatrixXd omega, double T, Eigen::VectorXd y) {
    const Eigen::Index n = a.size();
    const Eigen::Index k = P.rows();
    if (sigma.rows() != n || sigma.cols() != n) throw ShapeMismatch(kModule, "sigma must be N x N");
    if (P.cols() != n) throw ShapeMismatch(kModule, "P must be K x N");
    if (omega.rows() != k || omega.cols() != k) throw ShapeMismatch(kModule, "omega must be K x K");
    if (y.size() != k) throw ShapeMismatch(kModule, "y must be length K");
    if (!(T > 0.0)) throw ValidationError(kModule, "T must be positive");
    CholeskyFactor::compute(symmetrize(sigma), kModule);
    CholeskyFactor::compute(symmetrize(omega), kModule);
    return BridgeSpec{std::move(a), symmetrize(sigma), std::move(P), symmetrize(omega), T, std::move(y)};
}

BridgeLaw BridgeLaw::build(const BridgeSpec& spec) {
    BridgeLaw law(spec);
    const Eigen::MatrixXd gram = symmetrize(spec.P * spec.sigma * spec.P.transpose() + spec.omega);
    CholeskyFactor gram_chol = [&] {
        try {
            return CholeskyFactor::compute(gram, kModule);
        } catch (const NotPositiveDefinite&) {
            throw SingularViewGram(kModule, "P Sigma P^T + omega is not invertible");
        }
    }();

    law.L_ = CholeskyFactor::compute(spec.sigma, kModule).lower();
    const Eigen::MatrixXd PL = spec.P * law.L_;

    law.beta1_ = gram_chol.solve(spec.P * spec.sigma).transpose() / spec.T;  // N x K
    law.H_ = symmetrize(PL.transpose() * gram_chol.solve(PL) / spec.T);      // N x N
    law.lhlt_ = symmetrize(law.L_ * law.H_ * law.L_.transpose());

    const Eigen::Index n = spec.dim();
    law.hitting_ = Eigen::VectorXd(n);
    law.whitened_hitting_ = Eigen::VectorXd(n);
    const double pl_scale = spec.P.norm() * law.L_.norm();
    for (Eigen::Index i = 0; i < n; ++i) {
        // P L_i = 0 means the views carry nothing about the i-th whitened
        // component; it stays a free Brownian motion.
        law.whitened_hitting_(i) = (PL.col(i).norm() < 1e-12 * pl_scale) ? kInf : 1.0 / law.H_(i, i);
        const double pinned = law.lhlt_(i, i);
        law.hitting_(i) =
            (pinned < 1e-12 * spec.sigma(i, i) / spec.T) ? kInf : spec.sigma(i, i) / pinned;
    }
    return law;
}

Eigen::VectorXd BridgeLaw::mean(double t) const {
    return spec_.a + t * (beta1_ * (spec_.y - spec_.P * spec_.a));
}

Eigen::MatrixXd BridgeLaw::cov(double s, double t) const {
    return std::min(s, t) * spec_.sigma - s * t * lhlt_;
}

Eigen::MatrixXd BridgeLaw::bbar_beta2(double t) const {
    const Eigen::MatrixXd PL = spec_.P * L_;
    const Eigen::MatrixXd gram =
        symmetrize((1.0 - t / spec_.T) * spec_.P * spec_.sigma * spec_.P.transpose() + spec_.omega);
    return PL.transpose() * CholeskyFactor::compute(gram, kModule).solve(PL) / spec_.T;
}

Eigen::MatrixXd BridgeLaw::beta2(double t) const {
    const Eigen::MatrixXd gram = symmetrize((spec_.T - t) * spec_.P * spec_.sigma * spec_.P.transpose() +
                                            spec_.T * spec_.omega);
    return spec_.sigma * spec_.P.transpose() * CholeskyFactor::compute(gram, kModule).solve(spec_.P);
}

bool hitting_time_monotonicity_check(const BridgeSpec& spec, const Eigen::MatrixXd& omega_larger) {
    if (omega_larger.rows() != spec.omega.rows() || omega_larger.cols() != spec.omega.cols())
        throw ShapeMismatch(kModule, "omega_larger must match the bridge noise dimension");
    const Eigen::MatrixXd diff = symmetrize(omega_larger - spec.omega);
    const double scale = std::max(1.0, diff.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * scale)
        throw NotComparable(kModule, "omega_larger - omega is indefinite");

    const BridgeLaw base = BridgeLaw::build(spec);
    BridgeSpec larger = spec;
    larger.omega = symmetrize(omega_larger);
    const BridgeLaw grown = BridgeLaw::build(larger);

    const double tol = 1e-12 * spec.T;
    for (Eigen::Index i = 0; i < spec.dim(); ++i) {
        if (grown.hitting_times()(i) < base.hitting_times()(i) - tol) return false;
        if (grown.whitened_hitting_times()(i) < base.whitened_hitting_times()(i) - tol) return false;
    }
    return true;
}

namespace {

struct ExactStep {
    Eigen::VectorXd base;   // mean(t_{k+1}) - gain * mean(t_k)
    Eigen::MatrixXd gain;   // Cov(t_{k+1}, t_k) Cov(t_k, t_k)^{-1}
    Eigen::MatrixXd noise;  // PSD square root of the conditional covariance
    bool from_origin = false;
};

/// One transition law per grid interval, built by conditioning the
/// closed-form joint of (B(t_k), B(t_{k+1})) on the first block.
std::vector<ExactStep> build_exact_steps(const BridgeLaw& law, const std::vector<double>& grid) {
    const Eigen::Index n = law.spec().dim();
    std::vector<Eigen::Index> observed(n);
    for (Eigen::Index i = 0; i < n; ++i) observed[i] = i;

    std::vector<ExactStep> steps;
    steps.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ExactStep step;
        const double t = grid[k];
        // B(0) = a almost surely, so a step whose left endpoint is 0 draws
        // from the unconditional marginal at t.
        if (k == 0 || grid[k - 1] == 0.0) {
            step.from_origin = true;
            step.base = law.mean(t);
            step.gain = Eigen::MatrixXd::Zero(n, n);
            step.noise = psd_sqrt(law.cov(t, t));
        } else {
            const double s = grid[k - 1];
            GaussianVector joint;
            joint.mean = Eigen::VectorXd(2 * n);
            joint.mean << law.mean(s), law.mean(t);
            joint.cov = Eigen::MatrixXd(2 * n, 2 * n);
            joint.cov.topLeftCorner(n, n) = law.cov(s, s);
            joint.cov.topRightCorner(n, n) = law.cov(s, t);
            joint.cov.bottomLeftCorner(n, n) = law.cov(t, s);
            joint.cov.bottomRightCorner(n, n) = law.cov(t, t);
            joint.cov = symmetrize(joint.cov);
            const ConditionalMap map = conditional_map(joint, observed);
            step.base = map.base;
            step.gain = map.gain;
            step.noise = psd_sqrt(map.cov);
        }
        steps.push_back(std::move(step));
    }
    return steps;
}

Eigen::MatrixXd run_exact(const std::vector<ExactStep>& steps, Eigen::Index n, Rng& rng) {
    Eigen::MatrixXd path(steps.size(), n);
    Eigen::VectorXd state(n);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const ExactStep& step = steps[k];
        Eigen::VectorXd mu = step.from_origin ? step.base : Eigen::VectorXd(step.base + step.gain * state);
        state = mu + step.noise * rng.normal_vector(n);
        path.row(k) = state.transpose();
    }
    return path;
}

Eigen::MatrixXd run_euler(const BridgeLaw& law, const std::vector<double>& grid,
                          const std::vector<Eigen::MatrixXd>& drift, Rng& rng) {
    const Eigen::Index n = law.spec().dim();
    Eigen::MatrixXd path(grid.size(), n);
    Eigen::VectorXd bbar = Eigen::VectorXd::Zero(n);
    double t = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double dt = grid[k] - t;
        if (dt > 0.0) bbar += -dt * (drift[k] * bbar) + std::sqrt(dt) * rng.normal_vector(n);
        t = grid[k];
        path.row(k) = (law.mean(t) + law.chol_lower() * bbar).transpose();
    }
    return path;
}

void check_grid(const BridgeLaw& law, const std::vector<double>& grid) {
    if (grid.empty()) throw GridOutOfRange(kModule, "grid is empty");
    double prev = -1.0;
    for (double t : grid) {
        if (t < 0.0 || t > law.spec().T) throw GridOutOfRange(kModule, "grid point outside [0, T]");
        if (t <= prev) throw GridOutOfRange(kModule, "grid must be strictly increasing");
        prev = t;
    }
}

}  // namespace

Eigen::MatrixXd sample_bridge_path(const BridgeLaw& law, const std::vector<double>& grid,
                                   std::uint64_t rng_seed, SdeScheme scheme) {
    return sample_bridge_paths(law, grid, 1, rng_seed, scheme).front();
}

std::vector<Eigen::MatrixXd> sample_bridge_paths(const BridgeLaw& law, const std::vector<double>& grid,
                                                 int n_paths, std::uint64_t rng_seed, SdeScheme scheme) {
    check_grid(law, grid);
    const Eigen::Index n = law.spec().dim();
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(n_paths));

    if (scheme == SdeScheme::Exact) {
        const std::vector<ExactStep> steps = build_exact_steps(law, grid);
        for (int p = 0; p < n_paths; ++p) {
            Rng rng(Rng::derive(rng_seed, static_cast<std::uint64_t>(p)));
            out.push_back(run_exact(steps, n, rng));
        }
    } else {
        // Drift matrix at the left endpoint of each step (the classical
        // explicit scheme); grid point k uses beta2 evaluated at grid[k-1].
        std::vector<Eigen::MatrixXd> drift(grid.size());
        double t = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            drift[k] = law.bbar_beta2(t);
            t = grid[k];
        }
        for (int p = 0; p < n_paths; ++p) {
            Rng rng(Rng::derive(rng_seed, static_cast<std::uint64_t>(p)));
            out.push_back(run_euler(law, grid, drift, rng));
        }
    }
    return out;
}

}  // namespace dbl
