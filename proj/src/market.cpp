#include "dbl/market.hpp"

#include <algorithm>
#include <cmath>

#include "dbl/rng.hpp"

namespace dbl {

namespace {
constexpr const char* kModule = "market_views";

void require_spd(const Eigen::MatrixXd& m, const char* what) {
    if (m.rows() != m.cols()) throw ShapeMismatch(kModule, std::string(what) + " must be square");
    CholeskyFactor::compute(m, kModule);  // throws NotPositiveDefinite on failure
}

}  // namespace

MarketModel::MarketModel(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f, double horizon,
                         CholeskyFactor chol)
    : mu_(std::move(mu)),
      sigma_(std::move(sigma)),
      r_f_(r_f),
      horizon_(horizon),
      chol_(std::move(chol)) {
    mu_x_ = mu_ - 0.5 * sigma_.diagonal();
}

MarketModel MarketModel::make(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double r_f, double horizon) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size())
        throw ShapeMismatch(kModule, "sigma must be N x N matching mu");
    if (!(horizon > 0.0)) throw ValidationError(kModule, "horizon must be positive");
    const double scale = sigma.norm();
    if (scale > 0.0 && (sigma - sigma.transpose()).norm() > 1e-12 * scale)
        throw NumericalFailure(kModule, "sigma is not symmetric");
    Eigen::MatrixXd sym = symmetrize(sigma);
    CholeskyFactor chol = CholeskyFactor::compute(sym, kModule);
    return MarketModel(std::move(mu), std::move(sym), r_f, horizon, std::move(chol));
}

ViewSet ViewSet::make(Eigen::MatrixXd P, Eigen::MatrixXd omega, double given_at, double horizon,
                      std::optional<Eigen::VectorXd> y) {
    if (P.rows() == 0) throw ShapeMismatch(kModule, "pick matrix has no rows");
    if (omega.rows() != P.rows() || omega.cols() != P.rows())
        throw ShapeMismatch(kModule, "omega must be K x K matching the pick matrix");
    if (!(given_at < horizon)) throw ValidationError(kModule, "view requires t1 < t2");
    for (Eigen::Index k = 0; k < P.rows(); ++k)
        if (P.row(k).norm() == 0.0)
            throw ValidationError(kModule, "pick matrix row " + std::to_string(k) + " is zero");
    require_spd(omega, "omega");
    if (y && y->size() != P.rows()) throw ShapeMismatch(kModule, "realized view length mismatch");
    return ViewSet{std::move(P), symmetrize(omega), given_at, horizon, std::move(y)};
}

Eigen::MatrixXd make_omega_alpha(const MarketModel& market, const Eigen::MatrixXd& P, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError(kModule, "alpha must be positive");
    if (P.cols() != market.n_assets()) throw ShapeMismatch(kModule, "pick matrix columns must match assets");
    Eigen::MatrixXd gram = symmetrize(P * market.sigma() * P.transpose());
    try {
        CholeskyFactor::compute(gram, kModule);
    } catch (const NotPositiveDefinite&) {
        throw DegeneratePick(kModule, "P Sigma P^T is singular; views are redundant");
    }
    return alpha * gram;
}

Eigen::VectorXd sample_view(const MarketModel& market, const ViewSet& views, const Eigen::VectorXd& x_T,
                            std::uint64_t rng_seed) {
    if (x_T.size() != market.n_assets()) throw ShapeMismatch(kModule, "x_T length must match assets");
    Rng rng(rng_seed);
    const CholeskyFactor omega_chol = CholeskyFactor::compute(views.omega, kModule);
    const Eigen::VectorXd z = omega_chol.lower() * rng.normal_vector(views.n_views());
    return views.P * x_T + std::sqrt(views.span()) * z;
}

RevisionSchedule RevisionSchedule::make(Eigen::MatrixXd P, std::vector<double> times,
                                        std::vector<Eigen::MatrixXd> omegas, double horizon) {
    RevisionSchedule s;
    if (times.empty() || times.front() != 0.0)
        throw ValidationError(kModule, "revision times must start at t_0 = 0");
    if (!std::is_sorted(times.begin(), times.end()) ||
        std::adjacent_find(times.begin(), times.end()) != times.end())
        throw ValidationError(kModule, "revision times must be strictly increasing");
    if (times.back() >= horizon) throw ValidationError(kModule, "last revision must precede the horizon");
    if (omegas.size() != times.size())
        throw ShapeMismatch(kModule, "need one omega per revision time");
    for (const auto& om : omegas) {
        if (om.rows() != P.rows() || om.cols() != P.rows())
            throw ShapeMismatch(kModule, "omega must be K x K matching the pick matrix");
        require_spd(om, "omega^j");
    }
    for (std::size_t j = 0; j + 1 < omegas.size(); ++j) {
        Eigen::MatrixXd innovation = symmetrize(omegas[j] - omegas[j + 1]);
        // A revision must carry information: Omega^{j,0} strictly positive
        // definite, which also guarantees the PSD ordering Omega^j >= Omega^{j+1}.
        try {
            CholeskyFactor::compute(innovation, kModule);
        } catch (const NotPositiveDefinite&) {
            throw NotPositiveDefinite(
                kModule, "innovation covariance Omega^" + std::to_string(j) + " - Omega^" +
                             std::to_string(j + 1) + " is not positive definite");
        }
        s.innovations_.push_back(std::move(innovation));
    }
    s.P_ = std::move(P);
    s.times_ = std::move(times);
    s.omegas_ = std::move(omegas);
    s.horizon_ = horizon;
    return s;
}

double RevisionSchedule::interval_end(int j) const {
    if (j < 0 || j >= static_cast<int>(times_.size()))
        throw IntervalMismatch(kModule, "revision interval index out of range");
    return (j + 1 < static_cast<int>(times_.size())) ? times_[j + 1] : horizon_;
}

ShortTermSchedule ShortTermSchedule::make(Eigen::MatrixXd P, std::vector<double> times,
                                          std::vector<Eigen::MatrixXd> phi,
                                          std::vector<Eigen::MatrixXd> idio_covs) {
    ShortTermSchedule s;
    if (times.size() < 2 || times.front() != 0.0)
        throw ValidationError(kModule, "short-term times must run from T_0 = 0 to T");
    if (!std::is_sorted(times.begin(), times.end()) ||
        std::adjacent_find(times.begin(), times.end()) != times.end())
        throw ValidationError(kModule, "short-term times must be strictly increasing");
    const auto intervals = times.size() - 1;
    if (idio_covs.size() != intervals)
        throw ShapeMismatch(kModule, "need one idiosyncratic covariance per interval");
    const Eigen::Index k = P.rows();
    for (const auto& om : idio_covs) {
        if (om.rows() != k || om.cols() != k)
            throw ShapeMismatch(kModule, "idiosyncratic covariance must be K x K");
        require_spd(om, "omega^{j,0}");
    }
    for (const auto& m : phi)
        if (m.rows() != k || m.cols() != k)
            throw ShapeMismatch(kModule, "autoregression matrices must be K x K");
    s.P_ = std::move(P);
    s.times_ = std::move(times);
    s.phi_ = std::move(phi);
    s.idio_ = std::move(idio_covs);
    return s;
}

Eigen::VectorXd refine_short_term_view(const ShortTermSchedule& schedule,
                                       const std::vector<Eigen::VectorXd>& raw_views,
                                       const std::vector<Eigen::VectorXd>& realized_returns, int j) {
    if (j < 0 || j >= schedule.intervals())
        throw IntervalMismatch(kModule, "short-term interval index out of range");
    if (static_cast<int>(raw_views.size()) <= j)
        throw MissingHistory(kModule, "raw view for interval " + std::to_string(j) + " missing");
    if (j == 0) return raw_views[0];

    const int pbar = std::min(schedule.order(), j);
    if (static_cast<int>(realized_returns.size()) < j)
        throw MissingHistory(kModule, "realized returns required through interval " + std::to_string(j - 1));

    Eigen::VectorXd ybar = raw_views[j];
    for (int i = 1; i <= pbar; ++i) {
        const int past = j - i;
        const Eigen::VectorXd eps = raw_views[past] - schedule.P() * realized_returns[past];
        ybar -= schedule.phi()[i - 1] * eps;
    }
    return ybar;
}

MultiHorizonViews MultiHorizonViews::make(Eigen::VectorXd horizons, Eigen::MatrixXd picks,
                                          Eigen::MatrixXd omega, std::optional<Eigen::VectorXd> y) {
    const Eigen::Index k = picks.rows();
    if (horizons.size() != k) throw ShapeMismatch(kModule, "one horizon per view required");
    for (Eigen::Index i = 0; i + 1 < k; ++i)
        if (horizons(i) > horizons(i + 1))
            throw UnsortedHorizons(kModule, "view horizons must be ascending");
    if (!(horizons.minCoeff() > 0.0)) throw ValidationError(kModule, "view horizons must be positive");
    if (omega.rows() != k || omega.cols() != k)
        throw ShapeMismatch(kModule, "omega must be K x K");
    require_spd(omega, "omega");
    if (y && y->size() != k) throw ShapeMismatch(kModule, "realized view length mismatch");
    return MultiHorizonViews{std::move(horizons), std::move(picks), symmetrize(omega), std::move(y)};
}

CollapsedView collapse_multi_horizon(const MultiHorizonViews& views, const MarketModel& market, int j) {
    const int k = static_cast<int>(views.n_views());
    if (j < 1 || j > k) throw IntervalMismatch(kModule, "interval index must satisfy 1 <= j <= K");
    if (views.picks.cols() != market.n_assets())
        throw ShapeMismatch(kModule, "pick matrix columns must match assets");

    const int m = k - j + 1;  // active views j..K (1-based)
    const double t_j = views.horizons(j - 1);
    CollapsedView out;
    out.horizon = t_j;
    out.P = views.picks.bottomRows(m);
    out.bias = Eigen::VectorXd(m);
    out.omega = Eigen::MatrixXd(m, m);

    const Eigen::MatrixXd pick_gram = out.P * market.sigma() * out.P.transpose();
    for (int a = 0; a < m; ++a) {
        const double t_a = views.horizons(j - 1 + a);
        out.bias(a) = (t_a - t_j) * out.P.row(a).dot(market.log_drift());
        for (int b = 0; b < m; ++b) {
            const double t_b = views.horizons(j - 1 + b);
            const double brownian = std::min(t_a - t_j, t_b - t_j) * pick_gram(a, b);
            const double expert = std::sqrt(t_a * t_b) * views.omega(j - 1 + a, j - 1 + b);
            out.omega(a, b) = (brownian + expert) / t_j;
        }
    }
    out.omega = symmetrize(out.omega);
    return out;
}

}  // namespace dbl
