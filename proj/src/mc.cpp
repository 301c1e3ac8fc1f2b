#include "dbl/mc.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "dbl/rng.hpp"

namespace dbl::mc {

namespace {

constexpr const char* kModule = "mc_lab";
constexpr std::uint64_t kViewStreamSalt = 0xA5C1ED5EEDULL;

double pairwise_sum_range(const double* data, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, n - half);
}

std::vector<double> merge_times(std::vector<double> times, double tol) {
    std::sort(times.begin(), times.end());
    std::vector<double> merged;
    for (double t : times)
        if (merged.empty() || t - merged.back() > tol) merged.push_back(t);
    return merged;
}

int locate(const std::vector<double>& grid, double t, double tol) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), t - tol);
    if (it == grid.end() || std::abs(*it - t) > tol)
        throw NumericalFailure(kModule, "time not found on the simulation grid");
    return static_cast<int>(it - grid.begin());
}

std::uint64_t fnv1a(const Eigen::MatrixXd& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t count = static_cast<std::size_t>(m.size()) * sizeof(double);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < count; ++i) {
        h ^= bytes[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

void parallel_for_paths(int n_paths, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, threads);
    if (threads == 1) {
        for (int p = 0; p < n_paths; ++p) body(p);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n_paths + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
        const int begin = w * chunk;
        const int end = std::min(n_paths, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            for (int p = begin; p < end; ++p) body(p);
        });
    }
    for (auto& th : pool) th.join();
}

struct PathAccumulator {
    std::vector<double> wealth;
    std::vector<double> turnover;
    std::vector<int> bankrupt;  // path indices (filled post-hoc, single thread)
    std::vector<unsigned char> bankrupt_flag;

    explicit PathAccumulator(int n_paths)
        : wealth(n_paths, 0.0), turnover(n_paths, 0.0), bankrupt_flag(n_paths, 0) {}

    void record(int path, const WalkResult& r) {
        wealth[static_cast<std::size_t>(path)] = r.terminal_wealth;
        turnover[static_cast<std::size_t>(path)] = r.turnover;
        bankrupt_flag[static_cast<std::size_t>(path)] = r.bankrupt ? 1 : 0;
    }

    void finalize() {
        for (std::size_t p = 0; p < bankrupt_flag.size(); ++p)
            if (bankrupt_flag[p]) bankrupt.push_back(static_cast<int>(p));
    }
};

ReportRow aggregate_row(const PathAccumulator& acc, double z0, double gamma, double horizon) {
    ReportRow row;
    row.n_paths = static_cast<int>(acc.wealth.size());
    row.n_bankrupt = static_cast<int>(acc.bankrupt.size());
    if (row.n_bankrupt > 0)
        throw BankruptcyUnderflow(kModule, std::to_string(row.n_bankrupt) +
                                               " path(s) hit non-positive wealth; first path " +
                                               std::to_string(acc.bankrupt.front()));
    std::vector<double> returns(acc.wealth.size());
    for (std::size_t i = 0; i < acc.wealth.size(); ++i) returns[i] = acc.wealth[i] / z0 - 1.0;
    const Estimate mean = mean_estimate(returns);
    row.mean_return = mean.value;
    row.se_mean = mean.se;
    row.return_std = mean.se * std::sqrt(static_cast<double>(returns.size()));
    const Estimate cer = certainty_equivalent(acc.wealth, gamma, z0, horizon);
    row.cer = cer.value;
    row.cer_se = cer.se;
    const Estimate to = mean_estimate(acc.turnover);
    row.turnover = to.value;
    row.turnover_se = to.se;
    return row;
}

}  // namespace

double pairwise_sum(const std::vector<double>& values) {
    return values.empty() ? 0.0 : pairwise_sum_range(values.data(), values.size());
}

Eigen::MatrixXd sample_prior_path(const MarketModel& market, const std::vector<double>& grid, Rng& rng) {
    const Eigen::Index n = market.n_assets();
    Eigen::MatrixXd path(grid.size(), n);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    double t = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double dt = grid[k] - t;
        if (dt > 0.0)
            x += dt * market.log_drift() + std::sqrt(dt) * (market.chol().lower() * rng.normal_vector(n));
        t = grid[k];
        path.row(k) = x.transpose();
    }
    return path;
}

Estimate mean_estimate(const std::vector<double>& values) {
    Estimate e;
    const std::size_t n = values.size();
    if (n == 0) return e;
    e.value = pairwise_sum(values) / static_cast<double>(n);
    if (n == 1) return e;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - e.value;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    e.se = std::sqrt(var / static_cast<double>(n));
    return e;
}

Estimate paired_cer_difference(const std::vector<double>& wealth_a, const std::vector<double>& wealth_b,
                               double gamma, double horizon) {
    if (wealth_a.size() != wealth_b.size() || wealth_a.empty())
        throw ValidationError(kModule, "paired comparison needs equal-length samples");
    if (!(gamma > 1.0)) throw GammaOutOfRange(kModule, "paired CER comparison requires gamma > 1");
    const std::size_t n = wealth_a.size();
    std::vector<double> ua(n), ub(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(wealth_a[i] > 0.0) || !(wealth_b[i] > 0.0))
            throw NonPositiveWealth(kModule, "terminal wealth must be positive");
        ua[i] = std::exp((1.0 - gamma) * std::log(wealth_a[i]));
        ub[i] = std::exp((1.0 - gamma) * std::log(wealth_b[i]));
    }
    const double mean_a = pairwise_sum(ua) / static_cast<double>(n);
    const double mean_b = pairwise_sum(ub) / static_cast<double>(n);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = ua[i] / mean_a - ub[i] / mean_b;
    const Estimate mv = mean_estimate(v);
    Estimate out;
    out.value = (std::log(mean_a) - std::log(mean_b)) / ((1.0 - gamma) * horizon);
    out.se = mv.se / ((gamma - 1.0) * horizon);
    return out;
}

Estimate certainty_equivalent(const std::vector<double>& terminal_wealth, double gamma, double z0,
                              double horizon) {
    if (!(gamma > 1.0)) throw GammaOutOfRange(kModule, "certainty equivalent requires gamma > 1");
    if (terminal_wealth.empty()) throw ValidationError(kModule, "no terminal wealth samples");
    std::vector<double> u(terminal_wealth.size());
    for (std::size_t i = 0; i < terminal_wealth.size(); ++i) {
        if (!(terminal_wealth[i] > 0.0))
            throw NonPositiveWealth(kModule, "terminal wealth must be positive for isoelastic utility");
        u[i] = std::exp((1.0 - gamma) * std::log(terminal_wealth[i]));
    }
    const Estimate mean_u = mean_estimate(u);
    Estimate out;
    out.value = (std::log(mean_u.value) - (1.0 - gamma) * std::log(z0)) / ((1.0 - gamma) * horizon);
    out.se = mean_u.se / (std::abs(1.0 - gamma) * horizon * mean_u.value);
    return out;
}

RebalancePlan RebalancePlan::periodic(double period_years) {
    if (!(period_years > 0.0)) throw ValidationError(kModule, "rebalance period must be positive");
    RebalancePlan p;
    p.mode = Mode::Periodic;
    p.period = period_years;
    return p;
}

RebalancePlan RebalancePlan::continuous(int fine_steps) {
    if (fine_steps < 252)
        throw ValidationError(kModule, "continuous approximation needs at least 252 steps per year");
    RebalancePlan p;
    p.mode = Mode::Continuous;
    p.fine_grid_steps = fine_steps;
    p.period = 1.0 / fine_steps;
    return p;
}

RebalancePlan RebalancePlan::from_label(const std::string& label) {
    if (label == "daily") return periodic(1.0 / 252);
    if (label == "weekly") return periodic(1.0 / 52);
    if (label == "monthly") return periodic(1.0 / 12);
    if (label == "continuous") return continuous();
    throw ValidationError(kModule, "unknown plan label: " + label);
}

std::vector<double> RebalancePlan::epochs(double horizon) const {
    std::vector<double> out;
    const double step = (mode == Mode::Continuous) ? 1.0 / fine_grid_steps : period;
    for (double t = 0.0; t < horizon - 1e-12; t += step) out.push_back(t);
    return out;
}

std::string RebalancePlan::label() const {
    if (mode == Mode::Continuous) return "continuous@" + std::to_string(fine_grid_steps);
    if (std::abs(period - 1.0 / 252) < 1e-15) return "daily";
    if (std::abs(period - 1.0 / 52) < 1e-15) return "weekly";
    if (std::abs(period - 1.0 / 12) < 1e-15) return "monthly";
    return "period=" + std::to_string(period);
}

WalkResult walk_wealth(double r_f, const std::vector<double>& grid, const Eigen::MatrixXd& X,
                       const std::vector<int>& epoch_indices, const WeightsFn& weights, double z0) {
    if (epoch_indices.empty()) throw ValidationError(kModule, "need at least one rebalance epoch");
    const Eigen::Index n = X.cols();
    WalkResult result;
    double z = z0;
    Eigen::VectorXd shares(n);
    Eigen::VectorXd prev_shares(n);
    bool have_prev = false;

    for (std::size_t e = 0; e < epoch_indices.size(); ++e) {
        const int idx = epoch_indices[e];
        const double t = grid[static_cast<std::size_t>(idx)];
        const Eigen::VectorXd x = X.row(idx).transpose();
        const Eigen::VectorXd pi = weights(static_cast<int>(e), t, x);
        double cash_fraction = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            shares(i) = pi(i) * z / std::exp(x(i));
            cash_fraction -= pi(i);
        }
        const double cash = cash_fraction * z;
        if (have_prev) result.turnover += (shares - prev_shares).cwiseAbs().sum();
        prev_shares = shares;
        have_prev = true;

        const int next_idx =
            (e + 1 < epoch_indices.size()) ? epoch_indices[e + 1] : static_cast<int>(grid.size()) - 1;
        const double t_next = grid[static_cast<std::size_t>(next_idx)];
        double next_z = cash * std::exp(r_f * (t_next - t));
        for (Eigen::Index i = 0; i < n; ++i) next_z += shares(i) * std::exp(X(next_idx, i));
        z = next_z;
        if (!(z > 0.0)) {
            result.bankrupt = true;
            result.violation_epoch = static_cast<int>(e);
            break;
        }
    }
    result.terminal_wealth = z;
    return result;
}

WalkResult walk_wealth_proportional(double r_f, const Eigen::MatrixXd& sigma,
                                    const std::vector<double>& grid, const Eigen::MatrixXd& X,
                                    const std::vector<int>& epoch_indices, const WeightsFn& weights,
                                    double z0) {
    if (epoch_indices.empty()) throw ValidationError(kModule, "need at least one rebalance epoch");
    const Eigen::Index n = X.cols();
    const Eigen::VectorXd half_var = 0.5 * sigma.diagonal();
    WalkResult result;
    double log_z = std::log(z0);
    Eigen::VectorXd w;

    for (std::size_t e = 0; e < epoch_indices.size(); ++e) {
        const int idx = epoch_indices[e];
        const double t = grid[static_cast<std::size_t>(idx)];
        const Eigen::VectorXd x = X.row(idx).transpose();
        const double z_here = std::exp(log_z);
        const Eigen::VectorXd nw = weights(static_cast<int>(e), t, x);
        if (e > 0) {
            for (Eigen::Index i = 0; i < n; ++i)
                result.turnover += std::abs(nw(i) - w(i)) * z_here / std::exp(x(i));
        }
        w = nw;

        const int next_idx =
            (e + 1 < epoch_indices.size()) ? epoch_indices[e + 1] : static_cast<int>(grid.size()) - 1;
        const double dt = grid[static_cast<std::size_t>(next_idx)] - t;
        const Eigen::VectorXd dx = (X.row(next_idx) - X.row(idx)).transpose();
        log_z += (r_f * (1.0 - w.sum()) + w.dot(half_var) - 0.5 * w.dot(sigma * w)) * dt + w.dot(dx);
    }
    result.terminal_wealth = std::exp(log_z);
    return result;
}

SimulationReport simulate_wealth(const ConditionalLaw& law,
                                 const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& policy,
                                 const RebalancePlan& plan, double z0, int n_paths, std::uint64_t rng_seed,
                                 double gamma_for_cer, int threads) {
    if (!(z0 > 0.0)) throw ValidationError(kModule, "initial wealth must be positive");
    if (n_paths < 1) throw ValidationError(kModule, "need at least one path");

    const double horizon = law.horizon();
    std::vector<double> grid = plan.epochs(horizon);
    std::vector<int> epoch_indices(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) epoch_indices[i] = static_cast<int>(i);
    grid.push_back(horizon);

    const ConditionalTransitions transitions(law, grid);
    PathAccumulator acc(n_paths);
    const WeightsFn weights = [&policy](int, double t, const Eigen::VectorXd& x) { return policy(t, x); };

    parallel_for_paths(n_paths, threads, [&](int p) {
        Rng rng(Rng::derive(rng_seed, static_cast<std::uint64_t>(p)));
        const Eigen::MatrixXd x = transitions.sample(rng);
        acc.record(p, walk_wealth(law.r_f(), grid, x, epoch_indices, weights, z0));
    });
    acc.finalize();

    SimulationReport report;
    report.plan = plan;
    report.seed = rng_seed;
    report.n_paths = n_paths;
    report.n_bankrupt = static_cast<int>(acc.bankrupt.size());
    report.terminal_wealth = acc.wealth;
    report.turnover_per_path = acc.turnover;
    report.bankrupt_paths = acc.bankrupt;

    std::vector<double> returns(acc.wealth.size());
    for (std::size_t i = 0; i < acc.wealth.size(); ++i) returns[i] = acc.wealth[i] / z0 - 1.0;
    report.mean_return = mean_estimate(returns);
    report.return_std = report.mean_return.se * std::sqrt(static_cast<double>(n_paths));
    report.turnover = mean_estimate(acc.turnover);
    if (report.n_bankrupt == 0 && gamma_for_cer > 1.0)
        report.cer = certainty_equivalent(acc.wealth, gamma_for_cer, z0, horizon);
    else if (report.n_bankrupt > 0)
        throw BankruptcyUnderflow(kModule,
                                  std::to_string(report.n_bankrupt) +
                                      " path(s) flagged with non-positive wealth; first path " +
                                      std::to_string(acc.bankrupt.front()));
    return report;
}

// ---------------------------------------------------------------------------
// DBL vs RCBL comparison
// ---------------------------------------------------------------------------

ComparisonReport run_comparison(const MarketModel& market, const Eigen::MatrixXd& P,
                                const ComparisonConfig& config) {
    const double T = market.horizon();
    const Eigen::Index n = market.n_assets();
    const Eigen::Index k = P.rows();
    const double tol = 1e-12 * std::max(1.0, T);

    // Union simulation grid over all plans, plus the horizon.
    std::vector<double> all_times{T};
    std::vector<std::vector<double>> plan_epochs;
    for (const auto& plan : config.plans) {
        plan_epochs.push_back(plan.epochs(T));
        all_times.insert(all_times.end(), plan_epochs.back().begin(), plan_epochs.back().end());
    }
    const std::vector<double> grid = merge_times(all_times, tol);
    std::vector<std::vector<int>> plan_epoch_idx;
    for (const auto& epochs : plan_epochs) {
        std::vector<int> idx;
        idx.reserve(epochs.size());
        for (double t : epochs) idx.push_back(locate(grid, t, tol));
        plan_epoch_idx.push_back(std::move(idx));
    }

    // Slots: union of all epoch grid indices, so per-time matrices are
    // computed once even when plans overlap.
    std::vector<int> slot_of_grid(grid.size(), -1);
    std::vector<int> slot_grid_idx;
    for (const auto& idx : plan_epoch_idx)
        for (int i : idx)
            if (slot_of_grid[static_cast<std::size_t>(i)] < 0) {
                slot_of_grid[static_cast<std::size_t>(i)] = 0;  // mark
                slot_grid_idx.push_back(i);
            }
    std::sort(slot_grid_idx.begin(), slot_grid_idx.end());
    for (std::size_t s = 0; s < slot_grid_idx.size(); ++s)
        slot_of_grid[static_cast<std::size_t>(slot_grid_idx[s])] = static_cast<int>(s);
    const std::size_t n_slots = slot_grid_idx.size();

    const Eigen::MatrixXd gram = symmetrize(P * market.sigma() * P.transpose());
    const Eigen::MatrixXd gram_chol_lower = CholeskyFactor::compute(gram, kModule).lower();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd half_var = 0.5 * market.sigma().diagonal();
    const Eigen::MatrixXd sigma_inv = symmetrize(market.chol().inverse());

    const std::size_t n_alpha = config.alphas.size();
    const std::size_t n_gamma = config.gammas.size();
    const std::size_t n_plans = config.plans.size();

    // Per-alpha conditional coefficients and per-(alpha,gamma) weight maps at
    // every epoch slot.
    std::vector<Eigen::MatrixXd> beta1(n_alpha);
    std::vector<std::vector<Eigen::MatrixXd>> beta2(n_alpha, std::vector<Eigen::MatrixXd>(n_slots));
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> w_dbl(
        n_alpha, std::vector<std::vector<Eigen::MatrixXd>>(n_gamma, std::vector<Eigen::MatrixXd>(n_slots)));
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> w_rcbl = w_dbl;

    for (std::size_t a = 0; a < n_alpha; ++a) {
        const double alpha = config.alphas[a];
        const Eigen::MatrixXd omega = alpha * gram;
        const ConditionalLaw law = ConditionalLaw::from_parameters(
            market.mu(), market.sigma(), market.r_f(), T, P, omega, Eigen::VectorXd::Zero(k));
        beta1[a] = law.beta1();
        const Eigen::MatrixXd pop = symmetrize(
            P.transpose() * CholeskyFactor::compute(omega, kModule).solve(P));
        for (std::size_t s = 0; s < n_slots; ++s) {
            const double t = grid[static_cast<std::size_t>(slot_grid_idx[s])];
            beta2[a][s] = law.beta2(t);
            const double w = 1.0 - t / T;
            for (std::size_t g = 0; g < n_gamma; ++g) {
                const double gamma = config.gammas[g];
                Eigen::MatrixXd m;
                if (gamma == 1.0) {
                    m = Eigen::MatrixXd::Zero(n, n);
                } else {
                    const Eigen::MatrixXd weighted = w * pop;
                    m = (gamma - 1.0) *
                        CholeskyFactor::compute(symmetrize(gamma * sigma_inv + weighted), kModule)
                            .solve(weighted)
                            .transpose();
                }
                w_dbl[a][g][s] = (Eigen::MatrixXd::Identity(n, n) + m) * sigma_inv / gamma;
                w_rcbl[a][g][s] = symmetrize(sigma_inv + w * pop) / gamma;
            }
        }
    }

    const int n_policies = 2;  // 0 = DBL, 1 = RCBL
    const std::size_t combos = static_cast<std::size_t>(n_policies) * n_alpha * n_gamma * n_plans;
    std::vector<PathAccumulator> acc(combos, PathAccumulator(config.n_paths));
    const auto combo_index = [&](int pol, std::size_t a, std::size_t g, std::size_t pl) {
        return ((static_cast<std::size_t>(pol) * n_alpha + a) * n_gamma + g) * n_plans + pl;
    };

    std::vector<std::uint64_t> path_hashes(static_cast<std::size_t>(config.n_paths), 0);

    parallel_for_paths(config.n_paths, config.threads, [&](int p) {
        Rng price_rng(Rng::derive(config.seed, static_cast<std::uint64_t>(p)));
        const Eigen::MatrixXd x = sample_prior_path(market, grid, price_rng);
        path_hashes[static_cast<std::size_t>(p)] = fnv1a(x);

        Rng view_rng(Rng::derive(config.seed ^ kViewStreamSalt, static_cast<std::uint64_t>(p)));
        const Eigen::VectorXd z_eps = view_rng.normal_vector(k);
        const Eigen::VectorXd x_T = x.row(x.rows() - 1).transpose();

        for (std::size_t a = 0; a < n_alpha; ++a) {
            const double alpha = config.alphas[a];
            const Eigen::VectorXd y =
                P * x_T + std::sqrt(T) * std::sqrt(alpha) * (gram_chol_lower * z_eps);
            const Eigen::VectorXd u = beta1[a] * (y - T * (P * market.log_drift()));
            const Eigen::VectorXd drift_base = market.mu() + u;
            const Eigen::VectorXd mean_slope = market.log_drift() + u;

            for (std::size_t g = 0; g < n_gamma; ++g) {
                for (std::size_t pl = 0; pl < n_plans; ++pl) {
                    const auto& epoch_idx = plan_epoch_idx[pl];
                    const WeightsFn dbl_fn = [&, a, g](int e, double t, const Eigen::VectorXd& xt) {
                        const int s = slot_of_grid[static_cast<std::size_t>(
                            epoch_idx[static_cast<std::size_t>(e)])];
                        const Eigen::VectorXd mu_tilde =
                            drift_base + beta2[a][static_cast<std::size_t>(s)] * (t * mean_slope - xt);
                        return Eigen::VectorXd(w_dbl[a][g][static_cast<std::size_t>(s)] *
                                               (mu_tilde - market.r_f() * ones));
                    };
                    const WeightsFn rcbl_fn = [&, a, g](int e, double t, const Eigen::VectorXd& xt) {
                        const int s = slot_of_grid[static_cast<std::size_t>(
                            epoch_idx[static_cast<std::size_t>(e)])];
                        const Eigen::VectorXd mu_tilde =
                            drift_base + beta2[a][static_cast<std::size_t>(s)] * (t * mean_slope - xt);
                        return Eigen::VectorXd(w_rcbl[a][g][static_cast<std::size_t>(s)] *
                                               (mu_tilde - half_var - market.r_f() * ones));
                    };

                    acc[combo_index(0, a, g, pl)].record(
                        p, walk_wealth_proportional(market.r_f(), market.sigma(), grid, x, epoch_idx, dbl_fn, config.z0));
                    acc[combo_index(1, a, g, pl)].record(
                        p, walk_wealth_proportional(market.r_f(), market.sigma(), grid, x, epoch_idx, rcbl_fn, config.z0));
                }
            }
        }
    });

    ComparisonReport report;
    report.seed = config.seed;
    report.n_paths = config.n_paths;
    report.fine_grid_steps = static_cast<int>(grid.size());
    std::uint64_t hash = 0;
    for (std::uint64_t h : path_hashes) hash += h;
    report.path_hash = hash;

    const char* names[2] = {"DBL", "RCBL"};
    for (int pol = 0; pol < n_policies; ++pol)
        for (std::size_t a = 0; a < n_alpha; ++a)
            for (std::size_t g = 0; g < n_gamma; ++g)
                for (std::size_t pl = 0; pl < n_plans; ++pl) {
                    PathAccumulator& pa = acc[combo_index(pol, a, g, pl)];
                    pa.finalize();
                    ReportRow row = aggregate_row(pa, config.z0, config.gammas[g], T);
                    row.policy = names[pol];
                    row.plan = config.plans[pl].label();
                    row.alpha = config.alphas[a];
                    row.gamma = config.gammas[g];
                    report.rows.push_back(std::move(row));
                    if (config.keep_paths) {
                        report.wealth_per_row.push_back(pa.wealth);
                        report.turnover_per_row.push_back(pa.turnover);
                    }
                }
    return report;
}

// ---------------------------------------------------------------------------
// Revision-value comparison
// ---------------------------------------------------------------------------

ComparisonReport run_revision_comparison(const MarketModel& market, const Eigen::MatrixXd& P,
                                         const RevisionConfig& config) {
    const double T = market.horizon();
    const Eigen::Index n = market.n_assets();
    const Eigen::Index k = P.rows();
    const double tol = 1e-12 * std::max(1.0, T);

    for (const auto& inv : config.investors)
        if (inv.revision_times.empty() || inv.revision_times.front() != 0.0)
            throw ValidationError(kModule, "investor " + inv.name + " must have first view time 0");

    // Fine revision times: union across investors; every investor's view at a
    // time t is read off one nested noise sequence drawn on this set.
    std::vector<double> fine_times;
    for (const auto& inv : config.investors)
        fine_times.insert(fine_times.end(), inv.revision_times.begin(), inv.revision_times.end());
    fine_times = merge_times(fine_times, tol);
    if (fine_times.back() >= T) throw ValidationError(kModule, "revision times must precede the horizon");
    const std::size_t n_fine = fine_times.size();

    std::vector<double> all_times{T};
    all_times.insert(all_times.end(), fine_times.begin(), fine_times.end());
    const std::vector<double> epochs = config.plan.epochs(T);
    all_times.insert(all_times.end(), epochs.begin(), epochs.end());
    const std::vector<double> grid = merge_times(all_times, tol);

    std::vector<int> epoch_idx;
    for (double t : epochs) epoch_idx.push_back(locate(grid, t, tol));
    std::vector<int> fine_grid_idx;
    for (double t : fine_times) fine_grid_idx.push_back(locate(grid, t, tol));

    const Eigen::MatrixXd gram = symmetrize(P * market.sigma() * P.transpose());
    const Eigen::MatrixXd gram_chol_lower = CholeskyFactor::compute(gram, kModule).lower();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::MatrixXd sigma_inv = symmetrize(market.chol().inverse());
    const Eigen::VectorXd p_mu_x = P * market.log_drift();

    const std::size_t n_alpha = config.alphas.size();
    const std::size_t n_gamma = config.gammas.size();
    const std::size_t n_inv = config.investors.size();

    // Interval bookkeeping per investor: which revision time governs each
    // epoch, and the matrices at that epoch.
    struct EpochData {
        int interval;               // index into the investor's revision times
        Eigen::MatrixXd beta2;      // per (alpha): filled below
    };
    struct InvestorCache {
        std::vector<int> interval_of_epoch;
        std::vector<int> rev_grid_idx;              // grid index of each revision time
        std::vector<double> rev_times;
        // [alpha][interval]
        std::vector<std::vector<Eigen::MatrixXd>> beta1;
        // [alpha][epoch]
        std::vector<std::vector<Eigen::MatrixXd>> beta2;
        // [alpha][gamma][epoch]
        std::vector<std::vector<std::vector<Eigen::MatrixXd>>> w_total;
        // fine index of each revision time
        std::vector<int> fine_index;
    };

    std::vector<InvestorCache> caches(n_inv);
    for (std::size_t iv = 0; iv < n_inv; ++iv) {
        const auto& inv = config.investors[iv];
        InvestorCache& cache = caches[iv];
        cache.rev_times = merge_times(inv.revision_times, tol);
        for (double t : cache.rev_times) {
            cache.rev_grid_idx.push_back(locate(grid, t, tol));
            cache.fine_index.push_back(locate(fine_times, t, tol));
        }
        cache.interval_of_epoch.resize(epochs.size());
        for (std::size_t e = 0; e < epochs.size(); ++e) {
            int j = 0;
            for (std::size_t r = 0; r < cache.rev_times.size(); ++r)
                if (epochs[e] >= cache.rev_times[r] - tol) j = static_cast<int>(r);
            cache.interval_of_epoch[e] = j;
        }

        cache.beta1.assign(n_alpha, {});
        cache.beta2.assign(n_alpha, {});
        cache.w_total.assign(n_alpha, {});
        for (std::size_t a = 0; a < n_alpha; ++a) {
            const double alpha = config.alphas[a];
            // Omega^j total over [t_j, T]: remaining horizon times the
            // per-year noise alpha * P Sigma P^T.
            cache.beta1[a].resize(cache.rev_times.size());
            for (std::size_t r = 0; r < cache.rev_times.size(); ++r) {
                const double t_j = cache.rev_times[r];
                const Eigen::MatrixXd omega_total = (T - t_j) * alpha * gram;
                const Eigen::MatrixXd g2 = symmetrize((T - t_j) * gram + omega_total);
                cache.beta1[a][r] =
                    CholeskyFactor::compute(g2, kModule).solve(P * market.sigma()).transpose();
            }
            cache.beta2[a].resize(epochs.size());
            cache.w_total[a].assign(n_gamma, std::vector<Eigen::MatrixXd>(epochs.size()));
            for (std::size_t e = 0; e < epochs.size(); ++e) {
                const double t = epochs[e];
                const int j = cache.interval_of_epoch[e];
                const double t_j = cache.rev_times[static_cast<std::size_t>(j)];
                const Eigen::MatrixXd omega_total = (T - t_j) * alpha * gram;
                const Eigen::MatrixXd g2 = symmetrize((T - t) * gram + omega_total);
                cache.beta2[a][e] =
                    market.sigma() * P.transpose() * CholeskyFactor::compute(g2, kModule).solve(P);
                const Eigen::MatrixXd pop =
                    symmetrize(P.transpose() * CholeskyFactor::compute(omega_total, kModule).solve(P));
                for (std::size_t g = 0; g < n_gamma; ++g) {
                    const double gamma = config.gammas[g];
                    Eigen::MatrixXd m;
                    if (gamma == 1.0) {
                        m = Eigen::MatrixXd::Zero(n, n);
                    } else {
                        const Eigen::MatrixXd weighted = (T - t) * pop;
                        m = (gamma - 1.0) *
                            CholeskyFactor::compute(symmetrize(gamma * sigma_inv + weighted), kModule)
                                .solve(weighted)
                                .transpose();
                    }
                    cache.w_total[a][g][e] = (Eigen::MatrixXd::Identity(n, n) + m) * sigma_inv / gamma;
                }
            }
        }
    }

    const std::size_t combos = n_inv * n_alpha * n_gamma;
    std::vector<PathAccumulator> acc(combos, PathAccumulator(config.n_paths));
    const auto combo_index = [&](std::size_t iv, std::size_t a, std::size_t g) {
        return (iv * n_alpha + a) * n_gamma + g;
    };
    std::vector<std::uint64_t> path_hashes(static_cast<std::size_t>(config.n_paths), 0);

    parallel_for_paths(config.n_paths, config.threads, [&](int p) {
        Rng price_rng(Rng::derive(config.seed, static_cast<std::uint64_t>(p)));
        const Eigen::MatrixXd x = sample_prior_path(market, grid, price_rng);
        path_hashes[static_cast<std::size_t>(p)] = fnv1a(x);
        const Eigen::VectorXd x_T = x.row(x.rows() - 1).transpose();

        // Nested noise: eps at the last fine time plus backward innovations,
        // one standard-normal block per fine time (scaled per alpha).
        Rng view_rng(Rng::derive(config.seed ^ kViewStreamSalt, static_cast<std::uint64_t>(p)));
        std::vector<Eigen::VectorXd> z_blocks(n_fine);
        for (std::size_t f = 0; f < n_fine; ++f) z_blocks[f] = view_rng.normal_vector(k);

        for (std::size_t a = 0; a < n_alpha; ++a) {
            const double alpha = config.alphas[a];
            // eps_fine[f]: noise of the view given at fine_times[f].
            std::vector<Eigen::VectorXd> eps_fine(n_fine);
            {
                const double last_var = (T - fine_times[n_fine - 1]) * alpha;
                eps_fine[n_fine - 1] = std::sqrt(last_var) * (gram_chol_lower * z_blocks[n_fine - 1]);
                for (int f = static_cast<int>(n_fine) - 2; f >= 0; --f) {
                    const double innov_var = (fine_times[f + 1] - fine_times[f]) * alpha;
                    eps_fine[f] = eps_fine[f + 1] +
                                  std::sqrt(innov_var) * (gram_chol_lower * z_blocks[static_cast<std::size_t>(f)]);
                }
            }

            for (std::size_t iv = 0; iv < n_inv; ++iv) {
                const InvestorCache& cache = caches[iv];
                // Per-interval view vector and drift pieces for this path.
                const std::size_t n_rev = cache.rev_times.size();
                std::vector<Eigen::VectorXd> u(n_rev), mean_slope(n_rev), drift_base(n_rev);
                for (std::size_t r = 0; r < n_rev; ++r) {
                    const double t_j = cache.rev_times[r];
                    const Eigen::VectorXd x_tj = x.row(cache.rev_grid_idx[r]).transpose();
                    const Eigen::VectorXd y =
                        P * (x_T - x_tj) + eps_fine[static_cast<std::size_t>(cache.fine_index[r])];
                    const Eigen::VectorXd gap = y - (T - t_j) * p_mu_x;
                    u[r] = cache.beta1[a][r] * gap;
                    mean_slope[r] = market.log_drift() + u[r];
                    drift_base[r] = market.mu() + u[r];
                }

                for (std::size_t g = 0; g < n_gamma; ++g) {
                    const WeightsFn fn = [&, a, g](int e, double t, const Eigen::VectorXd& xt) {
                        const int j = cache.interval_of_epoch[static_cast<std::size_t>(e)];
                        const double t_j = cache.rev_times[static_cast<std::size_t>(j)];
                        const Eigen::VectorXd xbar =
                            xt - x.row(cache.rev_grid_idx[static_cast<std::size_t>(j)]).transpose();
                        const Eigen::VectorXd mu_tilde =
                            drift_base[static_cast<std::size_t>(j)] +
                            cache.beta2[a][static_cast<std::size_t>(e)] *
                                ((t - t_j) * mean_slope[static_cast<std::size_t>(j)] - xbar);
                        return Eigen::VectorXd(cache.w_total[a][g][static_cast<std::size_t>(e)] *
                                               (mu_tilde - market.r_f() * ones));
                    };
                    acc[combo_index(iv, a, g)].record(
                        p, walk_wealth_proportional(market.r_f(), market.sigma(), grid, x, epoch_idx, fn, config.z0));
                }
            }
        }
    });

    ComparisonReport report;
    report.seed = config.seed;
    report.n_paths = config.n_paths;
    report.fine_grid_steps = static_cast<int>(grid.size());
    std::uint64_t hash = 0;
    for (std::uint64_t h : path_hashes) hash += h;
    report.path_hash = hash;

    for (std::size_t iv = 0; iv < n_inv; ++iv)
        for (std::size_t a = 0; a < n_alpha; ++a)
            for (std::size_t g = 0; g < n_gamma; ++g) {
                PathAccumulator& pa = acc[combo_index(iv, a, g)];
                pa.finalize();
                ReportRow row = aggregate_row(pa, config.z0, config.gammas[g], T);
                row.policy = config.investors[iv].name;
                row.plan = config.plan.label();
                row.alpha = config.alphas[a];
                row.gamma = config.gammas[g];
                report.rows.push_back(std::move(row));
                if (config.keep_paths) {
                    report.wealth_per_row.push_back(pa.wealth);
                    report.turnover_per_row.push_back(pa.turnover);
                }
            }
    return report;
}

// ---------------------------------------------------------------------------
// Short-term views experiment
// ---------------------------------------------------------------------------

ComparisonReport run_short_term_comparison(const MarketModel& market, const Eigen::MatrixXd& P,
                                           const ShortTermConfig& config) {
    const double T = market.horizon();
    const Eigen::Index n = market.n_assets();
    const Eigen::Index k = P.rows();
    const double tol = 1e-12 * std::max(1.0, T);

    if (config.times.size() < 2 || config.times.front() != 0.0 ||
        std::abs(config.times.back() - T) > tol)
        throw ValidationError(kModule, "short-term times must run from 0 to the market horizon");
    const std::size_t n_intervals = config.times.size() - 1;
    const int order = static_cast<int>(config.phi.size());

    std::vector<double> all_times(config.times.begin(), config.times.end());
    const std::vector<double> epochs = config.plan.epochs(T);
    all_times.insert(all_times.end(), epochs.begin(), epochs.end());
    const std::vector<double> grid = merge_times(all_times, tol);
    std::vector<int> epoch_idx;
    for (double t : epochs) epoch_idx.push_back(locate(grid, t, tol));
    std::vector<int> boundary_idx;
    for (double t : config.times) boundary_idx.push_back(locate(grid, t, tol));

    const Eigen::MatrixXd gram = symmetrize(P * market.sigma() * P.transpose());
    const Eigen::MatrixXd gram_chol_lower = CholeskyFactor::compute(gram, kModule).lower();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::MatrixXd sigma_inv = symmetrize(market.chol().inverse());
    const Eigen::VectorXd p_mu_x = P * market.log_drift();

    const std::size_t n_alpha = config.alphas.size();
    const std::size_t n_gamma = config.gammas.size();

    // Merton weights are constant across time and paths.
    std::vector<Eigen::VectorXd> merton(n_gamma);
    for (std::size_t g = 0; g < n_gamma; ++g)
        merton[g] = sigma_inv * (market.mu() - market.r_f() * ones) / config.gammas[g];

    std::vector<int> interval_of_epoch(epochs.size());
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        int j = 0;
        for (std::size_t r = 0; r + 1 < config.times.size(); ++r)
            if (epochs[e] >= config.times[r] - tol) j = static_cast<int>(r);
        interval_of_epoch[e] = j;
    }

    // [alpha][interval] beta1; [alpha][epoch] beta2; [alpha][gamma][epoch] W.
    std::vector<std::vector<Eigen::MatrixXd>> beta1(n_alpha,
                                                    std::vector<Eigen::MatrixXd>(n_intervals));
    std::vector<std::vector<Eigen::MatrixXd>> beta2(n_alpha,
                                                    std::vector<Eigen::MatrixXd>(epochs.size()));
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> w_total(
        n_alpha,
        std::vector<std::vector<Eigen::MatrixXd>>(n_gamma, std::vector<Eigen::MatrixXd>(epochs.size())));

    for (std::size_t a = 0; a < n_alpha; ++a) {
        const double alpha = config.alphas[a];
        for (std::size_t j = 0; j < n_intervals; ++j) {
            const double span = config.times[j + 1] - config.times[j];
            const Eigen::MatrixXd omega = alpha * span * gram;  // idiosyncratic, total over the interval
            beta1[a][j] =
                CholeskyFactor::compute(symmetrize(span * gram + omega), kModule)
                    .solve(P * market.sigma())
                    .transpose();
        }
        for (std::size_t e = 0; e < epochs.size(); ++e) {
            const double t = epochs[e];
            const int j = interval_of_epoch[e];
            const double span = config.times[static_cast<std::size_t>(j) + 1] -
                                config.times[static_cast<std::size_t>(j)];
            const double remaining = config.times[static_cast<std::size_t>(j) + 1] - t;
            const Eigen::MatrixXd omega = config.alphas[a] * span * gram;
            beta2[a][e] = market.sigma() * P.transpose() *
                          CholeskyFactor::compute(symmetrize(remaining * gram + omega), kModule).solve(P);
            const Eigen::MatrixXd pop =
                symmetrize(P.transpose() * CholeskyFactor::compute(omega, kModule).solve(P));
            for (std::size_t g = 0; g < n_gamma; ++g) {
                const double gamma = config.gammas[g];
                Eigen::MatrixXd m;
                if (gamma == 1.0) {
                    m = Eigen::MatrixXd::Zero(n, n);
                } else {
                    const Eigen::MatrixXd weighted = remaining * pop;
                    m = (gamma - 1.0) *
                        CholeskyFactor::compute(symmetrize(gamma * sigma_inv + weighted), kModule)
                            .solve(weighted)
                            .transpose();
                }
                w_total[a][g][e] = (Eigen::MatrixXd::Identity(n, n) + m) * sigma_inv / gamma;
            }
        }
    }

    const int n_policies = 2;  // 0 = short_term, 1 = merton
    const std::size_t combos = static_cast<std::size_t>(n_policies) * n_alpha * n_gamma;
    std::vector<PathAccumulator> acc(combos, PathAccumulator(config.n_paths));
    const auto combo_index = [&](int pol, std::size_t a, std::size_t g) {
        return (static_cast<std::size_t>(pol) * n_alpha + a) * n_gamma + g;
    };
    std::vector<std::uint64_t> path_hashes(static_cast<std::size_t>(config.n_paths), 0);

    parallel_for_paths(config.n_paths, config.threads, [&](int p) {
        Rng price_rng(Rng::derive(config.seed, static_cast<std::uint64_t>(p)));
        const Eigen::MatrixXd x = sample_prior_path(market, grid, price_rng);
        path_hashes[static_cast<std::size_t>(p)] = fnv1a(x);

        Rng view_rng(Rng::derive(config.seed ^ kViewStreamSalt, static_cast<std::uint64_t>(p)));
        std::vector<Eigen::VectorXd> z_blocks(n_intervals);
        for (std::size_t j = 0; j < n_intervals; ++j) z_blocks[j] = view_rng.normal_vector(k);

        for (std::size_t a = 0; a < n_alpha; ++a) {
            const double alpha = config.alphas[a];
            // VAR(p) noise chain and refined views: the refined view strips
            // the predictable noise, leaving P * interval return + eps^{j,0}.
            std::vector<Eigen::VectorXd> eps(n_intervals), eps_idio(n_intervals), ybar(n_intervals);
            for (std::size_t j = 0; j < n_intervals; ++j) {
                const double span = config.times[j + 1] - config.times[j];
                eps_idio[j] = std::sqrt(alpha * span) * (gram_chol_lower * z_blocks[j]);
                eps[j] = eps_idio[j];
                for (int i = 1; i <= std::min<int>(order, static_cast<int>(j)); ++i)
                    eps[j] += config.phi[static_cast<std::size_t>(i - 1)] * eps[j - static_cast<std::size_t>(i)];
                const Eigen::VectorXd delta_x =
                    (x.row(boundary_idx[j + 1]) - x.row(boundary_idx[j])).transpose();
                ybar[j] = P * delta_x + eps_idio[j];
            }

            for (std::size_t g = 0; g < n_gamma; ++g) {
                const WeightsFn fn = [&, a, g](int e, double t, const Eigen::VectorXd& xt) {
                    const int j = interval_of_epoch[static_cast<std::size_t>(e)];
                    const double t_j = config.times[static_cast<std::size_t>(j)];
                    const double span = config.times[static_cast<std::size_t>(j) + 1] - t_j;
                    const Eigen::VectorXd xbar =
                        xt - x.row(boundary_idx[static_cast<std::size_t>(j)]).transpose();
                    const Eigen::VectorXd gap = ybar[static_cast<std::size_t>(j)] - span * p_mu_x;
                    const Eigen::VectorXd u = beta1[a][static_cast<std::size_t>(j)] * gap;
                    const Eigen::VectorXd mu_tilde =
                        market.mu() + u +
                        beta2[a][static_cast<std::size_t>(e)] *
                            ((t - t_j) * (market.log_drift() + u) - xbar);
                    return Eigen::VectorXd(w_total[a][g][static_cast<std::size_t>(e)] *
                                           (mu_tilde - market.r_f() * ones));
                };
                acc[combo_index(0, a, g)].record(
                    p, walk_wealth_proportional(market.r_f(), market.sigma(), grid, x, epoch_idx, fn, config.z0));
                const WeightsFn merton_fn = [&, g](int, double, const Eigen::VectorXd&) {
                    return merton[g];
                };
                acc[combo_index(1, a, g)].record(
                    p, walk_wealth_proportional(market.r_f(), market.sigma(), grid, x, epoch_idx, merton_fn, config.z0));
            }
        }
    });

    ComparisonReport report;
    report.seed = config.seed;
    report.n_paths = config.n_paths;
    report.fine_grid_steps = static_cast<int>(grid.size());
    std::uint64_t hash = 0;
    for (std::uint64_t h : path_hashes) hash += h;
    report.path_hash = hash;

    const char* names[2] = {"short_term", "merton"};
    for (int pol = 0; pol < n_policies; ++pol)
        for (std::size_t a = 0; a < n_alpha; ++a)
            for (std::size_t g = 0; g < n_gamma; ++g) {
                PathAccumulator& pa = acc[combo_index(pol, a, g)];
                pa.finalize();
                ReportRow row = aggregate_row(pa, config.z0, config.gammas[g], T);
                row.policy = names[pol];
                row.plan = config.plan.label();
                row.alpha = config.alphas[a];
                row.gamma = config.gammas[g];
                report.rows.push_back(std::move(row));
            }
    return report;
}

// ---------------------------------------------------------------------------
// Multi-horizon views experiment
// ---------------------------------------------------------------------------

ComparisonReport run_multi_horizon_comparison(const MarketModel& market, const MultiHorizonConfig& config) {
    const double T = market.horizon();
    const Eigen::Index n = market.n_assets();
    const Eigen::Index k = config.picks.rows();
    const double tol = 1e-12 * std::max(1.0, T);
    if (std::abs(config.horizons(k - 1) - T) > tol)
        throw ValidationError(kModule, "last view horizon must equal the market horizon");

    std::vector<double> all_times{T};
    for (Eigen::Index j = 0; j < k; ++j) all_times.push_back(config.horizons(j));
    const std::vector<double> epochs = config.plan.epochs(T);
    all_times.insert(all_times.end(), epochs.begin(), epochs.end());
    const std::vector<double> grid = merge_times(all_times, tol);
    std::vector<int> epoch_idx;
    for (double t : epochs) epoch_idx.push_back(locate(grid, t, tol));
    std::vector<int> horizon_idx;
    for (Eigen::Index j = 0; j < k; ++j) horizon_idx.push_back(locate(grid, config.horizons(j), tol));

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::MatrixXd sigma_inv = symmetrize(market.chol().inverse());

    const std::size_t n_alpha = config.alphas.size();
    const std::size_t n_gamma = config.gammas.size();

    std::vector<Eigen::VectorXd> merton(n_gamma);
    for (std::size_t g = 0; g < n_gamma; ++g)
        merton[g] = sigma_inv * (market.mu() - market.r_f() * ones) / config.gammas[g];

    // The hedging coefficient b(t) is affine in the raw view vector, so the
    // stitched system is solved K+1 times per (alpha, gamma) and evaluated
    // per path by superposition; A(t) does not depend on the views.
    struct AlphaGammaCache {
        MultiHorizonSolution base;                 // y = 0
        std::vector<MultiHorizonSolution> basis;   // y = e_m
        Eigen::MatrixXd omega_chol_lower;
    };
    std::vector<std::vector<AlphaGammaCache>> caches(n_alpha);
    for (std::size_t a = 0; a < n_alpha; ++a) {
        const Eigen::MatrixXd omega = config.alphas[a] * config.omega;
        const Eigen::MatrixXd omega_chol = CholeskyFactor::compute(omega, kModule).lower();
        for (std::size_t g = 0; g < n_gamma; ++g) {
            const MultiHorizonViews zero_views =
                MultiHorizonViews::make(config.horizons, config.picks, omega, Eigen::VectorXd::Zero(k));
            AlphaGammaCache cache{
                MultiHorizonSolution::solve(zero_views, market, config.gammas[g],
                                            config.ode_steps_per_year),
                {},
                omega_chol};
            for (Eigen::Index m = 0; m < k; ++m) {
                const MultiHorizonViews unit_views = MultiHorizonViews::make(
                    config.horizons, config.picks, omega, Eigen::VectorXd::Unit(k, m));
                cache.basis.push_back(MultiHorizonSolution::solve(unit_views, market, config.gammas[g],
                                                                  config.ode_steps_per_year));
            }
            caches[a].push_back(std::move(cache));
        }
    }

    const int n_policies = 2;  // 0 = multi_horizon, 1 = merton
    const std::size_t combos = static_cast<std::size_t>(n_policies) * n_alpha * n_gamma;
    std::vector<PathAccumulator> acc(combos, PathAccumulator(config.n_paths));
    const auto combo_index = [&](int pol, std::size_t a, std::size_t g) {
        return (static_cast<std::size_t>(pol) * n_alpha + a) * n_gamma + g;
    };
    std::vector<std::uint64_t> path_hashes(static_cast<std::size_t>(config.n_paths), 0);

    parallel_for_paths(config.n_paths, config.threads, [&](int p) {
        Rng price_rng(Rng::derive(config.seed, static_cast<std::uint64_t>(p)));
        const Eigen::MatrixXd x = sample_prior_path(market, grid, price_rng);
        path_hashes[static_cast<std::size_t>(p)] = fnv1a(x);

        Rng view_rng(Rng::derive(config.seed ^ kViewStreamSalt, static_cast<std::uint64_t>(p)));
        const Eigen::VectorXd z_eps = view_rng.normal_vector(k);

        for (std::size_t a = 0; a < n_alpha; ++a) {
            for (std::size_t g = 0; g < n_gamma; ++g) {
                const AlphaGammaCache& cache = caches[a][g];
                Eigen::VectorXd y(k);
                const Eigen::VectorXd eps = cache.omega_chol_lower * z_eps;
                for (Eigen::Index j = 0; j < k; ++j) {
                    y(j) = config.picks.row(j).dot(x.row(horizon_idx[static_cast<std::size_t>(j)])) +
                           std::sqrt(config.horizons(j)) * eps(j);
                }

                const double gamma = config.gammas[g];
                const WeightsFn fn = [&, gamma](int, double t, const Eigen::VectorXd& xt) {
                    const int j = cache.base.interval_of(std::min(t, T - 1e-12));
                    // Superpose drift and hedge affinely in y.
                    Eigen::VectorXd drift = cache.base.drift(j, t, xt);
                    Eigen::VectorXd hedge = cache.base.A(t) * xt + cache.base.b(t);
                    for (Eigen::Index m = 0; m < k; ++m) {
                        const MultiHorizonSolution& unit = cache.basis[static_cast<std::size_t>(m)];
                        drift += y(m) * (unit.drift(j, t, xt) - cache.base.drift(j, t, xt));
                        hedge += y(m) * (unit.b(t) - cache.base.b(t));
                    }
                    const Eigen::VectorXd mv = sigma_inv * (drift - market.r_f() * ones) / gamma;
                    return Eigen::VectorXd(mv + hedge / gamma);
                };
                acc[combo_index(0, a, g)].record(
                    p, walk_wealth_proportional(market.r_f(), market.sigma(), grid, x, epoch_idx, fn, config.z0));
                const WeightsFn merton_fn = [&, g](int, double, const Eigen::VectorXd&) {
                    return merton[g];
                };
                acc[combo_index(1, a, g)].record(
                    p, walk_wealth_proportional(market.r_f(), market.sigma(), grid, x, epoch_idx, merton_fn, config.z0));
            }
        }
    });

    ComparisonReport report;
    report.seed = config.seed;
    report.n_paths = config.n_paths;
    report.fine_grid_steps = static_cast<int>(grid.size());
    std::uint64_t hash = 0;
    for (std::uint64_t h : path_hashes) hash += h;
    report.path_hash = hash;

    const char* names[2] = {"multi_horizon", "merton"};
    for (int pol = 0; pol < n_policies; ++pol)
        for (std::size_t a = 0; a < n_alpha; ++a)
            for (std::size_t g = 0; g < n_gamma; ++g) {
                PathAccumulator& pa = acc[combo_index(pol, a, g)];
                pa.finalize();
                ReportRow row = aggregate_row(pa, config.z0, config.gammas[g], T);
                row.policy = names[pol];
                row.plan = config.plan.label();
                row.alpha = config.alphas[a];
                row.gamma = config.gammas[g];
                report.rows.push_back(std::move(row));
            }
    return report;
}

}  // namespace dbl::mc
