#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbl/market.hpp"
#include "dbl/mc.hpp"

namespace dbl {

/// Parsed and validated scenario file. Times are in years, rates decimal per
/// annum; views stated on arithmetic returns are converted to log space at
/// parse time (target ln(1+r)).
struct ScenarioConfig {
    int schema_version = 1;

    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    double r_f = 0.0;
    double horizon = 1.0;

    std::string view_type;  // single | revisions | short_term | multi_horizon
    Eigen::MatrixXd P;      // single / revisions / short_term
    std::optional<Eigen::VectorXd> fixed_y;  // log-space view targets (single)

    std::vector<mc::RevisionInvestor> investors;      // revisions
    std::vector<double> short_term_times;             // short_term
    std::vector<Eigen::MatrixXd> short_term_phi;      // short_term
    Eigen::VectorXd mh_horizons;                      // multi_horizon
    Eigen::MatrixXd mh_picks;
    Eigen::MatrixXd mh_omega;

    std::vector<double> alphas{0.4};
    std::vector<double> gammas{5.0};
    std::vector<std::string> plan_labels{"weekly"};
    int n_paths = 20000;
    std::uint64_t seed = 1;
    int threads = 1;
    int dump_paths = 0;

    // Optional revision-value sub-experiment attached to a "single" scenario.
    bool has_revision_block = false;
    std::vector<double> rev_alphas;
    std::vector<double> rev_gammas;
    std::string rev_plan = "weekly";
    std::vector<mc::RevisionInvestor> rev_investors;

    std::string out_dir;  // from the scenario file; may be overridden

    MarketModel make_market() const { return MarketModel::make(mu, sigma, r_f, horizon); }
};

/// Parse + validate a scenario file, applying `key=value` overrides (dotted
/// paths into the JSON document) first. Unknown keys anywhere are rejected.
ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

struct RunArtifacts {
    std::string directory;
    std::vector<std::string> files;
};

/// Execute the scenario and write frontier.csv / cer.csv / turnover.csv
/// (+ revisions_cer.csv when a revision comparison ran), metadata.json and
/// summary.txt into the output directory.
RunArtifacts run_scenario(const ScenarioConfig& config, const std::string& out_dir, int threads);

/// Resolve the output directory: explicit flag > scenario file > DBL_OUT_DIR
/// environment variable > "./out".
std::string resolve_out_dir(const ScenarioConfig& config, const std::string& cli_out);

}  // namespace dbl
