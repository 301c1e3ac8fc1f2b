#include "dbl/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbl/conditional.hpp"
#include "dbl/version.hpp"

namespace dbl {

namespace {

constexpr const char* kModule = "scenario_cli";
using nlohmann::json;

void require_keys(const json& obj, const std::string& where, const std::vector<std::string>& allowed) {
    if (!obj.is_object()) throw ValidationError(kModule, where + " must be a JSON object");
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ValidationError(kModule, "unknown key '" + item.key() + "' in " + where);
    }
}

const json& need(const json& obj, const std::string& where, const std::string& key) {
    if (!obj.contains(key)) throw ValidationError(kModule, where + " is missing required key '" + key + "'");
    return obj.at(key);
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ValidationError(kModule, where + " must be a number");
    return v.get<double>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ValidationError(kModule, where + " must be a non-empty array");
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = as_number(v[i], where);
    return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ValidationError(kModule, where + " must be a non-empty 2-d array");
    const std::size_t rows = v.size();
    if (!v[0].is_array() || v[0].empty())
        throw ValidationError(kModule, where + " must be a non-empty 2-d array");
    const std::size_t cols = v[0].size();
    Eigen::MatrixXd out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!v[r].is_array() || v[r].size() != cols)
            throw ValidationError(kModule, where + " rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_number(v[r][c], where);
    }
    return out;
}

std::vector<double> as_double_list(const json& v, const std::string& where) {
    const Eigen::VectorXd vec = as_vector(v, where);
    return std::vector<double>(vec.data(), vec.data() + vec.size());
}

std::vector<mc::RevisionInvestor> parse_investors(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ValidationError(kModule, where + " must list investors");
    std::vector<mc::RevisionInvestor> out;
    for (const auto& item : v) {
        require_keys(item, where + " entry", {"name", "times"});
        mc::RevisionInvestor inv;
        inv.name = need(item, where, "name").get<std::string>();
        inv.revision_times = as_double_list(need(item, where, "times"), where + ".times");
        out.push_back(std::move(inv));
    }
    return out;
}

void apply_override(json& doc, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw ValidationError(kModule, "override must have the form key.path=value: " + spec);
    const std::string path = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);

    json* node = &doc;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ValidationError(kModule, "empty override path");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);

    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;  // plain string
    }
    (*node)[parts.back()] = parsed;
}

mc::RebalancePlan plan_from(const std::string& label) { return mc::RebalancePlan::from_label(label); }

void write_metadata(const std::string& dir, const ScenarioConfig& cfg,
                    const std::vector<mc::ComparisonReport>& reports) {
    json meta;
    meta["library_version"] = kVersion;
    meta["seed"] = cfg.seed;
    meta["n_paths"] = cfg.n_paths;
    meta["view_type"] = cfg.view_type;
    meta["plans"] = cfg.plan_labels;
    json grids = json::array();
    for (const auto& r : reports) grids.push_back(r.fine_grid_steps);
    meta["grid_points"] = grids;
    json hashes = json::array();
    for (const auto& r : reports) hashes.push_back(r.path_hash);
    meta["path_hashes"] = hashes;
    std::ofstream out(dir + "/metadata.json");
    out << meta.dump(2) << "\n";
}

void write_rows_csv(const std::string& path, const std::vector<mc::ReportRow>& rows, bool frontier,
                    bool cer, bool turnover, const char* policy_header = "policy") {
    std::ofstream out(path);
    out << policy_header << ",alpha,gamma,plan";
    if (frontier) out << ",mean,std,se_mean";
    if (cer) out << ",cer,se";
    if (turnover) out << ",turnover,se,grid_points";
    out << "\n";
    for (const auto& r : rows) {
        out.precision(10);  // configuration values
        out << r.policy << "," << r.alpha << "," << r.gamma << "," << r.plan;
        out.precision(17);  // statistics, full round-trip precision
        if (frontier) out << "," << r.mean_return << "," << r.return_std << "," << r.se_mean;
        if (cer) out << "," << r.cer << "," << r.cer_se;
        if (turnover) out << "," << r.turnover << "," << r.turnover_se << "," << r.n_paths;
        out << "\n";
    }
}

void dump_conditional_paths(const std::string& dir, const ScenarioConfig& cfg) {
    const MarketModel market = cfg.make_market();
    const Eigen::MatrixXd omega = make_omega_alpha(market, cfg.P, cfg.alphas.front());
    ViewSet views = ViewSet::make(cfg.P, omega, 0.0, cfg.horizon);
    Eigen::VectorXd y;
    if (cfg.fixed_y) {
        y = *cfg.fixed_y;
    } else {
        // Sample a terminal state and a view from the prior for illustration.
        Rng rng(Rng::derive(cfg.seed, 0xD0));
        std::vector<double> grid{cfg.horizon};
        const Eigen::MatrixXd x = mc::sample_prior_path(market, grid, rng);
        y = sample_view(market, views, x.row(0).transpose(), Rng::derive(cfg.seed, 0xD1));
    }
    const ConditionalLaw law = ConditionalLaw::build(market, views, y);
    std::vector<double> grid;
    const int steps = 52;
    for (int i = 1; i <= steps; ++i) grid.push_back(cfg.horizon * i / steps);
    const ConditionalPaths paths =
        simulate_conditional_paths(law, grid, cfg.dump_paths, Rng::derive(cfg.seed, 0xD2));
    std::ofstream out(dir + "/paths.csv");
    out.precision(17);
    out << "path_id,t,asset_index,log_return,price\n";
    for (std::size_t p = 0; p < paths.log_returns.size(); ++p)
        for (std::size_t g = 0; g < grid.size(); ++g)
            for (Eigen::Index i = 0; i < market.n_assets(); ++i)
                out << p << "," << grid[g] << "," << i << ","
                    << paths.log_returns[p](static_cast<Eigen::Index>(g), i) << ","
                    << paths.prices[p](static_cast<Eigen::Index>(g), i) << "\n";
}

}  // namespace

ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ValidationError(kModule, "cannot read scenario file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(kModule, std::string("scenario is not valid JSON: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);

    require_keys(doc, "scenario", {"schema_version", "market", "views", "experiment", "output"});
    ScenarioConfig cfg;
    cfg.schema_version = static_cast<int>(as_number(need(doc, "scenario", "schema_version"),
                                                    "schema_version"));
    if (cfg.schema_version != 1) throw ValidationError(kModule, "unsupported schema_version");

    const json& market = need(doc, "scenario", "market");
    require_keys(market, "market", {"mu", "sigma", "r_f", "horizon_years"});
    cfg.mu = as_vector(need(market, "market", "mu"), "market.mu");
    cfg.sigma = as_matrix(need(market, "market", "sigma"), "market.sigma");
    cfg.r_f = as_number(need(market, "market", "r_f"), "market.r_f");
    cfg.horizon = as_number(need(market, "market", "horizon_years"), "market.horizon_years");
    if (!(cfg.horizon > 0.0)) throw ValidationError(kModule, "horizon_years must be positive");

    const json& views = need(doc, "scenario", "views");
    cfg.view_type = need(views, "views", "type").get<std::string>();
    if (cfg.view_type == "single") {
        require_keys(views, "views", {"type", "P", "y", "y_arithmetic"});
        cfg.P = as_matrix(need(views, "views", "P"), "views.P");
        if (views.contains("y") && views.contains("y_arithmetic"))
            throw ValidationError(kModule, "give views.y or views.y_arithmetic, not both");
        if (views.contains("y")) cfg.fixed_y = as_vector(views.at("y"), "views.y");
        if (views.contains("y_arithmetic")) {
            Eigen::VectorXd r = as_vector(views.at("y_arithmetic"), "views.y_arithmetic");
            for (Eigen::Index i = 0; i < r.size(); ++i) {
                if (r(i) <= -1.0)
                    throw ValidationError(kModule, "arithmetic view target must exceed -100%");
                r(i) = std::log1p(r(i));
            }
            cfg.fixed_y = r;
        }
    } else if (cfg.view_type == "revisions") {
        require_keys(views, "views", {"type", "P", "investors"});
        cfg.P = as_matrix(need(views, "views", "P"), "views.P");
        cfg.investors = parse_investors(need(views, "views", "investors"), "views.investors");
    } else if (cfg.view_type == "short_term") {
        require_keys(views, "views", {"type", "P", "times", "phi"});
        cfg.P = as_matrix(need(views, "views", "P"), "views.P");
        cfg.short_term_times = as_double_list(need(views, "views", "times"), "views.times");
        for (const auto& m : need(views, "views", "phi"))
            cfg.short_term_phi.push_back(as_matrix(m, "views.phi"));
    } else if (cfg.view_type == "multi_horizon") {
        require_keys(views, "views", {"type", "horizons", "picks", "omega"});
        cfg.mh_horizons = as_vector(need(views, "views", "horizons"), "views.horizons");
        cfg.mh_picks = as_matrix(need(views, "views", "picks"), "views.picks");
        cfg.mh_omega = as_matrix(need(views, "views", "omega"), "views.omega");
    } else {
        throw ValidationError(kModule, "views.type must be one of single|revisions|short_term|multi_horizon");
    }

    const json& exp = need(doc, "scenario", "experiment");
    require_keys(exp, "experiment",
                 {"alphas", "gammas", "plans", "n_paths", "seed", "threads", "dump_paths", "revisions"});
    cfg.alphas = as_double_list(need(exp, "experiment", "alphas"), "experiment.alphas");
    cfg.gammas = as_double_list(need(exp, "experiment", "gammas"), "experiment.gammas");
    cfg.plan_labels.clear();
    for (const auto& p : need(exp, "experiment", "plans"))
        cfg.plan_labels.push_back(p.get<std::string>());
    cfg.n_paths = static_cast<int>(as_number(need(exp, "experiment", "n_paths"), "experiment.n_paths"));
    cfg.seed = static_cast<std::uint64_t>(as_number(need(exp, "experiment", "seed"), "experiment.seed"));
    if (exp.contains("threads"))
        cfg.threads = static_cast<int>(as_number(exp.at("threads"), "experiment.threads"));
    if (exp.contains("dump_paths"))
        cfg.dump_paths = static_cast<int>(as_number(exp.at("dump_paths"), "experiment.dump_paths"));

    for (double a : cfg.alphas)
        if (!(a > 0.0)) throw ValidationError(kModule, "alphas must be positive");
    for (double g : cfg.gammas)
        if (!(g > 1.0))
            throw ValidationError(kModule,
                                  "gamma = " + std::to_string(g) +
                                      " rejected: the dynamic policy and CER require gamma > 1");
    if (cfg.n_paths < 1) throw ValidationError(kModule, "n_paths must be >= 1");
    for (const auto& label : cfg.plan_labels) plan_from(label);  // validates

    if (exp.contains("revisions")) {
        const json& rev = exp.at("revisions");
        require_keys(rev, "experiment.revisions", {"alphas", "gammas", "plan", "investors"});
        cfg.has_revision_block = true;
        cfg.rev_alphas = as_double_list(need(rev, "revisions", "alphas"), "revisions.alphas");
        cfg.rev_gammas = as_double_list(need(rev, "revisions", "gammas"), "revisions.gammas");
        cfg.rev_plan = need(rev, "revisions", "plan").get<std::string>();
        cfg.rev_investors = parse_investors(need(rev, "revisions", "investors"), "revisions.investors");
        for (double g : cfg.rev_gammas)
            if (!(g > 1.0)) throw ValidationError(kModule, "revision gammas require gamma > 1");
    }

    if (doc.contains("output")) {
        const json& outp = doc.at("output");
        require_keys(outp, "output", {"dir"});
        cfg.out_dir = need(outp, "output", "dir").get<std::string>();
    }
    return cfg;
}

std::string resolve_out_dir(const ScenarioConfig& config, const std::string& cli_out) {
    if (!cli_out.empty()) return cli_out;
    if (!config.out_dir.empty()) return config.out_dir;
    if (const char* env = std::getenv("DBL_OUT_DIR"); env && *env) return env;
    return "out";
}

RunArtifacts run_scenario(const ScenarioConfig& config, const std::string& out_dir, int threads) {
    const MarketModel market = config.make_market();
    const int effective_threads = threads > 0 ? threads : config.threads;

    std::filesystem::create_directories(out_dir);
    RunArtifacts artifacts;
    artifacts.directory = out_dir;

    std::vector<mc::ComparisonReport> reports;
    std::vector<mc::ReportRow> main_rows;
    std::vector<mc::ReportRow> revision_rows;

    if (config.view_type == "single") {
        mc::ComparisonConfig cc;
        cc.alphas = config.alphas;
        cc.gammas = config.gammas;
        cc.plans.clear();
        for (const auto& label : config.plan_labels) cc.plans.push_back(plan_from(label));
        cc.n_paths = config.n_paths;
        cc.seed = config.seed;
        cc.threads = effective_threads;
        mc::ComparisonReport rep = mc::run_comparison(market, config.P, cc);
        main_rows = rep.rows;
        reports.push_back(std::move(rep));

        if (config.has_revision_block) {
            mc::RevisionConfig rc;
            rc.alphas = config.rev_alphas;
            rc.gammas = config.rev_gammas;
            rc.plan = plan_from(config.rev_plan);
            rc.investors = config.rev_investors;
            rc.n_paths = config.n_paths;
            rc.seed = config.seed;
            rc.threads = effective_threads;
            mc::ComparisonReport rep2 = mc::run_revision_comparison(market, config.P, rc);
            revision_rows = rep2.rows;
            reports.push_back(std::move(rep2));
        }
        if (config.dump_paths > 0) {
            dump_conditional_paths(out_dir, config);
            artifacts.files.push_back("paths.csv");
        }
    } else if (config.view_type == "revisions") {
        mc::RevisionConfig rc;
        rc.alphas = config.alphas;
        rc.gammas = config.gammas;
        rc.plan = plan_from(config.plan_labels.front());
        rc.investors = config.investors;
        rc.n_paths = config.n_paths;
        rc.seed = config.seed;
        rc.threads = effective_threads;
        mc::ComparisonReport rep = mc::run_revision_comparison(market, config.P, rc);
        main_rows = rep.rows;
        revision_rows = rep.rows;
        reports.push_back(std::move(rep));
    } else if (config.view_type == "short_term") {
        mc::ShortTermConfig sc;
        sc.times = config.short_term_times;
        sc.phi = config.short_term_phi;
        sc.alphas = config.alphas;
        sc.gammas = config.gammas;
        sc.plan = plan_from(config.plan_labels.front());
        sc.n_paths = config.n_paths;
        sc.seed = config.seed;
        sc.threads = effective_threads;
        mc::ComparisonReport rep = mc::run_short_term_comparison(market, config.P, sc);
        main_rows = rep.rows;
        reports.push_back(std::move(rep));
    } else if (config.view_type == "multi_horizon") {
        mc::MultiHorizonConfig mhc;
        mhc.horizons = config.mh_horizons;
        mhc.picks = config.mh_picks;
        mhc.omega = config.mh_omega;
        mhc.alphas = config.alphas;
        mhc.gammas = config.gammas;
        mhc.plan = plan_from(config.plan_labels.front());
        mhc.n_paths = config.n_paths;
        mhc.seed = config.seed;
        mhc.threads = effective_threads;
        mc::ComparisonReport rep = mc::run_multi_horizon_comparison(market, mhc);
        main_rows = rep.rows;
        reports.push_back(std::move(rep));
    }

    write_rows_csv(out_dir + "/frontier.csv", main_rows, true, false, false);
    artifacts.files.push_back("frontier.csv");
    write_rows_csv(out_dir + "/cer.csv", main_rows, false, true, false);
    artifacts.files.push_back("cer.csv");
    write_rows_csv(out_dir + "/turnover.csv", main_rows, false, false, true);
    artifacts.files.push_back("turnover.csv");
    if (!revision_rows.empty()) {
        write_rows_csv(out_dir + "/revisions_cer.csv", revision_rows, false, true, false, "investor");
        artifacts.files.push_back("revisions_cer.csv");
    }
    write_metadata(out_dir, config, reports);
    artifacts.files.push_back("metadata.json");

    std::ofstream summary(out_dir + "/summary.txt");
    summary << "scenario type: " << config.view_type << "\n";
    summary << "paths: " << config.n_paths << "  seed: " << config.seed << "\n";
    summary << "rows (policy, alpha, gamma, plan, mean, cer, turnover):\n";
    summary.precision(6);
    for (const auto& r : main_rows)
        summary << "  " << r.policy << "  a=" << r.alpha << "  g=" << r.gamma << "  " << r.plan
                << "  mean=" << r.mean_return << "  cer=" << r.cer << "  turnover=" << r.turnover << "\n";
    if (!revision_rows.empty()) {
        summary << "revision comparison (investor, alpha, gamma, cer +- se):\n";
        for (const auto& r : revision_rows)
            summary << "  " << r.policy << "  a=" << r.alpha << "  g=" << r.gamma << "  cer=" << r.cer
                    << " +- " << r.cer_se << "\n";
    }
    artifacts.files.push_back("summary.txt");
    return artifacts;
}

}  // namespace dbl
