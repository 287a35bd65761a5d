// Command-line front end: grid/simulate/limit/mlmc/verify/bs subcommands.
// Every run writes a self-describing JSON report (each threshold next to
// the value it judges) plus CSV sample dumps. Reports are a pure function
// of the configuration except for the generated_at stamp; exit status is 0
// iff every configured check passes.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imlmc/imlmc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct CsvWriter {
    explicit CsvWriter(const fs::path& path) : out(path) {
        if (!out) throw std::runtime_error("cannot open " + path.string());
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    }
    std::ofstream out;
};

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // "<", "<=", "within"
    bool pass = false;
};

json check_json(const Check& c) {
    return json{{"name", c.name},
                {"value", c.value},
                {"threshold", c.threshold},
                {"relation", c.relation},
                {"pass", c.pass}};
}

json moments_json(const imlmc::Moments& m) {
    return json{{"count", m.count},
                {"mean", m.mean},
                {"variance", m.variance},
                {"skewness", m.skewness},
                {"kurtosis", m.kurtosis}};
}

json dist_report_json(const imlmc::DistReport& r) {
    return json{{"sample_a", moments_json(r.sample_a)},
                {"sample_b", moments_json(r.sample_b)},
                {"ks_statistic", r.ks_statistic},
                {"jb_statistic", r.jb_statistic},
                {"variance_target", r.variance_target},
                {"variance_ratio", r.variance_ratio},
                {"sup_mean", r.sup_mean},
                {"sup_bound", r.sup_bound}};
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string model = "gbm";
    double mu = 0.05;
    double sigma = 0.2;
    double x0 = 1.0;
    double rate = 0.03;
    double x1_0 = 100.0;
    double x2_0 = 1.0;

    std::string theta = "constant";
    double theta_a = 1.0;  // affine intensity theta(t) = a + b t
    double theta_b = 0.0;

    double horizon = 1.0;
    std::size_t n = 256;
    std::size_t m = 2;
    double alpha = 0.5;
    std::string a_seq = "const";
    std::string payoff = "identity";
    std::string reference = "auto";  // "auto", "none", or a number
    std::size_t reps = 100;
    std::size_t steps = imlmc::kDefaultLimitSteps;
    std::uint64_t seed = 1;
    unsigned jobs = 0;  // 0 = all cores
    std::string out;
    bool allow_aborts = false;

    // bs subcommand
    double strike = 100.0;
    double maturity = 1.0;
    double t_eval = 0.5;
    double vol = 0.2;

    // tolerance overrides
    imlmc::StatThresholds thresholds;
    double sup_max = 0.05;
};

// Applies config-file values to every option the user did not pass
// explicitly on the command line.
void merge_config_file(CLI::App* cmd, const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json j = json::parse(in);

    auto set_if_default = [&](const char* flag, auto& field) {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        std::string key = std::string(flag).substr(2);
        std::replace(key.begin(), key.end(), '-', '_');
        if (!j.contains(key)) return;
        if (opt != nullptr && opt->count() > 0) return;  // explicit flag wins
        j.at(key).get_to(field);
    };

    set_if_default("--model", cfg.model);
    set_if_default("--mu", cfg.mu);
    set_if_default("--sigma", cfg.sigma);
    set_if_default("--x0", cfg.x0);
    set_if_default("--rate", cfg.rate);
    set_if_default("--x1", cfg.x1_0);
    set_if_default("--x2", cfg.x2_0);
    set_if_default("--theta", cfg.theta);
    set_if_default("--theta-a", cfg.theta_a);
    set_if_default("--theta-b", cfg.theta_b);
    set_if_default("--T", cfg.horizon);
    set_if_default("--n", cfg.n);
    set_if_default("--m", cfg.m);
    set_if_default("--alpha", cfg.alpha);
    set_if_default("--a-seq", cfg.a_seq);
    set_if_default("--payoff", cfg.payoff);
    set_if_default("--reference", cfg.reference);
    set_if_default("--reps", cfg.reps);
    set_if_default("--steps", cfg.steps);
    set_if_default("--seed", cfg.seed);
    set_if_default("--jobs", cfg.jobs);
    set_if_default("--out", cfg.out);
    set_if_default("--allow-aborts", cfg.allow_aborts);
    set_if_default("--strike", cfg.strike);
    set_if_default("--maturity", cfg.maturity);
    set_if_default("--t-eval", cfg.t_eval);
    set_if_default("--vol", cfg.vol);
    set_if_default("--ks-max", cfg.thresholds.ks_max);
    set_if_default("--jb-max", cfg.thresholds.jb_max);
    set_if_default("--variance-band", cfg.thresholds.variance_band);
    set_if_default("--mean-sigmas", cfg.thresholds.mean_sigmas);
    set_if_default("--sup-max", cfg.sup_max);
}

imlmc::SdeModel build_model(const RunConfig& cfg) {
    if (cfg.model == "gbm") return imlmc::make_gbm(cfg.mu, cfg.sigma, cfg.x0);
    if (cfg.model == "bs2d")
        return imlmc::make_bs2d(cfg.mu, cfg.rate, cfg.sigma, cfg.x1_0, cfg.x2_0);
    throw std::invalid_argument("model: expected 'gbm' or 'bs2d', got '" + cfg.model + "'");
}

imlmc::ThetaSpec build_theta(const RunConfig& cfg, double horizon) {
    if (cfg.theta == "constant") return imlmc::theta_constant(horizon);
    if (cfg.theta == "affine") {
        const double a = cfg.theta_a, b = cfg.theta_b;
        const double at_start = a, at_end = a + b * horizon;
        if (!(at_start > 0.0) || !(at_end > 0.0))
            throw std::invalid_argument("theta: affine intensity must stay positive on [0, T]");
        imlmc::ThetaSpec spec;
        spec.theta = [a, b](double t) { return a + b * t; };
        spec.inv_bound = 1.0 / std::min(at_start, at_end);
        spec.integrable = true;
        return spec;
    }
    throw std::invalid_argument("theta: expected 'constant' or 'affine', got '" + cfg.theta + "'");
}

std::function<double(const imlmc::Vec&)> build_payoff(const RunConfig& cfg) {
    if (cfg.payoff == "identity") return [](const imlmc::Vec& x) { return x[0]; };
    if (cfg.payoff == "call") {
        const double k = cfg.strike;
        return [k](const imlmc::Vec& x) { return std::max(x[0] - k, 0.0); };
    }
    throw std::invalid_argument("payoff: expected 'identity' or 'call', got '" + cfg.payoff + "'");
}

std::function<imlmc::Vec(const imlmc::Vec&)> build_payoff_gradient(const RunConfig& cfg,
                                                                   std::size_t d) {
    if (cfg.payoff == "identity")
        return [d](const imlmc::Vec&) {
            imlmc::Vec g(d);
            g[0] = 1.0;
            return g;
        };
    const double k = cfg.strike;
    return [d, k](const imlmc::Vec& x) {
        imlmc::Vec g(d);
        g[0] = x[0] > k ? 1.0 : 0.0;
        return g;
    };
}

std::optional<double> resolve_reference(const RunConfig& cfg) {
    if (cfg.reference == "none") return std::nullopt;
    if (cfg.reference == "auto") {
        if (cfg.model == "gbm" && cfg.payoff == "identity")
            return cfg.x0 * std::exp(cfg.mu * cfg.horizon);
        throw std::invalid_argument(
            "reference: no analytic value for this model/payoff; pass a number or 'none'");
    }
    return std::stod(cfg.reference);
}

fs::path resolve_out_dir(const RunConfig& cfg) {
    if (!cfg.out.empty()) return fs::path(cfg.out);
    if (const char* env = std::getenv("IMLMC_OUT")) return fs::path(env);
    return fs::path("imlmc_out");
}

json base_report(const char* subcommand, const RunConfig& cfg) {
    char stamp[64];
    const std::time_t now = std::time(nullptr);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    // The worker count is absent on purpose: results may not depend on it,
    // so reports stay byte-identical across --jobs settings.
    return json{{"version", imlmc::kVersion},
                {"generated_at", stamp},
                {"subcommand", subcommand},
                {"seed", cfg.seed}};
}

int finalize_report(json& report, const std::vector<Check>& checks, const fs::path& out_dir) {
    bool all_pass = true;
    json arr = json::array();
    for (const auto& c : checks) {
        arr.push_back(check_json(c));
        all_pass = all_pass && c.pass;
    }
    report["checks"] = arr;
    report["pass"] = all_pass;
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "report.json");
    out << report.dump(2) << '\n';
    std::cout << (out_dir / "report.json").string() << (all_pass ? " [pass]" : " [FAIL]")
              << '\n';
    return all_pass ? 0 : 2;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void dump_grid_csv(const imlmc::TimeGrid& grid, const fs::path& path) {
    CsvWriter csv(path);
    csv.row({"index", "time", "step"});
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const double step = i + 1 < grid.points.size() ? grid.step(i) : 0.0;
        csv.row({std::to_string(i), fmt_double(grid.points[i]), fmt_double(step)});
    }
}

int run_grid(const RunConfig& cfg) {
    const auto theta = build_theta(cfg, cfg.horizon);
    const fs::path out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);

    const imlmc::TimeGrid coarse = imlmc::build_coarse(theta, cfg.n, cfg.horizon);
    dump_grid_csv(coarse, out_dir / "grid.csv");

    json report = base_report("grid", cfg);
    report["config"] = {{"theta", cfg.theta}, {"n", cfg.n}, {"m", cfg.m}, {"T", cfg.horizon}};
    report["results"] = {{"coarse_points", coarse.points.size()},
                         {"first_step", coarse.step(0)},
                         {"last_step", coarse.step(coarse.intervals() - 1)}};
    if (cfg.m >= 2) {
        const imlmc::NestedGrid nested = imlmc::refine(coarse, theta, cfg.m);
        dump_grid_csv(nested.fine, out_dir / "fine_grid.csv");
        report["results"]["fine_points"] = nested.fine.points.size();
    }
    return finalize_report(report, {}, out_dir);
}

int run_simulate(const RunConfig& cfg) {
    const auto model = build_model(cfg);
    const auto theta = build_theta(cfg, cfg.horizon);
    const auto grid = imlmc::refine(imlmc::build_coarse(theta, cfg.n, cfg.horizon), theta, cfg.m);
    const fs::path out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);

    struct RepResult {
        imlmc::Vec coarse_T, fine_T, error;
    };
    std::vector<RepResult> results(cfg.reps);
    std::size_t aborts = 0;
    std::vector<unsigned char> aborted(cfg.reps, 0);
    imlmc::parallel_for(cfg.reps, cfg.jobs, [&](std::size_t r) {
        try {
            const imlmc::CoupledPath path = imlmc::euler_coupled(
                model, grid, imlmc::sample_brownian(grid, model.q, {cfg.seed, r}));
            results[r] = {path.coarse_terminal(), path.fine_terminal(),
                          imlmc::error_stat(model, grid, path)};
        } catch (const imlmc::simulation_error&) {
            aborted[r] = 1;
        }
    });

    CsvWriter csv(out_dir / "simulate.csv");
    csv.row({"rep", "component", "x_coarse_T", "x_fine_T", "scaled_error"});
    std::vector<double> errors;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
        if (aborted[r]) {
            ++aborts;
            continue;
        }
        for (std::size_t c = 0; c < model.d; ++c) {
            csv.row({std::to_string(r), std::to_string(c), fmt_double(results[r].coarse_T[c]),
                     fmt_double(results[r].fine_T[c]), fmt_double(results[r].error[c])});
            if (c == 0) errors.push_back(results[r].error[c]);
        }
    }
    if (aborts > 0 && !cfg.allow_aborts)
        throw imlmc::simulation_error("simulate: " + std::to_string(aborts) +
                                      " replication(s) aborted");

    json report = base_report("simulate", cfg);
    report["config"] = {{"model", cfg.model}, {"n", cfg.n}, {"m", cfg.m},
                        {"T", cfg.horizon},   {"reps", cfg.reps}};
    report["results"] = {{"scaled_error_component0", moments_json(imlmc::compute_moments(errors))},
                         {"abort_count", aborts}};
    return finalize_report(report, {}, out_dir);
}

int run_limit(const RunConfig& cfg) {
    const auto model = build_model(cfg);
    const auto theta = build_theta(cfg, cfg.horizon);
    const fs::path out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);

    std::vector<imlmc::LimitSample> samples(cfg.reps);
    imlmc::parallel_for(cfg.reps, cfg.jobs, [&](std::size_t r) {
        samples[r] =
            imlmc::simulate_limit(model, theta, cfg.steps, {cfg.seed, r}, cfg.horizon);
    });

    CsvWriter csv(out_dir / "limit_samples.csv");
    csv.row({"rep", "component", "x_T", "u_T"});
    for (std::size_t r = 0; r < cfg.reps; ++r)
        for (std::size_t c = 0; c < model.d; ++c)
            csv.row({std::to_string(r), std::to_string(c), fmt_double(samples[r].x_T[c]),
                     fmt_double(samples[r].u_T[c])});

    const auto grad = build_payoff_gradient(cfg, model.d);
    const auto var = imlmc::limit_variance(model, theta, grad, cfg.reps, cfg.steps,
                                           {cfg.seed, 0}, cfg.horizon, cfg.jobs);

    json report = base_report("limit", cfg);
    report["config"] = {{"model", cfg.model}, {"steps", cfg.steps}, {"reps", cfg.reps},
                        {"T", cfg.horizon},   {"payoff", cfg.payoff}};
    report["results"] = {{"variance", var.value},
                         {"variance_std_error", var.std_error},
                         {"mean", var.mean}};
    return finalize_report(report, {}, out_dir);
}

int run_mlmc(const RunConfig& cfg) {
    const auto model = build_model(cfg);
    const auto theta = build_theta(cfg, cfg.horizon);
    const fs::path out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);

    imlmc::MlmcConfig mc;
    mc.n = cfg.n;
    mc.m = cfg.m;
    mc.alpha = cfg.alpha;
    mc.horizon = cfg.horizon;
    mc.a_seq = imlmc::make_weights(cfg.a_seq, imlmc::mlmc_level_count(cfg.n, cfg.m));
    mc.payoff = build_payoff(cfg);
    mc.payoff_gradient = build_payoff_gradient(cfg, model.d);
    mc.allow_aborts = cfg.allow_aborts;

    const std::optional<double> reference = resolve_reference(cfg);
    const auto estimate =
        imlmc::mlmc_estimate(model, theta, mc, {cfg.seed, 0}, reference, cfg.jobs);

    {
        CsvWriter csv(out_dir / "mlmc_levels.csv");
        csv.row({"level", "samples", "mean", "variance"});
        for (const auto& ls : estimate.per_level)
            csv.row({std::to_string(ls.level), std::to_string(ls.samples),
                     fmt_double(ls.mean), fmt_double(ls.variance)});
    }

    json report = base_report("mlmc", cfg);
    report["config"] = {{"model", cfg.model},   {"n", cfg.n},
                        {"m", cfg.m},           {"alpha", cfg.alpha},
                        {"a_seq", cfg.a_seq},   {"payoff", cfg.payoff},
                        {"T", cfg.horizon},     {"reps", cfg.reps},
                        {"reference", cfg.reference}};
    report["results"] = {{"q_n", estimate.q_n}, {"abort_count", estimate.abort_count}};
    if (estimate.scaled_error) report["results"]["scaled_error"] = *estimate.scaled_error;
    json levels = json::array();
    for (const auto& ls : estimate.per_level)
        levels.push_back(json{{"level", ls.level},
                              {"samples", ls.samples},
                              {"mean", ls.mean},
                              {"variance", ls.variance}});
    report["results"]["per_level"] = levels;

    if (cfg.reps > 1 && reference) {
        const auto errors = imlmc::clt_ensemble(model, theta, mc, *reference, cfg.reps,
                                                {cfg.seed, 0}, cfg.jobs);
        CsvWriter csv(out_dir / "mlmc_errors.csv");
        csv.row({"rep", "scaled_error"});
        for (std::size_t r = 0; r < errors.size(); ++r)
            csv.row({std::to_string(r), fmt_double(errors[r])});
        report["results"]["ensemble"] = moments_json(imlmc::compute_moments(errors));
        report["results"]["ensemble"]["jb_statistic"] = imlmc::jarque_bera(errors);
    }
    return finalize_report(report, {}, out_dir);
}

int run_verify(const std::string& check, const RunConfig& cfg) {
    const auto theta = build_theta(cfg, cfg.horizon);
    const fs::path out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);

    json report = base_report("verify", cfg);
    report["config"] = {{"check", check},     {"n", cfg.n},     {"m", cfg.m},
                        {"T", cfg.horizon},   {"reps", cfg.reps}, {"theta", cfg.theta},
                        {"steps", cfg.steps}};
    std::vector<Check> checks;

    auto dump_qv = [&](const imlmc::QvStatistic& qv) {
        CsvWriter curve(out_dir / ("verify_" + check + "_curve.csv"));
        curve.row({"t", "empirical", "target"});
        for (std::size_t i = 0; i < qv.t_grid.size(); ++i)
            curve.row({fmt_double(qv.t_grid[i]), fmt_double(qv.empirical[i]),
                       fmt_double(qv.target[i])});
        CsvWriter sups(out_dir / ("verify_" + check + "_sups.csv"));
        sups.row({"rep", "sup_error"});
        for (std::size_t r = 0; r < qv.path_sups.size(); ++r)
            sups.row({std::to_string(r), fmt_double(qv.path_sups[r])});
        report["results"] = {{"n", qv.n},
                             {"sup_error", qv.sup_error},
                             {"mean_path_sup", qv.mean_path_sup},
                             {"empirical_terminal", qv.empirical.back()},
                             {"target_terminal", qv.target.back()}};
    };

    if (check == "power_variation_p1" || check == "power_variation_p2") {
        const int p = check.back() == '1' ? 1 : 2;
        const auto qv = imlmc::check_power_variation(theta, cfg.n, cfg.horizon, p,
                                                     {cfg.seed, 0}, cfg.reps, cfg.jobs);
        dump_qv(qv);
        checks.push_back({"mean_path_sup", qv.mean_path_sup, cfg.sup_max, "<",
                          qv.mean_path_sup < cfg.sup_max});
    } else if (check == "cross_qv") {
        const auto qv = imlmc::check_cross_qv(theta, cfg.n, cfg.m, cfg.horizon,
                                              {cfg.seed, 0}, cfg.reps, cfg.jobs);
        dump_qv(qv);
        const double rel = std::abs(qv.empirical.back() / qv.target.back() - 1.0);
        checks.push_back({"terminal_relative_deviation", rel, cfg.thresholds.variance_band,
                          "<=", rel <= cfg.thresholds.variance_band});
    } else if (check == "increment_integrals") {
        const auto rep = imlmc::check_increment_integrals(theta, cfg.n, cfg.horizon,
                                                          {cfg.seed, 0}, cfg.reps, cfg.jobs,
                                                          cfg.thresholds);
        report["results"] = dist_report_json(rep);
        checks.push_back({"mean_sup", rep.sup_mean, rep.sup_bound, "<", rep.sup_pass});
        checks.push_back({"variance_ratio", rep.variance_ratio, cfg.thresholds.variance_band,
                          "within", rep.variance_pass});
        checks.push_back({"jb_statistic", rep.jb_statistic, cfg.thresholds.jb_max, "<",
                          rep.jb_pass});
        checks.push_back({"ks_statistic", rep.ks_statistic,
                          imlmc::ks_critical_1pct(cfg.reps, cfg.reps), "<", rep.ks_pass});
    } else if (check == "error_distribution") {
        const auto model = build_model(cfg);
        const auto rep = imlmc::match_error_to_limit(model, theta, cfg.n, cfg.m, cfg.reps,
                                                     cfg.steps, {cfg.seed, 0}, cfg.horizon,
                                                     cfg.jobs, cfg.thresholds);
        report["results"] = dist_report_json(rep);
        checks.push_back({"ks_statistic", rep.ks_statistic, cfg.thresholds.ks_max, "<",
                          rep.ks_pass});
        checks.push_back({"variance_ratio", rep.variance_ratio, cfg.thresholds.variance_band,
                          "within", rep.variance_pass});
        checks.push_back({"means_centered", std::abs(rep.sample_a.mean),
                          rep.mean_tolerance_a, "<=", rep.mean_pass});
    } else {
        throw std::invalid_argument(
            "verify: unknown check '" + check +
            "' (expected power_variation_p1, power_variation_p2, cross_qv, "
            "increment_integrals, error_distribution)");
    }
    return finalize_report(report, checks, out_dir);
}

int run_bs(const RunConfig& cfg) {
    imlmc::BsParams p;
    p.mu = cfg.mu;
    p.rate = cfg.rate;
    p.vol = cfg.vol;
    p.strike = cfg.strike;
    p.maturity = cfg.maturity;
    p.x1_0 = cfg.x1_0;
    p.x2_0 = cfg.x2_0;
    p.validate();

    const auto theta = imlmc::theta_constant(cfg.t_eval);
    const fs::path out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);

    const auto rep = imlmc::hedging_error_experiment(p, theta, cfg.n, cfg.m, cfg.t_eval,
                                                     cfg.reps, cfg.steps, {cfg.seed, 0},
                                                     cfg.jobs, cfg.thresholds);

    const double value = imlmc::call_value(p, 0.0, p.x1_0, p.x2_0);
    const imlmc::Vec grad = imlmc::call_gradient(p, 0.0, p.x1_0, p.x2_0);

    json report = base_report("bs", cfg);
    report["config"] = {{"mu", p.mu},         {"rate", p.rate},     {"vol", p.vol},
                        {"strike", p.strike}, {"maturity", p.maturity},
                        {"t_eval", cfg.t_eval}, {"n", cfg.n},       {"m", cfg.m},
                        {"reps", cfg.reps},   {"steps", cfg.steps}};
    report["results"] = dist_report_json(rep);
    report["results"]["call_value_t0"] = value;
    report["results"]["call_gradient_t0"] = json::array({grad[0], grad[1]});

    std::vector<Check> checks;
    checks.push_back({"variance_ratio", rep.variance_ratio, cfg.thresholds.variance_band,
                      "within", rep.variance_pass});
    checks.push_back({"means_centered", std::abs(rep.sample_a.mean), rep.mean_tolerance_a,
                      "<=", rep.mean_pass});
    return finalize_report(report, checks, out_dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Irregular-grid SDE simulation and multilevel Monte Carlo toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::string verify_check;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (explicit flags win)");
        cmd->add_option("--seed", cfg.seed, "master seed");
        cmd->add_option("--reps", cfg.reps, "replication count");
        cmd->add_option("--n", cfg.n, "coarse resolution parameter");
        cmd->add_option("--m", cfg.m, "refinement factor");
        cmd->add_option("--T", cfg.horizon, "time horizon");
        cmd->add_option("--steps", cfg.steps, "limit-process Euler steps");
        cmd->add_option("--out", cfg.out, "output directory (default $IMLMC_OUT)");
        cmd->add_option("--jobs", cfg.jobs, "worker threads, 0 = all cores");
        cmd->add_option("--theta", cfg.theta, "intensity: constant|affine");
        cmd->add_option("--theta-a", cfg.theta_a, "affine intensity offset");
        cmd->add_option("--theta-b", cfg.theta_b, "affine intensity slope");
        cmd->add_option("--model", cfg.model, "gbm|bs2d");
        cmd->add_option("--mu", cfg.mu, "drift");
        cmd->add_option("--sigma", cfg.sigma, "diffusion coefficient");
        cmd->add_option("--x0", cfg.x0, "initial state (gbm)");
        cmd->add_option("--rate", cfg.rate, "short rate (bs2d)");
        cmd->add_option("--x1", cfg.x1_0, "initial stock (bs2d)");
        cmd->add_option("--x2", cfg.x2_0, "initial bank account (bs2d)");
        cmd->add_flag("--allow-aborts", cfg.allow_aborts, "tolerate aborted replications");
        cmd->add_option("--ks-max", cfg.thresholds.ks_max, "KS pass threshold");
        cmd->add_option("--jb-max", cfg.thresholds.jb_max, "JB pass threshold");
        cmd->add_option("--variance-band", cfg.thresholds.variance_band,
                        "relative variance band");
        cmd->add_option("--mean-sigmas", cfg.thresholds.mean_sigmas, "mean tolerance sigmas");
        cmd->add_option("--sup-max", cfg.sup_max, "sup-error pass threshold");
        return cmd;
    };

    CLI::App* grid_cmd = add_common(app.add_subcommand("grid", "emit grid points as CSV"));
    CLI::App* sim_cmd =
        add_common(app.add_subcommand("simulate", "coupled coarse/fine scheme runs"));
    CLI::App* limit_cmd =
        add_common(app.add_subcommand("limit", "limit-process samples and variance"));
    CLI::App* mlmc_cmd = add_common(app.add_subcommand("mlmc", "multilevel estimator"));
    mlmc_cmd->add_option("--alpha", cfg.alpha, "error-rate exponent in [1/2, 1]");
    mlmc_cmd->add_option("--a-seq", cfg.a_seq, "level weights: const|linear");
    mlmc_cmd->add_option("--payoff", cfg.payoff, "identity|call");
    mlmc_cmd->add_option("--reference", cfg.reference, "auto|none|<number>");
    mlmc_cmd->add_option("--strike", cfg.strike, "call payoff strike");
    CLI::App* verify_cmd = add_common(app.add_subcommand("verify", "run a named check"));
    verify_cmd->add_option("check", verify_check, "check name")->required();
    CLI::App* bs_cmd = add_common(app.add_subcommand("bs", "option hedging-error experiment"));
    bs_cmd->add_option("--vol", cfg.vol, "volatility");
    bs_cmd->add_option("--strike", cfg.strike, "strike");
    bs_cmd->add_option("--maturity", cfg.maturity, "option maturity");
    bs_cmd->add_option("--t-eval", cfg.t_eval, "evaluation time (< maturity)");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* active = app.get_subcommands().front();
        if (!config_path.empty()) merge_config_file(active, config_path, cfg);

        if (active == grid_cmd) return run_grid(cfg);
        if (active == sim_cmd) return run_simulate(cfg);
        if (active == limit_cmd) return run_limit(cfg);
        if (active == mlmc_cmd) return run_mlmc(cfg);
        if (active == verify_cmd) return run_verify(verify_check, cfg);
        if (active == bs_cmd) return run_bs(cfg);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
