// Experiment driver: verify | bounds | besov | rgg.
//
// Exit codes: 0 all enabled checks pass, 1 a check failed (listed on stderr),
// 2 configuration error (nothing is written).

#include "pstein/checks.hpp"
#include "pstein/io.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pstein;

namespace {

constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A JSON object whose keys are consumed as they are read; leftovers are errors.
class Section
{
public:
    Section(json j, std::string where) : j_(std::move(j)), where_(std::move(where))
    {
        if (j_.is_null()) j_ = json::object();
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    T get(const std::string& key, T fallback)
    {
        seen_.push_back(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    json raw(const std::string& key)
    {
        seen_.push_back(key);
        return j_.contains(key) ? j_.at(key) : json();
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    json j_;
    std::string where_;
    std::vector<std::string> seen_;
};

struct Options
{
    std::string command;
    std::string config_path;
    std::optional<std::int64_t> seed, reps, workers;
    std::optional<std::string> out;
    bool quick = false;
};

struct Run
{
    std::string command;
    std::uint64_t seed = 20240611;
    Index reps = 10000;
    bool reps_given = false;
    int workers = 0;
    fs::path out = "out";
    fs::path base;  // directory of the config file; relative input paths resolve against it
    bool quick = false;
    json block;  // command parameters
};

struct Result
{
    std::vector<std::pair<std::string, std::string>> files;  // name, contents
    std::vector<std::string> failures;
    json effective;  // resolved command parameters
    json extra;
};

template <class F>
std::string to_text(F&& write)
{
    std::ostringstream os;
    write(os);
    return os.str();
}

Run resolve(const Options& opt)
{
    json cfg = json::object();
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw ConfigError("cannot read config file '" + opt.config_path + "'");
        try {
            cfg = json::parse(in, nullptr, true, true);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
    }
    Section top(cfg, "config");
    Run run;
    if (!opt.config_path.empty()) run.base = fs::path(opt.config_path).parent_path();
    const std::string file_command = top.get<std::string>("command", "");
    run.command = opt.command.empty() ? file_command : opt.command;
    if (run.command.empty()) throw ConfigError("no command given (verify, bounds, besov or rgg)");
    if (!file_command.empty() && file_command != run.command)
        throw ConfigError("command '" + run.command + "' does not match the config's '" + file_command + "'");

    const std::int64_t seed = opt.seed.value_or(top.get<std::int64_t>("seed", 20240611));
    const std::int64_t reps = opt.reps.value_or(top.get<std::int64_t>("reps", 10000));
    const std::int64_t workers = opt.workers.value_or(top.get<std::int64_t>("workers", 0));
    run.out = opt.out.value_or(top.get<std::string>("output_dir", "out"));
    run.quick = opt.quick || top.get<bool>("quick", false);
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    if (reps < 1) throw ConfigError("reps must be at least 1");
    if (workers < 0) throw ConfigError("workers must be nonnegative");
    run.seed = static_cast<std::uint64_t>(seed);
    run.reps = reps;
    run.reps_given = opt.reps.has_value() || top.has("reps");
    run.workers = static_cast<int>(workers);

    for (const char* c : {"verify", "bounds", "besov", "rgg"}) {
        json b = top.raw(c);
        if (c == run.command) run.block = b;
    }
    top.finish();
    if (run.command != "verify" && run.command != "bounds" && run.command != "besov" && run.command != "rgg")
        throw ConfigError("unknown command '" + run.command + "'");
    if (fs::exists(run.out) && !fs::is_directory(run.out)) throw ConfigError("output path '" + run.out.string() + "' is not a directory");
    return run;
}

// verify -------------------------------------------------------------------

Result run_verify(const Run& run)
{
    Section s(run.block, "verify");
    const bool quick = s.get<bool>("quick", run.quick);
    s.finish();

    CheckPlan plan = quick ? CheckPlan::quick(run.seed) : CheckPlan::full(run.seed);
    plan.workers = run.workers;
    // An explicit reps value replaces the plan's replication counts.
    if (run.reps_given) plan.isometry_reps = plan.fourth_reps = plan.mehler_reps = plan.rgg.reps = plan.pair_reps = run.reps;
    Result res;
    res.effective = {{"quick", quick}};

    const std::vector<CheckResult> checks = run_all_checks(plan);
    std::vector<EstimatorRow> estimates;
    json timings = json::object();
    for (const auto& c : checks) {
        estimates.insert(estimates.end(), c.estimates.begin(), c.estimates.end());
        timings[c.id] = c.seconds;
        if (c.gating && !c.passed) res.failures.push_back(c.id + ": " + c.summary);
    }
    res.files.emplace_back("checks.csv", to_text([&](std::ostream& os) { write_checks_csv(os, checks, run.seed); }));
    res.files.emplace_back("estimates.csv", to_text([&](std::ostream& os) { write_estimator_csv(os, estimates, run.seed); }));
    res.extra["check_seconds"] = timings;
    return res;
}

// bounds -------------------------------------------------------------------

ChaosVector random_vector(std::uint64_t seed, int N, int k_dim, Index atoms)
{
    Engine e = block_engine({seed, 0}, 0);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::normal_distribution<double> z;
    Eigen::VectorXd w(atoms);
    for (Index i = 0; i < atoms; ++i) w[i] = u(e);
    const GridPtr g = make_grid(MeasureGrid::from_weights(w));
    ChaosVector x(g, k_dim);
    for (int q = 1; q <= N; ++q) {
        Eigen::MatrixXd v(int_pow(atoms, q), std::max(k_dim, 1));
        for (Index i = 0; i < v.size(); ++i) v.data()[i] = z(e);
        const Kernel f = zero_diagonals(symmetrize(Kernel(g, q, k_dim, v)));
        x.add(f.scaled(1.0 / std::sqrt(to_double(factorial(q)) * static_cast<double>(atoms))));
    }
    return x;
}

Result run_bounds(const Run& run)
{
    Section s(run.block, "bounds");
    const json inline_chaos = s.raw("chaos");
    const std::string chaos_file = s.get<std::string>("chaos_file", "");
    Section rnd(s.raw("random"), "bounds.random");
    const int N = rnd.get<int>("N", 2);
    const int k_dim = rnd.get<int>("k_dim", 2);
    const Index atoms = rnd.get<Index>("atoms", 4);
    rnd.finish();
    const json reference = s.raw("reference_covariance");
    const bool simulate = s.get<bool>("simulate", true);
    s.finish();

    if (!inline_chaos.is_null() && !chaos_file.empty()) throw ConfigError("bounds: give either 'chaos' or 'chaos_file', not both");
    Result res;
    std::optional<ChaosVector> xo;
    try {
        if (!inline_chaos.is_null()) {
            xo = chaos_from_json(inline_chaos);
            res.effective["chaos"] = inline_chaos;
        } else if (!chaos_file.empty()) {
            std::ifstream in(run.base / chaos_file);
            if (!in) throw ConfigError("bounds: cannot read '" + chaos_file + "'");
            xo = chaos_from_json(json::parse(in));
            res.effective["chaos_file"] = chaos_file;
        } else {
            if (N < 1 || N > 3 || k_dim < 1 || atoms < 2 || atoms > 8)
                throw ConfigError("bounds.random: need 1 <= N <= 3, k_dim >= 1, 2 <= atoms <= 8");
            xo = random_vector(run.seed, N, k_dim, atoms);
            res.effective["random"] = {{"N", N}, {"k_dim", k_dim}, {"atoms", atoms}};
        }
    } catch (const FormatError& e) {
        throw ConfigError(std::string("bounds: ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bounds: ") + e.what());
    }
    const ChaosVector& x = *xo;
    if (!x.centered()) throw ConfigError("bounds: the chaos vector must be centered (no order-0 kernel)");
    if (x.max_order() < 1) throw ConfigError("bounds: the chaos vector is empty");

    const Index K = std::max(x.k_dim(), 1);
    Eigen::MatrixXd Sp = covariance(x).matrix();
    if (!reference.is_null()) {
        std::vector<std::vector<double>> rows;
        try {
            rows = reference.get<std::vector<std::vector<double>>>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bounds.reference_covariance: ") + e.what());
        }
        if (static_cast<Index>(rows.size()) != K) throw ConfigError("bounds.reference_covariance: expected " + std::to_string(K) + " rows");
        for (Index i = 0; i < K; ++i) {
            if (static_cast<Index>(rows[i].size()) != K) throw ConfigError("bounds.reference_covariance: row length mismatch");
            for (Index j = 0; j < K; ++j) Sp(i, j) = rows[i][j];
        }
        res.effective["reference_covariance"] = reference;
    } else {
        res.effective["reference_covariance"] = "own";
    }
    res.effective["simulate"] = simulate;
    CovarianceMatrix ref(Sp);  // validates symmetry and PSD

    const BoundReport four = four_moment_bound(x, ref);
    const BoundReport contr = contraction_bound(x, ref);
    res.files.emplace_back("bounds_four_moment.csv", to_text([&](std::ostream& os) { write_bound_csv(os, four, run.seed); }));
    res.files.emplace_back("bounds_contraction.csv", to_text([&](std::ostream& os) { write_bound_csv(os, contr, run.seed); }));

    if (simulate) {
        const MomentSummary ms = moment_summary(x);
        const MomentEstimates est = mc_moments(x, run.reps, {run.seed, 1}, run.workers);
        std::vector<EstimatorRow> rows{{"E||X||^2", est.m2, ms.m2, est.m2_se, est.reps, run.seed},
                                       {"E||X||^4", est.m4, ms.m4, est.m4_se, est.reps, run.seed}};
        for (Index i = 0; i < K; ++i)
            for (Index j = 0; j < K; ++j)
                rows.push_back({"S_" + std::to_string(i) + "_" + std::to_string(j), est.S_hat(i, j), ms.S(i, j), est.S_se(i, j),
                                est.reps, run.seed});
        for (const auto& r : rows)
            if (std::abs(r.estimate - *r.exact) > 4 * r.std_error)
                res.failures.push_back("bounds: simulated " + r.quantity + " = " + format_double(r.estimate) + " differs from " +
                                       format_double(*r.exact) + " by more than 4 SE");
        res.files.emplace_back("estimates.csv", to_text([&](std::ostream& os) { write_estimator_csv(os, rows, run.seed); }));
    }
    return res;
}

// besov --------------------------------------------------------------------

Result run_besov_cmd(const Run& run)
{
    Section s(run.block, "besov");
    BesovConfig cfg;
    if (run.quick) {
        cfg.lambdas = {10, 100, 1000};
        cfg.n_cov = 64;
    }
    cfg.beta = s.get<double>("beta", cfg.beta);
    cfg.lambdas = s.get<std::vector<double>>("lambdas", cfg.lambdas);
    cfg.n_time = s.get<Index>("n_time", cfg.n_time);
    cfg.m_jump = s.get<Index>("m_jump", cfg.m_jump);
    cfg.n_cov = s.get<Index>("n_cov", cfg.n_cov);
    cfg.dictionary = s.get<Index>("dictionary", cfg.dictionary);
    const bool simulate = s.get<bool>("simulate", false);
    s.finish();
    if (cfg.n_time < 1 || cfg.m_jump < 1 || cfg.n_cov < 1 || cfg.dictionary < 1) throw ConfigError("besov: grid sizes must be positive");
    if (cfg.n_time * cfg.m_jump > 4'000'000 || cfg.n_cov > 4096) throw ConfigError("besov: grid too large");
    cfg.reps = simulate ? run.reps : 0;

    Result res;
    res.effective = {{"beta", cfg.beta},     {"lambdas", cfg.lambdas}, {"n_time", cfg.n_time},        {"m_jump", cfg.m_jump},
                     {"n_cov", cfg.n_cov}, {"dictionary", cfg.dictionary}, {"simulate", simulate}};
    const BesovReport rep = run_besov(cfg, {run.seed, 0});
    res.files.emplace_back("besov.csv", to_text([&](std::ostream& os) { write_besov_csv(os, rep, run.seed); }));
    return res;
}

// rgg ----------------------------------------------------------------------

Result run_rgg_cmd(const Run& run)
{
    Section s(run.block, "rgg");
    Regime regime;
    try {
        regime = regime_from_string(s.get<std::string>("regime", "R2"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("rgg.regime: ") + e.what());
    }
    RggPipelineConfig cfg = default_pipeline(regime);
    if (run.quick) cfg.lambdas = {16, 32, 64, 128};
    cfg.d = s.get<int>("d", cfg.d);
    cfg.half_width = s.get<double>("half_width", cfg.half_width);
    cfg.radius.scale = s.get<double>("radius_scale", cfg.radius.scale);
    cfg.radius.exponent = s.get<double>("radius_exponent", cfg.radius.exponent);
    cfg.lambdas = s.get<std::vector<double>>("lambdas", cfg.lambdas);
    cfg.time_grid = s.get<std::vector<double>>("time_grid", cfg.time_grid);
    cfg.cells_per_radius = s.get<Index>("cells_per_radius", cfg.cells_per_radius);
    const bool simulate = s.get<bool>("simulate", true);
    cfg.mc_lambdas = s.get<std::vector<double>>("mc_lambdas", {cfg.lambdas.empty() ? 0.0 : cfg.lambdas.back()});
    s.finish();
    if (cfg.cells_per_radius < 1) throw ConfigError("rgg.cells_per_radius must be positive");
    if (simulate && cfg.d != 1) throw ConfigError("rgg: simulation against the exact moments is available for d = 1 only");
    cfg.reps = simulate ? run.reps : 0;
    cfg.workers = run.workers;

    Result res;
    res.effective = {{"regime", to_string(regime)},   {"d", cfg.d},
                     {"half_width", cfg.half_width},  {"radius_scale", cfg.radius.scale},
                     {"radius_exponent", cfg.radius.exponent}, {"lambdas", cfg.lambdas},
                     {"time_grid", cfg.time_grid},    {"cells_per_radius", cfg.cells_per_radius},
                     {"simulate", simulate},          {"mc_lambdas", cfg.mc_lambdas}};
    const RggReport rep = rgg_pipeline(cfg, {run.seed, 0});
    for (const auto& r : rep.rows) {
        if (r.cov_max_dev_corrected_se > 4)
            res.failures.push_back("rgg: simulated covariance at lambda " + format_double(r.lambda) + " is " +
                                   format_double(r.cov_max_dev_corrected_se) + " SE from the exact covariance");
        if (r.mean_max_dev_se > 4)
            res.failures.push_back("rgg: simulated mean at lambda " + format_double(r.lambda) + " is " + format_double(r.mean_max_dev_se) +
                                   " SE from the exact mean");
    }
    res.files.emplace_back("rgg.csv", to_text([&](std::ostream& os) { write_rgg_csv(os, rep, run.seed); }));
    return res;
}

json versions()
{
    return {{"poisson_stein", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION},
            {"compiler", __VERSION__}};
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gaussian approximation bounds on Poisson space: cross-checks and experiments"};
    Options opt;
    app.add_option("command", opt.command, "verify | bounds | besov | rgg (or 'command' in the config)")
        ->check(CLI::IsMember({"verify", "bounds", "besov", "rgg"}));
    app.add_option("--config", opt.config_path, "JSON configuration file");
    app.add_option("--seed", opt.seed, "master seed");
    app.add_option("--reps", opt.reps, "Monte Carlo replications");
    app.add_option("--out", opt.out, "output directory");
    app.add_option("--workers", opt.workers, "worker threads (0 = all cores); results do not depend on it");
    app.add_flag("--quick", opt.quick, "small grids and 10^4 replications");
    app.set_version_flag("--version", kVersion);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    Run run;
    Result res;
    try {
        run = resolve(opt);
        if (run.command == "verify")
            res = run_verify(run);
        else if (run.command == "bounds")
            res = run_bounds(run);
        else if (run.command == "besov")
            res = run_besov_cmd(run);
        else
            res = run_rgg_cmd(run);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json manifest;
    manifest["command"] = run.command;
    manifest["config"] = {{"command", run.command},
                          {"seed", run.seed},
                          {"reps", run.reps},
                          {"workers", run.workers},
                          {"output_dir", run.out.string()},
                          {"quick", run.quick},
                          {run.command, res.effective}};
    manifest["seed"] = run.seed;
    manifest["versions"] = versions();
    manifest["wall_time_seconds"] = wall;
    manifest["outputs"] = json::array();
    for (const auto& [name, text] : res.files) manifest["outputs"].push_back(name);
    manifest["failures"] = res.failures;
    for (const auto& [k, v] : res.extra.items()) manifest[k] = v;

    try {
        fs::create_directories(run.out);
        for (const auto& [name, text] : res.files) write_file(run.out / name, text);
        write_file(run.out / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    for (const auto& f : res.failures) std::cerr << "FAILED " << f << '\n';
    std::cout << run.command << ": wrote " << res.files.size() + 1 << " files to " << run.out.string() << " in "
              << format_double(std::round(wall * 10) / 10) << " s"
              << (res.failures.empty() ? "" : ", " + std::to_string(res.failures.size()) + " check(s) failed") << '\n';
    return res.failures.empty() ? 0 : 1;
}
