#include "dfm/cli.hpp"

#include "dfm/errors.hpp"
#include "dfm/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace dfm::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw InputError(where + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) throw InputError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("key '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

MissingPattern parse_pattern(const std::string& kind, int max_delay) {
    if (kind == "uniform") return MissingPattern::uniform();
    if (kind == "ragged_edge") return MissingPattern::ragged_edge(max_delay);
    throw InputError("unknown missing pattern '" + kind + "' (expected uniform or ragged_edge)");
}

std::string pattern_name(const MissingPattern& p) {
    return p.kind == MissingPattern::Kind::Uniform ? "uniform" : "ragged_edge";
}

std::vector<std::string> numbered(const std::string& prefix, int count) {
    std::vector<std::string> out;
    for (int k = 1; k <= count; ++k) out.push_back(prefix + std::to_string(k));
    return out;
}

void prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string path_in(const std::string& dir, const char* file) {
    return (fs::path(dir) / file).string();
}

}  // namespace

PriorSpec parse_prior(const json& j, PriorSpec base) {
    const std::string where = "prior";
    check_keys(j, {"mode", "eta_phi", "d_lambda", "d_phi", "alpha_lambda", "beta_lambda", "adaptive", "sigma0",
                   "eta_lambda", "eta_cap"},
               where);
    if (j.contains("mode")) {
        const EstimatorMode mode = parse_mode(get_or<std::string>(j, "mode", "MAP", where));
        if (mode == EstimatorMode::ML) {
            const double sigma0 = base.sigma0;
            base = PriorSpec::ml();
            base.sigma0 = sigma0;
        }
    }
    PriorSpec p = base;
    p.eta_phi = get_or(j, "eta_phi", p.eta_phi, where);
    p.d_lambda = get_or(j, "d_lambda", p.d_lambda, where);
    p.d_phi = get_or(j, "d_phi", p.d_phi, where);
    p.alpha_lambda = get_or(j, "alpha_lambda", p.alpha_lambda, where);
    p.beta_lambda = get_or(j, "beta_lambda", p.beta_lambda, where);
    p.adaptive = get_or(j, "adaptive", p.adaptive, where);
    p.sigma0 = get_or(j, "sigma0", p.sigma0, where);
    p.eta_cap = get_or(j, "eta_cap", p.eta_cap, where);
    if (j.contains("eta_lambda")) p.eta_lambda = io::vector_from_json(j.at("eta_lambda"));
    if (p.mode == EstimatorMode::ML && (p.eta_phi != 0.0 || p.adaptive || (p.eta_lambda.array() != 0.0).any())) {
        throw InputError("ML mode does not allow shrinkage settings");
    }
    p.validate();
    return p;
}

json to_json(const PriorSpec& p) {
    json j;
    j["mode"] = to_string(p.mode);
    j["eta_phi"] = p.eta_phi;
    j["d_lambda"] = p.d_lambda;
    j["d_phi"] = p.d_phi;
    j["alpha_lambda"] = p.alpha_lambda;
    j["beta_lambda"] = p.beta_lambda;
    j["adaptive"] = p.adaptive;
    j["sigma0"] = p.sigma0;
    j["eta_cap"] = p.eta_cap;
    j["eta_lambda"] = p.eta_lambda.size() == 0 ? json(0.0) : io::to_json(p.eta_lambda);
    return j;
}

EstimateConfig parse_estimate(const json& j, const Overrides& ov) {
    check_keys(j, {"command", "data_path", "output_dir", "model", "prior", "fit"}, "config");
    EstimateConfig c;
    c.data_path = get_or<std::string>(j, "data_path", "", "config");
    if (c.data_path.empty()) throw InputError("estimate requires 'data_path'");
    c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, "config");
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"r", "p", "q"}, "model");
        c.r = get_or(m, "r", c.r, "model");
        c.p = get_or(m, "p", c.p, "model");
        c.q = get_or(m, "q", c.q, "model");
    }
    if (c.r < 1 || c.p < 0 || c.q < 1) throw InputError("model orders out of range (need r >= 1, p >= 0, q >= 1)");
    if (j.contains("prior")) c.prior = parse_prior(j.at("prior"));
    if (j.contains("fit")) {
        const json& f = j.at("fit");
        check_keys(f, {"max_iter", "tol", "init", "seed"}, "fit");
        c.max_iter = get_or(f, "max_iter", c.max_iter, "fit");
        c.tol = get_or(f, "tol", c.tol, "fit");
        c.init = get_or<std::string>(f, "init", c.init, "fit");
        c.seed = get_or(f, "seed", c.seed, "fit");
    }
    if (c.init != "pca" && c.init != "random") throw InputError("fit.init must be 'pca' or 'random'");
    if (c.max_iter < 0 || !(c.tol >= 0.0)) throw InputError("fit.max_iter and fit.tol must be nonnegative");
    if (ov.output_dir) c.output_dir = *ov.output_dir;
    if (ov.seed) c.seed = *ov.seed;
    return c;
}

json to_json(const EstimateConfig& c) {
    json j;
    j["command"] = "estimate";
    j["data_path"] = c.data_path;
    j["output_dir"] = c.output_dir;
    j["model"] = {{"r", c.r}, {"p", c.p}, {"q", c.q}};
    j["prior"] = to_json(c.prior);
    j["fit"] = {{"max_iter", c.max_iter}, {"tol", c.tol}, {"init", c.init}, {"seed", c.seed}};
    return j;
}

SimulateConfig parse_simulate(const json& j, const Overrides& ov) {
    check_keys(j, {"command", "output_dir", "dgp", "missing"}, "config");
    SimulateConfig c;
    c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, "config");
    bool mask_seed_given = false;
    if (j.contains("dgp")) {
        const json& d = j.at("dgp");
        check_keys(d, {"n", "T", "r", "p", "delta", "alpha_range", "beta_range", "burn_in", "seed"}, "dgp");
        c.dgp.n = get_or(d, "n", c.dgp.n, "dgp");
        c.dgp.T = get_or(d, "T", c.dgp.T, "dgp");
        c.dgp.r = get_or(d, "r", c.dgp.r, "dgp");
        c.dgp.p = get_or(d, "p", c.dgp.p, "dgp");
        c.dgp.delta = get_or(d, "delta", c.dgp.delta, "dgp");
        c.dgp.burn_in = get_or(d, "burn_in", c.dgp.burn_in, "dgp");
        c.dgp.seed = get_or(d, "seed", c.dgp.seed, "dgp");
        if (d.contains("alpha_range")) {
            const auto a = get_or<std::vector<double>>(d, "alpha_range", {}, "dgp");
            if (a.size() != 2) throw InputError("dgp.alpha_range needs two values");
            c.dgp.alpha_lo = a[0];
            c.dgp.alpha_hi = a[1];
        }
        if (d.contains("beta_range")) {
            const auto b = get_or<std::vector<double>>(d, "beta_range", {}, "dgp");
            if (b.size() != 2) throw InputError("dgp.beta_range needs two values");
            c.dgp.beta_lo = b[0];
            c.dgp.beta_hi = b[1];
        }
    }
    c.mask_seed = c.dgp.seed;
    if (j.contains("missing")) {
        const json& m = j.at("missing");
        check_keys(m, {"fraction", "pattern", "max_delay", "seed"}, "missing");
        c.fraction = get_or(m, "fraction", c.fraction, "missing");
        c.pattern = parse_pattern(get_or<std::string>(m, "pattern", "uniform", "missing"),
                                  get_or(m, "max_delay", 0, "missing"));
        if (m.contains("seed")) {
            c.mask_seed = get_or(m, "seed", c.mask_seed, "missing");
            mask_seed_given = true;
        }
    }
    if (ov.output_dir) c.output_dir = *ov.output_dir;
    if (ov.seed) {
        c.dgp.seed = *ov.seed;
        if (!mask_seed_given) c.mask_seed = *ov.seed;
    }
    c.dgp.validate();
    if (!(c.fraction >= 0.0 && c.fraction < 1.0)) throw InputError("missing.fraction must lie in [0, 1)");
    if (c.pattern.max_delay < 0) throw InputError("missing.max_delay must be >= 0");
    return c;
}

json to_json(const SimulateConfig& c) {
    json j;
    j["command"] = "simulate";
    j["output_dir"] = c.output_dir;
    j["dgp"] = {{"n", c.dgp.n},
                {"T", c.dgp.T},
                {"r", c.dgp.r},
                {"p", c.dgp.p},
                {"delta", c.dgp.delta},
                {"alpha_range", {c.dgp.alpha_lo, c.dgp.alpha_hi}},
                {"beta_range", {c.dgp.beta_lo, c.dgp.beta_hi}},
                {"burn_in", c.dgp.burn_in},
                {"seed", c.dgp.seed}};
    j["missing"] = {{"fraction", c.fraction},
                    {"pattern", pattern_name(c.pattern)},
                    {"max_delay", c.pattern.max_delay},
                    {"seed", c.mask_seed}};
    return j;
}

StudyRunConfig parse_study(const json& j, const Overrides& ov) {
    check_keys(j, {"command", "output_dir", "grid", "missing_fractions", "estimators", "replications", "seed",
                   "threads", "missing", "prior", "fit"},
               "config");
    StudyRunConfig c;
    StudyConfig& s = c.study;
    c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, "config");
    if (j.contains("grid")) {
        if (!j.at("grid").is_array()) throw InputError("grid must be an array");
        for (const json& g : j.at("grid")) {
            check_keys(g, {"n", "T", "r", "p", "delta", "r_hat", "p_hat"}, "grid entry");
            GridPoint gp;
            gp.n = get_or(g, "n", gp.n, "grid entry");
            gp.T = get_or(g, "T", gp.T, "grid entry");
            gp.r = get_or(g, "r", gp.r, "grid entry");
            gp.p = get_or(g, "p", gp.p, "grid entry");
            gp.delta = get_or(g, "delta", gp.delta, "grid entry");
            gp.r_hat = get_or(g, "r_hat", gp.r, "grid entry");
            gp.p_hat = get_or(g, "p_hat", gp.p, "grid entry");
            s.grid.push_back(gp);
        }
    }
    s.missing_fractions = get_or(j, "missing_fractions", s.missing_fractions, "config");
    if (j.contains("estimators")) {
        s.estimators.clear();
        for (const auto& name : get_or<std::vector<std::string>>(j, "estimators", {}, "config")) {
            s.estimators.push_back(parse_study_estimator(name));
        }
    }
    s.replications = get_or(j, "replications", s.replications, "config");
    s.seed = get_or(j, "seed", s.seed, "config");
    s.threads = get_or(j, "threads", s.threads, "config");
    if (j.contains("missing")) {
        const json& m = j.at("missing");
        check_keys(m, {"pattern", "max_delay"}, "missing");
        s.pattern = parse_pattern(get_or<std::string>(m, "pattern", "uniform", "missing"),
                                  get_or(m, "max_delay", 0, "missing"));
    }
    if (j.contains("prior")) s.map_prior = parse_prior(j.at("prior"));
    if (s.map_prior.mode != EstimatorMode::MAP) throw InputError("study prior must be a MAP prior");
    if (j.contains("fit")) {
        const json& f = j.at("fit");
        check_keys(f, {"max_iter", "tol"}, "fit");
        s.max_iter = get_or(f, "max_iter", s.max_iter, "fit");
        s.tol = get_or(f, "tol", s.tol, "fit");
    }
    if (ov.output_dir) c.output_dir = *ov.output_dir;
    if (ov.seed) s.seed = *ov.seed;
    if (ov.threads) s.threads = *ov.threads;
    s.validate();
    return c;
}

json to_json(const StudyRunConfig& c) {
    const StudyConfig& s = c.study;
    json j;
    j["command"] = "study";
    j["output_dir"] = c.output_dir;
    json grid = json::array();
    for (const GridPoint& g : s.grid) {
        grid.push_back({{"n", g.n},
                        {"T", g.T},
                        {"r", g.r},
                        {"p", g.p},
                        {"delta", g.delta},
                        {"r_hat", g.r_hat},
                        {"p_hat", g.p_hat}});
    }
    j["grid"] = grid;
    j["missing_fractions"] = s.missing_fractions;
    json est = json::array();
    for (StudyEstimator e : s.estimators) est.push_back(to_string(e));
    j["estimators"] = est;
    j["replications"] = s.replications;
    j["seed"] = s.seed;
    j["threads"] = s.threads;
    j["missing"] = {{"pattern", pattern_name(s.pattern)}, {"max_delay", s.pattern.max_delay}};
    j["prior"] = to_json(s.map_prior);
    j["fit"] = {{"max_iter", s.max_iter}, {"tol", s.tol}};
    return j;
}

int cmd_estimate(const EstimateConfig& cfg, std::ostream& log) {
    const io::CsvTable table = io::read_csv(cfg.data_path);
    if (table.values.rows() < 2) throw InputError("data file needs at least two time periods");
    const Panel panel = standardize(Matrix(table.values.transpose()));

    const ModelOrder order{panel.n(), cfg.r, cfg.p, cfg.q};
    FitOptions opts;
    opts.max_iter = cfg.max_iter;
    opts.tol = cfg.tol;
    opts.init = cfg.init == "random" ? InitStrategy::random(cfg.seed) : InitStrategy::pca();
    const FitResult res = fit(panel, order, cfg.prior, opts);

    prepare_dir(cfg.output_dir);
    const int s = order.s();
    const int T = panel.T();

    json theta;
    theta["order"] = {{"n", order.n}, {"r", order.r}, {"p", order.p}, {"q", order.q}, {"s", s}};
    theta["variables"] = table.col_names;
    theta["units"] = "standardized";
    theta["center"] = io::to_json(panel.center());
    theta["scale"] = io::to_json(panel.scale());
    theta["Lambda"] = io::to_json(res.theta_hat.Lambda);
    theta["Phi"] = io::to_json(res.theta_hat.Phi);
    theta["psi"] = io::to_json(res.theta_hat.psi);
    theta["omega"] = io::to_json(res.theta_hat.omega);
    theta["eta_lambda"] = io::to_json(res.eta_lambda);
    theta["iterations"] = res.iterations;
    theta["converged"] = res.converged;
    theta["init_fell_back"] = res.init_fell_back;
    theta["loglik"] = res.loglik;
    theta["logpost"] = res.logpost_path.back();
    io::write_json(path_in(cfg.output_dir, "theta.json"), theta);

    io::write_csv(path_in(cfg.output_dir, "factors.csv"),
                  io::from_series(res.factors, numbered("f", order.r), io::time_range(1 - s, T + s), table.index_name));
    io::write_csv(path_in(cfg.output_dir, "common_component.csv"),
                  io::from_series(res.common, table.col_names, table.row_labels, table.index_name));

    std::ostringstream conv;
    conv << "iteration,logpost,relative_change\n";
    for (std::size_t k = 0; k < res.logpost_path.size(); ++k) {
        conv << k << ',' << io::format_double(res.logpost_path[k]) << ','
             << (k == 0 ? std::string("NA") : io::format_double(res.rel_change_path[k - 1])) << '\n';
    }
    io::write_text(path_in(cfg.output_dir, "convergence.csv"), conv.str());
    io::write_json(path_in(cfg.output_dir, "resolved_config.json"), to_json(cfg));

    if (res.init_fell_back) log << "note: PCA initialization failed on a degenerate panel; used random(0) start\n";
    if (!res.converged) {
        log << "not converged after " << res.iterations << " iterations\n";
        return kExitNotConverged;
    }
    log << "converged after " << res.iterations << " iterations\n";
    return kExitOk;
}

int cmd_simulate(const SimulateConfig& cfg, std::ostream& log) {
    const SimulatedData sim = simulate_dgp(cfg.dgp);
    const Panel panel = apply_missing(sim, cfg.fraction, cfg.pattern, cfg.mask_seed);
    prepare_dir(cfg.output_dir);

    const auto names = numbered("y", cfg.dgp.n);
    const auto times = io::time_range(1, cfg.dgp.T);
    io::write_csv(path_in(cfg.output_dir, "panel.csv"), io::from_series(panel.with_nan(), names, times));
    io::write_csv(path_in(cfg.output_dir, "truth_common.csv"), io::from_series(sim.common, names, times));

    json truth;
    truth["n"] = cfg.dgp.n;
    truth["T"] = cfg.dgp.T;
    truth["r"] = cfg.dgp.r;
    truth["p"] = cfg.dgp.p;
    truth["delta"] = cfg.dgp.delta;
    json lags = json::array();
    for (int l = 0; l <= cfg.dgp.p; ++l) lags.push_back(io::to_json(Matrix(sim.Lambda.middleCols(l * cfg.dgp.r, cfg.dgp.r))));
    truth["Lambda"] = lags;
    truth["Phi"] = io::to_json(Matrix(sim.alpha.asDiagonal()));
    truth["alpha"] = io::to_json(sim.alpha);
    truth["beta"] = io::to_json(sim.beta);
    truth["gamma"] = io::to_json(sim.gamma);
    truth["Sigma"] = io::to_json(sim.Sigma);
    truth["factors"] = io::to_json(sim.factors);
    truth["missing_cells"] = panel.missing_cells();
    io::write_json(path_in(cfg.output_dir, "truth_params.json"), truth);
    io::write_json(path_in(cfg.output_dir, "resolved_config.json"), to_json(cfg));
    log << "simulated " << cfg.dgp.n << " x " << cfg.dgp.T << " panel, " << panel.missing_cells() << " cells missing\n";
    return kExitOk;
}

namespace {

constexpr const char* kRecordHeader =
    "grid,fraction_index,n,T,r,p,delta,r_hat,p_hat,fraction,estimator,replication,ok,converged,iterations,sse,cells\n";

std::string record_line(const StudyConfig& cfg, const ReplicationRecord& r) {
    const GridPoint& g = cfg.grid.at(r.key.grid);
    std::ostringstream os;
    os << r.key.grid << ',' << r.key.fraction << ',' << g.n << ',' << g.T << ',' << g.r << ',' << g.p << ','
       << io::format_double(g.delta) << ',' << g.r_hat << ',' << g.p_hat << ','
       << io::format_double(cfg.missing_fractions.at(r.key.fraction)) << ',' << to_string(r.key.estimator) << ','
       << r.key.replication << ',' << r.ok << ',' << r.converged << ',' << r.iterations << ','
       << io::format_double(r.sse) << ',' << r.cells << '\n';
    return os.str();
}

}  // namespace

std::string format_records(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records) {
    std::string out = kRecordHeader;
    for (const ReplicationRecord& r : records) out += record_line(cfg, r);
    return out;
}

std::vector<ReplicationRecord> parse_records(const StudyConfig& cfg, std::istream& in) {
    std::vector<ReplicationRecord> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 17) continue;  // truncated line from an interrupted run
        try {
            ReplicationRecord r;
            r.key.grid = std::stoi(f[0]);
            r.key.fraction = std::stoi(f[1]);
            r.key.estimator = parse_study_estimator(f[10]);
            r.key.replication = std::stoi(f[11]);
            r.ok = f[12] == "1";
            r.converged = f[13] == "1";
            r.iterations = std::stoi(f[14]);
            r.sse = std::stod(f[15]);
            r.cells = std::stol(f[16]);
            if (r.key.grid < 0 || r.key.grid >= static_cast<int>(cfg.grid.size())) continue;
            if (r.key.fraction < 0 || r.key.fraction >= static_cast<int>(cfg.missing_fractions.size())) continue;
            out.push_back(r);
        } catch (const std::exception&) {
            continue;
        }
    }
    return out;
}

std::string format_study_csv(const StudyConfig& cfg, const std::vector<CellSummary>& cells) {
    std::ostringstream os;
    os << "n,T,r,p,delta,r_hat,p_hat,fraction,estimator,replications,ok,failed,nonconverged,rmse,ratio_to_ml,"
          "ratio_to_map_no_lag_decay,unreliable\n";
    auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("NA"); };
    for (const CellSummary& c : cells) {
        const GridPoint& g = cfg.grid.at(c.grid);
        os << g.n << ',' << g.T << ',' << g.r << ',' << g.p << ',' << io::format_double(g.delta) << ',' << g.r_hat
           << ',' << g.p_hat << ',' << io::format_double(cfg.missing_fractions.at(c.fraction)) << ','
           << to_string(c.estimator) << ',' << c.replications << ',' << c.ok << ',' << c.failed << ','
           << c.nonconverged << ',' << io::format_double(c.rmse) << ',' << opt(c.ratio_to_ml) << ','
           << opt(c.ratio_to_map_no_lag_decay) << ',' << (c.unreliable ? 1 : 0) << '\n';
    }
    return os.str();
}

int cmd_study(const StudyRunConfig& cfg, std::ostream& log) {
    prepare_dir(cfg.output_dir);
    const std::string records_path = path_in(cfg.output_dir, "study_replications.csv");
    const std::string config_path = path_in(cfg.output_dir, "resolved_config.json");

    // Resume only when the stored run used the same settings; worker count and
    // output location do not affect results.
    auto fingerprint = [](json j) {
        j.erase("threads");
        j.erase("output_dir");
        return j;
    };
    const json resolved = to_json(cfg);
    std::vector<ReplicationRecord> done;
    if (fs::exists(records_path) && fs::exists(config_path)) {
        json previous;
        try {
            previous = io::read_json(config_path);
        } catch (const InputError&) {
        }
        if (fingerprint(previous) == fingerprint(resolved)) {
            std::ifstream in(records_path);
            done = parse_records(cfg.study, in);
            log << "resuming: " << done.size() << " replications already recorded\n";
        }
    }
    io::write_json(config_path, resolved);
    {
        std::ofstream out(records_path, std::ios::binary | std::ios::trunc);
        out << format_records(cfg.study, done);
    }
    std::ofstream append(records_path, std::ios::binary | std::ios::app);
    const StudyResult result = run_study(cfg.study, done, [&](const ReplicationRecord& r) {
        append << record_line(cfg.study, r);
        append.flush();
    });
    append.close();

    io::write_text(records_path, format_records(cfg.study, result.records));
    io::write_text(path_in(cfg.output_dir, "study_results.csv"), format_study_csv(cfg.study, result.cells));
    io::write_text(path_in(cfg.output_dir, "study_table.txt"), format_study_table(cfg.study, result.cells));
    log << "study finished: " << result.records.size() << " replications, " << result.cells.size() << " cells\n";
    return kExitOk;
}

int run(const json& config, const Overrides& ov, std::ostream& log) {
    try {
        if (!config.is_object() || !config.contains("command")) {
            throw InputError("config must contain a 'command' key (estimate, simulate or study)");
        }
        const std::string command = config.at("command").get<std::string>();
        if (command == "estimate") return cmd_estimate(parse_estimate(config, ov), log);
        if (command == "simulate") return cmd_simulate(parse_simulate(config, ov), log);
        if (command == "study") return cmd_study(parse_study(config, ov), log);
        throw InputError("unknown command '" + command + "'");
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitError;
    }
}

int main(int argc, char** argv) {
    CLI::App app{"Penalized EM estimation of dynamic factor models with missing data"};
    std::string config_path;
    Overrides ov;
    std::string output_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    auto* out_opt = app.add_option("--output-dir", output_dir, "directory for artifacts");
    auto* seed_opt = app.add_option("--seed", seed, "seed override");
    auto* thr_opt = app.add_option("--threads", threads, "worker threads for study runs")->check(CLI::PositiveNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e);
            return kExitOk;
        }
        std::cerr << e.what() << "\n" << app.help();
        return kExitError;
    }
    if (*out_opt) ov.output_dir = output_dir;
    if (*seed_opt) ov.seed = seed;
    if (*thr_opt) ov.threads = threads;

    json config;
    try {
        config = io::read_json(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return run(config, ov, std::cerr);
}

}  // namespace dfm::cli
