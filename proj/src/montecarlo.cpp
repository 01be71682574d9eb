#include "dfm/montecarlo.hpp"

#include "dfm/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace dfm {

namespace {

constexpr std::uint32_t kDgpStream = 0x44475031u;
constexpr std::uint32_t kMaskStream = 0x4d41534bu;
constexpr int kMaskRetries = 100;

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

}  // namespace

void DgpConfig::validate() const {
    if (n < 1 || T < 1 || r < 1 || p < 0 || burn_in < 0) throw InputError("DGP dimensions out of range");
    if (!(std::abs(delta) < 1.0)) throw InputError("delta must satisfy |delta| < 1");
    if (!(alpha_lo > -1.0 && alpha_hi < 1.0 && alpha_lo <= alpha_hi)) {
        throw InputError("alpha range must lie within (-1, 1)");
    }
    if (!(beta_lo > 0.0 && beta_hi < 1.0 && beta_lo <= beta_hi)) {
        throw InputError("beta range must lie within (0, 1)");
    }
}

Vector idiosyncratic_scales(const Matrix& Lambda, const Vector& alpha, const Vector& beta) {
    const auto r = alpha.size();
    const auto n = Lambda.rows();
    Vector gamma(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double signal = 0.0;
        for (Eigen::Index c = 0; c < Lambda.cols(); ++c) {
            const double a = alpha(c % r);
            signal += Lambda(i, c) * Lambda(i, c) / (1.0 - a * a);
        }
        gamma(i) = beta(i) / (1.0 - beta(i)) * signal;
    }
    return gamma;
}

SimulatedData simulate_dgp(const DgpConfig& cfg) {
    cfg.validate();
    auto rng = make_engine(cfg.seed, kDgpStream);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> beta_dist(cfg.beta_lo, cfg.beta_hi);
    std::uniform_real_distribution<double> alpha_dist(cfg.alpha_lo, cfg.alpha_hi);

    const int n = cfg.n;
    const int r = cfg.r;
    const int p = cfg.p;
    const int T = cfg.T;

    SimulatedData d;
    d.beta = Vector(n);
    for (int i = 0; i < n; ++i) d.beta(i) = beta_dist(rng);
    d.alpha = Vector(r);
    for (int j = 0; j < r; ++j) d.alpha(j) = alpha_dist(rng);
    d.Lambda = Matrix(n, r * (p + 1));
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < r * (p + 1); ++c) d.Lambda(i, c) = normal(rng);
    d.gamma = idiosyncratic_scales(d.Lambda, d.alpha, d.beta);

    d.Sigma = Matrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m)
            d.Sigma(i, m) = std::pow(cfg.delta, std::abs(i - m)) * std::sqrt(d.gamma(i) * d.gamma(m));

    Vector f = Vector::Zero(r);
    for (int t = 0; t < cfg.burn_in; ++t)
        for (int j = 0; j < r; ++j) f(j) = d.alpha(j) * f(j) + normal(rng);
    d.factors = Matrix(r, T + p);
    for (int k = 0; k < T + p; ++k) {
        for (int j = 0; j < r; ++j) f(j) = d.alpha(j) * f(j) + normal(rng);
        d.factors.col(k) = f;
    }

    Theta loadings;
    loadings.Lambda = d.Lambda;
    d.common = common_component(loadings, d.factors, p);

    Eigen::LLT<Matrix> llt(d.Sigma);
    if (llt.info() != Eigen::Success) throw NumericError("idiosyncratic covariance is not positive definite");
    Matrix z(n, T);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i) z(i, t) = normal(rng);
    d.noise = llt.matrixL() * z;
    d.panel = d.common + d.noise;
    return d;
}

Panel apply_missing(const SimulatedData& data, double fraction, const MissingPattern& pattern, std::uint64_t seed) {
    const auto n = data.panel.rows();
    const auto T = data.panel.cols();
    if (!(fraction >= 0.0 && fraction < 1.0)) throw InputError("missing fraction must lie in [0, 1)");
    auto rng = make_engine(seed, kMaskStream);

    auto valid = [](const Mask& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (m.row(i).count() < 2) return false;
        return true;
    };

    Mask mask = Mask::Constant(n, T, true);
    if (pattern.kind == MissingPattern::Kind::Uniform) {
        if (fraction > 0.0) {
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            int attempt = 0;
            do {
                if (++attempt > kMaskRetries) {
                    throw InputError("could not draw a mask keeping two observations per variable; fraction too high");
                }
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index t = 0; t < T; ++t) mask(i, t) = unif(rng) >= fraction;
            } while (!valid(mask));
        }
    } else {
        if (pattern.max_delay < 0) throw InputError("max_delay must be >= 0");
        std::uniform_int_distribution<int> delay(0, pattern.max_delay);
        int attempt = 0;
        do {
            if (++attempt > kMaskRetries) {
                throw InputError("could not draw ragged-edge delays keeping two observations per variable");
            }
            mask.setConstant(true);
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::Index d = std::min<Eigen::Index>(delay(rng), T);
                for (Eigen::Index t = T - d; t < T; ++t) mask(i, t) = false;
            }
        } while (!valid(mask));
    }
    return Panel(data.panel, mask, Vector::Zero(n), Vector::Ones(n));
}

Vector sample_variances(const Matrix& panel) {
    const auto T = panel.cols();
    if (T < 2) throw InputError("sample variance needs at least two periods");
    const Vector mean = panel.rowwise().mean();
    return (panel.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(T - 1);
}

double normalized_sse(const Matrix& true_common, const Matrix& est_common, const Vector& sample_vars) {
    if (true_common.rows() != est_common.rows() || true_common.cols() != est_common.cols() ||
        sample_vars.size() != true_common.rows()) {
        throw StructuralError("rmse: shape mismatch");
    }
    if (!(sample_vars.array() > 0.0).all()) throw InputError("rmse: zero sample variance");
    return ((true_common - est_common).array().square().colwise() / sample_vars.array()).sum();
}

double rmse(const std::vector<Matrix>& true_common, const std::vector<Matrix>& est_common,
            const std::vector<Vector>& sample_vars) {
    if (true_common.size() != est_common.size() || true_common.size() != sample_vars.size()) {
        throw StructuralError("rmse: data set counts differ");
    }
    double sse = 0.0;
    double cells = 0.0;
    for (std::size_t d = 0; d < true_common.size(); ++d) {
        sse += normalized_sse(true_common[d], est_common[d], sample_vars[d]);
        cells += static_cast<double>(true_common[d].size());
    }
    if (cells == 0.0) throw InputError("rmse: no data");
    return std::sqrt(sse / cells);
}

std::string to_string(StudyEstimator e) {
    switch (e) {
        case StudyEstimator::MAP: return "MAP";
        case StudyEstimator::MAPNoLagDecay: return "MAP-no-lag-decay";
        case StudyEstimator::ML: return "ML";
    }
    return "?";
}

StudyEstimator parse_study_estimator(const std::string& text) {
    if (text == "MAP") return StudyEstimator::MAP;
    if (text == "MAP-no-lag-decay") return StudyEstimator::MAPNoLagDecay;
    if (text == "ML") return StudyEstimator::ML;
    throw InputError("unknown estimator '" + text + "' (expected MAP, MAP-no-lag-decay or ML)");
}

void StudyConfig::validate() const {
    if (replications < 0) throw InputError("replications must be >= 0");
    if (threads < 1) throw InputError("threads must be >= 1");
    if (max_iter < 0) throw InputError("max_iter must be >= 0");
    for (double f : missing_fractions)
        if (!(f >= 0.0 && f < 1.0)) throw InputError("missing fractions must lie in [0, 1)");
    std::set<StudyEstimator> seen(estimators.begin(), estimators.end());
    if (seen.size() != estimators.size()) throw InputError("duplicate estimator in study config");
    for (const GridPoint& g : grid) {
        DgpConfig d{g.n, g.T, g.r, g.p, g.delta};
        d.validate();
        if (g.r_hat < 1 || g.p_hat < 0) throw InputError("estimation orders out of range");
    }
    map_prior.validate();
}

PriorSpec study_prior(const StudyConfig& cfg, StudyEstimator e) {
    switch (e) {
        case StudyEstimator::MAP: return cfg.map_prior;
        case StudyEstimator::MAPNoLagDecay: {
            PriorSpec p = cfg.map_prior;
            p.d_lambda = 0.0;
            return p;
        }
        case StudyEstimator::ML: {
            PriorSpec p = PriorSpec::ml();
            p.sigma0 = cfg.map_prior.sigma0;
            return p;
        }
    }
    return cfg.map_prior;
}

ReplicationRecord run_replication(const StudyConfig& cfg, const ReplicationKey& key) {
    ReplicationRecord rec;
    rec.key = key;
    const GridPoint& g = cfg.grid.at(key.grid);
    rec.cells = static_cast<long>(g.n) * g.T;
    try {
        DgpConfig dc;
        dc.n = g.n;
        dc.T = g.T;
        dc.r = g.r;
        dc.p = g.p;
        dc.delta = g.delta;
        dc.seed = cfg.seed + static_cast<std::uint64_t>(key.replication);
        const SimulatedData sim = simulate_dgp(dc);
        const Panel masked = apply_missing(sim, cfg.missing_fractions.at(key.fraction), cfg.pattern, dc.seed);
        const Panel panel = standardize(masked);
        const ModelOrder order{g.n, g.r_hat, g.p_hat, 1};
        FitOptions opts;
        opts.max_iter = cfg.max_iter;
        opts.tol = cfg.tol;
        const FitResult res = fit(panel, order, study_prior(cfg, key.estimator), opts);
        rec.sse = normalized_sse(sim.common, res.common, sample_variances(sim.panel));
        if (!std::isfinite(rec.sse)) throw NumericError("non-finite error sum");
        rec.converged = res.converged;
        rec.iterations = res.iterations;
        rec.ok = true;
    } catch (const std::exception&) {
        rec.ok = false;
        rec.converged = false;
        rec.sse = 0.0;
    }
    return rec;
}

std::vector<CellSummary> summarize(const StudyConfig& cfg, const std::vector<ReplicationRecord>& records) {
    std::vector<CellSummary> cells;
    if (cfg.replications == 0) return cells;
    std::map<std::tuple<int, int, StudyEstimator>, std::pair<double, double>> sums;
    std::map<std::tuple<int, int, StudyEstimator>, CellSummary> by_key;
    for (int g = 0; g < static_cast<int>(cfg.grid.size()); ++g)
        for (int f = 0; f < static_cast<int>(cfg.missing_fractions.size()); ++f)
            for (StudyEstimator e : cfg.estimators) {
                CellSummary c;
                c.grid = g;
                c.fraction = f;
                c.estimator = e;
                by_key[{g, f, e}] = c;
                sums[{g, f, e}] = {0.0, 0.0};
            }
    std::vector<ReplicationRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    for (const ReplicationRecord& r : sorted) {
        auto it = by_key.find({r.key.grid, r.key.fraction, r.key.estimator});
        if (it == by_key.end() || r.key.replication >= cfg.replications) continue;
        CellSummary& c = it->second;
        ++c.replications;
        if (!r.ok) {
            ++c.failed;
            continue;
        }
        ++c.ok;
        if (!r.converged) ++c.nonconverged;
        auto& s = sums[{r.key.grid, r.key.fraction, r.key.estimator}];
        s.first += r.sse;
        s.second += static_cast<double>(r.cells);
    }
    for (auto& [k, c] : by_key) {
        const auto& s = sums[k];
        c.rmse = s.second > 0.0 ? std::sqrt(s.first / s.second) : std::nan("");
        c.unreliable = c.failed > 0.05 * cfg.replications;
    }
    for (auto& [k, c] : by_key) {
        auto ratio = [&](StudyEstimator ref) -> std::optional<double> {
            auto it = by_key.find({c.grid, c.fraction, ref});
            if (it == by_key.end() || it->second.ok == 0 || c.ok == 0) return std::nullopt;
            return c.rmse / it->second.rmse;
        };
        c.ratio_to_ml = ratio(StudyEstimator::ML);
        c.ratio_to_map_no_lag_decay = ratio(StudyEstimator::MAPNoLagDecay);
    }
    for (int g = 0; g < static_cast<int>(cfg.grid.size()); ++g)
        for (int f = 0; f < static_cast<int>(cfg.missing_fractions.size()); ++f)
            for (StudyEstimator e : cfg.estimators) cells.push_back(by_key[{g, f, e}]);
    return cells;
}

StudyResult run_study(const StudyConfig& cfg, const std::vector<ReplicationRecord>& done,
                      const std::function<void(const ReplicationRecord&)>& on_record) {
    cfg.validate();
    std::map<ReplicationKey, ReplicationRecord> have;
    for (const ReplicationRecord& r : done) have[r.key] = r;

    std::vector<ReplicationKey> all;
    for (int g = 0; g < static_cast<int>(cfg.grid.size()); ++g)
        for (int f = 0; f < static_cast<int>(cfg.missing_fractions.size()); ++f)
            for (StudyEstimator e : cfg.estimators)
                for (int d = 0; d < cfg.replications; ++d) all.push_back({g, f, e, d});
    std::sort(all.begin(), all.end());

    std::vector<ReplicationKey> jobs;
    for (const auto& k : all)
        if (!have.count(k)) jobs.push_back(k);

    std::vector<ReplicationRecord> fresh(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex callback_mutex;
    auto worker = [&] {
        for (std::size_t idx = next++; idx < jobs.size(); idx = next++) {
            fresh[idx] = run_replication(cfg, jobs[idx]);
            if (on_record) {
                std::lock_guard<std::mutex> lock(callback_mutex);
                on_record(fresh[idx]);
            }
        }
    };
    const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(jobs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (const ReplicationRecord& r : fresh) have[r.key] = r;
    StudyResult result;
    for (const auto& k : all) result.records.push_back(have.at(k));
    result.cells = summarize(cfg, result.records);
    return result;
}

namespace {

std::string fmt2(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string format_study_table(const StudyConfig& cfg, const std::vector<CellSummary>& cells) {
    std::ostringstream os;
    os << "Monte Carlo evaluation, common component RMSE\n";
    if (cells.empty()) {
        os << "(no cells)\n";
        return os.str();
    }
    std::map<std::tuple<int, int, StudyEstimator>, const CellSummary*> at;
    for (const CellSummary& c : cells) at[{c.grid, c.fraction, c.estimator}] = &c;
    const int nf = static_cast<int>(cfg.missing_fractions.size());

    auto pct = [](double f) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%g%%", 100.0 * f);
        return std::string(buf);
    };
    std::ostringstream header;
    header << pad("n", 5) << pad("T", 6) << " |";
    for (const char* label : {"MAP", "MAP/ML", "MAP/noLD"}) {
        for (int f = 0; f < nf; ++f) header << pad(std::string(label) + " " + pct(cfg.missing_fractions[f]), 14);
        header << " |";
    }

    std::string last_block;
    for (int g = 0; g < static_cast<int>(cfg.grid.size()); ++g) {
        const GridPoint& gp = cfg.grid[g];
        char block[160];
        std::snprintf(block, sizeof block, "r=%d, p=%d, delta=%g, r_hat=%d, p_hat=%d", gp.r, gp.p, gp.delta, gp.r_hat,
                      gp.p_hat);
        if (block != last_block) {
            os << "\n" << block << "\n" << header.str() << "\n";
            last_block = block;
        }
        os << pad(std::to_string(gp.n), 5) << pad(std::to_string(gp.T), 6) << " |";
        auto cell = [&](int f, StudyEstimator e) -> const CellSummary* {
            auto it = at.find({g, f, e});
            return it == at.end() ? nullptr : it->second;
        };
        for (int f = 0; f < nf; ++f) {
            const CellSummary* c = cell(f, StudyEstimator::MAP);
            std::string v = c && c->ok > 0 ? fmt2(c->rmse) : "-";
            if (c && c->unreliable) v += "*";
            os << pad(v, 14);
        }
        os << " |";
        for (int f = 0; f < nf; ++f) {
            const CellSummary* c = cell(f, StudyEstimator::MAP);
            os << pad(c ? fmt2(c->ratio_to_ml) : "-", 14);
        }
        os << " |";
        for (int f = 0; f < nf; ++f) {
            const CellSummary* c = cell(f, StudyEstimator::MAP);
            os << pad(c ? fmt2(c->ratio_to_map_no_lag_decay) : "-", 14);
        }
        os << " |\n";
    }
    if (std::any_of(cells.begin(), cells.end(), [](const CellSummary& c) { return c.unreliable; }))
        os << "\n* more than 5% of replications failed\n";
    return os.str();
}

}  // namespace dfm
