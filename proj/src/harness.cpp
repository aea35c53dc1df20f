#include "sorl/harness.hpp"

#include "sorl/combinatorics.hpp"
#include "sorl/errors.hpp"
#include "sorl/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace sorl {

double compute_xi(const Eigen::MatrixXd& sigma) {
    const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

std::vector<Eigen::MatrixXd> policy_covariances(const SparseLinearMdp& m, const Policy& pi) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& occ : occupancy_measures(m, pi)) out.push_back(population_covariance(m.features(), occ));
    return out;
}

KappaReport compute_kappa(const std::vector<Eigen::MatrixXd>& sigma_star, const std::vector<Eigen::MatrixXd>& sigma,
                          int two_s) {
    KappaReport rep;
    for (std::size_t h = 0; h < sigma.size(); ++h) {
        const int d = static_cast<int>(sigma[h].rows());
        const int k = std::min(two_s, d);
        if (!binomial_at_most(d, k, 1e6)) throw SearchSpaceTooLarge("compute_kappa: C(d, 2s) exceeds 1e6");
        double best = 0.0;
        std::vector<int> S = first_combination(k);
        Eigen::MatrixXd num(k, k), den(k, k);
        do {
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) {
                    num(a, b) = sigma_star[h](S[a], S[b]);
                    den(a, b) = sigma[h](S[a], S[b]);
                }
            Eigen::LLT<Eigen::MatrixXd> llt(den);
            bool singular = llt.info() != Eigen::Success;
            if (!singular) {
                const double dmin = llt.matrixL().toDenseMatrix().diagonal().minCoeff();
                singular = dmin * dmin <= 1e-12 * std::max(1.0, den.diagonal().maxCoeff());
            }
            if (singular) {
                den.diagonal().array() += 1e-12;
                rep.jitter_used = true;
            }
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(num, den, Eigen::EigenvaluesOnly);
            best = std::max(best, ges.eigenvalues().maxCoeff());
        } while (next_combination(S, d));
        rep.per_step.push_back(best);
        rep.max = std::max(rep.max, best);
    }
    return rep;
}

KappaReport compute_kappa(const SparseLinearMdp& m, const Policy& behavior, int two_s) {
    return compute_kappa(policy_covariances(m, Policy(exact_optimal(m).policy)), policy_covariances(m, behavior), two_s);
}

Algorithm parse_algorithm(const std::string& s) {
    if (s == "lsvi") return Algorithm::lsvi;
    if (s == "actor_critic" || s == "ac") return Algorithm::actor_critic;
    throw ConfigError("unknown algorithm: " + s);
}

std::string to_string(Algorithm a) { return a == Algorithm::lsvi ? "lsvi" : "actor_critic"; }

// ---------------------------------------------------------------- config

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

template <class T>
std::vector<T> nonempty_list(const json& grid, const char* key, std::vector<T> fallback) {
    if (!grid.contains(key)) return fallback;
    auto v = grid.at(key).get<std::vector<T>>();
    if (v.empty()) throw ConfigError(std::string("grid.") + key + " must be nonempty");
    return v;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    try {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        if (j.value("schema", std::string()) != "sparse-orl/1") throw ConfigError("config schema must be \"sparse-orl/1\"");
        ExperimentConfig c;
        if (j.contains("mdp")) {
            const json& m = j.at("mdp");
            c.mdp.num_states = get_or(m, "num_states", c.mdp.num_states);
            c.mdp.num_actions = get_or(m, "num_actions", c.mdp.num_actions);
            c.mdp.H = get_or(m, "H", c.mdp.H);
            if (m.contains("feature_family")) c.mdp.feature_family = parse_feature_family(m.at("feature_family"));
            if (m.contains("coverage_mode")) c.mdp.coverage_mode = parse_coverage_mode(m.at("coverage_mode"));
            if (m.contains("seed")) c.mdp_seed = m.at("seed").get<std::uint64_t>();
        }
        if (j.contains("behavior")) c.pi_star_weight = get_or(j.at("behavior"), "pi_star_weight", 0.0);
        if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm"));
        if (j.contains("oracle")) c.oracle = parse_oracle(j.at("oracle"));
        c.lambda = get_or(j, "lambda", c.lambda);
        c.delta = get_or(j, "delta", c.delta);
        if (j.contains("bonus")) {
            const json& b = j.at("bonus");
            if (b.contains("kind")) c.bonus.kind = parse_bonus_kind(b.at("kind"));
            c.bonus.alpha = get_or(b, "alpha", c.bonus.alpha);
            c.bonus.alpha_scale = get_or(b, "alpha_scale", c.bonus.alpha_scale);
        }
        if (j.contains("critic")) {
            const json& cr = j.at("critic");
            if (cr.contains("variant")) c.critic.variant = parse_critic_variant(cr.at("variant"));
            if (cr.contains("solver")) c.critic.solver = parse_critic_solver(cr.at("solver"));
            c.critic.alpha = get_or(cr, "alpha", c.critic.alpha);
            c.critic.alpha_scale = get_or(cr, "alpha_scale", c.critic.alpha_scale);
            c.critic.max_iters = get_or(cr, "max_iters", c.critic.max_iters);
        }
        if (j.contains("actor")) {
            c.T = get_or(j.at("actor"), "T", c.T);
            c.eta = get_or(j.at("actor"), "eta", c.eta);
        }
        if (j.contains("attack")) {
            const json& a = j.at("attack");
            if (a.contains("kind")) c.attack.kind = parse_attack_kind(a.at("kind"));
            c.attack.magnitude = get_or(a, "magnitude", c.attack.magnitude);
            if (a.contains("target_selection")) c.attack.target_selection = parse_target_selection(a.at("target_selection"));
        }
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            c.grid_N = nonempty_list(g, "N", c.grid_N);
            c.grid_epsilon = nonempty_list(g, "epsilon", c.grid_epsilon);
            c.grid_d = nonempty_list(g, "d", c.grid_d);
            c.grid_s = nonempty_list(g, "s", c.grid_s);
        }
        c.seeds = get_or(j, "seeds", c.seeds);
        if (c.seeds.empty()) throw ConfigError("seeds must be nonempty");
        c.output = get_or(j, "output", c.output);
        c.compute_metrics = get_or(j, "compute_metrics", c.compute_metrics);

        for (int n : c.grid_N)
            if (n < 1) throw ConfigError("grid.N entries must be >= 1");
        for (double e : c.grid_epsilon)
            if (!(e >= 0.0 && e < 0.5)) throw ConfigError("grid.epsilon entries must lie in [0, 1/2)");
        for (int d : c.grid_d)
            for (int s : c.grid_s)
                if (s < 1 || s > d) throw ConfigError("grid requires 1 <= s <= d");
        if (c.mdp.num_states < 2 || c.mdp.num_actions < 1 || c.mdp.H < 1) throw ConfigError("invalid mdp dimensions");
        if (c.T < 1) throw ConfigError("actor.T must be >= 1");
        if (c.pi_star_weight < 0.0 || c.pi_star_weight > 1.0) throw ConfigError("behavior.pi_star_weight outside [0,1]");
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["schema"] = "sparse-orl/1";
    j["mdp"] = {{"num_states", c.mdp.num_states},
                {"num_actions", c.mdp.num_actions},
                {"H", c.mdp.H},
                {"feature_family", to_string(c.mdp.feature_family)},
                {"coverage_mode", to_string(c.mdp.coverage_mode)}};
    if (c.mdp_seed) j["mdp"]["seed"] = *c.mdp_seed;
    j["behavior"] = {{"pi_star_weight", c.pi_star_weight}};
    j["algorithm"] = to_string(c.algorithm);
    j["oracle"] = to_string(c.oracle);
    j["lambda"] = c.lambda;
    j["delta"] = c.delta;
    j["bonus"] = {{"kind", to_string(c.bonus.kind)}, {"alpha", c.bonus.alpha}, {"alpha_scale", c.bonus.alpha_scale}};
    j["critic"] = {{"variant", to_string(c.critic.variant)},
                   {"solver", to_string(c.critic.solver)},
                   {"alpha", c.critic.alpha},
                   {"alpha_scale", c.critic.alpha_scale},
                   {"max_iters", c.critic.max_iters}};
    j["actor"] = {{"T", c.T}, {"eta", c.eta}};
    j["attack"] = {{"kind", to_string(c.attack.kind)},
                   {"magnitude", c.attack.magnitude},
                   {"target_selection", to_string(c.attack.target_selection)}};
    j["grid"] = {{"N", c.grid_N}, {"epsilon", c.grid_epsilon}, {"d", c.grid_d}, {"s", c.grid_s}};
    j["seeds"] = c.seeds;
    j["output"] = c.output;
    j["compute_metrics"] = c.compute_metrics;
    return j;
}

// ---------------------------------------------------------------- rows

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string to_csv_line(const ResultRow& r) {
    std::string err = r.error;
    for (char& ch : err)
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
    std::string line;
    line += r.algorithm + ',' + r.oracle + ',' + std::to_string(r.N) + ',' + std::to_string(r.d) + ',' +
            std::to_string(r.s) + ',' + format_double(r.epsilon) + ',' + std::to_string(r.H) + ',' +
            std::to_string(r.seed) + ',' + format_double(r.subopt) + ',' + format_double(r.kappa) + ',' +
            format_double(r.xi) + ',' + format_double(r.wall_ms) + ',' + err;
    return line;
}

std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    for (int d : cfg.grid_d)
        for (int s : cfg.grid_s)
            for (int n : cfg.grid_N)
                for (double e : cfg.grid_epsilon)
                    for (std::uint64_t seed : cfg.seeds) cells.push_back({n, e, d, s, seed});
    return cells;
}

ResultRow run_cell(const ExperimentConfig& cfg, const Cell& cell) {
    const auto start = std::chrono::steady_clock::now();
    ResultRow row;
    row.algorithm = to_string(cfg.algorithm);
    row.oracle = to_string(cfg.algorithm == Algorithm::lsvi ? cfg.oracle : cfg.critic.oracle);
    row.N = cell.N;
    row.d = cell.d;
    row.s = cell.s;
    row.epsilon = cell.epsilon;
    row.H = cfg.mdp.H;
    row.seed = cell.seed;
    row.subopt = row.kappa = row.xi = std::numeric_limits<double>::quiet_NaN();
    try {
        MdpConfig mc = cfg.mdp;
        mc.d = cell.d;
        mc.s = cell.s;
        const std::uint64_t mdp_seed = cfg.mdp_seed ? *cfg.mdp_seed : derive_seed(cell.seed, "cell/mdp");
        const SparseLinearMdp m = build_random_sparse_mdp(mc, mdp_seed);
        const Policy behavior(behavior_policy(m, cfg.pi_star_weight));
        if (cfg.compute_metrics) {
            const auto sig = policy_covariances(m, behavior);
            double xi = std::numeric_limits<double>::infinity();
            for (const auto& s : sig) xi = std::min(xi, compute_xi(s));
            row.xi = xi;
            if (binomial_at_most(cell.d, std::min(2 * cell.s, cell.d), 1e6)) {
                const KappaReport k = compute_kappa(m, behavior, 2 * cell.s);
                row.kappa = k.max;
                row.kappa_jitter = k.jitter_used;
            }
        }
        const Dataset clean = generate_dataset(m, behavior, cell.N, derive_seed(cell.seed, "cell/data"));
        const Dataset ds = corrupt_dataset(clean, m.features(), cfg.attack, cell.epsilon,
                                           derive_seed(cell.seed, "cell/corrupt"));
        if (cfg.algorithm == Algorithm::lsvi) {
            LsviOptions o;
            o.oracle = cfg.oracle;
            o.bonus = cfg.bonus;
            o.bonus.two_s = 2 * cell.s;
            o.s = cell.s;
            o.epsilon = cell.epsilon;
            o.lambda = cfg.lambda;
            o.delta = cfg.delta;
            row.subopt = suboptimality(m, Policy(run_lsvi(ds, m.features(), o).policy));
        } else {
            ActorCriticOptions o;
            o.critic = cfg.critic;
            o.critic.s = cell.s;
            o.critic.epsilon = cell.epsilon;
            o.critic.lambda = cfg.lambda;
            o.critic.delta = cfg.delta;
            o.T = cfg.T;
            o.eta = cfg.eta;
            row.subopt = suboptimality(m, run_actor_critic(ds, m.features(), o, cell.seed).mixture);
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return row;
}

int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("SPARSE_ORL_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return n;
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg) {
    const std::vector<Cell> cells = enumerate_cells(cfg);
    std::vector<ResultRow> rows(cells.size());
    std::vector<char> ready(cells.size(), 0);
    std::size_t flushed = 0;
    std::mutex mu;

    std::ofstream csv;
    if (!cfg.output.empty()) {
        csv.open(cfg.output, std::ios::binary | std::ios::trunc);
        if (!csv) throw Error("cannot write " + cfg.output);
        csv << kResultCsvHeader << '\n';
        csv.flush();
    }

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            ResultRow r = run_cell(cfg, cells[i]);
            std::lock_guard<std::mutex> lock(mu);
            rows[i] = std::move(r);
            ready[i] = 1;
            while (flushed < cells.size() && ready[flushed]) {
                if (csv.is_open()) csv << to_csv_line(rows[flushed]) << '\n';
                ++flushed;
            }
            if (csv.is_open()) csv.flush();
        }
    };
    const int workers = std::min<int>(worker_count(), static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    if (!cfg.output.empty()) {
        json manifest;
        manifest["config"] = config_to_json(cfg);
        manifest["cells"] = cells.size();
        json jitter = json::array();
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].kappa_jitter) jitter.push_back(i);
        manifest["kappa_jitter_cells"] = jitter;
        write_file(cfg.output + ".manifest.json", manifest.dump(2) + "\n");
    }
    return rows;
}

}  // namespace sorl
