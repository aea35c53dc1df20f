#include "test_support.hpp"

#include "sorl/errors.hpp"
#include "sorl/harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace sorl;

namespace {

// Cyclic Jacobi in long double; returns the eigenvalues.
std::vector<long double> jacobi_eigenvalues(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    std::vector<std::vector<long double>> a(n, std::vector<long double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[i][j] = m(i, j);
    for (int sweep = 0; sweep < 100; ++sweep) {
        long double off = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-36L) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (a[p][q] == 0) continue;
                const long double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const long double t = (theta >= 0 ? 1 : -1) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
                const long double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const long double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const long double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<long double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a[i][i];
    return ev;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string strip_wall_ms(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cols.push_back(c);
        if (cols.size() >= 12) cols[11].clear();
        for (const auto& col : cols) out += col + ',';
        out += '\n';
    }
    return out;
}

ExperimentConfig small_config(const std::string& output) {
    ExperimentConfig c;
    c.mdp_seed = 7;
    c.algorithm = Algorithm::actor_critic;
    c.critic.oracle = Oracle::srle1;
    c.T = 3;
    c.eta = 1.0;
    c.grid_N = {150};
    c.grid_epsilon = {0.0, 0.1};
    c.attack = {AttackKind::reward_poison, 1.0, TargetSelection::random};
    c.seeds = {1, 2};
    c.output = output;
    return c;
}

}  // namespace

TEST_CASE("compute_xi on fixed matrices") {
    CHECK(compute_xi(Eigen::MatrixXd::Identity(4, 4)) == doctest::Approx(1.0));
    CHECK(compute_xi(Eigen::Vector2d(2.0, 0.5).asDiagonal().toDenseMatrix()) == doctest::Approx(0.5));
}

TEST_CASE("compute_xi agrees with a long double eigensolve") {
    CounterRng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd M(8, 8);
        for (int i = 0; i < 64; ++i) M(i) = rng.uniform(-1, 1);
        const Eigen::MatrixXd sigma = M * M.transpose() / 8.0;
        const auto ev = jacobi_eigenvalues(sigma);
        const long double lo = *std::min_element(ev.begin(), ev.end());
        CHECK(std::abs(compute_xi(sigma) - static_cast<double>(lo)) <= 1e-8);
        // det(Sigma - xi I) vanishes at the root
        const Eigen::MatrixXd shifted = sigma - compute_xi(sigma) * Eigen::MatrixXd::Identity(8, 8);
        CHECK(std::abs(shifted.determinant()) <= 1e-8);
    }
}

TEST_CASE("kappa is one when the behavior is the optimal policy") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        MdpConfig c;
        const auto m = build_random_sparse_mdp(c, seed);
        const Policy opt(exact_optimal(m).policy);
        const KappaReport k = compute_kappa(m, opt, 2);
        REQUIRE(k.per_step.size() == 3);
        for (double v : k.per_step) {
            CHECK(v <= 1.0 + 1e-8);
            CHECK(v >= 1.0 - 1e-8);
        }
    }
}

TEST_CASE("kappa of a diagonal pencil") {
    Eigen::VectorXd diag = Eigen::VectorXd::Ones(5);
    diag(3) = 3.0;
    const std::vector<Eigen::MatrixXd> star{diag.asDiagonal().toDenseMatrix()};
    const std::vector<Eigen::MatrixXd> sig{Eigen::MatrixXd::Identity(5, 5)};
    for (int two_s : {1, 2, 4}) {
        const KappaReport k = compute_kappa(star, sig, two_s);
        CHECK(k.max == doctest::Approx(3.0));
        CHECK_FALSE(k.jitter_used);
    }
}

TEST_CASE("kappa matches a random sparse direction search") {
    CounterRng rng(9);
    for (int trial = 0; trial < 3; ++trial) {
        Eigen::MatrixXd A(8, 8), B(8, 8);
        for (int i = 0; i < 64; ++i) {
            A(i) = rng.uniform(-1, 1);
            B(i) = rng.uniform(-1, 1);
        }
        const Eigen::MatrixXd star = A * A.transpose() / 8.0;
        const Eigen::MatrixXd sig = B * B.transpose() / 8.0 + 0.2 * Eigen::MatrixXd::Identity(8, 8);
        // s = 1: z ranges over two-sparse directions
        const double kappa = compute_kappa({star}, {sig}, 2).max;
        double best = 0.0;
        for (int k = 0; k < 100000; ++k) {
            const int i = static_cast<int>(rng.below(8));
            int j = static_cast<int>(rng.below(7));
            if (j >= i) ++j;
            Eigen::VectorXd z = Eigen::VectorXd::Zero(8);
            z(i) = rng.normal();
            z(j) = rng.normal();
            best = std::max(best, z.dot(star * z) / z.dot(sig * z));
        }
        CHECK(best <= kappa * (1.0 + 1e-10));
        CHECK(best >= 0.99 * kappa);
    }
}

TEST_CASE("kappa is at least one and grows with the support size") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        MdpConfig c;
        const auto m = build_random_sparse_mdp(c, 20 + seed);
        const Policy beh = Policy::uniform(6, 3, 3);
        const auto star = policy_covariances(m, Policy(exact_optimal(m).policy));
        const auto sig = policy_covariances(m, beh);
        // step 0 only visits x1, so its pencil is singular; use later steps
        const std::vector<Eigen::MatrixXd> star_t(star.begin() + 1, star.end()), sig_t(sig.begin() + 1, sig.end());
        double prev = 0.0;
        for (int two_s : {1, 2, 3}) {
            const KappaReport k = compute_kappa(star_t, sig_t, two_s);
            CHECK_FALSE(k.jitter_used);
            CHECK(k.max >= 1.0 - 1e-9);
            CHECK(k.max >= prev - 1e-9);
            prev = k.max;
        }
    }
}

TEST_CASE("xi of the signed-binary generator clears the floor") {
    // With a fixed initial state the first-step covariance has rank at most |A|,
    // so the floor applies to the later steps.
    const double floor = 1e-3;
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        MdpConfig c;
        const auto m = build_random_sparse_mdp(c, seed);
        const auto sig = policy_covariances(m, Policy::uniform(6, 3, 3));
        double xi = std::numeric_limits<double>::infinity();
        for (int h = 1; h < 3; ++h) xi = std::min(xi, compute_xi(sig[h]));
        if (xi >= floor) ++ok;
    }
    CHECK(ok >= 45);
}

TEST_CASE("config JSON round trip") {
    ExperimentConfig c = small_config("out.csv");
    c.algorithm = Algorithm::lsvi;
    c.oracle = Oracle::srle2;
    c.bonus.kind = BonusKind::dense;
    c.bonus.alpha_scale = 0.3;
    c.critic.variant = CriticVariant::pess_opt;
    c.critic.alpha = {0.1, 0.2, 0.3};
    c.grid_d = {10, 25};
    c.pi_star_weight = 0.25;
    const json j = config_to_json(c);
    const ExperimentConfig back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.mdp_seed == std::optional<std::uint64_t>(7));
    CHECK(back.grid_d == std::vector<int>{10, 25});
    CHECK(back.critic.alpha == std::vector<double>{0.1, 0.2, 0.3});
}

TEST_CASE("config schema violations raise ConfigError") {
    const json good = config_to_json(small_config(""));
    CHECK_NOTHROW(config_from_json(good));
    auto with = [&](const char* key, json v) {
        json j = good;
        j[key] = std::move(v);
        return j;
    };
    auto with_grid = [&](const char* key, json v) {
        json j = good;
        j["grid"][key] = std::move(v);
        return j;
    };
    json no_schema = good;
    no_schema.erase("schema");
    CHECK_THROWS_AS(config_from_json(no_schema), ConfigError);
    CHECK_THROWS_AS(config_from_json(with("schema", "sparse-orl/2")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
    CHECK_THROWS_AS(config_from_json(with("algorithm", "dqn")), ConfigError);
    CHECK_THROWS_AS(config_from_json(with("oracle", "srle9")), ConfigError);
    CHECK_THROWS_AS(config_from_json(with("seeds", json::array())), ConfigError);
    CHECK_THROWS_AS(config_from_json(with_grid("N", json::array())), ConfigError);
    CHECK_THROWS_AS(config_from_json(with_grid("N", "many")), ConfigError);
    CHECK_THROWS_AS(config_from_json(with_grid("epsilon", {0.5})), ConfigError);
    CHECK_THROWS_AS(config_from_json(with_grid("s", {30})), ConfigError);
}

TEST_CASE("a one-cell sweep yields one row") {
    ExperimentConfig c = small_config("");
    c.grid_epsilon = {0.0};
    c.seeds = {3};
    const auto rows = run_sweep(c);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].error.empty());
    CHECK(rows[0].subopt >= -1e-8);
    CHECK(rows[0].kappa >= 1.0 - 1e-9);
    CHECK(rows[0].N == 150);
    CHECK(rows[0].seed == 3);
}

TEST_CASE("cells enumerate d, s, N, epsilon, seed in order") {
    ExperimentConfig c;
    c.grid_d = {8, 10};
    c.grid_N = {100, 200};
    c.grid_epsilon = {0.0, 0.1};
    c.seeds = {1, 2, 3};
    const auto cells = enumerate_cells(c);
    REQUIRE(cells.size() == 24);
    CHECK(cells[0].d == 8);
    CHECK(cells[1].seed == 2);
    CHECK(cells[3].epsilon == 0.1);
    CHECK(cells[6].N == 200);
    CHECK(cells[12].d == 10);
}

TEST_CASE("per-cell errors are recorded without aborting the sweep") {
    ExperimentConfig c = small_config("");
    c.grid_epsilon = {0.0};
    c.critic.variant = CriticVariant::pess_opt;
    c.critic.oracle = Oracle::ols;
    c.critic.alpha = {1e-9, 1e-9, 1e-9};
    c.seeds = {1, 2};
    const auto rows = run_sweep(c);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK_FALSE(r.error.empty());
        CHECK(to_csv_line(r).find(r.error.substr(0, 10)) != std::string::npos);
    }
}

TEST_CASE("sweeps are deterministic apart from wall time") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "sorl_sweep_test";
    fs::create_directories(dir);
    const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
    run_sweep(small_config(a));
    run_sweep(small_config(b));
    const std::string ca = read_file(a), cb = read_file(b);
    CHECK(ca.rfind(std::string(kResultCsvHeader) + "\n", 0) == 0);
    CHECK(std::count(ca.begin(), ca.end(), '\n') == 5);
    CHECK(strip_wall_ms(ca) == strip_wall_ms(cb));
    const json manifest = json::parse(read_file(a + ".manifest.json"));
    CHECK(manifest.at("cells") == 4);
    CHECK(manifest.at("config") == config_to_json(small_config(a)));
    fs::remove_all(dir);
}

TEST_CASE("CSV formatting") {
    ResultRow r;
    r.algorithm = "lsvi";
    r.oracle = "srle2";
    r.N = 100;
    r.d = 12;
    r.s = 2;
    r.epsilon = 0.1;
    r.H = 3;
    r.seed = 4;
    r.subopt = 0.25;
    r.kappa = std::numeric_limits<double>::quiet_NaN();
    r.xi = 0.0;
    r.wall_ms = 1.5;
    r.error = "bad, thing";
    CHECK(to_csv_line(r) == "lsvi,srle2,100,12,2,0.1,3,4,0.25,nan,0,1.5,bad; thing");
    CHECK(std::string(kResultCsvHeader) == "algorithm,oracle,N,d,s,epsilon,H,seed,subopt,kappa,xi,wall_ms,error");
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("median suboptimality in a sweep does not drop under corruption") {
    ExperimentConfig c;
    c.mdp_seed = 7;
    c.algorithm = Algorithm::actor_critic;
    c.T = 20;
    c.eta = 1.0;
    c.grid_N = {1000};
    c.grid_epsilon = {0.0, 0.1};
    c.attack = {AttackKind::reward_poison, 1.0, TargetSelection::high_reward_first};
    c.seeds = {1, 2, 3, 4, 5};
    c.compute_metrics = false;
    const auto rows = run_sweep(c);
    std::vector<double> clean, dirty;
    for (const auto& r : rows) {
        CHECK(r.error.empty());
        (r.epsilon == 0.0 ? clean : dirty).push_back(r.subopt);
    }
    MESSAGE("median subopt eps=0: " << median(clean) << ", eps=0.1: " << median(dirty));
    CHECK(median(dirty) >= median(clean));
}
